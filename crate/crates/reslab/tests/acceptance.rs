//! Acceptance suite. Each test covers one release criterion and prints a
//! single PASS/FAIL line before asserting, so the full scorecard is visible
//! in the test output.

use num_complex::Complex64;
use reslab::problems::SpectrumSpec;
use reslab::{
    basin_escape_study, builtin, classify_equilibrium, consistency_exponent,
    degenerate_saddle_study, eigs, field_jacobian_at, map_jacobian_at, random_quadratic,
    resolution_field, rk4_integrate, set_convergence_study, step_bounds, transfer_study,
    AlgorithmId, BoundsOptions, DegenerateOptions, Dynamics, EscapeOptions, HyperParams, Kind,
    Matrix, Point, ResolutionOrder, SetConvergenceOptions, TransferOptions, Vector, Verdict,
};

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {criterion}: {} - {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}

fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

// Criterion 1: one algorithm step matches the time-s flow of its companion
// field to order s^2 (leading) and s^3 (step-corrected), slope-fitted over
// s in logspace(1e-3, 1e-1, 8).
#[test]
fn criterion_1_consistency_orders() {
    let grid = logspace(1e-3, 1e-1, 8);
    let z0 = Point::from_slice(&[0.4, 0.3]).unwrap();
    let p = HyperParams::new(0.1, 1.0, 1.0, 3.0).unwrap();
    let algs = [
        AlgorithmId::TtGda,
        AlgorithmId::Geg,
        AlgorithmId::TtPpm,
        AlgorithmId::Dn,
        AlgorithmId::Rdn,
    ];
    let mut failures = Vec::new();
    for prob_id in ["quad_saddle", "bilinear"] {
        let obj = builtin(prob_id).unwrap().objective;
        for alg in algs {
            for (order, range) in
                [(ResolutionOrder::O1, (1.8, 2.2)), (ResolutionOrder::Os, (2.8, 3.2))]
            {
                let rep = consistency_exponent(alg, order, &obj, &p, &z0, &grid).unwrap();
                match rep.slope {
                    Some(s) if s >= range.0 && s <= range.1 => {}
                    Some(s) => failures.push(format!("{alg}/{order} on {prob_id}: slope {s:.3}")),
                    None => failures.push(format!("{alg}/{order} on {prob_id}: indeterminate")),
                }
            }
        }
        let rep = consistency_exponent(
            AlgorithmId::Jm,
            ResolutionOrder::O1,
            &obj,
            &p,
            &z0,
            &grid,
        )
        .unwrap();
        match rep.slope {
            Some(s) if (1.8..=2.2).contains(&s) => {}
            other => failures.push(format!("jm/o1 on {prob_id}: {other:?}")),
        }
    }
    let pass = failures.is_empty();
    report(
        "criterion 1 (consistency orders)",
        pass,
        &if pass { "all slopes in range".to_string() } else { failures.join("; ") },
    );
    assert!(pass, "{failures:?}");
}

// Criterion 2: on seeded random quadratics, a stable corrected-field verdict
// at the saddle transfers to the step map and to observed geometric decay
// whenever s sits below the computed step bound.
#[test]
fn criterion_2_stability_transfer_on_random_quadratics() {
    let spec = SpectrumSpec::default();
    let origin2 = Point::from_slice(&[0.0, 0.0]).unwrap();
    let origin4 = Point::from_slice(&[0.0; 4]).unwrap();
    let opts = TransferOptions { trials: 50, radius: 0.3, max_iters: 800, ..Default::default() };
    let mut checked = 0usize;
    let mut failures = Vec::new();

    for seed in 0..20u64 {
        let (n, m, z_star) =
            if seed % 2 == 0 { (1, 1, &origin2) } else { (2, 2, &origin4) };
        let prob = random_quadratic(n, m, seed, &spec).unwrap();
        let obj = &prob.objective;
        // skip the (measure-zero) case of purely imaginary spectra
        let h = reslab::eval_h(obj, z_star).unwrap();
        if eigs(&h).unwrap().iter().any(|l| l.re.abs() < 1e-6) {
            continue;
        }

        // each entry carries final hyperparameters with s already below the
        // smallest finite bound the calculator emits
        let mut configs: Vec<(AlgorithmId, HyperParams)> = Vec::new();
        for gamma in [0.5, 1.0, 1.5] {
            let p = HyperParams::new(0.1, 1.0, gamma, 1.0).unwrap();
            let b = step_bounds(AlgorithmId::Geg, obj, z_star, &p, &small_box()).unwrap();
            let s = 0.9 * b.effective_s_max().unwrap();
            configs.push((AlgorithmId::Geg, p.replace_s(s).unwrap()));
        }
        {
            let p = HyperParams::with_s(0.1).unwrap();
            let b = step_bounds(AlgorithmId::TtPpm, obj, z_star, &p, &small_box()).unwrap();
            let s = 0.9 * b.effective_s_max().unwrap();
            configs.push((AlgorithmId::TtPpm, p.replace_s(s).unwrap()));
        }
        {
            let p = HyperParams::with_s(0.1).unwrap();
            let b = step_bounds(AlgorithmId::Dn, obj, z_star, &p, &small_box()).unwrap();
            // quadratic: the only finite bound is the diffeomorphism bound,
            // so of {0.1, 1, 10} only the steps below it are asserted
            let s_cap = b.effective_s_max().unwrap();
            for s in [0.1, 1.0, 10.0] {
                if s < s_cap {
                    configs.push((AlgorithmId::Dn, HyperParams::with_s(s).unwrap()));
                }
            }
        }
        {
            let p0 = HyperParams::new(0.1, 1.0, 1.0, 1.0).unwrap();
            let probe = step_bounds(AlgorithmId::Rdn, obj, z_star, &p0, &small_box()).unwrap();
            if let Some(phi_min) = probe.phi_min {
                let p = HyperParams::new(0.1, 1.0, 1.0, 1.5 * phi_min).unwrap();
                let b = step_bounds(AlgorithmId::Rdn, obj, z_star, &p, &small_box()).unwrap();
                let s = 0.9 * b.effective_s_max().unwrap();
                configs.push((AlgorithmId::Rdn, p.replace_s(s).unwrap()));
            }
        }

        for (alg, p) in configs {
            let field = resolution_field(alg, ResolutionOrder::Os, obj, &p).unwrap();
            let cont =
                classify_equilibrium(Kind::Continuous, &field_jacobian_at(&field, z_star).unwrap())
                    .unwrap();
            if cont.verdict != Verdict::ExpStable {
                continue;
            }
            checked += 1;
            let res = transfer_study(alg, obj, z_star, &[p], &opts).unwrap();
            let pt = &res.points[0];
            if pt.discrete.verdict != Verdict::ExpStable {
                failures.push(format!(
                    "seed {seed} {alg} s={:.4}: map verdict {:?}",
                    p.s, pt.discrete.verdict
                ));
            } else if pt.frac_decaying < 0.95 {
                failures.push(format!(
                    "seed {seed} {alg} s={:.4}: decay fraction {:.3}",
                    p.s, pt.frac_decaying
                ));
            }
        }
    }

    let pass = failures.is_empty() && checked > 0;
    report(
        "criterion 2 (stability transfer)",
        pass,
        &format!("{checked} stable configurations checked; failures: {failures:?}"),
    );
    assert!(pass, "{failures:?}");
}

fn small_box() -> BoundsOptions {
    BoundsOptions { samples: 500, ..Default::default() }
}

// Criterion 3: qualitative algorithm comparison on the canonical pair of
// quadratics: explicit descent-ascent spirals out on x*y, extragradient and
// the proximal step contract, the rotation-dominance flag fires, and the
// Jacobian method blows up on x^2 - y^2.
#[test]
fn criterion_3_qualitative_table() {
    let mut failures = Vec::new();
    let bil = builtin("bilinear").unwrap().objective;
    let origin = Point::from_slice(&[0.0, 0.0]).unwrap();

    for s in [0.05, 0.1, 0.2, 0.4] {
        let p = HyperParams::with_s(s).unwrap();
        let map = reslab::dta_map(AlgorithmId::TtGda, &bil, &p);
        let rep =
            classify_equilibrium(Kind::Discrete, &map_jacobian_at(map, &origin).unwrap()).unwrap();
        if rep.verdict != Verdict::Unstable {
            failures.push(format!("tt-gda s={s}: {:?}", rep.verdict));
        }
    }
    for (alg, s_list) in [
        (AlgorithmId::Geg, vec![0.1, 0.5, 0.9]),
        (AlgorithmId::TtPpm, vec![0.1, 1.0, 1.9]),
    ] {
        for s in s_list {
            let p = HyperParams::with_s(s).unwrap();
            let map = reslab::dta_map(alg, &bil, &p);
            let rep = classify_equilibrium(Kind::Discrete, &map_jacobian_at(map, &origin).unwrap())
                .unwrap();
            if rep.verdict != Verdict::ExpStable {
                failures.push(format!("{alg} s={s}: {:?}", rep.verdict));
            }
        }
    }
    let jm = step_bounds(
        AlgorithmId::Jm,
        &bil,
        &origin,
        &HyperParams::with_s(0.1).unwrap(),
        &small_box(),
    )
    .unwrap();
    if !jm.per_eigen_jm.unwrap().iter().all(|&(_, ok)| ok) {
        failures.push("jm flag not satisfied on bilinear".into());
    }

    let quad = builtin("quad_saddle").unwrap().objective;
    let stop = reslab::StopRule {
        max_iters: 10_000,
        tol_f: None,
        target_point: None,
        target_set: None,
        divergence_radius: Some(1e6),
        stride: 100,
    };
    let traj = reslab::iterate(
        AlgorithmId::Jm,
        &quad,
        &HyperParams::with_s(0.1).unwrap(),
        &Point::from_slice(&[1.0, 1.0]).unwrap(),
        &stop,
    )
    .unwrap();
    if traj.termination != reslab::Termination::Diverged {
        failures.push(format!("jm on quad_saddle: {:?}", traj.termination));
    }

    let pass = failures.is_empty();
    report(
        "criterion 3 (qualitative table)",
        pass,
        &if pass { "all verdicts as expected".into() } else { failures.join("; ") },
    );
    assert!(pass, "{failures:?}");
}

// Criterion 4: bound calculators against the hand-computed oracle script.
#[test]
fn criterion_4_bound_calculators() {
    let origin = Point::from_slice(&[0.0, 0.0]).unwrap();
    let quad = builtin("quad_saddle").unwrap().objective;
    let bil = builtin("bilinear").unwrap().objective;
    let p = HyperParams::new(0.1, 1.0, 1.0, 3.0).unwrap();

    let tt = step_bounds(AlgorithmId::TtGda, &quad, &origin, &p, &small_box()).unwrap();
    let geg = step_bounds(AlgorithmId::Geg, &bil, &origin, &p, &small_box()).unwrap();
    let rdn = step_bounds(AlgorithmId::Rdn, &quad, &origin, &p, &small_box()).unwrap();

    let oracle = std::process::Command::new("python3")
        .arg(concat!(env!("CARGO_MANIFEST_DIR"), "/../../tools/bounds_oracle.py"))
        .output()
        .expect("oracle script must run");
    assert!(oracle.status.success(), "oracle script failed");
    let text = String::from_utf8(oracle.stdout).unwrap();
    let pick = |key: &str| -> f64 {
        let at = text.find(key).unwrap_or_else(|| panic!("oracle missing {key}"));
        let rest = &text[at + key.len()..];
        let rest = rest.trim_start_matches([':', ' ', '"']);
        rest.split(|c: char| c == ',' || c == '}').next().unwrap().trim().parse().unwrap()
    };

    let mut failures = Vec::new();
    let tt_s = tt.s_max_stability.unwrap();
    if (tt_s - pick("tt_gda_quad_saddle_s_max")).abs() > 1e-12 {
        failures.push(format!("tt-gda bound {tt_s}"));
    }
    let geg_s = geg.s_max_stability.unwrap();
    if (geg_s - pick("geg_bilinear_s_max")).abs() > 1e-12 || geg.flags.re_nonzero {
        failures.push(format!("geg bound {geg_s} (spectral cap should be unbounded)"));
    }
    let phi_min = rdn.phi_min.unwrap();
    if (phi_min - pick("rdn_quad_saddle_phi_min")).abs() > 1e-12 {
        failures.push(format!("rdn phi_min {phi_min}"));
    }

    let pass = failures.is_empty();
    report(
        "criterion 4 (bound calculators)",
        pass,
        &format!("tt-gda {tt_s}, geg {geg_s}, rdn phi_min {phi_min}"),
    );
    assert!(pass, "{failures:?}");
}

// Criterion 5: at the repelling origin of f = -x^2 + y^2, almost every start
// escapes for each algorithm run inside its diffeomorphism bound.
//
// The damped-Newton subcase cannot pass: at any nondegenerate critical point
// its step map linearizes to (1 - s) I regardless of the saddle structure,
// so the "repeller" is actually attracting for s in (0, 2) and the escape
// fraction is 0, not 1. The criterion is asserted as written and this is the
// expected failure.
#[test]
fn criterion_5_escape_statistics() {
    let prob = builtin("antisaddle").unwrap();
    let origin = Point::from_slice(&[0.0, 0.0]).unwrap();
    let opts = EscapeOptions { trials: 1000, max_iters: 2000, ..Default::default() };
    let configs = [
        (AlgorithmId::TtGda, HyperParams::with_s(0.1).unwrap()),
        (AlgorithmId::TtPpm, HyperParams::with_s(0.2).unwrap()),
        (AlgorithmId::Dn, HyperParams::with_s(0.5).unwrap()),
        (AlgorithmId::Rdn, HyperParams::new(0.2, 1.0, 1.0, 3.0).unwrap()),
    ];
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for (alg, p) in configs {
        let res = basin_escape_study(alg, &prob.objective, &origin, &p, &opts).unwrap();
        details.push(format!("{alg}: {}", res.escape_fraction));
        if res.escape_fraction != 1.0 {
            failures.push(format!("{alg}: escape fraction {}", res.escape_fraction));
        }
    }
    let pass = failures.is_empty();
    report("criterion 5 (escape statistics)", pass, &details.join(", "));
    assert!(
        pass,
        "{failures:?} (dn is expected to fail: its step map is (1-s)I at any \
         nondegenerate critical point, which attracts for s in (0,2))"
    );
}

// Criterion 6: the blended compact-attractor problem. Field trajectories from
// r = 1.5 should reach distance 1e-6 from the unit ball by t = 20, the
// explicit map with s = 0.05 should get within 1e-4 in 1e4 steps, and
// interior starts are exactly fixed.
//
// The field subcase cannot pass for arbitrary start angles: trajectories
// attracted to the x = +-y diagonal see a quadratically degenerate blend and
// creep in like 1/t, stalling near 3.4e-4 at t = 20. Asserted as written;
// this is the expected failure.
#[test]
fn criterion_6_compact_attractor() {
    let prob = builtin("compact_attractor").unwrap();
    let p = HyperParams::with_s(0.05).unwrap();
    let mut failures = Vec::new();

    let field_opts = SetConvergenceOptions {
        trials: 20,
        annulus: (1.5, 1.5),
        dt: 0.01,
        success_tol: 1e-6,
        ..Default::default()
    };
    let field_res = set_convergence_study(
        Dynamics::Field(AlgorithmId::TtGda, ResolutionOrder::O1),
        &prob,
        &p,
        &field_opts,
    )
    .unwrap();
    let worst_field = field_res
        .trials
        .iter()
        .map(|t| t.final_set_distance)
        .fold(0.0f64, f64::max);
    if field_res.successes != field_res.trials.len() {
        failures.push(format!(
            "field: {}/{} reached 1e-6 (worst final distance {worst_field:.3e})",
            field_res.successes,
            field_res.trials.len()
        ));
    }

    let dta_opts = SetConvergenceOptions {
        trials: 20,
        annulus: (1.5, 1.5),
        max_iters: 10_000,
        success_tol: 1e-4,
        ..Default::default()
    };
    let dta_res =
        set_convergence_study(Dynamics::Dta(AlgorithmId::TtGda), &prob, &p, &dta_opts).unwrap();
    let worst_dta =
        dta_res.trials.iter().map(|t| t.final_set_distance).fold(0.0f64, f64::max);
    if dta_res.successes != dta_res.trials.len() {
        failures.push(format!(
            "dta: {}/{} reached 1e-4 (worst {worst_dta:.3e})",
            dta_res.successes,
            dta_res.trials.len()
        ));
    }
    if dta_res.interior_fixed != dta_res.interior_checked {
        failures.push(format!(
            "interior: {}/{} fixed",
            dta_res.interior_fixed, dta_res.interior_checked
        ));
    }

    let pass = failures.is_empty();
    report(
        "criterion 6 (compact attractor)",
        pass,
        &format!(
            "field worst {worst_field:.3e} (need <=1e-6), dta worst {worst_dta:.3e} \
             (need <=1e-4), interior fixed {}/{}",
            dta_res.interior_fixed, dta_res.interior_checked
        ),
    );
    assert!(
        pass,
        "{failures:?} (the field subcase is expected to fail: near-diagonal starts \
         decay only algebraically through the quadratically degenerate blend)"
    );
}

// Criterion 7: the degenerate saddle of f = x^2 - y^4. All four methods from
// B_0.3(0) should reach |z| <= 1e-4 within 1e5 steps at s = 0.05, and the
// Newton leading-order field away from the origin is (-x, -y/3).
//
// The explicit and proximal subcases cannot pass: the y-update
// y+ = y - 4 s y^3 decays like k^(-1/2), leaving |z| near 5e-3 after 1e5
// iterations. Asserted as written; this is the expected failure.
#[test]
fn criterion_7_degenerate_saddle() {
    let prob = builtin("x2y4").unwrap();
    let p = HyperParams::with_s(0.05).unwrap();
    let opts = DegenerateOptions { trials: 5, max_iters: 100_000, ..Default::default() };
    let res = degenerate_saddle_study(
        &prob,
        &[AlgorithmId::TtGda, AlgorithmId::Geg, AlgorithmId::TtPpm, AlgorithmId::Dn],
        &p,
        &opts,
    )
    .unwrap();
    let mut failures = Vec::new();
    let mut details = Vec::new();
    for ar in &res.per_algorithm {
        details.push(format!("{}: {}/{}", ar.algorithm, ar.converged, ar.trials.len()));
        if ar.converged != ar.trials.len() {
            failures.push(format!(
                "{}: {}/{} converged ({} solver errors)",
                ar.algorithm,
                ar.converged,
                ar.trials.len(),
                ar.solver_errors
            ));
        }
    }

    let field = resolution_field(AlgorithmId::Dn, ResolutionOrder::O1, &prob.objective, &p)
        .unwrap();
    let g = field.eval(&Vector::from_vec(vec![2.0, 1.0])).unwrap();
    if (g[0] + 2.0).abs() > 1e-10 || (g[1] + 1.0 / 3.0).abs() > 1e-10 {
        failures.push(format!("dn field at (2,1): ({}, {})", g[0], g[1]));
    }

    let pass = failures.is_empty();
    report("criterion 7 (degenerate saddle)", pass, &details.join(", "));
    assert!(
        pass,
        "{failures:?} (explicit/proximal subcases are expected to fail: the cubic \
         y-update decays like k^(-1/2), far slower than the budget allows)"
    );
}

// Criterion 8: numerics substrate. Eigensolver residuals against a
// characteristic-polynomial oracle (dim <= 4) and a spectral-radius power
// oracle (dim <= 8), plus the RK4 order check.
#[test]
fn criterion_8_numerics_substrate() {
    let mut rng = reslab::sampling::rng_for(2024);
    let mut failures = Vec::new();

    for trial in 0..200 {
        let d = 2 + (trial % 7); // 2..=8
        let a = Matrix::from_fn(d, d, |_, _| reslab::sampling::standard_normal(&mut rng));
        let spec = eigs(&a).unwrap();
        let norm = a.norm();

        if d <= 4 {
            let coeffs = charpoly(&a);
            let tol = 1e-8 * norm.powi(d as i32);
            for l in &spec {
                let r = eval_poly(&coeffs, *l).norm();
                if r > tol {
                    failures.push(format!("trial {trial} d={d}: charpoly residual {r:.3e}"));
                }
            }
        }

        // spectral radius via norm of a repeatedly squared power
        let rho = spec.iter().map(|l| l.norm()).fold(0.0, f64::max);
        let mut pw = a.clone() / norm; // scale to avoid overflow
        for _ in 0..6 {
            pw = &pw * &pw; // A^64 up to the norm scaling
        }
        let est = norm * pw.norm().powf(1.0 / 64.0);
        if rho > 1e-8 && (est / rho).ln().abs() > 0.5 {
            failures.push(format!("trial {trial} d={d}: power oracle {est:.4} vs {rho:.4}"));
        }
    }

    // RK4 order on the linear test equation
    let field = reslab::VectorField::from_parts(1, "decay", |z: &Vector| Ok(-z.clone()), None);
    let z0 = Point::from_slice(&[1.0]).unwrap();
    let exact = (-1.0f64).exp();
    let err = |dt: f64| {
        (rk4_integrate(&field, &z0, 1.0, dt, usize::MAX).unwrap().last_state()[0] - exact).abs()
    };
    let ratio = err(0.1) / err(0.05);
    if !(12.0..=20.0).contains(&ratio) {
        failures.push(format!("rk4 order ratio {ratio:.2}"));
    }

    let pass = failures.is_empty();
    report(
        "criterion 8 (numerics substrate)",
        pass,
        &format!("200 spectra cross-checked, rk4 ratio {ratio:.2}"),
    );
    assert!(pass, "{failures:?}");
}

/// Monic characteristic polynomial coefficients c so that
/// p(l) = l^d + c[0] l^(d-1) + ... + c[d-1], by the Faddeev-LeVerrier
/// trace recursion.
fn charpoly(a: &Matrix) -> Vec<f64> {
    let d = a.nrows();
    let mut coeffs = Vec::with_capacity(d);
    let mut m = a.clone();
    for k in 1..=d {
        let c = -m.trace() / k as f64;
        coeffs.push(c);
        if k < d {
            m = a * (&m + Matrix::identity(d, d) * c);
        }
    }
    coeffs
}

fn eval_poly(coeffs: &[f64], l: Complex64) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    for &c in coeffs {
        acc = acc * l + Complex64::new(c, 0.0);
    }
    acc
}
