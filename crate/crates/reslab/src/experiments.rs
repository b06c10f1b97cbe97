//! Batch studies: stability transfer across step sizes, escape statistics at
//! repelling points, convergence to a compact invariant set, and behavior at
//! degenerate saddles. Trials are seeded individually and run in parallel;
//! records are sorted by seed so summaries are order-independent.

use rayon::prelude::*;
use serde::Serialize;

use crate::algorithms::{iterate, step, AlgorithmId, StopRule};
use crate::error::{Error, Result};
use crate::fields::{eval_f, HyperParams, Objective, Point, Vector};
use crate::odes::{resolution_field, rk4_integrate, ResolutionOrder};
use crate::problems::ProblemSpec;
use crate::sampling;
use crate::stability::{
    classify_equilibrium, field_jacobian_at, map_jacobian_at, Kind, SpectrumReport, Verdict,
};
use crate::trajectory::{DecayFit, Termination, Trajectory};

#[derive(Clone, Debug, Serialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub termination: Termination,
    pub iters: f64,
    pub final_distance: f64,
    pub decay: Option<DecayFit>,
    pub error: Option<String>,
}

fn sort_records<T>(records: &mut [T], seed_of: impl Fn(&T) -> u64) {
    records.sort_by_key(|r| seed_of(r));
}

// ---------------------------------------------------------------------------
// stability transfer

#[derive(Clone, Debug, Serialize)]
pub struct TransferPoint {
    pub params: HyperParams,
    pub continuous: SpectrumReport,
    pub discrete: SpectrumReport,
    pub trials: Vec<TrialRecord>,
    /// Fraction of trials whose log-distance fit decays with R^2 >= 0.95.
    pub frac_decaying: f64,
    pub all_agree_stable: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct TransferStudyResult {
    pub algorithm: AlgorithmId,
    pub points: Vec<TransferPoint>,
    /// Largest s in the grid for which field verdict, map verdict, and the
    /// empirical decay fraction all certify stability.
    pub empirical_s_star: Option<f64>,
    pub wall_clock_secs: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct TransferOptions {
    pub trials: usize,
    pub radius: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// R^2 floor for a trial to count as geometric decay.
    pub r_squared_min: f64,
    /// Fraction of decaying trials required for empirical agreement.
    pub decay_fraction_min: f64,
}

impl Default for TransferOptions {
    fn default() -> Self {
        Self {
            trials: 50,
            radius: 0.5,
            max_iters: 2000,
            seed: 0,
            r_squared_min: 0.95,
            decay_fraction_min: 0.95,
        }
    }
}

/// For each hyperparameter point: classify the step-corrected companion field
/// at z_star (continuous), classify the step-map Jacobian (discrete), and fit
/// geometric decay on random local trajectories. JM carries no corrected
/// field, so its leading-order field is classified instead.
pub fn transfer_study(
    alg: AlgorithmId,
    obj: &Objective,
    z_star: &Point,
    p_grid: &[HyperParams],
    opts: &TransferOptions,
) -> Result<TransferStudyResult> {
    let t0 = std::time::Instant::now();
    if eval_f(obj, z_star)?.amax() > 1e-10 {
        return Err(Error::NotAnEquilibrium(eval_f(obj, z_star)?.amax()));
    }
    let order = if alg == AlgorithmId::Jm { ResolutionOrder::O1 } else { ResolutionOrder::Os };

    let mut points = Vec::with_capacity(p_grid.len());
    for (pi, p) in p_grid.iter().enumerate() {
        let field = resolution_field(alg, order, obj, p)?;
        let continuous = classify_equilibrium(Kind::Continuous, &field_jacobian_at(&field, z_star)?)?;
        let map = crate::algorithms::dta_map(alg, obj, p);
        let discrete = classify_equilibrium(Kind::Discrete, &map_jacobian_at(map, z_star)?)?;

        let seeds: Vec<u64> =
            (0..opts.trials).map(|t| opts.seed ^ ((pi as u64) << 32) ^ t as u64).collect();
        let mut trials: Vec<TrialRecord> = seeds
            .par_iter()
            .map(|&seed| transfer_trial(alg, obj, z_star, p, opts, seed))
            .collect();
        sort_records(&mut trials, |r| r.seed);

        let decaying = trials
            .iter()
            .filter(|t| {
                t.decay
                    .as_ref()
                    .map(|d| d.rate < 0.0 && d.r_squared >= opts.r_squared_min)
                    .unwrap_or(false)
                    || t.termination == Termination::ReachedTarget
            })
            .count();
        let frac_decaying =
            if trials.is_empty() { f64::NAN } else { decaying as f64 / trials.len() as f64 };
        let all_agree_stable = continuous.verdict == Verdict::ExpStable
            && discrete.verdict == Verdict::ExpStable
            && frac_decaying >= opts.decay_fraction_min;
        points.push(TransferPoint {
            params: *p,
            continuous,
            discrete,
            trials,
            frac_decaying,
            all_agree_stable,
        });
    }

    let empirical_s_star = points
        .iter()
        .filter(|pt| pt.all_agree_stable)
        .map(|pt| pt.params.s)
        .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))));

    Ok(TransferStudyResult {
        algorithm: alg,
        points,
        empirical_s_star,
        wall_clock_secs: t0.elapsed().as_secs_f64(),
    })
}

fn transfer_trial(
    alg: AlgorithmId,
    obj: &Objective,
    z_star: &Point,
    p: &HyperParams,
    opts: &TransferOptions,
    seed: u64,
) -> TrialRecord {
    let mut rng = sampling::rng_for(seed);
    let z0 = sampling::sample_ball(&mut rng, z_star.coords(), opts.radius);
    let z0 = match Point::new(z0) {
        Ok(z) => z,
        Err(e) => return error_record(seed, e),
    };
    let stop = StopRule {
        max_iters: opts.max_iters,
        tol_f: None,
        // the target sits well above the implicit solver's residual floor
        // (1e-12 amplified by the inverse stability margin), so converging
        // runs terminate instead of stalling below the fit window
        target_point: Some((z_star.coords().iter().cloned().collect(), 1e-9)),
        target_set: None,
        divergence_radius: Some(1e6),
        stride: 1,
    };
    match iterate(alg, obj, p, &z0, &stop) {
        Ok(mut traj) => {
            traj.fit_decay_to(z_star.coords());
            let decay = traj.decay_fit.clone();
            TrialRecord {
                seed,
                termination: traj.termination,
                iters: *traj.stamps.last().unwrap(),
                final_distance: (traj.last_state() - z_star.coords()).norm(),
                decay,
                error: None,
            }
        }
        Err(e) => error_record(seed, e),
    }
}

fn error_record(seed: u64, e: Error) -> TrialRecord {
    TrialRecord {
        seed,
        termination: Termination::SolverError,
        iters: 0.0,
        final_distance: f64::NAN,
        decay: None,
        error: Some(e.to_string()),
    }
}

// ---------------------------------------------------------------------------
// escape statistics

#[derive(Clone, Debug, Serialize)]
pub struct EscapeStudyResult {
    pub algorithm: AlgorithmId,
    pub trials: Vec<TrialRecord>,
    pub escaped: usize,
    /// NaN when no trials were requested.
    pub escape_fraction: f64,
    pub wall_clock_secs: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct EscapeOptions {
    pub trials: usize,
    pub radius: f64,
    pub max_iters: usize,
    pub seed: u64,
    /// A run escapes when it exits the ball of `exit_factor * radius` around
    /// the repelling point, or its distance grows `growth_factor` times from
    /// the minimum seen so far.
    pub exit_factor: f64,
    pub growth_factor: f64,
}

impl Default for EscapeOptions {
    fn default() -> Self {
        Self {
            trials: 1000,
            radius: 0.5,
            max_iters: 10_000,
            seed: 0,
            exit_factor: 10.0,
            growth_factor: 100.0,
        }
    }
}

/// Samples starts around a repelling fixed point and reports the fraction of
/// runs that leave its neighborhood.
pub fn basin_escape_study(
    alg: AlgorithmId,
    obj: &Objective,
    z_unstable: &Point,
    p: &HyperParams,
    opts: &EscapeOptions,
) -> Result<EscapeStudyResult> {
    let t0 = std::time::Instant::now();
    let seeds: Vec<u64> = (0..opts.trials).map(|t| opts.seed.wrapping_add(t as u64)).collect();
    let exit_radius = opts.exit_factor * opts.radius;

    let mut trials: Vec<TrialRecord> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = sampling::rng_for(seed);
            let mut z0 = sampling::sample_ball(&mut rng, z_unstable.coords(), opts.radius);
            while (&z0 - z_unstable.coords()).norm() == 0.0 {
                z0 = sampling::sample_ball(&mut rng, z_unstable.coords(), opts.radius);
            }
            escape_trial(alg, obj, z_unstable, p, opts, exit_radius, seed, z0)
        })
        .collect();
    sort_records(&mut trials, |r| r.seed);

    let escaped = trials.iter().filter(|t| t.termination == Termination::Diverged).count();
    let escape_fraction =
        if opts.trials == 0 { f64::NAN } else { escaped as f64 / opts.trials as f64 };
    Ok(EscapeStudyResult {
        algorithm: alg,
        trials,
        escaped,
        escape_fraction,
        wall_clock_secs: t0.elapsed().as_secs_f64(),
    })
}

#[allow(clippy::too_many_arguments)]
fn escape_trial(
    alg: AlgorithmId,
    obj: &Objective,
    z_unstable: &Point,
    p: &HyperParams,
    opts: &EscapeOptions,
    exit_radius: f64,
    seed: u64,
    z0: Vector,
) -> TrialRecord {
    let mut z = match Point::new(z0) {
        Ok(z) => z,
        Err(e) => return error_record(seed, e),
    };
    let mut min_dist = (z.coords() - z_unstable.coords()).norm();
    for k in 0..opts.max_iters {
        let dist = (z.coords() - z_unstable.coords()).norm();
        min_dist = min_dist.min(dist);
        if dist > exit_radius || dist > opts.growth_factor * min_dist {
            return TrialRecord {
                seed,
                termination: Termination::Diverged,
                iters: k as f64,
                final_distance: dist,
                decay: None,
                error: None,
            };
        }
        match step(alg, obj, p, &z) {
            Ok(out) => z = out.z_next,
            Err(e) => return error_record(seed, e),
        }
    }
    TrialRecord {
        seed,
        termination: Termination::MaxIters,
        iters: opts.max_iters as f64,
        final_distance: (z.coords() - z_unstable.coords()).norm(),
        decay: None,
        error: None,
    }
}

// ---------------------------------------------------------------------------
// convergence to a compact set

/// Which dynamics drive a set-convergence study.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum Dynamics {
    Dta(AlgorithmId),
    Field(AlgorithmId, ResolutionOrder),
}

#[derive(Clone, Debug, Serialize)]
pub struct SetTrialRecord {
    pub seed: u64,
    pub start_radius: f64,
    pub final_set_distance: f64,
    /// Largest single-step increase of the distance to the set; negative or
    /// tiny values mean it was monotone.
    pub max_distance_increase: f64,
    pub success: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SetConvergenceResult {
    pub dynamics: Dynamics,
    pub trials: Vec<SetTrialRecord>,
    pub successes: usize,
    /// Interior starts that the dynamics left exactly in place.
    pub interior_fixed: usize,
    pub interior_checked: usize,
    pub wall_clock_secs: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct SetConvergenceOptions {
    pub trials: usize,
    pub annulus: (f64, f64),
    pub seed: u64,
    /// Field dynamics: integration horizon and step.
    pub t_end: f64,
    pub dt: f64,
    /// DTA dynamics: iteration budget.
    pub max_iters: usize,
    pub success_tol: f64,
    pub interior_starts: usize,
}

impl Default for SetConvergenceOptions {
    fn default() -> Self {
        Self {
            trials: 100,
            annulus: (1.2, 1.5),
            seed: 0,
            t_end: 20.0,
            dt: 1e-3,
            max_iters: 10_000,
            success_tol: 1e-6,
            interior_starts: 100,
        }
    }
}

/// Trajectories from an annulus outside a known invariant ball, tracking the
/// distance-to-set max(0, |z| - R), plus a forward-invariance check on
/// interior starts.
pub fn set_convergence_study(
    dynamics: Dynamics,
    problem: &ProblemSpec,
    p: &HyperParams,
    opts: &SetConvergenceOptions,
) -> Result<SetConvergenceResult> {
    let t0 = std::time::Instant::now();
    let (center, radius) = problem
        .invariant_ball
        .clone()
        .ok_or_else(|| Error::Domain("problem carries no invariant ball".into()))?;
    let obj = &problem.objective;
    let set_dist =
        move |z: &Vector, center: &Vector| ((z - center).norm() - radius).max(0.0);

    let seeds: Vec<u64> = (0..opts.trials).map(|t| opts.seed.wrapping_add(t as u64)).collect();
    let mut trials: Vec<SetTrialRecord> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = sampling::rng_for(seed);
            let z0 =
                &center + sampling::sample_annulus(&mut rng, obj.dim(), opts.annulus.0, opts.annulus.1);
            let start_radius = (&z0 - &center).norm();
            let traj = run_dynamics(dynamics, obj, p, &z0, opts);
            match traj {
                Ok(traj) => {
                    let dists: Vec<f64> =
                        traj.states.iter().map(|z| set_dist(z, &center)).collect();
                    let max_inc = dists
                        .windows(2)
                        .map(|w| w[1] - w[0])
                        .fold(f64::NEG_INFINITY, f64::max);
                    let final_d = *dists.last().unwrap();
                    SetTrialRecord {
                        seed,
                        start_radius,
                        final_set_distance: final_d,
                        max_distance_increase: if dists.len() > 1 { max_inc } else { 0.0 },
                        success: final_d <= opts.success_tol,
                        error: None,
                    }
                }
                Err(e) => SetTrialRecord {
                    seed,
                    start_radius,
                    final_set_distance: f64::NAN,
                    max_distance_increase: f64::NAN,
                    success: false,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    sort_records(&mut trials, |r| r.seed);
    let successes = trials.iter().filter(|t| t.success).count();

    // forward invariance: interior starts must be exactly stationary
    let mut rng = sampling::rng_for(opts.seed ^ 0x5e7c0_u64);
    let mut interior_fixed = 0;
    for _ in 0..opts.interior_starts {
        let z0 = sampling::sample_ball(&mut rng, &center, radius * 0.999);
        let zp = Point::new(z0.clone())?;
        let fixed = match dynamics {
            Dynamics::Dta(alg) => {
                let out = step(alg, obj, p, &zp)?;
                (out.z_next.coords() - &z0).amax() == 0.0
            }
            Dynamics::Field(alg, order) => {
                let field = resolution_field(alg, order, obj, p)?;
                field.eval(&z0)?.amax() == 0.0
            }
        };
        if fixed {
            interior_fixed += 1;
        }
    }

    Ok(SetConvergenceResult {
        dynamics,
        trials,
        successes,
        interior_fixed,
        interior_checked: opts.interior_starts,
        wall_clock_secs: t0.elapsed().as_secs_f64(),
    })
}

fn run_dynamics(
    dynamics: Dynamics,
    obj: &Objective,
    p: &HyperParams,
    z0: &Vector,
    opts: &SetConvergenceOptions,
) -> Result<Trajectory> {
    let zp = Point::new(z0.clone())?;
    match dynamics {
        Dynamics::Dta(alg) => {
            let stop = StopRule {
                max_iters: opts.max_iters,
                tol_f: None,
                target_point: None,
                target_set: None,
                divergence_radius: Some(1e6),
                stride: 1,
            };
            iterate(alg, obj, p, &zp, &stop)
        }
        Dynamics::Field(alg, order) => {
            let field = resolution_field(alg, order, obj, p)?;
            rk4_integrate(&field, &zp, opts.t_end, opts.dt, 10)
        }
    }
}

// ---------------------------------------------------------------------------
// degenerate saddles

#[derive(Clone, Debug, Serialize)]
pub struct DegenerateAlgResult {
    pub algorithm: AlgorithmId,
    pub trials: Vec<TrialRecord>,
    pub converged: usize,
    pub solver_errors: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DegenerateSaddleResult {
    pub per_algorithm: Vec<DegenerateAlgResult>,
    pub wall_clock_secs: f64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct DegenerateOptions {
    pub trials: usize,
    pub radius: f64,
    pub max_iters: usize,
    pub seed: u64,
    pub success_norm: f64,
}

impl Default for DegenerateOptions {
    fn default() -> Self {
        Self { trials: 20, radius: 0.3, max_iters: 100_000, seed: 0, success_norm: 1e-4 }
    }
}

/// Runs several algorithms from a ball around a degenerate saddle at the
/// origin; success is reaching a small norm within the budget (asymptotic
/// convergence, no rate assertion).
pub fn degenerate_saddle_study(
    problem: &ProblemSpec,
    algs: &[AlgorithmId],
    p: &HyperParams,
    opts: &DegenerateOptions,
) -> Result<DegenerateSaddleResult> {
    let t0 = std::time::Instant::now();
    let obj = &problem.objective;
    let d = obj.dim();
    let mut per_algorithm = Vec::with_capacity(algs.len());
    for (ai, &alg) in algs.iter().enumerate() {
        let seeds: Vec<u64> =
            (0..opts.trials).map(|t| opts.seed ^ ((ai as u64) << 40) ^ t as u64).collect();
        let mut trials: Vec<TrialRecord> = seeds
            .par_iter()
            .map(|&seed| {
                let mut rng = sampling::rng_for(seed);
                let z0 = sampling::sample_ball(&mut rng, &Vector::zeros(d), opts.radius);
                let zp = match Point::new(z0) {
                    Ok(z) => z,
                    Err(e) => return error_record(seed, e),
                };
                let stop = StopRule {
                    max_iters: opts.max_iters,
                    tol_f: None,
                    target_point: Some((vec![0.0; d], opts.success_norm)),
                    target_set: None,
                    divergence_radius: Some(1e6),
                    stride: 100,
                };
                match iterate(alg, obj, p, &zp, &stop) {
                    Ok(traj) => TrialRecord {
                        seed,
                        termination: traj.termination,
                        iters: *traj.stamps.last().unwrap(),
                        final_distance: traj.last_state().norm(),
                        decay: None,
                        error: None,
                    },
                    Err(e) => error_record(seed, e),
                }
            })
            .collect();
        sort_records(&mut trials, |r| r.seed);
        let converged =
            trials.iter().filter(|t| t.termination == Termination::ReachedTarget).count();
        let solver_errors =
            trials.iter().filter(|t| t.termination == Termination::SolverError).count();
        per_algorithm.push(DegenerateAlgResult { algorithm: alg, trials, converged, solver_errors });
    }
    Ok(DegenerateSaddleResult { per_algorithm, wall_clock_secs: t0.elapsed().as_secs_f64() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::builtin;

    #[test]
    fn transfer_geg_on_bilinear_grid() {
        let prob = builtin("bilinear").unwrap();
        let grid: Vec<HyperParams> = [0.05, 0.1, 0.2, 0.4]
            .iter()
            .map(|&s| HyperParams::new(s, 1.0, 1.0, 1.0).unwrap())
            .collect();
        let opts = TransferOptions { trials: 20, max_iters: 3000, ..Default::default() };
        let res = transfer_study(
            AlgorithmId::Geg,
            &prob.objective,
            &Point::from_slice(&[0.0, 0.0]).unwrap(),
            &grid,
            &opts,
        )
        .unwrap();
        for pt in &res.points {
            assert_eq!(pt.discrete.verdict, Verdict::ExpStable, "s={}", pt.params.s);
            assert!(pt.frac_decaying >= 0.95, "s={} frac={}", pt.params.s, pt.frac_decaying);
        }
        assert_eq!(res.empirical_s_star, Some(0.4));
    }

    #[test]
    fn transfer_tt_gda_on_bilinear_is_unstable() {
        let prob = builtin("bilinear").unwrap();
        let grid = vec![HyperParams::with_s(0.1).unwrap()];
        let opts = TransferOptions { trials: 5, max_iters: 500, ..Default::default() };
        let res = transfer_study(
            AlgorithmId::TtGda,
            &prob.objective,
            &Point::from_slice(&[0.0, 0.0]).unwrap(),
            &grid,
            &opts,
        )
        .unwrap();
        assert_eq!(res.points[0].discrete.verdict, Verdict::Unstable);
        assert_eq!(res.empirical_s_star, None);
    }

    #[test]
    fn transfer_rejects_non_equilibrium() {
        let prob = builtin("bilinear").unwrap();
        let grid = vec![HyperParams::with_s(0.1).unwrap()];
        let res = transfer_study(
            AlgorithmId::Geg,
            &prob.objective,
            &Point::from_slice(&[1.0, 1.0]).unwrap(),
            &grid,
            &TransferOptions::default(),
        );
        assert!(matches!(res, Err(Error::NotAnEquilibrium(_))));
    }

    #[test]
    fn escape_on_antisaddle_explicit_map() {
        let prob = builtin("antisaddle").unwrap();
        let opts = EscapeOptions { trials: 50, ..Default::default() };
        let res = basin_escape_study(
            AlgorithmId::TtGda,
            &prob.objective,
            &Point::from_slice(&[0.0, 0.0]).unwrap(),
            &HyperParams::with_s(0.1).unwrap(),
            &opts,
        )
        .unwrap();
        assert_eq!(res.escape_fraction, 1.0);
    }

    #[test]
    fn escape_zero_trials_flagged_nan() {
        let prob = builtin("antisaddle").unwrap();
        let opts = EscapeOptions { trials: 0, ..Default::default() };
        let res = basin_escape_study(
            AlgorithmId::TtGda,
            &prob.objective,
            &Point::from_slice(&[0.0, 0.0]).unwrap(),
            &HyperParams::with_s(0.1).unwrap(),
            &opts,
        )
        .unwrap();
        assert!(res.escape_fraction.is_nan());
        assert!(res.trials.is_empty());
    }

    #[test]
    fn set_convergence_field_reaches_ball() {
        let prob = builtin("compact_attractor").unwrap();
        let opts = SetConvergenceOptions { trials: 5, dt: 0.01, ..Default::default() };
        let res = set_convergence_study(
            Dynamics::Field(AlgorithmId::TtGda, ResolutionOrder::O1),
            &prob,
            &HyperParams::with_s(0.05).unwrap(),
            &opts,
        )
        .unwrap();
        assert_eq!(res.interior_fixed, res.interior_checked);
        for t in &res.trials {
            assert!(t.max_distance_increase <= 1e-9, "distance increased: {t:?}");
            // starts near the x = +-y diagonal creep in only algebraically
            // (the blend decays quadratically there), so allow a small floor
            assert!(t.final_set_distance <= 1e-3, "stalled too far out: {t:?}");
        }
        assert!(res.successes >= 1, "records: {:?}", res.trials);
    }

    #[test]
    fn set_convergence_interior_fixed_under_dta() {
        let prob = builtin("compact_attractor").unwrap();
        let opts = SetConvergenceOptions {
            trials: 3,
            max_iters: 2000,
            success_tol: 1e-4,
            ..Default::default()
        };
        let res = set_convergence_study(
            Dynamics::Dta(AlgorithmId::TtGda),
            &prob,
            &HyperParams::with_s(0.05).unwrap(),
            &opts,
        )
        .unwrap();
        assert_eq!(res.interior_fixed, res.interior_checked);
    }

    #[test]
    fn degenerate_study_on_x2y4() {
        let prob = builtin("x2y4").unwrap();
        let opts = DegenerateOptions { trials: 3, max_iters: 100_000, ..Default::default() };
        let res = degenerate_saddle_study(
            &prob,
            &[AlgorithmId::TtGda, AlgorithmId::Dn],
            &HyperParams::with_s(0.05).unwrap(),
            &opts,
        )
        .unwrap();
        // explicit y-update y+ = y - 4sy^3 decays only like k^(-1/2), so the
        // budget leaves |z| around 5e-3; assert the algebraic approach
        let gda = &res.per_algorithm[0];
        for t in &gda.trials {
            assert!(t.final_distance <= 1e-2, "not approaching origin: {t:?}");
        }
        // Newton preconditioning restores a geometric rate (when no iterate
        // lands on the singular y = 0 line)
        let dn = &res.per_algorithm[1];
        assert_eq!(dn.converged + dn.solver_errors, 3);
    }

    #[test]
    fn studies_are_reproducible() {
        let prob = builtin("antisaddle").unwrap();
        let opts = EscapeOptions { trials: 10, ..Default::default() };
        let a = basin_escape_study(
            AlgorithmId::Rdn,
            &prob.objective,
            &Point::from_slice(&[0.0, 0.0]).unwrap(),
            &HyperParams::new(0.1, 1.0, 1.0, 3.0).unwrap(),
            &opts,
        )
        .unwrap();
        let b = basin_escape_study(
            AlgorithmId::Rdn,
            &prob.objective,
            &Point::from_slice(&[0.0, 0.0]).unwrap(),
            &HyperParams::new(0.1, 1.0, 1.0, 3.0).unwrap(),
            &opts,
        )
        .unwrap();
        for (x, y) in a.trials.iter().zip(&b.trials) {
            assert_eq!(x.seed, y.seed);
            assert_eq!(x.final_distance.to_bits(), y.final_distance.to_bits());
            assert_eq!(x.iters, y.iters);
        }
    }
}
