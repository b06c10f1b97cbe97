//! Spectral machinery: eigenvalues, equilibrium classification for discrete
//! maps and continuous fields, saddle predicates, and the hyperparameter
//! bound calculators for each algorithm.

use num_complex::Complex64;
use serde::Serialize;

use crate::algorithms::AlgorithmId;
use crate::error::{Error, Result};
use crate::fields::{
    eval_f, eval_h, eval_hess_f_dir, lambda_tau, lipschitz_or_estimate, HyperParams, Matrix,
    Objective, Point, Vector,
};
use crate::odes::VectorField;
use crate::sampling;

/// All eigenvalues of a real square matrix, with multiplicity, via the real
/// Schur decomposition.
pub fn eigs(a: &Matrix) -> Result<Vec<Complex64>> {
    let d = a.nrows();
    if d != a.ncols() {
        return Err(Error::Domain(format!("matrix must be square, got {d}x{}", a.ncols())));
    }
    if d > 64 {
        return Err(Error::Domain(format!("eigensolver capped at dimension 64, got {d}")));
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerics("eigensolver input has non-finite entries".into()));
    }
    let max_sweeps = 100 * d * d;
    let schur = nalgebra::linalg::Schur::try_new(a.clone(), f64::EPSILON, max_sweeps)
        .ok_or(Error::Eigen)?;
    let ev = schur.complex_eigenvalues();
    Ok(ev.iter().map(|c| Complex64::new(c.re, c.im)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    ExpStable,
    Unstable,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Kind {
    /// Equilibrium of a vector field; stability read off Re(lambda).
    Continuous,
    /// Fixed point of a step map; stability read off |lambda|.
    Discrete,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<Complex64>,
    pub verdict: Verdict,
    /// Continuous: -max Re(lambda). Discrete: 1 - max |lambda|. Positive
    /// for stable spectra.
    pub margin: f64,
    pub kind: Kind,
    pub eps_tol: f64,
}

/// Classify an equilibrium from the Jacobian of its map or field. The caller
/// is responsible for J actually being taken at an equilibrium.
pub fn classify_equilibrium(kind: Kind, j: &Matrix) -> Result<SpectrumReport> {
    let eigenvalues = eigs(j)?;
    let eps_tol = 1e-9 * (1.0 + j.norm());
    let (margin, critical) = match kind {
        Kind::Continuous => {
            let max_re = eigenvalues.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
            (-max_re, max_re)
        }
        Kind::Discrete => {
            let max_mod = eigenvalues.iter().map(|l| l.norm()).fold(0.0, f64::max);
            (1.0 - max_mod, max_mod - 1.0)
        }
    };
    let verdict = if critical < -eps_tol {
        Verdict::ExpStable
    } else if critical > eps_tol {
        Verdict::Unstable
    } else {
        Verdict::Inconclusive
    };
    Ok(SpectrumReport { eigenvalues, verdict, margin, kind, eps_tol })
}

pub const EQUILIBRIUM_RESIDUAL_TOL: f64 = 1e-8;

/// Jacobian of a step map at a fixed point. The fixed-point residual
/// |map(z) - z|_inf must be at most 1e-8.
pub fn map_jacobian_at(
    map: impl Fn(&Vector) -> Result<Vector>,
    z: &Point,
) -> Result<Matrix> {
    let residual = (map(z.coords())? - z.coords()).amax();
    if residual > EQUILIBRIUM_RESIDUAL_TOL {
        return Err(Error::NotAnEquilibrium(residual));
    }
    fd_jacobian(&map, z.coords())
}

/// Jacobian of a vector field at an equilibrium, using the field's analytic
/// Jacobian when it has one. The residual |field(z)|_inf must be at most 1e-8.
pub fn field_jacobian_at(field: &VectorField, z: &Point) -> Result<Matrix> {
    let residual = field.eval(z.coords())?.amax();
    if residual > EQUILIBRIUM_RESIDUAL_TOL {
        return Err(Error::NotAnEquilibrium(residual));
    }
    field.jacobian(z.coords())
}

fn fd_jacobian(map: &impl Fn(&Vector) -> Result<Vector>, z: &Vector) -> Result<Matrix> {
    let d = z.len();
    let h = 1e-6 * (1.0 + z.amax());
    let mut out = Matrix::zeros(d, d);
    let mut zp = z.clone();
    for j in 0..d {
        zp[j] = z[j] + h;
        let fp = map(&zp)?;
        zp[j] = z[j] - h;
        let fm = map(&zp)?;
        zp[j] = z[j];
        out.set_column(j, &((fp - fm) / (2.0 * h)));
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum SaddleVerdict {
    Yes,
    /// Necessary (semidefinite) conditions hold with equality within
    /// tolerance; sufficiency is undecided.
    Boundary,
    No,
}

#[derive(Clone, Debug, Serialize)]
pub struct SaddleReport {
    pub verdict: SaddleVerdict,
    pub grad_norm: f64,
    pub lambda_min_xx: f64,
    pub lambda_max_yy: f64,
    pub eps: f64,
}

/// Test whether z is a local min-max saddle: critical point with positive
/// definite x-block and negative definite y-block of the Hessian. Definite up
/// to tolerance gives Boundary.
pub fn is_saddle(obj: &Objective, z: &Point) -> Result<SaddleReport> {
    let grad_norm = obj.grad(z.coords())?.amax();
    let hess = obj.hess(z.coords())?;
    let eps = 1e-8 * (1.0 + hess.norm());
    let (n, m) = (obj.n(), obj.m());
    let hxx = hess.view((0, 0), (n, n)).into_owned();
    let hyy = hess.view((n, n), (m, m)).into_owned();
    let lambda_min_xx = hxx.symmetric_eigenvalues().min();
    let lambda_max_yy = hyy.symmetric_eigenvalues().max();

    let verdict = if grad_norm > EQUILIBRIUM_RESIDUAL_TOL {
        SaddleVerdict::No
    } else if lambda_min_xx > eps && lambda_max_yy < -eps {
        SaddleVerdict::Yes
    } else if lambda_min_xx >= -eps && lambda_max_yy <= eps {
        SaddleVerdict::Boundary
    } else {
        SaddleVerdict::No
    };
    Ok(SaddleReport { verdict, grad_norm, lambda_min_xx, lambda_max_yy, eps })
}

/// At a saddle the spectrum of Lam_tau H(z) has nonpositive real parts.
/// Returns (pass, max Re).
pub fn lemma_negeig_check(obj: &Objective, z: &Point, tau: f64) -> Result<(bool, f64)> {
    let h = eval_h(obj, z)?;
    let lam = lambda_tau(obj.n(), obj.m(), tau)?;
    let spec = eigs(&(&lam * h))?;
    let max_re = spec.iter().map(|l| l.re).fold(f64::NEG_INFINITY, f64::max);
    let eps_tol = 1e-9 * (1.0 + lam.norm());
    Ok((max_re <= eps_tol, max_re))
}

/// Options for the sampled suprema used by the local-diffeomorphism bounds.
#[derive(Clone, Debug, Serialize)]
pub struct BoundsOptions {
    /// Center of the sampling box; defaults to the saddle itself.
    pub box_center: Option<Vec<f64>>,
    pub box_halfwidth: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        Self { box_center: None, box_halfwidth: 1.0, samples: 10_000, seed: 0 }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct AssumptionFlags {
    pub hessian_invertible_at_saddle: bool,
    /// False when every relevant eigenvalue has zero real part, which turns
    /// some bounds into n/a instead of a number.
    pub re_nonzero: bool,
    pub l_estimated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundsReport {
    pub algorithm: AlgorithmId,
    /// Step bound under which the stable spectrum survives discretization.
    /// +infinity means any positive step works; None means not determined
    /// (see flags).
    pub s_max_stability: Option<f64>,
    /// Step bound under which the step map is a local diffeomorphism, so
    /// unstable saddles repel almost every start.
    pub s_max_escape: Option<f64>,
    pub gamma_range: Option<(f64, f64)>,
    pub phi_min: Option<f64>,
    /// For JM: (eigenvalue of H at the saddle, rotation-dominance satisfied).
    pub per_eigen_jm: Option<Vec<(Complex64, bool)>>,
    pub lipschitz_l: f64,
    /// Human-readable origin of each emitted number.
    pub provenance: Vec<(String, String)>,
    pub flags: AssumptionFlags,
}

impl BoundsReport {
    /// Smallest finite emitted step bound, if any.
    pub fn effective_s_max(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for b in [self.s_max_stability, self.s_max_escape].into_iter().flatten() {
            if b.is_finite() {
                best = Some(best.map_or(b, |x: f64| x.min(b)));
            }
        }
        best.or(self.s_max_stability)
    }
}

/// Every step-size/hyperparameter bound the analysis provides for the given
/// algorithm at a saddle z_star.
pub fn step_bounds(
    alg: AlgorithmId,
    obj: &Objective,
    z_star: &Point,
    p: &HyperParams,
    opts: &BoundsOptions,
) -> Result<BoundsReport> {
    let saddle = is_saddle(obj, z_star)?;
    if saddle.verdict == SaddleVerdict::No {
        return Err(Error::Domain(
            "step bounds are defined at (boundary) saddle points only".into(),
        ));
    }
    let (l, l_estimated) = lipschitz_or_estimate(obj, z_star.coords(), opts.seed)?;
    let h = eval_h(obj, z_star)?;
    let lam = lambda_tau(obj.n(), obj.m(), p.tau)?;
    let spec_scaled = eigs(&(&lam * &h))?;
    let spec_h = eigs(&h)?;
    let hessian_invertible_at_saddle = {
        let sv = obj.hess(z_star.coords())?.singular_values();
        sv.min() > 1e-10 * (1.0 + sv.max())
    };

    let mut provenance: Vec<(String, String)> = Vec::new();
    let mut flags =
        AssumptionFlags { hessian_invertible_at_saddle, re_nonzero: true, l_estimated };
    let mut report = BoundsReport {
        algorithm: alg,
        s_max_stability: None,
        s_max_escape: None,
        gamma_range: None,
        phi_min: None,
        per_eigen_jm: None,
        lipschitz_l: l,
        provenance: Vec::new(),
        flags,
    };

    // max over the scaled spectrum of the denominator L^2 max{1, 1/tau^2}
    let denom = (l * l).max(l * l / (p.tau * p.tau));

    match alg {
        AlgorithmId::TtGda => {
            let escape = 1.0f64.min(p.tau) / l;
            provenance.push((
                "s_max_escape".into(),
                "step map stays a local diffeomorphism for s below min{1,tau}/L".into(),
            ));
            let mut spectral: Option<f64> = None;
            for lam_h in &spec_scaled {
                if lam_h.re != 0.0 {
                    let b = 2.0 * lam_h.re.abs() / denom;
                    spectral = Some(spectral.map_or(b, |x: f64| x.min(b)));
                }
            }
            match spectral {
                Some(b) => {
                    report.s_max_stability = Some(b.min(escape));
                    provenance.push((
                        "s_max_stability".into(),
                        "smallest of the diffeomorphism bound and the per-eigenvalue \
                         spectral bound 2|Re|/(L^2 max{1, tau^-2}) at the saddle"
                            .into(),
                    ));
                }
                None => {
                    flags.re_nonzero = false;
                    provenance.push((
                        "s_max_stability".into(),
                        "not determined: every eigenvalue of the scaled Hessian is purely \
                         imaginary"
                            .into(),
                    ));
                }
            }
            report.s_max_escape = Some(escape);
        }
        AlgorithmId::Geg | AlgorithmId::TtPpm => {
            let max_re =
                spec_scaled.iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max);
            let m_cap = if max_re == 0.0 {
                flags.re_nonzero = false;
                f64::INFINITY
            } else {
                max_re.abs() / denom
            };
            let base = m_cap.min((1.0 / l).min(p.tau / l));
            let factor = if alg == AlgorithmId::TtPpm { 2.0 } else { 1.0 };
            report.s_max_stability = Some(factor * base);
            provenance.push((
                "s_max_stability".into(),
                format!(
                    "{}min of the spectral cap |max Re|/(L^2 max{{1, tau^-2}}) \
                     (infinite when max Re = 0) and min{{1/L, tau/L}}",
                    if factor == 2.0 { "twice the " } else { "" }
                ),
            ));
            if alg == AlgorithmId::Geg {
                report.gamma_range = Some((0.0, 2.0));
                provenance.push((
                    "gamma_range".into(),
                    "extragradient weight must sit strictly between 0 and 2".into(),
                ));
            } else {
                let escape = 1.0f64.min(p.tau) / l;
                report.s_max_escape = Some(escape);
                provenance.push((
                    "s_max_escape".into(),
                    "implicit step map stays a local diffeomorphism for s below min{1,tau}/L"
                        .into(),
                ));
            }
        }
        AlgorithmId::Dn => {
            report.s_max_stability = Some(f64::INFINITY);
            provenance.push((
                "s_max_stability".into(),
                "Newton preconditioning makes the stable spectrum step-size free".into(),
            ));
            let (sup_f, sup_d2f) = sampled_suprema(obj, z_star, opts)?;
            let escape = 1.0 / (1.0 + sup_f * sup_d2f / (l * l));
            report.s_max_escape = Some(escape);
            provenance.push((
                "s_max_escape".into(),
                format!(
                    "diffeomorphism bound 1/(1 + sup|F| sup|D2F| / L^2) with suprema \
                     sampled over a box ({} points, halfwidth {})",
                    opts.samples, opts.box_halfwidth
                ),
            ));
        }
        AlgorithmId::Rdn => {
            let nonzero_re: Vec<f64> =
                spec_h.iter().filter(|c| c.re != 0.0).map(|c| c.re.abs()).collect();
            let phi_min = if nonzero_re.is_empty() {
                flags.re_nonzero = false;
                provenance.push((
                    "phi_min".into(),
                    "not determined: every Hessian eigenvalue at the saddle is purely \
                     imaginary"
                        .into(),
                ));
                None
            } else {
                let min_re = nonzero_re.iter().cloned().fold(f64::INFINITY, f64::min);
                provenance.push((
                    "phi_min".into(),
                    "regularization must exceed L^2 over the smallest nonzero |Re| of the \
                     Hessian spectrum at the saddle"
                        .into(),
                ));
                Some(l * l / min_re)
            };
            report.phi_min = phi_min;

            let phi = p.phi;
            let mut s_max = 2.0 * l * l / (phi * phi);
            for kappa in &spec_h {
                let (a, b) = (kappa.re, kappa.im);
                let den = (phi - a) * (phi - a) + b * b;
                if den == 0.0 {
                    continue;
                }
                let q1 = (phi * a - (a * a + b * b)) / den;
                let q2 = phi * b / den;
                let disc = q1 * q1 - q2 * q2;
                if disc < 0.0 {
                    s_max = s_max.min(2.0 * q1.abs() / disc.abs());
                }
            }
            report.s_max_stability = Some(s_max);
            provenance.push((
                "s_max_stability".into(),
                "min of 2L^2/phi^2 and, per Hessian eigenvalue with rotation dominating \
                 after the phi-shift, 2|q1|/|q1^2 - q2^2|"
                    .into(),
            ));

            let (sup_f, sup_d2f) = sampled_suprema(obj, z_star, opts)?;
            let escape = 1.0 / (l / (l + phi) + sup_f * sup_d2f / ((l + phi) * (l + phi)));
            report.s_max_escape = Some(escape);
            provenance.push((
                "s_max_escape".into(),
                format!(
                    "diffeomorphism bound 1/(L/(L+phi) + sup|F| sup|D2F|/(L+phi)^2) with \
                     suprema sampled over a box ({} points, halfwidth {})",
                    opts.samples, opts.box_halfwidth
                ),
            ));
        }
        AlgorithmId::Jm => {
            let per: Vec<(Complex64, bool)> = spec_h
                .iter()
                .map(|&kappa| {
                    let ok = kappa.im != 0.0 && (kappa.re == 0.0 || kappa.re.abs() < kappa.im.abs());
                    (kappa, ok)
                })
                .collect();
            report.per_eigen_jm = Some(per);
            provenance.push((
                "per_eigen_jm".into(),
                "each Hessian eigenvalue must be rotation dominated: |Re| < |Im|".into(),
            ));
        }
    }

    report.flags = flags;
    report.provenance = provenance;
    Ok(report)
}

/// Sampled suprema of |F(z)| and of the norm of the derivative of DF over a
/// box around the saddle. The tensor norm is probed along random unit
/// directions, so it is a sampled lower estimate.
fn sampled_suprema(obj: &Objective, z_star: &Point, opts: &BoundsOptions) -> Result<(f64, f64)> {
    let d = obj.dim();
    let center = match &opts.box_center {
        Some(c) => Vector::from_column_slice(c),
        None => z_star.coords().clone(),
    };
    if center.len() != d {
        return Err(Error::Dimension { expected: d, got: center.len() });
    }
    let mut rng = sampling::rng_for(opts.seed);
    let mut sup_f: f64 = 0.0;
    let mut sup_d2f: f64 = 0.0;
    for _ in 0..opts.samples {
        let mut z = center.clone();
        for i in 0..d {
            z[i] += rand::Rng::random_range(&mut rng, -opts.box_halfwidth..=opts.box_halfwidth);
        }
        let zp = Point::new(z)?;
        sup_f = sup_f.max(eval_f(obj, &zp)?.norm());
        let v = sampling::normal_vector(&mut rng, d).normalize();
        let t = eval_hess_f_dir(obj, &zp, &v)?;
        // clip FD noise on exactly-zero tensors
        let tn = t.norm();
        sup_d2f = sup_d2f.max(if tn < 1e-7 { 0.0 } else { tn });
    }
    Ok((sup_f, sup_d2f))
}
