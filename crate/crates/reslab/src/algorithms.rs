//! The six discrete-time algorithm steppers, as exact one-step maps
//! z_{k+1} = w_s(z_k), and a batching driver with a configurable stop rule.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    eval_f, eval_grad_f, lambda_tau, HyperParams, Matrix, Objective, Point, Vector,
};
use crate::linalg;
use crate::trajectory::{Termination, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlgorithmId {
    /// Two-timescale gradient descent ascent: z - s Lam F(z).
    TtGda,
    /// Generalized extragradient: z - gamma s Lam F(z - s Lam F(z)).
    Geg,
    /// Two-timescale proximal point: solve z+ + s Lam F(z+) = z.
    TtPpm,
    /// Damped Newton: z - s (DF)^-1 F.
    Dn,
    /// Regularized damped Newton: z - s (DF + phi I)^-1 F.
    Rdn,
    /// Jacobian method: z + s DF F.
    Jm,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 6] = [
        AlgorithmId::TtGda,
        AlgorithmId::Geg,
        AlgorithmId::TtPpm,
        AlgorithmId::Dn,
        AlgorithmId::Rdn,
        AlgorithmId::Jm,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            AlgorithmId::TtGda => "tt-gda",
            AlgorithmId::Geg => "geg",
            AlgorithmId::TtPpm => "tt-ppm",
            AlgorithmId::Dn => "dn",
            AlgorithmId::Rdn => "rdn",
            AlgorithmId::Jm => "jm",
        }
    }
}

impl FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "tt-gda" | "ttgda" | "gda" => Ok(AlgorithmId::TtGda),
            "geg" => Ok(AlgorithmId::Geg),
            "tt-ppm" | "ttppm" | "ppm" => Ok(AlgorithmId::TtPpm),
            "dn" => Ok(AlgorithmId::Dn),
            "rdn" => Ok(AlgorithmId::Rdn),
            "jm" => Ok(AlgorithmId::Jm),
            other => Err(Error::Domain(format!("unknown algorithm: {other}"))),
        }
    }
}

impl std::fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub enum StepDiagnostics {
    None,
    /// Newton/fixed-point solve of the implicit proximal step.
    Implicit { iters: usize, residual: f64 },
    /// Condition estimate of the linear system solved by DN/RDN.
    LinearSolve { condition_estimate: f64 },
}

#[derive(Clone, Debug)]
pub struct StepOutcome {
    pub z_next: Point,
    pub diagnostics: StepDiagnostics,
}

pub const PPM_RESIDUAL_TOL: f64 = 1e-12;
const PPM_NEWTON_MAX_ITERS: usize = 100;
const PPM_FIXED_POINT_MAX_ITERS: usize = 500;

/// One exact step of the selected algorithm.
pub fn step(alg: AlgorithmId, obj: &Objective, p: &HyperParams, z: &Point) -> Result<StepOutcome> {
    obj.check_dim(z.coords())?;
    match alg {
        AlgorithmId::TtGda => {
            let lam = lambda_tau(obj.n(), obj.m(), p.tau)?;
            let f = eval_f(obj, z)?;
            let z_next = z.coords() - &lam * f * p.s;
            finish(z_next, StepDiagnostics::None)
        }
        AlgorithmId::Geg => {
            let lam = lambda_tau(obj.n(), obj.m(), p.tau)?;
            let f = eval_f(obj, z)?;
            let mid = Point::new(z.coords() - &lam * f * p.s)
                .map_err(|_| Error::Numerics("extragradient midpoint".into()))?;
            let f_mid = eval_f(obj, &mid)?;
            let z_next = z.coords() - &lam * f_mid * (p.gamma * p.s);
            finish(z_next, StepDiagnostics::None)
        }
        AlgorithmId::TtPpm => proximal_step(obj, p, z),
        AlgorithmId::Dn => {
            let f = eval_f(obj, z)?;
            let df = eval_grad_f(obj, z)?;
            let (dir, cond) = linalg::lu_solve(&df, &f)?;
            let z_next = z.coords() - dir * p.s;
            finish(z_next, StepDiagnostics::LinearSolve { condition_estimate: cond })
        }
        AlgorithmId::Rdn => {
            let f = eval_f(obj, z)?;
            let a = eval_grad_f(obj, z)? + Matrix::identity(obj.dim(), obj.dim()) * p.phi;
            let (dir, cond) = linalg::lu_solve(&a, &f)?;
            let z_next = z.coords() - dir * p.s;
            finish(z_next, StepDiagnostics::LinearSolve { condition_estimate: cond })
        }
        AlgorithmId::Jm => {
            let f = eval_f(obj, z)?;
            let df = eval_grad_f(obj, z)?;
            let z_next = z.coords() + df * f * p.s;
            finish(z_next, StepDiagnostics::None)
        }
    }
}

fn finish(z_next: Vector, diagnostics: StepDiagnostics) -> Result<StepOutcome> {
    let z_next = Point::new(z_next).map_err(|_| Error::Numerics("step output".into()))?;
    Ok(StepOutcome { z_next, diagnostics })
}

/// Solve z+ + s Lam F(z+) = z by Newton iteration warm-started at z, falling
/// back to damped fixed-point iteration when the Newton system degenerates.
fn proximal_step(obj: &Objective, p: &HyperParams, z: &Point) -> Result<StepOutcome> {
    let lam = lambda_tau(obj.n(), obj.m(), p.tau)?;
    let eye = Matrix::identity(obj.dim(), obj.dim());
    let mut w = z.coords().clone();
    let mut newton_failed = false;

    for iter in 0..PPM_NEWTON_MAX_ITERS {
        let wp = Point::new(w.clone()).map_err(|_| Error::Numerics("implicit iterate".into()))?;
        let f = eval_f(obj, &wp)?;
        let residual = &w + &lam * &f * p.s - z.coords();
        let rnorm = residual.amax();
        if rnorm <= PPM_RESIDUAL_TOL {
            return finish(w, StepDiagnostics::Implicit { iters: iter, residual: rnorm });
        }
        let jac = &eye + &lam * eval_grad_f(obj, &wp)? * p.s;
        match linalg::lu_solve(&jac, &residual) {
            Ok((delta, _)) => w -= delta,
            Err(_) => {
                newton_failed = true;
                break;
            }
        }
        if w.iter().any(|x| !x.is_finite()) {
            newton_failed = true;
            break;
        }
    }

    if newton_failed {
        // contraction regime fallback: damped fixed-point on w = z - s Lam F(w)
        w = z.coords().clone();
        for iter in 0..PPM_FIXED_POINT_MAX_ITERS {
            let wp =
                Point::new(w.clone()).map_err(|_| Error::Numerics("implicit iterate".into()))?;
            let f = eval_f(obj, &wp)?;
            let next = z.coords() - &lam * &f * p.s;
            let residual = (&w + &lam * &f * p.s - z.coords()).amax();
            if residual <= PPM_RESIDUAL_TOL {
                return finish(w, StepDiagnostics::Implicit { iters: iter, residual });
            }
            w = (w + next) * 0.5;
        }
    }

    let wp = Point::new(w.clone()).map_err(|_| Error::Numerics("implicit iterate".into()))?;
    let f = eval_f(obj, &wp)?;
    let residual = (&w + &lam * f * p.s - z.coords()).amax();
    if residual <= PPM_RESIDUAL_TOL {
        return finish(w, StepDiagnostics::Implicit { iters: PPM_NEWTON_MAX_ITERS, residual });
    }
    Err(Error::ImplicitSolve { residual, iters: PPM_NEWTON_MAX_ITERS })
}

/// Stop rule for `iterate`. `max_iters` is always enforced; at least one of
/// the other criteria must be set.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StopRule {
    pub max_iters: usize,
    /// Stop when |F(z)|_inf falls to or below this value.
    pub tol_f: Option<f64>,
    /// Stop when |z - target|_2 <= radius.
    pub target_point: Option<(Vec<f64>, f64)>,
    /// Stop when max(0, |z - center|_2 - radius) <= tol.
    pub target_set: Option<(Vec<f64>, f64, f64)>,
    /// Declare divergence when |z|_inf exceeds this radius.
    pub divergence_radius: Option<f64>,
    /// Keep every `stride`-th state (the initial and final states are always
    /// kept). 1 keeps everything.
    pub stride: usize,
}

impl StopRule {
    pub fn grad_tol(max_iters: usize, tol_f: f64) -> Self {
        Self {
            max_iters,
            tol_f: Some(tol_f),
            target_point: None,
            target_set: None,
            divergence_radius: Some(1e6),
            stride: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::Domain("max_iters must be >= 1".into()));
        }
        if self.tol_f.is_none()
            && self.target_point.is_none()
            && self.target_set.is_none()
            && self.divergence_radius.is_none()
        {
            return Err(Error::Domain(
                "stop rule needs a gradient tolerance, target, or divergence radius".into(),
            ));
        }
        if self.stride < 1 {
            return Err(Error::Domain("stride must be >= 1".into()));
        }
        Ok(())
    }

    fn check(&self, obj: &Objective, z: &Point) -> Result<Option<Termination>> {
        if let Some(tol) = self.tol_f {
            if eval_f(obj, z)?.amax() <= tol {
                return Ok(Some(Termination::ConvergedGrad));
            }
        }
        if let Some((target, radius)) = &self.target_point {
            let t = Vector::from_column_slice(target);
            if (z.coords() - t).norm() <= *radius {
                return Ok(Some(Termination::ReachedTarget));
            }
        }
        if let Some((center, radius, tol)) = &self.target_set {
            let c = Vector::from_column_slice(center);
            if ((z.coords() - c).norm() - radius).max(0.0) <= *tol {
                return Ok(Some(Termination::ReachedTarget));
            }
        }
        if let Some(r) = self.divergence_radius {
            if z.coords().amax() > r {
                return Ok(Some(Termination::Diverged));
            }
        }
        Ok(None)
    }
}

/// Run `step` repeatedly from z0 until the stop rule fires.
pub fn iterate(
    alg: AlgorithmId,
    obj: &Objective,
    p: &HyperParams,
    z0: &Point,
    stop: &StopRule,
) -> Result<Trajectory> {
    stop.validate()?;
    obj.check_dim(z0.coords())?;

    let mut stamps = vec![0.0];
    let mut states = vec![z0.coords().clone()];
    let mut z = z0.clone();

    if let Some(term) = stop.check(obj, &z)? {
        return Ok(Trajectory { stamps, states, termination: term, failing_index: None, decay_fit: None });
    }

    for k in 1..=stop.max_iters {
        let outcome = match step(alg, obj, p, &z) {
            Ok(o) => o,
            Err(_) => {
                return Ok(Trajectory {
                    stamps,
                    states,
                    termination: Termination::SolverError,
                    failing_index: Some(k),
                    decay_fit: None,
                });
            }
        };
        z = outcome.z_next;
        if k % stop.stride == 0 || k == stop.max_iters {
            stamps.push(k as f64);
            states.push(z.coords().clone());
        }
        if let Some(term) = stop.check(obj, &z)? {
            if *stamps.last().unwrap() != k as f64 {
                stamps.push(k as f64);
                states.push(z.coords().clone());
            }
            return Ok(Trajectory {
                stamps,
                states,
                termination: term,
                failing_index: None,
                decay_fit: None,
            });
        }
    }

    Ok(Trajectory {
        stamps,
        states,
        termination: Termination::MaxIters,
        failing_index: None,
        decay_fit: None,
    })
}

/// The one-step map of an algorithm as a plain vector function, for
/// jacobian probing and classification.
pub fn dta_map<'a>(
    alg: AlgorithmId,
    obj: &'a Objective,
    p: &'a HyperParams,
) -> impl Fn(&Vector) -> Result<Vector> + 'a {
    move |z: &Vector| {
        let zp = Point::new(z.clone()).map_err(|_| Error::Numerics("map input".into()))?;
        Ok(step(alg, obj, p, &zp)?.z_next.into_coords())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::builtin;
    use approx::assert_relative_eq;

    fn params(s: f64, tau: f64, gamma: f64, phi: f64) -> HyperParams {
        HyperParams::new(s, tau, gamma, phi).unwrap()
    }

    #[test]
    fn tt_gda_on_bilinear() {
        let p = builtin("bilinear").unwrap();
        let z = Point::from_slice(&[1.0, 1.0]).unwrap();
        let out = step(AlgorithmId::TtGda, &p.objective, &params(0.1, 1.0, 1.0, 1.0), &z).unwrap();
        assert_relative_eq!(out.z_next.coords()[0], 0.9, max_relative = 1e-14);
        assert_relative_eq!(out.z_next.coords()[1], 1.1, max_relative = 1e-14);
    }

    #[test]
    fn critical_point_is_fixed_for_every_algorithm() {
        let p = builtin("quad_saddle").unwrap();
        let z = Point::from_slice(&[0.0, 0.0]).unwrap();
        for alg in AlgorithmId::ALL {
            let out = step(alg, &p.objective, &params(0.3, 2.0, 1.5, 3.0), &z).unwrap();
            assert!(
                (out.z_next.coords() - z.coords()).amax() <= 1e-12,
                "{alg} moved the critical point"
            );
        }
    }

    #[test]
    fn tt_ppm_closed_form_on_quad_saddle() {
        // F(z) = 2z, so the implicit update is z+ = z / (1 + 2s)
        let p = builtin("quad_saddle").unwrap();
        let z = Point::from_slice(&[1.0, 1.0]).unwrap();
        let out = step(AlgorithmId::TtPpm, &p.objective, &params(0.5, 1.0, 1.0, 1.0), &z).unwrap();
        assert_relative_eq!(out.z_next.coords()[0], 0.5, epsilon = 1e-11);
        assert_relative_eq!(out.z_next.coords()[1], 0.5, epsilon = 1e-11);
        match out.diagnostics {
            StepDiagnostics::Implicit { residual, .. } => assert!(residual <= 1e-12),
            other => panic!("expected implicit diagnostics, got {other:?}"),
        }
    }

    #[test]
    fn dn_on_quad_saddle() {
        let p = builtin("quad_saddle").unwrap();
        let z = Point::from_slice(&[1.0, 1.0]).unwrap();
        let out = step(AlgorithmId::Dn, &p.objective, &params(0.5, 1.0, 1.0, 1.0), &z).unwrap();
        assert_relative_eq!(out.z_next.coords()[0], 0.5, max_relative = 1e-12);
        assert_relative_eq!(out.z_next.coords()[1], 0.5, max_relative = 1e-12);
    }

    #[test]
    fn jm_on_bilinear() {
        let p = builtin("bilinear").unwrap();
        let z = Point::from_slice(&[1.0, 1.0]).unwrap();
        let out = step(AlgorithmId::Jm, &p.objective, &params(0.1, 1.0, 1.0, 1.0), &z).unwrap();
        assert_relative_eq!(out.z_next.coords()[0], 0.9, max_relative = 1e-14);
        assert_relative_eq!(out.z_next.coords()[1], 0.9, max_relative = 1e-14);
    }

    #[test]
    fn dn_singular_jacobian_errors() {
        let p = builtin("x2y4").unwrap();
        let z = Point::from_slice(&[0.5, 0.0]).unwrap(); // DF = diag(2, 0)
        let err = step(AlgorithmId::Dn, &p.objective, &params(0.1, 1.0, 1.0, 1.0), &z);
        assert!(matches!(err, Err(Error::SingularJacobian(_))), "got {err:?}");
    }

    #[test]
    fn geg_converges_on_bilinear() {
        let p = builtin("bilinear").unwrap();
        let z0 = Point::from_slice(&[1.0, 1.0]).unwrap();
        let stop = StopRule::grad_tol(100_000, 1e-8);
        let traj =
            iterate(AlgorithmId::Geg, &p.objective, &params(0.3, 1.0, 1.0, 1.0), &z0, &stop)
                .unwrap();
        assert_eq!(traj.termination, Termination::ConvergedGrad);
        assert!(traj.last_state().norm() < 1e-7);
    }

    #[test]
    fn tt_gda_diverges_on_bilinear() {
        let p = builtin("bilinear").unwrap();
        let z0 = Point::from_slice(&[1.0, 1.0]).unwrap();
        let mut stop = StopRule::grad_tol(1_000_000, 1e-12);
        stop.divergence_radius = Some(1e3);
        let traj =
            iterate(AlgorithmId::TtGda, &p.objective, &params(0.1, 1.0, 1.0, 1.0), &z0, &stop)
                .unwrap();
        assert_eq!(traj.termination, Termination::Diverged);
    }

    #[test]
    fn iterate_stops_immediately_at_critical_point() {
        let p = builtin("quad_saddle").unwrap();
        let z0 = Point::from_slice(&[0.0, 0.0]).unwrap();
        let stop = StopRule::grad_tol(100, 1e-8);
        for alg in AlgorithmId::ALL {
            let traj = iterate(alg, &p.objective, &params(0.1, 1.0, 1.0, 3.0), &z0, &stop).unwrap();
            assert_eq!(traj.termination, Termination::ConvergedGrad);
            assert_eq!(traj.states.len(), 1);
        }
    }

    #[test]
    fn geg_with_unit_params_matches_plain_extragradient() {
        // with gamma = tau = 1: z - s F(z - s F(z))
        let p = builtin("x2y4").unwrap();
        let hp = params(0.07, 1.0, 1.0, 1.0);
        for coords in [[0.4, 0.3], [-1.2, 0.8], [0.05, -0.6]] {
            let z = Point::from_slice(&coords).unwrap();
            let out = step(AlgorithmId::Geg, &p.objective, &hp, &z).unwrap();
            let f = eval_f(&p.objective, &z).unwrap();
            let mid = Point::new(z.coords() - &f * hp.s).unwrap();
            let expected = z.coords() - eval_f(&p.objective, &mid).unwrap() * hp.s;
            assert!((out.z_next.coords() - expected).amax() <= 1e-14);
        }
    }

    #[test]
    fn iterate_records_solver_error_index() {
        let p = builtin("x2y4").unwrap();
        let z0 = Point::from_slice(&[0.5, 0.0]).unwrap();
        let stop = StopRule::grad_tol(10, 1e-14);
        let traj =
            iterate(AlgorithmId::Dn, &p.objective, &params(0.1, 1.0, 1.0, 1.0), &z0, &stop)
                .unwrap();
        assert_eq!(traj.termination, Termination::SolverError);
        assert_eq!(traj.failing_index, Some(1));
    }
}
