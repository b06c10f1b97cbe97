//! Time-indexed state sequences shared by the discrete steppers and the ODE
//! integrator, plus the log-linear decay fit used by the studies.

use serde::Serialize;

use crate::fields::Vector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ConvergedGrad,
    ReachedTarget,
    Diverged,
    MaxIters,
    SolverError,
}

/// Least-squares fit of log distance vs step/time.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DecayFit {
    /// Slope of the log-linear fit: log-decay rate per step (discrete) or
    /// per unit time (continuous). Negative means contraction.
    pub rate: f64,
    pub r_squared: f64,
    pub samples_used: usize,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    /// Iteration indices (discrete) or times (continuous), strictly
    /// increasing, aligned with `states`.
    pub stamps: Vec<f64>,
    pub states: Vec<Vector>,
    pub termination: Termination,
    /// Index of the step where a solver error occurred, if any.
    pub failing_index: Option<usize>,
    pub decay_fit: Option<DecayFit>,
}

impl Trajectory {
    pub fn last_state(&self) -> &Vector {
        self.states.last().expect("trajectory has at least the initial state")
    }

    /// Fit geometric/exponential decay of the distances to `target` over the
    /// trailing 80% of samples, discarding the roundoff floor (< 1e-12).
    /// Requires at least 10 usable post-transient samples.
    pub fn fit_decay_to(&mut self, target: &Vector) {
        let dists: Vec<(f64, f64)> = self
            .stamps
            .iter()
            .zip(&self.states)
            .map(|(t, z)| (*t, (z - target).norm()))
            .collect();
        self.decay_fit = fit_log_decay(&dists);
    }
}

/// OLS on (stamp, log distance) over the last 80% of samples, discarding
/// entries below 1e-12.
pub fn fit_log_decay(series: &[(f64, f64)]) -> Option<DecayFit> {
    let start = series.len() / 5;
    let pts: Vec<(f64, f64)> =
        series[start..].iter().filter(|(_, d)| *d >= 1e-12).map(|(t, d)| (*t, d.ln())).collect();
    if pts.len() < 10 {
        return None;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    if denom.abs() < 1e-300 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / denom;
    let intercept = (sy - slope * sx) / n;
    let mean_y = sy / n;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let ss_res: f64 = pts.iter().map(|p| (p.1 - (intercept + slope * p.0)).powi(2)).sum();
    let r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
    Some(DecayFit { rate: slope, r_squared, samples_used: pts.len() })
}
