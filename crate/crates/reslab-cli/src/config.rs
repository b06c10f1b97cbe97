//! Run configuration: a single schema shared by config files and CLI flags.
//! Files may be TOML or JSON; a summary.json from a previous run is accepted
//! directly (its top-level `config` object is extracted). CLI flags override
//! file values field by field. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

/// Everything a run needs, with every field optional so that partial configs
/// and flag overlays compose. Validation of required fields happens per
/// subcommand, after merging.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Subcommand this config belongs to; must match the invoked one.
    pub command: Option<String>,
    /// Builtin id, `expr:<formula in x,y>`, or `randquad:<n>,<m>,<seed>`.
    pub problem: Option<String>,
    pub algorithm: Option<String>,
    /// `o1`, `os`, or `dta` (classify/setconv only).
    pub order: Option<String>,
    pub s: Option<f64>,
    pub tau: Option<f64>,
    pub gamma: Option<f64>,
    pub phi: Option<f64>,
    /// Step-size grid for consistency/transfer sweeps.
    pub s_grid: Option<Vec<f64>>,
    /// Initial iterate for simulate.
    pub z0: Option<Vec<f64>>,
    /// Evaluation/expansion point for classify/bounds/basin/transfer.
    pub at: Option<Vec<f64>>,
    pub trials: Option<usize>,
    pub max_iters: Option<usize>,
    pub seed: Option<u64>,
    /// Sampling radius around the expansion point.
    pub radius: Option<f64>,
    /// Record every `stride`-th state in trajectory output.
    pub stride: Option<usize>,
    /// Gradient stopping tolerance (simulate) or set-distance success
    /// tolerance (setconv).
    pub tol: Option<f64>,
    /// Start annulus (inner, outer) for setconv.
    pub annulus: Option<(f64, f64)>,
    pub t_end: Option<f64>,
    pub dt: Option<f64>,
    pub interior_starts: Option<usize>,
    /// Sampling box half-width for the diffeomorphism bounds.
    pub box_halfwidth: Option<f64>,
    /// Sample count for the diffeomorphism bounds.
    pub samples: Option<usize>,
    pub exit_factor: Option<f64>,
    pub growth_factor: Option<f64>,
}

impl RunConfig {
    /// Field-wise overlay: any value set in `over` wins.
    pub fn overlay(mut self, over: RunConfig) -> RunConfig {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(
            command, problem, algorithm, order, s, tau, gamma, phi, s_grid, z0, at, trials,
            max_iters, seed, radius, stride, tol, annulus, t_end, dt, interior_starts,
            box_halfwidth, samples, exit_factor, growth_factor
        );
        self
    }
}

/// Load a config file. JSON documents with a top-level `config` key (i.e. a
/// summary.json) are unwrapped to that key.
pub fn load_config(path: &Path) -> Result<RunConfig, String> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    let trimmed = text.trim_start();
    if trimmed.starts_with('{') {
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| format!("invalid JSON in {}: {e}", path.display()))?;
        let body = match value.get("config") {
            Some(inner) => inner.clone(),
            None => value,
        };
        serde_json::from_value(body).map_err(|e| format!("invalid config in {}: {e}", path.display()))
    } else {
        toml::from_str(&text).map_err(|e| format!("invalid TOML in {}: {e}", path.display()))
    }
}
