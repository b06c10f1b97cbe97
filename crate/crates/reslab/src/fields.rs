//! Core operators of the min-max dynamical systems: the signed gradient
//! field `F(z) = [grad_x f; -grad_y f]`, its derivative, the signed Hessian
//! `H(z) = -DF(z)`, and the timescale matrix `Lambda_tau`.
//!
//! All evaluators fall back to central finite differences when an analytic
//! callback is absent.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

type ValueFn = dyn Fn(&Vector) -> f64 + Send + Sync;
type GradFn = dyn Fn(&Vector) -> Vector + Send + Sync;
type HessFn = dyn Fn(&Vector) -> Matrix + Send + Sync;
type ThirdDirFn = dyn Fn(&Vector, &Vector) -> Matrix + Send + Sync;

/// Finite-difference step for gradients of `value`.
pub(crate) fn grad_fd_step(z: &Vector) -> f64 {
    1e-6f64.max(1e-6 * z.amax())
}

/// Finite-difference step for Hessians and third derivatives.
pub(crate) fn hess_fd_step(z: &Vector) -> f64 {
    1e-4f64.max(1e-4 * z.amax())
}

/// A two-block objective f: R^(n+m) -> R with the x-block minimized and the
/// y-block maximized. Derivative callbacks are optional; missing ones are
/// replaced by central differences of the next-lower derivative.
#[derive(Clone)]
pub struct Objective {
    n: usize,
    m: usize,
    value: Arc<ValueFn>,
    grad: Option<Arc<GradFn>>,
    hess: Option<Arc<HessFn>>,
    third_dir: Option<Arc<ThirdDirFn>>,
    lipschitz_l: Option<f64>,
}

impl Objective {
    pub fn new(
        n: usize,
        m: usize,
        value: impl Fn(&Vector) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if n < 1 || m < 1 {
            return Err(Error::Domain(format!(
                "objective needs n >= 1 and m >= 1, got n={n}, m={m}"
            )));
        }
        Ok(Self {
            n,
            m,
            value: Arc::new(value),
            grad: None,
            hess: None,
            third_dir: None,
            lipschitz_l: None,
        })
    }

    pub fn with_grad(mut self, grad: impl Fn(&Vector) -> Vector + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(grad));
        self
    }

    pub fn with_hess(mut self, hess: impl Fn(&Vector) -> Matrix + Send + Sync + 'static) -> Self {
        self.hess = Some(Arc::new(hess));
        self
    }

    /// `third_dir(z, v)` is the directional derivative of the Hessian of f
    /// along v, an (n+m)x(n+m) matrix.
    pub fn with_third_dir(
        mut self,
        third: impl Fn(&Vector, &Vector) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        self.third_dir = Some(Arc::new(third));
        self
    }

    pub fn with_lipschitz(mut self, l: f64) -> Result<Self> {
        if !(l > 0.0) {
            return Err(Error::Domain(format!("lipschitz constant must be positive, got {l}")));
        }
        self.lipschitz_l = Some(l);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.n + self.m
    }

    pub fn lipschitz_l(&self) -> Option<f64> {
        self.lipschitz_l
    }

    pub fn has_analytic_grad(&self) -> bool {
        self.grad.is_some()
    }

    pub fn check_dim(&self, z: &Vector) -> Result<()> {
        if z.len() != self.dim() {
            return Err(Error::Dimension { expected: self.dim(), got: z.len() });
        }
        Ok(())
    }

    pub fn value(&self, z: &Vector) -> Result<f64> {
        self.check_dim(z)?;
        Ok((self.value)(z))
    }

    /// Gradient of f, analytic when available, otherwise central differences
    /// of the value.
    pub fn grad(&self, z: &Vector) -> Result<Vector> {
        self.check_dim(z)?;
        let g = match &self.grad {
            Some(g) => g(z),
            None => {
                let h = grad_fd_step(z);
                let mut g = Vector::zeros(self.dim());
                let mut zp = z.clone();
                for i in 0..self.dim() {
                    zp[i] = z[i] + h;
                    let fp = (self.value)(&zp);
                    zp[i] = z[i] - h;
                    let fm = (self.value)(&zp);
                    zp[i] = z[i];
                    g[i] = (fp - fm) / (2.0 * h);
                }
                g
            }
        };
        ensure_finite_vec(&g, "gradient")?;
        Ok(g)
    }

    /// Hessian of f, analytic when available, otherwise central differences
    /// of the gradient.
    pub fn hess(&self, z: &Vector) -> Result<Matrix> {
        self.check_dim(z)?;
        let h = match &self.hess {
            Some(h) => h(z),
            None => {
                let step = hess_fd_step(z);
                let d = self.dim();
                let mut out = Matrix::zeros(d, d);
                let mut zp = z.clone();
                for j in 0..d {
                    zp[j] = z[j] + step;
                    let gp = self.grad(&zp)?;
                    zp[j] = z[j] - step;
                    let gm = self.grad(&zp)?;
                    zp[j] = z[j];
                    let col = (gp - gm) / (2.0 * step);
                    out.set_column(j, &col);
                }
                // symmetrize the finite-difference estimate
                out = (out.clone() + out.transpose()) * 0.5;
                out
            }
        };
        ensure_finite_mat(&h, "hessian")?;
        Ok(h)
    }

    /// Directional derivative of the Hessian along v.
    pub fn hess_dir(&self, z: &Vector, v: &Vector) -> Result<Matrix> {
        self.check_dim(z)?;
        self.check_dim(v)?;
        let out = match &self.third_dir {
            Some(t) => t(z, v),
            None => {
                let vnorm = v.norm();
                if vnorm == 0.0 {
                    return Ok(Matrix::zeros(self.dim(), self.dim()));
                }
                let u = v / vnorm;
                let step = hess_fd_step(z);
                let hp = self.hess(&(z + &u * step))?;
                let hm = self.hess(&(z - &u * step))?;
                (hp - hm) * (vnorm / (2.0 * step))
            }
        };
        ensure_finite_mat(&out, "third derivative")?;
        Ok(out)
    }
}

/// A point z = [x; y] in R^(n+m). Entries are finite by construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    z: Vector,
}

impl Point {
    pub fn new(z: Vector) -> Result<Self> {
        ensure_finite_vec(&z, "point coordinates")?;
        Ok(Self { z })
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        Self::new(Vector::from_column_slice(v))
    }

    pub fn coords(&self) -> &Vector {
        &self.z
    }

    pub fn into_coords(self) -> Vector {
        self.z
    }

    pub fn x_block(&self, n: usize) -> Vector {
        self.z.rows(0, n).into_owned()
    }

    pub fn y_block(&self, n: usize) -> Vector {
        self.z.rows(n, self.z.len() - n).into_owned()
    }
}

/// Hyperparameter bundle (s, tau, gamma, phi). Fields irrelevant to a given
/// algorithm are ignored but must still be positive.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct HyperParams {
    pub s: f64,
    pub tau: f64,
    pub gamma: f64,
    pub phi: f64,
}

impl HyperParams {
    pub fn new(s: f64, tau: f64, gamma: f64, phi: f64) -> Result<Self> {
        for (name, v) in [("s", s), ("tau", tau), ("gamma", gamma), ("phi", phi)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Domain(format!("hyperparameter {name} must be positive, got {v}")));
            }
        }
        Ok(Self { s, tau, gamma, phi })
    }

    pub fn with_s(s: f64) -> Result<Self> {
        Self::new(s, 1.0, 1.0, 1.0)
    }

    pub fn replace_s(&self, s: f64) -> Result<Self> {
        Self::new(s, self.tau, self.gamma, self.phi)
    }
}

fn ensure_finite_vec(v: &Vector, what: &str) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerics(what.to_string()));
    }
    Ok(())
}

fn ensure_finite_mat(m: &Matrix, what: &str) -> Result<()> {
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerics(what.to_string()));
    }
    Ok(())
}

/// F(z) = [grad_x f(z); -grad_y f(z)].
pub fn eval_f(obj: &Objective, z: &Point) -> Result<Vector> {
    let mut g = obj.grad(z.coords())?;
    for i in obj.n()..obj.dim() {
        g[i] = -g[i];
    }
    Ok(g)
}

/// H(z) = diag(-I_n, I_m) * hess(f)(z) = -DF(z).
pub fn eval_h(obj: &Objective, z: &Point) -> Result<Matrix> {
    let mut h = obj.hess(z.coords())?;
    for i in 0..obj.n() {
        for j in 0..obj.dim() {
            h[(i, j)] = -h[(i, j)];
        }
    }
    Ok(h)
}

/// DF(z) = -H(z).
pub fn eval_grad_f(obj: &Objective, z: &Point) -> Result<Matrix> {
    Ok(-eval_h(obj, z)?)
}

/// Directional derivative of z -> DF(z) along v, i.e. the matrix D^2F(z)[v].
pub fn eval_hess_f_dir(obj: &Objective, z: &Point, v: &Vector) -> Result<Matrix> {
    obj.check_dim(v)?;
    let mut t = obj.hess_dir(z.coords(), v)?;
    // DF = diag(I_n, -I_m) * hess(f), so the y-block rows flip sign.
    for i in obj.n()..obj.dim() {
        for j in 0..obj.dim() {
            t[(i, j)] = -t[(i, j)];
        }
    }
    Ok(t)
}

/// Lambda_tau = diag((1/tau) I_n, I_m).
pub fn lambda_tau(n: usize, m: usize, tau: f64) -> Result<Matrix> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Domain(format!("tau must be positive, got {tau}")));
    }
    let mut d = Matrix::identity(n + m, n + m);
    for i in 0..n {
        d[(i, i)] = 1.0 / tau;
    }
    Ok(d)
}

/// Spectral-norm upper bound on the gradient Lipschitz constant, estimated
/// as the max Hessian norm over random samples in a box. Returns the
/// estimate together with a flag noting it was sampled, not supplied.
pub fn estimate_lipschitz(
    obj: &Objective,
    center: &Vector,
    halfwidth: f64,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = obj.dim();
    let mut best: f64 = 0.0;
    for _ in 0..samples {
        let mut z = center.clone();
        for i in 0..d {
            z[i] += rng.random_range(-halfwidth..halfwidth);
        }
        let h = obj.hess(&z)?;
        best = best.max(spectral_norm_symmetric(&h));
    }
    Ok(best)
}

/// Spectral norm of a symmetric matrix via its eigenvalues.
pub(crate) fn spectral_norm_symmetric(a: &Matrix) -> f64 {
    let sym = (a + a.transpose()) * 0.5;
    sym.symmetric_eigenvalues().amax()
}

/// Resolve the Lipschitz constant for a problem: user-supplied when present,
/// otherwise sampled over a default box around `center`.
pub fn lipschitz_or_estimate(obj: &Objective, center: &Vector, seed: u64) -> Result<(f64, bool)> {
    match obj.lipschitz_l() {
        Some(l) => Ok((l, false)),
        None => Ok((estimate_lipschitz(obj, center, 1.0, 1000, seed)?, true)),
    }
}
