//! Builtin benchmark objectives with analytic derivatives, plus a seeded
//! random quadratic generator for the coherence suites.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fields::{Matrix, Objective, Point, Vector};
use crate::sampling;

/// A named problem instance: objective, known saddles, and (optionally) a
/// known forward-invariant ball.
#[derive(Clone)]
pub struct ProblemSpec {
    pub id: String,
    pub objective: Objective,
    pub known_saddles: Vec<Point>,
    /// (center, radius) of a ball that is invariant under the dynamics.
    pub invariant_ball: Option<(Vector, f64)>,
    pub notes: String,
}

pub const BUILTIN_IDS: [&str; 6] =
    ["bilinear", "quad_saddle", "compact_attractor", "x2y4", "x4y4", "antisaddle"];

/// Look up a builtin problem by id.
pub fn builtin(id: &str) -> Result<ProblemSpec> {
    let origin = Point::from_slice(&[0.0, 0.0]).unwrap();
    match id {
        "bilinear" => Ok(ProblemSpec {
            id: id.into(),
            objective: Objective::new(1, 1, |z: &Vector| z[0] * z[1])?
                .with_grad(|z| DVector::from_vec(vec![z[1], z[0]]))
                .with_hess(|_| DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]))
                .with_third_dir(|_, _| DMatrix::zeros(2, 2))
                .with_lipschitz(1.0)?,
            known_saddles: vec![origin],
            invariant_ball: None,
            notes: "f(x,y) = xy; purely rotational dynamics at the origin".into(),
        }),
        "quad_saddle" => Ok(ProblemSpec {
            id: id.into(),
            objective: Objective::new(1, 1, |z: &Vector| z[0] * z[0] - z[1] * z[1])?
                .with_grad(|z| DVector::from_vec(vec![2.0 * z[0], -2.0 * z[1]]))
                .with_hess(|_| DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -2.0]))
                .with_third_dir(|_, _| DMatrix::zeros(2, 2))
                .with_lipschitz(2.0)?,
            known_saddles: vec![origin],
            invariant_ball: None,
            notes: "f(x,y) = x^2 - y^2; strongly convex-concave".into(),
        }),
        "antisaddle" => Ok(ProblemSpec {
            id: id.into(),
            objective: Objective::new(1, 1, |z: &Vector| -z[0] * z[0] + z[1] * z[1])?
                .with_grad(|z| DVector::from_vec(vec![-2.0 * z[0], 2.0 * z[1]]))
                .with_hess(|_| DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 2.0]))
                .with_third_dir(|_, _| DMatrix::zeros(2, 2))
                .with_lipschitz(2.0)?,
            known_saddles: vec![],
            invariant_ball: None,
            notes: "f(x,y) = -x^2 + y^2; origin is a repeller for descent-ascent dynamics"
                .into(),
        }),
        "x2y4" => Ok(ProblemSpec {
            id: id.into(),
            objective: Objective::new(1, 1, |z: &Vector| z[0] * z[0] - z[1].powi(4))?
                .with_grad(|z| DVector::from_vec(vec![2.0 * z[0], -4.0 * z[1].powi(3)]))
                .with_hess(|z| {
                    DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, -12.0 * z[1] * z[1]])
                })
                .with_third_dir(|z, v| {
                    DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -24.0 * z[1] * v[1]])
                }),
            known_saddles: vec![origin],
            invariant_ball: None,
            notes: "f(x,y) = x^2 - y^4; degenerate Hessian at the origin".into(),
        }),
        "x4y4" => Ok(ProblemSpec {
            id: id.into(),
            objective: Objective::new(1, 1, |z: &Vector| z[0].powi(4) - z[1].powi(4))?
                .with_grad(|z| DVector::from_vec(vec![4.0 * z[0].powi(3), -4.0 * z[1].powi(3)]))
                .with_hess(|z| {
                    DMatrix::from_row_slice(
                        2,
                        2,
                        &[12.0 * z[0] * z[0], 0.0, 0.0, -12.0 * z[1] * z[1]],
                    )
                })
                .with_third_dir(|z, v| {
                    DMatrix::from_row_slice(
                        2,
                        2,
                        &[24.0 * z[0] * v[0], 0.0, 0.0, -24.0 * z[1] * v[1]],
                    )
                }),
            known_saddles: vec![origin],
            invariant_ball: None,
            notes: "f(x,y) = x^4 - y^4; fully degenerate Hessian at the origin".into(),
        }),
        "compact_attractor" => {
            let obj = Objective::new(1, 1, |z: &Vector| chi(z.norm()) * (z[0] * z[0] - z[1] * z[1]))?
                .with_grad(compact_attractor_grad)
                .with_hess(compact_attractor_hess);
            // third derivative left to finite differences: the blend makes the
            // closed form long and it is only needed for O(s) field jacobians.
            Ok(ProblemSpec {
                id: id.into(),
                objective: obj,
                known_saddles: vec![origin],
                invariant_ball: Some((DVector::zeros(2), BLEND_R)),
                notes: format!(
                    "f(x,y) = chi(r)(x^2 - y^2) with smoothstep blend over r in [{}, {}]; \
                     every point of the unit ball is a (boundary) saddle",
                    BLEND_R,
                    BLEND_R + BLEND_EPS
                ),
            })
        }
        other => Err(Error::NotFound(other.to_string())),
    }
}

pub const BLEND_R: f64 = 1.0;
pub const BLEND_EPS: f64 = 0.2;

fn psi(p: f64) -> f64 {
    3.0 * p * p - 2.0 * p * p * p
}

fn psi_prime(p: f64) -> f64 {
    6.0 * p - 6.0 * p * p
}

fn psi_second(p: f64) -> f64 {
    6.0 - 12.0 * p
}

/// Piecewise C^1 radial blend: 0 inside the unit ball, 1 outside radius 1.2.
pub fn chi(r: f64) -> f64 {
    if r <= BLEND_R {
        0.0
    } else if r >= BLEND_R + BLEND_EPS {
        1.0
    } else {
        psi((r - BLEND_R) / BLEND_EPS)
    }
}

pub fn chi_prime(r: f64) -> f64 {
    if r <= BLEND_R || r >= BLEND_R + BLEND_EPS {
        0.0
    } else {
        psi_prime((r - BLEND_R) / BLEND_EPS) / BLEND_EPS
    }
}

fn chi_second(r: f64) -> f64 {
    if r <= BLEND_R || r >= BLEND_R + BLEND_EPS {
        0.0
    } else {
        psi_second((r - BLEND_R) / BLEND_EPS) / (BLEND_EPS * BLEND_EPS)
    }
}

fn compact_attractor_grad(z: &Vector) -> Vector {
    let (x, y) = (z[0], z[1]);
    let r = z.norm();
    if r <= BLEND_R {
        return DVector::zeros(2);
    }
    let q = x * x - y * y;
    let c = chi(r);
    let cp = chi_prime(r);
    DVector::from_vec(vec![2.0 * x * c + cp * (x / r) * q, -2.0 * y * c + cp * (y / r) * q])
}

fn compact_attractor_hess(z: &Vector) -> Matrix {
    let r = z.norm();
    if r <= BLEND_R {
        return DMatrix::zeros(2, 2);
    }
    let q = z[0] * z[0] - z[1] * z[1];
    let c = chi(r);
    let cp = chi_prime(r);
    let cpp = chi_second(r);
    let zhat = z / r;
    let g = DVector::from_vec(vec![2.0 * z[0], -2.0 * z[1]]);
    let outer = &zhat * zhat.transpose();
    let mut h = outer.clone() * (cpp * q);
    h += (DMatrix::identity(2, 2) - outer) * (cp * q / r);
    h += (&zhat * g.transpose() + &g * zhat.transpose()) * cp;
    h += DMatrix::from_row_slice(2, 2, &[2.0 * c, 0.0, 0.0, -2.0 * c]);
    h
}

/// Eigenvalue ranges for the random quadratic generator. The x-block Hessian
/// eigenvalues are drawn from `xx`, the y-block from `yy` (negative), and the
/// cross-coupling block gets Frobenius norm at most `coupling`.
#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize)]
pub struct SpectrumSpec {
    pub xx: (f64, f64),
    pub yy: (f64, f64),
    pub coupling: f64,
}

impl SpectrumSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.xx.0 > 0.0 && self.xx.1 >= self.xx.0) {
            return Err(Error::Domain(format!(
                "x-block eigenvalue range must be positive, got {:?}",
                self.xx
            )));
        }
        if !(self.yy.1 < 0.0 && self.yy.0 <= self.yy.1) {
            return Err(Error::Domain(format!(
                "y-block eigenvalue range must be negative, got {:?}",
                self.yy
            )));
        }
        if !(self.coupling >= 0.0 && self.coupling.is_finite()) {
            return Err(Error::Domain(format!("coupling must be nonnegative, got {}", self.coupling)));
        }
        Ok(())
    }
}

impl Default for SpectrumSpec {
    fn default() -> Self {
        Self { xx: (0.5, 3.0), yy: (-3.0, -0.5), coupling: 1.0 }
    }
}

/// Deterministic random quadratic f(z) = z^T Q z / 2 with definite diagonal
/// blocks, so the origin is its unique saddle. L is the exact spectral norm
/// of Q.
pub fn random_quadratic(n: usize, m: usize, seed: u64, spec: &SpectrumSpec) -> Result<ProblemSpec> {
    spec.validate()?;
    if n < 1 || m < 1 {
        return Err(Error::Domain(format!("need n >= 1 and m >= 1, got n={n}, m={m}")));
    }
    let mut rng = sampling::rng_for(seed);
    let a = random_symmetric_with_spectrum(&mut rng, n, spec.xx.0, spec.xx.1);
    let b = random_symmetric_with_spectrum(&mut rng, m, spec.yy.0, spec.yy.1);
    let mut c = Matrix::from_fn(n, m, |_, _| sampling::standard_normal(&mut rng));
    let cnorm = c.norm();
    if cnorm > 0.0 && spec.coupling > 0.0 {
        // uniform magnitude in [0, coupling]
        let mag: f64 = rand::Rng::random_range(&mut rng, 0.0..=spec.coupling);
        c *= mag / cnorm;
    } else {
        c *= 0.0;
    }

    let d = n + m;
    let mut q = Matrix::zeros(d, d);
    q.view_mut((0, 0), (n, n)).copy_from(&a);
    q.view_mut((n, n), (m, m)).copy_from(&b);
    q.view_mut((0, n), (n, m)).copy_from(&c);
    q.view_mut((n, 0), (m, n)).copy_from(&c.transpose());

    // keep problems at desk scale by shrinking the coupling block
    let norm = q.symmetric_eigenvalues().amax();
    if norm > 10.0 {
        let scaled = c * (10.0 / norm);
        q.view_mut((0, n), (n, m)).copy_from(&scaled);
        q.view_mut((n, 0), (m, n)).copy_from(&scaled.transpose());
    }

    let l = q.symmetric_eigenvalues().amax();
    let qv = q.clone();
    let qg = q.clone();
    let qh = q.clone();
    let dd = d;
    let objective = Objective::new(n, m, move |z: &Vector| 0.5 * (z.transpose() * &qv * z)[0])?
        .with_grad(move |z| &qg * z)
        .with_hess(move |_| qh.clone())
        .with_third_dir(move |_, _| Matrix::zeros(dd, dd))
        .with_lipschitz(l)?;

    Ok(ProblemSpec {
        id: format!("random_quadratic(n={n}, m={m}, seed={seed})"),
        objective,
        known_saddles: vec![Point::new(Vector::zeros(d)).unwrap()],
        invariant_ball: None,
        notes: format!("seeded quadratic saddle, |Q| = {l:.6}"),
    })
}

fn random_symmetric_with_spectrum(
    rng: &mut rand_chacha::ChaCha8Rng,
    dim: usize,
    lo: f64,
    hi: f64,
) -> Matrix {
    let eigs = Vector::from_fn(dim, |_, _| rand::Rng::random_range(rng, lo..=hi));
    let gauss = Matrix::from_fn(dim, dim, |_, _| sampling::standard_normal(rng));
    let u = gauss.qr().q();
    &u * Matrix::from_diagonal(&eigs) * u.transpose()
}
