//! Pointwise algebra of the weakly symmetric formulation.
//!
//! Matrices are `nalgebra::Matrix3`; in 2D only the leading 2×2 block is used.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// First Lamé parameter, finite or the incompressible limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Lambda {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaterialParams {
    pub lambda: Lambda,
    pub mu: f64,
    pub n: usize,
}

impl MaterialParams {
    pub fn new(lambda: Lambda, mu: f64, n: usize) -> Result<Self> {
        if mu.is_nan() || mu <= 0.0 {
            return Err(Error::Config(format!("shear modulus must be positive, got {mu}")));
        }
        if let Lambda::Finite(l) = lambda {
            if l.is_nan() || l < 0.0 {
                return Err(Error::Config(format!("lambda must be nonnegative or inf, got {l}")));
            }
        }
        if n != 2 && n != 3 {
            return Err(Error::Config(format!("dimension {n} unsupported")));
        }
        Ok(MaterialParams { lambda, mu, n })
    }

    /// The trace coefficient `λ/(nλ + 2μ)`; `1/n` when λ is infinite.
    pub fn trace_coefficient(&self) -> f64 {
        match self.lambda {
            Lambda::Finite(l) => l / (self.n as f64 * l + 2.0 * self.mu),
            Lambda::Infinite => 1.0 / self.n as f64,
        }
    }

    pub fn is_incompressible(&self) -> bool {
        self.lambda == Lambda::Infinite
    }
}

fn identity(n: usize) -> Matrix3<f64> {
    let mut m = Matrix3::zeros();
    for i in 0..n {
        m[(i, i)] = 1.0;
    }
    m
}

pub fn trace(m: &Matrix3<f64>, n: usize) -> f64 {
    (0..n).map(|i| m[(i, i)]).sum()
}

/// `m21 − m12` in 2D (stored in the first entry); the axial vector of the
/// antisymmetric part, times two, in 3D.
pub fn skew(m: &Matrix3<f64>, n: usize) -> Result<Vector3<f64>> {
    match n {
        2 => Ok(Vector3::new(m[(1, 0)] - m[(0, 1)], 0.0, 0.0)),
        3 => Ok(Vector3::new(
            m[(2, 1)] - m[(1, 2)],
            m[(0, 2)] - m[(2, 0)],
            m[(1, 0)] - m[(0, 1)],
        )),
        _ => Err(Error::Config(format!("skew undefined for dimension {n}"))),
    }
}

/// Number of independent components of `Skew` in dimension `n`.
pub fn skew_dim(n: usize) -> usize {
    2 * n - 3
}

pub fn xi(m: &Matrix3<f64>) -> Matrix3<f64> {
    m.transpose() - Matrix3::identity() * m.trace()
}

pub fn xi_inv(m: &Matrix3<f64>) -> Matrix3<f64> {
    m.transpose() - Matrix3::identity() * (0.5 * m.trace())
}

pub fn compliance_apply(params: &MaterialParams, s: &Matrix3<f64>) -> Matrix3<f64> {
    let n = params.n;
    let c = params.trace_coefficient();
    (s - identity(n) * (c * trace(s, n))) / (2.0 * params.mu)
}

pub fn stiffness_apply(params: &MaterialParams, e: &Matrix3<f64>) -> Result<Matrix3<f64>> {
    match params.lambda {
        Lambda::Finite(l) => Ok(e * (2.0 * params.mu) + identity(params.n) * (l * trace(e, params.n))),
        Lambda::Infinite => Err(Error::Config(
            "stiffness tensor is not defined for lambda = inf".into(),
        )),
    }
}

pub fn sym_grad(g: &Matrix3<f64>) -> Matrix3<f64> {
    (g + g.transpose()) * 0.5
}

/// `⟨Aσ, τ⟩` at a point.
pub fn compliance_product(params: &MaterialParams, s: &Matrix3<f64>, t: &Matrix3<f64>) -> f64 {
    compliance_apply(params, s).dot(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_mat(rng: &mut ChaCha8Rng, n: usize) -> Matrix3<f64> {
        let mut m = Matrix3::zeros();
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = rng.random_range(-1.0..1.0);
            }
        }
        m
    }

    #[test]
    fn skew_examples() {
        let m = Matrix3::new(1.0, 2.0, 0.0, 3.0, 4.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(skew(&m, 2).unwrap()[0], 1.0);
        let mut e = Matrix3::zeros();
        e[(1, 0)] = 1.0;
        assert_eq!(skew(&e, 3).unwrap(), Vector3::new(0.0, 0.0, 1.0));
        let s = Matrix3::new(1.0, 2.0, 3.0, 2.0, 5.0, 6.0, 3.0, 6.0, 9.0);
        assert_eq!(skew(&s, 3).unwrap(), Vector3::zeros());
        assert!(skew(&s, 4).is_err());
    }

    #[test]
    fn xi_pair() {
        assert_eq!(xi(&Matrix3::identity()), Matrix3::identity() * -2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let m = rand_mat(&mut rng, 3);
            assert!((xi_inv(&xi(&m)) - m).amax() <= 1e-14);
            assert!((xi(&m).trace() + 2.0 * m.trace()).abs() <= 1e-14);
        }
    }

    #[test]
    fn compliance_examples() {
        let inc = MaterialParams::new(Lambda::Infinite, 1.0, 2).unwrap();
        assert_eq!(compliance_apply(&inc, &identity(2)), Matrix3::zeros());
        let p = MaterialParams::new(Lambda::Finite(2.0), 1.0, 2).unwrap();
        let a = compliance_apply(&p, &identity(2));
        assert!((a - identity(2) / 6.0).amax() < 1e-15);
        assert_eq!(stiffness_apply(&p, &identity(2)).unwrap(), identity(2) * 6.0);
        assert_eq!(stiffness_apply(&p, &Matrix3::zeros()).unwrap(), Matrix3::zeros());
        assert!(stiffness_apply(&inc, &identity(2)).is_err());
        assert!(MaterialParams::new(Lambda::Finite(1.0), 0.0, 2).is_err());
    }

    #[test]
    fn compliance_symmetric_and_inverse_of_stiffness() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [2, 3] {
            let p = MaterialParams::new(Lambda::Finite(rng.random_range(0.0..10.0)), 0.7, n).unwrap();
            for _ in 0..100 {
                let s = rand_mat(&mut rng, n);
                let t = rand_mat(&mut rng, n);
                let d = compliance_product(&p, &s, &t) - compliance_product(&p, &t, &s);
                assert!(d.abs() < 1e-14);
                let e = sym_grad(&s);
                let back = compliance_apply(&p, &stiffness_apply(&p, &e).unwrap());
                assert!((back - e).amax() <= 1e-13);
                let nf = n as f64;
                let l = match p.lambda {
                    Lambda::Finite(l) => l,
                    Lambda::Infinite => unreachable!(),
                };
                let bound = (1.0 - nf * l / (nf * l + 2.0 * p.mu)) / (2.0 * p.mu) * s.norm_squared();
                assert!(compliance_product(&p, &s, &s) >= bound - 1e-12);
            }
        }
    }

    #[test]
    fn symmetric_gradient_examples() {
        let rot = Matrix3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        assert_eq!(sym_grad(&rot), Matrix3::zeros());
        assert_eq!(skew(&rot, 2).unwrap()[0], 2.0);
        assert_eq!(sym_grad(&identity(2)), identity(2));
    }
}
