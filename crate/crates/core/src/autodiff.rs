//! Second-order forward-mode automatic differentiation in three variables.
//!
//! A [`Jet`] carries a value with its gradient and Hessian. Manufactured
//! solutions are written once as generic expressions over `Jet` and yield
//! `u`, `∇u` and `∇∇u` to machine precision.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: [f64; 3],
    pub h: [[f64; 3]; 3],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Jet { v, g: [0.0; 3], h: [[0.0; 3]; 3] }
    }

    /// The coordinate function `x_i` evaluated at `v`.
    pub fn variable(v: f64, i: usize) -> Self {
        let mut j = Jet::constant(v);
        j.g[i] = 1.0;
        j
    }

    /// Independent variables at a point.
    pub fn point(x: [f64; 3]) -> [Jet; 3] {
        [Jet::variable(x[0], 0), Jet::variable(x[1], 1), Jet::variable(x[2], 2)]
    }

    /// Applies a scalar function with derivatives `(f, f', f'')` at `self.v`.
    fn chain(self, f: f64, d1: f64, d2: f64) -> Jet {
        let mut out = Jet::constant(f);
        for i in 0..3 {
            out.g[i] = d1 * self.g[i];
            for k in 0..3 {
                out.h[i][k] = d1 * self.h[i][k] + d2 * self.g[i] * self.g[k];
            }
        }
        out
    }

    pub fn sin(self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Jet {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn sqrt(self) -> Jet {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * self.v))
    }

    pub fn powi(self, n: i32) -> Jet {
        let nf = n as f64;
        let d1 = if n == 0 { 0.0 } else { nf * self.v.powi(n - 1) };
        let d2 = if n <= 1 { 0.0 } else { nf * (nf - 1.0) * self.v.powi(n - 2) };
        self.chain(self.v.powi(n), d1, d2)
    }

    pub fn recip(self) -> Jet {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    pub fn scale(self, a: f64) -> Jet {
        let mut out = self;
        out.v *= a;
        for i in 0..3 {
            out.g[i] *= a;
            for k in 0..3 {
                out.h[i][k] *= a;
            }
        }
        out
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(self, o: Jet) -> Jet {
        let mut out = self;
        out.v += o.v;
        for i in 0..3 {
            out.g[i] += o.g[i];
            for k in 0..3 {
                out.h[i][k] += o.h[i][k];
            }
        }
        out
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::constant(self.v * o.v);
        for i in 0..3 {
            out.g[i] = self.g[i] * o.v + self.v * o.g[i];
            for k in 0..3 {
                out.h[i][k] = self.h[i][k] * o.v
                    + self.v * o.h[i][k]
                    + self.g[i] * o.g[k]
                    + self.g[k] * o.g[i];
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(self, a: f64) -> Jet {
        let mut out = self;
        out.v += a;
        out
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, a: f64) -> Jet {
        self + (-a)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, a: f64) -> Jet {
        self.scale(a)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j.scale(self)
    }
}
