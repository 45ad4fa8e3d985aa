//! Gauss–Legendre rules on `[0, 1]` and per-element tensor rules.

/// Gauss–Legendre points and weights mapped to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// `n`-point rule, exact for polynomials of degree `2n − 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "quadrature needs at least one point");
        let mut points = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            points[i] = 0.5 * (1.0 - x);
            points[n - 1 - i] = 0.5 * (1.0 + x);
            weights[i] = 0.5 * w;
            weights[n - 1 - i] = 0.5 * w;
        }
        GaussRule { points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Points and weights on `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let h = b - a;
        (
            self.points.iter().map(|&t| a + h * t).collect(),
            self.weights.iter().map(|&w| w * h).collect(),
        )
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_monomials_exactly() {
        for n in 1..=12 {
            let g = GaussRule::new(n);
            assert!((g.weights.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            for deg in 0..2 * n {
                let q: f64 = g.points.iter().zip(&g.weights).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = 1.0 / (deg as f64 + 1.0);
                assert!((q - exact).abs() <= 1e-13 * exact.max(1e-3), "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn element_rules_cover_interval() {
        let g = GaussRule::new(4);
        let (x, w) = g.on_interval(0.25, 0.5);
        assert!(x.iter().all(|&t| t > 0.25 && t < 0.5));
        assert!((w.iter().sum::<f64>() - 0.25).abs() < 1e-15);
        // degree 2p+3 integrand with p = 2 per element
        let p = 2;
        let g = GaussRule::new(p + 2);
        let mut total = 0.0;
        for e in 0..4 {
            let (x, w) = g.on_interval(e as f64 / 4.0, (e + 1) as f64 / 4.0);
            total += x.iter().zip(&w).map(|(x, w)| w * x.powi(2 * p as i32 + 3)).sum::<f64>();
        }
        let exact = 1.0 / (2.0 * p as f64 + 4.0);
        assert!(((total - exact) / exact).abs() < 1e-13);
    }
}
