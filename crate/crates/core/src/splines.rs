//! Univariate and tensor-product B-spline spaces.
//!
//! Knot vectors are p-open on `[0, 1]`. Evaluation is right-continuous except
//! at `ζ = 1`, which belongs to the last non-empty span so that the last basis
//! function interpolates the right end point.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// An open knot vector of a given degree on `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct KnotVector {
    degree: usize,
    knots: Vec<f64>,
}

impl KnotVector {
    pub fn new(degree: usize, knots: Vec<f64>) -> Result<Self> {
        let p = degree;
        if knots.len() < 2 * (p + 1) {
            return Err(Error::Config(format!(
                "knot vector of degree {p} needs at least {} knots, got {}",
                2 * (p + 1),
                knots.len()
            )));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Config("knots must be nondecreasing".into()));
        }
        let n = knots.len();
        if knots[..=p].iter().any(|&k| k != 0.0) || knots[n - p - 1..].iter().any(|&k| k != 1.0) {
            return Err(Error::Config(format!("knot vector is not {p}-open on [0,1]")));
        }
        let kv = KnotVector { degree, knots };
        for b in kv.interior_breakpoints() {
            if kv.multiplicity(b) > p + 1 {
                return Err(Error::Config(format!(
                    "interior knot {b} has multiplicity above {}",
                    p + 1
                )));
            }
        }
        Ok(kv)
    }

    /// Uniform open knot vector with `n_el` elements and interior regularity
    /// `regularity` (−1 encodes full multiplicity `p + 1`).
    pub fn uniform(degree: usize, regularity: isize, n_el: usize) -> Result<Self> {
        if n_el == 0 {
            return Err(Error::Config("need at least one element".into()));
        }
        if regularity < -1 || regularity >= degree as isize {
            return Err(Error::Config(format!(
                "regularity {regularity} not in [-1, {}] for degree {degree}",
                degree as isize - 1
            )));
        }
        let mult = (degree as isize - regularity) as usize;
        let mut knots = vec![0.0; degree + 1];
        for j in 1..n_el {
            let x = j as f64 / n_el as f64;
            knots.extend(std::iter::repeat_n(x, mult));
        }
        knots.extend(std::iter::repeat_n(1.0, degree + 1));
        Ok(KnotVector { degree, knots })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Number of basis functions.
    pub fn dim(&self) -> usize {
        self.knots.len() - self.degree - 1
    }

    /// Distinct knot values, including 0 and 1.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut b: Vec<f64> = Vec::new();
        for &k in &self.knots {
            if b.last() != Some(&k) {
                b.push(k);
            }
        }
        b
    }

    fn interior_breakpoints(&self) -> Vec<f64> {
        let b = self.breakpoints();
        b[1..b.len() - 1].to_vec()
    }

    pub fn n_elements(&self) -> usize {
        self.breakpoints().len() - 1
    }

    pub fn multiplicity(&self, x: f64) -> usize {
        self.knots.iter().filter(|&&k| k == x).count()
    }

    /// Minimal interior regularity `p − max m`, or `None` without interior knots.
    pub fn regularity(&self) -> Option<isize> {
        self.interior_breakpoints()
            .iter()
            .map(|&b| self.degree as isize - self.multiplicity(b) as isize)
            .min()
    }

    /// Index `i` with `ξ_i ≤ ζ < ξ_{i+1}`; `ζ = 1` maps to the last non-empty span.
    pub fn find_span(&self, z: f64) -> usize {
        let n = self.dim();
        if z >= self.knots[n] {
            return n - 1;
        }
        // largest i in [p, n-1] with knots[i] <= z
        let (mut lo, mut hi) = (self.degree, n);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.knots[mid] <= z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Span index of element `e` (the `e`-th non-empty knot interval).
    pub fn element_span(&self, e: usize) -> usize {
        let b = self.breakpoints();
        self.find_span(b[e])
    }
}

/// The univariate spline space spanned by the B-splines of a knot vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineSpace1D {
    knot_vector: KnotVector,
}

impl SplineSpace1D {
    pub fn new(knot_vector: KnotVector) -> Self {
        SplineSpace1D { knot_vector }
    }

    /// `S_p^r` on `n_el` uniform elements.
    pub fn uniform(degree: usize, regularity: isize, n_el: usize) -> Result<Self> {
        Ok(Self::new(KnotVector::uniform(degree, regularity, n_el)?))
    }

    pub fn knot_vector(&self) -> &KnotVector {
        &self.knot_vector
    }

    pub fn degree(&self) -> usize {
        self.knot_vector.degree
    }

    pub fn dim(&self) -> usize {
        self.knot_vector.dim()
    }

    pub fn n_elements(&self) -> usize {
        self.knot_vector.n_elements()
    }

    fn check_domain(z: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&z) || z.is_nan() {
            return Err(Error::Domain(format!("parameter {z} outside [0,1]")));
        }
        Ok(())
    }

    /// Nonzero basis values at `ζ` as `(index, value)` pairs.
    pub fn eval_basis(&self, z: f64) -> Result<Vec<(usize, f64)>> {
        Self::check_domain(z)?;
        let span = self.knot_vector.find_span(z);
        let vals = basis_funs(&self.knot_vector.knots, self.degree(), span, z);
        let first = span - self.degree();
        Ok(vals.into_iter().enumerate().map(|(k, v)| (first + k, v)).collect())
    }

    /// First derivatives of the nonzero basis functions at `ζ`, written as the
    /// weighted difference of degree `p − 1` B-splines on the same knots.
    pub fn eval_basis_derivative(&self, z: f64, order: usize) -> Result<Vec<(usize, f64)>> {
        Self::check_domain(z)?;
        if order != 1 {
            return Err(Error::Domain(format!(
                "derivative order {order} unsupported; chain derivative_space for higher orders"
            )));
        }
        let p = self.degree();
        if p == 0 {
            return Err(Error::Domain("derivative needs degree >= 1".into()));
        }
        let t = &self.knot_vector.knots;
        let span = self.knot_vector.find_span(z);
        // degree p-1 functions span-p+1..=span on the full knot vector
        let low = basis_funs(t, p - 1, span, z);
        let low_at = |i: usize| -> f64 {
            if i + p < span + 1 || i > span {
                0.0
            } else {
                low[i + p - 1 - span]
            }
        };
        let ratio = |num: f64, den: f64| if den == 0.0 { 0.0 } else { num / den };
        let pf = p as f64;
        Ok((span - p..=span)
            .map(|i| {
                let a = ratio(pf, t[i + p] - t[i]) * low_at(i);
                let b = ratio(pf, t[i + p + 1] - t[i + 1]) * low_at(i + 1);
                (i, a - b)
            })
            .collect())
    }

    /// Values and derivatives up to `n_ders` of the `p + 1` functions active on
    /// span `span`, evaluated at `ζ`. Entry `[k][j]` is the `k`-th derivative of
    /// function `span − p + j`.
    pub fn ders_at_span(&self, span: usize, z: f64, n_ders: usize) -> Vec<Vec<f64>> {
        ders_basis_funs(&self.knot_vector.knots, self.degree(), span, z, n_ders)
    }

    /// Evaluates `Σ c_i B_i(ζ)`.
    pub fn eval_function(&self, coeffs: &[f64], z: f64) -> Result<f64> {
        Ok(self.eval_basis(z)?.iter().map(|&(i, v)| coeffs[i] * v).sum())
    }

    /// h-refinement by a single knot. Returns the refined space and the
    /// `(dim + 1) × dim` matrix mapping old coefficients to new ones.
    pub fn insert_knot(&self, z: f64) -> Result<(SplineSpace1D, DMatrix<f64>)> {
        if z <= 0.0 || z >= 1.0 || z.is_nan() {
            return Err(Error::Domain(format!("inserted knot {z} must lie in (0,1)")));
        }
        let p = self.degree();
        let t = &self.knot_vector.knots;
        if self.knot_vector.multiplicity(z) >= p + 1 {
            return Err(Error::Domain(format!("knot {z} already has multiplicity {}", p + 1)));
        }
        let n = self.dim();
        let k = self.knot_vector.find_span(z);
        let mut map = DMatrix::zeros(n + 1, n);
        for i in 0..=n {
            let alpha = if i + p <= k {
                1.0
            } else if i > k {
                0.0
            } else {
                (z - t[i]) / (t[i + p] - t[i])
            };
            if i < n && alpha != 0.0 {
                map[(i, i)] = alpha;
            }
            if i > 0 && alpha != 1.0 {
                map[(i, i - 1)] = 1.0 - alpha;
            }
        }
        let mut knots = t.clone();
        knots.insert(k + 1, z);
        let refined = SplineSpace1D::new(KnotVector::new(p, knots)?);
        Ok((refined, map))
    }

    /// The space `S_{p−1}^{r−1}` of derivatives together with the exact
    /// coefficient map of `d/dζ` (`(dim − 1) × dim`).
    pub fn derivative_space(&self) -> Result<(SplineSpace1D, DMatrix<f64>)> {
        let p = self.degree();
        if p == 0 {
            return Err(Error::Domain("derivative space needs degree >= 1".into()));
        }
        let t = &self.knot_vector.knots;
        let n = self.dim();
        let mut map = DMatrix::zeros(n - 1, n);
        for j in 0..n - 1 {
            let den = t[j + p + 1] - t[j + 1];
            if den <= 0.0 {
                return Err(Error::Config(
                    "derivative space needs regularity >= 0 (interior multiplicity <= p)".into(),
                ));
            }
            let w = p as f64 / den;
            map[(j, j + 1)] = w;
            map[(j, j)] = -w;
        }
        let knots = t[1..t.len() - 1].to_vec();
        Ok((SplineSpace1D::new(KnotVector::new(p - 1, knots)?), map))
    }
}

/// Cox–de Boor values of the `p + 1` functions active on `span`.
pub(crate) fn basis_funs(t: &[f64], p: usize, span: usize, z: f64) -> Vec<f64> {
    let mut n = vec![0.0; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    n[0] = 1.0;
    for j in 1..=p {
        left[j] = z - t[span + 1 - j];
        right[j] = t[span + j] - z;
        let mut saved = 0.0;
        for r in 0..j {
            let den = right[r + 1] + left[j - r];
            let temp = if den == 0.0 { 0.0 } else { n[r] / den };
            n[r] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        n[j] = saved;
    }
    n
}

/// Basis values and derivatives (rows = derivative order).
pub(crate) fn ders_basis_funs(t: &[f64], p: usize, span: usize, z: f64, n_ders: usize) -> Vec<Vec<f64>> {
    let mut ndu = vec![vec![0.0; p + 1]; p + 1];
    let mut left = vec![0.0; p + 1];
    let mut right = vec![0.0; p + 1];
    ndu[0][0] = 1.0;
    for j in 1..=p {
        left[j] = z - t[span + 1 - j];
        right[j] = t[span + j] - z;
        let mut saved = 0.0;
        for r in 0..j {
            ndu[j][r] = right[r + 1] + left[j - r];
            let temp = if ndu[j][r] == 0.0 { 0.0 } else { ndu[r][j - 1] / ndu[j][r] };
            ndu[r][j] = saved + right[r + 1] * temp;
            saved = left[j - r] * temp;
        }
        ndu[j][j] = saved;
    }
    let mut ders = vec![vec![0.0; p + 1]; n_ders + 1];
    for j in 0..=p {
        ders[0][j] = ndu[j][p];
    }
    let mut a = vec![vec![0.0; p + 1]; 2];
    for r in 0..=p {
        let (mut s1, mut s2) = (0usize, 1usize);
        a[0][0] = 1.0;
        for k in 1..=n_ders.min(p) {
            let mut d = 0.0;
            let rk = r as isize - k as isize;
            let pk = p - k;
            if r >= k {
                let den = ndu[pk + 1][rk as usize];
                a[s2][0] = if den == 0.0 { 0.0 } else { a[s1][0] / den };
                d = a[s2][0] * ndu[rk as usize][pk];
            }
            let j1 = if rk >= -1 { 1 } else { (-rk) as usize };
            let j2 = if r as isize - 1 <= pk as isize { k - 1 } else { p - r };
            for j in j1..=j2 {
                let idx = (rk + j as isize) as usize;
                let den = ndu[pk + 1][idx];
                a[s2][j] = if den == 0.0 { 0.0 } else { (a[s1][j] - a[s1][j - 1]) / den };
                d += a[s2][j] * ndu[idx][pk];
            }
            if r <= pk {
                let den = ndu[pk + 1][r];
                a[s2][k] = if den == 0.0 { 0.0 } else { -a[s1][k - 1] / den };
                d += a[s2][k] * ndu[r][pk];
            }
            ders[k][r] = d;
            std::mem::swap(&mut s1, &mut s2);
        }
    }
    let mut fac = p as f64;
    for k in 1..=n_ders.min(p) {
        for v in ders[k].iter_mut() {
            *v *= fac;
        }
        fac *= (p - k) as f64;
    }
    ders
}

/// Tensor product of univariate spaces with lexicographic ordering (first
/// direction fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSplineSpace {
    dirs: Vec<SplineSpace1D>,
}

impl TensorSplineSpace {
    pub fn new(dirs: Vec<SplineSpace1D>) -> Result<Self> {
        if !(1..=3).contains(&dirs.len()) {
            return Err(Error::Config(format!("tensor space dimension {} unsupported", dirs.len())));
        }
        Ok(TensorSplineSpace { dirs })
    }

    /// `S_{p_1..p_d}^{r_1..r_d}` on a uniform `n_el^d` mesh.
    pub fn uniform(degrees: &[usize], regularities: &[isize], n_el: usize) -> Result<Self> {
        let dirs = degrees
            .iter()
            .zip(regularities)
            .map(|(&p, &r)| SplineSpace1D::uniform(p, r, n_el))
            .collect::<Result<Vec<_>>>()?;
        Self::new(dirs)
    }

    pub fn n_dirs(&self) -> usize {
        self.dirs.len()
    }

    pub fn dir(&self, d: usize) -> &SplineSpace1D {
        &self.dirs[d]
    }

    pub fn dirs(&self) -> &[SplineSpace1D] {
        &self.dirs
    }

    pub fn dims(&self) -> Vec<usize> {
        self.dirs.iter().map(|s| s.dim()).collect()
    }

    pub fn dim(&self) -> usize {
        self.dirs.iter().map(|s| s.dim()).product()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.dirs.iter().map(|s| s.degree()).collect()
    }

    pub fn index(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for (d, s) in self.dirs.iter().enumerate() {
            idx += multi[d] * stride;
            stride *= s.dim();
        }
        idx
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut m = [0; 3];
        for (d, s) in self.dirs.iter().enumerate() {
            m[d] = idx % s.dim();
            idx /= s.dim();
        }
        m
    }

    /// Nonzero basis values at a parametric point.
    pub fn eval_basis(&self, z: &[f64]) -> Result<Vec<(usize, f64)>> {
        let per_dir = self
            .dirs
            .iter()
            .enumerate()
            .map(|(d, s)| s.eval_basis(z[d]))
            .collect::<Result<Vec<_>>>()?;
        let mut out = vec![(0usize, 1.0f64, 1usize)];
        for (d, vals) in per_dir.iter().enumerate() {
            let stride: usize = self.dirs[..d].iter().map(|s| s.dim()).product();
            let mut next = Vec::with_capacity(out.len() * vals.len());
            for &(i, v) in vals {
                for &(idx, val, _) in &out {
                    next.push((idx + i * stride, val * v, 0));
                }
            }
            out = next;
        }
        Ok(out.into_iter().map(|(i, v, _)| (i, v)).collect())
    }

    /// Nonzero basis values with parametric gradients.
    pub fn eval_basis_grad(&self, z: &[f64]) -> Result<Vec<(usize, f64, [f64; 3])>> {
        let nd = self.dirs.len();
        let mut tables = Vec::with_capacity(nd);
        for (d, s) in self.dirs.iter().enumerate() {
            SplineSpace1D::check_domain(z[d])?;
            let span = s.knot_vector().find_span(z[d]);
            let ders = s.ders_at_span(span, z[d], 1);
            tables.push((span - s.degree(), ders));
        }
        let mut out = Vec::new();
        let counts: Vec<usize> = self.dirs.iter().map(|s| s.degree() + 1).collect();
        let total: usize = counts.iter().product();
        for flat in 0..total {
            let mut rem = flat;
            let mut multi = [0usize; 3];
            let mut loc = [0usize; 3];
            for d in 0..nd {
                loc[d] = rem % counts[d];
                rem /= counts[d];
                multi[d] = tables[d].0 + loc[d];
            }
            let mut val = 1.0;
            let mut grad = [1.0; 3];
            for d in 0..nd {
                let v = tables[d].1[0][loc[d]];
                val *= v;
                for (g, gd) in grad.iter_mut().enumerate().take(nd) {
                    *gd *= if g == d { tables[d].1.get(1).map_or(0.0, |r| r[loc[d]]) } else { v };
                }
            }
            for gd in grad.iter_mut().skip(nd) {
                *gd = 0.0;
            }
            out.push((self.index(&multi[..nd]), val, grad));
        }
        Ok(out)
    }
}
