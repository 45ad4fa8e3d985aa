//! Solvers for the symmetric indefinite saddle-point system.
//!
//! Prescribed (traction) coefficients are eliminated by restriction to the
//! free unknowns. MINRES works matrix-free on the block operator; the direct
//! paths build the reduced matrix explicitly.

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use nalgebra::{DMatrix, DVector};

use crate::assembly::MixedSystem;
use crate::error::{Error, Result};
use crate::par::Exec;
use crate::sparse::{CsrMatrix, Triplets};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Minres,
    DenseDirect,
    SparseDirect,
    /// Sparse direct in 2D, MINRES in 3D.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    None,
    /// Row 2-norms `d` of A on Σ and `diag(B diag(d)⁻¹ Bᵀ)` on the multipliers.
    BlockDiagonal,
}

/// Dense factorizations are refused above this many unknowns.
pub const DENSE_LIMIT: usize = 2500;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub method: Method,
    pub tol: f64,
    /// Defaults to `20 × size` when `None`.
    pub max_iter: Option<usize>,
    pub preconditioner: Preconditioner,
    pub exec: Exec,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig { method: Method::Auto, tol: 5e-8, max_iter: None, preconditioner: Preconditioner::None, exec: Exec::default() }
    }
}

impl SolveConfig {
    pub fn minres(tol: f64) -> Self {
        SolveConfig { method: Method::Minres, tol, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("solver tolerance must be positive, got {}", self.tol)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution {
    pub sigma: Vec<f64>,
    pub u: Vec<f64>,
    pub rot: Vec<f64>,
    /// `‖Mx − b‖ / ‖b‖` of the solved (reduced) system.
    pub residual: f64,
    pub iterations: usize,
    /// Constant added along the identity by the trace-constrained solve.
    pub trace_shift: Option<f64>,
}

impl FieldSolution {
    pub fn zeros(sys: &MixedSystem) -> Self {
        FieldSolution {
            sigma: vec![0.0; sys.n_sigma],
            u: vec![0.0; sys.n_u],
            rot: vec![0.0; sys.n_rot],
            residual: 0.0,
            iterations: 0,
            trace_shift: None,
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// MINRES for symmetric `op`. Returns `(x, iterations, relative residual)`;
/// the reported residual is recomputed from `op` at exit.
pub fn minres<F>(op: F, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize, f64)>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let true_res = |x: &[f64]| {
        let mut r = vec![0.0; n];
        op(x, &mut r);
        r.iter().zip(b).map(|(a, c)| (c - a).powi(2)).sum::<f64>().sqrt() / bnorm
    };
    let mut target = tol;
    let mut v_old = vec![0.0; n];
    let mut v: Vec<f64> = b.iter().map(|x| x / bnorm).collect();
    let mut beta = bnorm;
    let mut w_old = vec![0.0; n];
    let mut w = vec![0.0; n];
    let (mut c, mut s) = (-1.0, 0.0);
    let (mut delta1, mut eps) = (0.0, 0.0);
    let mut phi = bnorm;
    let mut av = vec![0.0; n];
    for k in 1..=max_iter {
        op(&v, &mut av);
        let alpha: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
        for i in 0..n {
            av[i] -= alpha * v[i] + beta * v_old[i];
        }
        let beta_new = norm(&av);
        // previous rotation applied to the new column of T
        let delta2 = c * delta1 + s * alpha;
        let gamma1 = s * delta1 - c * alpha;
        let eps_next = s * beta_new;
        let delta1_next = -c * beta_new;
        let gamma2 = gamma1.hypot(beta_new);
        if gamma2 == 0.0 {
            return Err(Error::LinearAlgebra("MINRES breakdown: singular operator".into()));
        }
        c = gamma1 / gamma2;
        s = beta_new / gamma2;
        let tau = c * phi;
        phi *= s;
        let mut w_new = vec![0.0; n];
        for i in 0..n {
            w_new[i] = (v[i] - delta2 * w[i] - eps * w_old[i]) / gamma2;
            x[i] += tau * w_new[i];
        }
        w_old = std::mem::replace(&mut w, w_new);
        delta1 = delta1_next;
        eps = eps_next;
        let est = phi.abs() / bnorm;
        if est <= target {
            let r = true_res(&x);
            if r <= tol {
                return Ok((x, k, r));
            }
            target = est * 0.1;
        }
        if beta_new == 0.0 {
            let r = true_res(&x);
            if r <= tol {
                return Ok((x, k, r));
            }
            return Err(Error::NonConvergence { iterations: k, residual: r });
        }
        v_old = std::mem::replace(&mut v, av.iter().map(|a| a / beta_new).collect());
        beta = beta_new;
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: true_res(&x) })
}

/// Preconditioned MINRES with a symmetric positive definite preconditioner
/// given through its inverse action `prec`. Convergence is still judged on
/// the Euclidean residual `‖Ax − b‖ / ‖b‖`.
pub fn minres_preconditioned<F, P>(op: F, prec: P, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize, f64)>
where
    F: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm(b);
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let true_res = |x: &[f64]| {
        let mut r = vec![0.0; n];
        op(x, &mut r);
        r.iter().zip(b).map(|(a, c)| (c - a).powi(2)).sum::<f64>().sqrt() / bnorm
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut v_old = vec![0.0; n];
    let mut v = b.to_vec();
    let mut z = vec![0.0; n];
    prec(&v, &mut z);
    let mut gamma = dot(&z, &v);
    if !(gamma > 0.0) {
        return Err(Error::LinearAlgebra("preconditioner is not positive definite".into()));
    }
    gamma = gamma.sqrt();
    let mut gamma_old = 1.0;
    let eta0 = gamma;
    let mut eta = gamma;
    let (mut s_old, mut s, mut c_old, mut c) = (0.0, 0.0, 1.0, 1.0);
    let mut w_old = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut az = vec![0.0; n];
    let mut target = tol;
    for k in 1..=max_iter {
        for zi in z.iter_mut() {
            *zi /= gamma;
        }
        op(&z, &mut az);
        let delta = dot(&az, &z);
        let mut v_new = vec![0.0; n];
        for i in 0..n {
            v_new[i] = az[i] - (delta / gamma) * v[i] - (gamma / gamma_old) * v_old[i];
        }
        let mut z_new = vec![0.0; n];
        prec(&v_new, &mut z_new);
        let g2 = dot(&z_new, &v_new);
        if g2 < 0.0 {
            return Err(Error::LinearAlgebra("preconditioner is not positive definite".into()));
        }
        let gamma_new = g2.sqrt();
        let a0 = c * delta - c_old * s * gamma;
        let a1 = a0.hypot(gamma_new);
        let a2 = s * delta + c_old * c * gamma;
        let a3 = s_old * gamma;
        if a1 == 0.0 {
            return Err(Error::LinearAlgebra("MINRES breakdown: singular operator".into()));
        }
        let (c_new, s_new) = (a0 / a1, gamma_new / a1);
        let mut w_new = vec![0.0; n];
        for i in 0..n {
            w_new[i] = (z[i] - a3 * w_old[i] - a2 * w[i]) / a1;
            x[i] += c_new * eta * w_new[i];
        }
        eta *= -s_new;
        w_old = std::mem::replace(&mut w, w_new);
        v_old = std::mem::replace(&mut v, v_new);
        z = z_new;
        gamma_old = gamma;
        gamma = gamma_new;
        c_old = c;
        c = c_new;
        s_old = s;
        s = s_new;
        let est = eta.abs() / eta0;
        if est <= target || gamma_new == 0.0 {
            let r = true_res(&x);
            if r <= tol {
                return Ok((x, k, r));
            }
            if gamma_new == 0.0 {
                return Err(Error::NonConvergence { iterations: k, residual: r });
            }
            target = est * (tol / r).min(0.5);
        }
    }
    Err(Error::NonConvergence { iterations: max_iter, residual: true_res(&x) })
}

/// Sparse LU solve through faer.
pub fn sparse_lu_solve(m: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    let n = m.nrows();
    let trips: Vec<Triplet<usize, usize, f64>> = m.entries().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
    let mat = SparseColMat::<usize, f64>::try_new_from_triplets(n, m.ncols(), &trips)
        .map_err(|e| Error::LinearAlgebra(format!("sparse matrix: {e:?}")))?;
    let lu = mat.sp_lu().map_err(|e| Error::LinearAlgebra(format!("sparse LU: {e:?}")))?;
    let rhs = faer::Col::<f64>::from_fn(n, |i| b[i]);
    let x = lu.solve(&rhs);
    let out: Vec<f64> = (0..n).map(|i| x[i]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::LinearAlgebra("sparse LU produced non-finite values (singular system?)".into()));
    }
    Ok(out)
}

pub fn dense_solve(m: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>> {
    if m.nrows() > DENSE_LIMIT {
        return Err(Error::TooLarge { size: m.nrows(), limit: DENSE_LIMIT });
    }
    let x = m
        .clone()
        .full_piv_lu()
        .solve(&DVector::from_column_slice(b))
        .ok_or_else(|| Error::LinearAlgebra("singular dense system".into()))?;
    Ok(x.iter().copied().collect())
}

/// The system restricted to its free unknowns, optionally bordered by one
/// linear constraint row on Σ.
struct Reduced<'s> {
    sys: &'s MixedSystem,
    free: Vec<usize>,
    constraint: Option<Vec<f64>>,
    exec: Exec,
}

impl<'s> Reduced<'s> {
    fn new(sys: &'s MixedSystem, constraint: Option<Vec<f64>>, exec: Exec) -> Self {
        let mask = sys.free_mask();
        let free = (0..sys.size()).filter(|&i| mask[i]).collect();
        Reduced { sys, free, constraint, exec }
    }

    fn size(&self) -> usize {
        self.free.len() + usize::from(self.constraint.is_some())
    }

    fn full_apply(&self, x: &[f64], y: &mut [f64]) {
        let ns = self.sys.n_sigma;
        let (xs, xb) = x.split_at(ns);
        let (ys, yb) = y.split_at_mut(ns);
        self.sys.a.matvec(xs, ys, self.exec);
        self.sys.bt.matvec_add(xb, ys, self.exec);
        self.sys.b.matvec(xs, yb, self.exec);
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let mut xf = vec![0.0; self.sys.size()];
        for (k, &i) in self.free.iter().enumerate() {
            xf[i] = x[k];
        }
        let mut yf = vec![0.0; self.sys.size()];
        if let Some(c) = &self.constraint {
            let lm = x[self.free.len()];
            for (i, ci) in c.iter().enumerate() {
                yf[i] += lm * ci;
            }
        }
        let mut tmp = vec![0.0; self.sys.size()];
        self.full_apply(&xf, &mut tmp);
        for (k, &i) in self.free.iter().enumerate() {
            y[k] = tmp[i] + yf[i];
        }
        if let Some(c) = &self.constraint {
            y[self.free.len()] = c.iter().zip(&xf).map(|(a, b)| a * b).sum();
        }
    }

    /// Reduced right-hand side `b_f − M_fc x_c` (plus the constraint value).
    fn rhs(&self, constraint_value: f64) -> (Vec<f64>, Vec<f64>) {
        let mut xc = vec![0.0; self.sys.size()];
        for &(i, v) in &self.sys.fixed {
            xc[i] = v;
        }
        let mut mx = vec![0.0; self.sys.size()];
        self.full_apply(&xc, &mut mx);
        let full = self.sys.rhs();
        let mut b: Vec<f64> = self.free.iter().map(|&i| full[i] - mx[i]).collect();
        if let Some(c) = &self.constraint {
            let fixed_part: f64 = c.iter().zip(&xc).map(|(a, b)| a * b).sum();
            b.push(constraint_value - fixed_part);
        }
        (b, xc)
    }

    fn matrix(&self) -> CsrMatrix {
        let full = self.sys.full_matrix();
        let mut m = full.submatrix(&self.free, &self.free);
        if let Some(c) = &self.constraint {
            let n = self.size();
            let mut t = Triplets::new();
            for (i, j, v) in m.entries() {
                t.push(i, j, v);
            }
            let last = self.free.len();
            for (k, &i) in self.free.iter().enumerate() {
                if i < c.len() && c[i] != 0.0 {
                    t.push(k, last, c[i]);
                    t.push(last, k, c[i]);
                }
            }
            m = CsrMatrix::from_triplets(n, n, t);
        }
        m
    }

    fn solve(&self, b: &[f64], cfg: &SolveConfig) -> Result<(Vec<f64>, usize, f64)> {
        let n = self.size();
        let method = match cfg.method {
            Method::Auto if self.sys.n_rot > 0 && self.sys_dim() == 3 => Method::Minres,
            Method::Auto => Method::SparseDirect,
            m => m,
        };
        let bnorm = norm(b);
        let rel = |x: &[f64]| {
            if bnorm == 0.0 {
                return 0.0;
            }
            let mut r = vec![0.0; n];
            self.apply(x, &mut r);
            r.iter().zip(b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt() / bnorm
        };
        match method {
            Method::Minres => {
                let cap = cfg.max_iter.unwrap_or(20 * n);
                match cfg.preconditioner {
                    Preconditioner::None => minres(|x, y| self.apply(x, y), b, cfg.tol, cap),
                    Preconditioner::BlockDiagonal => {
                        let d = self.block_diagonal()?;
                        let prec = |x: &[f64], y: &mut [f64]| {
                            for ((yi, xi), di) in y.iter_mut().zip(x).zip(&d) {
                                *yi = xi / di;
                            }
                        };
                        minres_preconditioned(|x, y| self.apply(x, y), prec, b, cfg.tol, cap)
                    }
                }
            }
            Method::DenseDirect => {
                if n > DENSE_LIMIT {
                    return Err(Error::TooLarge { size: n, limit: DENSE_LIMIT });
                }
                let x = dense_solve(&self.matrix().to_dense(), b)?;
                let r = rel(&x);
                Ok((x, 0, r))
            }
            _ => {
                let x = if bnorm == 0.0 { vec![0.0; n] } else { sparse_lu_solve(&self.matrix(), b)? };
                let r = rel(&x);
                if !(r <= cfg.tol) {
                    return Err(Error::NonConvergence { iterations: 0, residual: r });
                }
                Ok((x, 0, r))
            }
        }
    }

    /// Diagonal of the block preconditioner on the reduced unknowns.
    fn block_diagonal(&self) -> Result<Vec<f64>> {
        let ns = self.sys.n_sigma;
        let mut pos = vec![usize::MAX; self.sys.size()];
        for (k, &i) in self.free.iter().enumerate() {
            pos[i] = k;
        }
        let mut da = vec![0.0; ns];
        for (i, d) in da.iter_mut().enumerate() {
            *d = self.sys.a.row(i).map(|(_, v)| v * v).sum::<f64>().sqrt();
        }
        // guard against degenerate rows
        let scale = da.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let floor = 1e-14 * scale.max(f64::MIN_POSITIVE);
        let mut out = vec![0.0; self.size()];
        for (k, &i) in self.free.iter().enumerate() {
            if i < ns {
                out[k] = da[i].max(floor);
            } else {
                let row = i - ns;
                let v: f64 = self
                    .sys
                    .b
                    .row(row)
                    .filter(|&(j, _)| pos[j] != usize::MAX)
                    .map(|(j, b)| b * b / da[j].max(floor))
                    .sum();
                out[k] = v;
            }
        }
        if let Some(c) = &self.constraint {
            out[self.free.len()] =
                c.iter().enumerate().filter(|&(j, _)| pos[j] != usize::MAX).map(|(j, v)| v * v / da[j].max(floor)).sum();
        }
        if out.iter().any(|v| !(*v > 0.0)) {
            return Err(Error::LinearAlgebra("block-diagonal preconditioner has a zero entry".into()));
        }
        Ok(out)
    }

    fn sys_dim(&self) -> usize {
        // rotations have one component in 2D, three in 3D
        if self.sys.params.n == 3 { 3 } else { 2 }
    }

    fn expand(&self, x: &[f64], xc: Vec<f64>) -> Vec<f64> {
        let mut full = xc;
        for (k, &i) in self.free.iter().enumerate() {
            full[i] = x[k];
        }
        full
    }
}

fn split(sys: &MixedSystem, full: Vec<f64>) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut s = full;
    let mut u = s.split_off(sys.n_sigma);
    let r = u.split_off(sys.n_u);
    (s, u, r)
}

/// Solves the assembled system.
pub fn solve(sys: &MixedSystem, cfg: &SolveConfig) -> Result<FieldSolution> {
    cfg.validate()?;
    let red = Reduced::new(sys, None, cfg.exec);
    let (b, xc) = red.rhs(0.0);
    let (x, iterations, residual) = red.solve(&b, cfg)?;
    let (sigma, u, rot) = split(sys, red.expand(&x, xc));
    Ok(FieldSolution { sigma, u, rot, residual, iterations, trace_shift: None })
}

/// Pure-Dirichlet solve on `{τ : ∫ tr τ = 0}` followed by the shift `σ + cI`.
///
/// `identity` holds the coefficients of `I` in Σ_h. For finite λ the shift
/// solves `⟨A(σ + cI), I⟩ = ⟨u_D, Iν⟩`; for λ = ∞ that equation degenerates
/// and `∫ tr σ_h` is set to `pinned_trace` (zero when `None`).
pub fn solve_trace_constrained(
    sys: &MixedSystem,
    cfg: &SolveConfig,
    identity: &[f64],
    pinned_trace: Option<f64>,
) -> Result<FieldSolution> {
    cfg.validate()?;
    if !sys.fixed.is_empty() {
        return Err(Error::Config("trace-constrained solve expects a pure Dirichlet problem".into()));
    }
    if identity.len() != sys.n_sigma {
        return Err(Error::Config("identity coefficients do not match the stress space".into()));
    }
    let red = Reduced::new(sys, Some(sys.trace_row.clone()), cfg.exec);
    let (b, xc) = red.rhs(0.0);
    let (x, iterations, residual) = red.solve(&b, cfg)?;
    let (mut sigma, u, rot) = split(sys, red.expand(&x[..x.len() - 1], xc));
    let ax_i = sys.a.mul_vec(identity);
    let ai_i: f64 = ax_i.iter().zip(identity).map(|(a, b)| a * b).sum();
    let measure: f64 = sys.trace_row.iter().zip(identity).map(|(a, b)| a * b).sum();
    let c = if sys.params.is_incompressible() {
        pinned_trace.unwrap_or(0.0) / measure
    } else {
        let a_sig_i: f64 = ax_i.iter().zip(&sigma).map(|(a, b)| a * b).sum();
        (sys.g_identity - a_sig_i) / ai_i
    };
    for (s, i) in sigma.iter_mut().zip(identity) {
        *s += c * i;
    }
    Ok(FieldSolution { sigma, u, rot, residual, iterations, trace_shift: Some(c) })
}
