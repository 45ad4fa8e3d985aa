//! Manufactured solutions, error norms, point probes and convergence tables.

use std::fmt::Write as _;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble, project_constant_stress, Discretization, Problem};
use crate::autodiff::Jet;
use crate::derham::{ElasticitySpaces, ElementGeometry, QuadraturePolicy};
use crate::error::{Error, Result};
use crate::geometry::{catalog, Face, MultiPatchGeometry};
use crate::operators::{skew, skew_dim, Lambda, MaterialParams};
use crate::par::Exec;
use crate::quadrature::GaussRule;
use crate::solver::{solve, solve_trace_constrained, FieldSolution, SolveConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CaseKind {
    DeformedSquare,
    Incompressible,
    Ring3d,
}

/// A boundary value problem with known exact displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct ManufacturedCase {
    pub name: String,
    pub kind: CaseKind,
    /// Catalog name of the geometry.
    pub geometry: String,
    pub params: MaterialParams,
    /// Faces carrying the exact traction `σν`; all other faces get `u_D = u`.
    pub traction_faces: Vec<(usize, Face)>,
}

pub const CASE_NAMES: &[&str] = &["deformed_square", "incompressible", "ring3d", "deformed_square_9patch"];

pub fn case_catalog(name: &str) -> Result<ManufacturedCase> {
    let finite = |n| MaterialParams::new(Lambda::Finite(2.0), 1.0, n);
    let (kind, geometry, params, traction_faces) = match name {
        "deformed_square" => (CaseKind::DeformedSquare, "deformed_square", finite(2)?, vec![]),
        "deformed_square_9patch" => (CaseKind::DeformedSquare, "deformed_square_9patch", finite(2)?, vec![]),
        "incompressible" => (
            CaseKind::Incompressible,
            "deformed_square",
            MaterialParams::new(Lambda::Infinite, 1.0, 2)?,
            vec![(0, Face::new(0, 1)), (0, Face::new(1, 0)), (0, Face::new(1, 1))],
        ),
        "ring3d" => (CaseKind::Ring3d, "ring3d", finite(3)?, vec![]),
        _ => return Err(Error::Unknown { kind: "case", name: name.to_string() }),
    };
    Ok(ManufacturedCase { name: name.to_string(), kind, geometry: geometry.to_string(), params, traction_faces })
}

fn ring_parameters(x: [Jet; 3]) -> [Jet; 3] {
    let w = std::f64::consts::FRAC_1_SQRT_2;
    let d = x[1] - x[0];
    let root = (d * d * (w * w) + x[0] * x[1]).sqrt();
    let z1 = x[0] / (x[0] + d * w + root);
    let z2 = (x[0] * x[0] + x[1] * x[1]).sqrt() - 1.0;
    [z1, z2, x[2]]
}

impl ManufacturedCase {
    pub fn dim(&self) -> usize {
        self.params.n
    }

    pub fn geometry(&self) -> Result<MultiPatchGeometry> {
        catalog(&self.geometry)
    }

    /// Exact displacement with first and second derivatives.
    pub fn displacement_jets(&self, x: [f64; 3]) -> [Jet; 3] {
        use std::f64::consts::PI;
        let xs = Jet::point(x);
        let zero = Jet::constant(0.0);
        match self.kind {
            CaseKind::DeformedSquare => {
                let z2 = xs[1] + xs[0] * xs[0] - xs[0];
                let g = xs[0].scale(PI).sin() * z2.scale(PI).sin();
                [g, -g, zero]
            }
            CaseKind::Incompressible => {
                let (cx, sx) = (xs[0].scale(2.0 * PI).cos(), xs[0].scale(2.0 * PI).sin());
                let (cy, sy) = (xs[1].scale(2.0 * PI).cos(), xs[1].scale(2.0 * PI).sin());
                [(cx - 1.0) * sy, -((cy - 1.0) * sx), zero]
            }
            CaseKind::Ring3d => {
                let z = ring_parameters(xs);
                let g = z[0].scale(PI).sin() * z[1].scale(PI).sin() * z[2].scale(PI).sin();
                [g.scale(0.5), g, g.scale(-0.5)]
            }
        }
    }

    pub fn displacement(&self, x: [f64; 3]) -> [f64; 3] {
        self.displacement_jets(x).map(|j| j.v)
    }

    /// `(∇u)_{rc} = ∂_c u_r`.
    pub fn grad_u(&self, x: [f64; 3]) -> Matrix3<f64> {
        let u = self.displacement_jets(x);
        let n = self.dim();
        Matrix3::from_fn(|r, c| if r < n && c < n { u[r].g[c] } else { 0.0 })
    }

    /// `σ = 2με + λ tr(ε) I`; for λ = ∞ the pressure part is taken as zero.
    pub fn stress(&self, x: [f64; 3]) -> Matrix3<f64> {
        let g = self.grad_u(x);
        let eps = (g + g.transpose()) * 0.5;
        let mut s = eps * (2.0 * self.params.mu);
        if let Lambda::Finite(l) = self.params.lambda {
            let tr = eps.trace();
            for i in 0..self.dim() {
                s[(i, i)] += l * tr;
            }
        }
        s
    }

    /// `f = ∇·σ`, from second derivatives of `u`.
    pub fn load(&self, x: [f64; 3]) -> [f64; 3] {
        let u = self.displacement_jets(x);
        let n = self.dim();
        let mu = self.params.mu;
        let lam = match self.params.lambda {
            Lambda::Finite(l) => l,
            Lambda::Infinite => 0.0,
        };
        let mut f = [0.0; 3];
        for (r, fr) in f.iter_mut().enumerate().take(n) {
            let mut v = 0.0;
            for c in 0..n {
                v += mu * (u[r].h[c][c] + u[c].h[r][c]);
                v += lam * u[c].h[c][r];
            }
            *fr = v;
        }
        f
    }

    /// `p = ½ Skew(∇u)`; the 2D value sits in slot 0.
    pub fn rotation(&self, x: [f64; 3]) -> Vector3<f64> {
        skew(&self.grad_u(x), self.dim()).map(|v| v * 0.5).unwrap_or_else(|_| Vector3::zeros())
    }

    pub fn traction(&self, x: [f64; 3], normal: [f64; 3]) -> [f64; 3] {
        let t = self.stress(x) * Vector3::from(normal);
        [t[0], t[1], t[2]]
    }

    pub fn is_pure_dirichlet(&self) -> bool {
        self.traction_faces.is_empty()
    }
}

/// Discrete fields at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointFields {
    pub x: [f64; 3],
    pub sigma: Matrix3<f64>,
    pub div: Vector3<f64>,
    pub u: Vector3<f64>,
    pub rot: Vector3<f64>,
}

/// Evaluates `σ_h, ∇·σ_h, u_h, p_h` at the points of `eg` on `patch`.
pub fn element_fields(disc: &Discretization, sol: &FieldSolution, patch: usize, eg: &ElementGeometry) -> Vec<PointFields> {
    let n = disc.spaces.n;
    let (sv, uv, rv) = disc.eval_fields(eg);
    let coef = |l: usize, f: &dyn Fn(usize) -> (usize, f64), x: &[f64]| -> Vec<f64> {
        (0..l).map(|a| {
            let (g, s) = f(a);
            s * x[g]
        }).collect()
    };
    let cs: Vec<Vec<f64>> = (0..n)
        .map(|r| coef(sv.nloc(), &|a| disc.sigma_dof(patch, r, sv.dofs[a]), &sol.sigma))
        .collect();
    let cu: Vec<Vec<f64>> = (0..n).map(|r| coef(uv.nloc(), &|a| disc.u_dof(patch, r, uv.dofs[a]), &sol.u)).collect();
    let cr: Vec<Vec<f64>> = (0..disc.spaces.n_rot)
        .map(|k| coef(rv.nloc(), &|a| disc.rot_dof(patch, k, rv.dofs[a]), &sol.rot))
        .collect();
    (0..eg.n_qp())
        .map(|q| {
            let mut pf = PointFields {
                x: eg.jac[q].x,
                sigma: Matrix3::zeros(),
                div: Vector3::zeros(),
                u: Vector3::zeros(),
                rot: Vector3::zeros(),
            };
            for r in 0..n {
                for (a, &c) in cs[r].iter().enumerate() {
                    if c == 0.0 {
                        continue;
                    }
                    let v = sv.value(q, a);
                    for d in 0..n {
                        pf.sigma[(r, d)] += c * v[d];
                    }
                    pf.div[r] += c * sv.deriv(q, a)[0];
                }
                pf.u[r] = cu[r].iter().enumerate().map(|(a, c)| c * uv.value(q, a)[0]).sum();
            }
            for (k, ck) in cr.iter().enumerate() {
                pf.rot[k] = ck.iter().enumerate().map(|(a, c)| c * rv.value(q, a)[0]).sum();
            }
            pf
        })
        .collect()
}

/// All discrete fields at a physical point.
pub fn probe_fields(disc: &Discretization, sol: &FieldSolution, x: [f64; 3]) -> Result<PointFields> {
    let (patch, z) = disc.geo.inverse(x)?;
    let eg = ElementGeometry::at_point(&disc.geo.patches[patch], &disc.mesh(), &z[..disc.spaces.n])?;
    Ok(element_fields(disc, sol, patch, &eg)[0])
}

/// `u_h` at a physical point.
pub fn point_probe(disc: &Discretization, sol: &FieldSolution, x: [f64; 3]) -> Result<[f64; 3]> {
    let f = probe_fields(disc, sol, x)?;
    Ok([f.u[0], f.u[1], f.u[2]])
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorNorms {
    pub sigma_hdiv: f64,
    pub sigma_l2: f64,
    pub u_l2: f64,
    pub p_l2: f64,
    pub div_l2: f64,
}

/// Errors against the exact solution by element quadrature with
/// `max degree + 3` points per direction.
pub fn error_norms(disc: &Discretization, sol: &FieldSolution, case: &ManufacturedCase, exec: Exec) -> Result<ErrorNorms> {
    let rule = GaussRule::new(disc.spaces.error_points());
    let n = disc.spaces.n;
    let n_rot = skew_dim(n);
    let parts = exec.map_range(disc.n_elements(), |k| -> Result<[f64; 4]> {
        let (patch, e) = disc.element(k);
        let eg = ElementGeometry::new(&disc.geo.patches[patch], &disc.mesh(), e, &rule)?;
        let dx = eg.dx();
        let mut acc = [0.0; 4];
        for (q, pf) in element_fields(disc, sol, patch, &eg).into_iter().enumerate() {
            let s = case.stress(pf.x);
            let f = case.load(pf.x);
            let u = case.displacement(pf.x);
            let p = case.rotation(pf.x);
            let mut es = 0.0;
            let mut ed = 0.0;
            let mut eu = 0.0;
            for r in 0..n {
                for c in 0..n {
                    es += (s[(r, c)] - pf.sigma[(r, c)]).powi(2);
                }
                ed += (f[r] - pf.div[r]).powi(2);
                eu += (u[r] - pf.u[r]).powi(2);
            }
            let ep: f64 = (0..n_rot).map(|k| (p[k] - pf.rot[k]).powi(2)).sum();
            for (a, v) in acc.iter_mut().zip([es, ed, eu, ep]) {
                *a += v * dx[q];
            }
        }
        Ok(acc)
    });
    let mut tot = [0.0; 4];
    for p in parts {
        for (t, v) in tot.iter_mut().zip(p?) {
            *t += v;
        }
    }
    Ok(ErrorNorms {
        sigma_hdiv: (tot[0] + tot[1]).sqrt(),
        sigma_l2: tot[0].sqrt(),
        u_l2: tot[2].sqrt(),
        p_l2: tot[3].sqrt(),
        div_l2: tot[1].sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyOptions {
    pub solver: SolveConfig,
    pub exec: Exec,
    pub naive: bool,
    pub couple_rotations: bool,
    pub quadrature: QuadraturePolicy,
}

impl Default for StudyOptions {
    fn default() -> Self {
        StudyOptions {
            solver: SolveConfig::default(),
            exec: Exec::default(),
            naive: false,
            couple_rotations: true,
            quadrature: QuadraturePolicy::Default,
        }
    }
}

pub fn n_el_from_h(h: f64) -> Result<usize> {
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::Config(format!("mesh size {h} outside (0, 1]")));
    }
    let n = (1.0 / h).round();
    if (n * h - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("mesh size {h} is not 1/k for an integer k")));
    }
    Ok(n as usize)
}

fn spaces(n: usize, p: usize, r: isize, n_el: usize, opts: &StudyOptions) -> Result<ElasticitySpaces> {
    let s = if opts.naive { ElasticitySpaces::naive(n, p, r, n_el)? } else { ElasticitySpaces::build(n, p, r, n_el)? };
    Ok(s.with_quadrature(opts.quadrature))
}

/// Assembles and solves a manufactured case on `geo` (which must be the
/// case's geometry).
pub fn solve_case<'g>(
    case: &ManufacturedCase,
    geo: &'g MultiPatchGeometry,
    p: usize,
    r: isize,
    n_el: usize,
    opts: &StudyOptions,
) -> Result<(Discretization<'g>, FieldSolution, usize)> {
    let disc = Discretization::new(geo, spaces(case.dim(), p, r, n_el, opts)?, opts.couple_rotations)?;
    let load = |x: [f64; 3]| case.load(x);
    let ud = |x: [f64; 3]| case.displacement(x);
    let tr = |x: [f64; 3], nu: [f64; 3]| case.traction(x, nu);
    let problem = Problem {
        params: case.params,
        load: Some(&load),
        u_d: Some(&ud),
        traction_faces: case.traction_faces.clone(),
        traction: Some(&tr),
    };
    let sys = assemble(&disc, &problem, opts.exec)?;
    let dof = sys.n_free();
    let sol = if case.params.is_incompressible() && case.is_pure_dirichlet() {
        require_identity_in_sigma(geo, p, r)?;
        let (x_i, _) = project_constant_stress(&disc, &Matrix3::identity(), opts.exec)?;
        let target = exact_trace_integral(&disc, case)?;
        solve_trace_constrained(&sys, &opts.solver, &x_i, Some(target))?
    } else {
        solve(&sys, &opts.solver)?
    };
    Ok((disc, sol, dof))
}

/// λ = ∞ with pure Dirichlet data pins `∫ tr σ_h`, which needs `I ∈ Σ_h`.
fn require_identity_in_sigma(geo: &MultiPatchGeometry, p: usize, r: isize) -> Result<()> {
    let n = geo.dim();
    for g in &geo.patches {
        let (q, s) = (g.degree(), g.regularity());
        if !crate::verification::identity_predicate(n, q, s, p, r) {
            let rule = if n == 3 { "2q <= p + 1 and r <= s" } else { "p >= q and r <= s" };
            return Err(Error::Config(format!(
                "lambda = inf with pure Dirichlet data needs the identity in the stress space ({rule}); \
                 geometry degree q = {q}, regularity s = {s:?}, p = {p}, r = {r}"
            )));
        }
    }
    Ok(())
}

fn exact_trace_integral(disc: &Discretization, case: &ManufacturedCase) -> Result<f64> {
    let rule = GaussRule::new(disc.spaces.error_points());
    let mut total = 0.0;
    for k in 0..disc.n_elements() {
        let (patch, e) = disc.element(k);
        let eg = ElementGeometry::new(&disc.geo.patches[patch], &disc.mesh(), e, &rule)?;
        for (jp, dx) in eg.jac.iter().zip(eg.dx()) {
            total += case.stress(jp.x).trace() * dx;
        }
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub h: f64,
    pub dof: usize,
    pub errors: ErrorNorms,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub case: String,
    pub p: usize,
    pub r: isize,
    pub rows: Vec<ConvergenceRow>,
}

/// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})`.
pub fn rates(h: &[f64], e: &[f64]) -> Vec<f64> {
    h.windows(2).zip(e.windows(2)).map(|(h, e)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln()).collect()
}

/// Least-squares slope of `log e` against `log h` over the last `k` points.
pub fn fitted_rate(h: &[f64], e: &[f64], k: usize) -> f64 {
    let m = h.len().min(e.len());
    let k = k.min(m);
    let xs: Vec<f64> = h[m - k..m].iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = e[m - k..m].iter().map(|v| v.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k as f64;
    let my = ys.iter().sum::<f64>() / k as f64;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

impl ConvergenceReport {
    pub fn h(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.h).collect()
    }

    pub fn column(&self, f: impl Fn(&ErrorNorms) -> f64) -> Vec<f64> {
        self.rows.iter().map(|r| f(&r.errors)).collect()
    }

    /// Consecutive rates for σ (H(div)), u, p and ∇·σ.
    pub fn rates(&self) -> [Vec<f64>; 4] {
        let h = self.h();
        [
            rates(&h, &self.column(|e| e.sigma_hdiv)),
            rates(&h, &self.column(|e| e.u_l2)),
            rates(&h, &self.column(|e| e.p_l2)),
            rates(&h, &self.column(|e| e.div_l2)),
        ]
    }

    /// Least-squares rates over the last three rows.
    pub fn fitted_rates(&self) -> [f64; 4] {
        let h = self.h();
        [
            fitted_rate(&h, &self.column(|e| e.sigma_hdiv), 3),
            fitted_rate(&h, &self.column(|e| e.u_l2), 3),
            fitted_rate(&h, &self.column(|e| e.p_l2), 3),
            fitted_rate(&h, &self.column(|e| e.div_l2), 3),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("h,dof,err_sigma_hdiv,err_u_l2,err_p_l2,err_div_l2,rate_sigma,rate_u,rate_p,iters\n");
        let [rs, ru, rp, _] = self.rates();
        for (i, row) in self.rows.iter().enumerate() {
            let rate = |v: &Vec<f64>| if i == 0 { String::new() } else { format!("{:.6}", v[i - 1]) };
            let e = &row.errors;
            let _ = writeln!(
                s,
                "{},{},{:.10e},{:.10e},{:.10e},{:.10e},{},{},{},{}",
                row.h,
                row.dof,
                e.sigma_hdiv,
                e.u_l2,
                e.p_l2,
                e.div_l2,
                rate(&rs),
                rate(&ru),
                rate(&rp),
                row.iterations
            );
        }
        s
    }
}

/// Runs the case on each mesh size. Mesh sizes must be decreasing.
pub fn convergence_study(case: &ManufacturedCase, p: usize, r: isize, hs: &[f64], opts: &StudyOptions) -> Result<ConvergenceReport> {
    if hs.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Config("mesh sizes must be strictly decreasing".into()));
    }
    let geo = case.geometry()?;
    let mut rows = Vec::with_capacity(hs.len());
    for &h in hs {
        let n_el = n_el_from_h(h)?;
        let (disc, sol, dof) = solve_case(case, &geo, p, r, n_el, opts)?;
        let errors = error_norms(&disc, &sol, case, opts.exec)?;
        rows.push(ConvergenceRow { h, dof, errors, iterations: sol.iterations, residual: sol.residual });
    }
    Ok(ConvergenceReport { case: case.name.clone(), p, r, rows })
}

/// Probe point of the Cook membrane (midpoint of the loaded edge).
pub const COOK_POINT: [f64; 3] = [48.0, 52.0, 0.0];
/// Published reference displacement at the probe point.
pub const COOK_REFERENCE: [f64; 2] = [-7.248, 16.442];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CookRow {
    pub n_el: usize,
    pub dof: usize,
    pub ux: f64,
    pub uy: f64,
    pub iterations: usize,
}

/// Cook membrane with `λ = ∞`, `μ = 0.375` and [`COOK_LOAD`].
pub fn cook_run(p: usize, n_el: usize, opts: &StudyOptions) -> Result<CookRow> {
    cook_run_with(p, n_el, MaterialParams::new(Lambda::Infinite, 0.375, 2)?, COOK_LOAD, opts)
}

/// Shear load on the right edge of the Cook membrane.
pub const COOK_LOAD: [f64; 2] = [0.0, 1.0 / 16.0];

/// Cook membrane with `r = p − 2`, clamped left edge, free top and bottom
/// edges and the constant traction `load` on the right edge.
pub fn cook_run_with(p: usize, n_el: usize, params: MaterialParams, load: [f64; 2], opts: &StudyOptions) -> Result<CookRow> {
    if p < 2 {
        return Err(Error::Domain(format!("Cook runs need p >= 2, got {p}")));
    }
    let geo = catalog("cook")?;
    let disc = Discretization::new(&geo, spaces(2, p, p as isize - 2, n_el, opts)?, opts.couple_rotations)?;
    // the right edge is the only face with normal (1, 0)
    let traction = |_: [f64; 3], nu: [f64; 3]| if nu[0] > 1.0 - 1e-9 { [load[0], load[1], 0.0] } else { [0.0; 3] };
    let problem = Problem {
        params,
        load: None,
        u_d: None,
        traction_faces: vec![(0, Face::new(0, 1)), (0, Face::new(1, 0)), (0, Face::new(1, 1))],
        traction: Some(&traction),
    };
    let sys = assemble(&disc, &problem, opts.exec)?;
    let sol = solve(&sys, &opts.solver)?;
    let u = point_probe(&disc, &sol, COOK_POINT)?;
    Ok(CookRow { n_el, dof: sys.n_free(), ux: u[0], uy: u[1], iterations: sol.iterations })
}

pub fn cook_csv(rows: &[CookRow]) -> String {
    let mut s = String::from("dof,u_x,u_y\n");
    for r in rows {
        let _ = writeln!(s, "{},{:.10},{:.10}", r.dof, r.ux, r.uy);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_interior(case: &ManufacturedCase, rng: &mut ChaCha8Rng) -> [f64; 3] {
        let geo = case.geometry().unwrap();
        let z: Vec<f64> = (0..case.dim()).map(|_| rng.random_range(0.05..0.95)).collect();
        let k = rng.random_range(0..geo.n_patches());
        geo.patches[k].eval(&z).unwrap()
    }

    #[test]
    fn load_matches_finite_difference_of_stress() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for name in ["deformed_square", "incompressible", "ring3d"] {
            let case = case_catalog(name).unwrap();
            let n = case.dim();
            for _ in 0..100 {
                let x = random_interior(&case, &mut rng);
                let f = case.load(x);
                let h = 1e-5;
                for r in 0..n {
                    let mut fd = 0.0;
                    for c in 0..n {
                        let (mut xp, mut xm) = (x, x);
                        xp[c] += h;
                        xm[c] -= h;
                        fd += (case.stress(xp)[(r, c)] - case.stress(xm)[(r, c)]) / (2.0 * h);
                    }
                    assert!((fd - f[r]).abs() <= 1e-5 * (1.0 + f[r].abs()), "{name}: {fd} vs {}", f[r]);
                }
            }
        }
    }

    #[test]
    fn case_boundary_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let inc = case_catalog("incompressible").unwrap();
        for _ in 0..100 {
            let x = [rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0), 0.0];
            assert!(inc.grad_u(x).trace().abs() <= 1e-12);
            let u = inc.displacement([0.0, x[1], 0.0]);
            assert!(u[0].abs() <= 1e-14 && u[1].abs() <= 1e-14);
        }
        for name in ["deformed_square", "ring3d"] {
            let case = case_catalog(name).unwrap();
            let geo = case.geometry().unwrap();
            let n = case.dim();
            for face in Face::all(n) {
                for _ in 0..10 {
                    let t: Vec<f64> = (0..n - 1).map(|_| rng.random_range(0.0..1.0)).collect();
                    let z = crate::geometry::face_point(n, face, &t);
                    let x = geo.patches[0].eval(&z[..n]).unwrap();
                    let u = case.displacement(x);
                    assert!(u.iter().all(|v| v.abs() < 1e-12), "{name} {face:?}: {u:?}");
                }
            }
        }
    }

    #[test]
    fn ring_parameters_invert_the_geometry() {
        let geo = catalog("ring3d").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let z = [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)];
            let x = geo.patches[0].eval(&z).unwrap();
            let back = ring_parameters(Jet::point(x));
            for d in 0..3 {
                assert!((back[d].v - z[d]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rate_arithmetic() {
        let r = rates(&[0.5, 0.25], &[8.4378696, 2.3346271]);
        assert!((r[0] - 1.8537).abs() < 1e-3);
        let r = rates(&[1.0 / 8.0, 0.1], &[0.00075613872, 0.00031063999]);
        assert!((r[0] - 3.99).abs() < 0.01);
        let h = [0.5, 0.25, 0.125];
        let e: Vec<f64> = h.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((fitted_rate(&h, &e, 3) - 2.0).abs() < 1e-12);
        assert!(n_el_from_h(0.3).is_err());
        assert_eq!(n_el_from_h(1.0 / 6.0).unwrap(), 6);
    }

    #[test]
    fn zero_solution_probes_to_zero() {
        let geo = catalog("cook").unwrap();
        let disc = Discretization::new(&geo, ElasticitySpaces::build(2, 2, 0, 2).unwrap(), true).unwrap();
        let sys = crate::assembly::assemble(
            &disc,
            &Problem::pure_dirichlet(MaterialParams::new(Lambda::Finite(1.0), 1.0, 2).unwrap()),
            Exec::Sequential,
        )
        .unwrap();
        let sol = FieldSolution::zeros(&sys);
        assert_eq!(point_probe(&disc, &sol, COOK_POINT).unwrap(), [0.0; 3]);
        assert!(point_probe(&disc, &sol, [100.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn deformed_square_coarsest_matches_reference() {
        let case = case_catalog("deformed_square").unwrap();
        let rep = convergence_study(&case, 2, 0, &[0.5], &StudyOptions::default()).unwrap();
        let e = rep.rows[0].errors;
        assert!((e.sigma_hdiv / 8.4378696 - 1.0).abs() < 0.01, "{e:?}");
        assert!((e.u_l2 / 0.093756549 - 1.0).abs() < 0.01, "{e:?}");
        assert!((e.p_l2 / 0.24554224 - 1.0).abs() < 0.01, "{e:?}");
        let opts = StudyOptions { quadrature: QuadraturePolicy::Minimal, ..Default::default() };
        let e = convergence_study(&case, 2, 0, &[0.5], &opts).unwrap().rows[0].errors;
        assert!((e.sigma_hdiv / 8.4378696 - 1.0).abs() < 1e-6, "{e:?}");
        assert!((e.u_l2 / 0.093756549 - 1.0).abs() < 1e-6, "{e:?}");
        assert!((e.p_l2 / 0.24554224 - 1.0).abs() < 1e-6, "{e:?}");
    }
}
