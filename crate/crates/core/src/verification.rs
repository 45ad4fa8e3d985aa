//! Numerical evidence for the structural properties of the discretization:
//! commuting diagrams, the discrete inf-sup condition, identity
//! representability and normal continuity across patch interfaces.

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::element_fields;
use crate::assembly::{assemble, assemble_grams, project_constant_stress, Discretization, Problem};
use crate::autodiff::Jet;
use crate::derham::{exterior_derivative_check, DiscreteSpace, ElasticitySpaces, ElementGeometry};
use crate::error::{Error, Result};
use crate::geometry::{face_point, MultiPatchGeometry};
use crate::operators::{Lambda, MaterialParams};
use crate::par::Exec;
use crate::quadrature::GaussRule;
use crate::solver::FieldSolution;

/// Size limit for the dense eigenvalue probes.
pub const DENSE_PROBE_LIMIT: usize = 3000;

/// One line of a verification report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeEntry {
    pub probe: String,
    pub h: Option<f64>,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub seed: u64,
    pub entries: Vec<ProbeEntry>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }
}

/// Per-h values of one probe with an overall verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub label: String,
    pub hs: Vec<f64>,
    pub values: Vec<f64>,
    pub pass: bool,
}

fn random_cubic(rng: &mut ChaCha8Rng, n: usize) -> Vec<([i32; 3], f64)> {
    let mut terms = Vec::new();
    for a in 0..=3 {
        for b in 0..=3 - a {
            for c in 0..=(3 - a - b) {
                if n == 2 && c > 0 {
                    continue;
                }
                terms.push(([a, b, c], rng.random_range(-1.0..1.0)));
            }
        }
    }
    terms
}

fn eval_poly(terms: &[([i32; 3], f64)], x: &[Jet; 3]) -> Jet {
    let mut acc = Jet::constant(0.0);
    for (e, c) in terms {
        let mut m = Jet::constant(*c);
        for d in 0..3 {
            if e[d] > 0 {
                m = m * x[d].powi(e[d]);
            }
        }
        acc = acc + m;
    }
    acc
}

/// 2D: `Skew(curl v) − ∇·v` with `curl` acting row-wise as `(∂₂v_r, −∂₁v_r)`.
pub fn commutativity_residual_2d(v: [Jet; 2]) -> f64 {
    let curl = Matrix3::from_fn(|r, c| match (r, c) {
        (r, 0) if r < 2 => v[r].g[1],
        (r, 1) if r < 2 => -v[r].g[0],
        _ => 0.0,
    });
    let skew = curl[(1, 0)] - curl[(0, 1)];
    let div = v[0].g[0] + v[1].g[1];
    (skew - div).abs()
}

/// 3D: `|∇·(Ξw) − Skew(∇×w)|` with both operators acting row-wise.
pub fn commutativity_residual_3d(w: &[[Jet; 3]; 3]) -> f64 {
    let mut curl = Matrix3::<f64>::zeros();
    for r in 0..3 {
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    let e = crate::derham::levi_civita(i, j, k);
                    if e != 0.0 {
                        curl[(r, i)] += e * w[r][k].g[j];
                    }
                }
            }
        }
    }
    let skew = Vector3::new(curl[(2, 1)] - curl[(1, 2)], curl[(0, 2)] - curl[(2, 0)], curl[(1, 0)] - curl[(0, 1)]);
    // (Ξw)_{rc} = w_{cr} − δ_{rc} tr w
    let mut div = Vector3::zeros();
    for r in 0..3 {
        for c in 0..3 {
            div[r] += w[c][r].g[c];
        }
        for k in 0..3 {
            div[r] -= w[k][k].g[r];
        }
    }
    (div - skew).amax()
}

/// Largest commutativity residual over `trials` random cubic fields
/// evaluated at random points of `[−1, 1]^n`.
pub fn check_commutativity(n: usize, trials: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..trials {
        let mut p = [0.0; 3];
        for v in p.iter_mut().take(n) {
            *v = rng.random_range(-1.0..1.0);
        }
        let x = Jet::point(p);
        let res = match n {
            2 => {
                let v = [eval_poly(&random_cubic(&mut rng, 2), &x), eval_poly(&random_cubic(&mut rng, 2), &x)];
                commutativity_residual_2d(v)
            }
            3 => {
                let mut w = [[Jet::constant(0.0); 3]; 3];
                for row in w.iter_mut() {
                    for e in row.iter_mut() {
                        *e = eval_poly(&random_cubic(&mut rng, 3), &x);
                    }
                }
                commutativity_residual_3d(&w)
            }
            _ => return Err(Error::Config(format!("dimension {n} unsupported"))),
        };
        worst = worst.max(res);
    }
    Ok(worst)
}

/// Smallest generalized eigenvalue of `B G⁻¹ Bᵀ x = λ H x` (both Grams
/// positive definite), computed densely.
fn min_pencil_eigenvalue(b: &DMatrix<f64>, g: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<f64> {
    let lg = g.clone().cholesky().ok_or_else(|| Error::LinearAlgebra("Gram matrix not positive definite".into()))?;
    let x = lg.l().solve_lower_triangular(&b.transpose()).ok_or_else(|| Error::LinearAlgebra("triangular solve".into()))?;
    let s = x.transpose() * x;
    let lh = h.clone().cholesky().ok_or_else(|| Error::LinearAlgebra("Gram matrix not positive definite".into()))?;
    let l = lh.l();
    let y = l.solve_lower_triangular(&s).ok_or_else(|| Error::LinearAlgebra("triangular solve".into()))?;
    let c = l.solve_lower_triangular(&y.transpose()).ok_or_else(|| Error::LinearAlgebra("triangular solve".into()))?;
    let c = (&c + c.transpose()) * 0.5;
    Ok(c.symmetric_eigenvalues().min())
}

/// Discrete (S2) constant: `inf_{(v,q)} sup_τ (⟨∇·τ, v⟩ + ⟨Skew τ, q⟩) / (‖τ‖_div ‖(v,q)‖)`.
pub fn infsup_constant(disc: &Discretization, exec: Exec) -> Result<f64> {
    let total = disc.dofs.total();
    if total > DENSE_PROBE_LIMIT {
        return Err(Error::TooLarge { size: total, limit: DENSE_PROBE_LIMIT });
    }
    let params = MaterialParams::new(Lambda::Finite(1.0), 1.0, disc.spaces.n)?;
    let sys = assemble(disc, &Problem::pure_dirichlet(params), exec)?;
    let grams = assemble_grams(disc, exec)?;
    let m = sys.n_u + sys.n_rot;
    let mut h = DMatrix::zeros(m, m);
    h.view_mut((0, 0), (sys.n_u, sys.n_u)).copy_from(&grams.u.to_dense());
    h.view_mut((sys.n_u, sys.n_u), (sys.n_rot, sys.n_rot)).copy_from(&grams.rot.to_dense());
    let lam = min_pencil_eigenvalue(&sys.b.to_dense(), &grams.sigma_hdiv.to_dense(), &h)?;
    Ok(lam.max(0.0).sqrt())
}

fn spaces_for(n: usize, p: usize, r: isize, n_el: usize, naive: bool) -> Result<ElasticitySpaces> {
    if naive {
        ElasticitySpaces::naive(n, p, r, n_el)
    } else {
        ElasticitySpaces::build(n, p, r, n_el)
    }
}

/// Inf-sup constants over a mesh sequence. Structured spaces pass when
/// `max/min ≤ 3`; naive spaces pass (i.e. show the expected degeneration)
/// when the last value is 10× below the first or under `1e−8`.
pub fn infsup_probe(geo: &MultiPatchGeometry, p: usize, r: isize, n_els: &[usize], naive: bool, exec: Exec) -> Result<ProbeResult> {
    let n = geo.dim();
    let mut values = Vec::new();
    for &k in n_els {
        let disc = Discretization::new(geo, spaces_for(n, p, r, k, naive)?, true)?;
        values.push(infsup_constant(&disc, exec)?);
    }
    let hs: Vec<f64> = n_els.iter().map(|&k| 1.0 / k as f64).collect();
    let pass = if values.is_empty() {
        false
    } else if naive {
        let (first, last) = (values[0], values[values.len() - 1]);
        last <= first / 10.0 || last < 1e-8
    } else {
        let max = values.iter().cloned().fold(f64::MIN, f64::max);
        let min = values.iter().cloned().fold(f64::MAX, f64::min);
        min > 0.0 && max / min <= 3.0
    };
    let label = if naive { "infsup_naive" } else { "infsup_structured" };
    Ok(ProbeResult { label: label.into(), hs, values, pass })
}

/// 2D Taylor–Hood type constant
/// `inf_q sup_{v ∈ R_h} ⟨∇·v, q⟩ / (‖v‖_H¹ ‖q‖)` with `R_h = (V^0(p, r))²`
/// and `q` in the rotation space.
pub fn taylor_hood_constant(geo: &MultiPatchGeometry, spaces: &ElasticitySpaces) -> Result<f64> {
    if spaces.n != 2 || geo.n_patches() != 1 {
        return Err(Error::Config("the Taylor-Hood probe is available for single-patch 2D problems".into()));
    }
    let aux: DiscreteSpace = spaces.aux_r()?;
    let na = aux.dim();
    let nq = spaces.rot.dim();
    if 2 * na + nq > DENSE_PROBE_LIMIT {
        return Err(Error::TooLarge { size: 2 * na + nq, limit: DENSE_PROBE_LIMIT });
    }
    let mesh = spaces.mesh();
    let rule = GaussRule::new(spaces.assembly_points());
    let mut g = DMatrix::zeros(2 * na, 2 * na);
    let mut h = DMatrix::zeros(nq, nq);
    let mut b = DMatrix::zeros(nq, 2 * na);
    for e in 0..mesh.n_elements() {
        let eg = ElementGeometry::new(&geo.patches[0], &mesh, e, &rule)?;
        let dx = eg.dx();
        let av = aux.eval_element(&eg);
        let qv = spaces.rot.eval_element(&eg);
        for q in 0..eg.n_qp() {
            for a in 0..av.nloc() {
                let (va, ga) = (av.value(q, a)[0], av.deriv(q, a));
                for c in 0..av.nloc() {
                    let (vc, gc) = (av.value(q, c)[0], av.deriv(q, c));
                    let m = dx[q] * (va * vc + ga[0] * gc[0] + ga[1] * gc[1]);
                    for comp in 0..2 {
                        g[(comp * na + av.dofs[a], comp * na + av.dofs[c])] += m;
                    }
                }
                for c in 0..qv.nloc() {
                    let w = dx[q] * qv.value(q, c)[0];
                    for comp in 0..2 {
                        b[(qv.dofs[c], comp * na + av.dofs[a])] += w * ga[comp];
                    }
                }
            }
            for a in 0..qv.nloc() {
                for c in 0..qv.nloc() {
                    h[(qv.dofs[a], qv.dofs[c])] += dx[q] * qv.value(q, a)[0] * qv.value(q, c)[0];
                }
            }
        }
    }
    Ok(min_pencil_eigenvalue(&b, &g, &h)?.max(0.0).sqrt())
}

/// Whether `I` lies in Σ_h according to the degree conditions: in 3D
/// `2q ≤ p + 1` and `r ≤ s`, in 2D `p ≥ q` and `s ≥ r`, where `q`, `s` are
/// the geometry degree and regularity (`s = None` for a single element).
pub fn identity_predicate(n: usize, q: usize, s: Option<isize>, p: usize, r: isize) -> bool {
    let smooth_enough = s.is_none_or(|s| s >= r);
    match n {
        3 => 2 * q <= p + 1 && smooth_enough,
        _ => p >= q && smooth_enough,
    }
}

/// L² fit of the identity in Σ_h: returns whether the residual is below
/// `1e−10`, together with the residual.
pub fn check_identity_in_sigma(geo: &MultiPatchGeometry, p: usize, r: isize, n_el: usize) -> Result<(bool, f64)> {
    let disc = Discretization::new(geo, ElasticitySpaces::build(geo.dim(), p, r, n_el)?, true)?;
    let (_, res) = project_constant_stress(&disc, &Matrix3::identity(), Exec::default())?;
    Ok((res <= 1e-10, res))
}

/// Maximum deviation over all consecutive de Rham pairs up to Σ → U.
pub fn check_subcomplex(spaces: &ElasticitySpaces, samples: usize, seed: u64) -> Result<f64> {
    if spaces.naive {
        return Err(Error::Config("naive spaces do not form a subcomplex".into()));
    }
    let n = spaces.n;
    let deg = if n == 2 { spaces.p } else { spaces.p + 1 };
    let mut chain: Vec<DiscreteSpace> = (0..n - 1)
        .map(|k| DiscreteSpace::de_rham(n, k, deg, spaces.r, spaces.n_el))
        .collect::<Result<_>>()?;
    chain.push(spaces.sigma_row.clone());
    chain.push(spaces.u.clone());
    let mut worst: f64 = 0.0;
    for (i, w) in chain.windows(2).enumerate() {
        worst = worst.max(exterior_derivative_check(&w[0], &w[1], samples, seed.wrapping_add(i as u64))?);
    }
    Ok(worst)
}

/// Largest jump of `σ_h ν` across patch interfaces, sampled on a
/// `samples^(n−1)` grid per interface.
pub fn interface_jump(disc: &Discretization, sol: &FieldSolution, samples: usize) -> Result<f64> {
    let n = disc.spaces.n;
    let mesh = disc.mesh();
    let mut worst: f64 = 0.0;
    let ts: Vec<f64> = (0..samples).map(|i| (i as f64 + 0.5) / samples as f64).collect();
    for itf in &disc.geo.interfaces {
        let count = samples.pow((n - 1) as u32);
        for k in 0..count {
            let t = [ts[k % samples], ts[(k / samples) % samples]];
            let za = face_point(n, itf.face_a, &t[..n - 1]);
            let zb = face_point(n, itf.face_b, &t[..n - 1]);
            let ga = &disc.geo.patches[itf.patch_a];
            let gb = &disc.geo.patches[itf.patch_b];
            let ea = ElementGeometry::at_point(ga, &mesh, &za[..n])?;
            let eb = ElementGeometry::at_point(gb, &mesh, &zb[..n])?;
            let fa = element_fields(disc, sol, itf.patch_a, &ea)[0];
            let fb = element_fields(disc, sol, itf.patch_b, &eb)[0];
            let mut nh = Vector3::zeros();
            nh[itf.face_a.dir] = itf.face_a.outward_sign();
            let nu = (ea.jac[0].cofactor() * nh).normalize();
            let jump = (fa.sigma - fb.sigma) * nu;
            worst = worst.max(jump.amax());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::catalog;

    #[test]
    fn commutativity_examples() {
        let x = Jet::point([0.7, -0.3, 0.0]);
        let v = [x[0] * x[0], x[0] * x[1]];
        assert_eq!(commutativity_residual_2d(v), 0.0);
        let w = [
            [Jet::constant(1.0), Jet::constant(0.0), Jet::constant(0.0)],
            [Jet::constant(0.0), Jet::constant(1.0), Jet::constant(0.0)],
            [Jet::constant(0.0), Jet::constant(0.0), Jet::constant(1.0)],
        ];
        assert_eq!(commutativity_residual_3d(&w), 0.0);
        assert!(check_commutativity(2, 100, 1).unwrap() <= 1e-12);
        assert!(check_commutativity(3, 100, 2).unwrap() <= 1e-12);
    }

    #[test]
    fn identity_predicates() {
        assert!(identity_predicate(2, 1, None, 2, 0));
        assert!(identity_predicate(3, 1, None, 2, 0));
        assert!(!identity_predicate(3, 2, None, 2, 0));
        let sq = catalog("unit_square").unwrap();
        assert!(check_identity_in_sigma(&sq, 2, 0, 2).unwrap().0);
        let ds = catalog("deformed_square").unwrap();
        assert!(check_identity_in_sigma(&ds, 2, 0, 2).unwrap().0);
    }

    #[test]
    fn single_element_infsup_is_positive() {
        let geo = catalog("unit_square").unwrap();
        let disc = Discretization::new(&geo, ElasticitySpaces::build(2, 2, 0, 1).unwrap(), true).unwrap();
        assert!(infsup_constant(&disc, Exec::Sequential).unwrap() > 0.0);
        let sp = ElasticitySpaces::build(2, 2, 0, 2).unwrap();
        assert!(taylor_hood_constant(&geo, &sp).unwrap() > 0.0);
    }

    #[test]
    fn subcomplex_residuals_are_small() {
        for (n, p) in [(2, 2), (2, 3), (3, 2)] {
            let sp = ElasticitySpaces::build(n, p, 0, 2).unwrap();
            assert!(check_subcomplex(&sp, 20, 5).unwrap() <= 1e-12);
        }
    }
}
