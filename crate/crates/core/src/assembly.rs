//! Assembly of the discrete saddle-point system
//!
//! ```text
//! ⟨Aσ, τ⟩ + ⟨u, ∇·τ⟩ + ⟨p, Skew τ⟩ = ⟨u_D, τν⟩_{Γ_D}
//! ⟨∇·σ, v⟩                         = ⟨f, v⟩
//! ⟨Skew σ, q⟩                      = 0
//! ```
//!
//! All integrals run over the parametric elements with the physical measure
//! `det J dζ`; basis values come already pushed forward from [`derham`].
//! Traction faces are handled strongly: their normal-trace coefficients are
//! fixed to a face-wise L² projection of the prescribed traction.
//!
//! [`derham`]: crate::derham

use std::collections::BTreeMap;

use nalgebra::{DMatrix, Vector3};

use crate::derham::{couple_multipatch, levi_civita, DofMap, ElasticitySpaces, ElementGeometry, ElementValues};
use crate::error::{Error, Result};
use crate::geometry::{face_point, Face, Mesh, MultiPatchGeometry};
use crate::operators::MaterialParams;
use crate::par::Exec;
use crate::quadrature::GaussRule;
use crate::sparse::{CsrMatrix, Triplets};

pub type VectorField<'a> = &'a (dyn Fn([f64; 3]) -> [f64; 3] + Sync);
/// Traction as a function of the physical point and the outward unit normal.
pub type TractionField<'a> = &'a (dyn Fn([f64; 3], [f64; 3]) -> [f64; 3] + Sync);

/// Data of a boundary value problem. Boundary faces not listed as traction
/// faces carry Dirichlet data `u_D` (zero when absent).
#[derive(Clone)]
pub struct Problem<'a> {
    pub params: MaterialParams,
    pub load: Option<VectorField<'a>>,
    pub u_d: Option<VectorField<'a>>,
    pub traction_faces: Vec<(usize, Face)>,
    pub traction: Option<TractionField<'a>>,
}

impl<'a> Problem<'a> {
    pub fn pure_dirichlet(params: MaterialParams) -> Self {
        Problem { params, load: None, u_d: None, traction_faces: Vec::new(), traction: None }
    }
}

/// Geometry, spaces and global numbering.
#[derive(Debug, Clone)]
pub struct Discretization<'g> {
    pub geo: &'g MultiPatchGeometry,
    pub spaces: ElasticitySpaces,
    pub dofs: DofMap,
}

impl<'g> Discretization<'g> {
    pub fn new(geo: &'g MultiPatchGeometry, spaces: ElasticitySpaces, couple_rotations: bool) -> Result<Self> {
        if geo.dim() != spaces.n {
            return Err(Error::Config(format!(
                "geometry is {}D but spaces are {}D",
                geo.dim(),
                spaces.n
            )));
        }
        let dofs = if geo.n_patches() == 1 {
            DofMap::single_patch(&spaces)
        } else {
            couple_multipatch(&spaces, geo, couple_rotations)?
        };
        Ok(Discretization { geo, spaces, dofs })
    }

    pub fn mesh(&self) -> Mesh {
        self.spaces.mesh()
    }

    pub fn n_elements(&self) -> usize {
        self.geo.n_patches() * self.mesh().n_elements()
    }

    /// Patch and element of a flat element index.
    pub fn element(&self, k: usize) -> (usize, usize) {
        let ne = self.mesh().n_elements();
        (k / ne, k % ne)
    }

    /// Global Σ index and sign of row `r`, row-space function `i` on `patch`.
    pub fn sigma_dof(&self, patch: usize, r: usize, i: usize) -> (usize, f64) {
        self.dofs.sigma.map[patch][r * self.spaces.sigma_row.dim() + i]
    }

    pub fn u_dof(&self, patch: usize, r: usize, i: usize) -> (usize, f64) {
        self.dofs.u.map[patch][r * self.spaces.u.dim() + i]
    }

    pub fn rot_dof(&self, patch: usize, k: usize, i: usize) -> (usize, f64) {
        self.dofs.rot.map[patch][k * self.spaces.rot.dim() + i]
    }

    /// Evaluated basis values of all three fields on an element.
    pub fn eval_fields(&self, eg: &ElementGeometry) -> (ElementValues, ElementValues, ElementValues) {
        (
            self.spaces.sigma_row.eval_element(eg),
            self.spaces.u.eval_element(eg),
            self.spaces.rot.eval_element(eg),
        )
    }

    pub fn dirichlet_faces(&self, traction: &[(usize, Face)]) -> Vec<(usize, Face)> {
        self.geo
            .boundary_faces()
            .into_iter()
            .filter(|f| !traction.contains(f))
            .collect()
    }
}

/// `Skew` of the matrix whose row `r` is `v` and whose other rows vanish.
pub fn skew_of_row(n: usize, r: usize, v: [f64; 3], k: usize) -> f64 {
    if n == 2 {
        match r {
            0 => -v[1],
            _ => v[0],
        }
    } else {
        (0..3).map(|c| levi_civita(k, c, r) * v[c]).sum()
    }
}

/// The assembled saddle-point system.
#[derive(Debug, Clone)]
pub struct MixedSystem {
    pub params: MaterialParams,
    pub a: CsrMatrix,
    /// `[B1; B2]`: rows are the U unknowns followed by the rotation unknowns.
    pub b: CsrMatrix,
    pub bt: CsrMatrix,
    pub g_sigma: Vec<f64>,
    pub g_u: Vec<f64>,
    /// Prescribed Σ coefficients (traction faces), sorted by index.
    pub fixed: Vec<(usize, f64)>,
    /// `∫ tr τ_j` for every Σ basis function.
    pub trace_row: Vec<f64>,
    /// `⟨u_D, I ν⟩` over the Dirichlet boundary.
    pub g_identity: f64,
    pub n_sigma: usize,
    pub n_u: usize,
    pub n_rot: usize,
}

impl MixedSystem {
    pub fn size(&self) -> usize {
        self.n_sigma + self.n_u + self.n_rot
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mut r = self.g_sigma.clone();
        r.extend_from_slice(&self.g_u);
        r.extend(std::iter::repeat_n(0.0, self.n_rot));
        r
    }

    pub fn b1(&self) -> CsrMatrix {
        let rows: Vec<usize> = (0..self.n_u).collect();
        let cols: Vec<usize> = (0..self.n_sigma).collect();
        self.b.submatrix(&rows, &cols)
    }

    pub fn b2(&self) -> CsrMatrix {
        let rows: Vec<usize> = (self.n_u..self.n_u + self.n_rot).collect();
        let cols: Vec<usize> = (0..self.n_sigma).collect();
        self.b.submatrix(&rows, &cols)
    }

    /// `[[A, Bᵀ], [B, 0]]` with no boundary elimination.
    pub fn full_matrix(&self) -> CsrMatrix {
        let n = self.size();
        CsrMatrix::from_blocks(n, n, &[(&self.a, 0, 0), (&self.bt, 0, self.n_sigma), (&self.b, self.n_sigma, 0)])
    }

    /// Mask of unknowns that are not prescribed.
    pub fn free_mask(&self) -> Vec<bool> {
        let mut m = vec![true; self.size()];
        for &(i, _) in &self.fixed {
            m[i] = false;
        }
        m
    }

    /// Number of unknowns after eliminating prescribed coefficients.
    pub fn n_free(&self) -> usize {
        self.size() - self.fixed.len()
    }
}

struct ElementOutput {
    a: Vec<(u32, u32, f64)>,
    b: Vec<(u32, u32, f64)>,
    g_u: Vec<(usize, f64)>,
    trace: Vec<(usize, f64)>,
}

const CHUNK: usize = 64;

fn element_system(
    disc: &Discretization,
    k: usize,
    rule: &GaussRule,
    params: &MaterialParams,
    load: Option<VectorField>,
) -> Result<ElementOutput> {
    let (patch, e) = disc.element(k);
    let geo = &disc.geo.patches[patch];
    let n = disc.spaces.n;
    let eg = ElementGeometry::new(geo, &disc.mesh(), e, rule)?;
    let dx = eg.dx();
    let (sv, uv, rv) = disc.eval_fields(&eg);
    let l = sv.nloc();
    let nq = eg.n_qp();
    // P[(i*n + k) * l*l + a*l + b] = ∫ φa_i φb_k
    let mut p = vec![0.0; n * n * l * l];
    let mut wa = vec![[0.0; 3]; l];
    for q in 0..nq {
        for a in 0..l {
            let v = sv.value(q, a);
            wa[a] = [v[0] * dx[q], v[1] * dx[q], v[2] * dx[q]];
        }
        for i in 0..n {
            for kk in 0..n {
                let blk = &mut p[(i * n + kk) * l * l..(i * n + kk + 1) * l * l];
                for a in 0..l {
                    let wai = wa[a][i];
                    if wai == 0.0 {
                        continue;
                    }
                    let row = &mut blk[a * l..(a + 1) * l];
                    for (b, rb) in row.iter_mut().enumerate() {
                        *rb += wai * sv.val[q * l + b][kk];
                    }
                }
            }
        }
    }
    let inv2mu = 1.0 / (2.0 * params.mu);
    let ctr = params.trace_coefficient();
    let mut out = ElementOutput { a: Vec::with_capacity(n * n * l * l), b: Vec::new(), g_u: Vec::new(), trace: Vec::new() };
    for ra in 0..n {
        for rb in 0..n {
            if ra != rb && ctr == 0.0 {
                continue;
            }
            let cross = &p[(ra * n + rb) * l * l..(ra * n + rb + 1) * l * l];
            for a in 0..l {
                let (ga, sa) = disc.sigma_dof(patch, ra, sv.dofs[a]);
                for b in 0..l {
                    let (gb, sb) = disc.sigma_dof(patch, rb, sv.dofs[b]);
                    let mut v = -ctr * cross[a * l + b];
                    if ra == rb {
                        v += (0..n).map(|i| p[(i * n + i) * l * l + a * l + b]).sum::<f64>();
                    }
                    v *= inv2mu * sa * sb;
                    if v != 0.0 {
                        out.a.push((ga as u32, gb as u32, v));
                    }
                }
            }
        }
    }
    // B1: ⟨∇·τ, v⟩ and B2: ⟨Skew τ, q⟩
    let lu = uv.nloc();
    let lr = rv.nloc();
    let n_u = disc.dofs.u.n_global;
    for r in 0..n {
        for a in 0..l {
            let (ga, sa) = disc.sigma_dof(patch, r, sv.dofs[a]);
            let mut bu = vec![0.0; lu];
            let mut br = vec![0.0; lr * disc.spaces.n_rot];
            let mut tr = 0.0;
            for q in 0..nq {
                let div = sv.deriv(q, a)[0] * dx[q];
                let val = sv.value(q, a);
                tr += val[r] * dx[q];
                for (c, bc) in bu.iter_mut().enumerate() {
                    *bc += div * uv.value(q, c)[0];
                }
                for kk in 0..disc.spaces.n_rot {
                    let s = skew_of_row(n, r, val, kk) * dx[q];
                    if s != 0.0 {
                        for c in 0..lr {
                            br[kk * lr + c] += s * rv.value(q, c)[0];
                        }
                    }
                }
            }
            out.trace.push((ga, sa * tr));
            for (c, &v) in bu.iter().enumerate() {
                let (gu, su) = disc.u_dof(patch, r, uv.dofs[c]);
                if v != 0.0 {
                    out.b.push((gu as u32, ga as u32, v * sa * su));
                }
            }
            for kk in 0..disc.spaces.n_rot {
                for c in 0..lr {
                    let v = br[kk * lr + c];
                    if v != 0.0 {
                        let (gr, sr) = disc.rot_dof(patch, kk, rv.dofs[c]);
                        out.b.push(((n_u + gr) as u32, ga as u32, v * sa * sr));
                    }
                }
            }
        }
    }
    if let Some(f) = load {
        for q in 0..nq {
            let fx = f(eg.jac[q].x);
            for r in 0..n {
                let w = fx[r] * dx[q];
                for c in 0..lu {
                    let (gu, su) = disc.u_dof(patch, r, uv.dofs[c]);
                    out.g_u.push((gu, su * w * uv.value(q, c)[0]));
                }
            }
        }
    }
    Ok(out)
}

/// Assembles the mixed system for structured or naive spaces alike.
pub fn assemble(disc: &Discretization, problem: &Problem, exec: Exec) -> Result<MixedSystem> {
    let rule = GaussRule::new(disc.spaces.assembly_points());
    let ns = disc.dofs.sigma.n_global;
    let nu = disc.dofs.u.n_global;
    let nr = disc.dofs.rot.n_global;
    let mut ta = Triplets::new();
    let mut tb = Triplets::new();
    let mut g_u = vec![0.0; nu];
    let mut trace_row = vec![0.0; ns];
    let total = disc.n_elements();
    let mut start = 0;
    while start < total {
        let end = (start + CHUNK).min(total);
        let outs = exec.map_range(end - start, |i| element_system(disc, start + i, &rule, &problem.params, problem.load));
        for o in outs {
            let o = o?;
            ta.entries.extend(o.a);
            tb.entries.extend(o.b);
            for (i, v) in o.g_u {
                g_u[i] += v;
            }
            for (i, v) in o.trace {
                trace_row[i] += v;
            }
        }
        start = end;
    }
    let a = CsrMatrix::from_triplets(ns, ns, ta);
    let b = CsrMatrix::from_triplets(nu + nr, ns, tb);
    let bt = b.transpose();
    let dirichlet = disc.dirichlet_faces(&problem.traction_faces);
    let (g_sigma, g_identity) = assemble_boundary_term(disc, problem.u_d, &dirichlet)?;
    let fixed = traction_values(disc, &problem.traction_faces, problem.traction)?;
    Ok(MixedSystem {
        params: problem.params,
        a,
        b,
        bt,
        g_sigma,
        g_u,
        fixed,
        trace_row,
        g_identity,
        n_sigma: ns,
        n_u: nu,
        n_rot: nr,
    })
}

/// Same as [`assemble`]; kept as a separate entry point for the equal-order
/// spaces used by the instability demonstration.
pub fn assemble_naive(disc: &Discretization, problem: &Problem, exec: Exec) -> Result<MixedSystem> {
    if !disc.spaces.naive {
        return Err(Error::Config("assemble_naive expects equal-order spaces".into()));
    }
    assemble(disc, problem, exec)
}

/// Elements of the patch mesh touching a face.
pub fn face_elements(mesh: &Mesh, face: Face) -> Vec<usize> {
    (0..mesh.n_elements())
        .filter(|&e| {
            let m = mesh.element_index(e);
            m[face.dir] == if face.side == 0 { 0 } else { mesh.n_el - 1 }
        })
        .collect()
}

/// `g_i = ⟨u_D, τ_i ν⟩` over the given faces, and `⟨u_D, I ν⟩`.
pub fn assemble_boundary_term(
    disc: &Discretization,
    u_d: Option<VectorField>,
    faces: &[(usize, Face)],
) -> Result<(Vec<f64>, f64)> {
    let mut g = vec![0.0; disc.dofs.sigma.n_global];
    let mut gi = 0.0;
    let Some(u_d) = u_d else {
        return Ok((g, gi));
    };
    let n = disc.spaces.n;
    let mesh = disc.mesh();
    let rule = GaussRule::new(disc.spaces.assembly_points() + 1);
    for &(patch, face) in faces {
        let geo = &disc.geo.patches[patch];
        for e in face_elements(&mesh, face) {
            let eg = ElementGeometry::on_face(geo, &mesh, e, face, &rule)?;
            let sv = disc.spaces.sigma_row.eval_element(&eg);
            for q in 0..eg.n_qp() {
                let jp = &eg.jac[q];
                let mut nh = Vector3::zeros();
                nh[face.dir] = face.outward_sign();
                let nds = jp.cofactor() * nh * eg.w[q];
                let ud = u_d(jp.x);
                gi += (0..n).map(|r| ud[r] * nds[r]).sum::<f64>();
                for a in 0..sv.nloc() {
                    let v = sv.value(q, a);
                    let flux: f64 = (0..n).map(|c| v[c] * nds[c]).sum();
                    if flux == 0.0 {
                        continue;
                    }
                    for r in 0..n {
                        let (gidx, s) = disc.sigma_dof(patch, r, sv.dofs[a]);
                        g[gidx] += s * ud[r] * flux;
                    }
                }
            }
        }
    }
    Ok((g, gi))
}

/// Coefficients of the normal-trace DOFs on traction faces: per row and face,
/// the parametric L² projection of `± t_r |cof(J) ν̂|` onto the face space.
pub fn traction_values(
    disc: &Discretization,
    faces: &[(usize, Face)],
    traction: Option<TractionField>,
) -> Result<Vec<(usize, f64)>> {
    let n = disc.spaces.n;
    let row = &disc.spaces.sigma_row;
    let mut fixed: BTreeMap<usize, f64> = BTreeMap::new();
    if faces.is_empty() {
        return Ok(Vec::new());
    }
    if disc.spaces.naive {
        return Err(Error::Config("traction faces need div-conforming stress spaces".into()));
    }
    let boundary = disc.geo.boundary_faces();
    for &(patch, face) in faces {
        if !boundary.contains(&(patch, face)) {
            return Err(Error::Config(format!("traction face {face:?} of patch {patch} is not on the boundary")));
        }
        let dofs = row.normal_dofs(face)?;
        let tspace = row.normal_trace_space(face)?;
        let nt = tspace.dim();
        let mut coeffs = vec![vec![0.0; nt]; n];
        if let Some(t) = traction {
            let geo = &disc.geo.patches[patch];
            let mut mass = DMatrix::zeros(nt, nt);
            let mut rhs = DMatrix::zeros(nt, n);
            let rule = GaussRule::new(tspace.degrees().into_iter().max().unwrap_or(0) + 4);
            let nel = disc.spaces.n_el;
            let n_face_el = nel.pow((n - 1) as u32);
            for fe in 0..n_face_el {
                let mut lo = [0.0; 2];
                let mut hi = [0.0; 2];
                let mut rem = fe;
                for d in 0..n - 1 {
                    let k = rem % nel;
                    rem /= nel;
                    lo[d] = k as f64 / nel as f64;
                    hi[d] = (k + 1) as f64 / nel as f64;
                }
                let pts: Vec<(Vec<f64>, Vec<f64>)> = (0..n - 1).map(|d| rule.on_interval(lo[d], hi[d])).collect();
                let counts: Vec<usize> = pts.iter().map(|p| p.0.len()).collect();
                let total: usize = counts.iter().product();
                for qi in 0..total {
                    let mut rem = qi;
                    let mut tpt = [0.0; 2];
                    let mut w = 1.0;
                    for d in 0..n - 1 {
                        let k = rem % counts[d];
                        rem /= counts[d];
                        tpt[d] = pts[d].0[k];
                        w *= pts[d].1[k];
                    }
                    let z = face_point(n, face, &tpt);
                    let jp = geo.jacobian_pack(&z[..n])?;
                    let mut nh = Vector3::zeros();
                    nh[face.dir] = face.outward_sign();
                    let nds = jp.cofactor() * nh;
                    let area = nds.norm();
                    let nu = nds / area;
                    let tv = t(jp.x, [nu[0], nu[1], nu[2]]);
                    let basis = tspace.eval_basis(&tpt[..n - 1])?;
                    for &(i, bi) in &basis {
                        for &(j, bj) in &basis {
                            mass[(i, j)] += w * bi * bj;
                        }
                        for r in 0..n {
                            rhs[(i, r)] += w * bi * face.outward_sign() * tv[r] * area;
                        }
                    }
                }
            }
            let sol = mass
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::LinearAlgebra("singular face mass matrix".into()))?;
            for (r, cr) in coeffs.iter_mut().enumerate() {
                for (i, c) in cr.iter_mut().enumerate() {
                    *c = sol[(i, r)];
                }
            }
        }
        for (r, cr) in coeffs.iter().enumerate() {
            for (k, &i) in dofs.iter().enumerate() {
                let (gidx, s) = disc.sigma_dof(patch, r, i);
                fixed.insert(gidx, s * cr[k]);
            }
        }
    }
    Ok(fixed.into_iter().collect())
}

/// Gram matrices used by the inf-sup probe and by projections.
#[derive(Debug, Clone)]
pub struct Grams {
    /// `∫ σ:τ + ∇·σ·∇·τ`.
    pub sigma_hdiv: CsrMatrix,
    pub sigma_l2: CsrMatrix,
    pub u: CsrMatrix,
    pub rot: CsrMatrix,
}

pub fn assemble_grams(disc: &Discretization, exec: Exec) -> Result<Grams> {
    let rule = GaussRule::new(disc.spaces.assembly_points());
    let n = disc.spaces.n;
    let outs = exec.map_range(disc.n_elements(), |k| -> Result<[Vec<(u32, u32, f64)>; 4]> {
        let (patch, e) = disc.element(k);
        let eg = ElementGeometry::new(&disc.geo.patches[patch], &disc.mesh(), e, &rule)?;
        let dx = eg.dx();
        let (sv, uv, rv) = disc.eval_fields(&eg);
        let mut hd = Vec::new();
        let mut l2 = Vec::new();
        let mut mu = Vec::new();
        let mut mr = Vec::new();
        for a in 0..sv.nloc() {
            for b in 0..sv.nloc() {
                let mut m = 0.0;
                let mut d = 0.0;
                for q in 0..eg.n_qp() {
                    let (va, vb) = (sv.value(q, a), sv.value(q, b));
                    m += dx[q] * (0..n).map(|c| va[c] * vb[c]).sum::<f64>();
                    d += dx[q] * sv.deriv(q, a)[0] * sv.deriv(q, b)[0];
                }
                for r in 0..n {
                    let (ga, sa) = disc.sigma_dof(patch, r, sv.dofs[a]);
                    let (gb, sb) = disc.sigma_dof(patch, r, sv.dofs[b]);
                    hd.push((ga as u32, gb as u32, sa * sb * (m + d)));
                    l2.push((ga as u32, gb as u32, sa * sb * m));
                }
            }
        }
        let scalar_mass = |ev: &ElementValues| -> Vec<f64> {
            let l = ev.nloc();
            let mut m = vec![0.0; l * l];
            for q in 0..ev.n_qp {
                for a in 0..l {
                    for b in 0..l {
                        m[a * l + b] += dx[q] * ev.value(q, a)[0] * ev.value(q, b)[0];
                    }
                }
            }
            m
        };
        let m = scalar_mass(&uv);
        let l = uv.nloc();
        for r in 0..n {
            for a in 0..l {
                for b in 0..l {
                    let (ga, sa) = disc.u_dof(patch, r, uv.dofs[a]);
                    let (gb, sb) = disc.u_dof(patch, r, uv.dofs[b]);
                    mu.push((ga as u32, gb as u32, sa * sb * m[a * l + b]));
                }
            }
        }
        let m = scalar_mass(&rv);
        let l = rv.nloc();
        for k in 0..disc.spaces.n_rot {
            for a in 0..l {
                for b in 0..l {
                    let (ga, sa) = disc.rot_dof(patch, k, rv.dofs[a]);
                    let (gb, sb) = disc.rot_dof(patch, k, rv.dofs[b]);
                    mr.push((ga as u32, gb as u32, sa * sb * m[a * l + b]));
                }
            }
        }
        Ok([hd, l2, mu, mr])
    });
    let mut t: [Triplets; 4] = Default::default();
    for o in outs {
        for (k, v) in o?.into_iter().enumerate() {
            t[k].entries.extend(v);
        }
    }
    let [hd, l2, mu, mr] = t;
    let ns = disc.dofs.sigma.n_global;
    Ok(Grams {
        sigma_hdiv: CsrMatrix::from_triplets(ns, ns, hd),
        sigma_l2: CsrMatrix::from_triplets(ns, ns, l2),
        u: CsrMatrix::from_triplets(disc.dofs.u.n_global, disc.dofs.u.n_global, mu),
        rot: CsrMatrix::from_triplets(disc.dofs.rot.n_global, disc.dofs.rot.n_global, mr),
    })
}

/// L² projection of a constant matrix field onto Σ_h, returned with the
/// L² norm of the projection residual.
pub fn project_constant_stress(disc: &Discretization, m: &nalgebra::Matrix3<f64>, exec: Exec) -> Result<(Vec<f64>, f64)> {
    let grams = assemble_grams(disc, exec)?;
    let n = disc.spaces.n;
    let rule = GaussRule::new(disc.spaces.assembly_points());
    let ns = disc.dofs.sigma.n_global;
    let mut rhs = vec![0.0; ns];
    for k in 0..disc.n_elements() {
        let (patch, e) = disc.element(k);
        let eg = ElementGeometry::new(&disc.geo.patches[patch], &disc.mesh(), e, &rule)?;
        let dx = eg.dx();
        let sv = disc.spaces.sigma_row.eval_element(&eg);
        for q in 0..eg.n_qp() {
            for a in 0..sv.nloc() {
                let v = sv.value(q, a);
                for r in 0..n {
                    let (g, s) = disc.sigma_dof(patch, r, sv.dofs[a]);
                    rhs[g] += s * dx[q] * (0..n).map(|c| m[(r, c)] * v[c]).sum::<f64>();
                }
            }
        }
    }
    let x = crate::solver::sparse_lu_solve(&grams.sigma_l2, &rhs)?;
    // residual by quadrature
    let erule = GaussRule::new(disc.spaces.error_points());
    let mut res = 0.0;
    for k in 0..disc.n_elements() {
        let (patch, e) = disc.element(k);
        let eg = ElementGeometry::new(&disc.geo.patches[patch], &disc.mesh(), e, &erule)?;
        let dx = eg.dx();
        let sv = disc.spaces.sigma_row.eval_element(&eg);
        for q in 0..eg.n_qp() {
            let mut s: nalgebra::Matrix3<f64> = nalgebra::Matrix3::zeros();
            for a in 0..sv.nloc() {
                let v = sv.value(q, a);
                for r in 0..n {
                    let (g, sg) = disc.sigma_dof(patch, r, sv.dofs[a]);
                    for c in 0..n {
                        s[(r, c)] += sg * x[g] * v[c];
                    }
                }
            }
            let mut d: f64 = 0.0;
            for r in 0..n {
                for c in 0..n {
                    d += (s[(r, c)] - m[(r, c)]).powi(2);
                }
            }
            res += d * dx[q];
        }
    }
    Ok((x, res.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{catalog, MultiPatchGeometry};
    use crate::operators::Lambda;

    fn disc2(geo: &MultiPatchGeometry, p: usize, n_el: usize) -> Discretization<'_> {
        Discretization::new(geo, ElasticitySpaces::build(2, p, 0, n_el).unwrap(), true).unwrap()
    }

    #[test]
    fn system_size_and_symmetry() {
        let geo = catalog("deformed_square").unwrap();
        let d = disc2(&geo, 2, 2);
        let params = MaterialParams::new(Lambda::Finite(2.0), 1.0, 2).unwrap();
        let sys = assemble(&d, &Problem::pure_dirichlet(params), Exec::Sequential).unwrap();
        assert_eq!(sys.size(), 121);
        let m = sys.full_matrix();
        assert!(m.symmetry_defect() <= 1e-13 * m.max_abs());
        assert!(sys.g_sigma.iter().all(|&v| v == 0.0));
        let par = assemble(&d, &Problem::pure_dirichlet(params), Exec::Parallel).unwrap();
        assert_eq!(par.a, sys.a);
        assert_eq!(par.b, sys.b);
    }

    #[test]
    fn a_block_is_positive_definite_for_finite_lambda() {
        let geo = catalog("cook").unwrap();
        let d = disc2(&geo, 2, 1);
        let params = MaterialParams::new(Lambda::Finite(5.0), 0.375, 2).unwrap();
        let sys = assemble(&d, &Problem::pure_dirichlet(params), Exec::Sequential).unwrap();
        let e = sys.a.to_dense().symmetric_eigenvalues();
        assert!(e.min() > 0.0);
        let inc = MaterialParams::new(Lambda::Infinite, 0.375, 2).unwrap();
        let sys = assemble(&d, &Problem::pure_dirichlet(inc), Exec::Sequential).unwrap();
        let e = sys.a.to_dense().symmetric_eigenvalues();
        assert!(e.min() > -1e-12 * e.max());
    }

    #[test]
    fn boundary_term_against_simpson() {
        let geo = catalog("unit_square").unwrap();
        let d = disc2(&geo, 2, 2);
        let ud = |_: [f64; 3]| [1.0, 0.0, 0.0];
        let face = Face::new(0, 1);
        let (g, gi) = assemble_boundary_term(&d, Some(&ud), &[(0, face)]).unwrap();
        assert!((gi - 1.0).abs() < 1e-14);
        // row 0, component 0 functions on x = 1: B_4(1) B_j(y); oracle ∫ B_j dy
        let sp = d.spaces.sigma_row.comps()[0].dir(1).clone();
        let simpson = |j: usize| {
            let m = 50;
            let h = 1.0 / m as f64;
            let f = |y: f64| sp.eval_basis(y).unwrap().into_iter().find(|e| e.0 == j).map_or(0.0, |e| e.1);
            // composite Simpson per element (integrand is piecewise linear)
            (0..m).map(|k| {
                let a = k as f64 * h;
                let eps = 1e-13;
                h / 6.0 * (f(a + eps) + 4.0 * f(a + h / 2.0) + f(a + h - eps))
            }).sum::<f64>()
        };
        let dofs = d.spaces.sigma_row.normal_dofs(face).unwrap();
        for (j, &i) in dofs.iter().enumerate() {
            assert!((g[i] - simpson(j)).abs() < 1e-10);
            assert_eq!(g[d.spaces.sigma_row.dim() + i], 0.0);
        }
        let touched = g.iter().filter(|v| **v != 0.0).count();
        assert_eq!(touched, dofs.len());
        let (z, _) = assemble_boundary_term(&d, None, &[(0, face)]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn divergence_block_matches_expansion_in_u() {
        // ⟨∇·τ_i, v_j⟩ assembled directly equals the expansion of ∇·τ_i in U_h
        // times the U mass matrix.
        let geo = catalog("deformed_square").unwrap();
        let d = disc2(&geo, 3, 2);
        let params = MaterialParams::new(Lambda::Finite(1.0), 1.0, 2).unwrap();
        let sys = assemble(&d, &Problem::pure_dirichlet(params), Exec::Sequential).unwrap();
        let grams = assemble_grams(&d, Exec::Sequential).unwrap();
        let b1 = sys.b1().to_dense();
        let mu = grams.u.to_dense();
        // parametric divergence map: component c, multi m -> D along c
        let row = &d.spaces.sigma_row;
        let udim = d.spaces.u.dim();
        let mut expand = DMatrix::zeros(d.spaces.u_dim(), d.spaces.sigma_dim());
        for c in 0..2 {
            let comp = &row.comps()[c];
            let (_, map) = comp.dir(c).derivative_space().unwrap();
            let target = &d.spaces.u.comps()[0];
            for idx in 0..comp.dim() {
                let m = comp.multi_index(idx);
                for k in 0..map.nrows() {
                    let v = map[(k, m[c])];
                    if v != 0.0 {
                        let mut mt = m;
                        mt[c] = k;
                        for r in 0..2 {
                            expand[(r * udim + target.index(&mt[..2]), r * row.dim() + row.comp_offset(c) + idx)] += v;
                        }
                    }
                }
            }
        }
        let via = &mu * &expand;
        assert!((via - b1).amax() <= 1e-11);
    }

    #[test]
    fn traction_projection_reproduces_constant_flux() {
        let geo = catalog("unit_square").unwrap();
        let d = disc2(&geo, 2, 2);
        let t = |_: [f64; 3], _: [f64; 3]| [0.0, 0.25, 0.0];
        let faces = [(0, Face::new(0, 1))];
        let fixed = traction_values(&d, &faces, Some(&t)).unwrap();
        assert_eq!(fixed.len(), 8);
        for &(i, v) in &fixed {
            let expect = if i >= d.spaces.sigma_row.dim() { 0.25 } else { 0.0 };
            assert!((v - expect).abs() < 1e-13, "{i} {v}");
        }
        let zero = traction_values(&d, &faces, None).unwrap();
        assert!(zero.iter().all(|e| e.1 == 0.0));
    }

    #[test]
    fn identity_projection() {
        let geo = catalog("deformed_square").unwrap();
        let d = disc2(&geo, 2, 2);
        let (_, res) = project_constant_stress(&d, &nalgebra::Matrix3::identity(), Exec::Sequential).unwrap();
        assert!(res < 1e-10);
    }
}
