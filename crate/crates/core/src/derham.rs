//! Discrete de Rham spaces on mapped patches and the elasticity spaces built
//! from them.
//!
//! A [`DiscreteSpace`] stores parametric tensor spline spaces per component
//! and a pullback kind. Physical basis values are produced element-wise by
//! [`DiscreteSpace::eval_element`]; the pullbacks are applied pointwise from
//! the geometry's [`JacobianPack`].

use std::collections::BTreeSet;

use nalgebra::{DMatrix, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Face, GeometryMap, JacobianPack, Mesh, MultiPatchGeometry};
use crate::quadrature::GaussRule;
use crate::splines::TensorSplineSpace;

/// How parametric fields are pushed to the physical domain.
///
/// `Componentwise` composes every component with `F⁻¹` without any Piola
/// factor; it realizes the naive equal-order spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PullbackKind {
    Y0,
    Y1,
    Y2,
    Y3,
    Componentwise,
}

/// Quadrature points of one element, with the mapped geometry.
#[derive(Debug, Clone)]
pub struct ElementGeometry {
    pub elem: [usize; 3],
    pub dirs: Vec<Vec<f64>>,
    /// Parametric points, first direction fastest.
    pub z: Vec<[f64; 3]>,
    /// Parametric weights.
    pub w: Vec<f64>,
    pub jac: Vec<JacobianPack>,
}

impl ElementGeometry {
    pub fn new(geo: &GeometryMap, mesh: &Mesh, e: usize, rule: &GaussRule) -> Result<Self> {
        let (lo, hi) = mesh.element_bounds(e);
        let mut dirs = Vec::new();
        let mut wdirs = Vec::new();
        for d in 0..mesh.dim {
            let (p, w) = rule.on_interval(lo[d], hi[d]);
            dirs.push(p);
            wdirs.push(w);
        }
        Self::from_points(geo, mesh.element_index(e), dirs, wdirs)
    }

    /// Tensor grid of explicit points inside element `elem`.
    pub fn from_points(
        geo: &GeometryMap,
        elem: [usize; 3],
        dirs: Vec<Vec<f64>>,
        wdirs: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = dirs.len();
        let counts: Vec<usize> = dirs.iter().map(|d| d.len()).collect();
        let total: usize = counts.iter().product();
        let mut z = Vec::with_capacity(total);
        let mut w = Vec::with_capacity(total);
        let mut jac = Vec::with_capacity(total);
        for q in 0..total {
            let mut rem = q;
            let mut pt = [0.0; 3];
            let mut wt = 1.0;
            for d in 0..n {
                let k = rem % counts[d];
                rem /= counts[d];
                pt[d] = dirs[d][k];
                wt *= wdirs[d][k];
            }
            jac.push(geo.jacobian_pack(&pt[..n])?);
            z.push(pt);
            w.push(wt);
        }
        Ok(ElementGeometry { elem, dirs, z, w, jac })
    }

    /// A single point of a patch.
    pub fn at_point(geo: &GeometryMap, mesh: &Mesh, z: &[f64]) -> Result<Self> {
        let e = mesh.locate(z);
        let dirs = (0..mesh.dim).map(|d| vec![z[d]]).collect();
        let wdirs = (0..mesh.dim).map(|_| vec![1.0]).collect();
        Self::from_points(geo, mesh.element_index(e), dirs, wdirs)
    }

    /// Gauss points on the part of a boundary face covered by element `e`.
    /// Weights are parametric face weights.
    pub fn on_face(geo: &GeometryMap, mesh: &Mesh, e: usize, face: Face, rule: &GaussRule) -> Result<Self> {
        let (lo, hi) = mesh.element_bounds(e);
        let mut dirs = Vec::new();
        let mut wdirs = Vec::new();
        for d in 0..mesh.dim {
            if d == face.dir {
                dirs.push(vec![face.side as f64]);
                wdirs.push(vec![1.0]);
            } else {
                let (p, w) = rule.on_interval(lo[d], hi[d]);
                dirs.push(p);
                wdirs.push(w);
            }
        }
        Self::from_points(geo, mesh.element_index(e), dirs, wdirs)
    }

    pub fn n_qp(&self) -> usize {
        self.z.len()
    }

    /// Physical measure `w · det J` at each point.
    pub fn dx(&self) -> Vec<f64> {
        self.w.iter().zip(&self.jac).map(|(w, j)| w * j.det).collect()
    }
}

/// Physical basis values of the functions supported on an element.
#[derive(Debug, Clone)]
pub struct ElementValues {
    /// Space-local indices of the active functions.
    pub dofs: Vec<usize>,
    /// Component of each active function.
    pub comp: Vec<usize>,
    pub n_qp: usize,
    /// `val[q * nloc + a]`: value (scalar in slot 0, or vector).
    pub val: Vec<[f64; 3]>,
    /// `der[q * nloc + a]`: gradient for scalar spaces, `[div, 0, 0]` for
    /// div-conforming and componentwise vector spaces, the curl for Y1.
    pub der: Vec<[f64; 3]>,
}

impl ElementValues {
    pub fn nloc(&self) -> usize {
        self.dofs.len()
    }

    pub fn value(&self, q: usize, a: usize) -> [f64; 3] {
        self.val[q * self.dofs.len() + a]
    }

    pub fn deriv(&self, q: usize, a: usize) -> [f64; 3] {
        self.der[q * self.dofs.len() + a]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteSpace {
    n: usize,
    kind: PullbackKind,
    comps: Vec<TensorSplineSpace>,
    offsets: Vec<usize>,
    n_el: usize,
}

impl DiscreteSpace {
    fn from_comps(n: usize, kind: PullbackKind, comps: Vec<TensorSplineSpace>, n_el: usize) -> Self {
        let mut offsets = vec![0];
        for c in &comps {
            offsets.push(offsets.last().copied().unwrap_or(0) + c.dim());
        }
        DiscreteSpace { n, kind, comps, offsets, n_el }
    }

    /// `V^k_{h,n}(p, r)` on a uniform mesh with `n_el` elements per direction.
    /// In 2D, `k = 1` is the div-conforming space (Y2).
    pub fn de_rham(n: usize, k: usize, p: usize, r: isize, n_el: usize) -> Result<Self> {
        if p == 0 || r < 0 || r >= p as isize {
            return Err(Error::Config(format!("de Rham spaces need p >= 1 and 0 <= r < p, got p={p} r={r}")));
        }
        let hi = (p, r);
        let lo = (p - 1, r - 1);
        let tensor = |dirs: &[(usize, isize)]| {
            let degs: Vec<usize> = dirs.iter().map(|x| x.0).collect();
            let regs: Vec<isize> = dirs.iter().map(|x| x.1).collect();
            TensorSplineSpace::uniform(&degs, &regs, n_el)
        };
        let (kind, comps) = match (n, k) {
            (2, 0) => (PullbackKind::Y0, vec![tensor(&[hi, hi])?]),
            (2, 1) => (PullbackKind::Y2, vec![tensor(&[hi, lo])?, tensor(&[lo, hi])?]),
            (2, 2) => (PullbackKind::Y3, vec![tensor(&[lo, lo])?]),
            (3, 0) => (PullbackKind::Y0, vec![tensor(&[hi, hi, hi])?]),
            (3, 1) => (
                PullbackKind::Y1,
                vec![tensor(&[lo, hi, hi])?, tensor(&[hi, lo, hi])?, tensor(&[hi, hi, lo])?],
            ),
            (3, 2) => (
                PullbackKind::Y2,
                vec![tensor(&[hi, lo, lo])?, tensor(&[lo, hi, lo])?, tensor(&[lo, lo, hi])?],
            ),
            (3, 3) => (PullbackKind::Y3, vec![tensor(&[lo, lo, lo])?]),
            _ => return Err(Error::Config(format!("no de Rham space V^{k} in dimension {n}"))),
        };
        Ok(Self::from_comps(n, kind, comps, n_el))
    }

    /// `ncomp` copies of `S_p^r` in every direction, composed with `F⁻¹`.
    pub fn componentwise(n: usize, ncomp: usize, p: usize, r: isize, n_el: usize) -> Result<Self> {
        let t = TensorSplineSpace::uniform(&vec![p; n], &vec![r; n], n_el)?;
        Ok(Self::from_comps(n, PullbackKind::Componentwise, vec![t; ncomp], n_el))
    }

    pub fn dim(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> PullbackKind {
        self.kind
    }

    pub fn n_el(&self) -> usize {
        self.n_el
    }

    pub fn comps(&self) -> &[TensorSplineSpace] {
        &self.comps
    }

    pub fn comp_offset(&self, c: usize) -> usize {
        self.offsets[c]
    }

    pub fn is_vector(&self) -> bool {
        self.comps.len() > 1 || matches!(self.kind, PullbackKind::Y1 | PullbackKind::Y2)
    }

    /// Largest per-direction degree over all components.
    pub fn max_degree(&self) -> usize {
        self.comps.iter().flat_map(|c| c.degrees()).max().unwrap_or(0)
    }

    pub fn mesh(&self) -> Mesh {
        Mesh { dim: self.n, n_el: self.n_el }
    }

    /// Splits a space-local index into `(component, multi-index)`.
    pub fn locate(&self, idx: usize) -> (usize, [usize; 3]) {
        let c = self.offsets.partition_point(|&o| o <= idx) - 1;
        (c, self.comps[c].multi_index(idx - self.offsets[c]))
    }

    /// Physical basis values on an element.
    pub fn eval_element(&self, eg: &ElementGeometry) -> ElementValues {
        let n = self.n;
        let nq = eg.n_qp();
        // per component: first index per direction and per-point tables
        struct CompTables {
            first: [usize; 3],
            counts: [usize; 3],
            // tab[d][k][j] -> (value, derivative) of local function j at point k
            tab: Vec<Vec<Vec<(f64, f64)>>>,
        }
        let mut tables = Vec::with_capacity(self.comps.len());
        let mut dofs = Vec::new();
        let mut comp = Vec::new();
        for (c, space) in self.comps.iter().enumerate() {
            let mut first = [0; 3];
            let mut counts = [1; 3];
            let mut tab = Vec::with_capacity(n);
            for d in 0..n {
                let s = space.dir(d);
                let p = s.degree();
                let span = s.knot_vector().element_span(eg.elem[d]);
                first[d] = span - p;
                counts[d] = p + 1;
                let per_pt = eg.dirs[d]
                    .iter()
                    .map(|&z| {
                        let ders = s.ders_at_span(span, z, 1);
                        (0..=p).map(|j| (ders[0][j], if p > 0 { ders[1][j] } else { 0.0 })).collect()
                    })
                    .collect();
                tab.push(per_pt);
            }
            let nloc: usize = counts.iter().take(n).product();
            for l in 0..nloc {
                let mut rem = l;
                let mut m = [0; 3];
                for d in 0..n {
                    m[d] = first[d] + rem % counts[d];
                    rem /= counts[d];
                }
                dofs.push(self.offsets[c] + space.index(&m[..n]));
                comp.push(c);
            }
            tables.push(CompTables { first, counts, tab });
        }
        let nloc = dofs.len();
        let mut val = vec![[0.0; 3]; nq * nloc];
        let mut der = vec![[0.0; 3]; nq * nloc];
        let qcounts: Vec<usize> = eg.dirs.iter().map(|d| d.len()).collect();
        for q in 0..nq {
            let mut rem = q;
            let mut qk = [0; 3];
            for d in 0..n {
                qk[d] = rem % qcounts[d];
                rem /= qcounts[d];
            }
            let jp = &eg.jac[q];
            let jit = jp.inv.transpose();
            let mut a = 0;
            for (c, t) in tables.iter().enumerate() {
                let nl: usize = t.counts.iter().take(n).product();
                for l in 0..nl {
                    let mut rem = l;
                    let mut v = 1.0;
                    let mut g = [1.0f64; 3];
                    for d in 0..n {
                        let j = rem % t.counts[d];
                        rem /= t.counts[d];
                        let (bv, bd) = t.tab[d][qk[d]][j];
                        v *= bv;
                        for (e, ge) in g.iter_mut().enumerate().take(n) {
                            *ge *= if e == d { bd } else { bv };
                        }
                    }
                    if n == 2 {
                        g[2] = 0.0;
                    }
                    let (pv, pd) = self.push_forward(c, v, g, jp, &jit);
                    val[q * nloc + a] = pv;
                    der[q * nloc + a] = pd;
                    a += 1;
                }
                let _ = t.first;
            }
        }
        ElementValues { dofs, comp, n_qp: nq, val, der }
    }

    fn push_forward(
        &self,
        c: usize,
        v: f64,
        g: [f64; 3],
        jp: &JacobianPack,
        jit: &Matrix3<f64>,
    ) -> ([f64; 3], [f64; 3]) {
        let gv = Vector3::from(g);
        let to = |x: Vector3<f64>| [x[0], x[1], x[2]];
        match self.kind {
            PullbackKind::Y0 => ([v, 0.0, 0.0], to(jit * gv)),
            PullbackKind::Y3 => ([v / jp.det, 0.0, 0.0], [0.0; 3]),
            PullbackKind::Y2 => {
                let col = jp.j.column(c) * (v / jp.det);
                (to(col.into_owned()), [g[c] / jp.det, 0.0, 0.0])
            }
            PullbackKind::Y1 => {
                let col = jit.column(c) * v;
                let mut e = Vector3::zeros();
                e[c] = 1.0;
                let curl_hat = gv.cross(&e);
                (to(col.into_owned()), to(jp.j * curl_hat / jp.det))
            }
            PullbackKind::Componentwise => {
                let grad = jit * gv;
                if self.comps.len() == 1 {
                    ([v, 0.0, 0.0], to(grad))
                } else {
                    let mut val = [0.0; 3];
                    val[c] = v;
                    (val, [grad[c], 0.0, 0.0])
                }
            }
        }
    }

    /// Indices of the functions controlling the normal trace on a face
    /// (div-conforming spaces), ordered lexicographically in the tangential
    /// directions.
    pub fn normal_dofs(&self, face: Face) -> Result<Vec<usize>> {
        if self.kind != PullbackKind::Y2 {
            return Err(Error::Config("normal traces are defined for Y2 spaces only".into()));
        }
        Ok(self.face_dofs_of_comp(face.dir, face))
    }

    /// Functions of component `c` that do not vanish on `face`.
    pub fn face_dofs_of_comp(&self, c: usize, face: Face) -> Vec<usize> {
        let space = &self.comps[c];
        let dims = space.dims();
        let fixed = if face.side == 0 { 0 } else { dims[face.dir] - 1 };
        let tang = face.tangential(self.n);
        let tcount: usize = tang.iter().map(|&d| dims[d]).product();
        (0..tcount)
            .map(|t| {
                let mut m = [0; 3];
                m[face.dir] = fixed;
                let mut rem = t;
                for &d in &tang {
                    m[d] = rem % dims[d];
                    rem /= dims[d];
                }
                self.offsets[c] + space.index(&m[..self.n])
            })
            .collect()
    }

    /// Trace space of component `face.dir` on a face: the tangential factors.
    pub fn normal_trace_space(&self, face: Face) -> Result<TensorSplineSpace> {
        let space = &self.comps[face.dir];
        let dirs = face.tangential(self.n).into_iter().map(|d| space.dir(d).clone()).collect();
        TensorSplineSpace::new(dirs)
    }
}

/// Gauss points per direction, as offsets from the highest stress degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadraturePolicy {
    /// `+2` for assembly, `+3` for error norms.
    Default,
    /// `+1` for both, which reproduces the published error tables exactly.
    Minimal,
}

impl QuadraturePolicy {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(QuadraturePolicy::Default),
            "minimal" => Ok(QuadraturePolicy::Minimal),
            _ => Err(Error::Unknown { kind: "quadrature policy", name: name.to_string() }),
        }
    }

    fn offsets(self) -> (usize, usize) {
        match self {
            QuadraturePolicy::Default => (2, 3),
            QuadraturePolicy::Minimal => (1, 1),
        }
    }
}

/// The stress, displacement and rotation spaces of the mixed method.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticitySpaces {
    pub n: usize,
    pub p: usize,
    pub r: isize,
    pub n_el: usize,
    /// Space of one stress row.
    pub sigma_row: DiscreteSpace,
    /// Space of one displacement component.
    pub u: DiscreteSpace,
    /// Space of one rotation component.
    pub rot: DiscreteSpace,
    /// Number of rotation components, `2n − 3`.
    pub n_rot: usize,
    pub naive: bool,
    pub quadrature: QuadraturePolicy,
}

impl ElasticitySpaces {
    /// Structured spaces: rows of Σ in V^{n−1}, U in V^n, P in V^0(p−1).
    pub fn build(n: usize, p: usize, r: isize, n_el: usize) -> Result<Self> {
        let (sigma_row, u, rot) = match n {
            2 => {
                if !(r >= 0 && p as isize > r + 1) {
                    return Err(Error::Config(format!(
                        "2D spaces need p > r + 1 >= 1, got p={p} r={r}"
                    )));
                }
                (
                    DiscreteSpace::de_rham(2, 1, p, r, n_el)?,
                    DiscreteSpace::de_rham(2, 2, p, r, n_el)?,
                    DiscreteSpace::de_rham(2, 0, p - 1, r, n_el)?,
                )
            }
            3 => {
                if !(p >= 2 && r >= 0 && (p as isize - 1) > r) {
                    return Err(Error::Config(format!(
                        "3D spaces need p >= 2 and p - 1 > r >= 0, got p={p} r={r}"
                    )));
                }
                (
                    DiscreteSpace::de_rham(3, 2, p + 1, r, n_el)?,
                    DiscreteSpace::de_rham(3, 3, p + 1, r, n_el)?,
                    DiscreteSpace::de_rham(3, 0, p - 1, r, n_el)?,
                )
            }
            _ => return Err(Error::Config(format!("dimension {n} unsupported"))),
        };
        Ok(ElasticitySpaces { n, p, r, n_el, sigma_row, u, rot, n_rot: 2 * n - 3, naive: false, quadrature: QuadraturePolicy::Default })
    }

    /// Equal-order spaces `S_p^r ∘ F⁻¹` for every component of every field.
    pub fn naive(n: usize, p: usize, r: isize, n_el: usize) -> Result<Self> {
        if !(n == 2 || n == 3) || p == 0 || r < 0 || r >= p as isize {
            return Err(Error::Config(format!("invalid naive spaces n={n} p={p} r={r}")));
        }
        Ok(ElasticitySpaces {
            n,
            p,
            r,
            n_el,
            sigma_row: DiscreteSpace::componentwise(n, n, p, r, n_el)?,
            u: DiscreteSpace::componentwise(n, 1, p, r, n_el)?,
            rot: DiscreteSpace::componentwise(n, 1, p, r, n_el)?,
            n_rot: 2 * n - 3,
            naive: true,
            quadrature: QuadraturePolicy::Default,
        })
    }

    /// Auxiliary 2D space `(V^0(p, r))²` whose curl lies in Σ.
    pub fn aux_r(&self) -> Result<DiscreteSpace> {
        if self.n != 2 {
            return Err(Error::Config("the auxiliary H1 space is provided in 2D only".into()));
        }
        DiscreteSpace::de_rham(2, 0, self.p, self.r, self.n_el)
    }

    pub fn mesh(&self) -> Mesh {
        Mesh { dim: self.n, n_el: self.n_el }
    }

    pub fn sigma_dim(&self) -> usize {
        self.n * self.sigma_row.dim()
    }

    pub fn u_dim(&self) -> usize {
        self.n * self.u.dim()
    }

    pub fn rot_dim(&self) -> usize {
        self.n_rot * self.rot.dim()
    }

    pub fn total_dim(&self) -> usize {
        self.sigma_dim() + self.u_dim() + self.rot_dim()
    }

    pub fn with_quadrature(mut self, q: QuadraturePolicy) -> Self {
        self.quadrature = q;
        self
    }

    /// Quadrature points per direction for assembly.
    pub fn assembly_points(&self) -> usize {
        self.sigma_row.max_degree() + self.quadrature.offsets().0
    }

    /// Quadrature points per direction for error norms.
    pub fn error_points(&self) -> usize {
        self.sigma_row.max_degree() + self.quadrature.offsets().1
    }
}

/// Map from patch-local field indices to global indices with signs.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldMap {
    pub n_global: usize,
    /// `map[patch][local] = (global, sign)`.
    pub map: Vec<Vec<(usize, f64)>>,
}

impl FieldMap {
    fn identity(n: usize) -> Self {
        FieldMap { n_global: n, map: vec![(0..n).map(|i| (i, 1.0)).collect()] }
    }
}

/// Global DOF maps of the three fields; unknowns are ordered Σ, U, P.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    pub sigma: FieldMap,
    pub u: FieldMap,
    pub rot: FieldMap,
}

impl DofMap {
    pub fn single_patch(spaces: &ElasticitySpaces) -> Self {
        DofMap {
            sigma: FieldMap::identity(spaces.sigma_dim()),
            u: FieldMap::identity(spaces.u_dim()),
            rot: FieldMap::identity(spaces.rot_dim()),
        }
    }

    pub fn n_sigma(&self) -> usize {
        self.sigma.n_global
    }

    pub fn u_offset(&self) -> usize {
        self.sigma.n_global
    }

    pub fn rot_offset(&self) -> usize {
        self.sigma.n_global + self.u.n_global
    }

    pub fn total(&self) -> usize {
        self.sigma.n_global + self.u.n_global + self.rot.n_global
    }

    pub fn n_patches(&self) -> usize {
        self.sigma.map.len()
    }
}

/// Union–find over signed identifications `x_a = s · x_b`.
struct SignedUnionFind {
    parent: Vec<usize>,
    sign: Vec<f64>,
}

impl SignedUnionFind {
    fn new(n: usize) -> Self {
        SignedUnionFind { parent: (0..n).collect(), sign: vec![1.0; n] }
    }

    /// Root of `a` and `s` with `x_a = s · x_root`.
    fn find(&mut self, a: usize) -> (usize, f64) {
        let p = self.parent[a];
        if p == a {
            return (a, 1.0);
        }
        let (root, s) = self.find(p);
        self.parent[a] = root;
        self.sign[a] *= s;
        (root, self.sign[a])
    }

    fn union(&mut self, a: usize, b: usize, s: f64) -> Result<()> {
        let (ra, sa) = self.find(a);
        let (rb, sb) = self.find(b);
        if ra == rb {
            if (sa - s * sb).abs() > 0.5 {
                return Err(Error::Config("inconsistent interface orientation".into()));
            }
            return Ok(());
        }
        // x_ra = sa x_a = sa s x_b = sa s sb x_rb
        self.parent[ra] = rb;
        self.sign[ra] = sa * s * sb;
        Ok(())
    }

    fn into_map(mut self, n_patches: usize, per_patch: usize) -> FieldMap {
        let n = self.parent.len();
        let mut global = vec![usize::MAX; n];
        let mut next = 0;
        let mut map = vec![Vec::with_capacity(per_patch); n_patches];
        for i in 0..n {
            let (root, s) = self.find(i);
            if global[root] == usize::MAX {
                global[root] = next;
                next += 1;
            }
            map[i / per_patch].push((global[root], s));
        }
        FieldMap { n_global: next, map }
    }
}

/// Couples per-patch spaces across conforming interfaces: normal traces of the
/// stress rows are identified with orientation signs, rotations continuously
/// when `couple_rotations`, displacements not at all.
pub fn couple_multipatch(
    spaces: &ElasticitySpaces,
    geo: &MultiPatchGeometry,
    couple_rotations: bool,
) -> Result<DofMap> {
    if spaces.naive && !geo.interfaces.is_empty() {
        return Err(Error::Config("naive spaces are single-patch only".into()));
    }
    let np = geo.n_patches();
    let (ns, nu, nr) = (spaces.sigma_dim(), spaces.u_dim(), spaces.rot_dim());
    let mut sig = SignedUnionFind::new(np * ns);
    let mut rot = SignedUnionFind::new(np * nr);
    let row = spaces.sigma_row.dim();
    let rdim = spaces.rot.dim();
    for i in &geo.interfaces {
        let (fa, fb) = (i.face_a, i.face_b);
        if fa.dir != fb.dir || fa.side == fb.side {
            return Err(Error::Config(format!(
                "nonconforming interface between patches {} and {}",
                i.patch_a, i.patch_b
            )));
        }
        let sign = -fa.outward_sign() * fb.outward_sign();
        let da = spaces.sigma_row.normal_dofs(fa)?;
        let db = spaces.sigma_row.normal_dofs(fb)?;
        for r in 0..spaces.n {
            for (&a, &b) in da.iter().zip(&db) {
                sig.union(i.patch_a * ns + r * row + a, i.patch_b * ns + r * row + b, sign)?;
            }
        }
        if couple_rotations {
            let ra = spaces.rot.face_dofs_of_comp(0, fa);
            let rb = spaces.rot.face_dofs_of_comp(0, fb);
            for k in 0..spaces.n_rot {
                for (&a, &b) in ra.iter().zip(&rb) {
                    rot.union(i.patch_a * nr + k * rdim + a, i.patch_b * nr + k * rdim + b, 1.0)?;
                }
            }
        }
    }
    let u = FieldMap {
        n_global: np * nu,
        map: (0..np).map(|p| (0..nu).map(|i| (p * nu + i, 1.0)).collect()).collect(),
    };
    Ok(DofMap { sigma: sig.into_map(np, ns), u, rot: rot.into_map(np, nr) })
}

/// Global Σ indices controlling `τ·ν` on the given boundary faces (all rows).
pub fn boundary_normal_dofs(
    spaces: &ElasticitySpaces,
    dofs: &DofMap,
    faces: &[(usize, Face)],
) -> Result<BTreeSet<usize>> {
    let mut out = BTreeSet::new();
    let row = spaces.sigma_row.dim();
    for &(patch, face) in faces {
        if patch >= dofs.n_patches() || face.dir >= spaces.n || face.side > 1 {
            return Err(Error::Config(format!("boundary part ({patch}, {face:?}) is not a patch face")));
        }
        for r in 0..spaces.n {
            for i in spaces.sigma_row.normal_dofs(face)? {
                out.insert(dofs.sigma.map[patch][r * row + i].0);
            }
        }
    }
    Ok(out)
}

/// Which exterior derivative connects two spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Derivative {
    Grad,
    Curl2d,
    Curl3d,
    Div,
}

/// Expands the exterior derivative of every basis function of `a` in `b`
/// with the exact univariate derivative maps and returns the largest
/// pointwise deviation from the directly differentiated basis functions at
/// random parametric points.
pub fn exterior_derivative_check(a: &DiscreteSpace, b: &DiscreteSpace, samples: usize, seed: u64) -> Result<f64> {
    use PullbackKind::*;
    let n = a.n;
    let op = match (n, a.kind, b.kind) {
        (2, Y0, Y2) => Derivative::Curl2d,
        (3, Y0, Y1) => Derivative::Grad,
        (3, Y1, Y2) => Derivative::Curl3d,
        (_, Y2, Y3) => Derivative::Div,
        _ => return Err(Error::Config("spaces are not consecutive in the de Rham chain".into())),
    };
    if b.n != n || b.n_el != a.n_el {
        return Err(Error::Config("spaces live on different meshes".into()));
    }
    // terms: (source comp, partial direction, target comp, sign)
    let mut terms: Vec<(usize, usize, usize, f64)> = Vec::new();
    match op {
        Derivative::Grad => terms.extend((0..3).map(|c| (0, c, c, 1.0))),
        Derivative::Curl2d => terms.extend([(0, 1, 0, 1.0), (0, 0, 1, -1.0)]),
        Derivative::Div => terms.extend((0..n).map(|c| (c, c, 0, 1.0))),
        Derivative::Curl3d => {
            for src in 0..3 {
                for i in 0..3 {
                    for j in 0..3 {
                        let e = levi_civita(i, j, src);
                        if e != 0.0 {
                            terms.push((src, j, i, e));
                        }
                    }
                }
            }
        }
    }
    // derivative maps per (source comp, direction)
    let mut maps: Vec<((usize, usize), DMatrix<f64>)> = Vec::new();
    for &(src, dir, tgt, _) in &terms {
        let s = &a.comps[src];
        let t = &b.comps[tgt];
        let (dspace, map) = s.dir(dir).derivative_space()?;
        for d in 0..n {
            let expect = if d == dir { &dspace } else { s.dir(d) };
            if expect != t.dir(d) {
                return Err(Error::Config("target space is not the derivative space of the source".into()));
            }
        }
        if !maps.iter().any(|(k, _)| *k == (src, dir)) {
            maps.push(((src, dir), map));
        }
    }
    let get_map = |src: usize, dir: usize| &maps.iter().find(|(k, _)| *k == (src, dir)).expect("map").1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let z: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        // target values on dense vectors
        let tvals: Vec<Vec<f64>> = b
            .comps
            .iter()
            .map(|t| {
                let mut v = vec![0.0; t.dim()];
                for (i, x) in t.eval_basis(&z).expect("in domain") {
                    v[i] = x;
                }
                v
            })
            .collect();
        for (src, s) in a.comps.iter().enumerate() {
            let mut grads = vec![[0.0; 3]; s.dim()];
            for (i, _, g) in s.eval_basis_grad(&z)? {
                grads[i] = g;
            }
            for idx in 0..s.dim() {
                let m = s.multi_index(idx);
                for tgt in 0..b.comps.len() {
                    let mut direct = 0.0;
                    let mut expanded = 0.0;
                    for &(ts, dir, tt, sign) in &terms {
                        if ts != src || tt != tgt {
                            continue;
                        }
                        direct += sign * grads[idx][dir];
                        let map = get_map(src, dir);
                        let t = &b.comps[tgt];
                        for k in 0..map.nrows() {
                            let c = map[(k, m[dir])];
                            if c != 0.0 {
                                let mut mt = m;
                                mt[dir] = k;
                                expanded += sign * c * tvals[tgt][t.index(&mt[..n])];
                            }
                        }
                    }
                    worst = worst.max((direct - expanded).abs());
                }
            }
        }
    }
    Ok(worst)
}

pub(crate) fn levi_civita(i: usize, j: usize, k: usize) -> f64 {
    match (i, j, k) {
        (0, 1, 2) | (1, 2, 0) | (2, 0, 1) => 1.0,
        (0, 2, 1) | (2, 1, 0) | (1, 0, 2) => -1.0,
        _ => 0.0,
    }
}
