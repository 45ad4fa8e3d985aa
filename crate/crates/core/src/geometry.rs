//! Spline and NURBS patch parametrizations, meshes and the geometry catalog.
//!
//! All maps are stored with 3D control points. A 2D map uses the first two
//! coordinates and its Jacobian is padded with `J[2][2] = 1`, so the same
//! 3×3 algebra serves both dimensions.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::splines::{KnotVector, SplineSpace1D, TensorSplineSpace};

/// Jacobian data at a parametric point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobianPack {
    pub x: [f64; 3],
    pub j: Matrix3<f64>,
    pub det: f64,
    pub inv: Matrix3<f64>,
}

impl JacobianPack {
    /// `det(J) J⁻¹`.
    pub fn adjugate(&self) -> Matrix3<f64> {
        self.inv * self.det
    }

    /// `det(J) J⁻ᵀ`, which maps parametric normals to area-weighted physical normals.
    pub fn cofactor(&self) -> Matrix3<f64> {
        self.adjugate().transpose()
    }

    fn from_parts(x: [f64; 3], j: Matrix3<f64>, z: [f64; 3]) -> Result<Self> {
        let det = j.determinant();
        if det.is_nan() || det <= 0.0 {
            return Err(Error::DegenerateGeometry { det, point: z });
        }
        let inv = j.try_inverse().ok_or(Error::DegenerateGeometry { det, point: z })?;
        Ok(JacobianPack { x, j, det, inv })
    }
}

/// A face of the parametric cube: `ζ_dir = side` with `side ∈ {0, 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Face {
    pub dir: usize,
    pub side: usize,
}

impl Face {
    pub const fn new(dir: usize, side: usize) -> Self {
        Face { dir, side }
    }

    /// `+1` on the upper face, `−1` on the lower one.
    pub fn outward_sign(&self) -> f64 {
        if self.side == 1 { 1.0 } else { -1.0 }
    }

    pub fn all(n: usize) -> Vec<Face> {
        (0..n).flat_map(|d| [Face::new(d, 0), Face::new(d, 1)]).collect()
    }

    /// Names used in configuration files.
    pub fn parse(name: &str) -> Result<Face> {
        let f = match name {
            "left" | "xi1_lo" => Face::new(0, 0),
            "right" | "xi1_hi" => Face::new(0, 1),
            "bottom" | "xi2_lo" => Face::new(1, 0),
            "top" | "xi2_hi" => Face::new(1, 1),
            "front" | "xi3_lo" => Face::new(2, 0),
            "back" | "xi3_hi" => Face::new(2, 1),
            _ => return Err(Error::Unknown { kind: "face", name: name.into() }),
        };
        Ok(f)
    }

    /// Tangential directions in increasing order.
    pub fn tangential(&self, n: usize) -> Vec<usize> {
        (0..n).filter(|&d| d != self.dir).collect()
    }
}

/// A single spline or NURBS patch `F: [0,1]^n → Ω`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryMap {
    dim: usize,
    space: TensorSplineSpace,
    control: Vec<[f64; 3]>,
    weights: Option<Vec<f64>>,
}

impl GeometryMap {
    pub fn new(
        space: TensorSplineSpace,
        control: Vec<[f64; 3]>,
        weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let dim = space.n_dirs();
        if dim != 2 && dim != 3 {
            return Err(Error::Config(format!("geometry dimension {dim} unsupported")));
        }
        if control.len() != space.dim() {
            return Err(Error::Config(format!(
                "expected {} control points, got {}",
                space.dim(),
                control.len()
            )));
        }
        if let Some(w) = &weights {
            if w.len() != control.len() || w.iter().any(|&x| !(x > 0.0)) {
                return Err(Error::Config("weights must be positive, one per control point".into()));
            }
        }
        Ok(GeometryMap { dim, space, control, weights })
    }

    /// Multilinear patch through the `2^n` corners, ordered with the first
    /// direction fastest.
    pub fn multilinear(corners: &[[f64; 3]]) -> Result<Self> {
        let dim = match corners.len() {
            4 => 2,
            8 => 3,
            k => return Err(Error::Config(format!("{k} corners do not define a multilinear patch"))),
        };
        let space = TensorSplineSpace::uniform(&vec![1; dim], &vec![0; dim], 1)?;
        Self::new(space, corners.to_vec(), None)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn space(&self) -> &TensorSplineSpace {
        &self.space
    }

    pub fn control_points(&self) -> &[[f64; 3]] {
        &self.control
    }

    pub fn weights(&self) -> Option<&[f64]> {
        self.weights.as_deref()
    }

    /// Maximal polynomial degree `q` of the parametrization.
    pub fn degree(&self) -> usize {
        self.space.degrees().into_iter().max().unwrap_or(0)
    }

    /// Minimal interior regularity; `None` for single-element patches, which
    /// are smooth.
    pub fn regularity(&self) -> Option<isize> {
        self.space
            .dirs()
            .iter()
            .filter_map(|s| s.knot_vector().regularity())
            .min()
    }

    pub fn is_rational(&self) -> bool {
        self.weights.is_some()
    }

    fn pad(&self, z: &[f64]) -> Result<[f64; 3]> {
        if z.len() < self.dim {
            return Err(Error::Domain(format!("point has {} coordinates, need {}", z.len(), self.dim)));
        }
        let mut p = [0.0; 3];
        p[..self.dim].copy_from_slice(&z[..self.dim]);
        Ok(p)
    }

    pub fn eval(&self, z: &[f64]) -> Result<[f64; 3]> {
        Ok(self.jacobian_raw(z)?.0)
    }

    fn jacobian_raw(&self, z: &[f64]) -> Result<([f64; 3], Matrix3<f64>)> {
        let zz = self.pad(z)?;
        let basis = self.space.eval_basis_grad(&zz[..self.dim])?;
        let mut x = [0.0; 3];
        let mut j = Matrix3::zeros();
        match &self.weights {
            None => {
                for (i, v, g) in basis {
                    let c = self.control[i];
                    for a in 0..3 {
                        x[a] += v * c[a];
                        for b in 0..self.dim {
                            j[(a, b)] += g[b] * c[a];
                        }
                    }
                }
            }
            Some(w) => {
                let mut wsum = 0.0;
                let mut wgrad = [0.0; 3];
                let mut num = [0.0; 3];
                let mut dnum: Matrix3<f64> = Matrix3::zeros();
                for &(i, v, g) in &basis {
                    let c = self.control[i];
                    wsum += w[i] * v;
                    for b in 0..3 {
                        wgrad[b] += w[i] * g[b];
                    }
                    for a in 0..3 {
                        num[a] += w[i] * v * c[a];
                        for b in 0..self.dim {
                            dnum[(a, b)] += w[i] * g[b] * c[a];
                        }
                    }
                }
                for a in 0..3 {
                    x[a] = num[a] / wsum;
                    for b in 0..self.dim {
                        j[(a, b)] = (dnum[(a, b)] - x[a] * wgrad[b]) / wsum;
                    }
                }
            }
        }
        if self.dim == 2 {
            j[(2, 2)] = 1.0;
        }
        Ok((x, j))
    }

    /// `(x, J, det J, J⁻¹)`; fails on non-positive determinant.
    pub fn jacobian_pack(&self, z: &[f64]) -> Result<JacobianPack> {
        let (x, j) = self.jacobian_raw(z)?;
        JacobianPack::from_parts(x, j, self.pad(z)?)
    }

    /// Newton inversion of `F`. Fails with `PointOutside` if the point is not
    /// in the closed patch.
    pub fn inverse(&self, x: [f64; 3]) -> Result<[f64; 3]> {
        let n = self.dim;
        // coarse search for a starting guess
        let m = 8usize;
        let mut best = ([0.5; 3], f64::INFINITY);
        let total = (m + 1).pow(n as u32);
        for k in 0..total {
            let mut z = [0.0; 3];
            let mut rem = k;
            for zd in z.iter_mut().take(n) {
                *zd = (rem % (m + 1)) as f64 / m as f64;
                rem /= m + 1;
            }
            let y = self.eval(&z)?;
            let d: f64 = (0..n).map(|a| (y[a] - x[a]).powi(2)).sum();
            if d < best.1 {
                best = (z, d);
            }
        }
        let mut z = best.0;
        let scale = self.control.iter().flat_map(|c| c.iter()).fold(1.0f64, |a, &b| a.max(b.abs()));
        for _ in 0..100 {
            let (y, j) = self.jacobian_raw(&z)?;
            let mut r = nalgebra::Vector3::zeros();
            for a in 0..n {
                r[a] = x[a] - y[a];
            }
            if r.norm() <= 1e-14 * scale {
                break;
            }
            let step = j.try_inverse().ok_or(Error::PointOutside(x))? * r;
            let mut zn = z;
            for a in 0..n {
                zn[a] = (z[a] + step[a]).clamp(0.0, 1.0);
            }
            let moved: f64 = (0..n).map(|a| (zn[a] - z[a]).abs()).sum();
            z = zn;
            if moved < 1e-16 {
                break;
            }
        }
        let y = self.eval(&z)?;
        let err: f64 = (0..n).map(|a| (y[a] - x[a]).powi(2)).sum::<f64>().sqrt();
        if err > 1e-10 * scale {
            return Err(Error::PointOutside(x));
        }
        Ok(z)
    }

    /// The map restricted to a parametric sub-box, refit exactly as a patch
    /// of the given degrees by interpolation at Greville points. Exact when
    /// the restriction is polynomial of at most those degrees.
    pub fn restrict_interpolated(&self, lo: [f64; 3], hi: [f64; 3], degrees: &[usize]) -> Result<Self> {
        let n = self.dim;
        let space = TensorSplineSpace::uniform(degrees, &vec![0; n], 1)?;
        let dims = space.dims();
        // Bernstein interpolation at Greville points i/p.
        let grev = |d: usize, i: usize| if degrees[d] == 0 { 0.5 } else { i as f64 / degrees[d] as f64 };
        let npts = space.dim();
        let mut mat = nalgebra::DMatrix::zeros(npts, npts);
        let mut rhs = nalgebra::DMatrix::zeros(npts, 3);
        for k in 0..npts {
            let m = space.multi_index(k);
            let mut t = [0.0; 3];
            let mut zz = [0.0; 3];
            for d in 0..n {
                t[d] = grev(d, m[d]);
                zz[d] = lo[d] + (hi[d] - lo[d]) * t[d];
            }
            for (i, v) in space.eval_basis(&t[..n])? {
                mat[(k, i)] = v;
            }
            let x = self.eval(&zz[..n])?;
            for a in 0..3 {
                rhs[(k, a)] = x[a];
            }
        }
        let sol = mat
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::LinearAlgebra("singular interpolation matrix".into()))?;
        let control = (0..npts).map(|k| [sol[(k, 0)], sol[(k, 1)], sol[(k, 2)]]).collect();
        let _ = dims;
        Self::new(space, control, None)
    }
}

/// Uniform tensor mesh of a patch with `n_el` elements per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mesh {
    pub dim: usize,
    pub n_el: usize,
}

impl Mesh {
    pub fn new(dim: usize, n_el: usize) -> Result<Self> {
        if n_el == 0 {
            return Err(Error::Config("mesh needs at least one element per direction".into()));
        }
        Ok(Mesh { dim, n_el })
    }

    /// Mesh with `1/h` subdivisions per direction.
    pub fn from_h(dim: usize, h: f64) -> Result<Self> {
        let n = (1.0 / h).round();
        if !(n >= 1.0) || ((1.0 / h) - n).abs() > 1e-9 {
            return Err(Error::Config(format!("h = {h} is not the reciprocal of an integer")));
        }
        Self::new(dim, n as usize)
    }

    pub fn n_elements(&self) -> usize {
        self.n_el.pow(self.dim as u32)
    }

    pub fn element_index(&self, e: usize) -> [usize; 3] {
        let mut m = [0; 3];
        let mut rem = e;
        for md in m.iter_mut().take(self.dim) {
            *md = rem % self.n_el;
            rem /= self.n_el;
        }
        m
    }

    pub fn element_bounds(&self, e: usize) -> ([f64; 3], [f64; 3]) {
        let m = self.element_index(e);
        let h = 1.0 / self.n_el as f64;
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for d in 0..self.dim {
            lo[d] = m[d] as f64 * h;
            hi[d] = (m[d] + 1) as f64 * h;
        }
        (lo, hi)
    }

    /// Element containing a parametric point (upper faces belong to the last element).
    pub fn locate(&self, z: &[f64]) -> usize {
        let mut e = 0;
        let mut stride = 1;
        for &zd in z.iter().take(self.dim) {
            let k = ((zd * self.n_el as f64).floor() as usize).min(self.n_el - 1);
            e += k * stride;
            stride *= self.n_el;
        }
        e
    }

    /// Maximal physical element diameter, estimated from element corners.
    pub fn physical_h(&self, geo: &GeometryMap) -> Result<f64> {
        let mut h: f64 = 0.0;
        let nc = 1usize << self.dim;
        for e in 0..self.n_elements() {
            let (lo, hi) = self.element_bounds(e);
            let mut pts = Vec::with_capacity(nc);
            for c in 0..nc {
                let z: Vec<f64> = (0..self.dim).map(|d| if c >> d & 1 == 1 { hi[d] } else { lo[d] }).collect();
                pts.push(geo.eval(&z)?);
            }
            for a in 0..nc {
                for b in a + 1..nc {
                    let d: f64 = (0..3).map(|k| (pts[a][k] - pts[b][k]).powi(2)).sum();
                    h = h.max(d.sqrt());
                }
            }
        }
        Ok(h)
    }
}

/// Conforming interface between two patches. Tangential parametrizations are
/// aligned: the face coordinates of `a` and `b` agree in increasing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interface {
    pub patch_a: usize,
    pub face_a: Face,
    pub patch_b: usize,
    pub face_b: Face,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiPatchGeometry {
    pub patches: Vec<GeometryMap>,
    pub interfaces: Vec<Interface>,
}

impl MultiPatchGeometry {
    pub fn single(patch: GeometryMap) -> Self {
        MultiPatchGeometry { patches: vec![patch], interfaces: Vec::new() }
    }

    /// Builds the geometry and detects aligned interfaces by sampling faces.
    pub fn from_patches(patches: Vec<GeometryMap>) -> Result<Self> {
        let dim = patches.first().map(|p| p.dim()).ok_or_else(|| Error::Config("no patches".into()))?;
        if patches.iter().any(|p| p.dim() != dim) {
            return Err(Error::Config("patches of mixed dimension".into()));
        }
        let mut interfaces = Vec::new();
        for a in 0..patches.len() {
            for b in a + 1..patches.len() {
                for fa in Face::all(dim) {
                    for fb in Face::all(dim) {
                        if fa.dir == fb.dir
                            && fa.side != fb.side
                            && face_mismatch(&patches[a], fa, &patches[b], fb, 5)? <= 1e-12
                        {
                            interfaces.push(Interface { patch_a: a, face_a: fa, patch_b: b, face_b: fb });
                        }
                    }
                }
            }
        }
        Ok(MultiPatchGeometry { patches, interfaces })
    }

    pub fn dim(&self) -> usize {
        self.patches[0].dim()
    }

    pub fn n_patches(&self) -> usize {
        self.patches.len()
    }

    /// Faces not shared by any interface.
    pub fn boundary_faces(&self) -> Vec<(usize, Face)> {
        let mut out = Vec::new();
        for (p, _) in self.patches.iter().enumerate() {
            for f in Face::all(self.dim()) {
                let shared = self.interfaces.iter().any(|i| {
                    (i.patch_a == p && i.face_a == f) || (i.patch_b == p && i.face_b == f)
                });
                if !shared {
                    out.push((p, f));
                }
            }
        }
        out
    }

    /// Maximal sampled mismatch of the interface traces.
    pub fn interface_mismatch(&self, samples: usize) -> Result<f64> {
        let mut m: f64 = 0.0;
        for i in &self.interfaces {
            m = m.max(face_mismatch(&self.patches[i.patch_a], i.face_a, &self.patches[i.patch_b], i.face_b, samples)?);
        }
        Ok(m)
    }

    /// Locates the patch and parametric point of a physical point.
    pub fn inverse(&self, x: [f64; 3]) -> Result<(usize, [f64; 3])> {
        for (k, p) in self.patches.iter().enumerate() {
            if let Ok(z) = p.inverse(x) {
                return Ok((k, z));
            }
        }
        Err(Error::PointOutside(x))
    }
}

/// Point on a face from face coordinates (tangential directions in order).
pub fn face_point(n: usize, face: Face, t: &[f64]) -> [f64; 3] {
    let mut z = [0.0; 3];
    let mut k = 0;
    for (d, zd) in z.iter_mut().enumerate().take(n) {
        if d == face.dir {
            *zd = face.side as f64;
        } else {
            *zd = t[k];
            k += 1;
        }
    }
    z
}

fn face_mismatch(a: &GeometryMap, fa: Face, b: &GeometryMap, fb: Face, samples: usize) -> Result<f64> {
    let n = a.dim();
    let mut worst: f64 = 0.0;
    let ns = samples.max(2);
    let total = ns.pow((n - 1) as u32);
    for k in 0..total {
        let mut t = [0.0; 2];
        let mut rem = k;
        for td in t.iter_mut().take(n - 1) {
            *td = (rem % ns) as f64 / (ns - 1) as f64 * 0.9 + 0.05;
            rem /= ns;
        }
        let xa = a.eval(&face_point(n, fa, &t)[..n])?;
        let xb = b.eval(&face_point(n, fb, &t)[..n])?;
        let d: f64 = (0..3).map(|c| (xa[c] - xb[c]).powi(2)).sum::<f64>().sqrt();
        worst = worst.max(d);
    }
    Ok(worst)
}

/// Named geometries.
pub fn catalog(name: &str) -> Result<MultiPatchGeometry> {
    match name {
        "unit_square" => Ok(MultiPatchGeometry::single(unit_square())),
        "unit_cube" => Ok(MultiPatchGeometry::single(unit_cube())),
        "deformed_square" => Ok(MultiPatchGeometry::single(deformed_square())),
        "cook" => Ok(MultiPatchGeometry::single(cook())),
        "ring3d" => Ok(MultiPatchGeometry::single(ring3d())),
        "deformed_square_9patch" => deformed_square_9patch(),
        "square_2patch" => square_2patch(),
        "cube_2patch" => cube_2patch(),
        _ => Err(Error::Unknown { kind: "geometry", name: name.into() }),
    }
}

pub const CATALOG_NAMES: &[&str] = &[
    "unit_square",
    "unit_cube",
    "deformed_square",
    "cook",
    "ring3d",
    "deformed_square_9patch",
    "square_2patch",
    "cube_2patch",
];

fn bilinear(c: [[f64; 2]; 4]) -> GeometryMap {
    let corners: Vec<[f64; 3]> = c.iter().map(|p| [p[0], p[1], 0.0]).collect();
    GeometryMap::multilinear(&corners).expect("valid corners")
}

fn box3(lo: [f64; 3], hi: [f64; 3]) -> GeometryMap {
    let corners: Vec<[f64; 3]> = (0..8)
        .map(|c| {
            let mut p = [0.0; 3];
            for d in 0..3 {
                p[d] = if c >> d & 1 == 1 { hi[d] } else { lo[d] };
            }
            p
        })
        .collect();
    GeometryMap::multilinear(&corners).expect("valid corners")
}

pub fn unit_square() -> GeometryMap {
    bilinear([[0., 0.], [1., 0.], [0., 1.], [1., 1.]])
}

pub fn unit_cube() -> GeometryMap {
    box3([0.0; 3], [1.0; 3])
}

/// `F(ζ1, ζ2) = (ζ1, ζ2 − ζ1² + ζ1)`: quadratic in ζ1, linear in ζ2.
pub fn deformed_square() -> GeometryMap {
    let space = TensorSplineSpace::new(vec![
        SplineSpace1D::uniform(2, 0, 1).expect("bezier"),
        SplineSpace1D::uniform(1, 0, 1).expect("bezier"),
    ])
    .expect("2D");
    let bump = [0.0, 0.5, 0.0];
    let mut control = Vec::new();
    for j in 0..2 {
        for (i, b) in bump.iter().enumerate() {
            control.push([i as f64 * 0.5, j as f64 + b, 0.0]);
        }
    }
    GeometryMap::new(space, control, None).expect("valid net")
}

/// Cook's membrane: bilinear patch with corners (0,0), (48,44), (48,60), (0,44).
pub fn cook() -> GeometryMap {
    bilinear([[0., 0.], [48., 44.], [0., 44.], [48., 60.]])
}

/// Quarter annular prism with radii 1 and 2 and height 1. `ζ1` runs along the
/// exact rational quadratic arc from the y-axis to the x-axis, `ζ2` radially
/// outward and `ζ3` in z, which keeps `det J > 0`.
pub fn ring3d() -> GeometryMap {
    let w = std::f64::consts::FRAC_1_SQRT_2;
    let space = TensorSplineSpace::new(vec![
        SplineSpace1D::uniform(2, 0, 1).expect("bezier"),
        SplineSpace1D::uniform(1, 0, 1).expect("bezier"),
        SplineSpace1D::uniform(1, 0, 1).expect("bezier"),
    ])
    .expect("3D");
    let arc = [[0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
    let aw = [1.0, w, 1.0];
    let mut control = Vec::new();
    let mut weights = Vec::new();
    for k in 0..2 {
        for j in 0..2 {
            let r = 1.0 + j as f64;
            for i in 0..3 {
                control.push([r * arc[i][0], r * arc[i][1], k as f64]);
                weights.push(aw[i]);
            }
        }
    }
    GeometryMap::new(space, control, Some(weights)).expect("valid net")
}

/// The deformed square split into a 3×3 grid of biquadratic patches, each
/// an exact refit of the global map on its cell.
pub fn deformed_square_9patch() -> Result<MultiPatchGeometry> {
    let global = deformed_square();
    let mut patches = Vec::new();
    for j in 0..3 {
        for i in 0..3 {
            let lo = [i as f64 / 3.0, j as f64 / 3.0, 0.0];
            let hi = [(i + 1) as f64 / 3.0, (j + 1) as f64 / 3.0, 0.0];
            patches.push(global.restrict_interpolated(lo, hi, &[2, 2])?);
        }
    }
    MultiPatchGeometry::from_patches(patches)
}

pub fn square_2patch() -> Result<MultiPatchGeometry> {
    MultiPatchGeometry::from_patches(vec![
        bilinear([[0., 0.], [0.5, 0.], [0., 1.], [0.5, 1.]]),
        bilinear([[0.5, 0.], [1., 0.], [0.5, 1.], [1., 1.]]),
    ])
}

pub fn cube_2patch() -> Result<MultiPatchGeometry> {
    MultiPatchGeometry::from_patches(vec![
        box3([0.0; 3], [0.5, 1.0, 1.0]),
        box3([0.5, 0.0, 0.0], [1.0; 3]),
    ])
}

/// JSON control-net description of a single patch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub degrees: Vec<usize>,
    pub knots: Vec<Vec<f64>>,
    pub control_points: Vec<Vec<f64>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

/// JSON geometry file: one or more patches.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometrySpec {
    pub patches: Vec<PatchSpec>,
}

impl PatchSpec {
    pub fn build(&self) -> Result<GeometryMap> {
        if self.degrees.len() != self.knots.len() {
            return Err(Error::Config("one knot vector per degree required".into()));
        }
        let dirs = self
            .degrees
            .iter()
            .zip(&self.knots)
            .map(|(&p, k)| Ok(SplineSpace1D::new(KnotVector::new(p, k.clone())?)))
            .collect::<Result<Vec<_>>>()?;
        let space = TensorSplineSpace::new(dirs)?;
        let control = self
            .control_points
            .iter()
            .map(|c| {
                if c.len() < 2 || c.len() > 3 {
                    return Err(Error::Config("control points need 2 or 3 coordinates".into()));
                }
                Ok([c[0], c[1], c.get(2).copied().unwrap_or(0.0)])
            })
            .collect::<Result<Vec<_>>>()?;
        GeometryMap::new(space, control, self.weights.clone())
    }

    pub fn from_map(g: &GeometryMap) -> Self {
        PatchSpec {
            degrees: g.space().degrees(),
            knots: g.space().dirs().iter().map(|s| s.knot_vector().knots().to_vec()).collect(),
            control_points: g
                .control_points()
                .iter()
                .map(|c| c[..g.dim().max(2)].to_vec())
                .collect(),
            weights: g.weights().map(|w| w.to_vec()),
        }
    }
}

impl GeometrySpec {
    pub fn build(&self) -> Result<MultiPatchGeometry> {
        let patches = self.patches.iter().map(|p| p.build()).collect::<Result<Vec<_>>>()?;
        if patches.len() == 1 {
            return Ok(MultiPatchGeometry::single(patches.into_iter().next().expect("one patch")));
        }
        MultiPatchGeometry::from_patches(patches)
    }

    pub fn from_json(text: &str) -> Result<MultiPatchGeometry> {
        let spec: GeometrySpec =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("geometry file: {e}")))?;
        spec.build()
    }
}
