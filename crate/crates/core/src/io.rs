//! Legacy VTK field export, its reader, and MatrixMarket dumps.

use std::io::{BufRead, Write};

use crate::analysis::{element_fields, PointFields};
use crate::assembly::Discretization;
use crate::derham::ElementGeometry;
use crate::error::{Error, Result};
use crate::solver::FieldSolution;
use crate::sparse::CsrMatrix;

/// Fields sampled on the `m^n` parametric lattice `ζ_i = i/(m−1)` of one patch,
/// with the first parametric direction running fastest.
pub fn sample_lattice(disc: &Discretization, sol: &FieldSolution, patch: usize, m: usize) -> Result<Vec<PointFields>> {
    if m < 2 {
        return Err(Error::Domain(format!("lattice needs m >= 2, got {m}")));
    }
    if patch >= disc.geo.n_patches() {
        return Err(Error::Domain(format!("patch {patch} out of range")));
    }
    let n = disc.spaces.n;
    let mesh = disc.mesh();
    let geo = &disc.geo.patches[patch];
    let count = m.pow(n as u32);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let mut z = [0.0; 3];
        let mut rest = k;
        for zd in z.iter_mut().take(n) {
            *zd = (rest % m) as f64 / (m - 1) as f64;
            rest /= m;
        }
        let eg = ElementGeometry::at_point(geo, &mesh, &z[..n])?;
        out.push(element_fields(disc, sol, patch, &eg)[0]);
    }
    Ok(out)
}

/// Writes one patch as a legacy ASCII `STRUCTURED_GRID` with point arrays
/// `u` (n components), `sigma` (n², row major) and `p`.
pub fn write_vtk<W: Write>(disc: &Discretization, sol: &FieldSolution, patch: usize, m: usize, w: &mut W) -> Result<()> {
    let n = disc.spaces.n;
    let nr = disc.spaces.n_rot;
    let pts = sample_lattice(disc, sol, patch, m)?;
    let np = pts.len();
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "mixed elasticity fields, patch {patch}")?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET STRUCTURED_GRID")?;
    let dims: Vec<usize> = (0..3).map(|d| if d < n { m } else { 1 }).collect();
    writeln!(w, "DIMENSIONS {} {} {}", dims[0], dims[1], dims[2])?;
    writeln!(w, "POINTS {np} double")?;
    for f in &pts {
        writeln!(w, "{:.17e} {:.17e} {:.17e}", f.x[0], f.x[1], f.x[2])?;
    }
    writeln!(w, "POINT_DATA {np}")?;
    writeln!(w, "FIELD fields 3")?;
    let mut array = |name: &str, comps: usize, get: &dyn Fn(&PointFields) -> Vec<f64>| -> Result<()> {
        writeln!(w, "{name} {comps} {np} double")?;
        for f in &pts {
            let line: Vec<String> = get(f).iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
        Ok(())
    };
    array("u", n, &|f| (0..n).map(|r| f.u[r]).collect())?;
    array("sigma", n * n, &|f| (0..n * n).map(|k| f.sigma[(k / n, k % n)]).collect())?;
    array("p", nr, &|f| (0..nr).map(|k| f.rot[k]).collect())?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct VtkArray {
    pub name: String,
    pub components: usize,
    pub values: Vec<f64>,
}

impl VtkArray {
    pub fn tuple(&self, i: usize) -> &[f64] {
        &self.values[i * self.components..(i + 1) * self.components]
    }
}

/// Contents of a structured grid written by [`write_vtk`].
#[derive(Debug, Clone, PartialEq)]
pub struct VtkGrid {
    pub dims: [usize; 3],
    pub points: Vec<[f64; 3]>,
    pub arrays: Vec<VtkArray>,
}

impl VtkGrid {
    pub fn array(&self, name: &str) -> Option<&VtkArray> {
        self.arrays.iter().find(|a| a.name == name)
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Format { kind: "vtk", msg: msg.into() }
}

/// Reads the subset of legacy VTK produced by [`write_vtk`].
pub fn read_vtk<R: BufRead>(r: R) -> Result<VtkGrid> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| bad("empty file"))??;
    if !header.starts_with("# vtk DataFile Version") {
        return Err(bad("missing header"));
    }
    lines.next().ok_or_else(|| bad("missing title"))??;
    let mut tokens: Vec<String> = Vec::new();
    for l in lines {
        tokens.extend(l?.split_whitespace().map(str::to_string));
    }
    let mut it = tokens.into_iter();
    let mut next = || it.next().ok_or_else(|| bad("unexpected end of file"));
    let expect = |want: &str, got: String| if got == want { Ok(()) } else { Err(bad(format!("expected {want}, found {got}"))) };
    let num = |s: String| s.parse::<f64>().map_err(|_| bad(format!("not a number: {s}")));
    let int = |s: String| s.parse::<usize>().map_err(|_| bad(format!("not a count: {s}")));

    expect("ASCII", next()?)?;
    expect("DATASET", next()?)?;
    expect("STRUCTURED_GRID", next()?)?;
    expect("DIMENSIONS", next()?)?;
    let dims = [int(next()?)?, int(next()?)?, int(next()?)?];
    expect("POINTS", next()?)?;
    let np = int(next()?)?;
    if np != dims.iter().product::<usize>() {
        return Err(bad("point count does not match dimensions"));
    }
    next()?;
    let mut points = Vec::with_capacity(np);
    for _ in 0..np {
        points.push([num(next()?)?, num(next()?)?, num(next()?)?]);
    }
    expect("POINT_DATA", next()?)?;
    if int(next()?)? != np {
        return Err(bad("POINT_DATA count mismatch"));
    }
    expect("FIELD", next()?)?;
    next()?;
    let narrays = int(next()?)?;
    let mut arrays = Vec::with_capacity(narrays);
    for _ in 0..narrays {
        let name = next()?;
        let components = int(next()?)?;
        if int(next()?)? != np {
            return Err(bad(format!("array {name} has the wrong tuple count")));
        }
        next()?;
        let values = (0..np * components).map(|_| num(next()?)).collect::<Result<Vec<_>>>()?;
        arrays.push(VtkArray { name, components, values });
    }
    Ok(VtkGrid { dims, points, arrays })
}

/// MatrixMarket coordinate dump (1-based indices, general real).
pub fn write_matrix_market<W: Write>(m: &CsrMatrix, w: &mut W) -> Result<()> {
    writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(w, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.entries() {
        writeln!(w, "{} {} {v:.17e}", i + 1, j + 1)?;
    }
    Ok(())
}
