//! JSON experiment configuration.

use std::path::Path;

use serde::Deserialize;
use weaksym::analysis::{case_catalog, ManufacturedCase, StudyOptions};
use weaksym::derham::QuadraturePolicy;
use weaksym::error::{Error, Result};
use weaksym::geometry::Face;
use weaksym::operators::{Lambda, MaterialParams};
use weaksym::solver::{Method, Preconditioner, SolveConfig};

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Manufactured case name (convergence, export-vtk).
    pub case: Option<String>,
    /// Geometry catalog name (infsup); defaults to the case geometry.
    pub geometry: Option<String>,
    pub p: Option<usize>,
    pub r: Option<isize>,
    /// Mesh sizes, each `1/n` for an integer `n`.
    #[serde(default)]
    pub h: Vec<f64>,
    pub material: Option<Material>,
    pub bc: Option<BoundarySpec>,
    #[serde(default)]
    pub solver: SolverSpec,
    pub quadrature: Option<String>,
    /// Lattice points per direction for VTK export.
    pub lattice: Option<usize>,
    /// Cook meshes (elements per direction).
    pub meshes: Option<Vec<usize>>,
    /// Probe subset for `verify`.
    pub probes: Option<Vec<String>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Material {
    pub lambda: LambdaValue,
    pub mu: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum LambdaValue {
    Number(f64),
    Text(String),
}

impl LambdaValue {
    pub fn resolve(&self) -> Result<Lambda> {
        match self {
            LambdaValue::Number(v) => Ok(Lambda::Finite(*v)),
            LambdaValue::Text(s) if s == "inf" => Ok(Lambda::Infinite),
            LambdaValue::Text(s) => Err(Error::Config(format!("material.lambda must be a number or \"inf\", got \"{s}\""))),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    /// Faces with prescribed traction, e.g. `"right"` or `"4:xi2_hi"`.
    pub traction_faces: Option<Vec<String>>,
    /// Constant traction for the Cook membrane.
    pub traction: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSpec {
    pub method: String,
    pub tol: f64,
    pub max_iter: Option<usize>,
    pub preconditioner: String,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec { method: "auto".into(), tol: 5e-8, max_iter: None, preconditioner: "none".into() }
    }
}

impl SolverSpec {
    pub fn resolve(&self) -> Result<SolveConfig> {
        let method = match self.method.as_str() {
            "auto" => Method::Auto,
            "minres" => Method::Minres,
            "dense" => Method::DenseDirect,
            "sparse" => Method::SparseDirect,
            m => return Err(Error::Unknown { kind: "solver.method", name: m.into() }),
        };
        let preconditioner = match self.preconditioner.as_str() {
            "none" => Preconditioner::None,
            "block_diagonal" => Preconditioner::BlockDiagonal,
            m => return Err(Error::Unknown { kind: "solver.preconditioner", name: m.into() }),
        };
        let cfg = SolveConfig { method, tol: self.tol, max_iter: self.max_iter, preconditioner, ..SolveConfig::default() };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn load(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ExperimentConfig> {
    serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))
}

impl ExperimentConfig {
    pub fn degree(&self) -> Result<usize> {
        self.p.ok_or_else(|| Error::Config("missing field p".into()))
    }

    pub fn regularity(&self, default: isize) -> isize {
        self.r.unwrap_or(default)
    }

    pub fn mesh_sizes(&self) -> Result<&[f64]> {
        if self.h.is_empty() {
            return Err(Error::Config("h must list at least one mesh size".into()));
        }
        if self.h.iter().any(|&h| !(h > 0.0 && h <= 1.0)) {
            return Err(Error::Config("every h must lie in (0, 1]".into()));
        }
        Ok(&self.h)
    }

    pub fn material(&self, n: usize) -> Result<Option<MaterialParams>> {
        self.material.as_ref().map(|m| MaterialParams::new(m.lambda.resolve()?, m.mu, n)).transpose()
    }

    pub fn options(&self, quadrature: Option<&str>, naive: bool) -> Result<StudyOptions> {
        let q = match quadrature.or(self.quadrature.as_deref()) {
            Some(name) => QuadraturePolicy::parse(name)?,
            None => QuadraturePolicy::Default,
        };
        Ok(StudyOptions { solver: self.solver.resolve()?, quadrature: q, naive, ..StudyOptions::default() })
    }

    /// The manufactured case with any material and traction-face overrides applied.
    pub fn case(&self) -> Result<ManufacturedCase> {
        let name = self.case.as_deref().ok_or_else(|| Error::Config("missing field case".into()))?;
        let mut case = case_catalog(name)?;
        if let Some(g) = &self.geometry {
            if *g != case.geometry {
                return Err(Error::Config(format!("case {name} is defined on geometry {}, not {g}", case.geometry)));
            }
        }
        if let Some(params) = self.material(case.dim())? {
            case.params = params;
        }
        if let Some(faces) = self.bc.as_ref().and_then(|b| b.traction_faces.as_ref()) {
            case.traction_faces = faces.iter().map(|f| parse_face(f)).collect::<Result<_>>()?;
        }
        Ok(case)
    }
}

/// `"right"`-style names address patch 0; `"k:name"` addresses patch `k`.
fn parse_face(s: &str) -> Result<(usize, Face)> {
    let (patch, name) = match s.split_once(':') {
        Some((k, rest)) => (k.parse::<usize>().map_err(|_| Error::Config(format!("bad patch index in face {s}")))?, rest),
        None => (0, s),
    };
    Ok((patch, Face::parse(name)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_accepts_inf_literal() {
        let c = parse(r#"{"case":"incompressible","p":2,"h":[0.5],"material":{"lambda":"inf","mu":1}}"#).unwrap();
        assert_eq!(c.material(2).unwrap().unwrap().lambda, Lambda::Infinite);
        let c = parse(r#"{"material":{"lambda":"huge","mu":1}}"#).unwrap();
        assert!(matches!(c.material(2), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(parse(r#"{"case":"deformed_square","pp":2}"#).is_err());
    }

    #[test]
    fn face_names() {
        assert_eq!(parse_face("right").unwrap(), (0, Face::new(0, 1)));
        assert_eq!(parse_face("3:top").unwrap(), (3, Face::new(1, 1)));
        assert!(parse_face("x:top").is_err());
    }

    #[test]
    fn solver_names() {
        let s = SolverSpec { method: "minres".into(), preconditioner: "block_diagonal".into(), ..SolverSpec::default() };
        let cfg = s.resolve().unwrap();
        assert_eq!(cfg.method, Method::Minres);
        assert!(SolverSpec { method: "cg".into(), ..SolverSpec::default() }.resolve().is_err());
        assert!(SolverSpec { tol: -1.0, ..SolverSpec::default() }.resolve().is_err());
    }
}
