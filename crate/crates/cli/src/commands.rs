use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use weaksym::analysis::{
    case_catalog, convergence_study, cook_csv, cook_run_with, n_el_from_h, solve_case, COOK_LOAD,
};
use weaksym::derham::ElasticitySpaces;
use weaksym::error::{Error, Result};
use weaksym::geometry::catalog;
use weaksym::io::write_vtk;
use weaksym::operators::{Lambda, MaterialParams};
use weaksym::par::Exec;
use weaksym::verification::{
    check_commutativity, check_identity_in_sigma, check_subcomplex, infsup_probe, interface_jump, taylor_hood_constant,
    ProbeEntry, ProbeResult, VerificationReport,
};

use crate::config::ExperimentConfig;
use crate::{Context, Failure};

const COOK_MESHES: [usize; 7] = [1, 4, 7, 10, 13, 16, 19];
const PROBES: &[&str] = &["commutativity", "subcomplex", "identity", "infsup", "taylor_hood", "interface_jump"];

fn config(ctx: &Context) -> Result<&ExperimentConfig> {
    ctx.config.as_ref().ok_or_else(|| Error::Config("this command needs --config".into()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    write_file(path, &(text + "\n"))
}

pub fn convergence(ctx: &Context) -> std::result::Result<(), Failure> {
    let cfg = config(ctx)?;
    let case = cfg.case()?;
    let p = cfg.degree()?;
    let opts = cfg.options(ctx.quadrature.as_deref(), ctx.naive)?;
    let rep = convergence_study(&case, p, cfg.regularity(0), cfg.mesh_sizes()?, &opts)?;
    let csv = rep.to_csv();
    print!("{csv}");
    write_file(&ctx.out.join("convergence.csv"), &csv)?;
    Ok(())
}

pub fn cook(ctx: &Context) -> std::result::Result<(), Failure> {
    let cfg = config(ctx)?;
    let p = cfg.degree()?;
    let params = cfg.material(2)?.unwrap_or(MaterialParams::new(Lambda::Infinite, 0.375, 2)?);
    let load = cfg.bc.as_ref().and_then(|b| b.traction).unwrap_or(COOK_LOAD);
    let opts = cfg.options(ctx.quadrature.as_deref(), ctx.naive)?;
    let meshes = cfg.meshes.clone().unwrap_or(COOK_MESHES.to_vec());
    let rows = meshes.iter().map(|&n| cook_run_with(p, n, params, load, &opts)).collect::<Result<Vec<_>>>()?;
    let csv = cook_csv(&rows);
    print!("{csv}");
    write_file(&ctx.out.join(format!("cook_p{p}.csv")), &csv)?;
    Ok(())
}

fn entry(probe: &str, h: Option<f64>, value: f64, threshold: f64, pass: bool) -> ProbeEntry {
    ProbeEntry { probe: probe.into(), h, value, threshold, pass }
}

fn run_probe(name: &str, ctx: &Context, out: &mut Vec<ProbeEntry>) -> Result<()> {
    let seed = ctx.seed;
    let square = catalog("deformed_square")?;
    match name {
        "commutativity" => {
            for n in [2, 3] {
                let v = check_commutativity(n, 200, seed)?;
                out.push(entry(&format!("commutativity_{n}d"), None, v, 1e-12, v <= 1e-12));
            }
        }
        "subcomplex" => {
            for (n, p, r, n_el) in [(2, 2, 0, 2), (2, 3, 1, 2), (3, 2, 0, 1)] {
                let v = check_subcomplex(&ElasticitySpaces::build(n, p, r, n_el)?, 3, seed)?;
                out.push(entry(&format!("subcomplex_{n}d_p{p}_r{r}"), Some(1.0 / n_el as f64), v, 1e-12, v <= 1e-12));
            }
        }
        "identity" => {
            let (pass, v) = check_identity_in_sigma(&square, 2, 0, 2)?;
            out.push(entry("identity_in_sigma", Some(0.5), v, 1e-10, pass));
        }
        "infsup" => {
            let r = infsup_probe(&square, 2, 0, &[2, 3, 4], ctx.naive, Exec::default())?;
            for (h, v) in r.hs.iter().zip(&r.values) {
                out.push(entry(&r.label, Some(*h), *v, 0.0, r.pass));
            }
            let (first, last) = (r.values[0], r.values[r.values.len() - 1]);
            if ctx.naive {
                out.push(entry("infsup_naive_last", None, last, (first / 10.0).max(1e-8), r.pass));
            } else {
                let max = r.values.iter().cloned().fold(f64::MIN, f64::max);
                let min = r.values.iter().cloned().fold(f64::MAX, f64::min);
                out.push(entry("infsup_structured_ratio", None, max / min, 3.0, r.pass));
            }
        }
        "taylor_hood" => {
            let v = taylor_hood_constant(&square, &ElasticitySpaces::build(2, 2, 0, 2)?)?;
            out.push(entry("taylor_hood", Some(0.5), v, 1e-8, v > 1e-8));
        }
        "interface_jump" => {
            let case = case_catalog("deformed_square_9patch")?;
            let geo = case.geometry()?;
            let (disc, sol, _) = solve_case(&case, &geo, 2, 0, 1, &Default::default())?;
            let v = interface_jump(&disc, &sol, 5)?;
            out.push(entry("interface_jump", Some(1.0), v, 1e-10, v <= 1e-10));
        }
        other => return Err(Error::Unknown { kind: "probe", name: other.into() }),
    }
    Ok(())
}

pub fn verify(ctx: &Context) -> std::result::Result<(), Failure> {
    let names: Vec<String> = match ctx.config.as_ref().and_then(|c| c.probes.clone()) {
        Some(list) => list,
        None => PROBES.iter().map(|s| s.to_string()).collect(),
    };
    if let Some(bad) = names.iter().find(|n| !PROBES.contains(&n.as_str())) {
        return Err(Error::Unknown { kind: "probe", name: bad.clone() }.into());
    }
    let mut entries = Vec::new();
    for name in &names {
        run_probe(name, ctx, &mut entries)?;
    }
    let report = VerificationReport { seed: ctx.seed, entries };
    for e in &report.entries {
        println!("{:<28} {:>12.4e} {:>10.1e} {}", e.probe, e.value, e.threshold, if e.pass { "pass" } else { "FAIL" });
    }
    write_json(&ctx.out.join("verification.json"), &report)?;
    if report.passed() {
        Ok(())
    } else {
        let failed: Vec<&str> = report.entries.iter().filter(|e| !e.pass).map(|e| e.probe.as_str()).collect();
        Err(Failure::ProbeFailed(failed.join(", ")))
    }
}

pub fn export_vtk(ctx: &Context) -> std::result::Result<(), Failure> {
    let cfg = config(ctx)?;
    let case = cfg.case()?;
    let geo = case.geometry()?;
    let p = cfg.degree()?;
    let n_el = n_el_from_h(cfg.mesh_sizes()?[0])?;
    let opts = cfg.options(ctx.quadrature.as_deref(), ctx.naive)?;
    let (disc, sol, _) = solve_case(&case, &geo, p, cfg.regularity(0), n_el, &opts)?;
    let m = cfg.lattice.unwrap_or(11);
    for patch in 0..geo.n_patches() {
        let path = ctx.out.join(format!("fields_patch{patch}.vtk"));
        let mut w = BufWriter::new(File::create(&path).map_err(Error::from)?);
        write_vtk(&disc, &sol, patch, m, &mut w)?;
        w.flush().map_err(Error::from)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

pub fn infsup(ctx: &Context) -> std::result::Result<(), Failure> {
    let cfg = config(ctx)?;
    let name = cfg.geometry.clone().unwrap_or("deformed_square".into());
    let geo = catalog(&name)?;
    let p = cfg.degree()?;
    let n_els = cfg.mesh_sizes()?.iter().map(|&h| n_el_from_h(h)).collect::<Result<Vec<_>>>()?;
    let r: ProbeResult = infsup_probe(&geo, p, cfg.regularity(0), &n_els, ctx.naive, Exec::default())?;
    for (h, v) in r.hs.iter().zip(&r.values) {
        println!("h={h:.6} inf-sup={v:.6e}");
    }
    write_json(&ctx.out.join("infsup.json"), &r)?;
    if r.pass {
        Ok(())
    } else {
        Err(Failure::ProbeFailed(format!("{}: {:?}", r.label, r.values)))
    }
}
