use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use num_complex::Complex64;
use qcdist::beltrami::{kappa_from_k, solve_principal_with, BeltramiCoefficient};
use qcdist::beurling::{compressed_apply, weighted_norm_estimate_with, NormOptions};
use qcdist::distortion::{
    cantor_mask, conformal_outside_experiment_with, content_distortion_experiment_with, disk_coefficient,
    max_mask_level, ContentConfig, ExperimentConfig, ExperimentReport, FractalSpec, MuPhase,
};
use qcdist::packing::{
    check_construction, dyadic_content_with, packing_construct_with, CompactMask, PackingFamily,
};
use qcdist::spectral::{Multiplier, Spectral};
use qcdist::{Exec, GridField, GridSpec};
use serde_json::{json, Value};

use crate::output::RunDir;
use crate::{ConformalArgs, ContentArgs, Context, Failure, ModelArgs, Op, PackArgs, SolveArgs, SourceArgs, TransformArgs};

type Params = BTreeMap<String, Value>;

fn require_out(out: Option<&Path>) -> Result<&Path, Failure> {
    out.ok_or_else(|| Failure::validation("missing required option --out"))
}

pub fn read_mask(path: &Path) -> Result<CompactMask, Failure> {
    let is_png = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("png"));
    if is_png {
        return Ok(CompactMask::read_png(path)?);
    }
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("cannot read mask {}: {e}", path.display())))?;
    Ok(CompactMask::from_json(&text)?)
}

fn read_family(path: &Path) -> Result<PackingFamily, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::validation(format!("cannot read family {}: {e}", path.display())))?;
    Ok(PackingFamily::from_json(&text)?)
}

fn parse_phase(raw: Option<String>) -> Result<Option<MuPhase>, Failure> {
    raw.map(|s| s.parse::<MuPhase>().map_err(Failure::from)).transpose()
}

fn stamp_runtime(ctx: &Context, start: Instant, result: &mut Value) {
    if ctx.timing {
        result["runtime_ms"] = json!(start.elapsed().as_millis() as u64);
    }
}

pub fn pack(ctx: &Context, a: &PackArgs, out: Option<&Path>) -> Result<Value, Failure> {
    let start = Instant::now();
    let c = &ctx.config;
    let mask_path: std::path::PathBuf = c.require(a.mask.clone(), "mask")?;
    let t: f64 = c.require(a.t, "t")?;
    let m: u32 = c.or(a.m, "m", 2)?;
    let epsilon: f64 = c.or(a.epsilon, "epsilon", 1e-3)?;
    let norm_n: Option<usize> = c.pick(a.norm_n, "norm_n")?;
    let norm_tol: f64 = c.or(a.norm_tol, "norm_tol", NormOptions::default().tol)?;
    let out = require_out(out)?;

    let mask = read_mask(&mask_path)?;
    let exec = Exec::default();
    let content = dyadic_content_with(&mask, t, exec)?;
    let fam = packing_construct_with(&mask, t, epsilon, m, exec)?;
    let checks = check_construction(&mask, &fam, content, epsilon);

    let mut params = Params::new();
    params.insert("mask".into(), json!(mask_path.display().to_string()));
    params.insert("mask_level".into(), json!(mask.level()));
    params.insert("t".into(), json!(t));
    params.insert("m".into(), json!(m));
    params.insert("epsilon".into(), json!(epsilon));

    let mut file: Value = serde_json::from_str(&fam.to_json()?).map_err(qcdist::Error::from)?;
    file["content"] = json!(content);
    file["epsilon"] = json!(epsilon);
    file["checks"] = serde_json::to_value(&checks).map_err(qcdist::Error::from)?;

    let mut result = json!({
        "content": content,
        "cubes": fam.len(),
        "packing_norm": fam.norm(),
        "properties_hold": checks.all(),
    });
    if let Some(n) = norm_n {
        params.insert("norm_n".into(), json!(n));
        params.insert("norm_tol".into(), json!(norm_tol));
        let opts = NormOptions {
            tol: norm_tol,
            exec,
            ..NormOptions::default()
        };
        let report = weighted_norm_estimate_with(&fam, t, GridSpec::unit_centered(n)?, &opts)?;
        result["weighted_norm"] = json!(report.estimate);
        file["weighted_norm"] = serde_json::to_value(&report).map_err(qcdist::Error::from)?;
    }
    if !checks.all() {
        return Err(Failure::numerical(
            "packing construction violated one of its guarantees",
            serde_json::to_value(&checks).map_err(qcdist::Error::from)?,
        ));
    }

    let mut dir = RunDir::create(out)?;
    dir.write_json("family.json", "family", &file)?;
    dir.write_bytes("mask.json", "mask", mask.to_json()?.as_bytes())?;
    stamp_runtime(ctx, start, &mut result);
    dir.finish("pack", &params, result)
}

pub fn transform(ctx: &Context, a: &TransformArgs, out: Option<&Path>) -> Result<Value, Failure> {
    let start = Instant::now();
    let c = &ctx.config;
    let op = match a.op {
        Some(op) => op,
        None => {
            let raw: String = c.require(None, "op")?;
            <Op as clap::ValueEnum>::from_str(&raw, true)
                .map_err(|_| Failure::validation(format!("unknown transform {raw:?}")))?
        }
    };
    let input: Option<std::path::PathBuf> = c.pick(a.input.clone(), "input")?;
    let out = require_out(out)?;
    let mut params = Params::new();
    params.insert("op".into(), json!(format!("{op:?}").to_lowercase()));

    let field = match input {
        Some(p) => {
            params.insert("input".into(), json!(p.display().to_string()));
            GridField::read(&p)?
        }
        None => {
            let r: f64 = c.require(a.disk_radius, "disk_radius")?;
            let n: usize = c.or(a.n, "n", 512)?;
            if !(r > 0.0 && r < 1.0) {
                return Err(Failure::validation(format!("disk radius must lie in (0, 1), got {r}")));
            }
            params.insert("disk_radius".into(), json!(r));
            params.insert("n".into(), json!(n));
            GridField::from_fn(GridSpec::origin_centered(n)?, move |z| {
                Complex64::new(if z.norm() < r { 1.0 } else { 0.0 }, 0.0)
            })?
        }
    };
    let sp = Spectral::new(field.spec());
    let result_field = match op {
        Op::Beurling => sp.apply(&field, Multiplier::Beurling),
        Op::BeurlingAdjoint => sp.apply(&field, Multiplier::BeurlingAdjoint),
        Op::Cauchy => sp.apply(&field, Multiplier::Cauchy),
        Op::Dbar => sp.apply(&field, Multiplier::Dbar),
        Op::Dz => sp.apply(&field, Multiplier::Dz),
        Op::Compressed => {
            let path: std::path::PathBuf = c.require(a.family.clone(), "family")?;
            params.insert("family".into(), json!(path.display().to_string()));
            compressed_apply(&field, &read_family(&path)?)?
        }
    };
    let mut dir = RunDir::create(out)?;
    dir.write_field("output", &result_field)?;
    let mut result = json!({
        "n": field.n(),
        "input_l2": field.l2_norm(),
        "output_l2": result_field.l2_norm(),
        "output_max_abs": result_field.max_abs(),
    });
    stamp_runtime(ctx, start, &mut result);
    dir.finish("transform", &params, result)
}

pub fn solve(ctx: &Context, a: &SolveArgs, out: Option<&Path>) -> Result<Value, Failure> {
    let start = Instant::now();
    let c = &ctx.config;
    let mu_path: Option<std::path::PathBuf> = c.pick(a.mu.clone(), "mu")?;
    let max_terms: usize = c.or(a.max_terms, "max_terms", 400)?;
    let tol: f64 = c.or(a.tol, "tol", 1e-10)?;
    let out = require_out(out)?;
    let mut params = Params::new();
    params.insert("max_terms".into(), json!(max_terms));
    params.insert("tol".into(), json!(tol));

    let mu = match mu_path {
        Some(p) => {
            params.insert("mu".into(), json!(p.display().to_string()));
            BeltramiCoefficient::new(GridField::read(&p)?)?
        }
        None => {
            let k: f64 = c.require(a.k, "K")?;
            let n: usize = c.or(a.n, "n", 512)?;
            let radius: f64 = c.or(a.radius, "radius", 0.25)?;
            let phase = parse_phase(c.pick(a.phase.clone(), "phase")?)?.unwrap_or(MuPhase::Radial);
            let seed: u64 = c.or(a.seed, "seed", 1)?;
            if !(k >= 1.0 && k.is_finite()) {
                return Err(Failure::validation(format!("K must be >= 1, got {k}")));
            }
            if !(radius > 0.0 && radius <= 0.5) {
                return Err(Failure::validation(format!("radius must lie in (0, 1/2], got {radius}")));
            }
            params.insert("K".into(), json!(k));
            params.insert("n".into(), json!(n));
            params.insert("radius".into(), json!(radius));
            params.insert("phase".into(), json!(phase));
            params.insert("seed".into(), json!(seed));
            disk_coefficient(GridSpec::origin_centered(n)?, kappa_from_k(k), radius, phase, seed)?
        }
    };
    let sol = solve_principal_with(&mu, max_terms, tol, Exec::default())?;
    let identity = sol.identity_defect();
    let jac_min = sol.jacobian.iter().cloned().fold(f64::INFINITY, f64::min);
    let summary = json!({
        "kappa": sol.kappa,
        "K": mu.k(),
        "terms": sol.terms,
        "term_norms": sol.term_norms,
        "tail_bound": sol.tail_bound,
        "max_decay_ratio": sol.max_decay_ratio(),
        "identity_defect": identity,
        "jacobian_min": jac_min,
        "jacobian_nonpositive": sol.jacobian.iter().filter(|j| **j <= 0.0).count(),
    });
    let mut dir = RunDir::create(out)?;
    dir.write_field("f", &sol.f)?;
    dir.write_field("fzbar", &sol.fzbar)?;
    dir.write_json("solution.json", "summary", &summary)?;
    let mut result = json!({
        "kappa": sol.kappa,
        "terms": sol.terms,
        "identity_defect": identity,
    });
    stamp_runtime(ctx, start, &mut result);
    dir.finish("solve", &params, result)
}

fn experiment_config(ctx: &Context, m: &ModelArgs, n_default: usize) -> Result<ExperimentConfig, Failure> {
    let c = &ctx.config;
    let d = ExperimentConfig::default();
    let cfg = ExperimentConfig {
        t: c.or(m.t, "t", d.t)?,
        k: c.or(m.k, "K", d.k)?,
        n: c.or(m.n, "n", n_default)?,
        m: c.or(m.m, "m", d.m)?,
        epsilon: c.or(m.epsilon, "epsilon", d.epsilon)?,
        phase: parse_phase(c.pick(m.phase.clone(), "phase")?)?.unwrap_or(d.phase),
        seed: c.or(m.seed, "seed", d.seed)?,
        tol: c.or(m.tol, "tol", d.tol)?,
        max_terms: c.or(m.max_terms, "max_terms", d.max_terms)?,
        norm_tol: c.or(m.norm_tol, "norm_tol", d.norm_tol)?,
        timing: ctx.timing,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// The source mask, from a file or a corner Cantor set.
fn source_mask(
    ctx: &Context,
    s: &SourceArgs,
    default_gens: u32,
    default_level: u32,
    params: &mut Params,
) -> Result<CompactMask, Failure> {
    let c = &ctx.config;
    if let Some(p) = c.pick::<std::path::PathBuf>(s.mask.clone(), "mask")? {
        params.insert("mask".into(), json!(p.display().to_string()));
        return read_mask(&p);
    }
    let ratio: f64 = c.or(s.cantor_ratio, "cantor_ratio", 0.25)?;
    let gens: u32 = c.or(s.generations, "generations", default_gens)?;
    let level: u32 = c.or(s.level, "level", default_level)?;
    params.insert("cantor_ratio".into(), json!(ratio));
    params.insert("generations".into(), json!(gens));
    params.insert("level".into(), json!(level));
    Ok(cantor_mask(&FractalSpec::new(ratio, gens)?, level)?)
}

fn write_report(
    ctx: &Context,
    name: &str,
    report: &ExperimentReport,
    mask: &CompactMask,
    params: &Params,
    out: &Path,
    start: Instant,
) -> Result<Value, Failure> {
    let mut dir = RunDir::create(out)?;
    dir.write_json("report.json", "report", report)?;
    dir.write_bytes("report.csv", "report", report.to_csv().as_bytes())?;
    dir.write_bytes("mask.json", "mask", mask.to_json()?.as_bytes())?;
    let failed: Vec<&String> = report.verdicts.iter().filter(|(_, v)| !**v).map(|(k, _)| k).collect();
    let mut result = json!({
        "passed": report.passed(),
        "failed_verdicts": failed,
    });
    stamp_runtime(ctx, start, &mut result);
    dir.finish(name, params, result)
}

pub fn conformal_outside(ctx: &Context, a: &ConformalArgs, out: Option<&Path>) -> Result<Value, Failure> {
    let start = Instant::now();
    let cfg = experiment_config(ctx, &a.model, ExperimentConfig::default().n)?;
    let out = require_out(out)?;
    let mut params = Params::new();
    let level = max_mask_level(cfg.n, cfg.m).max(2);
    let mask = source_mask(ctx, &a.source, 1, level, &mut params)?;
    let report = conformal_outside_experiment_with(&mask, &cfg, Exec::default())?;
    params.insert("experiment".into(), serde_json::to_value(&cfg).map_err(qcdist::Error::from)?);
    write_report(ctx, "experiment conformal-outside", &report, &mask, &params, out, start)
}

pub fn content_distortion(ctx: &Context, a: &ContentArgs, out: Option<&Path>) -> Result<Value, Failure> {
    let start = Instant::now();
    let d = ContentConfig::default();
    let base = experiment_config(ctx, &a.model, d.base.n)?;
    let cfg = ContentConfig {
        base,
        disk_radius: ctx.config.or(a.disk_radius, "disk_radius", d.disk_radius)?,
        image_level: ctx.config.or(a.image_level, "image_level", d.image_level)?,
    };
    let out = require_out(out)?;
    let mut params = Params::new();
    let mask = source_mask(ctx, &a.source, 4, 12, &mut params)?;
    let report = content_distortion_experiment_with(&mask, &cfg, Exec::default())?;
    params.insert("experiment".into(), serde_json::to_value(&cfg).map_err(qcdist::Error::from)?);
    write_report(ctx, "experiment content-distortion", &report, &mask, &params, out, start)
}
