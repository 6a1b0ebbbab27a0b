//! Fast invariant checks across the modules, runnable from the binary.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use qcdist::beltrami::{solve_principal, BeltramiCoefficient};
use qcdist::beurling::{beurling_apply, cauchy_apply, dbar_apply, weighted_norm_estimate};
use qcdist::distortion::tau;
use qcdist::dyadic::DyadicCube;
use qcdist::packing::{check_construction, dyadic_content, minimizing_cover, packing_construct, CompactMask, PackingFamily};
use qcdist::{GridField, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::RunDir;
use crate::{Context, Failure};

#[derive(Serialize)]
struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
}

fn tau_algebra() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let t = rng.gen_range(0.0..=2.0);
        let (k1, k2) = (rng.gen_range(1.0..10.0), rng.gen_range(1.0..10.0));
        let a = tau(tau(t, k1).unwrap(), k2).unwrap();
        let b = tau(t, k1 * k2).unwrap();
        if b > 0.0 {
            worst = worst.max((a - b).abs() / b);
        }
    }
    let fixed = [1.0, 2.5, 7.0]
        .iter()
        .all(|&k| tau(0.0, k).unwrap() == 0.0 && tau(2.0, k).unwrap() == 2.0);
    Check {
        name: "tau_algebra",
        passed: fixed && worst <= 1e-12,
        detail: format!("fixed points {fixed}, composition rel err {worst:.2e}"),
    }
}

fn packing() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = 0;
    for _ in 0..100 {
        let level = rng.gen_range(1..8);
        let width = 1u32 << level;
        let cells: Vec<[u32; 2]> = (0..rng.gen_range(1..20))
            .map(|_| [rng.gen_range(0..width), rng.gen_range(0..width)])
            .collect();
        let mask = CompactMask::from_cells(level, cells).unwrap();
        let t = rng.gen_range(0.2..1.9);
        let content = dyadic_content(&mask, t).unwrap();
        let cost: f64 = minimizing_cover(&mask, t).unwrap().iter().map(|c| c.side().powf(t)).sum();
        let single: f64 = mask.count() as f64 * 2f64.powf(-(level as f64) * t);
        let fam = packing_construct(&mask, t, 1e-9, rng.gen_range(0..3)).unwrap();
        let ok = (content - cost).abs() <= 1e-12 * content.max(1e-300)
            && content <= single.min(1.0) * (1.0 + 1e-12)
            && check_construction(&mask, &fam, content, 1e-9).all();
        bad += usize::from(!ok);
    }
    Check {
        name: "packing",
        passed: bad == 0,
        detail: format!("{bad} of 100 random masks inconsistent"),
    }
}

fn transforms() -> Check {
    let spec = GridSpec::unit_centered(64).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let data: Vec<Complex64> = (0..spec.len())
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let mut f = GridField::new(spec, data).unwrap();
    let mean = f.mean();
    f.data_mut().iter_mut().for_each(|z| *z -= mean);
    let iso = (beurling_apply(&f).l2_norm() - f.l2_norm()).abs() / f.l2_norm();
    let back = cauchy_apply(&dbar_apply(&f)).sub(&f).max_abs();
    Check {
        name: "transforms",
        passed: iso <= 1e-12 && back <= 1e-10,
        detail: format!("isometry rel err {iso:.2e}, C(dbar f) - f = {back:.2e}"),
    }
}

fn weighted_norm() -> Check {
    let fam = PackingFamily::new(1.0, 0, vec![DyadicCube::new(2, 1, 1)]).unwrap();
    match weighted_norm_estimate(&fam, 1.0, 64, 1e-5) {
        Ok(r) => Check {
            name: "weighted_norm",
            passed: r.estimate <= 1.0 + 1e-6 && r.estimate > 0.5,
            detail: format!("single cube estimate {:.6} after {} iterations", r.estimate, r.iterations),
        },
        Err(e) => Check {
            name: "weighted_norm",
            passed: false,
            detail: e.to_string(),
        },
    }
}

fn solver() -> Check {
    let spec = GridSpec::origin_centered(128).unwrap();
    let zero = solve_principal(&BeltramiCoefficient::zero(spec), 10, 1e-12).unwrap();
    let mut id: f64 = 0.0;
    for iy in 0..spec.n {
        for ix in 0..spec.n {
            id = id.max((zero.f.at(ix, iy) - spec.z(ix, iy)).norm());
        }
    }
    let kappa = 0.3;
    let mu = BeltramiCoefficient::from_fn(spec, move |_| Complex64::new(kappa, 0.0), |z| z.norm() < 0.25).unwrap();
    let (decay, defect) = match solve_principal(&mu, 400, 1e-12) {
        Ok(sol) => (sol.max_decay_ratio(), sol.identity_defect()),
        Err(_) => (f64::INFINITY, f64::INFINITY),
    };
    Check {
        name: "solver",
        passed: id <= 1e-15 && decay <= kappa + 1e-6 && defect <= 1e-10,
        detail: format!("identity err {id:.1e}, decay ratio {decay:.4}, fz - 1 - S fzbar = {defect:.1e}"),
    }
}

pub fn run(ctx: &Context, out: Option<&Path>) -> Result<Value, Failure> {
    let start = std::time::Instant::now();
    let checks = vec![tau_algebra(), packing(), transforms(), weighted_norm(), solver()];
    for c in &checks {
        eprintln!("[{}] {}: {}", if c.passed { "ok" } else { "FAIL" }, c.name, c.detail);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    let mut result = json!({ "checks": checks.len(), "failed": failed });
    if ctx.timing {
        result["runtime_ms"] = json!(start.elapsed().as_millis() as u64);
    }
    if !failed.is_empty() {
        return Err(Failure::numerical(
            format!("selftest failed: {}", failed.join(", ")),
            json!({ "checks": checks }),
        ));
    }
    match out {
        Some(dir) => {
            let mut run_dir = RunDir::create(dir)?;
            run_dir.write_json("selftest.json", "report", &checks)?;
            run_dir.finish("selftest", &BTreeMap::new(), result)
        }
        None => Ok(json!({ "status": "ok", "subcommand": "selftest", "result": result })),
    }
}
