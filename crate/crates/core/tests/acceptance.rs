//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion.
//!
//! Run with `cargo test -p qcdist --test acceptance`. Exits non-zero if any
//! criterion fails.

mod common;

use std::time::{Duration, Instant};

use num_complex::Complex64;
use qcdist::beltrami::{kappa_from_k, solve_principal, BeltramiCoefficient};
use qcdist::beurling::{beurling_apply, weighted_norm_estimate_with, NormOptions};
use qcdist::distortion::{
    conformal_outside_experiment, content_sweep, tau, ContentConfig, ExperimentConfig, MuPhase,
};
use qcdist::packing::{
    check_construction, dyadic_content, minimizing_cover, packing_construct, CompactMask,
};
use qcdist::{Exec, GridField, GridSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn run(id: &str, title: &str, limit: Duration, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let pass = out.pass && in_time;
    println!(
        "[{}] {id} {title}: {} (runtime {:.1}s, limit {}s{})",
        if pass { "PASS" } else { "FAIL" },
        out.detail,
        elapsed.as_secs_f64(),
        limit.as_secs(),
        if in_time { "" } else { ", over limit" }
    );
    pass
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

fn ac1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    let mut ok = true;
    for k in [1.0, 1.3, 2.0, 7.5, 100.0] {
        ok &= rel(tau(2.0, k).unwrap(), 2.0) <= 1e-12;
        ok &= tau(0.0, k).unwrap() == 0.0;
        ok &= rel(tau(2.0 / (k + 1.0), k).unwrap(), 1.0) <= 1e-12;
    }
    for _ in 0..100_000 {
        let t = rng.gen_range(0.0..=2.0);
        let k1 = 1.0 + rng.gen_range(0.0..10.0f64).powi(2);
        let k2 = 1.0 + rng.gen_range(0.0..10.0f64).powi(2);
        let a = tau(tau(t, k1).unwrap(), k2).unwrap();
        let b = tau(t, k1 * k2).unwrap();
        let e = if b == 0.0 { a.abs() } else { rel(a, b) };
        worst = worst.max(e);
    }
    ok &= worst <= 1e-12;
    Outcome {
        pass: ok,
        detail: format!("fixed points exact, composition max rel err {worst:.2e} over 1e5 triples (tol 1e-12)"),
    }
}

fn check_against_covers(mask: &CompactMask, t: f64, covers: &[Vec<qcdist::dyadic::DyadicCube>]) -> bool {
    let best = covers.iter().map(|c| cover_cost(c, t)).fold(f64::INFINITY, f64::min);
    let content = dyadic_content(mask, t).unwrap();
    let cover = minimizing_cover(mask, t).unwrap();
    rel(content, best) <= 1e-12
        && rel(cover_cost(&cover, t), best) <= 1e-12
        && is_admissible_cover(mask, &cover)
}

fn ac2() -> Outcome {
    let ts = [0.5, 1.0, 1.5];
    let mut checked = 0usize;
    let mut failures = 0usize;
    // Every mask at levels 1 and 2, against the full list of covers.
    for level in 1..=2u32 {
        let w = 1u32 << level;
        let cells = (w * w) as usize;
        for bits in 0u32..(1 << cells) {
            let mask = CompactMask::from_cells(
                level,
                (0..cells).filter(|i| bits >> i & 1 == 1).map(|i| [i as u32 % w, i as u32 / w]),
            )
            .unwrap();
            let covers = all_covers(&mask);
            for t in ts {
                checked += 1;
                if !check_against_covers(&mask, t, &covers) {
                    failures += 1;
                }
            }
        }
    }
    // Random masks at levels 3..6: explicit cover lists where they are small
    // enough, otherwise the top-down recursion over pixel lists.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut enumerated = 0usize;
    for level in 3..=6u32 {
        for _ in 0..150 {
            let mask = random_mask(&mut rng, level);
            let explicit = cover_count(&mask) <= 200_000;
            let covers = if explicit { all_covers(&mask) } else { Vec::new() };
            if explicit {
                enumerated += 1;
            }
            for t in ts {
                checked += 1;
                let ok = if explicit {
                    check_against_covers(&mask, t, &covers)
                } else {
                    let best = topdown_content(&mask, t);
                    let cover = minimizing_cover(&mask, t).unwrap();
                    rel(dyadic_content(&mask, t).unwrap(), best) <= 1e-12
                        && rel(cover_cost(&cover, t), best) <= 1e-12
                        && is_admissible_cover(&mask, &cover)
                };
                if !ok {
                    failures += 1;
                }
            }
        }
    }
    Outcome {
        pass: failures == 0,
        detail: format!(
            "{checked} (mask, t) cases, {failures} mismatches; all 65,552 masks at levels 1-2 \
             and {enumerated} random masks at levels 3-6 checked against explicit cover lists"
        ),
    }
}

fn ac3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ts = [0.3, 0.7, 1.0, 1.3, 1.7];
    let mut cases = 0;
    let mut violations = [0usize; 4];
    let mut disagreements = 0usize;
    for _ in 0..200 {
        let level = rng.gen_range(1..=10);
        let mask = random_mask(&mut rng, level);
        let pix = pixels(&mask);
        for t in ts {
            let content = topdown_content(&mask, t);
            for m in 0..=2u32 {
                cases += 1;
                let eps = 1e-6;
                let fam = packing_construct(&mask, t, eps, m).unwrap();
                let cubes = fam.cubes();
                let spread = 2f64.powi(m as i32);
                // (a) closed 2^m-dilates pairwise disjoint.
                let boxes: Vec<[f64; 4]> = cubes
                    .iter()
                    .map(|c| {
                        let [cx, cy] = c.center();
                        let r = 0.5 * spread * c.side();
                        [cx - r, cy - r, cx + r, cy + r]
                    })
                    .collect();
                let mut order: Vec<usize> = (0..boxes.len()).collect();
                order.sort_by(|&i, &j| boxes[i][0].partial_cmp(&boxes[j][0]).unwrap());
                let mut a_ok = true;
                for (p, &i) in order.iter().enumerate() {
                    for &j in &order[p + 1..] {
                        if boxes[j][0] > boxes[i][2] {
                            break;
                        }
                        if boxes[j][1] <= boxes[i][3] && boxes[i][1] <= boxes[j][3] {
                            a_ok = false;
                        }
                    }
                }
                // (b) every pixel inside some 3·2^m-dilate.
                let px = 1.0 / mask.width() as f64;
                let big: Vec<[f64; 4]> = cubes
                    .iter()
                    .map(|c| {
                        let [cx, cy] = c.center();
                        let r = 1.5 * spread * c.side();
                        [cx - r, cy - r, cx + r, cy + r]
                    })
                    .collect();
                let g = 64.0;
                let mut buckets: std::collections::HashMap<(i64, i64), Vec<usize>> = Default::default();
                for (i, b) in big.iter().enumerate() {
                    let (x0, y0) = ((b[0] * g).floor() as i64, (b[1] * g).floor() as i64);
                    let (x1, y1) = ((b[2] * g).floor() as i64, (b[3] * g).floor() as i64);
                    for x in x0.max(-1)..=x1.min(64) {
                        for y in y0.max(-1)..=y1.min(64) {
                            buckets.entry((x, y)).or_default().push(i);
                        }
                    }
                }
                let b_ok = pix.iter().all(|p| {
                    let (x0, y0) = (p[0] as f64 * px, p[1] as f64 * px);
                    let key = ((x0 * g).floor() as i64, (y0 * g).floor() as i64);
                    buckets.get(&key).is_some_and(|ids| {
                        ids.iter().any(|&i| {
                            let b = big[i];
                            b[0] <= x0 && b[1] <= y0 && x0 + px <= b[2] && y0 + px <= b[3]
                        })
                    })
                });
                // (c) packing norm from a full scan of dyadic cubes.
                let c_ok = brute_pack_norm(cubes, t) <= 1.0 + 1e-12;
                // (d) mass bound against the independently computed content.
                let mass: f64 = cubes.iter().map(|c| c.side().powf(t)).sum();
                let d_ok = mass <= 9.0 * 2f64.powf((m as f64 + 1.0) * t) * (content + eps);
                let lib = check_construction(&mask, &fam, content, eps);
                for (k, ok) in [a_ok, b_ok, c_ok, d_ok].into_iter().enumerate() {
                    if !ok {
                        violations[k] += 1;
                    }
                }
                if lib.all() != (a_ok && b_ok && c_ok && d_ok) {
                    disagreements += 1;
                }
            }
        }
    }
    let total: usize = violations.iter().sum();
    Outcome {
        pass: total == 0 && disagreements == 0,
        detail: format!(
            "{cases} constructions; violations (a) {} (b) {} (c) {} (d) {}; \
             library self-check disagreements {disagreements}",
            violations[0], violations[1], violations[2], violations[3]
        ),
    }
}

fn ac4() -> Outcome {
    let mut worst_iso: f64 = 0.0;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for n in [64, 256, 1024] {
        let spec = GridSpec::origin_centered(n).unwrap();
        let data: Vec<Complex64> = (0..spec.len())
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let f = GridField::new(spec, data).unwrap();
        let mean = f.mean();
        let f = f.map(|z| z - mean);
        let s = beurling_apply(&f);
        worst_iso = worst_iso.max(rel(s.l2_norm(), f.l2_norm()));
    }

    let r = 0.25;
    let spec = GridSpec::origin_centered(1024).unwrap();
    let disk = GridField::from_fn(spec, |z| {
        Complex64::new(if z.norm() < r { 1.0 } else { 0.0 }, 0.0)
    })
    .unwrap();
    let s = beurling_apply(&disk);
    let mut probes = Vec::new();
    for k in 0..10 {
        let a = 0.7 + 0.61 * k as f64;
        probes.push(Complex64::from_polar(0.02 + 0.017 * k as f64, a));
        probes.push(Complex64::from_polar(0.3 + 0.011 * k as f64, a + 0.3));
    }
    let mut worst_pv: f64 = 0.0;
    for z in &probes {
        let want = disk_beurling_quadrature(*z, r);
        let got = s.interpolate([z.re, z.im]);
        // Relative to the field's natural scale: |S χ_D| <= 1.
        worst_pv = worst_pv.max((got - want).norm() / want.norm().max(1.0));
    }
    Outcome {
        pass: worst_iso <= 1e-12 && worst_pv <= 1e-2,
        detail: format!(
            "isometry rel err {worst_iso:.2e} (tol 1e-12); disk p.v. quadrature max err {worst_pv:.2e} \
             at 20 probes, n=1024 (tol 1e-2)"
        ),
    }
}

/// Families constructed from random level-3 masks, which stay above the
/// raster floor at n = 512.
fn testbed(count: usize, t: f64, seed: u64) -> Vec<qcdist::packing::PackingFamily> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let k = rng.gen_range(1..=10);
            let cells: Vec<[u32; 2]> = (0..k).map(|_| [rng.gen_range(0..8), rng.gen_range(0..8)]).collect();
            let mask = CompactMask::from_cells(3, cells).unwrap();
            packing_construct(&mask, t, 1e-6, 2).unwrap()
        })
        .collect()
}

fn ac5() -> Outcome {
    let spec = GridSpec::unit_centered(512).unwrap();
    let opts = NormOptions::default();
    let mut est = Vec::new();
    let mut errors = 0;
    for fam in testbed(50, 1.0, 5) {
        match weighted_norm_estimate_with(&fam, 1.0, spec, &opts) {
            Ok(r) => est.push(r.estimate),
            Err(_) => errors += 1,
        }
    }
    let med = median(&est);
    let max = est.iter().cloned().fold(0.0, f64::max);
    let stable = errors == 0 && max <= 3.0 * med;

    let mut sweep = Vec::new();
    for (i, t) in [0.5, 1.0, 1.5].into_iter().enumerate() {
        let mut m: f64 = 0.0;
        for fam in testbed(12, t, 50 + i as u64) {
            match weighted_norm_estimate_with(&fam, t, spec, &opts) {
                Ok(r) => m = m.max(r.estimate),
                Err(_) => errors += 1,
            }
        }
        sweep.push(m);
    }
    let monotone = sweep.windows(2).all(|w| w[1] >= 0.95 * w[0]);
    Outcome {
        pass: stable && monotone && errors == 0,
        detail: format!(
            "t=1: 50 estimates, median {med:.5}, max {max:.5} (<= 3x median: {stable}); \
             t-sweep max at t=0.5,1,1.5: {:.5}, {:.5}, {:.5} (non-decreasing within 5%: {monotone}); \
             failures {errors}",
            sweep[0], sweep[1], sweep[2]
        ),
    }
}

fn ac6() -> Outcome {
    let k = 1.5;
    let kappa = kappa_from_k(k);
    let r = 0.25;
    let spec = GridSpec::origin_centered(1024).unwrap();
    let mu = BeltramiCoefficient::from_fn(
        spec,
        move |z| if z.norm() == 0.0 { Complex64::new(0.0, 0.0) } else { -kappa * z / z.conj() },
        move |z| z.norm() < r,
    )
    .unwrap();
    let sol = solve_principal(&mu, 400, 1e-12).unwrap();
    let mut sup: f64 = 0.0;
    for iy in 0..spec.n {
        for ix in 0..spec.n {
            let z = spec.z(ix, iy);
            let a = z.norm();
            if a > 0.05 && a < 0.2 {
                sup = sup.max((sol.f.at(ix, iy) - radial_stretch(z, k, r)).norm());
            }
        }
    }
    let decay = sol.max_decay_ratio();

    let zero = solve_principal(&BeltramiCoefficient::zero(spec), 10, 1e-12).unwrap();
    let mut id_err: f64 = 0.0;
    for iy in 0..spec.n {
        for ix in 0..spec.n {
            id_err = id_err.max((zero.f.at(ix, iy) - spec.z(ix, iy)).norm());
        }
    }
    Outcome {
        pass: sup <= 1e-2 && id_err <= 1e-15 && decay <= kappa + 1e-6,
        detail: format!(
            "radial stretch K=1.5 sup err {sup:.2e} on 0.05<|z|<0.2 (tol 1e-2); identity err {id_err:.1e}; \
             term ratio max {decay:.6} vs kappa {kappa:.6}; {} terms",
            sol.terms
        ),
    }
}

fn ac7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let phases = [MuPhase::Constant, MuPhase::Radial, MuPhase::Random];
    let mut ratios = Vec::new();
    let mut chain_ok = 0;
    let mut failures = Vec::new();
    for i in 0..20 {
        let kappa = [0.05, 0.1, 0.15][i % 3];
        let k = (1.0 + kappa) / (1.0 - kappa);
        let cells: Vec<[u32; 2]> = (0..rng.gen_range(1..=8))
            .map(|_| [rng.gen_range(0..8), rng.gen_range(0..8)])
            .collect();
        let mask = CompactMask::from_cells(3, cells).unwrap();
        let cfg = ExperimentConfig {
            k,
            phase: phases[i % 3],
            seed: 100 + i as u64,
            ..ExperimentConfig::default()
        };
        match conformal_outside_experiment(&mask, &cfg) {
            Ok(rep) => {
                let v = &rep.verdicts;
                if v["I3_le_I1"] && v["beurling_identity"] && v["diam_ratio_finite"] {
                    chain_ok += 1;
                } else {
                    failures.push(i);
                }
                ratios.push(rep.measured["diam_ratio"]);
            }
            Err(e) => failures.push(i + 1000 * (e.is_numerical() as usize)),
        }
    }
    let med = median(&ratios);
    let max = ratios.iter().cloned().fold(0.0, f64::max);
    let uniform = max <= 3.0 * med;
    Outcome {
        pass: chain_ok == 20 && uniform,
        detail: format!(
            "{chain_ok}/20 instances with I3<=I1, fz=1+S(fzbar) and finite ratio; diameter ratio \
             median {med:.4}, max {max:.4} (<= 3x median: {uniform}){}",
            if failures.is_empty() { String::new() } else { format!("; failed instances {failures:?}") }
        ),
    }
}

fn ac8() -> Outcome {
    let cfg = ContentConfig {
        base: ExperimentConfig {
            t: 1.0,
            k: 1.1,
            n: 1024,
            ..ExperimentConfig::default()
        },
        ..ContentConfig::default()
    };
    let gens = [4, 5, 6, 7, 8];
    let sweep = match content_sweep(0.25, &gens, 12, &cfg, Exec::default()) {
        Ok(s) => s,
        Err(e) => {
            return Outcome {
                pass: false,
                detail: format!("sweep failed: {e}"),
            }
        }
    };
    let source_to_zero = sweep.source.windows(2).all(|w| w[1] < w[0]);
    let image_decreasing = sweep.image.windows(2).all(|w| w[1] < w[0]);
    let fit_ok = rel(sweep.fitted_exponent, sweep.predicted_exponent) <= 0.25;
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(", ");
    let informative = {
        let alt = content_sweep(0.2, &gens, 12, &cfg, Exec::default());
        match alt {
            Ok(s) => format!(
                " [r=0.2 for comparison, not scored: source {}; image {}; fitted exponent {:.3}]",
                fmt(&s.source),
                fmt(&s.image),
                s.fitted_exponent
            ),
            Err(e) => format!(" [r=0.2 comparison failed: {e}]"),
        }
    };
    Outcome {
        pass: source_to_zero && image_decreasing && fit_ok,
        detail: format!(
            "g=4..8, r=1/4: source content {} (decreasing: {source_to_zero}); image content {} \
             (decreasing: {image_decreasing}); fitted exponent {:.4} vs t'/(tK) = {:.4} (within 25%: {fit_ok}){informative}",
            fmt(&sweep.source),
            fmt(&sweep.image),
            sweep.fitted_exponent,
            sweep.predicted_exponent
        ),
    }
}

fn main() {
    let secs = Duration::from_secs;
    let results = [
        run("AC1", "tau algebra", secs(1), ac1),
        run("AC2", "dyadic content vs exhaustive covers", secs(60), ac2),
        run("AC3", "packing construction predicates", secs(300), ac3),
        run("AC4", "discrete Beurling transform", secs(30), ac4),
        run("AC5", "weighted norm stability", secs(600), ac5),
        run("AC6", "Beltrami solver oracle", secs(120), ac6),
        run("AC7", "proof-chain inequalities", secs(900), ac7),
        run("AC8", "content distortion trend", secs(1200), ac8),
    ];
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
