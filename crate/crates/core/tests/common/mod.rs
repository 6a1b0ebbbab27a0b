//! Independent reference computations shared by the integration and
//! acceptance tests. None of these call into the code paths they check.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;
use qcdist::dyadic::DyadicCube;
use qcdist::field::GridSpec;
use qcdist::packing::{CompactMask, PackingFamily};
use qcdist::GridField;
use rand::Rng;

pub fn side(level: i32) -> f64 {
    2f64.powi(-level)
}

/// A random mask in one of a few shapes: scattered pixels, a union of
/// rectangles, or a dense random fill.
pub fn random_mask<R: Rng>(rng: &mut R, level: u32) -> CompactMask {
    let w = 1u32 << level;
    let mut cells = Vec::new();
    match rng.gen_range(0..3) {
        0 => {
            let k = rng.gen_range(1..=(w * w).min(12));
            for _ in 0..k {
                cells.push([rng.gen_range(0..w), rng.gen_range(0..w)]);
            }
        }
        1 => {
            for _ in 0..rng.gen_range(1..4) {
                let x0 = rng.gen_range(0..w);
                let y0 = rng.gen_range(0..w);
                let x1 = rng.gen_range(x0..w.min(x0 + w / 4 + 1));
                let y1 = rng.gen_range(y0..w.min(y0 + w / 4 + 1));
                for x in x0..=x1 {
                    for y in y0..=y1 {
                        cells.push([x, y]);
                    }
                }
            }
        }
        _ => {
            // Dense random fill of a box of at most 64 x 64 pixels.
            let p: f64 = rng.gen_range(0.05..0.6);
            let bw = w.min(64);
            let (ox, oy) = (rng.gen_range(0..=w - bw), rng.gen_range(0..=w - bw));
            for x in 0..bw {
                for y in 0..bw {
                    if rng.gen_bool(p) {
                        cells.push([ox + x, oy + y]);
                    }
                }
            }
            if cells.is_empty() {
                cells.push([ox, oy]);
            }
        }
    }
    CompactMask::from_cells(level, cells).unwrap()
}

pub fn pixels(mask: &CompactMask) -> Vec<[u32; 2]> {
    let w = mask.width();
    let mut out = Vec::new();
    for y in 0..w {
        for x in 0..w {
            if mask.contains(x, y) {
                out.push([x, y]);
            }
        }
    }
    out
}

fn split(q: (i32, i64, i64), level: u32, pix: &[[u32; 2]]) -> Vec<((i32, i64, i64), Vec<[u32; 2]>)> {
    let (l, x, y) = q;
    let shift = level as i32 - (l + 1);
    let mut out = Vec::new();
    for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
        let c = (l + 1, 2 * x + dx, 2 * y + dy);
        let sub: Vec<[u32; 2]> = pix
            .iter()
            .filter(|p| ((p[0] >> shift) as i64, (p[1] >> shift) as i64) == (c.1, c.2))
            .copied()
            .collect();
        out.push((c, sub));
    }
    out
}

/// Number of admissible covers (cubes of side between the pixel size and
/// 1, disjoint interiors, each meeting the set), saturating.
pub fn cover_count(mask: &CompactMask) -> u128 {
    fn rec(q: (i32, i64, i64), level: u32, pix: &[[u32; 2]]) -> u128 {
        if pix.is_empty() {
            return 1;
        }
        if q.0 == level as i32 {
            return 1;
        }
        let mut prod: u128 = 1;
        for (c, sub) in split(q, level, pix) {
            prod = prod.saturating_mul(rec(c, level, &sub));
        }
        prod.saturating_add(1)
    }
    rec((0, 0, 0), mask.level(), &pixels(mask))
}

/// Every admissible cover, listed explicitly.
pub fn all_covers(mask: &CompactMask) -> Vec<Vec<DyadicCube>> {
    fn rec(q: (i32, i64, i64), level: u32, pix: &[[u32; 2]]) -> Vec<Vec<DyadicCube>> {
        if pix.is_empty() {
            return vec![vec![]];
        }
        let me = vec![DyadicCube::new(q.0, q.1, q.2)];
        if q.0 == level as i32 {
            return vec![me];
        }
        let mut acc: Vec<Vec<DyadicCube>> = vec![vec![]];
        for (c, sub) in split(q, level, pix) {
            let options = rec(c, level, &sub);
            let mut next = Vec::with_capacity(acc.len() * options.len());
            for a in &acc {
                for o in &options {
                    let mut v = a.clone();
                    v.extend_from_slice(o);
                    next.push(v);
                }
            }
            acc = next;
        }
        acc.push(me);
        acc
    }
    rec((0, 0, 0), mask.level(), &pixels(mask))
}

/// Checks directly that `cover` is admissible for `mask`.
pub fn is_admissible_cover(mask: &CompactMask, cover: &[DyadicCube]) -> bool {
    let m = mask.level() as i32;
    let inside = |c: &DyadicCube, p: &[u32; 2]| {
        let s = m - c.level;
        s >= 0 && ((p[0] >> s) as i64, (p[1] >> s) as i64) == (c.ix, c.iy)
    };
    let pix = pixels(mask);
    let sizes_ok = cover.iter().all(|c| (0..=m).contains(&c.level));
    let meets = cover.iter().all(|c| pix.iter().any(|p| inside(c, p)));
    let covers = pix.iter().all(|p| cover.iter().filter(|c| inside(c, p)).count() == 1);
    let disjoint = cover.iter().enumerate().all(|(i, a)| {
        cover[i + 1..].iter().all(|b| {
            let (lo, hi) = if a.level <= b.level { (a, b) } else { (b, a) };
            let s = hi.level - lo.level;
            (hi.ix >> s, hi.iy >> s) != (lo.ix, lo.iy)
        })
    });
    sizes_ok && meets && covers && disjoint
}

pub fn cover_cost(cover: &[DyadicCube], t: f64) -> f64 {
    cover.iter().map(|c| side(c.level).powf(t)).sum()
}

/// Minimum cost by top-down recursion over explicit pixel lists.
pub fn topdown_content(mask: &CompactMask, t: f64) -> f64 {
    fn rec(q: (i32, i64, i64), level: u32, pix: &[[u32; 2]], t: f64) -> f64 {
        if pix.is_empty() {
            return 0.0;
        }
        let own = side(q.0).powf(t);
        if q.0 == level as i32 {
            return own;
        }
        let kids: f64 = split(q, level, pix)
            .iter()
            .map(|(c, sub)| rec(*c, level, sub, t))
            .sum();
        own.min(kids)
    }
    rec((0, 0, 0), mask.level(), &pixels(mask), t)
}

/// Packing norm by scanning every dyadic cube from level 0 to the finest
/// family level that contains a family cube.
pub fn brute_pack_norm(cubes: &[DyadicCube], t: f64) -> f64 {
    let finest = cubes.iter().map(|c| c.level).max().unwrap_or(0);
    let mut best: f64 = 0.0;
    for level in 0..=finest {
        let mut seen = std::collections::BTreeSet::new();
        for c in cubes.iter().filter(|c| c.level >= level) {
            let s = c.level - level;
            seen.insert((c.ix >> s, c.iy >> s));
        }
        for (x, y) in seen {
            let mass: f64 = cubes
                .iter()
                .filter(|c| c.level >= level && (c.ix >> (c.level - level), c.iy >> (c.level - level)) == (x, y))
                .map(|c| side(c.level).powf(t))
                .sum();
            best = best.max(mass / side(level).powf(t));
        }
    }
    best.powf(1.0 / t)
}

fn simpson<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64, fa: Complex64, fm: Complex64, fb: Complex64, whole: Complex64, tol: f64, depth: u32) -> Complex64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.norm() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

pub fn adaptive_simpson<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, tol: f64) -> Complex64 {
    let (fa, fb) = (f(a), f(b));
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson(&f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Principal value of `-(1/π) ∫_{|w|<r} dA(w) / (z - w)^2` in polar
/// coordinates about `z`: the angular integral of
/// `-(1/π) e^{-2iθ} log(ρ_out(θ) / ρ_in(θ))`.
pub fn disk_beurling_quadrature(z: Complex64, r: f64) -> Complex64 {
    let pi = std::f64::consts::PI;
    let (x, y) = (z.re, z.im);
    let d2 = x * x + y * y;
    let radial = move |theta: f64| -> Option<(f64, f64)> {
        let b = x * theta.cos() + y * theta.sin();
        let disc = b * b - d2 + r * r;
        if disc <= 0.0 {
            return None;
        }
        let s = disc.sqrt();
        Some((-b - s, -b + s))
    };
    if d2 < r * r {
        let f = |theta: f64| {
            let (_, out) = radial(theta).unwrap();
            Complex64::from_polar(1.0, -2.0 * theta) * out.ln()
        };
        -adaptive_simpson(f, 0.0, 2.0 * pi, 1e-12) / pi
    } else {
        // Rays that hit the disk fill the cone of half-angle asin(r/|z|)
        // around the direction of -z.
        let center = (-y).atan2(-x);
        let half = (r / d2.sqrt()).asin();
        let f = |theta: f64| match radial(theta) {
            Some((a, b)) if a > 0.0 => Complex64::from_polar(1.0, -2.0 * theta) * (b / a).ln(),
            _ => Complex64::new(0.0, 0.0),
        };
        -adaptive_simpson(f, center - half, center + half, 1e-12) / pi
    }
}

/// `z |z/r|^{1/K - 1}` inside `|z| < r`, the identity outside.
pub fn radial_stretch(z: Complex64, k: f64, r: f64) -> Complex64 {
    let a = z.norm() / r;
    if a >= 1.0 || a == 0.0 {
        z
    } else {
        z * a.powf(1.0 / k - 1.0)
    }
}

/// Largest singular value of `√w χ S χ (1/√w)` assembled as a dense
/// matrix over the support, column by column from unit impulses.
pub fn dense_weighted_norm(family: &PackingFamily, t: f64, spec: GridSpec) -> f64 {
    let n = spec.n;
    let mut support = Vec::new();
    let mut weight = Vec::new();
    for iy in 0..n {
        for ix in 0..n {
            let [px, py] = spec.point(ix, iy);
            let w: f64 = family
                .cubes()
                .iter()
                .filter(|c| {
                    let [x0, y0, x1, y1] = c.bounds();
                    px >= x0 && px <= x1 && py >= y0 && py <= y1
                })
                .map(|c| c.side().powf(t - 2.0))
                .sum();
            if w > 0.0 {
                support.push(iy * n + ix);
                weight.push(w);
            }
        }
    }
    let k = support.len();
    // S applied to a unit impulse at the origin, by a direct inverse DFT of
    // the multiplier; S is translation invariant on the torus.
    let freq: Vec<f64> = (0..n)
        .map(|j| {
            let j = if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
            2.0 * std::f64::consts::PI * j / spec.side
        })
        .collect();
    let tau = 2.0 * std::f64::consts::PI / n as f64;
    let mut kernel = vec![Complex64::new(0.0, 0.0); n * n];
    for dy in 0..n {
        for dx in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for ky in 0..n {
                for kx in 0..n {
                    let xi = Complex64::new(freq[kx], freq[ky]);
                    if xi.norm() == 0.0 {
                        continue;
                    }
                    let phase = tau * ((kx * dx + ky * dy) % n) as f64;
                    acc += xi.conj() / xi * Complex64::from_polar(1.0, phase);
                }
            }
            kernel[dy * n + dx] = acc / (n * n) as f64;
        }
    }
    let mut mat = DMatrix::<Complex64>::zeros(k, k);
    for (col, &src) in support.iter().enumerate() {
        let (sx, sy) = (src % n, src / n);
        for (row, &dst) in support.iter().enumerate() {
            let (dx, dy) = (dst % n, dst / n);
            let d = ((dy + n - sy) % n) * n + (dx + n - sx) % n;
            mat[(row, col)] = kernel[d] * (weight[row] / weight[col]).sqrt();
        }
    }
    let svd = mat.svd(false, false);
    svd.singular_values.iter().cloned().fold(0.0, f64::max)
}

pub fn field_from(spec: GridSpec, f: impl Fn(Complex64) -> Complex64 + Sync + Send) -> GridField {
    GridField::from_fn(spec, f).unwrap()
}
