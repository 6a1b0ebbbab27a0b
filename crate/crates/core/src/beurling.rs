//! Beurling and Cauchy transforms on the torus, their compression to a
//! packing family, and the combinatorial operator `S_Q` with the weighted
//! maximal function `M_t`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicCube, MeshGrid};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{GridField, GridSpec};
use crate::packing::{t_pack_norm, PackingFamily};
use crate::spectral::{Multiplier, Spectral};

pub use crate::field::RASTER_FLOOR;

const NORM_SLACK: f64 = 1e-12;

pub fn beurling_apply(f: &GridField) -> GridField {
    Spectral::new(f.spec()).apply(f, Multiplier::Beurling)
}

/// The multiplier `ξ / conj(ξ)`: adjoint of the Beurling transform and its
/// inverse on mean-zero fields.
pub fn beurling_adjoint_apply(f: &GridField) -> GridField {
    Spectral::new(f.spec()).apply(f, Multiplier::BeurlingAdjoint)
}

/// Mean-zero solution `u` of `∂_{z̄} u = g - mean(g)`.
pub fn cauchy_apply(g: &GridField) -> GridField {
    Spectral::new(g.spec()).apply(g, Multiplier::Cauchy)
}

pub fn dbar_apply(f: &GridField) -> GridField {
    Spectral::new(f.spec()).apply(f, Multiplier::Dbar)
}

pub fn dz_apply(f: &GridField) -> GridField {
    Spectral::new(f.spec()).apply(f, Multiplier::Dz)
}

/// `χ_{P̄} S (χ_{P̄} f)` for the union `P̄` of the family cubes.
pub fn compressed_apply(f: &GridField, family: &PackingFamily) -> Result<GridField> {
    let spec = f.spec();
    spec.check_cubes(family.cubes())?;
    if family.is_empty() {
        return Ok(GridField::zeros(spec));
    }
    let chi = spec.rasterize(family.cubes(), |_| 1.0);
    let mut data = f.scaled_by(&chi).into_data();
    let sp = Spectral::new(spec);
    sp.apply_in_place(&mut data, Multiplier::Beurling);
    for (v, c) in data.iter_mut().zip(&chi) {
        *v *= *c;
    }
    Ok(GridField::new_unchecked(spec, data))
}

/// The packing weight `Σ ℓ(P)^{t-2} χ_P` sampled at cell centers.
pub fn raster_weight(spec: &GridSpec, family: &PackingFamily, t: f64) -> Vec<f64> {
    spec.rasterize(family.cubes(), |c| c.side().powf(t - 2.0))
}

/// Settings for [`weighted_norm_estimate_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormOptions {
    pub tol: f64,
    pub max_iterations: usize,
    pub seed: u64,
    pub exec: Exec,
}

impl Default for NormOptions {
    fn default() -> Self {
        NormOptions {
            tol: 1e-5,
            max_iterations: 500,
            seed: 0x5eed,
            exec: Exec::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedNormReport {
    pub estimate: f64,
    pub iterations: usize,
    /// Relative change of the Rayleigh quotient in the last iteration.
    pub residual: f64,
    pub tol: f64,
    pub t: f64,
    pub n: usize,
    pub cubes: usize,
    pub packing_norm: f64,
}

/// The weighted compression `√w χ S χ (1/√w)` and its adjoint, acting on
/// samples supported in `P̄`. Its `L^2(dx)` norm equals the norm of
/// `χ S χ` on `L^2(w)`.
pub struct WeightedCompression {
    spectral: Spectral,
    root: Vec<f64>,
    inv_root: Vec<f64>,
}

impl WeightedCompression {
    pub fn new(spec: GridSpec, family: &PackingFamily, t: f64, exec: Exec) -> Result<Self> {
        spec.check_cubes(family.cubes())?;
        let w = raster_weight(&spec, family, t);
        let root: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
        let inv_root = root
            .iter()
            .map(|&r| if r > 0.0 { 1.0 / r } else { 0.0 })
            .collect();
        Ok(WeightedCompression {
            spectral: Spectral::with_exec(spec, exec),
            root,
            inv_root,
        })
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.root
            .iter()
            .enumerate()
            .filter(|(_, r)| **r > 0.0)
            .map(|(i, _)| i)
    }

    fn sandwich(&self, v: &[Complex64], pre: &[f64], post: &[f64], m: Multiplier) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = v.iter().zip(pre).map(|(z, a)| z * a).collect();
        self.spectral.apply_in_place(&mut data, m);
        for (z, a) in data.iter_mut().zip(post) {
            *z *= *a;
        }
        data
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.sandwich(v, &self.inv_root, &self.root, Multiplier::Beurling)
    }

    pub fn apply_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.sandwich(v, &self.root, &self.inv_root, Multiplier::BeurlingAdjoint)
    }
}

fn norm_sq(exec: Exec, v: &[Complex64]) -> f64 {
    exec.sum_range(v.len(), |i| v[i].norm_sqr())
}

/// Operator norm of `χ_{P̄} S χ_{P̄}` on `L^2(w_{t,P})`, on the torus
/// `[-1/2, 3/2)^2` with `n^2` samples.
pub fn weighted_norm_estimate(
    family: &PackingFamily,
    t: f64,
    n: usize,
    tol: f64,
) -> Result<WeightedNormReport> {
    let opts = NormOptions {
        tol,
        ..NormOptions::default()
    };
    weighted_norm_estimate_with(family, t, GridSpec::unit_centered(n)?, &opts)
}

pub fn weighted_norm_estimate_with(
    family: &PackingFamily,
    t: f64,
    spec: GridSpec,
    opts: &NormOptions,
) -> Result<WeightedNormReport> {
    if !(t > 0.0 && t < 2.0) {
        return Err(Error::param(format!("t must lie in (0, 2), got {t}")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::param("tolerance must be positive"));
    }
    if !family.dilates_disjoint(3.0) {
        return Err(Error::param("family triples 3P must be pairwise disjoint"));
    }
    let packing_norm = t_pack_norm(family.cubes(), t);
    if packing_norm > 1.0 + NORM_SLACK {
        return Err(Error::param(format!(
            "packing norm must be <= 1, got {packing_norm}"
        )));
    }
    let mut report = WeightedNormReport {
        estimate: 0.0,
        iterations: 0,
        residual: 0.0,
        tol: opts.tol,
        t,
        n: spec.n,
        cubes: family.len(),
        packing_norm,
    };
    if family.is_empty() {
        return Ok(report);
    }
    let op = WeightedCompression::new(spec, family, t, opts.exec)?;
    let exec = opts.exec;

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut v = vec![Complex64::new(0.0, 0.0); spec.len()];
    for i in op.support() {
        v[i] = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    }
    let scale = norm_sq(exec, &v).sqrt();
    v.iter_mut().for_each(|z| *z /= scale);

    let mut lambda = 0.0;
    for it in 1..=opts.max_iterations {
        let u = op.apply(&v);
        let next = norm_sq(exec, &u);
        let x = op.apply_adjoint(&u);
        let xn = norm_sq(exec, &x).sqrt();
        let change = if next > 0.0 {
            (next - lambda).abs() / next
        } else {
            0.0
        };
        lambda = next;
        report.iterations = it;
        report.residual = change;
        report.estimate = lambda.sqrt();
        if xn == 0.0 || change < opts.tol {
            return Ok(report);
        }
        v = x.into_iter().map(|z| z / xn).collect();
    }
    Err(Error::NonConvergence {
        what: format!(
            "weighted norm power iteration (last estimate {:.6})",
            report.estimate
        ),
        iterations: report.iterations,
        residual: report.residual,
    })
}

/// Scales `j` of mesh cubes resolved by the grid: `4h <= 2^j <= L`.
pub fn mesh_scales(spec: &GridSpec) -> std::ops::RangeInclusive<i32> {
    let lo = (RASTER_FLOOR * spec.spacing()).log2().ceil() as i32;
    let hi = spec.side.log2().floor() as i32;
    lo..=hi
}

/// The non-local members of one mesh grid at one scale, ordered by index.
pub fn nonlocal_cubes(family: &[DyadicCube], grid: MeshGrid, j: i32) -> Vec<[i64; 2]> {
    let mut count: BTreeMap<[i64; 2], u32> = BTreeMap::new();
    for p in family {
        let [[a0, a1], [b0, b1]] = grid.cubes_meeting(j, p.bounds());
        for a in a0..=a1 {
            for b in b0..=b1 {
                *count.entry([a, b]).or_insert(0) += 1;
            }
        }
    }
    count
        .into_iter()
        .filter(|(_, c)| *c >= 2)
        .map(|(k, _)| k)
        .collect()
}

/// Inclusive prefix sums with a zero border: `(n+1)^2` entries.
fn summed_area<T>(n: usize, values: &[T]) -> Vec<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let m = n + 1;
    let mut s = vec![T::default(); m * m];
    for iy in 0..n {
        let mut row = T::default();
        for ix in 0..n {
            row = row + values[iy * n + ix];
            s[(iy + 1) * m + ix + 1] = s[iy * m + ix + 1] + row;
        }
    }
    s
}

fn rect_sum<T>(s: &[T], n: usize, r: [usize; 4]) -> T
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let m = n + 1;
    let [x0, x1, y0, y1] = r;
    s[y1 * m + x1] - s[y0 * m + x1] - s[y1 * m + x0] + s[y0 * m + x0]
}

fn mesh_rects(spec: &GridSpec, family: &PackingFamily, grid: MeshGrid) -> Vec<(f64, [usize; 4])> {
    let mut out = Vec::new();
    for j in mesh_scales(spec) {
        for k in nonlocal_cubes(family.cubes(), grid, j) {
            let q = grid.cube(j, k).square();
            let r = spec.cell_range(q.bounds());
            if r[0] < r[1] && r[2] < r[3] {
                out.push((q.side, r));
            }
        }
    }
    out
}

/// `S_Q f = Σ_Q χ_Q ℓ(Q)^{-2} ∫_Q f` over the non-local cubes `Q` of one
/// mesh grid, at the scales resolved by the grid.
pub fn sq_apply(f: &GridField, family: &PackingFamily, grid: MeshGrid) -> Result<GridField> {
    let spec = f.spec();
    spec.check_cubes(family.cubes())?;
    let n = spec.n;
    let h2 = spec.spacing() * spec.spacing();
    let sat = summed_area(n, f.data());
    // Two-dimensional difference array, one extra row and column.
    let m = n + 1;
    let mut diff = vec![Complex64::new(0.0, 0.0); m * m];
    for (side, r) in mesh_rects(&spec, family, grid) {
        let v = rect_sum(&sat, n, r) * (h2 / (side * side));
        let [x0, x1, y0, y1] = r;
        diff[y0 * m + x0] += v;
        diff[y0 * m + x1] -= v;
        diff[y1 * m + x0] -= v;
        diff[y1 * m + x1] += v;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); n * n];
    let mut above = vec![Complex64::new(0.0, 0.0); n];
    for iy in 0..n {
        let mut row = Complex64::new(0.0, 0.0);
        for ix in 0..n {
            row += diff[iy * m + ix];
            above[ix] += row;
            out[iy * n + ix] = above[ix];
        }
    }
    Ok(GridField::new_unchecked(spec, out))
}

/// `sup_{Q ∋ x} w(Q)^{-1} ∫_Q g w` over non-local cubes of one mesh grid,
/// using the real part of `g`. Points in no non-local cube of positive
/// weight get 0.
pub fn maximal_mt(g: &GridField, family: &PackingFamily, t: f64, grid: MeshGrid) -> Result<Vec<f64>> {
    let spec = g.spec();
    spec.check_cubes(family.cubes())?;
    let n = spec.n;
    let w = raster_weight(&spec, family, t);
    let gw: Vec<f64> = g.data().iter().zip(&w).map(|(z, w)| z.re * w).collect();
    let sat_w = summed_area(n, &w);
    let sat_gw = summed_area(n, &gw);
    let mut out = vec![0.0f64; n * n];
    let mut defined = vec![false; n * n];
    for (_, r) in mesh_rects(&spec, family, grid) {
        let wq = rect_sum(&sat_w, n, r);
        if wq <= 0.0 {
            continue;
        }
        let avg = rect_sum(&sat_gw, n, r) / wq;
        let [x0, x1, y0, y1] = r;
        for iy in y0..y1 {
            for ix in x0..x1 {
                let i = iy * n + ix;
                if !defined[i] || avg > out[i] {
                    out[i] = avg;
                    defined[i] = true;
                }
            }
        }
    }
    Ok(out)
}

/// One level of the weak-type check `λ w({M_t g > λ}) <= ||g||_{L^1(w)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakTypeSample {
    pub lambda: f64,
    pub level_set_weight: f64,
    pub l1_norm: f64,
}

impl WeakTypeSample {
    pub fn holds(&self) -> bool {
        self.lambda * self.level_set_weight <= self.l1_norm * (1.0 + 1e-12)
    }
}

pub fn weak_type_report(
    g: &GridField,
    family: &PackingFamily,
    t: f64,
    grid: MeshGrid,
    lambdas: &[f64],
) -> Result<Vec<WeakTypeSample>> {
    let spec = g.spec();
    let mt = maximal_mt(g, family, t, grid)?;
    let w = raster_weight(&spec, family, t);
    let h2 = spec.spacing() * spec.spacing();
    let l1: f64 = g.data().iter().zip(&w).map(|(z, w)| z.norm() * w).sum::<f64>() * h2;
    Ok(lambdas
        .iter()
        .map(|&lambda| {
            let level: f64 = mt
                .iter()
                .zip(&w)
                .filter(|(m, _)| **m > lambda)
                .map(|(_, w)| *w)
                .sum::<f64>()
                * h2;
            WeakTypeSample {
                lambda,
                level_set_weight: level,
                l1_norm: l1,
            }
        })
        .collect())
}
