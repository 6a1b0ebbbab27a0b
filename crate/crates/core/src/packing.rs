//! Dyadic Hausdorff content, its exact minimizing cover, and the
//! t-Carleson packing families built from it.
//!
//! A compact set is given as a [`CompactMask`]: the union of the closed
//! occupied pixels of the `2^M x 2^M` grid on the unit square. The content
//! is the minimum of `Σ ℓ(Q)^t` over covers by dyadic cubes with
//! `2^-M ≤ ℓ(Q) ≤ 1`, each meeting the set, with pairwise disjoint
//! interiors. It is computed exactly by a bottom-up dynamic program over the
//! occupied part of the quadtree.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dyadic::{dilate, dyadic_side, DyadicCube, Square};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Finest accepted mask resolution. A level-16 bitset is 512 MiB.
pub const MAX_MASK_LEVEL: u32 = 16;

/// Relative slack under which a parent cube and the sum over its children
/// count as a tie; ties go to the parent.
pub const TIE_RTOL: f64 = 1e-12;

/// Occupied pixels of the level-`M` grid on `[0,1]^2`, as a bitset.
#[derive(Clone, PartialEq, Eq)]
pub struct CompactMask {
    level: u32,
    bits: Vec<u64>,
}

impl std::fmt::Debug for CompactMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompactMask")
            .field("level", &self.level)
            .field("occupied", &self.count())
            .finish()
    }
}

#[derive(Serialize, Deserialize)]
struct MaskFile {
    level: u32,
    cells: Vec<[u32; 2]>,
}

impl CompactMask {
    pub fn empty(level: u32) -> Result<Self> {
        if level > MAX_MASK_LEVEL {
            return Err(Error::param(format!(
                "mask level {level} exceeds the maximum of {MAX_MASK_LEVEL}"
            )));
        }
        let cells = 1usize << (2 * level);
        Ok(CompactMask {
            level,
            bits: vec![0; cells.div_ceil(64)],
        })
    }

    pub fn full(level: u32) -> Result<Self> {
        let mut m = Self::empty(level)?;
        let n = m.width();
        for iy in 0..n {
            for ix in 0..n {
                m.insert(ix, iy);
            }
        }
        Ok(m)
    }

    pub fn from_cells(level: u32, cells: impl IntoIterator<Item = [u32; 2]>) -> Result<Self> {
        let mut m = Self::empty(level)?;
        let n = m.width();
        for [ix, iy] in cells {
            if ix >= n || iy >= n {
                return Err(Error::param(format!(
                    "cell ({ix},{iy}) outside the {n}x{n} grid"
                )));
            }
            m.insert(ix, iy);
        }
        Ok(m)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Pixels per side, `2^M`.
    pub fn width(&self) -> u32 {
        1 << self.level
    }

    #[inline]
    fn index(&self, ix: u32, iy: u32) -> usize {
        ((iy as usize) << self.level) | ix as usize
    }

    pub fn insert(&mut self, ix: u32, iy: u32) {
        let i = self.index(ix, iy);
        self.bits[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, ix: u32, iy: u32) -> bool {
        let i = self.index(ix, iy);
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|w| *w == 0)
    }

    /// Occupied pixels in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = [u32; 2]> + '_ {
        let level = self.level;
        let mask = (1usize << level) - 1;
        self.bits.iter().enumerate().flat_map(move |(w, &word)| {
            let mut word = word;
            std::iter::from_fn(move || {
                if word == 0 {
                    return None;
                }
                let b = word.trailing_zeros() as usize;
                word &= word - 1;
                let i = w * 64 + b;
                Some([(i & mask) as u32, (i >> level) as u32])
            })
        })
    }

    /// Occupied pixels as level-`M` dyadic cubes.
    pub fn pixel_cubes(&self) -> impl Iterator<Item = DyadicCube> + '_ {
        let level = self.level as i32;
        self.cells()
            .map(move |[x, y]| DyadicCube::new(level, x as i64, y as i64))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&MaskFile {
            level: self.level,
            cells: self.cells().collect(),
        })?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let f: MaskFile = serde_json::from_str(s)?;
        Self::from_cells(f.level, f.cells)
    }

    /// Reads a square power-of-two grayscale raster. Pixels brighter than
    /// mid-gray are occupied; image row 0 is the top edge (largest `y`).
    pub fn read_png(path: impl AsRef<Path>) -> Result<Self> {
        let img = image::open(path)?.to_luma8();
        let (w, h) = img.dimensions();
        if w != h || !w.is_power_of_two() {
            return Err(Error::Format(format!(
                "mask image must be square with power-of-two side, got {w}x{h}"
            )));
        }
        let level = w.trailing_zeros();
        let mut m = Self::empty(level)?;
        for (x, y, p) in img.enumerate_pixels() {
            if p.0[0] > 127 {
                m.insert(x, h - 1 - y);
            }
        }
        Ok(m)
    }

    pub fn write_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let n = self.width();
        let img = image::GrayImage::from_fn(n, n, |x, y| {
            image::Luma([if self.contains(x, n - 1 - y) { 255 } else { 0 }])
        });
        img.save(path)?;
        Ok(())
    }
}

#[inline]
fn spread_bits(v: u32) -> u64 {
    let mut x = v as u64;
    x = (x | (x << 16)) & 0x0000_ffff_0000_ffff;
    x = (x | (x << 8)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x << 4)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x << 2)) & 0x3333_3333_3333_3333;
    x = (x | (x << 1)) & 0x5555_5555_5555_5555;
    x
}

#[inline]
fn compact_bits(v: u64) -> u32 {
    let mut x = v & 0x5555_5555_5555_5555;
    x = (x | (x >> 1)) & 0x3333_3333_3333_3333;
    x = (x | (x >> 2)) & 0x0f0f_0f0f_0f0f_0f0f;
    x = (x | (x >> 4)) & 0x00ff_00ff_00ff_00ff;
    x = (x | (x >> 8)) & 0x0000_ffff_0000_ffff;
    x = (x | (x >> 16)) & 0x0000_0000_ffff_ffff;
    x as u32
}

/// Z-order code; the four children of code `c` are `4c..4c+3`.
#[inline]
fn morton(ix: u32, iy: u32) -> u64 {
    spread_bits(ix) | (spread_bits(iy) << 1)
}

#[inline]
fn unmorton(code: u64) -> (u32, u32) {
    (compact_bits(code), compact_bits(code >> 1))
}

fn check_t(t: f64, max_inclusive: bool) -> Result<()> {
    let ok = t > 0.0 && if max_inclusive { t <= 2.0 } else { t < 2.0 };
    if ok {
        Ok(())
    } else {
        let range = if max_inclusive { "(0, 2]" } else { "(0, 2)" };
        Err(Error::param(format!("t must lie in {range}, got {t}")))
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    code: u64,
    /// Minimal Σ ℓ^t over admissible covers of the set inside this cube.
    cost: f64,
    /// The cube itself is the optimal cover of its part of the set.
    take: bool,
}

/// The occupied part of the quadtree with optimal costs. `levels[k]` holds
/// the occupied level-`k` cubes sorted by Morton code.
struct CoverTree {
    levels: Vec<Vec<Node>>,
}

impl CoverTree {
    fn build(mask: &CompactMask, t: f64, exec: Exec) -> Self {
        let m = mask.level as usize;
        let leaf_cost = dyadic_side(m as i32).powf(t);
        let mut leaves: Vec<Node> = mask
            .cells()
            .map(|[x, y]| Node {
                code: morton(x, y),
                cost: leaf_cost,
                take: true,
            })
            .collect();
        leaves.sort_unstable_by_key(|n| n.code);

        let mut levels = vec![Vec::new(); m + 1];
        levels[m] = leaves;
        for k in (0..m).rev() {
            let side_cost = dyadic_side(k as i32).powf(t);
            let children = &levels[k + 1];
            let mut starts = Vec::new();
            for (i, n) in children.iter().enumerate() {
                if i == 0 || children[i - 1].code >> 2 != n.code >> 2 {
                    starts.push(i);
                }
            }
            starts.push(children.len());
            let parents = exec.map_range(starts.len() - 1, |g| {
                let group = &children[starts[g]..starts[g + 1]];
                let split: f64 = group.iter().map(|c| c.cost).sum();
                let take = side_cost <= split * (1.0 + TIE_RTOL);
                Node {
                    code: group[0].code >> 2,
                    cost: if take { side_cost } else { split },
                    take,
                }
            });
            levels[k] = parents;
        }
        CoverTree { levels }
    }

    fn content(&self) -> f64 {
        self.levels[0].first().map_or(0.0, |n| n.cost)
    }

    fn cover(&self) -> Vec<DyadicCube> {
        let mut out = Vec::new();
        let leaf_level = self.levels.len() - 1;
        let mut stack: Vec<(usize, u64)> = self.levels[0].iter().map(|n| (0, n.code)).collect();
        while let Some((k, code)) = stack.pop() {
            let nodes = &self.levels[k];
            let Ok(i) = nodes.binary_search_by_key(&code, |n| n.code) else {
                continue;
            };
            if nodes[i].take || k == leaf_level {
                let (x, y) = unmorton(code);
                out.push(DyadicCube::new(k as i32, x as i64, y as i64));
            } else {
                for c in (0..4).rev() {
                    stack.push((k + 1, code * 4 + c));
                }
            }
        }
        out
    }
}

/// Dyadic `t`-content of the mask, `t ∈ (0, 2]`.
pub fn dyadic_content(mask: &CompactMask, t: f64) -> Result<f64> {
    dyadic_content_with(mask, t, Exec::default())
}

pub fn dyadic_content_with(mask: &CompactMask, t: f64, exec: Exec) -> Result<f64> {
    check_t(t, true)?;
    Ok(CoverTree::build(mask, t, exec).content())
}

/// An admissible cover realizing [`dyadic_content`]. Ties between a cube
/// and the optimal cover of its children resolve to the cube.
pub fn minimizing_cover(mask: &CompactMask, t: f64) -> Result<Vec<DyadicCube>> {
    minimizing_cover_with(mask, t, Exec::default())
}

pub fn minimizing_cover_with(mask: &CompactMask, t: f64, exec: Exec) -> Result<Vec<DyadicCube>> {
    check_t(t, true)?;
    Ok(CoverTree::build(mask, t, exec).cover())
}

/// True when no cube is repeated and none contains another.
pub fn interiors_disjoint(cubes: &[DyadicCube]) -> bool {
    let Some(min_level) = cubes.iter().map(|c| c.level).min() else {
        return true;
    };
    let mut seen = std::collections::HashSet::with_capacity(cubes.len());
    if !cubes.iter().all(|c| seen.insert(*c)) {
        return false;
    }
    cubes.iter().all(|c| {
        (min_level..c.level)
            .rev()
            .all(|l| !seen.contains(&c.ancestor(l)))
    })
}

/// Carleson packing norm `sup_Q [ℓ(Q)^-t Σ_{P⊂Q} ℓ(P)^t]^(1/t)`, evaluated
/// at the quadtree ancestors of the family where the supremum is attained.
pub fn t_pack_norm(cubes: &[DyadicCube], t: f64) -> f64 {
    if cubes.is_empty() {
        return 0.0;
    }
    let min_level = cubes.iter().map(|c| c.level).min().unwrap();
    let mut sums: HashMap<DyadicCube, f64> = HashMap::new();
    let mut best: f64 = 0.0;
    // Below the coarsest family level every chain is walked separately.
    for c in cubes {
        let mass = c.side().powf(t);
        for l in (min_level..=c.level).rev() {
            *sums.entry(c.ancestor(l)).or_insert(0.0) += mass;
        }
    }
    let mut frontier: Vec<(DyadicCube, f64)> = sums
        .iter()
        .filter(|(q, _)| q.level == min_level)
        .map(|(q, s)| (*q, *s))
        .collect();
    frontier.sort_by_key(|(q, _)| *q);
    for (q, s) in &sums {
        best = best.max(s / q.side().powf(t));
    }
    // Above it, merge upwards. Cubes in different quadrants of the plane
    // never share an ancestor, so stop once even the whole mass could not
    // beat the current best at the frontier's side length.
    let total: f64 = cubes.iter().map(|c| c.side().powf(t)).sum();
    while frontier.len() > 1 && total / frontier[0].0.side().powf(t) > best {
        let mut up: HashMap<DyadicCube, f64> = HashMap::new();
        for (q, s) in &frontier {
            *up.entry(q.parent()).or_insert(0.0) += s;
        }
        frontier = up.into_iter().collect();
        frontier.sort_by_key(|(q, _)| *q);
        for (q, s) in &frontier {
            best = best.max(s / q.side().powf(t));
        }
    }
    best.powf(1.0 / t)
}

/// A finite family of dyadic cubes with disjoint interiors, together with
/// the exponent it was built for and its cached packing norm.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PackingFamily {
    t: f64,
    m: u32,
    norm: f64,
    cubes: Vec<DyadicCube>,
}

#[derive(Deserialize)]
struct FamilyFile {
    t: f64,
    m: u32,
    norm: Option<f64>,
    cubes: Vec<DyadicCube>,
}

impl PackingFamily {
    pub fn new(t: f64, m: u32, cubes: Vec<DyadicCube>) -> Result<Self> {
        check_t(t, true)?;
        if !interiors_disjoint(&cubes) {
            return Err(Error::param("family cubes must have pairwise disjoint interiors"));
        }
        let norm = t_pack_norm(&cubes, t);
        Ok(PackingFamily { t, m, norm, cubes })
    }

    pub fn empty(t: f64) -> Result<Self> {
        Self::new(t, 0, Vec::new())
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Separation exponent used by the construction (0 for ad-hoc families).
    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn cubes(&self) -> &[DyadicCube] {
        &self.cubes
    }

    pub fn len(&self) -> usize {
        self.cubes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cubes.is_empty()
    }

    /// `Σ ℓ(P)^s`.
    pub fn side_power_sum(&self, s: f64) -> f64 {
        self.cubes.iter().map(|c| c.side().powf(s)).sum()
    }

    /// True when the `a`-dilates of distinct cubes are pairwise disjoint
    /// as closed sets.
    pub fn dilates_disjoint(&self, a: f64) -> bool {
        let squares: Vec<Square> = self.cubes.iter().map(|c| dilate(c, a)).collect();
        squares_pairwise_disjoint(&squares)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Parses a family file; a stored norm must agree with the recomputed one.
    pub fn from_json(s: &str) -> Result<Self> {
        let f: FamilyFile = serde_json::from_str(s)?;
        let fam = Self::new(f.t, f.m, f.cubes)?;
        if let Some(stored) = f.norm {
            if (stored - fam.norm).abs() > 1e-9 * fam.norm.max(1.0) {
                return Err(Error::Format(format!(
                    "stored packing norm {stored} disagrees with recomputed {}",
                    fam.norm
                )));
            }
        }
        Ok(fam)
    }
}

/// Sweep over x-extents; closed squares that touch count as meeting.
pub fn squares_pairwise_disjoint(squares: &[Square]) -> bool {
    let mut order: Vec<usize> = (0..squares.len()).collect();
    let b: Vec<[f64; 4]> = squares.iter().map(|s| s.bounds()).collect();
    order.sort_by(|&i, &j| b[i][0].total_cmp(&b[j][0]));
    for (pos, &i) in order.iter().enumerate() {
        for &j in &order[pos + 1..] {
            if b[j][0] > b[i][2] {
                break;
            }
            if b[j][1] <= b[i][3] && b[i][1] <= b[j][3] {
                return false;
            }
        }
    }
    true
}

/// The packing family of a compact set: each cube `T` of the minimizing
/// cover is replaced by its descendant of side `2^-(m+1) ℓ(T)` whose
/// upper-right corner is the center of `T`.
///
/// `epsilon` is the slack allowed against the content; the mask minimizer
/// is exact, so it only enters the recorded bound.
pub fn packing_construct(mask: &CompactMask, t: f64, epsilon: f64, m: u32) -> Result<PackingFamily> {
    packing_construct_with(mask, t, epsilon, m, Exec::default())
}

pub fn packing_construct_with(
    mask: &CompactMask,
    t: f64,
    epsilon: f64,
    m: u32,
    exec: Exec,
) -> Result<PackingFamily> {
    check_t(t, false)?;
    if mask.is_empty() {
        return Err(Error::param("packing construction needs a non-empty set"));
    }
    if !(epsilon > 0.0) {
        return Err(Error::param(format!("epsilon must be positive, got {epsilon}")));
    }
    if m > 30 {
        return Err(Error::param(format!("separation exponent m = {m} is unreasonably large")));
    }
    let cover = minimizing_cover_with(mask, t, exec)?;
    let half = 1i64 << m;
    let cubes = cover
        .iter()
        .map(|c| {
            DyadicCube::new(
                c.level + m as i32 + 1,
                2 * half * c.ix + half - 1,
                2 * half * c.iy + half - 1,
            )
        })
        .collect();
    PackingFamily::new(t, m, cubes)
}

/// The four guarantees of the packing construction, evaluated directly on
/// an output family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstructionChecks {
    /// `2^m`-dilates pairwise disjoint.
    pub dilates_disjoint: bool,
    /// The set lies in the union of the `3·2^m`-dilates.
    pub covered_by_dilates: bool,
    /// Packing norm at most 1.
    pub norm_at_most_one: bool,
    /// `Σ ℓ^t ≤ 9·2^((m+1)t)·(content + ε)`.
    pub mass_bounded: bool,
    pub norm: f64,
    pub mass: f64,
    pub mass_bound: f64,
}

impl ConstructionChecks {
    pub fn all(&self) -> bool {
        self.dilates_disjoint && self.covered_by_dilates && self.norm_at_most_one && self.mass_bounded
    }
}

/// Constant in the mass bound: the 9 of the cover reduction times the
/// `2^((m+1)t)` lost to the subdivision.
pub fn construction_constant(m: u32, t: f64) -> f64 {
    9.0 * 2f64.powf((m as f64 + 1.0) * t)
}

pub fn check_construction(
    mask: &CompactMask,
    family: &PackingFamily,
    content: f64,
    epsilon: f64,
) -> ConstructionChecks {
    let m = family.m();
    let t = family.t();
    let spread = dyadic_side(-(m as i32));

    let dilates_disjoint = family.dilates_disjoint(spread);

    // Mark every pixel lying inside some 3·2^m-dilate, then compare.
    let n = mask.width() as i64;
    let scale = n as f64;
    let mut covered = CompactMask::empty(mask.level()).expect("same level as the input");
    for c in family.cubes() {
        let b = dilate(c, 3.0 * spread).bounds();
        let x0 = ((b[0] * scale).ceil() as i64).clamp(0, n);
        let x1 = ((b[2] * scale).floor() as i64).clamp(0, n);
        let y0 = ((b[1] * scale).ceil() as i64).clamp(0, n);
        let y1 = ((b[3] * scale).floor() as i64).clamp(0, n);
        for iy in y0..y1 {
            for ix in x0..x1 {
                covered.insert(ix as u32, iy as u32);
            }
        }
    }
    let covered_by_dilates = mask.cells().all(|[x, y]| covered.contains(x, y));

    let norm = t_pack_norm(family.cubes(), t);
    let mass = family.side_power_sum(t);
    let mass_bound = construction_constant(m, t) * (content + epsilon);
    ConstructionChecks {
        dilates_disjoint,
        covered_by_dilates,
        norm_at_most_one: norm <= 1.0 + 1e-12,
        mass_bounded: mass <= mass_bound,
        norm,
        mass,
        mass_bound,
    }
}

/// The density `w(x) = Σ_j ℓ(P_j)^(t-2) χ_{P_j}(x)` of a family.
#[derive(Clone, Debug)]
pub struct PackingWeight<'a> {
    family: &'a PackingFamily,
    t: f64,
}

impl<'a> PackingWeight<'a> {
    pub fn new(family: &'a PackingFamily, t: f64) -> Self {
        PackingWeight { family, t }
    }

    pub fn density(&self, p: [f64; 2]) -> f64 {
        self.family
            .cubes()
            .iter()
            .filter(|c| c.as_square().contains_point(p))
            .map(|c| c.side().powf(self.t - 2.0))
            .sum()
    }

    /// Exact `w(Q)`.
    pub fn measure(&self, q: &Square) -> f64 {
        weight_measure(self.family, self.t, q)
    }

    pub fn total_mass(&self) -> f64 {
        self.family.side_power_sum(self.t)
    }
}

/// `w_{t,P}(Q) = Σ_j ℓ(P_j)^(t-2) |P_j ∩ Q|`.
pub fn weight_measure(family: &PackingFamily, t: f64, q: &Square) -> f64 {
    family
        .cubes()
        .iter()
        .map(|c| {
            let a = c.as_square().intersection_area(q);
            if a > 0.0 {
                c.side().powf(t - 2.0) * a
            } else {
                0.0
            }
        })
        .sum()
}

/// Per-cube weights `β_j` that turn `Σ ℓ_j^2 β_j` into `(Σ ℓ_j^t)^(2/t)`:
/// the extremal dual sequence of the reverse Hölder inequality for the
/// exponent `t/2 < 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaWeights {
    pub t: f64,
    pub sides: Vec<f64>,
    pub beta: Vec<f64>,
}

impl BetaWeights {
    /// `Σ_j ℓ_j^2 β_j`.
    pub fn area_pairing(&self) -> f64 {
        self.sides.iter().zip(&self.beta).map(|(l, b)| l * l * b).sum()
    }

    /// `‖β‖_{ℓ^p'}` with the negative conjugate exponent `p' = t/(t-2)`.
    pub fn dual_norm(&self) -> f64 {
        let q = self.t / (self.t - 2.0);
        self.beta.iter().map(|b| b.powf(q)).sum::<f64>().powf(1.0 / q)
    }

    /// The common value of `β_j / ℓ_j^(t-2)`.
    pub fn weight_ratio(&self) -> f64 {
        self.beta[0] / self.sides[0].powf(self.t - 2.0)
    }
}

pub fn beta_weights(family: &PackingFamily, t: f64) -> Result<BetaWeights> {
    check_t(t, false)?;
    if family.is_empty() {
        return Err(Error::param("beta weights need a non-empty family"));
    }
    let p = t / 2.0;
    let sides: Vec<f64> = family.cubes().iter().map(|c| c.side()).collect();
    let total: f64 = sides.iter().map(|l| (l * l).powf(p)).sum();
    let denom = total.powf((p - 1.0) / p);
    let beta = sides.iter().map(|l| (l * l).powf(p - 1.0) / denom).collect();
    Ok(BetaWeights { t, sides, beta })
}
