//! Dyadic cubes, arbitrary axis-parallel squares and the shifted dyadic mesh.
//!
//! Cubes are closed: `[2^-k ix, 2^-k (ix+1)] x [2^-k iy, 2^-k (iy+1)]`.
//! Only [`locate`] uses the half-open convention, so that every point has a
//! unique containing cube at each level.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A dyadic square of side `2^-level` with lower-left corner
/// `2^-level * (ix, iy)`. Serialized as the triple `[level, ix, iy]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(i32, i64, i64)", into = "(i32, i64, i64)")]
pub struct DyadicCube {
    pub level: i32,
    pub ix: i64,
    pub iy: i64,
}

impl From<(i32, i64, i64)> for DyadicCube {
    fn from((level, ix, iy): (i32, i64, i64)) -> Self {
        DyadicCube { level, ix, iy }
    }
}

impl From<DyadicCube> for (i32, i64, i64) {
    fn from(c: DyadicCube) -> Self {
        (c.level, c.ix, c.iy)
    }
}

/// How two dyadic cubes sit relative to each other. Exactly one holds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Nesting {
    Equal,
    /// The first cube strictly contains the second.
    Contains,
    /// The first cube is strictly contained in the second.
    ContainedIn,
    /// Interiors are disjoint (the closed cubes may still touch).
    Disjoint,
}

/// `2^-level`, exact for every level a cube can reasonably carry.
#[inline]
pub fn dyadic_side(level: i32) -> f64 {
    2f64.powi(-level)
}

impl DyadicCube {
    pub const UNIT: DyadicCube = DyadicCube { level: 0, ix: 0, iy: 0 };

    pub fn new(level: i32, ix: i64, iy: i64) -> Self {
        DyadicCube { level, ix, iy }
    }

    #[inline]
    pub fn side(&self) -> f64 {
        dyadic_side(self.level)
    }

    pub fn lower_left(&self) -> [f64; 2] {
        let s = self.side();
        [self.ix as f64 * s, self.iy as f64 * s]
    }

    pub fn center(&self) -> [f64; 2] {
        let s = self.side();
        [(self.ix as f64 + 0.5) * s, (self.iy as f64 + 0.5) * s]
    }

    /// `[xmin, ymin, xmax, ymax]`.
    pub fn bounds(&self) -> [f64; 4] {
        let s = self.side();
        let [x, y] = self.lower_left();
        [x, y, x + s, y + s]
    }

    pub fn parent(&self) -> DyadicCube {
        self.ancestor(self.level - 1)
    }

    /// The cube at a coarser (or equal) `level` containing this one.
    pub fn ancestor(&self, level: i32) -> DyadicCube {
        assert!(level <= self.level, "ancestor level must not be finer");
        let shift = (self.level - level) as u32;
        if shift >= 63 {
            // Far enough up that the index collapses to 0 or -1.
            return DyadicCube::new(level, self.ix.signum().min(0), self.iy.signum().min(0));
        }
        DyadicCube::new(level, self.ix >> shift, self.iy >> shift)
    }

    /// Children in the order lower-left, lower-right, upper-left, upper-right.
    pub fn children(&self) -> [DyadicCube; 4] {
        let (l, x, y) = (self.level + 1, 2 * self.ix, 2 * self.iy);
        [
            DyadicCube::new(l, x, y),
            DyadicCube::new(l, x + 1, y),
            DyadicCube::new(l, x, y + 1),
            DyadicCube::new(l, x + 1, y + 1),
        ]
    }

    /// Containment as closed sets (a cube contains itself).
    pub fn contains(&self, other: &DyadicCube) -> bool {
        other.level >= self.level && other.ancestor(self.level) == *self
    }

    pub fn relation(&self, other: &DyadicCube) -> Nesting {
        if self == other {
            Nesting::Equal
        } else if self.contains(other) {
            Nesting::Contains
        } else if other.contains(self) {
            Nesting::ContainedIn
        } else {
            Nesting::Disjoint
        }
    }

    pub fn as_square(&self) -> Square {
        Square {
            center: self.center(),
            side: self.side(),
        }
    }
}

/// An axis-parallel square, not necessarily dyadic.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Square {
    pub center: [f64; 2],
    pub side: f64,
}

impl From<DyadicCube> for Square {
    fn from(c: DyadicCube) -> Self {
        c.as_square()
    }
}

impl From<&DyadicCube> for Square {
    fn from(c: &DyadicCube) -> Self {
        c.as_square()
    }
}

impl Square {
    pub fn new(center: [f64; 2], side: f64) -> Result<Self> {
        if !(side > 0.0 && side.is_finite()) || !center.iter().all(|c| c.is_finite()) {
            return Err(Error::param(format!("square side must be positive, got {side}")));
        }
        Ok(Square { center, side })
    }

    /// Square from its lower-left corner.
    pub fn from_corner(corner: [f64; 2], side: f64) -> Result<Self> {
        Square::new([corner[0] + 0.5 * side, corner[1] + 0.5 * side], side)
    }

    /// `[xmin, ymin, xmax, ymax]`.
    pub fn bounds(&self) -> [f64; 4] {
        let h = 0.5 * self.side;
        [
            self.center[0] - h,
            self.center[1] - h,
            self.center[0] + h,
            self.center[1] + h,
        ]
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    pub fn contains_point(&self, p: [f64; 2]) -> bool {
        let b = self.bounds();
        b[0] <= p[0] && p[0] <= b[2] && b[1] <= p[1] && p[1] <= b[3]
    }

    /// Closed containment `other ⊂ self`.
    pub fn contains(&self, other: &Square) -> bool {
        let (a, b) = (self.bounds(), other.bounds());
        a[0] <= b[0] && a[1] <= b[1] && b[2] <= a[2] && b[3] <= a[3]
    }

    /// Closed sets meet (touching edges count).
    pub fn intersects(&self, other: &Square) -> bool {
        let (a, b) = (self.bounds(), other.bounds());
        a[0] <= b[2] && b[0] <= a[2] && a[1] <= b[3] && b[1] <= a[3]
    }

    pub fn intersection_area(&self, other: &Square) -> f64 {
        let (a, b) = (self.bounds(), other.bounds());
        let w = (a[2].min(b[2]) - a[0].max(b[0])).max(0.0);
        let h = (a[3].min(b[3]) - a[1].max(b[1])).max(0.0);
        w * h
    }
}

/// The level-`level` dyadic cube whose half-open version `[a, b)^2`
/// contains `p`.
pub fn locate(p: [f64; 2], level: i32) -> DyadicCube {
    let scale = dyadic_side(-level);
    DyadicCube::new(
        level,
        (p[0] * scale).floor() as i64,
        (p[1] * scale).floor() as i64,
    )
}

/// The square concentric with `q` and `a` times as large.
///
/// # Panics
/// If `a` is not positive.
pub fn dilate(q: impl Into<Square>, a: f64) -> Square {
    assert!(a > 0.0, "dilation factor must be positive, got {a}");
    let q = q.into();
    Square {
        center: q.center,
        side: a * q.side,
    }
}

/// True iff `q` meets at least two distinct cubes of `family`.
pub fn is_nonlocal(q: &Square, family: &[DyadicCube]) -> bool {
    family
        .iter()
        .filter(|p| q.intersects(&p.as_square()))
        .take(2)
        .count()
        >= 2
}

/// One of the nine nested grids making up the shifted dyadic mesh.
///
/// Grid `alpha` (thirds, per axis) has, at scale `2^j`, the cubes
/// `2^j (k + [0,1]^2 + (-1)^j alpha/3)`. Alternating the sign of the shift
/// with `j` is what makes consecutive scales nest, since `2 * (1/3) ≡ -1/3`
/// modulo 1. As a set, the union of the nine grids is the full mesh indexed
/// by `i ∈ {0,1}`: the `i ≠ j mod 2` members coincide with members of the
/// grid with shift `1 - alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MeshGrid {
    pub alpha: [u8; 2],
}

impl MeshGrid {
    pub const COUNT: usize = 9;

    pub fn from_index(index: usize) -> Self {
        assert!(index < Self::COUNT, "mesh grid selector must be < 9");
        MeshGrid {
            alpha: [(index / 3) as u8, (index % 3) as u8],
        }
    }

    pub fn index(&self) -> usize {
        self.alpha[0] as usize * 3 + self.alpha[1] as usize
    }

    pub fn all() -> impl Iterator<Item = MeshGrid> {
        (0..Self::COUNT).map(Self::from_index)
    }

    /// Per-axis offset of the grid at scale `2^j`, in units of the scale.
    pub fn shift(&self, j: i32) -> [f64; 2] {
        let sign = if j.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        [
            sign * self.alpha[0] as f64 / 3.0,
            sign * self.alpha[1] as f64 / 3.0,
        ]
    }

    pub fn cube(&self, j: i32, k: [i64; 2]) -> MeshCube {
        MeshCube {
            j,
            alpha: self.alpha,
            k,
        }
    }

    /// Index ranges `[k0min, k0max] x [k1min, k1max]` of the scale-`2^j`
    /// cubes that meet the closed box `bounds` (touching counts).
    pub fn cubes_meeting(&self, j: i32, bounds: [f64; 4]) -> [[i64; 2]; 2] {
        let s = dyadic_side(-j);
        let sh = self.shift(j);
        let mut out = [[0i64; 2]; 2];
        for axis in 0..2 {
            let lo = bounds[axis] / s - sh[axis];
            let hi = bounds[axis + 2] / s - sh[axis];
            // Cube k spans [k, k+1] in shifted units; it meets [lo, hi] iff
            // k <= hi and k + 1 >= lo.
            out[axis] = [(lo - 1.0).ceil() as i64, hi.floor() as i64];
        }
        out
    }
}

/// A member of the shifted dyadic mesh: side `2^j`, lower-left corner
/// `2^j (k + (-1)^j alpha/3)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MeshCube {
    pub j: i32,
    pub alpha: [u8; 2],
    pub k: [i64; 2],
}

impl MeshCube {
    pub fn grid(&self) -> MeshGrid {
        MeshGrid { alpha: self.alpha }
    }

    /// The `i` of the `2^j(k + (0,1)^2 + (-1)^i alpha)` parametrization.
    pub fn i(&self) -> u8 {
        self.j.rem_euclid(2) as u8
    }

    pub fn side(&self) -> f64 {
        dyadic_side(-self.j)
    }

    pub fn square(&self) -> Square {
        let s = self.side();
        let sh = self.grid().shift(self.j);
        Square {
            center: [
                s * (self.k[0] as f64 + sh[0] + 0.5),
                s * (self.k[1] as f64 + sh[1] + 0.5),
            ],
            side: s,
        }
    }
}

/// A mesh member `Q'` with `q ⊂ (9/10) Q'` and `ℓ(Q') ≤ 9 ℓ(q)`.
///
/// The choice is deterministic: the smallest admissible scale, then the
/// lexicographically smallest `(alpha, k)` at that scale.
pub fn mesh_cover(q: &Square) -> MeshCube {
    let [x0, y0, x1, y1] = q.bounds();
    // 0.9 * 2^j must at least hold the side.
    let j_min = (q.side / 0.9).log2().floor() as i32;
    let j_max = (9.0 * q.side).log2().floor() as i32;
    for j in j_min..=j_max.max(j_min) {
        let s = dyadic_side(-j);
        for index in 0..MeshGrid::COUNT {
            let grid = MeshGrid::from_index(index);
            let sh = grid.shift(j);
            let ka = axis_candidate(x0, x1, s, sh[0]);
            let kb = axis_candidate(y0, y1, s, sh[1]);
            for a in ka.iter().flatten() {
                for b in kb.iter().flatten() {
                    let cube = grid.cube(j, [*a, *b]);
                    if dilate(cube.square(), 0.9).contains(q) {
                        return cube;
                    }
                }
            }
        }
    }
    unreachable!("every square has a mesh cover within nine times its side")
}

/// Integers `k` (at most three, increasing) for which `[lo, hi]` might sit
/// inside the 9/10 core of `s (k + shift + [0, 1])`.
fn axis_candidate(lo: f64, hi: f64, s: f64, shift: f64) -> [Option<i64>; 3] {
    let k = ((lo - 0.05 * s) / s - shift).floor() as i64;
    let fits = |k: i64| {
        let a = s * (k as f64 + shift);
        a + 0.05 * s <= lo && hi <= a + 0.95 * s
    };
    let mut out = [None; 3];
    for (slot, cand) in out.iter_mut().zip([k - 1, k, k + 1]) {
        if fits(cand) {
            *slot = Some(cand);
        }
    }
    out
}
