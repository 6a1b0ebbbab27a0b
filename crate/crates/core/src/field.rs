//! Complex samples on a uniform periodic grid.
//!
//! Sample `(ix, iy)` sits at the cell center
//! `origin + h * (ix + 1/2, iy + 1/2)`, `h = L / n`, stored row-major with
//! rows indexed by `iy`. With a dyadic `h` and a dyadic origin, dyadic cubes
//! of side at least `h` are unions of whole cells, so rasterizing a cube by
//! cell centers is exact.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dyadic::{DyadicCube, Square};
use crate::error::{Error, Result};
use crate::exec::Exec;

pub const MIN_GRID: usize = 1 << 4;
pub const MAX_GRID: usize = 1 << 13;

/// Minimum number of samples along a cube side for raster fidelity.
pub const RASTER_FLOOR: f64 = 4.0;

/// Geometry of a periodic grid: size, torus side and lower-left corner.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    #[serde(rename = "L")]
    pub side: f64,
    pub origin: [f64; 2],
}

impl GridSpec {
    pub fn new(n: usize, side: f64, origin: [f64; 2]) -> Result<Self> {
        if !n.is_power_of_two() || !(MIN_GRID..=MAX_GRID).contains(&n) {
            return Err(Error::param(format!(
                "grid size must be a power of two in [{MIN_GRID}, {MAX_GRID}], got {n}"
            )));
        }
        if !(side > 0.0 && side.is_finite()) || !origin.iter().all(|o| o.is_finite()) {
            return Err(Error::param(format!("torus side must be positive, got {side}")));
        }
        Ok(GridSpec { n, side, origin })
    }

    /// Torus `[-1/2, 3/2)^2`: the unit square `[0,1]^2` sits in the middle.
    pub fn unit_centered(n: usize) -> Result<Self> {
        Self::new(n, 2.0, [-0.5, -0.5])
    }

    /// Torus `[-1, 1)^2`, centered at the origin of the plane.
    pub fn origin_centered(n: usize) -> Result<Self> {
        Self::new(n, 2.0, [-1.0, -1.0])
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.side / self.n as f64
    }

    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn point(&self, ix: usize, iy: usize) -> [f64; 2] {
        let h = self.spacing();
        [
            self.origin[0] + (ix as f64 + 0.5) * h,
            self.origin[1] + (iy as f64 + 0.5) * h,
        ]
    }

    #[inline]
    pub fn z(&self, ix: usize, iy: usize) -> Complex64 {
        let [x, y] = self.point(ix, iy);
        Complex64::new(x, y)
    }

    /// Cell ranges `[x0, x1) x [y0, y1)` whose centers lie in the closed
    /// box `bounds`, clipped to the window. Empty ranges are possible.
    pub fn cell_range(&self, bounds: [f64; 4]) -> [usize; 4] {
        let h = self.spacing();
        let n = self.n as f64;
        let lo = |v: f64, o: f64| ((v - o) / h - 0.5).ceil().clamp(0.0, n) as usize;
        let hi = |v: f64, o: f64| (((v - o) / h - 0.5).floor() + 1.0).clamp(0.0, n) as usize;
        [
            lo(bounds[0], self.origin[0]),
            hi(bounds[2], self.origin[0]),
            lo(bounds[1], self.origin[1]),
            hi(bounds[3], self.origin[1]),
        ]
    }

    /// True when the square lies inside the window.
    pub fn window_contains(&self, q: &Square) -> bool {
        let w = Square {
            center: [
                self.origin[0] + 0.5 * self.side,
                self.origin[1] + 0.5 * self.side,
            ],
            side: self.side,
        };
        w.contains(q)
    }

    /// Raster fidelity check for cubes that will be sampled on this grid.
    pub fn check_cubes(&self, cubes: &[DyadicCube]) -> Result<()> {
        let h = self.spacing();
        for c in cubes {
            if c.side() < RASTER_FLOOR * h {
                return Err(Error::Raster(format!(
                    "cube {c:?} has side {} below {RASTER_FLOOR} samples of spacing {h}",
                    c.side()
                )));
            }
            if !self.window_contains(&c.as_square()) {
                return Err(Error::Raster(format!("cube {c:?} lies outside the grid window")));
            }
        }
        Ok(())
    }

    /// `Σ_j value(P_j) χ_{P_j}` sampled at cell centers.
    pub fn rasterize<F>(&self, cubes: &[DyadicCube], value: F) -> Vec<f64>
    where
        F: Fn(&DyadicCube) -> f64,
    {
        let mut out = vec![0.0; self.len()];
        for c in cubes {
            let v = value(c);
            let [x0, x1, y0, y1] = self.cell_range(c.bounds());
            for iy in y0..y1 {
                for x in &mut out[iy * self.n + x0..iy * self.n + x1] {
                    *x += v;
                }
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    spec: GridSpec,
    data: Vec<Complex64>,
}

impl GridField {
    pub fn new(spec: GridSpec, data: Vec<Complex64>) -> Result<Self> {
        let spec = GridSpec::new(spec.n, spec.side, spec.origin)?;
        if data.len() != spec.len() {
            return Err(Error::param(format!(
                "expected {} samples, got {}",
                spec.len(),
                data.len()
            )));
        }
        if !data.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::param("field samples must be finite"));
        }
        Ok(GridField { spec, data })
    }

    pub(crate) fn new_unchecked(spec: GridSpec, data: Vec<Complex64>) -> Self {
        debug_assert_eq!(data.len(), spec.len());
        GridField { spec, data }
    }

    pub fn zeros(spec: GridSpec) -> Self {
        GridField {
            spec,
            data: vec![Complex64::new(0.0, 0.0); spec.len()],
        }
    }

    /// Samples `f(z)` at every cell center `z`.
    pub fn from_fn<F>(spec: GridSpec, f: F) -> Result<Self>
    where
        F: Fn(Complex64) -> Complex64 + Sync + Send,
    {
        let mut data = vec![Complex64::new(0.0, 0.0); spec.len()];
        Exec::default().for_each_row(&mut data, spec.n, |iy, row| {
            for (ix, v) in row.iter_mut().enumerate() {
                *v = f(spec.z(ix, iy));
            }
        });
        Self::new(spec, data)
    }

    pub fn from_real(spec: GridSpec, values: &[f64]) -> Result<Self> {
        Self::new(spec, values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn n(&self) -> usize {
        self.spec.n
    }

    pub fn spacing(&self) -> f64 {
        self.spec.spacing()
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<Complex64> {
        self.data
    }

    #[inline]
    pub fn at(&self, ix: usize, iy: usize) -> Complex64 {
        self.data[iy * self.spec.n + ix]
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        self.spec == other.spec
    }

    pub fn mean(&self) -> Complex64 {
        let n = self.data.len();
        let re = Exec::default().sum_range(n, |i| self.data[i].re);
        let im = Exec::default().sum_range(n, |i| self.data[i].im);
        Complex64::new(re, im) / n as f64
    }

    /// Discrete `L^2(dx)` norm, `sqrt(h^2 Σ |f|^2)`.
    pub fn l2_norm(&self) -> f64 {
        let h = self.spacing();
        (h * h * Exec::default().sum_range(self.data.len(), |i| self.data[i].norm_sqr())).sqrt()
    }

    /// `L^2(w dx)` norm for a per-cell weight.
    pub fn weighted_l2_norm(&self, weight: &[f64]) -> f64 {
        let h = self.spacing();
        (h * h
            * Exec::default().sum_range(self.data.len(), |i| weight[i] * self.data[i].norm_sqr()))
        .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, z| m.max(z.norm()))
    }

    pub fn map<F>(&self, f: F) -> GridField
    where
        F: Fn(Complex64) -> Complex64,
    {
        GridField {
            spec: self.spec,
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    /// Pointwise multiplication by a real per-cell factor.
    pub fn scaled_by(&self, factor: &[f64]) -> GridField {
        GridField {
            spec: self.spec,
            data: self.data.iter().zip(factor).map(|(z, a)| z * a).collect(),
        }
    }

    pub fn sub(&self, other: &GridField) -> GridField {
        GridField {
            spec: self.spec,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    /// Periodic bilinear interpolation between cell centers.
    pub fn interpolate(&self, p: [f64; 2]) -> Complex64 {
        let n = self.spec.n;
        let h = self.spacing();
        let u = (p[0] - self.spec.origin[0]) / h - 0.5;
        let v = (p[1] - self.spec.origin[1]) / h - 0.5;
        let (fu, fv) = (u.floor(), v.floor());
        let (a, b) = (u - fu, v - fv);
        let i0 = (fu as i64).rem_euclid(n as i64) as usize;
        let j0 = (fv as i64).rem_euclid(n as i64) as usize;
        let (i1, j1) = ((i0 + 1) % n, (j0 + 1) % n);
        self.at(i0, j0) * ((1.0 - a) * (1.0 - b))
            + self.at(i1, j0) * (a * (1.0 - b))
            + self.at(i0, j1) * ((1.0 - a) * b)
            + self.at(i1, j1) * (a * b)
    }

    /// Writes `<stem>.json` (`{n, L, origin}`) and `<stem>.bin` with
    /// little-endian `f64` pairs `(re, im)` in row-major order. `path` may
    /// name either file or the bare stem.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let (json, bin) = sidecar_paths(path.as_ref());
        let mut bytes = Vec::with_capacity(self.data.len() * 16);
        for z in &self.data {
            bytes.extend_from_slice(&z.re.to_le_bytes());
            bytes.extend_from_slice(&z.im.to_le_bytes());
        }
        write_atomic(&bin, &bytes)?;
        write_atomic(&json, serde_json::to_string(&self.spec)?.as_bytes())?;
        Ok(())
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let (json, bin) = sidecar_paths(path.as_ref());
        let spec: GridSpec = serde_json::from_str(&fs::read_to_string(&json)?)?;
        let bytes = fs::read(&bin)?;
        if bytes.len() != spec.n * spec.n * 16 {
            return Err(Error::Format(format!(
                "{} holds {} bytes, expected {} for n = {}",
                bin.display(),
                bytes.len(),
                spec.n * spec.n * 16,
                spec.n
            )));
        }
        let data = bytes
            .chunks_exact(16)
            .map(|c| {
                let re = f64::from_le_bytes(c[..8].try_into().unwrap());
                let im = f64::from_le_bytes(c[8..].try_into().unwrap());
                Complex64::new(re, im)
            })
            .collect();
        Self::new(spec, data)
    }
}

/// `(stem.json, stem.bin)` for a path naming either file or the stem.
pub fn sidecar_paths(path: &Path) -> (PathBuf, PathBuf) {
    let stem = match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("bin") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let with = |ext: &str| {
        let mut s = stem.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    };
    (with("json"), with("bin"))
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}
