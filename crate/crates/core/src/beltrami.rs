//! Principal solutions of the Beltrami equation `f_z̄ = μ f_z` on the torus.
//!
//! With `f = z + C(f_z̄)` the equation becomes `(I - μS) f_z̄ = μ`, solved by
//! the Neumann series `f_z̄ = μ + μS(μ) + μS(μS(μ)) + ...`. The Cauchy
//! transform is normalized to have zero mean, which stands in for the
//! condition `f(z) - z -> 0` at infinity.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dyadic::DyadicCube;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{GridField, GridSpec, RASTER_FLOOR};
use crate::spectral::{Multiplier, Spectral};

/// `κ = (K - 1) / (K + 1)`.
pub fn kappa_from_k(k: f64) -> f64 {
    (k - 1.0) / (k + 1.0)
}

/// `K = (1 + κ) / (1 - κ)`.
pub fn k_from_kappa(kappa: f64) -> f64 {
    (1.0 + kappa) / (1.0 - kappa)
}

#[derive(Clone, Debug)]
pub struct BeltramiCoefficient {
    mu: GridField,
    kappa: f64,
    support: Vec<bool>,
}

impl BeltramiCoefficient {
    pub fn new(mu: GridField) -> Result<Self> {
        let kappa = mu.max_abs();
        if !(kappa < 1.0) {
            return Err(Error::param(format!("kappa must be < 1, got {kappa}")));
        }
        let spec = mu.spec();
        let support: Vec<bool> = mu.data().iter().map(|z| z.norm() > 0.0).collect();
        let (lo, hi) = (0.25 * spec.side, 0.75 * spec.side);
        for iy in 0..spec.n {
            for ix in 0..spec.n {
                if !support[iy * spec.n + ix] {
                    continue;
                }
                let p = spec.point(ix, iy);
                let inside = (0..2).all(|a| {
                    let u = p[a] - spec.origin[a];
                    (lo..=hi).contains(&u)
                });
                if !inside {
                    return Err(Error::param(format!(
                        "coefficient support must lie in the central half of the torus; \
                         sample at ({}, {}) is outside",
                        p[0], p[1]
                    )));
                }
            }
        }
        Ok(BeltramiCoefficient { mu, kappa, support })
    }

    pub fn zero(spec: GridSpec) -> Self {
        Self::new(GridField::zeros(spec)).expect("zero coefficient is admissible")
    }

    /// Samples `μ(z)` and restricts it to the cells where `keep(z)` holds.
    pub fn from_fn<F, K>(spec: GridSpec, mu: F, keep: K) -> Result<Self>
    where
        F: Fn(Complex64) -> Complex64 + Sync + Send,
        K: Fn(Complex64) -> bool + Sync + Send,
    {
        Self::new(GridField::from_fn(spec, |z| {
            if keep(z) {
                mu(z)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })?)
    }

    pub fn mu(&self) -> &GridField {
        &self.mu
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn k(&self) -> f64 {
        k_from_kappa(self.kappa)
    }

    pub fn support(&self) -> &[bool] {
        &self.support
    }

    pub fn spec(&self) -> GridSpec {
        self.mu.spec()
    }
}

#[derive(Clone, Debug)]
pub struct PrincipalMapSolution {
    pub fzbar: GridField,
    pub fz: GridField,
    /// Samples of `f` at the cell centers.
    pub f: GridField,
    /// `f - z`, the periodic part of the map.
    pub displacement: GridField,
    pub jacobian: Vec<f64>,
    pub terms: usize,
    /// `L^2` norms of the successive series terms.
    pub term_norms: Vec<f64>,
    /// `κ^n / (1 - κ)` for `n` terms.
    pub tail_bound: f64,
    pub kappa: f64,
}

impl PrincipalMapSolution {
    pub fn spec(&self) -> GridSpec {
        self.f.spec()
    }

    /// `f(p)` by bilinear interpolation of `f - z`.
    pub fn eval(&self, p: [f64; 2]) -> Complex64 {
        Complex64::new(p[0], p[1]) + self.displacement.interpolate(p)
    }

    /// Recomputes `S(f_z̄)` and returns `max |f_z - 1 - S(f_z̄)|`.
    pub fn identity_defect(&self) -> f64 {
        let s = Spectral::with_exec(self.spec(), Exec::Sequential).apply(&self.fzbar, Multiplier::Beurling);
        self.fz
            .data()
            .iter()
            .zip(s.data())
            .fold(0.0, |m, (a, b)| m.max((a - 1.0 - b).norm()))
    }

    /// Largest ratio of consecutive series term norms.
    pub fn max_decay_ratio(&self) -> f64 {
        self.term_norms
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .fold(0.0, |m, w| m.max(w[1] / w[0]))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOptions {
    pub max_terms: usize,
    pub tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_terms: 200,
            tol: 1e-10,
        }
    }
}

pub fn solve_principal(mu: &BeltramiCoefficient, max_terms: usize, tol: f64) -> Result<PrincipalMapSolution> {
    solve_principal_with(mu, max_terms, tol, Exec::default())
}

pub fn solve_principal_with(
    mu: &BeltramiCoefficient,
    max_terms: usize,
    tol: f64,
    exec: Exec,
) -> Result<PrincipalMapSolution> {
    if !(tol > 0.0) {
        return Err(Error::param("tolerance must be positive"));
    }
    let spec = mu.spec();
    let sp = Spectral::with_exec(spec, exec);
    let m = mu.mu().data();
    let mu_norm = mu.mu().l2_norm();
    let kappa = mu.kappa();

    let mut sum = vec![Complex64::new(0.0, 0.0); spec.len()];
    let mut term_norms = Vec::new();
    let mut terms = 0;
    if mu_norm > 0.0 {
        let mut term = m.to_vec();
        loop {
            for (s, t) in sum.iter_mut().zip(&term) {
                *s += t;
            }
            terms += 1;
            let norm = GridField::new_unchecked(spec, term.clone()).l2_norm();
            term_norms.push(norm);
            if norm < tol * mu_norm {
                break;
            }
            if terms >= max_terms {
                return Err(Error::NonConvergence {
                    what: "Beltrami Neumann series".into(),
                    iterations: terms,
                    residual: kappa.powi(terms as i32) / (1.0 - kappa),
                });
            }
            sp.apply_in_place(&mut term, Multiplier::Beurling);
            for (t, a) in term.iter_mut().zip(m) {
                *t *= a;
            }
        }
    }

    let fzbar = GridField::new_unchecked(spec, sum);
    let mut fz = sp.apply(&fzbar, Multiplier::Beurling);
    fz.data_mut().iter_mut().for_each(|v| *v += 1.0);
    let displacement = sp.apply(&fzbar, Multiplier::Cauchy);
    let mut f = displacement.clone();
    exec.for_each_row(f.data_mut(), spec.n, |iy, row| {
        for (ix, v) in row.iter_mut().enumerate() {
            *v += spec.z(ix, iy);
        }
    });
    let jacobian = fz
        .data()
        .iter()
        .zip(fzbar.data())
        .map(|(a, b)| a.norm_sqr() - b.norm_sqr())
        .collect();
    Ok(PrincipalMapSolution {
        fzbar,
        fz,
        f,
        displacement,
        jacobian,
        terms,
        term_norms,
        tail_bound: kappa.powi(terms as i32) / (1.0 - kappa),
        kappa,
    })
}

/// `max |f_z̄|` over the cells where `mask` is false.
pub fn conformality_defect(sol: &PrincipalMapSolution, mask: &[bool]) -> f64 {
    sol.fzbar
        .data()
        .iter()
        .zip(mask)
        .filter(|(_, m)| !**m)
        .fold(0.0, |acc, (z, _)| acc.max(z.norm()))
}

/// Cells whose centers lie in the closed union of the cubes.
pub fn cube_mask(spec: &GridSpec, cubes: &[DyadicCube]) -> Vec<bool> {
    spec.rasterize(cubes, |_| 1.0).into_iter().map(|v| v > 0.0).collect()
}

/// Diameter of `f(∂P)` sampled at spacing `h` along the boundary of `P`.
pub fn image_diameter(sol: &PrincipalMapSolution, cube: &DyadicCube) -> Result<f64> {
    let spec = sol.spec();
    let h = spec.spacing();
    if cube.side() < RASTER_FLOOR * h {
        return Err(Error::Raster(format!(
            "cube {cube:?} has fewer than {RASTER_FLOOR} samples per side"
        )));
    }
    let points: Vec<Complex64> = boundary_points(cube, h)
        .into_iter()
        .map(|p| sol.eval(p))
        .collect();
    Ok(point_set_diameter(&points))
}

/// Points on the boundary of the cube, spaced by at most `h`, corners
/// included.
pub fn boundary_points(cube: &DyadicCube, h: f64) -> Vec<[f64; 2]> {
    let [x0, y0, x1, y1] = cube.bounds();
    let steps = (cube.side() / h).ceil().max(1.0) as usize;
    let mut pts = Vec::with_capacity(4 * steps);
    for k in 0..steps {
        let s = k as f64 / steps as f64;
        pts.push([x0 + s * (x1 - x0), y0]);
        pts.push([x1, y0 + s * (y1 - y0)]);
        pts.push([x1 - s * (x1 - x0), y1]);
        pts.push([x0, y1 - s * (y1 - y0)]);
    }
    pts
}

pub fn point_set_diameter(points: &[Complex64]) -> f64 {
    let mut d2 = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            d2 = d2.max((a - b).norm_sqr());
        }
    }
    d2.sqrt()
}
