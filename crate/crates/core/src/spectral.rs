//! Fourier multipliers on the periodic grid.
//!
//! Frequencies follow the usual FFT layout `k ∈ {0, .., n/2-1, -n/2, .., -1}`
//! along each axis, and the complex frequency is `ξ = 2π (k_x + i k_y) / L`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::exec::Exec;
use crate::field::{GridField, GridSpec};

/// A Fourier multiplier `m(ξ)` with `ξ = ξ_1 + i ξ_2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Multiplier {
    /// `conj(ξ) / ξ`, the Beurling transform.
    Beurling,
    /// `ξ / conj(ξ)`, its adjoint (and inverse).
    BeurlingAdjoint,
    /// `-2i / ξ`, the mean-free inverse of `∂_{z̄}`.
    Cauchy,
    /// `(i/2) ξ`, the derivative `∂_{z̄}`.
    Dbar,
    /// `(i/2) conj(ξ)`, the derivative `∂_z`.
    Dz,
}

impl Multiplier {
    #[inline]
    pub fn eval(self, xi: Complex64) -> Complex64 {
        let i = Complex64::i();
        if xi.re == 0.0 && xi.im == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        match self {
            Multiplier::Beurling => xi.conj() / xi,
            Multiplier::BeurlingAdjoint => xi / xi.conj(),
            Multiplier::Cauchy => -2.0 * i / xi,
            Multiplier::Dbar => 0.5 * i * xi,
            Multiplier::Dz => 0.5 * i * xi.conj(),
        }
    }
}

/// Cached FFT plans and frequency tables for one grid geometry.
#[derive(Clone)]
pub struct Spectral {
    spec: GridSpec,
    exec: Exec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    freq: Vec<f64>,
}

impl std::fmt::Debug for Spectral {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Spectral")
            .field("spec", &self.spec)
            .field("exec", &self.exec)
            .finish()
    }
}

impl Spectral {
    pub fn new(spec: GridSpec) -> Self {
        Self::with_exec(spec, Exec::default())
    }

    pub fn with_exec(spec: GridSpec, exec: Exec) -> Self {
        let n = spec.n;
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scale = 2.0 * std::f64::consts::PI / spec.side;
        let freq = (0..n)
            .map(|k| {
                let k = if k < n / 2 { k as f64 } else { k as f64 - n as f64 };
                scale * k
            })
            .collect();
        Spectral {
            spec,
            exec,
            forward,
            inverse,
            freq,
        }
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    pub fn exec(&self) -> Exec {
        self.exec
    }

    /// `ξ` at spectral index `(kx, ky)`.
    #[inline]
    pub fn xi(&self, kx: usize, ky: usize) -> Complex64 {
        Complex64::new(self.freq[kx], self.freq[ky])
    }

    fn fft_rows(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let len = plan.get_inplace_scratch_len();
        self.exec.for_each_row_init(
            data,
            self.spec.n,
            || vec![Complex64::new(0.0, 0.0); len],
            |scratch, _, row| plan.process_with_scratch(row, scratch),
        );
    }

    fn transpose(&self, src: &[Complex64], dst: &mut [Complex64]) {
        let n = self.spec.n;
        self.exec.for_each_row(dst, n, |i, row| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = src[j * n + i];
            }
        });
    }

    fn fft2(&self, data: &mut [Complex64], scratch: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        self.fft_rows(data, plan);
        self.transpose(data, scratch);
        self.fft_rows(scratch, plan);
        self.transpose(scratch, data);
    }

    /// Applies the multiplier in place to row-major samples on this grid.
    pub fn apply_in_place(&self, data: &mut [Complex64], m: Multiplier) {
        let n = self.spec.n;
        assert_eq!(data.len(), n * n, "sample count does not match the grid");
        let mut scratch = vec![Complex64::new(0.0, 0.0); n * n];
        self.fft2(data, &mut scratch, false);
        let norm = 1.0 / (n * n) as f64;
        self.exec.for_each_row(data, n, |ky, row| {
            for (kx, v) in row.iter_mut().enumerate() {
                *v *= m.eval(self.xi(kx, ky)) * norm;
            }
        });
        self.fft2(data, &mut scratch, true);
    }

    pub fn apply(&self, f: &GridField, m: Multiplier) -> GridField {
        assert_eq!(f.spec(), self.spec, "field does not live on this grid");
        let mut data = f.data().to_vec();
        self.apply_in_place(&mut data, m);
        GridField::new_unchecked(self.spec, data)
    }
}
