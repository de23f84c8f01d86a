//! Normalized 3-D complex FFT on a cubic grid.
//!
//! Forward transforms carry the `1/n³` factor so that coefficients are the
//! Fourier-series amplitudes: `f(x) = Σ_ξ f̂(ξ) e^{iξ·x}`.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::grid::Grid;

#[derive(Clone)]
pub struct Fft3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft3").field("n", &self.n).finish()
    }
}

impl Fft3 {
    pub fn new(grid: &Grid) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// In-place forward transform, normalized by `1/n³`.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &*self.forward);
        let scale = 1.0 / (self.n * self.n * self.n) as f64;
        for c in data.iter_mut() {
            *c *= scale;
        }
    }

    /// In-place inverse transform (unnormalized synthesis).
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &*self.inverse);
    }

    /// Forward transform of real samples.
    pub fn forward_real(&self, values: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut data);
        data
    }

    /// Inverse transform keeping the real part.
    pub fn inverse_real(&self, coeffs: &[Complex64]) -> Vec<f64> {
        let mut data = coeffs.to_vec();
        self.inverse(&mut data);
        data.into_iter().map(|c| c.re).collect()
    }

    /// Forward transforms of two real fields with one complex FFT.
    pub fn forward_real_pair(&self, a: &[f64], b: &[f64]) -> (Vec<Complex64>, Vec<Complex64>) {
        let mut z: Vec<Complex64> = a.iter().zip(b).map(|(&x, &y)| Complex64::new(x, y)).collect();
        self.forward(&mut z);
        let n = self.n;
        let mut fa = Vec::with_capacity(z.len());
        let mut fb = Vec::with_capacity(z.len());
        for k in 0..n {
            for j in 0..n {
                let row = &z[n * (j + n * k)..n * (j + n * k + 1)];
                let mirror = &z[n * ((n - j) % n + n * ((n - k) % n))..][..n];
                for (i, &zp) in row.iter().enumerate() {
                    let zc = mirror[if i == 0 { 0 } else { n - i }].conj();
                    fa.push(0.5 * (zp + zc));
                    let d = 0.5 * (zp - zc);
                    fb.push(Complex64::new(d.im, -d.re));
                }
            }
        }
        (fa, fb)
    }

    /// Inverse transforms of two Hermitian spectra with one complex FFT.
    pub fn inverse_real_pair(&self, a: &[Complex64], b: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let mut z: Vec<Complex64> = a.iter().zip(b).map(|(x, y)| x + Complex64::new(-y.im, y.re)).collect();
        self.inverse(&mut z);
        z.into_iter().map(|c| (c.re, c.im)).unzip()
    }

    fn transform(&self, data: &mut [Complex64], plan: &dyn Fft<f64>) {
        let n = self.n;
        let nn = n * n;
        assert_eq!(data.len(), n * nn, "FFT buffer has wrong length");
        WORK.with_borrow_mut(|(buf, scratch)| {
            buf.resize(data.len(), Complex64::default());
            scratch.resize(plan.get_inplace_scratch_len(), Complex64::default());

            // x lines are contiguous.
            plan.process_with_scratch(data, scratch);

            // y: transpose each xy plane, transform, transpose back.
            for (src, dst) in data.chunks_exact(nn).zip(buf.chunks_exact_mut(nn)) {
                transpose::transpose(src, dst, n, n);
            }
            plan.process_with_scratch(buf, scratch);
            for (src, dst) in buf.chunks_exact(nn).zip(data.chunks_exact_mut(nn)) {
                transpose::transpose(src, dst, n, n);
            }

            // z: view as an n × n² matrix and transpose the whole thing.
            transpose::transpose(data, buf, nn, n);
            plan.process_with_scratch(buf, scratch);
            transpose::transpose(buf, data, n, nn);
        });
    }
}

thread_local! {
    /// Per-thread transpose buffer and FFT scratch, reused across calls.
    static WORK: RefCell<(Vec<Complex64>, Vec<Complex64>)> = const { RefCell::new((Vec::new(), Vec::new())) };
}
