//! Periodic grids and real-valued fields sampled on them.
//!
//! Storage is x-fastest: the value at lattice point `(i, j, k)` lives at
//! `i + n * (j + n * k)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A cubic periodic lattice of `n³` points on the torus `[0, L)³`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    box_length: f64,
}

impl Grid {
    pub fn new(n: usize, box_length: f64) -> Result<Self> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n = {n} must be even and >= 8")));
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(Error::InvalidGrid(format!("box length {box_length} must be positive")));
        }
        Ok(Self { n, box_length })
    }

    /// The `2π` box.
    pub fn periodic(n: usize) -> Result<Self> {
        Self::new(n, 2.0 * PI)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.box_length / self.n as f64
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    pub fn volume(&self) -> f64 {
        self.box_length.powi(3)
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.n * (j + self.n * k)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let n = self.n;
        (idx % n, (idx / n) % n, idx / (n * n))
    }

    /// Physical position of a lattice point.
    #[inline]
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.coords(idx);
        let h = self.spacing();
        [i as f64 * h, j as f64 * h, k as f64 * h]
    }

    /// Signed integer mode number for FFT bin `i`, in `[-n/2, n/2)`.
    #[inline]
    pub fn mode(&self, i: usize) -> i64 {
        let n = self.n as i64;
        let i = i as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    #[inline]
    pub fn is_nyquist(&self, i: usize) -> bool {
        i == self.n / 2
    }

    /// Wavenumber used for first derivatives along one axis. The Nyquist bin
    /// has no real-valued derivative and maps to zero.
    #[inline]
    pub fn wavenumber(&self, i: usize) -> f64 {
        if self.is_nyquist(i) {
            0.0
        } else {
            self.mode(i) as f64 * 2.0 * PI / self.box_length
        }
    }

    /// Derivative wavevector `ξ` of the flat spectral index `idx`.
    #[inline]
    pub fn wavevector(&self, idx: usize) -> [f64; 3] {
        let (i, j, k) = self.coords(idx);
        [self.wavenumber(i), self.wavenumber(j), self.wavenumber(k)]
    }

    /// Flat index of the mode `-ξ` paired with `idx` under conjugate symmetry.
    #[inline]
    pub fn conjugate_index(&self, idx: usize) -> usize {
        let n = self.n;
        let (i, j, k) = self.coords(idx);
        self.index((n - i) % n, (n - j) % n, (n - k) % n)
    }

    /// Minimum-image displacement `x - center` on the torus.
    pub fn periodic_displacement(&self, idx: usize, center: [f64; 3]) -> [f64; 3] {
        let x = self.position(idx);
        let l = self.box_length;
        let mut d = [0.0; 3];
        for a in 0..3 {
            let mut v = x[a] - center[a];
            v -= l * (v / l).round();
            d[a] = v;
        }
        d
    }
}

/// A real scalar field on a [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "expected {} values, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("scalar field at point {i}")));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        Self {
            grid,
            values: vec![0.0; grid.len()],
        }
    }

    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        Self { grid, values }
    }

    /// Internal constructor for values produced by trusted kernels.
    pub(crate) fn from_parts(grid: Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_parts(self.grid, self.values.iter().map(|&v| f(v)).collect())
    }

    /// View as a discrete measure: one atom of mass `cell_volume` per point.
    pub fn measured(&self) -> crate::lorentz::Measured<'_> {
        crate::lorentz::Measured::new(&self.values, self.grid.cell_volume())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Spatial quantile of `|f|`, `level ∈ [0, 1]`, nearest-rank.
    pub fn abs_quantile(&self, level: f64) -> f64 {
        let mut a: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        a.sort_by(f64::total_cmp);
        let rank = ((a.len() - 1) as f64 * level.clamp(0.0, 1.0)).round() as usize;
        a[rank]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_sizes() {
        assert!(Grid::periodic(6).is_err());
        assert!(Grid::periodic(9).is_err());
        assert!(Grid::new(8, 0.0).is_err());
        assert!(Grid::periodic(8).is_ok());
    }

    #[test]
    fn index_roundtrip_and_conjugates() {
        let g = Grid::periodic(8).unwrap();
        for idx in 0..g.len() {
            let (i, j, k) = g.coords(idx);
            assert_eq!(g.index(i, j, k), idx);
            assert_eq!(g.conjugate_index(g.conjugate_index(idx)), idx);
        }
        assert_eq!(g.mode(3), 3);
        assert_eq!(g.mode(4), -4);
        assert_eq!(g.mode(7), -1);
        assert_eq!(g.wavenumber(4), 0.0);
    }

    #[test]
    fn cell_volume_matches_box() {
        let g = Grid::periodic(16).unwrap();
        assert!((g.cell_volume() * g.len() as f64 - g.volume()).abs() < 1e-9);
    }

    #[test]
    fn non_finite_values_rejected() {
        let g = Grid::periodic(8).unwrap();
        let mut v = vec![0.0; g.len()];
        v[3] = f64::NAN;
        assert!(matches!(ScalarField::new(g, v), Err(Error::NonFinite(_))));
    }
}
