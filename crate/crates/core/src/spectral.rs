//! Vector fields in Fourier space and the spectral calculus on them.

use std::sync::OnceLock;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::eigen::Sym3;
use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::grid::{Grid, ScalarField};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Relative tolerance for the per-mode divergence residual `|ξ·û| / max|û|`.
pub const DIVERGENCE_TOLERANCE: f64 = 1e-12;

/// A real vector field stored as three arrays of Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVectorField {
    grid: Grid,
    coeffs: [Vec<Complex64>; 3],
}

impl SpectralVectorField {
    pub fn zeros(grid: Grid) -> Self {
        let z = vec![Complex64::default(); grid.len()];
        Self {
            grid,
            coeffs: [z.clone(), z.clone(), z],
        }
    }

    pub fn from_coeffs(grid: Grid, coeffs: [Vec<Complex64>; 3]) -> Result<Self> {
        if coeffs.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::GridMismatch("coefficient array length".into()));
        }
        Ok(Self { grid, coeffs })
    }

    /// Transform three physical components.
    pub fn from_physical(fft: &Fft3, components: [&ScalarField; 3]) -> Result<Self> {
        let grid = *components[0].grid();
        if components.iter().any(|c| c.grid() != &grid) {
            return Err(Error::GridMismatch("components on different grids".into()));
        }
        let coeffs = components.map(|c| fft.forward_real(c.values()));
        Ok(Self { grid, coeffs })
    }

    pub fn from_fn(fft: &Fft3, grid: Grid, f: impl Fn([f64; 3]) -> [f64; 3]) -> Self {
        let vals: Vec<[f64; 3]> = (0..grid.len()).map(|i| f(grid.position(i))).collect();
        let coeffs = [0, 1, 2].map(|a| {
            let c: Vec<f64> = vals.iter().map(|v| v[a]).collect();
            fft.forward_real(&c)
        });
        Self { grid, coeffs }
    }

    pub fn to_physical(&self, fft: &Fft3) -> [ScalarField; 3] {
        [0, 1, 2].map(|a| ScalarField::from_parts(self.grid, fft.inverse_real(&self.coeffs[a])))
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Vec<Complex64>; 3] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Vec<Complex64>; 3] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> [Vec<Complex64>; 3] {
        self.coeffs
    }

    /// Largest `|û(ξ) - conj(û(-ξ))|` over all modes and components.
    pub fn conjugate_symmetry_error(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for c in &self.coeffs {
            for idx in 0..self.grid.len() {
                let j = self.grid.conjugate_index(idx);
                worst = worst.max((c[idx] - c[j].conj()).norm());
            }
        }
        worst
    }

    /// Largest per-mode divergence `|ξ·û(ξ)|`, relative to the largest
    /// coefficient magnitude. Zero for the zero field.
    pub fn divergence_residual(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for idx in 0..self.grid.len() {
            let k = self.grid.wavevector(idx);
            let kmag = (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt();
            let u = self.mode(idx);
            scale = scale.max(u.iter().map(|c| c.norm()).fold(0.0, f64::max));
            if kmag > 0.0 {
                let d = u[0] * k[0] + u[1] * k[1] + u[2] * k[2];
                worst = worst.max(d.norm() / kmag);
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            worst / scale
        }
    }

    pub fn is_divergence_free(&self) -> bool {
        self.divergence_residual() <= DIVERGENCE_TOLERANCE
    }

    pub fn ensure_divergence_free(&self) -> Result<()> {
        let residual = self.divergence_residual();
        if residual <= DIVERGENCE_TOLERANCE {
            Ok(())
        } else {
            Err(Error::NotDivergenceFree { residual })
        }
    }

    #[inline]
    pub fn mode(&self, idx: usize) -> [Complex64; 3] {
        [self.coeffs[0][idx], self.coeffs[1][idx], self.coeffs[2][idx]]
    }

    #[inline]
    fn set_mode(&mut self, idx: usize, v: [Complex64; 3]) {
        for a in 0..3 {
            self.coeffs[a][idx] = v[a];
        }
    }

    /// Spectral inner product `⟨u, v⟩_{L²}`.
    pub fn inner(&self, other: &Self) -> f64 {
        let vol = self.grid.volume();
        let mut acc = 0.0;
        for a in 0..3 {
            for (x, y) in self.coeffs[a].iter().zip(&other.coeffs[a]) {
                acc += (x * y.conj()).re;
            }
        }
        acc * vol
    }

    /// `‖u‖²_{L²}` by Parseval.
    pub fn l2_sq(&self) -> f64 {
        self.weighted_sq(|_| 1.0)
    }

    /// `‖∇u‖²_{L²} = ‖u‖²_{Ḣ¹}`.
    pub fn grad_l2_sq(&self) -> f64 {
        self.weighted_sq(|k| k)
    }

    /// `‖Δu‖²_{L²}`.
    pub fn laplacian_l2_sq(&self) -> f64 {
        self.weighted_sq(|k| k * k)
    }

    /// `Σ_ξ w(|ξ|²) |û(ξ)|²` times the box volume.
    pub fn weighted_sq(&self, w: impl Fn(f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for idx in 0..self.grid.len() {
            let k = self.grid.wavevector(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            let m: f64 = (0..3).map(|a| self.coeffs[a][idx].norm_sqr()).sum();
            if m != 0.0 {
                acc += w(k2) * m;
            }
        }
        acc * self.grid.volume()
    }

    pub fn scale(&mut self, factor: f64) {
        for c in self.coeffs.iter_mut() {
            for v in c.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn add_scaled(&mut self, other: &Self, factor: f64) {
        for a in 0..3 {
            for (x, y) in self.coeffs[a].iter_mut().zip(&other.coeffs[a]) {
                *x += y * factor;
            }
        }
    }

    /// Helmholtz–Leray projection `û − ξ(ξ·û)/|ξ|²`, zero mean mode.
    pub fn project_div_free(&self) -> Self {
        let mut out = self.clone();
        out.project_in_place();
        out
    }

    pub fn project_in_place(&mut self) {
        for idx in 0..self.grid.len() {
            let k = self.grid.wavevector(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            if k2 == 0.0 {
                // Mean mode, and modes made only of Nyquist components.
                if idx == 0 {
                    self.set_mode(idx, [Complex64::default(); 3]);
                }
                continue;
            }
            let u = self.mode(idx);
            let d = (u[0] * k[0] + u[1] * k[1] + u[2] * k[2]) / k2;
            self.set_mode(idx, [u[0] - d * k[0], u[1] - d * k[1], u[2] - d * k[2]]);
        }
    }

    /// Vorticity `ω̂ = iξ × û`.
    pub fn curl(&self) -> Self {
        let mut out = Self::zeros(self.grid);
        for idx in 0..self.grid.len() {
            let k = self.grid.wavevector(idx);
            let u = self.mode(idx);
            out.set_mode(
                idx,
                [
                    I * (u[2] * k[1] - u[1] * k[2]),
                    I * (u[0] * k[2] - u[2] * k[0]),
                    I * (u[1] * k[0] - u[0] * k[1]),
                ],
            );
        }
        out
    }

    /// Spectral `∂_axis` of component `comp`.
    pub fn derivative(&self, comp: usize, axis: usize) -> Vec<Complex64> {
        (0..self.grid.len())
            .map(|idx| I * self.grid.wavevector(idx)[axis] * self.coeffs[comp][idx])
            .collect()
    }

    pub fn laplacian(&self) -> Self {
        let mut out = self.clone();
        for idx in 0..self.grid.len() {
            let k = self.grid.wavevector(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            for a in 0..3 {
                out.coeffs[a][idx] *= -k2;
            }
        }
        out
    }

    /// Physical velocity gradient, `grad[i][j] = ∂_j u_i`.
    pub fn gradient_physical(&self, fft: &Fft3) -> [[ScalarField; 3]; 3] {
        [0, 1, 2].map(|i| {
            [0, 1, 2].map(|j| ScalarField::from_parts(self.grid, fft.inverse_real(&self.derivative(i, j))))
        })
    }

    /// Rate-of-strain tensor `S = ½(∇u + ∇uᵀ)` in physical space.
    pub fn strain(&self, fft: &Fft3) -> StrainField {
        let sym = |i: usize, j: usize| -> Vec<f64> {
            let a = self.derivative(i, j);
            let b = self.derivative(j, i);
            let c: Vec<Complex64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
            fft.inverse_real(&c)
        };
        StrainField::from_components(
            self.grid,
            [sym(0, 0), sym(1, 1), sym(2, 2), sym(0, 1), sym(0, 2), sym(1, 2)],
        )
    }

    /// Spectral `‖S‖²_{L²}` and `‖S‖²_{Ḣ¹}` summed over all nine entries.
    pub fn strain_norms_sq(&self) -> (f64, f64) {
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for idx in 0..self.grid.len() {
            let k = self.grid.wavevector(idx);
            let k2 = k[0] * k[0] + k[1] * k[1] + k[2] * k[2];
            let u = self.mode(idx);
            let mut m = 0.0;
            for i in 0..3 {
                for j in 0..3 {
                    let s = 0.5 * I * (u[j] * k[i] + u[i] * k[j]);
                    m += s.norm_sqr();
                }
            }
            l2 += m;
            h1 += k2 * m;
        }
        let v = self.grid.volume();
        (l2 * v, h1 * v)
    }
}

/// Symmetric strain tensor per grid point with lazily computed eigenvalues.
#[derive(Debug, Clone)]
pub struct StrainField {
    grid: Grid,
    /// xx, yy, zz, xy, xz, yz
    components: [Vec<f64>; 6],
    eigen: OnceLock<Eigenvalues>,
}

/// Sorted eigenvalue fields `λ₁ ≤ λ₂ ≤ λ₃`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenvalues {
    pub l1: ScalarField,
    pub l2: ScalarField,
    pub l3: ScalarField,
}

impl Eigenvalues {
    /// `λ₂⁺ = max(0, λ₂)`.
    pub fn lambda2_plus(&self) -> ScalarField {
        self.l2.map(|v| v.max(0.0))
    }

    /// Pointwise `det S = λ₁λ₂λ₃`.
    pub fn determinant(&self) -> ScalarField {
        let v = self
            .l1
            .values()
            .iter()
            .zip(self.l2.values())
            .zip(self.l3.values())
            .map(|((a, b), c)| a * b * c)
            .collect();
        ScalarField::from_parts(*self.l1.grid(), v)
    }
}

impl StrainField {
    pub fn from_components(grid: Grid, components: [Vec<f64>; 6]) -> Self {
        Self {
            grid,
            components,
            eigen: OnceLock::new(),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn components(&self) -> &[Vec<f64>; 6] {
        &self.components
    }

    #[inline]
    pub fn at(&self, idx: usize) -> Sym3 {
        let c = &self.components;
        Sym3::new(c[0][idx], c[1][idx], c[2][idx], c[3][idx], c[4][idx], c[5][idx])
    }

    /// Pointwise Frobenius norm `|S|`.
    pub fn magnitude(&self) -> ScalarField {
        let v = (0..self.grid.len()).map(|i| self.at(i).frobenius_sq().sqrt()).collect();
        ScalarField::from_parts(self.grid, v)
    }

    pub fn trace(&self) -> ScalarField {
        let v = (0..self.grid.len()).map(|i| self.at(i).trace()).collect();
        ScalarField::from_parts(self.grid, v)
    }

    /// `‖S‖²_{L²}` by quadrature.
    pub fn l2_sq(&self) -> f64 {
        let s: f64 = (0..self.grid.len()).map(|i| self.at(i).frobenius_sq()).sum();
        s * self.grid.cell_volume()
    }

    /// Sorted eigenvalue fields, computed once.
    pub fn eigenvalues(&self) -> &Eigenvalues {
        self.eigen.get_or_init(|| {
            let e: Vec<[f64; 3]> = (0..self.grid.len())
                .into_par_iter()
                .map(|i| self.at(i).eigenvalues())
                .collect();
            let pick = |k: usize| ScalarField::from_parts(self.grid, e.iter().map(|v| v[k]).collect());
            Eigenvalues {
                l1: pick(0),
                l2: pick(1),
                l3: pick(2),
            }
        })
    }
}

/// Sorted eigenvalues of a strain field and `λ₂⁺`.
pub fn strain_eigenvalues(strain: &StrainField) -> (&Eigenvalues, ScalarField) {
    let e = strain.eigenvalues();
    (e, e.lambda2_plus())
}
