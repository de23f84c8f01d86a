//! Norms, field generators and the two functional-inequality checks that
//! live at the level of single snapshots (sharp Sobolev, spectral isometry).

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::grid::{Grid, ScalarField};
use crate::spectral::SpectralVectorField;

/// Sharp constant of `‖f‖_{L⁶} ≤ C ‖∇f‖_{L²}` on ℝ³: `(1/√3)(2/π)^{2/3}`.
pub fn sobolev_constant() -> f64 {
    (2.0 / PI).powf(2.0 / 3.0) / 3.0_f64.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormKind {
    Lq(f64),
    Linf,
    L2,
    /// Homogeneous `Ḣ¹`, equal to `‖∇f‖_{L²}`.
    Hdot1,
}

/// Cell-volume quadrature `(Σ|f_i|^q ΔV)^{1/q}`.
pub fn lq_quadrature(values: &[f64], cell_volume: f64, q: f64) -> Result<f64> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(Error::InvalidExponent(format!("q = {q} must lie in [1, ∞)")));
    }
    let s: f64 = values.iter().map(|v| v.abs().powf(q)).sum();
    Ok((s * cell_volume).powf(1.0 / q))
}

/// Norm of a scalar field. `Hdot1` is evaluated spectrally.
pub fn scalar_norm(f: &ScalarField, kind: NormKind) -> Result<f64> {
    let dv = f.grid().cell_volume();
    match kind {
        NormKind::Lq(q) => lq_quadrature(f.values(), dv, q),
        NormKind::L2 => lq_quadrature(f.values(), dv, 2.0),
        NormKind::Linf => Ok(f.max_abs()),
        NormKind::Hdot1 => {
            let fft = Fft3::new(f.grid());
            Ok(scalar_hdot1_sq(f, &fft).sqrt())
        }
    }
}

/// Spectral `‖f‖²_{L²}` by Parseval.
pub fn scalar_parseval_sq(f: &ScalarField, fft: &Fft3) -> f64 {
    let c = fft.forward_real(f.values());
    c.iter().map(|z| z.norm_sqr()).sum::<f64>() * f.grid().volume()
}

/// Spectral `‖∇f‖²_{L²}`.
pub fn scalar_hdot1_sq(f: &ScalarField, fft: &Fft3) -> f64 {
    let g = f.grid();
    let c = fft.forward_real(f.values());
    let s: f64 = c
        .iter()
        .enumerate()
        .map(|(idx, z)| {
            let k = g.wavevector(idx);
            (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) * z.norm_sqr()
        })
        .sum();
    s * g.volume()
}

/// Physical `|∂f|` components by spectral differentiation.
pub fn scalar_gradient(f: &ScalarField, fft: &Fft3) -> [ScalarField; 3] {
    let g = *f.grid();
    let c = fft.forward_real(f.values());
    [0, 1, 2].map(|axis| {
        let d: Vec<Complex64> = c
            .iter()
            .enumerate()
            .map(|(idx, z)| Complex64::new(0.0, g.wavevector(idx)[axis]) * z)
            .collect();
        ScalarField::new(g, fft.inverse_real(&d)).expect("finite derivative")
    })
}

/// Pointwise Euclidean magnitude of a vector field.
pub fn magnitude(u: &SpectralVectorField, fft: &Fft3) -> ScalarField {
    let [a, b, c] = u.to_physical(fft);
    let v = a
        .values()
        .iter()
        .zip(b.values())
        .zip(c.values())
        .map(|((x, y), z)| (x * x + y * y + z * z).sqrt())
        .collect();
    ScalarField::new(*u.grid(), v).expect("finite magnitude")
}

/// Norm of a vector field; `Lq`/`Linf` act on the pointwise magnitude.
pub fn vector_norm(u: &SpectralVectorField, kind: NormKind, fft: &Fft3) -> Result<f64> {
    match kind {
        NormKind::Hdot1 => Ok(u.grad_l2_sq().sqrt()),
        other => scalar_norm(&magnitude(u, fft), other),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevReport {
    pub lhs_l6: f64,
    pub grad_l2: f64,
    pub ratio: f64,
    pub constant: f64,
    /// Set when `ratio > constant`.
    pub exceeds: bool,
}

/// Ratio `‖f‖_{L⁶} / ‖∇f‖_{L²}` against the sharp constant.
pub fn sobolev_check(f: &ScalarField) -> Result<SobolevReport> {
    let fft = Fft3::new(f.grid());
    let grad = scalar_hdot1_sq(f, &fft).sqrt();
    let l2 = scalar_norm(f, NormKind::L2)?;
    let kmin = 2.0 * PI / f.grid().box_length();
    // Constants have a roundoff-level spectral gradient.
    if grad == 0.0 || grad <= 1e-12 * kmin * l2 {
        return Err(Error::ZeroGradient);
    }
    let l6 = scalar_norm(f, NormKind::Lq(6.0))?;
    let constant = sobolev_constant();
    let ratio = l6 / grad;
    Ok(SobolevReport {
        lhs_l6: l6,
        grad_l2: grad,
        ratio,
        constant,
        exceeds: ratio > constant,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsometryReport {
    pub grad_sq: f64,
    pub vorticity_sq: f64,
    pub strain_sq: f64,
    /// Largest relative deviation among `‖ω‖² = ‖∇u‖²` and `2‖S‖² = ‖∇u‖²`.
    pub deviation: f64,
}

/// `‖∇u‖² = ‖ω‖² = 2‖S‖²` for divergence-free `u`.
pub fn isometry_check(u: &SpectralVectorField) -> Result<IsometryReport> {
    u.ensure_divergence_free()?;
    let grad_sq = u.grad_l2_sq();
    let vorticity_sq = u.curl().l2_sq();
    let (strain_sq, _) = u.strain_norms_sq();
    let deviation = if grad_sq == 0.0 {
        0.0
    } else {
        ((vorticity_sq - grad_sq).abs() / grad_sq).max((2.0 * strain_sq - grad_sq).abs() / grad_sq)
    };
    Ok(IsometryReport {
        grad_sq,
        vorticity_sq,
        strain_sq,
        deviation,
    })
}

/// Generator recipes.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldKind {
    Zero,
    /// `(sin x₁ cos x₂ cos x₃, −cos x₁ sin x₂ cos x₃, 0)`
    TaylorGreen,
    /// Divergence-free random field with shell energy `E(k) ∝ k^slope` on
    /// integer shells `1 ≤ k ≤ cutoff`, normalized to unit mean `|u|²`.
    RandomDivFree { seed: u64, slope: f64, cutoff: usize },
    /// Scalar `exp(−|x−c|²/(2w²))`, periodic distance.
    GaussianBump { center: [f64; 3], width: f64 },
}

impl FromStr for FieldKind {
    type Err = Error;

    /// `zero`, `taylor_green`, or `random_div_free` with seed 0, slope −5/3
    /// and cutoff n/3. Bumps need explicit parameters and have no short name.
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zero" => Ok(FieldKind::Zero),
            "taylor_green" => Ok(FieldKind::TaylorGreen),
            "random_div_free" => Ok(FieldKind::RandomDivFree {
                seed: 0,
                slope: -5.0 / 3.0,
                cutoff: 0,
            }),
            other => Err(Error::InvalidArgument(format!("unknown field kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Vector(SpectralVectorField),
    Scalar(ScalarField),
}

pub fn make_field(kind: &FieldKind, grid: Grid, fft: &Fft3) -> Result<Field> {
    match kind {
        FieldKind::GaussianBump { center, width } => {
            if !(*width > 0.0) {
                return Err(Error::InvalidArgument(format!("bump width {width} must be positive")));
            }
            let w2 = width * width;
            let v = (0..grid.len())
                .map(|i| {
                    let d = grid.periodic_displacement(i, *center);
                    (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (2.0 * w2)).exp()
                })
                .collect();
            Ok(Field::Scalar(ScalarField::new(grid, v)?))
        }
        _ => make_velocity(kind, grid, fft).map(Field::Vector),
    }
}

/// Vector-valued generators. Scalar kinds are rejected.
pub fn make_velocity(kind: &FieldKind, grid: Grid, fft: &Fft3) -> Result<SpectralVectorField> {
    match *kind {
        FieldKind::Zero => Ok(SpectralVectorField::zeros(grid)),
        FieldKind::TaylorGreen => {
            let mut u = SpectralVectorField::from_fn(fft, grid, |[x, y, z]| {
                [x.sin() * y.cos() * z.cos(), -x.cos() * y.sin() * z.cos(), 0.0]
            });
            u.project_in_place();
            Ok(u)
        }
        FieldKind::RandomDivFree { seed, slope, cutoff } => random_div_free(grid, fft, seed, slope, cutoff),
        FieldKind::GaussianBump { .. } => Err(Error::InvalidArgument(
            "gaussian_bump is a scalar field, not a velocity".into(),
        )),
    }
}

/// Integer shell index `round(|m|)` of a mode, or `None` if it touches Nyquist.
pub fn shell_of(grid: &Grid, idx: usize) -> Option<usize> {
    let (i, j, k) = grid.coords(idx);
    if grid.is_nyquist(i) || grid.is_nyquist(j) || grid.is_nyquist(k) {
        return None;
    }
    let m = [grid.mode(i), grid.mode(j), grid.mode(k)];
    let r = ((m[0] * m[0] + m[1] * m[1] + m[2] * m[2]) as f64).sqrt();
    Some(r.round() as usize)
}

fn random_div_free(grid: Grid, fft: &Fft3, seed: u64, slope: f64, cutoff: usize) -> Result<SpectralVectorField> {
    let cutoff = if cutoff == 0 { grid.n() / 3 } else { cutoff };
    if cutoff >= grid.n() / 2 {
        return Err(Error::InvalidArgument(format!(
            "cutoff {cutoff} not resolved on n = {}",
            grid.n()
        )));
    }
    if !slope.is_finite() {
        return Err(Error::InvalidArgument("spectral slope must be finite".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise: [Vec<f64>; 3] = [0, 1, 2].map(|_| {
        (0..grid.len())
            .map(|_| StandardNormal.sample(&mut rng))
            .collect::<Vec<f64>>()
    });
    let coeffs = [0, 1, 2].map(|a| fft.forward_real(&noise[a]));
    let mut u = SpectralVectorField::from_coeffs(grid, coeffs)?;

    let shells: Vec<Option<usize>> = (0..grid.len())
        .map(|idx| shell_of(&grid, idx).filter(|&s| s >= 1 && s <= cutoff))
        .collect();
    for (idx, shell) in shells.iter().enumerate() {
        if shell.is_none() {
            for c in u.coeffs_mut().iter_mut() {
                c[idx] = Complex64::default();
            }
        }
    }
    u.project_in_place();

    // Rescale each shell to its target energy; real factors keep the field real.
    let mut energy = vec![0.0; cutoff + 1];
    for (idx, shell) in shells.iter().enumerate() {
        if let Some(s) = shell {
            energy[*s] += u.mode(idx).iter().map(|c| c.norm_sqr()).sum::<f64>();
        }
    }
    let target: Vec<f64> = (0..=cutoff).map(|s| if s == 0 { 0.0 } else { (s as f64).powf(slope) }).collect();
    let total: f64 = target.iter().sum();
    let factors: Vec<f64> = (0..=cutoff)
        .map(|s| if energy[s] > 0.0 { (target[s] / total / energy[s]).sqrt() } else { 0.0 })
        .collect();
    for (idx, shell) in shells.iter().enumerate() {
        if let Some(s) = shell {
            for c in u.coeffs_mut().iter_mut() {
                c[idx] *= factors[*s];
            }
        }
    }
    Ok(u)
}

/// Shell-binned energy spectrum `E(s) = ½ L³ Σ_{round|m| = s} |û|²`.
pub fn energy_spectrum(u: &SpectralVectorField) -> Vec<f64> {
    let g = u.grid();
    let mut e = vec![0.0; g.n()];
    for idx in 0..g.len() {
        if let Some(s) = shell_of(g, idx) {
            if s < e.len() {
                e[s] += 0.5 * g.volume() * u.mode(idx).iter().map(|c| c.norm_sqr()).sum::<f64>();
            }
        }
    }
    e
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(n: usize) -> (Grid, Fft3) {
        let g = Grid::periodic(n).unwrap();
        (g, Fft3::new(&g))
    }

    #[test]
    fn indicator_norm() {
        // Indicator of a set of measure 2 built from whole cells.
        let g = Grid::new(8, 2.0).unwrap(); // cell volume 1/64
        let mut v = vec![0.0; g.len()];
        for x in v.iter_mut().take(128) {
            *x = 1.0;
        }
        let f = ScalarField::new(g, v).unwrap();
        let n = scalar_norm(&f, NormKind::Lq(3.0)).unwrap();
        assert!((n - 2.0_f64.powf(1.0 / 3.0)).abs() < 1e-14);
        assert!(scalar_norm(&f, NormKind::Lq(0.5)).is_err());
        assert_eq!(scalar_norm(&f, NormKind::Linf).unwrap(), 1.0);
    }

    #[test]
    fn sine_l2_closed_form() {
        let (g, _) = setup(16);
        let f = ScalarField::from_fn(g, |x| x[0].sin());
        let n = scalar_norm(&f, NormKind::L2).unwrap();
        let exact = (4.0 * PI.powi(3)).sqrt();
        assert!((n - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn parseval_matches_quadrature() {
        let (g, fft) = setup(16);
        let f = ScalarField::from_fn(g, |x| (x[0] * 3.0).sin() * x[1].cos() + 0.3 * (x[2] - x[1]).cos().powi(3));
        let q = scalar_norm(&f, NormKind::L2).unwrap().powi(2);
        let p = scalar_parseval_sq(&f, &fft);
        assert!((q - p).abs() <= 1e-10 * q);
    }

    #[test]
    fn hdot1_equals_gradient_l2() {
        let (g, fft) = setup(16);
        let f = ScalarField::from_fn(g, |x| (2.0 * x[0]).sin() * x[2].cos());
        let spectral = scalar_norm(&f, NormKind::Hdot1).unwrap();
        let grad = scalar_gradient(&f, &fft);
        let quad: f64 = grad.iter().map(|c| scalar_norm(c, NormKind::L2).unwrap().powi(2)).sum();
        assert!((spectral - quad.sqrt()).abs() <= 1e-10 * spectral);
    }

    #[test]
    fn sobolev_zero_field_is_undefined() {
        let (g, _) = setup(16);
        assert_eq!(sobolev_check(&ScalarField::zeros(g)), Err(Error::ZeroGradient));
        let c = ScalarField::from_fn(g, |_| 2.5);
        assert_eq!(sobolev_check(&c), Err(Error::ZeroGradient));
    }

    #[test]
    fn sobolev_constant_value() {
        assert!((sobolev_constant() - 0.427_260_542_862_5).abs() < 1e-12);
    }

    #[test]
    fn sobolev_gaussian_bump_below_constant() {
        let (g, fft) = setup(64);
        let l = g.box_length();
        let Field::Scalar(f) = make_field(
            &FieldKind::GaussianBump { center: [l / 2.0; 3], width: l / 20.0 },
            g,
            &fft,
        )
        .unwrap() else {
            panic!()
        };
        let r = sobolev_check(&f).unwrap();
        assert!(!r.exceeds);
        // Scale-free Gaussian ratio: (π^{3/2}/3^{3/2})^{1/6} / (3π^{3/2}/2)^{1/2}
        let exact = (PI.powf(1.5) / 3.0_f64.powf(1.5)).powf(1.0 / 6.0) / (1.5 * PI.powf(1.5)).sqrt();
        assert!((r.ratio - exact).abs() < 1e-6, "{} vs {exact}", r.ratio);
    }

    #[test]
    fn isometry_zero_and_taylor_green() {
        let (g, fft) = setup(16);
        let r = isometry_check(&SpectralVectorField::zeros(g)).unwrap();
        assert_eq!((r.grad_sq, r.vorticity_sq, r.strain_sq, r.deviation), (0.0, 0.0, 0.0, 0.0));
        let u = make_velocity(&FieldKind::TaylorGreen, g, &fft).unwrap();
        let r = isometry_check(&u).unwrap();
        assert!(r.deviation <= 1e-10);
        // Every mode sits on |ξ|² = 3 and the mean of |u|² is 1/4.
        assert!((r.grad_sq - 0.75 * (2.0 * PI).powi(3)).abs() < 1e-9);
    }

    #[test]
    fn isometry_rejects_compressible() {
        let (g, fft) = setup(16);
        let v = SpectralVectorField::from_fn(&fft, g, |x| [x[0].cos(), 0.0, 0.0]);
        assert!(matches!(isometry_check(&v), Err(Error::NotDivergenceFree { .. })));
    }

    #[test]
    fn taylor_green_is_divergence_free() {
        let (g, fft) = setup(16);
        let u = make_velocity(&FieldKind::TaylorGreen, g, &fft).unwrap();
        assert!(u.divergence_residual() <= 1e-12);
        assert!(u.conjugate_symmetry_error() < 1e-15);
    }

    #[test]
    fn random_field_deterministic_and_solenoidal() {
        let (g, fft) = setup(16);
        let kind = FieldKind::RandomDivFree { seed: 7, slope: -5.0 / 3.0, cutoff: 5 };
        let a = make_velocity(&kind, g, &fft).unwrap();
        let b = make_velocity(&kind, g, &fft).unwrap();
        assert_eq!(a, b);
        assert!(a.is_divergence_free());
        assert!(a.conjugate_symmetry_error() < 1e-14);
        let c = make_velocity(&FieldKind::RandomDivFree { seed: 8, slope: -5.0 / 3.0, cutoff: 5 }, g, &fft).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_field_follows_slope() {
        let (g, fft) = setup(32);
        let slope = -5.0 / 3.0;
        let u = make_velocity(&FieldKind::RandomDivFree { seed: 1, slope, cutoff: 10 }, g, &fft).unwrap();
        // Independent binning straight from the coefficients.
        let mut bins = [0.0f64; 11];
        for idx in 0..g.len() {
            let (i, j, k) = g.coords(idx);
            let m = [g.mode(i), g.mode(j), g.mode(k)];
            let r = ((m.iter().map(|x| x * x).sum::<i64>()) as f64).sqrt().round() as usize;
            if r <= 10 {
                bins[r] += u.mode(idx).iter().map(|c| c.norm_sqr()).sum::<f64>();
            }
        }
        for s in 2..=10 {
            let measured = bins[s] / bins[1];
            let expected = (s as f64).powf(slope);
            assert!((measured / expected - 1.0).abs() < 0.05, "shell {s}");
        }
        let spec = energy_spectrum(&u);
        assert!(spec[11..].iter().all(|&e| e == 0.0));
    }

    #[test]
    fn unknown_kind_rejected() {
        assert!("vortex_ring".parse::<FieldKind>().is_err());
        assert_eq!("taylor_green".parse::<FieldKind>().unwrap(), FieldKind::TaylorGreen);
        let (g, fft) = setup(8);
        assert!(make_velocity(&FieldKind::GaussianBump { center: [0.0; 3], width: 1.0 }, g, &fft).is_err());
    }
}
