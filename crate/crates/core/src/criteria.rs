//! Enstrophy-growth certificates and the monitors built on level-set splits.
//!
//! Each certificate integrates a rate along sampled fields and compares
//! `lhs(t)` with `lhs(0)·exp(∫₀ᵗ rate)`. The rate constants `C_p` are
//! reconstructed from the interpolation/Sobolev/Young chain behind each bound.

use std::f64::consts::{PI, SQRT_2};
use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fields::{lq_quadrature, magnitude, sobolev_constant};
use crate::grid::{Grid, ScalarField};
use crate::lorentz::{cumulative_trapezoid, split_values, trapezoid, weak_lq_norm, Measured, ScalingExponents};
use crate::solver::TrajectoryLog;
use crate::spectral::SpectralVectorField;

/// Certificates pass while `(rhs − lhs)/rhs ≥ −MARGIN_TOLERANCE`.
pub const MARGIN_TOLERANCE: f64 = 1e-6;
/// Relative slack of the weak-convergence bound.
pub const WEAK_CONVERGENCE_SLACK: f64 = 1e-9;

/// Which field a bound controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// `u`, controlling `‖∇u‖²`.
    Velocity,
    /// `λ₂⁺`, controlling `‖S‖²`.
    Strain,
    /// `ω`, controlling `‖ω‖²`.
    Vorticity,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Velocity, Variant::Strain, Variant::Vorticity];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Velocity => "velocity",
            Variant::Strain => "strain",
            Variant::Vorticity => "vorticity",
        }
    }

    /// `(k, m)` of the scaling family `k/p + m/q = 1`.
    pub fn family(self) -> (f64, f64) {
        match self {
            Variant::Velocity => (2.0, 3.0),
            Variant::Strain | Variant::Vorticity => (1.0, 1.5),
        }
    }

    /// Coefficient of the `L^∞` part in the growth rate, as a function of
    /// its sup norm `x`.
    pub fn sigma_rate(self, x: f64, nu: f64) -> f64 {
        match self {
            Variant::Velocity => x * x / nu,
            Variant::Strain => 2.0 * x,
            Variant::Vorticity => SQRT_2 * x,
        }
    }

    /// Endpoint exponent: `L³` for velocity, `L^{3/2}` otherwise.
    pub fn endpoint_exponent(self) -> f64 {
        match self {
            Variant::Velocity => 3.0,
            Variant::Strain | Variant::Vorticity => 1.5,
        }
    }

    /// Endpoint threshold divided by `ν`.
    pub fn endpoint_threshold_coefficient(self) -> f64 {
        match self {
            Variant::Strain => 3.0 * (PI / 2.0).powf(4.0 / 3.0),
            Variant::Velocity => 3.0_f64.sqrt() * (PI / 2.0).powf(2.0 / 3.0),
            Variant::Vorticity => 3.0 * PI.powf(4.0 / 3.0) / 2.0_f64.powf(5.0 / 6.0),
        }
    }

    pub fn endpoint_threshold_formula(self) -> &'static str {
        match self {
            Variant::Strain => "3(pi/2)^(4/3) nu",
            Variant::Velocity => "sqrt(3)(pi/2)^(2/3) nu",
            Variant::Vorticity => "3 pi^(4/3) / 2^(5/6) nu",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown variant `{s}`")))
    }
}

/// Check `(p, q)` against the variant's family with `m < q < ∞`.
pub fn family_exponents(variant: Variant, p: f64, q: f64) -> Result<ScalingExponents> {
    let (k, m) = variant.family();
    if !(q > m && q.is_finite()) {
        return Err(Error::InvalidExponent(format!("{variant} needs {m} < q < ∞, got q = {q}")));
    }
    ScalingExponents::new(k, m, p, q)
}

/// An explicit growth constant and the inputs it was built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CpDerivation {
    pub variant: Variant,
    pub p: f64,
    pub q: f64,
    /// Sobolev constant used for `‖f‖_{L⁶} ≤ C‖∇f‖_{L²}`.
    pub sobolev: f64,
    /// `K` in the product `K·a·y` that Young's inequality splits.
    pub prefactor: f64,
    /// Young exponent on the dissipative factor `y`; `1/p + 1/b = 1`.
    pub young_b: f64,
    /// Share of the dissipation absorbed: `2ν‖·‖²_{Ḣ¹}` (2) or `ν‖Δu‖²` (1).
    pub absorbed: f64,
    pub cp: f64,
}

impl CpDerivation {
    /// The Young split `K a y ≤ absorbed·ν·y^b + C_p ν^{1−p} a^p` evaluated
    /// as `(lhs, rhs)`.
    pub fn young_sides(&self, a: f64, y: f64, nu: f64) -> (f64, f64) {
        (
            self.prefactor * a * y,
            self.absorbed * nu * y.powf(self.young_b) + self.cp * nu.powf(1.0 - self.p) * a.powf(self.p),
        )
    }

    /// `C_p / ν^{p−1}`.
    pub fn rate_coefficient(&self, nu: f64) -> f64 {
        self.cp / nu.powf(self.p - 1.0)
    }
}

/// `C_p` for a variant, with the sharp Sobolev constant.
pub fn derive_cp(p: f64, q: f64, variant: Variant) -> Result<CpDerivation> {
    derive_cp_with(p, q, variant, sobolev_constant())
}

/// `C_p` for an arbitrary Sobolev constant.
///
/// Hölder and `L²`–`L⁶` interpolation bound the nonlinear term by
/// `K ‖v‖_q · X^{2/p} · y`, with `X` the controlled quantity and `y` a power
/// of the dissipation; Young with exponents `(p, b)` then absorbs `y^b`.
/// * strain: `K = 2C^{3/q}`, `y = ‖S‖_{Ḣ¹}^{3/q}`, `b = 2q/3`, absorbs `2ν y^b`
/// * vorticity: `K = √2 C^{3/q}`, `y = ‖ω‖_{Ḣ¹}^{3/q}`, `b = 2q/3`, absorbs `2ν y^b`
/// * velocity: `K = 2C^{3/q}`, `y = ‖Δu‖^{1+3/q}`, `b = 2q/(q+3)`, absorbs `ν y^b`
///
/// The minimum over the Young parameter gives `C_p = K^p / (p (absorbed·b)^{p−1})`.
pub fn derive_cp_with(p: f64, q: f64, variant: Variant, sobolev: f64) -> Result<CpDerivation> {
    family_exponents(variant, p, q)?;
    if !(sobolev > 0.0 && sobolev.is_finite()) {
        return Err(Error::InvalidArgument(format!("Sobolev constant {sobolev} must be positive")));
    }
    let (prefactor, young_b, absorbed, dissipation_power) = match variant {
        Variant::Strain => (2.0 * sobolev.powf(3.0 / q), 2.0 * q / 3.0, 2.0, 3.0 / q),
        Variant::Vorticity => (SQRT_2 * sobolev.powf(3.0 / q), 2.0 * q / 3.0, 2.0, 3.0 / q),
        Variant::Velocity => (2.0 * sobolev.powf(3.0 / q), 2.0 * q / (q + 3.0), 1.0, 1.0 + 3.0 / q),
    };
    // Exponent bookkeeping of the chain: conjugate Young pair, y^b is the
    // squared dissipation norm, and the leftover power of X is exactly 2.
    let (_, m) = variant.family();
    let controlled_power = match variant {
        Variant::Velocity => 1.0 - m / q,
        _ => 2.0 - 2.0 * m / q,
    } * p;
    let checks = [
        1.0 / p + 1.0 / young_b - 1.0,
        dissipation_power * young_b - 2.0,
        controlled_power - 2.0,
    ];
    if checks.iter().any(|c| c.abs() > 1e-12) {
        return Err(Error::InvalidExponent(format!(
            "inequality chain does not close for {variant} at p = {p}, q = {q}"
        )));
    }
    let cp = prefactor.powf(p) / (p * (absorbed * young_b).powf(p - 1.0));
    Ok(CpDerivation {
        variant,
        p,
        q,
        sobolev,
        prefactor,
        young_b,
        absorbed,
        cp,
    })
}

/// How a field is cut into an above part (`Lᑫ`) and a below part (`L^∞`).
#[derive(Debug, Clone, PartialEq)]
pub enum CutoffRule {
    Constant(f64),
    /// Linear interpolation in a table covering the trajectory.
    Table { times: Vec<f64>, values: Vec<f64> },
    /// `R ≡ 0`: the whole field is the `Lᑫ` part.
    AllInLq,
    /// `R ≡ ∞`: the whole field is the `L^∞` part.
    AllInLinf,
    /// Nearest-rank quantile of the field's magnitude at each time.
    Quantile(f64),
    /// `R(t) = base + slope·t`.
    Affine { base: f64, slope: f64 },
}

impl CutoffRule {
    pub fn median() -> Self {
        CutoffRule::Quantile(0.5)
    }

    pub fn label(&self) -> String {
        match self {
            CutoffRule::Constant(c) => format!("constant({c})"),
            CutoffRule::Table { .. } => "table".into(),
            CutoffRule::AllInLq => "all_in_lq".into(),
            CutoffRule::AllInLinf => "all_in_linf".into(),
            CutoffRule::Quantile(l) if *l == 0.5 => "median".into(),
            CutoffRule::Quantile(l) => format!("quantile({l})"),
            CutoffRule::Affine { base, slope } => format!("affine({base},{slope})"),
        }
    }

    /// Reject negative values and tables that do not cover `[t0, t1]`.
    pub fn validate(&self, t0: f64, t1: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self {
            CutoffRule::Constant(c) if !(*c >= 0.0) => bad(format!("cutoff {c} must be nonnegative")),
            CutoffRule::Table { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return bad("cutoff table needs matching nonempty columns".into());
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("cutoff table times must increase".into());
                }
                if values.iter().any(|v| !(*v >= 0.0)) {
                    return bad("cutoff table values must be nonnegative".into());
                }
                if times[0] > t0 || times[times.len() - 1] < t1 {
                    return bad(format!("cutoff table does not cover [{t0}, {t1}]"));
                }
                Ok(())
            }
            CutoffRule::Quantile(l) if !(0.0..=1.0).contains(l) => bad(format!("quantile {l} outside [0, 1]")),
            CutoffRule::Affine { base, slope } if !(*base >= 0.0) || !(base + slope * t0 >= 0.0 && base + slope * t1 >= 0.0) => {
                bad("affine cutoff must stay nonnegative".into())
            }
            _ => Ok(()),
        }
    }

    /// Cutoff at time `t` for a field (used only by quantile rules).
    pub fn at(&self, t: f64, field: &ScalarField) -> f64 {
        match self {
            CutoffRule::Constant(c) => *c,
            CutoffRule::Table { times, values } => {
                let j = times.partition_point(|&x| x <= t);
                if j == 0 {
                    values[0]
                } else if j == times.len() {
                    values[j - 1]
                } else {
                    let w = (t - times[j - 1]) / (times[j] - times[j - 1]);
                    values[j - 1] + w * (values[j] - values[j - 1])
                }
            }
            CutoffRule::AllInLq => 0.0,
            CutoffRule::AllInLinf => f64::INFINITY,
            CutoffRule::Quantile(l) => field.abs_quantile(*l),
            CutoffRule::Affine { base, slope } => base + slope * t,
        }
    }
}

/// Fields and scalars needed by the criteria at one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleFields {
    pub t: f64,
    /// `|u|`
    pub speed: ScalarField,
    /// `|ω|`
    pub vorticity: ScalarField,
    /// `λ₂⁺`
    pub lambda2_plus: ScalarField,
    pub grad_sq: f64,
    pub strain_sq: f64,
    pub vorticity_sq: f64,
    /// `max(−4 det S − 2λ₂⁺|S|² − 1e−12(1+|S|³))` over the grid.
    pub pointwise_excess: f64,
}

impl SampleFields {
    pub fn from_velocity(t: f64, u: &SpectralVectorField, fft: &crate::fft::Fft3) -> Self {
        let strain = u.strain(fft);
        let eig = strain.eigenvalues();
        let l2p = eig.lambda2_plus();
        let det = eig.determinant();
        let excess = (0..u.grid().len())
            .map(|i| {
                let s2 = strain.at(i).frobenius_sq();
                let lhs = -4.0 * det.values()[i];
                let rhs = 2.0 * l2p.values()[i] * s2;
                lhs - rhs - 1e-12 * (1.0 + s2.powf(1.5))
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let (strain_sq, _) = u.strain_norms_sq();
        let w = u.curl();
        Self {
            t,
            speed: magnitude(u, fft),
            vorticity: magnitude(&w, fft),
            lambda2_plus: l2p,
            grad_sq: u.grad_l2_sq(),
            strain_sq,
            vorticity_sq: w.l2_sq(),
            pointwise_excess: excess,
        }
    }

    pub fn field(&self, variant: Variant) -> &ScalarField {
        match variant {
            Variant::Velocity => &self.speed,
            Variant::Strain => &self.lambda2_plus,
            Variant::Vorticity => &self.vorticity,
        }
    }

    /// Quantity whose growth the variant controls.
    pub fn controlled(&self, variant: Variant) -> f64 {
        match variant {
            Variant::Velocity => self.grad_sq,
            Variant::Strain => self.strain_sq,
            Variant::Vorticity => self.vorticity_sq,
        }
    }
}

/// Derived per-snapshot fields of a trajectory.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub grid: Grid,
    pub nu: f64,
    pub samples: Vec<SampleFields>,
}

impl Diagnostics {
    pub fn from_log(log: &TrajectoryLog) -> Self {
        let fft = crate::fft::Fft3::new(&log.grid);
        let samples = log
            .snapshots
            .par_iter()
            .map(|s| SampleFields::from_velocity(s.t, &s.u, &fft))
            .collect();
        Self {
            grid: log.grid,
            nu: log.nu,
            samples,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Largest pointwise excess of `−4 det S ≤ 2λ₂⁺|S|²` over all samples.
    pub fn pointwise_strain_excess(&self) -> f64 {
        self.samples.iter().map(|s| s.pointwise_excess).fold(f64::NEG_INFINITY, f64::max)
    }

    fn check_rule(&self, rule: &CutoffRule) -> Result<()> {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => rule.validate(a.t, b.t),
            _ => Ok(()),
        }
    }
}

/// Above/below split of one field at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
struct SplitNorms {
    cutoff: f64,
    /// `min(R, sup|field|)`: the smallest level with the same split.
    level: f64,
    above_lq: f64,
    above_weak: f64,
    below_sup: f64,
}

fn split_norms(field: &ScalarField, cutoff: f64, q: f64) -> Result<SplitNorms> {
    let (above, below) = split_values(field.values(), cutoff);
    let dv = field.grid().cell_volume();
    Ok(SplitNorms {
        cutoff,
        level: cutoff.min(field.max_abs()),
        above_lq: lq_quadrature(&above, dv, q)?,
        above_weak: weak_lq_norm(Measured::new(&above, dv), q)?,
        below_sup: below.iter().fold(0.0_f64, |m, v| m.max(v.abs())),
    })
}

/// Certificate kinds: strong bounds and their weak-Lorentz counterparts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CertificateKind {
    Strong,
    /// Weak `L^{q,∞}` hypothesis with the auxiliary exponent `q′`.
    Weak { q_prime: f64, p_prime: f64 },
}

/// Constants entering a certificate's rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertificateConstants {
    /// `C_p` (strong) or `C_{p′}` (weak) with its derivation.
    pub derivation: CpDerivation,
    /// Coefficient of `‖v‖ᵖ` in the rate: `C_p/ν^{p−1}` or the composite `Ĉ_p`.
    pub rate_coefficient: f64,
    /// Weak only: `(q/(q−q′))^{p′/q′}`.
    pub split_factor: Option<f64>,
    /// Weak only: the added `2/ν`, `2` or `√2`.
    pub split_sigma: Option<f64>,
}

/// A Grönwall bound evaluated along a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub variant: Variant,
    pub kind: CertificateKind,
    pub p: f64,
    pub q: f64,
    pub rule: String,
    pub constants: CertificateConstants,
    pub times: Vec<f64>,
    pub lhs: Vec<f64>,
    /// Bound with the measured `L^∞` part.
    pub rhs: Vec<f64>,
    /// Bound with the level `h(t)` in place of the `L^∞` norm.
    pub rhs_levelset: Vec<f64>,
}

fn margin(lhs: f64, rhs: f64) -> f64 {
    if rhs == f64::INFINITY && lhs.is_finite() {
        // An overflowed Gronwall factor bounds nothing but is never violated.
        1.0
    } else if rhs > 0.0 {
        (rhs - lhs) / rhs
    } else if lhs > 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

pub const CERTIFICATE_CSV_HEADER: &str = "t,lhs,rhs,margin,rhs_levelset,margin_levelset";

impl Certificate {
    /// Display name such as `strain` or `vorticity_weak`.
    pub fn name(&self) -> String {
        match self.kind {
            CertificateKind::Strong => self.variant.name().to_string(),
            CertificateKind::Weak { .. } => format!("{}_weak", self.variant),
        }
    }

    pub fn margins(&self) -> Vec<f64> {
        self.lhs.iter().zip(&self.rhs).map(|(l, r)| margin(*l, *r)).collect()
    }

    pub fn levelset_margins(&self) -> Vec<f64> {
        self.lhs.iter().zip(&self.rhs_levelset).map(|(l, r)| margin(*l, *r)).collect()
    }

    /// Smallest margin over both bounds; `None` without samples.
    pub fn min_margin(&self) -> Option<f64> {
        self.margins()
            .into_iter()
            .chain(self.levelset_margins())
            .reduce(f64::min)
    }

    /// First `(t, margin)` below `−MARGIN_TOLERANCE` in either bound.
    pub fn first_violation(&self) -> Option<(f64, f64)> {
        let m = self.margins();
        let ml = self.levelset_margins();
        (0..self.times.len())
            .find(|&i| !(m[i] >= -MARGIN_TOLERANCE && ml[i] >= -MARGIN_TOLERANCE))
            .map(|i| (self.times[i], m[i].min(ml[i])))
    }

    pub fn passes(&self) -> bool {
        self.first_violation().is_none()
    }

    /// Multiply both bounds by `factor`; a test hook for fault injection.
    pub fn scaled(mut self, factor: f64) -> Self {
        for r in self.rhs.iter_mut().chain(self.rhs_levelset.iter_mut()) {
            *r *= factor;
        }
        self
    }

    /// `# key=value ...` summary line.
    pub fn summary_line(&self) -> String {
        let (qp, pp) = match self.kind {
            CertificateKind::Strong => (String::new(), String::new()),
            CertificateKind::Weak { q_prime, p_prime } => (q_prime.to_string(), p_prime.to_string()),
        };
        let c = &self.constants;
        format!(
            "# certificate={} p={} q={} q_prime={} p_prime={} rule={} cp={} sobolev={} rate_coefficient={} split_factor={} split_sigma={} min_margin={} pass={}",
            self.name(),
            self.p,
            self.q,
            qp,
            pp,
            self.rule,
            c.derivation.cp,
            c.derivation.sobolev,
            c.rate_coefficient,
            c.split_factor.map(|x| x.to_string()).unwrap_or_default(),
            c.split_sigma.map(|x| x.to_string()).unwrap_or_default(),
            self.min_margin().map(|x| x.to_string()).unwrap_or_default(),
            self.passes()
        )
    }

    /// Summary line, header, one row per sample.
    pub fn to_csv(&self) -> String {
        let mut out = self.summary_line();
        out.push('\n');
        out.push_str(CERTIFICATE_CSV_HEADER);
        out.push('\n');
        let (m, ml) = (self.margins(), self.levelset_margins());
        for i in 0..self.times.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                self.times[i], self.lhs[i], self.rhs[i], m[i], self.rhs_levelset[i], ml[i]
            );
        }
        out
    }
}

/// `lhs(0)·exp(cumulative ∫ rate)`.
fn gronwall(times: &[f64], lhs0: f64, rate: &[f64]) -> Vec<f64> {
    cumulative_trapezoid(times, rate)
        .into_iter()
        .map(|i| lhs0 * i.exp())
        .collect()
}

fn check_finite(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(name.into()))
    }
}

/// Strong certificate: split the variant's field by `rule`, rate
/// `C_p/ν^{p−1}‖v‖ᵖ_q + σ-term(‖σ‖_∞)`.
pub fn certify(diag: &Diagnostics, variant: Variant, p: f64, q: f64, rule: &CutoffRule) -> Result<Certificate> {
    let derivation = derive_cp(p, q, variant)?;
    diag.check_rule(rule)?;
    let nu = diag.nu;
    let coef = derivation.rate_coefficient(nu);
    let splits = diag
        .samples
        .iter()
        .map(|s| split_norms(s.field(variant), rule.at(s.t, s.field(variant)), q))
        .collect::<Result<Vec<_>>>()?;
    let rate: Vec<f64> = splits
        .iter()
        .map(|s| coef * s.above_lq.powf(p) + variant.sigma_rate(s.below_sup, nu))
        .collect();
    let rate_level: Vec<f64> = splits
        .iter()
        .map(|s| coef * s.above_lq.powf(p) + variant.sigma_rate(s.level, nu))
        .collect();
    finish(diag, variant, CertificateKind::Strong, p, q, rule, CertificateConstants {
        derivation,
        rate_coefficient: coef,
        split_factor: None,
        split_sigma: None,
    }, &rate, &rate_level)
}

/// Weak certificate: the above part is measured in `L^{q,∞}` and bounded
/// through the split into `L^{q′}` and `L^∞` pieces. Rate
/// `Ĉ_p‖v‖ᵖ_{q,∞} + σ-term`, with
/// `Ĉ_p = C_{p′}/ν^{p′−1}(q/(q−q′))^{p′/q′} + {2/ν, 2, √2}` and the velocity
/// σ-term doubled to `(2/ν)‖σ‖²_∞`.
pub fn certify_weak(
    diag: &Diagnostics,
    variant: Variant,
    p: f64,
    q: f64,
    q_prime: f64,
    rule: &CutoffRule,
) -> Result<Certificate> {
    let e = family_exponents(variant, p, q)?;
    if !(q_prime > e.m && q_prime < q) {
        return Err(Error::InvalidExponent(format!(
            "need {} < q′ < {q}, got q′ = {q_prime}",
            e.m
        )));
    }
    let p_prime = e.k / (1.0 - e.m / q_prime);
    let derivation = derive_cp(p_prime, q_prime, variant)?;
    diag.check_rule(rule)?;
    let nu = diag.nu;
    let factor = (q / (q - q_prime)).powf(p_prime / q_prime);
    let split_sigma = match variant {
        Variant::Velocity => 2.0 / nu,
        Variant::Strain => 2.0,
        Variant::Vorticity => SQRT_2,
    };
    let composite = derivation.rate_coefficient(nu) * factor + split_sigma;
    let sigma_weight = match variant {
        Variant::Velocity => 2.0,
        _ => 1.0,
    };
    let splits = diag
        .samples
        .iter()
        .map(|s| split_norms(s.field(variant), rule.at(s.t, s.field(variant)), q))
        .collect::<Result<Vec<_>>>()?;
    let rate: Vec<f64> = splits
        .iter()
        .map(|s| composite * s.above_weak.powf(p) + sigma_weight * variant.sigma_rate(s.below_sup, nu))
        .collect();
    let rate_level: Vec<f64> = splits
        .iter()
        .map(|s| composite * s.above_weak.powf(p) + sigma_weight * variant.sigma_rate(s.level, nu))
        .collect();
    finish(
        diag,
        variant,
        CertificateKind::Weak { q_prime, p_prime },
        p,
        q,
        rule,
        CertificateConstants {
            derivation,
            rate_coefficient: composite,
            split_factor: Some(factor),
            split_sigma: Some(split_sigma),
        },
        &rate,
        &rate_level,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish(
    diag: &Diagnostics,
    variant: Variant,
    kind: CertificateKind,
    p: f64,
    q: f64,
    rule: &CutoffRule,
    constants: CertificateConstants,
    rate: &[f64],
    rate_level: &[f64],
) -> Result<Certificate> {
    check_finite("certificate rate", rate)?;
    check_finite("certificate level-set rate", rate_level)?;
    let times = diag.times();
    let lhs: Vec<f64> = diag.samples.iter().map(|s| s.controlled(variant)).collect();
    check_finite("certificate lhs", &lhs)?;
    let lhs0 = lhs.first().copied().unwrap_or(0.0);
    Ok(Certificate {
        variant,
        kind,
        p,
        q,
        rule: rule.label(),
        constants,
        rhs: gronwall(&times, lhs0, rate),
        rhs_levelset: gronwall(&times, lhs0, rate_level),
        times,
        lhs,
    })
}

/// Above-cutoff `Lᑫ` and below-cutoff `L^∞` norms per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetSeries {
    pub times: Vec<f64>,
    pub cutoff: Vec<f64>,
    pub above_lq: Vec<f64>,
    pub below_linf: Vec<f64>,
}

pub fn levelset_series(diag: &Diagnostics, variant: Variant, q: f64, rule: &CutoffRule) -> Result<LevelSetSeries> {
    diag.check_rule(rule)?;
    let mut out = LevelSetSeries {
        times: diag.times(),
        cutoff: vec![],
        above_lq: vec![],
        below_linf: vec![],
    };
    for s in &diag.samples {
        let f = s.field(variant);
        let n = split_norms(f, rule.at(s.t, f), q)?;
        out.cutoff.push(n.cutoff);
        out.above_lq.push(n.above_lq);
        out.below_linf.push(n.below_sup);
    }
    Ok(out)
}

/// Endpoint monitor output.
#[derive(Debug, Clone, PartialEq)]
pub struct EndpointReport {
    pub variant: Variant,
    pub threshold: f64,
    pub formula: &'static str,
    pub times: Vec<f64>,
    /// Level `h(t)` actually used: `min(R(t), sup|field|)`.
    pub level: Vec<f64>,
    /// Endpoint norm of the above-cutoff part.
    pub restricted_norm: Vec<f64>,
    pub below_threshold: Vec<bool>,
    /// `∫ h` (strain, vorticity) or `∫ h²` (velocity).
    pub level_integral: f64,
    /// Velocity only: the Young parameter `ε`.
    pub epsilon: Option<f64>,
    /// Interior below-threshold samples: `(t, d/dt X, bound, budget)`.
    pub checks: Vec<(f64, f64, f64, f64)>,
}

impl EndpointReport {
    pub fn first_violation(&self) -> Option<(f64, f64)> {
        self.checks
            .iter()
            .find(|(_, d, b, budget)| d - b > *budget)
            .map(|(t, d, b, _)| (*t, d - b))
    }

    pub fn passes(&self) -> bool {
        self.first_violation().is_none()
    }
}

/// Finite-difference budget for `d/dt X ≤ bound`: `max(1e−3|bound|,
/// 10Δt²|X'''|, floor)` with `X'''` from divided differences.
fn derivative_budget(times: &[f64], x: &[f64], i: usize, bound: f64) -> f64 {
    let n = times.len();
    let h = 0.5 * (times[i + 1] - times[i - 1]);
    let third = if n >= 5 {
        // Second differences of the centered derivative at interior j ∈ [2, n−3].
        let d = |j: usize| crate::solver::centered_derivative(times, x, j);
        let (lo, hi) = (i.saturating_sub(1).max(2), (i + 1).min(n - 3));
        (lo..=hi.max(lo).min(n - 3))
            .map(|j| {
                let (a, b) = (times[j] - times[j - 1], times[j + 1] - times[j]);
                (2.0 * (a * (d(j + 1) - d(j)) - b * (d(j) - d(j - 1))) / (a * b * (a + b))).abs()
            })
            .fold(0.0, f64::max)
    } else {
        0.0
    };
    (crate::solver::BUDGET_RELATIVE * bound.abs())
        .max(10.0 * h * h * third)
        .max(crate::solver::BUDGET_FLOOR * (1.0 + x[i].abs()))
}

/// Restricted endpoint norm, threshold and the differential inequality of
/// the endpoint argument at every below-threshold interior sample.
pub fn endpoint_monitor(diag: &Diagnostics, variant: Variant, rule: &CutoffRule) -> Result<EndpointReport> {
    diag.check_rule(rule)?;
    let nu = diag.nu;
    let threshold = variant.endpoint_threshold_coefficient() * nu;
    let r = variant.endpoint_exponent();
    let times = diag.times();
    let mut level = Vec::new();
    let mut restricted = Vec::new();
    for s in &diag.samples {
        let f = s.field(variant);
        let n = split_norms(f, rule.at(s.t, f), r)?;
        level.push(n.level);
        restricted.push(n.above_lq);
    }
    let h_power: Vec<f64> = match variant {
        Variant::Velocity => level.iter().map(|h| h * h).collect(),
        _ => level.clone(),
    };
    let level_integral = trapezoid(&times, &h_power);
    if !level_integral.is_finite() {
        return Err(Error::NonFinite("cutoff level is not integrable".into()));
    }
    let below: Vec<bool> = restricted.iter().map(|&x| x < threshold).collect();
    let epsilon = match variant {
        Variant::Velocity => {
            let sup = restricted
                .iter()
                .zip(&below)
                .filter(|(_, b)| **b)
                .map(|(x, _)| *x)
                .fold(0.0, f64::max);
            Some(((threshold - sup) / variant.endpoint_threshold_coefficient()).max(1e-6 * nu))
        }
        _ => None,
    };
    let x: Vec<f64> = diag.samples.iter().map(|s| s.controlled(variant)).collect();
    let mut checks = Vec::new();
    if times.len() >= 3 {
        for i in 1..times.len() - 1 {
            if !below[i] {
                continue;
            }
            let h = level[i];
            let bound = match variant {
                Variant::Strain => 2.0 * h * x[i],
                Variant::Vorticity => SQRT_2 * h * x[i],
                Variant::Velocity => h * h / (2.0 * epsilon.unwrap_or(1.0)) * x[i],
            };
            let d = crate::solver::centered_derivative(&times, &x, i);
            checks.push((times[i], d, bound, derivative_budget(&times, &x, i, bound)));
        }
    }
    Ok(EndpointReport {
        variant,
        threshold,
        formula: variant.endpoint_threshold_formula(),
        times,
        level,
        restricted_norm: restricted,
        below_threshold: below,
        level_integral,
        epsilon,
        checks,
    })
}

/// Test functions for the weak-convergence pairings.
pub fn pairing_dictionary(grid: &Grid) -> Vec<(&'static str, ScalarField)> {
    let f = |g: fn([f64; 3]) -> f64| ScalarField::from_fn(*grid, g);
    vec![
        ("one", f(|_| 1.0)),
        ("cos_x", f(|x| x[0].cos())),
        ("sin_y", f(|x| x[1].sin())),
        ("cos_x_plus_y_plus_z", f(|x| (x[0] + x[1] + x[2]).cos())),
        ("cos_2x_sin_z", f(|x| (2.0 * x[0]).cos() * x[2].sin())),
        ("bump", f(|x| (-(x[0] - PI).powi(2) - (x[1] - PI).powi(2) - (x[2] - PI).powi(2)).exp())),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakConvergenceReport {
    pub times: Vec<f64>,
    pub cutoff: Vec<f64>,
    /// Running max of `‖f‖_{L^{3/2}}`.
    pub running_max: Vec<f64>,
    /// `(q, norms, bounds)` for `q ∈ {1, 4/3}`.
    pub bounds: Vec<(f64, Vec<f64>, Vec<f64>)>,
    /// `(name, |⟨f, w⟩|, ‖f‖_{4/3}‖w‖_4)` per dictionary entry and sample.
    pub pairings: Vec<(&'static str, Vec<f64>, Vec<f64>)>,
}

impl WeakConvergenceReport {
    /// First `(q, t, norm, bound)` exceeding the slackened bound.
    pub fn first_violation(&self) -> Option<(f64, f64, f64, f64)> {
        for (q, norms, bounds) in &self.bounds {
            for i in 0..self.times.len() {
                if norms[i] > bounds[i] * (1.0 + WEAK_CONVERGENCE_SLACK) {
                    return Some((*q, self.times[i], norms[i], bounds[i]));
                }
            }
        }
        None
    }

    pub fn passes(&self) -> bool {
        self.first_violation().is_none()
            && self
                .pairings
                .iter()
                .all(|(_, p, b)| p.iter().zip(b).all(|(x, y)| *x <= y * (1.0 + WEAK_CONVERGENCE_SLACK)))
    }
}

/// `‖f‖_q ≤ M^{3/(2q)} h^{1−3/(2q)}` for restricted fields `f = F·[F > h]`.
pub fn weak_convergence_check(times: &[f64], fields: &[ScalarField], cutoffs: &[f64]) -> Result<WeakConvergenceReport> {
    if times.len() != fields.len() || times.len() != cutoffs.len() {
        return Err(Error::InvalidArgument("mismatched series lengths".into()));
    }
    if cutoffs.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(Error::InvalidArgument("cutoff must be positive and finite".into()));
    }
    if cutoffs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("cutoff must be nondecreasing".into()));
    }
    let mut restricted = Vec::with_capacity(fields.len());
    for (f, h) in fields.iter().zip(cutoffs) {
        restricted.push(split_values(f.values(), *h).0);
    }
    let dv = |i: usize| fields[i].grid().cell_volume();
    let mut running = Vec::with_capacity(fields.len());
    let mut m = 0.0_f64;
    for (i, r) in restricted.iter().enumerate() {
        m = m.max(lq_quadrature(r, dv(i), 1.5)?);
        running.push(m);
    }
    let mut bounds = Vec::new();
    for q in [1.0, 4.0 / 3.0] {
        let mut norms = Vec::new();
        let mut rhs = Vec::new();
        for (i, r) in restricted.iter().enumerate() {
            norms.push(lq_quadrature(r, dv(i), q)?);
            rhs.push(running[i].powf(1.5 / q) * cutoffs[i].powf(1.0 - 1.5 / q));
        }
        bounds.push((q, norms, rhs));
    }
    let mut pairings = Vec::new();
    if let Some(first) = fields.first() {
        for (name, w) in pairing_dictionary(first.grid()) {
            let w4 = lq_quadrature(w.values(), first.grid().cell_volume(), 4.0)?;
            let mut pair = Vec::new();
            let mut bound = Vec::new();
            for (i, r) in restricted.iter().enumerate() {
                let s: f64 = r.iter().zip(w.values()).map(|(a, b)| a * b).sum::<f64>() * dv(i);
                pair.push(s.abs());
                bound.push(lq_quadrature(r, dv(i), 4.0 / 3.0)? * w4);
            }
            pairings.push((name, pair, bound));
        }
    }
    Ok(WeakConvergenceReport {
        times: times.to_vec(),
        cutoff: cutoffs.to_vec(),
        running_max: running,
        bounds,
        pairings,
    })
}

/// Weak-convergence monitor on `λ₂⁺` with a nondecreasing cutoff rule.
pub fn weak_convergence_monitor(diag: &Diagnostics, rule: &CutoffRule) -> Result<WeakConvergenceReport> {
    diag.check_rule(rule)?;
    let fields: Vec<ScalarField> = diag.samples.iter().map(|s| s.lambda2_plus.clone()).collect();
    let cutoffs: Vec<f64> = diag.samples.iter().map(|s| rule.at(s.t, &s.lambda2_plus)).collect();
    weak_convergence_check(&diag.times(), &fields, &cutoffs)
}
