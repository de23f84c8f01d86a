//! Distribution functions, weak-`Lᑫ` norms and level-set splits.
//!
//! Everything here is written against a discrete measure: a multiset of
//! values, each carrying the same atom mass. Grid fields are one instance
//! (atom mass = cell volume), but nothing depends on the lattice.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::grid::{Grid, ScalarField};

/// Relative slack for the single-time norm bounds.
pub const BOUND_SLACK: f64 = 1e-12;
/// Relative slack for the time-integrated decomposition bounds.
pub const DECOMPOSITION_SLACK: f64 = 1e-9;

/// A function on a discrete measure space with atoms of equal mass.
#[derive(Debug, Clone, Copy)]
pub struct Measured<'a> {
    values: &'a [f64],
    atom: f64,
}

impl<'a> Measured<'a> {
    pub fn new(values: &'a [f64], atom: f64) -> Self {
        Self { values, atom }
    }

    pub fn values(&self) -> &'a [f64] {
        self.values
    }

    pub fn atom(&self) -> f64 {
        self.atom
    }

    /// `|f|` sorted in descending order.
    fn sorted_abs_desc(&self) -> Vec<f64> {
        let mut a: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        a.sort_by(|x, y| y.total_cmp(x));
        a
    }
}

fn check_exponent(name: &str, v: f64) -> Result<()> {
    if v >= 1.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidExponent(format!("{name} = {v} must lie in [1, ∞)")))
    }
}

/// `λ_f(α)`: measure of `{|f| > α}`.
pub fn distribution(f: Measured<'_>, alpha: f64) -> Result<f64> {
    if !(alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("level α = {alpha} must be nonnegative")));
    }
    let count = f.values.iter().filter(|v| v.abs() > alpha).count();
    Ok(count as f64 * f.atom)
}

/// `‖f‖_{Lᵖ}` via `p∫₀^∞ α^{p−1} λ_f(α) dα`, integrated exactly over the
/// piecewise-constant distribution function.
pub fn lp_norm_cavalieri(f: Measured<'_>, p: f64) -> Result<f64> {
    check_exponent("p", p)?;
    let mut a = f.sorted_abs_desc();
    a.reverse();
    // On [a_{j-1}, a_j) the super-level set is {|f| ≥ a_j}.
    let n = a.len();
    let mut integral = 0.0;
    let mut prev = 0.0_f64;
    let mut j = 0;
    while j < n {
        let level = a[j];
        let above = (n - j) as f64 * f.atom;
        if level > prev {
            integral += above * (level.powf(p) - prev.powf(p));
            prev = level;
        }
        while j < n && a[j] == level {
            j += 1;
        }
    }
    Ok(integral.powf(1.0 / p))
}

/// `‖f‖_{L^{q,∞}} = (sup_α αᑫ λ_f(α))^{1/q}`, the supremum taken at left
/// limits of the jump points: `max_a aᑫ · |{|f| ≥ a}|`.
pub fn weak_lq_norm(f: Measured<'_>, q: f64) -> Result<f64> {
    check_exponent("q", q)?;
    Ok(weak_lq_power(f, q).powf(1.0 / q))
}

/// `‖f‖ᑫ_{L^{q,∞}}` without the final root.
fn weak_lq_power(f: Measured<'_>, q: f64) -> f64 {
    let a = f.sorted_abs_desc();
    let mut best = 0.0_f64;
    let mut j = 0;
    while j < a.len() {
        let level = a[j];
        while j < a.len() && a[j] == level {
            j += 1;
        }
        if level > 0.0 {
            best = best.max(level.powf(q) * j as f64 * f.atom);
        }
    }
    best
}

/// Split `f = g + h` with `g = f·[|f| > R]` and `h = f·[|f| ≤ R]`.
pub fn threshold_split(f: &ScalarField, cutoff: f64) -> Result<(ScalarField, ScalarField)> {
    if !(cutoff >= 0.0) {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} must be nonnegative")));
    }
    let (g, h) = split_values(f.values(), cutoff);
    Ok((ScalarField::from_parts(*f.grid(), g), ScalarField::from_parts(*f.grid(), h)))
}

pub(crate) fn split_values(values: &[f64], cutoff: f64) -> (Vec<f64>, Vec<f64>) {
    values
        .iter()
        .map(|&v| if v.abs() > cutoff { (v, 0.0) } else { (0.0, v) })
        .unzip()
}

/// Both sides of a one-time inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl BoundReport {
    fn new(lhs: f64, rhs: f64, slack: f64) -> Self {
        Self {
            lhs,
            rhs,
            holds: lhs <= rhs * (1.0 + slack) || lhs <= f64::MIN_POSITIVE,
        }
    }

    /// `(rhs − lhs)/rhs`; zero when both sides vanish.
    pub fn margin(&self) -> f64 {
        if self.rhs > 0.0 {
            (self.rhs - self.lhs) / self.rhs
        } else if self.lhs > 0.0 {
            f64::NEG_INFINITY
        } else {
            0.0
        }
    }
}

fn check_gap(f: Measured<'_>, cutoff: f64) -> Result<()> {
    if !(cutoff > 0.0) {
        return Err(Error::InvalidArgument(format!("cutoff {cutoff} must be positive")));
    }
    match f.values.iter().position(|&v| v != 0.0 && v.abs() <= cutoff) {
        Some(index) => Err(Error::ThresholdPrecondition {
            index,
            value: f.values[index].abs(),
            threshold: cutoff,
        }),
        None => Ok(()),
    }
}

fn check_pair(p: f64, q: f64) -> Result<()> {
    check_exponent("p", p)?;
    check_exponent("q", q)?;
    if p >= q {
        return Err(Error::InvalidExponent(format!("need p < q, got p = {p}, q = {q}")));
    }
    Ok(())
}

fn lp_power(f: Measured<'_>, p: f64) -> f64 {
    f.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * f.atom
}

/// For `f` vanishing or exceeding `R`: `‖f‖ᵖ_p ≤ R^{p−q} ‖f‖ᑫ_q`.
pub fn check_truncation_bound(f: Measured<'_>, cutoff: f64, p: f64, q: f64) -> Result<BoundReport> {
    check_pair(p, q)?;
    check_gap(f, cutoff)?;
    Ok(BoundReport::new(
        lp_power(f, p),
        cutoff.powf(p - q) * lp_power(f, q),
        BOUND_SLACK,
    ))
}

/// For `f` vanishing or exceeding `R`: `‖f‖ᵖ_p ≤ q/(q−p) R^{p−q} ‖f‖ᑫ_{q,∞}`.
pub fn check_weak_truncation_bound(f: Measured<'_>, cutoff: f64, p: f64, q: f64) -> Result<BoundReport> {
    check_pair(p, q)?;
    check_gap(f, cutoff)?;
    Ok(BoundReport::new(
        lp_power(f, p),
        q / (q - p) * cutoff.powf(p - q) * weak_lq_power(f, q),
        BOUND_SLACK,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingConstant {
    pub minimizer: f64,
    pub minimum: f64,
}

/// The objective `k + (q/(q−p))^{1/p} k^{1−q/p}` minimized by
/// [`sum_embedding_constant`].
pub fn embedding_objective(p: f64, q: f64, k: f64) -> f64 {
    k + (q / (q - p)).powf(1.0 / p) * k.powf(1.0 - q / p)
}

/// `C_{p,q} = inf_{k>0} (k + (q/(q−p))^{1/p} k^{1−q/p})`, by golden-section
/// search in `ln k` (the objective is convex there).
pub fn sum_embedding_constant(p: f64, q: f64) -> Result<EmbeddingConstant> {
    check_pair(p, q)?;
    let phi = |s: f64| embedding_objective(p, q, s.exp());
    let ratio = (5.0_f64.sqrt() - 1.0) / 2.0;
    let (mut lo, mut hi) = (-60.0_f64, 60.0_f64);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (phi(x1), phi(x2));
    while hi - lo > 1e-12 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = phi(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = phi(x2);
        }
    }
    let s = 0.5 * (lo + hi);
    Ok(EmbeddingConstant {
        minimizer: s.exp(),
        minimum: phi(s),
    })
}

/// Norm of one explicit `Lᵖ + L^∞` split: `‖g_R‖_p + ‖h_R‖_∞` at
/// `R = k ‖f‖_{q,∞}`.
pub fn sum_space_split_norm(f: Measured<'_>, p: f64, q: f64, k: f64) -> Result<f64> {
    check_pair(p, q)?;
    let r = k * weak_lq_norm(f, q)?;
    let (g, h) = split_values(f.values, r);
    let g_norm = lp_power(Measured::new(&g, f.atom), p).powf(1.0 / p);
    let h_norm = h.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    Ok(g_norm + h_norm)
}

/// Which scale-invariant family an exponent tuple belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalingFamily {
    /// `(k, m) = (2, 3)`: `2/p + 3/q = 1`.
    Velocity,
    /// `(k, m) = (1, 3/2)`: `2/p + 3/q = 2`.
    StrainVorticity,
    Other,
}

/// Mixed-norm exponents with `k/p + m/q = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingExponents {
    pub k: f64,
    pub m: f64,
    pub p: f64,
    pub q: f64,
}

pub const SCALING_TOLERANCE: f64 = 1e-12;

impl ScalingExponents {
    pub fn new(k: f64, m: f64, p: f64, q: f64) -> Result<Self> {
        let e = Self { k, m, p, q };
        e.validate()?;
        Ok(e)
    }

    /// Velocity family exponents for a given `q > 3`.
    pub fn velocity(q: f64) -> Result<Self> {
        Self::with_q(2.0, 3.0, q)
    }

    /// Strain/vorticity family exponents for a given `q > 3/2`.
    pub fn strain_vorticity(q: f64) -> Result<Self> {
        Self::with_q(1.0, 1.5, q)
    }

    /// Solve `k/p + m/q = 1` for `p`.
    pub fn with_q(k: f64, m: f64, q: f64) -> Result<Self> {
        if !(q > m) {
            return Err(Error::InvalidExponent(format!("need q > m, got q = {q}, m = {m}")));
        }
        Self::new(k, m, k / (1.0 - m / q), q)
    }

    pub fn residual(&self) -> f64 {
        self.k / self.p + self.m / self.q - 1.0
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("k", self.k), ("m", self.m), ("p", self.p), ("q", self.q)] {
            check_exponent(name, v)?;
        }
        if self.residual().abs() > SCALING_TOLERANCE {
            return Err(Error::InvalidExponent(format!(
                "k/p + m/q = {} ≠ 1",
                self.k / self.p + self.m / self.q
            )));
        }
        if !(self.q > self.m) {
            return Err(Error::InvalidExponent(format!("need q > m, got q = {}, m = {}", self.q, self.m)));
        }
        Ok(())
    }

    pub fn family(&self) -> ScalingFamily {
        if self.k == 2.0 && self.m == 3.0 {
            ScalingFamily::Velocity
        } else if self.k == 1.0 && self.m == 1.5 {
            ScalingFamily::StrainVorticity
        } else {
            ScalingFamily::Other
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingCheck {
    pub valid: bool,
    pub residual: f64,
    pub family: ScalingFamily,
}

/// Validity of `k/p + m/q = 1` and the family classification.
pub fn scaling_check(e: &ScalingExponents) -> ScalingCheck {
    ScalingCheck {
        valid: e.validate().is_ok(),
        residual: e.residual(),
        family: e.family(),
    }
}

/// A space-time function sampled at increasing times on one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledFunction {
    times: Vec<f64>,
    fields: Vec<ScalarField>,
}

impl SampledFunction {
    pub fn new(times: Vec<f64>, fields: Vec<ScalarField>) -> Result<Self> {
        if times.is_empty() || times.len() != fields.len() {
            return Err(Error::InvalidArgument(format!(
                "need one field per time, got {} times and {} fields",
                times.len(),
                fields.len()
            )));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("sample times must be strictly increasing".into()));
        }
        let grid = fields[0].grid();
        if fields.iter().any(|f| f.grid() != grid) {
            return Err(Error::GridMismatch("sampled fields on different grids".into()));
        }
        Ok(Self { times, fields })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[ScalarField] {
        &self.fields
    }

    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Trapezoid rule on a (possibly single-point) sample grid.
pub fn trapezoid(times: &[f64], values: &[f64]) -> f64 {
    cumulative_trapezoid(times, values).last().copied().unwrap_or(0.0)
}

/// Running trapezoid integral, starting at 0 on the first sample.
pub fn cumulative_trapezoid(times: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for i in 0..times.len() {
        if i > 0 {
            acc += 0.5 * (times[i] - times[i - 1]) * (values[i] + values[i - 1]);
        }
        out.push(acc);
    }
    out
}

/// `f = g + h` split at a per-time cutoff `R(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSplit {
    pub g: SampledFunction,
    pub h: SampledFunction,
    pub cutoff: Vec<f64>,
    pub exponents: ScalingExponents,
}

impl LevelSplit {
    /// Exact recombination, disjoint supports and the cutoff bounds.
    pub fn invariants_hold(&self, f: &SampledFunction) -> bool {
        f.fields().iter().enumerate().all(|(t, ft)| {
            let r = self.cutoff[t];
            let g = self.g.fields()[t].values();
            let h = self.h.fields()[t].values();
            ft.values().iter().enumerate().all(|(i, &v)| {
                g[i] + h[i] == v
                    && g[i] * h[i] == 0.0
                    && h[i].abs() <= r
                    && (g[i] == 0.0 || g[i].abs() > r)
            })
        })
    }
}

/// Output of the mixed sum-space decomposition with both integral bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct SumDecomposition {
    pub split: LevelSplit,
    pub q_prime: f64,
    pub p_prime: f64,
    /// `(q/(q−q′))^{p′/q′}`
    pub factor: f64,
    /// Per sample: `‖f‖_{q,∞}`, `‖g‖_{q′}`, `‖h‖_∞`.
    pub weak_norm: Vec<f64>,
    pub g_norm: Vec<f64>,
    pub h_sup: Vec<f64>,
    /// `∫‖f‖ᵖ_{q,∞}`, `∫‖g‖^{p′}_{q′}`, `∫‖h‖ᵏ_∞` by trapezoid.
    pub weak_integral: f64,
    pub g_integral: f64,
    pub h_integral: f64,
}

impl SumDecomposition {
    /// `∫‖g‖^{p′}_{q′} ≤ factor · ∫‖f‖ᵖ_{q,∞}` for an arbitrary factor.
    pub fn bound_a_with(&self, factor: f64) -> BoundReport {
        BoundReport::new(self.g_integral, factor * self.weak_integral, DECOMPOSITION_SLACK)
    }

    pub fn bound_a(&self) -> BoundReport {
        self.bound_a_with(self.factor)
    }

    /// `∫‖h‖ᵏ_∞ ≤ ∫‖f‖ᵖ_{q,∞}`.
    pub fn bound_b(&self) -> BoundReport {
        BoundReport::new(self.h_integral, self.weak_integral, DECOMPOSITION_SLACK)
    }

    /// CSV rows `t,R,g_norm,h_sup,int_weak,int_g,int_h`.
    pub fn to_csv(&self) -> String {
        let t = self.split.g.times();
        let e = self.split.exponents;
        let weak_p: Vec<f64> = self.weak_norm.iter().map(|w| w.powf(e.p)).collect();
        let g_p: Vec<f64> = self.g_norm.iter().map(|g| g.powf(self.p_prime)).collect();
        let h_k: Vec<f64> = self.h_sup.iter().map(|h| h.powf(e.k)).collect();
        let (cw, cg, ch) = (
            cumulative_trapezoid(t, &weak_p),
            cumulative_trapezoid(t, &g_p),
            cumulative_trapezoid(t, &h_k),
        );
        let mut out = String::from(SPLIT_CSV_HEADER);
        out.push('\n');
        for i in 0..t.len() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                t[i], self.split.cutoff[i], self.g_norm[i], self.h_sup[i], cw[i], cg[i], ch[i]
            );
        }
        out
    }
}

pub const SPLIT_CSV_HEADER: &str = "t,cutoff,g_norm_lq_prime,h_norm_linf,int_weak_p,int_g_p_prime,int_h_k";

/// Decompose `f ∈ L^p_T L^{q,∞}_x` into `g ∈ L^{p′}_T L^{q′}_x` and
/// `h ∈ L^k_T L^∞_x` with cutoff `R(t) = ‖f(·,t)‖^{p/k}_{q,∞}`.
pub fn sum_decompose(f: &SampledFunction, e: &ScalingExponents, q_prime: f64) -> Result<SumDecomposition> {
    e.validate()?;
    if !(q_prime > e.m) {
        return Err(Error::InvalidExponent(format!(
            "need m < q′, got q′ = {q_prime}, m = {}",
            e.m
        )));
    }
    if !(q_prime < e.q) {
        return Err(Error::InvalidExponent(format!(
            "need q′ < q, got q′ = {q_prime}, q = {}",
            e.q
        )));
    }
    let p_prime = e.k / (1.0 - e.m / q_prime);
    let atom = f.grid().cell_volume();

    let mut g_fields = Vec::with_capacity(f.len());
    let mut h_fields = Vec::with_capacity(f.len());
    let mut cutoff = Vec::with_capacity(f.len());
    let mut weak_norm = Vec::with_capacity(f.len());
    let mut g_norm = Vec::with_capacity(f.len());
    let mut h_sup = Vec::with_capacity(f.len());
    for ft in f.fields() {
        let w = weak_lq_norm(ft.measured(), e.q)?;
        let r = w.powf(e.p / e.k);
        let (g, h) = split_values(ft.values(), r);
        g_norm.push(lp_power(Measured::new(&g, atom), q_prime).powf(1.0 / q_prime));
        h_sup.push(h.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
        weak_norm.push(w);
        cutoff.push(r);
        g_fields.push(ScalarField::from_parts(*ft.grid(), g));
        h_fields.push(ScalarField::from_parts(*ft.grid(), h));
    }
    let times = f.times().to_vec();
    let weak_p: Vec<f64> = weak_norm.iter().map(|w| w.powf(e.p)).collect();
    let g_p: Vec<f64> = g_norm.iter().map(|g| g.powf(p_prime)).collect();
    let h_k: Vec<f64> = h_sup.iter().map(|h| h.powf(e.k)).collect();
    Ok(SumDecomposition {
        split: LevelSplit {
            g: SampledFunction::new(times.clone(), g_fields)?,
            h: SampledFunction::new(times.clone(), h_fields)?,
            cutoff,
            exponents: *e,
        },
        q_prime,
        p_prime,
        factor: (e.q / (e.q - q_prime)).powf(p_prime / q_prime),
        weak_integral: trapezoid(&times, &weak_p),
        g_integral: trapezoid(&times, &g_p),
        h_integral: trapezoid(&times, &h_k),
        weak_norm,
        g_norm,
        h_sup,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Grid with unit-free cell volume 1/64 on an 8³ lattice of side 2.
    fn grid() -> Grid {
        Grid::new(8, 2.0).unwrap()
    }

    /// Field with `value` on the first `cells` points.
    fn block(g: Grid, cells: &[(usize, f64)]) -> ScalarField {
        let mut v = vec![0.0; g.len()];
        let mut start = 0;
        for &(count, value) in cells {
            for x in &mut v[start..start + count] {
                *x = value;
            }
            start += count;
        }
        ScalarField::new(g, v).unwrap()
    }

    /// Cell volume 0.1 on a 10-atom measure: value 3 on 1 atom, 1 on 10.
    fn two_level() -> Vec<f64> {
        let mut v = vec![1.0; 10];
        v.push(3.0);
        v
    }

    #[test]
    fn distribution_examples() {
        let g = grid();
        let f = block(g, &[(128, 1.0)]); // measure 2
        assert_eq!(distribution(f.measured(), 0.5).unwrap(), 2.0);
        assert_eq!(distribution(f.measured(), 1.5).unwrap(), 0.0);
        assert!(distribution(f.measured(), -1.0).is_err());
        let v = two_level();
        let m = Measured::new(&v, 0.1);
        // Direct count: only the value-3 atom exceeds 2.
        assert!((distribution(m, 2.0).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn cavalieri_examples() {
        let f = block(grid(), &[(128, 1.0)]);
        let n = lp_norm_cavalieri(f.measured(), 3.0).unwrap();
        assert!((n - 2.0_f64.powf(1.0 / 3.0)).abs() < 1e-14);
        let v = two_level();
        let n = lp_norm_cavalieri(Measured::new(&v, 0.1), 2.0).unwrap();
        assert!((n - 1.9_f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn weak_norm_examples() {
        let f = block(grid(), &[(128, 1.0)]);
        let n = weak_lq_norm(f.measured(), 2.0).unwrap();
        assert!((n - 2.0_f64.sqrt()).abs() < 1e-14);
        let v = two_level();
        // Brute force over jump points: a=1 → 1·1.1, a=3 → 9·0.1.
        let n = weak_lq_norm(Measured::new(&v, 0.1), 2.0).unwrap();
        assert!((n - 1.1_f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn split_examples() {
        let g = grid();
        let c = block(g, &[(g.len(), 2.5)]);
        let (hi, lo) = threshold_split(&c, 2.5).unwrap();
        assert!(hi.values().iter().all(|&v| v == 0.0));
        assert_eq!(lo, c);
        let f = block(g, &[(5, 3.0), (50, 1.0)]);
        let (hi, lo) = threshold_split(&f, 2.0).unwrap();
        assert!(hi.values().iter().all(|&v| v == 0.0 || v == 3.0));
        assert!(lo.values().iter().all(|&v| v == 0.0 || v == 1.0));
        assert_eq!(hi.values().iter().filter(|&&v| v == 3.0).count(), 5);
    }

    #[test]
    fn truncation_bound_example() {
        let v = [3.0];
        let r = check_truncation_bound(Measured::new(&v, 0.1), 2.0, 1.0, 1.5).unwrap();
        assert!((r.lhs - 0.3).abs() < 1e-15);
        let expected = 2.0_f64.powf(-0.5) * 3.0_f64.powf(1.5) * 0.1;
        assert!((r.rhs - expected).abs() < 1e-15);
        assert!((r.rhs - 0.367).abs() < 1e-3);
        assert!(r.holds);
        let z = [0.0; 4];
        let r = check_truncation_bound(Measured::new(&z, 0.1), 2.0, 1.0, 1.5).unwrap();
        assert_eq!((r.lhs, r.rhs, r.holds), (0.0, 0.0, true));
    }

    #[test]
    fn weak_truncation_bound_example() {
        let v = [3.0];
        let r = check_weak_truncation_bound(Measured::new(&v, 0.1), 2.0, 1.0, 2.0).unwrap();
        assert!((r.lhs - 0.3).abs() < 1e-15);
        assert!((r.rhs - 0.9).abs() < 1e-14);
        assert!(r.holds);
    }

    #[test]
    fn truncation_bounds_reject_values_inside_the_gap() {
        let v = [0.0, 3.0, 1.5];
        let err = check_truncation_bound(Measured::new(&v, 1.0), 2.0, 1.0, 2.0).unwrap_err();
        assert_eq!(err, Error::ThresholdPrecondition { index: 2, value: 1.5, threshold: 2.0 });
        assert!(check_weak_truncation_bound(Measured::new(&v, 1.0), 2.0, 1.0, 2.0).is_err());
        assert!(check_truncation_bound(Measured::new(&[3.0], 1.0), 2.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn embedding_constant_p1_q2() {
        let c = sum_embedding_constant(1.0, 2.0).unwrap();
        assert!((c.minimum - 2.0 * 2.0_f64.sqrt()).abs() < 1e-10);
        assert!((c.minimizer - 2.0_f64.sqrt()).abs() < 1e-5);
    }

    #[test]
    fn embedding_constant_matches_grid_scan() {
        // Dense log-spaced scan, refined twice around the best node.
        let (p, q) = (2.0, 4.0);
        let mut center = 0.0_f64;
        let mut half = 10.0_f64;
        let mut best = f64::INFINITY;
        for _ in 0..4 {
            let nodes = 200_001;
            for i in 0..nodes {
                let s = center - half + 2.0 * half * i as f64 / (nodes - 1) as f64;
                let v = embedding_objective(p, q, s.exp());
                if v < best {
                    best = v;
                    center = s;
                }
            }
            half /= 1000.0;
        }
        let c = sum_embedding_constant(p, q).unwrap();
        assert!((c.minimum - best).abs() < 1e-8, "{} vs {best}", c.minimum);
    }

    #[test]
    fn embedding_constant_diverges_as_p_approaches_q() {
        let a = sum_embedding_constant(1.9, 2.0).unwrap().minimum;
        let b = sum_embedding_constant(1.99, 2.0).unwrap().minimum;
        let c = sum_embedding_constant(1.999, 2.0).unwrap().minimum;
        assert!(a < b && b < c);
        assert!(sum_embedding_constant(2.0, 2.0).is_err());
    }

    #[test]
    fn scaling_examples() {
        let v = ScalingExponents { k: 2.0, m: 3.0, p: 4.0, q: 6.0 };
        let c = scaling_check(&v);
        assert!(c.valid);
        assert_eq!(c.family, ScalingFamily::Velocity);
        let s = ScalingExponents { k: 1.0, m: 1.5, p: 2.0, q: 3.0 };
        let c = scaling_check(&s);
        assert!(c.valid);
        assert_eq!(c.family, ScalingFamily::StrainVorticity);
        assert!(!scaling_check(&ScalingExponents { k: 2.0, m: 3.0, p: 3.0, q: 7.0 }).valid);
        let e = ScalingExponents::velocity(9.0).unwrap();
        assert!((e.p - 3.0).abs() < 1e-14);
    }

    #[test]
    fn decompose_zero() {
        let g = grid();
        let f = SampledFunction::new(vec![0.0, 1.0], vec![ScalarField::zeros(g), ScalarField::zeros(g)]).unwrap();
        let e = ScalingExponents::velocity(9.0).unwrap();
        let d = sum_decompose(&f, &e, 6.0).unwrap();
        assert_eq!((d.weak_integral, d.g_integral, d.h_integral), (0.0, 0.0, 0.0));
        assert!(d.split.invariants_hold(&f));
        assert!(d.bound_a().holds && d.bound_b().holds);
    }

    #[test]
    fn decompose_rejects_bad_exponents() {
        let g = grid();
        let f = SampledFunction::new(vec![0.0], vec![ScalarField::zeros(g)]).unwrap();
        let e = ScalingExponents::velocity(9.0).unwrap();
        assert!(sum_decompose(&f, &e, 3.0).is_err());
        assert!(sum_decompose(&f, &e, 9.0).is_err());
        let bad = ScalingExponents { k: 2.0, m: 3.0, p: 3.0, q: 7.0 };
        assert!(sum_decompose(&f, &bad, 5.0).is_err());
    }

    #[test]
    fn decompose_two_level_against_hand_quadrature() {
        // f(x,t) = a(t)·profile, a = 1 then 2, two time cells [0, 0.5, 1].
        let g = grid();
        let dv = g.cell_volume();
        let profile = block(g, &[(4, 3.0), (40, 1.0)]);
        let amps = [1.0, 2.0, 1.0];
        let f = SampledFunction::new(vec![0.0, 0.5, 1.0], amps.iter().map(|a| profile.map(|v| a * v)).collect()).unwrap();
        let e = ScalingExponents::strain_vorticity(3.0).unwrap(); // p = 2
        let qp = 2.0;
        let d = sum_decompose(&f, &e, qp).unwrap();

        // Oracle: brute force over every grid cell and time cell.
        let pp = 1.0 / (1.0 - 1.5 / qp);
        let mut weak_p = vec![];
        let mut g_p = vec![];
        let mut h_k = vec![];
        for a in amps {
            let levels = [(3.0 * a, 4.0 * dv), (a, 44.0 * dv)];
            let w: f64 = levels.iter().map(|(v, m)| v.powf(3.0) * m).fold(0.0, f64::max);
            let r = w.powf(1.0 / 3.0).powf(e.p / e.k);
            let mut gs = 0.0;
            let mut hs = 0.0_f64;
            for (val, count) in [(3.0 * a, 4.0), (a, 40.0)] {
                if val > r {
                    gs += val.powf(qp) * count * dv;
                } else {
                    hs = hs.max(val);
                }
            }
            weak_p.push(w.powf(e.p / 3.0));
            g_p.push(gs.powf(pp / qp));
            h_k.push(hs.powf(e.k));
        }
        let trap = |v: &[f64]| 0.25 * (v[0] + v[1]) + 0.25 * (v[1] + v[2]);
        assert!((d.weak_integral - trap(&weak_p)).abs() < 1e-12);
        assert!((d.g_integral - trap(&g_p)).abs() < 1e-12);
        assert!((d.h_integral - trap(&h_k)).abs() < 1e-12);
        assert!(d.split.invariants_hold(&f));
        assert!(d.bound_a().holds, "{:?}", d.bound_a());
        assert!(d.bound_b().holds, "{:?}", d.bound_b());
    }

    #[test]
    fn csv_has_one_row_per_sample() {
        let g = grid();
        let f = SampledFunction::new(vec![0.0, 1.0], vec![block(g, &[(3, 2.0)]), block(g, &[(5, 1.0)])]).unwrap();
        let d = sum_decompose(&f, &ScalingExponents::velocity(9.0).unwrap(), 6.0).unwrap();
        let csv = d.to_csv();
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(csv.lines().next().unwrap(), SPLIT_CSV_HEADER);
    }

    fn values() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(prop_oneof![Just(0.0), -10.0..10.0f64, Just(2.0), Just(-2.0)], 1..200)
    }

    proptest! {
        #[test]
        fn distribution_nonincreasing(v in values(), a in 0.0..5.0f64, b in 0.0..5.0f64) {
            let m = Measured::new(&v, 0.3);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(distribution(m, lo).unwrap() >= distribution(m, hi).unwrap());
        }

        #[test]
        fn cavalieri_matches_quadrature(v in values(), pi in 0usize..4) {
            let p = [1.0, 1.5, 2.0, 3.0][pi];
            let m = Measured::new(&v, 0.3);
            let quad = crate::fields::lq_quadrature(&v, 0.3, p).unwrap();
            let lc = lp_norm_cavalieri(m, p).unwrap();
            prop_assert!((lc - quad).abs() <= 1e-8 * quad.max(1e-300));
        }

        #[test]
        fn weak_norm_below_strong(v in values(), q in 1.0..6.0f64) {
            let m = Measured::new(&v, 0.3);
            let strong = crate::fields::lq_quadrature(&v, 0.3, q).unwrap();
            prop_assert!(weak_lq_norm(m, q).unwrap() <= strong * (1.0 + 1e-12));
        }

        #[test]
        fn split_is_a_partition(v in values(), r in 0.0..6.0f64) {
            let (g, h) = split_values(&v, r);
            for i in 0..v.len() {
                prop_assert_eq!(g[i] + h[i], v[i]);
                prop_assert_eq!(g[i] * h[i], 0.0);
                prop_assert!(h[i].abs() <= r);
            }
        }

        #[test]
        fn props_hold_on_thresholded_fields(v in values(), r in 0.1..4.0f64, p in 1.0..2.0f64, dq in 0.1..3.0f64) {
            let (g, _) = split_values(&v, r);
            let m = Measured::new(&g, 0.3);
            let q = p + dq;
            prop_assert!(check_truncation_bound(m, r, p, q).unwrap().holds);
            prop_assert!(check_weak_truncation_bound(m, r, p, q).unwrap().holds);
        }
    }
}
