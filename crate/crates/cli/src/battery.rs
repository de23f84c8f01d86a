//! Lorentz-space battery on synthetic functions.
//!
//! `fault` multiplies the right-hand side of every bound; values below 1
//! are a test hook that must make the battery fail.

use std::f64::consts::PI;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use ssns_core::fields::lq_quadrature;
use ssns_core::lorentz::{
    check_truncation_bound, check_weak_truncation_bound, distribution, lp_norm_cavalieri, scaling_check, sum_decompose,
    sum_embedding_constant, sum_space_split_norm, weak_lq_norm, BoundReport, SampledFunction, ScalingExponents,
    DECOMPOSITION_SLACK, BOUND_SLACK,
};
use ssns_core::{Grid, ScalarField};

use crate::manifest::CheckResult;

pub struct Battery {
    pub checks: Vec<CheckResult>,
    /// Split CSV of one representative decomposition.
    pub split_csv: String,
}

type Margins = Vec<(Option<f64>, f64)>;

fn scaled_margin(r: &BoundReport, fault: f64) -> f64 {
    let rhs = fault * r.rhs;
    if rhs > 0.0 {
        (rhs - r.lhs) / rhs
    } else if r.lhs > 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

fn noise(rng: &mut ChaCha8Rng, grid: Grid) -> ScalarField {
    let v = (0..grid.len()).map(|_| StandardNormal.sample(&mut *rng)).collect();
    ScalarField::new(grid, v).expect("grid-sized")
}

/// `min(|x − c|^{−a}, cap)` on the torus.
fn power_law(grid: Grid, center: [f64; 3], a: f64, cap: f64) -> ScalarField {
    let v = (0..grid.len())
        .map(|i| {
            let d = grid.periodic_displacement(i, center);
            let r = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            if r > 0.0 {
                r.powf(-a).min(cap)
            } else {
                cap
            }
        })
        .collect();
    ScalarField::new(grid, v).expect("grid-sized")
}

fn spatial_fields(rng: &mut ChaCha8Rng) -> Vec<ScalarField> {
    let g = Grid::periodic(16).expect("valid grid");
    let l = g.box_length();
    let mut out = Vec::new();
    for i in 0..10 {
        let mut f = noise(rng, g);
        if i % 2 == 1 {
            f = f.map(|x| (4.0 * x).round() / 4.0);
        }
        out.push(f);
    }
    for _ in 0..10 {
        let c = [rng.random_range(0.0..l), rng.random_range(0.0..l), rng.random_range(0.0..l)];
        let a = rng.random_range(0.3..1.5);
        out.push(power_law(g, c, a, rng.random_range(5.0..50.0)));
    }
    out
}

fn space_time_functions(rng: &mut ChaCha8Rng) -> Vec<SampledFunction> {
    let g = Grid::periodic(8).expect("valid grid");
    let times: Vec<f64> = (0..9).map(|i| 0.125 * i as f64).collect();
    let mut out = Vec::new();
    // Small amplitudes put the cutoff R = W^{p/k} inside the range of |f|.
    let amplitude = |i: usize| [1e-3, 1e-2, 1.0][i % 3];
    for i in 0..6 {
        let base = noise(rng, g).map(|x| x * amplitude(i));
        let fields = times
            .iter()
            .map(|&t| base.map(|x| x * (1.0 + 0.5 * (3.0 * t + i as f64).sin())))
            .collect();
        out.push(SampledFunction::new(times.clone(), fields).expect("consistent samples"));
    }
    for i in 0..6 {
        let a = 0.4 + 0.2 * i as f64;
        let fields = times
            .iter()
            .map(|&t| power_law(g, [1.0 + t, PI, 2.0], a, 20.0).map(|x| x * amplitude(i) * (1.0 + t)))
            .collect();
        out.push(SampledFunction::new(times.clone(), fields).expect("consistent samples"));
    }
    out
}

pub fn lorentz_battery(seed: u64, fault: f64) -> Battery {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fields = spatial_fields(&mut rng);
    let mut checks = Vec::new();

    // Distribution function against a direct count.
    let mut ok = true;
    for f in &fields {
        let m = f.measured();
        let mut prev = f64::INFINITY;
        for level in [0.0, 0.25, 0.5, 1.0, 2.0, 4.0] {
            let d = distribution(m, level).expect("nonnegative level");
            let count = f.values().iter().filter(|v| v.abs() > level).count() as f64 * m.atom();
            ok &= d == count && d <= prev;
            prev = d;
        }
    }
    checks.push(CheckResult::flag("distribution function", ok, format!("{} fields", fields.len())));

    // Layer-cake formula against quadrature.
    let tol = 1e-8;
    let mut margins: Margins = Vec::new();
    for f in &fields {
        for p in [1.0, 1.5, 2.0, 3.0] {
            let lc = lp_norm_cavalieri(f.measured(), p).expect("p >= 1");
            let quad = lq_quadrature(f.values(), f.grid().cell_volume(), p).expect("p >= 1");
            margins.push((None, tol - (lc - quad).abs() / quad));
        }
    }
    checks.push(CheckResult::new("layer-cake formula", &margins, 0.0, "relative gap vs quadrature, tol 1e-8"));

    // Weak norm never exceeds the strong norm.
    let mut margins: Margins = Vec::new();
    for f in &fields {
        for q in [1.0, 2.0, 3.0] {
            let w = weak_lq_norm(f.measured(), q).expect("q >= 1");
            let s = lq_quadrature(f.values(), f.grid().cell_volume(), q).expect("q >= 1");
            margins.push((None, (s - w) / s));
        }
    }
    checks.push(CheckResult::new("weak norm below strong norm", &margins, BOUND_SLACK, ""));

    // Truncation bounds on fields cut at a random level.
    let (mut strong, mut weak): (Margins, Margins) = (Vec::new(), Vec::new());
    for (i, f) in fields.iter().enumerate() {
        let cutoff = f.abs_quantile(rng.random_range(0.3..0.9)).max(1e-3);
        let (g, _) = ssns_core::lorentz::threshold_split(f, cutoff).expect("cutoff >= 0");
        let (p, q) = if i % 2 == 0 { (1.0, 1.5) } else { (2.0, 3.0) };
        let r = check_truncation_bound(g.measured(), cutoff, p, q).expect("thresholded field");
        strong.push((None, scaled_margin(&r, fault)));
        let r = check_weak_truncation_bound(g.measured(), cutoff, p, q).expect("thresholded field");
        weak.push((None, scaled_margin(&r, fault)));
    }
    checks.push(CheckResult::new("strong truncation bound", &strong, BOUND_SLACK, ""));
    checks.push(CheckResult::new("weak truncation bound", &weak, BOUND_SLACK, ""));

    // Sum-space embedding: closed-form constant and the explicit split.
    let c12 = sum_embedding_constant(1.0, 2.0).expect("p < q");
    let mut margins: Margins = vec![(None, 1e-8 - (c12.minimum - 2.0 * 2.0_f64.sqrt()).abs())];
    for f in &fields {
        for (p, q) in [(1.0, 2.0), (2.0, 4.0), (1.5, 3.0)] {
            let c = sum_embedding_constant(p, q).expect("p < q");
            let w = weak_lq_norm(f.measured(), q).expect("q >= 1");
            let s = sum_space_split_norm(f.measured(), p, q, c.minimizer).expect("valid exponents");
            let rhs = fault * c.minimum * w;
            margins.push((None, (rhs - s) / rhs));
        }
    }
    checks.push(CheckResult::new(
        "sum-space embedding",
        &margins,
        BOUND_SLACK,
        format!("C(1,2) = {}", c12.minimum),
    ));

    // Scaling relations of the exponent families.
    let mut margins: Margins = Vec::new();
    let families = [(2.0, 3.0, 6.0), (2.0, 3.0, 9.0), (1.0, 1.5, 3.0), (1.0, 1.5, 2.0)];
    for (k, m, q) in families {
        let e = ScalingExponents::with_q(k, m, q).expect("valid family");
        margins.push((None, 1e-12 - scaling_check(&e).residual.abs()));
    }
    checks.push(CheckResult::new("scaling relations", &margins, 0.0, ""));

    // Mixed sum-space decomposition, both bounds.
    let pairs = [(2.0, 3.0, 6.0, 4.0), (2.0, 3.0, 9.0, 6.0), (1.0, 1.5, 3.0, 2.0), (1.0, 1.5, 2.0, 1.8)];
    let (mut a, mut b): (Margins, Margins) = (Vec::new(), Vec::new());
    let (mut both_parts, mut cases) = (0, 0);
    let mut split_csv = String::new();
    for f in space_time_functions(&mut rng) {
        for (k, m, q, qp) in pairs {
            let e = ScalingExponents::with_q(k, m, q).expect("valid family");
            let d = sum_decompose(&f, &e, qp).expect("valid exponents");
            a.push((None, scaled_margin(&d.bound_a(), fault)));
            b.push((None, scaled_margin(&d.bound_b(), fault)));
            cases += 1;
            if d.g_integral > 0.0 && d.h_integral > 0.0 {
                both_parts += 1;
            }
            if split_csv.is_empty() && q == 9.0 && d.g_integral > 0.0 {
                split_csv = d.to_csv();
            }
        }
    }
    let detail = format!("{both_parts}/{cases} cases split into two nonzero parts");
    checks.push(CheckResult::new("mixed sum-space decomposition (g part)", &a, DECOMPOSITION_SLACK, &detail));
    checks.push(CheckResult::new("mixed sum-space decomposition (h part)", &b, DECOMPOSITION_SLACK, detail));
    checks.push(CheckResult::flag(
        "decomposition battery is nontrivial",
        4 * both_parts >= cases,
        "at least a quarter of the cases must split into two nonzero parts",
    ));

    Battery { checks, split_csv }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_passes_and_is_deterministic() {
        let a = lorentz_battery(0, 1.0);
        for c in &a.checks {
            assert!(c.passed, "{}: {:?} {}", c.name, c.first_violation, c.detail);
        }
        assert!(a.split_csv.starts_with(ssns_core::lorentz::SPLIT_CSV_HEADER));
        assert_eq!(lorentz_battery(0, 1.0).split_csv, a.split_csv);
    }

    #[test]
    fn fault_factor_breaks_bounds() {
        let b = lorentz_battery(0, 0.5);
        let failed: Vec<&str> = b.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert!(failed.contains(&"strong truncation bound"), "{failed:?}");
        assert!(failed.contains(&"mixed sum-space decomposition (h part)"), "{failed:?}");
        assert!(!failed.contains(&"layer-cake formula"));
    }
}
