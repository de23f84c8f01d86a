//! Integrating-factor RK4 for the incompressible Navier-Stokes equation on
//! the torus, with per-sample diagnostics.
//!
//! The state is the Fourier coefficient array of a divergence-free velocity.
//! Advection is evaluated in divergence form `−P ∂_j(u_i u_j)`, with products
//! formed on the grid and the 2/3 rule applied afterwards.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::config::SolverConfig;
use crate::error::{Error, Result};
use crate::fft::Fft3;
use crate::fields::make_velocity;
use crate::grid::{Grid, ScalarField};
use crate::spectral::{SpectralVectorField, StrainField};

/// Speeds above this abort the run.
pub const BLOW_UP_SPEED: f64 = 1e6;
/// Fraction of the grid spacing a particle may cross per step.
pub const CFL_NUMBER: f64 = 0.5;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Index pairs of the six independent products `u_i u_j`.
const PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

fn pair_slot(i: usize, j: usize) -> usize {
    match (i.min(j), i.max(j)) {
        (0, 0) => 0,
        (1, 1) => 1,
        (2, 2) => 2,
        (0, 1) => 3,
        (0, 2) => 4,
        _ => 5,
    }
}

/// Spectral right-hand side and time stepper for one grid and viscosity.
#[derive(Debug, Clone)]
pub struct NavierStokes {
    grid: Grid,
    fft: Fft3,
    nu: f64,
    dealias: bool,
    advection: bool,
    k2: Vec<f64>,
    kvec: Vec<[f64; 3]>,
    keep: Vec<bool>,
}

impl NavierStokes {
    pub fn new(grid: Grid, nu: f64, dealias: bool) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return Err(Error::InvalidArgument(format!("viscosity {nu} must be positive")));
        }
        let n = grid.n() as i64;
        let kvec: Vec<[f64; 3]> = (0..grid.len()).map(|i| grid.wavevector(i)).collect();
        let k2 = kvec.iter().map(|k| k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).collect();
        let keep = (0..grid.len())
            .map(|idx| {
                let (i, j, k) = grid.coords(idx);
                !dealias || [i, j, k].iter().all(|&a| 3 * grid.mode(a).abs() < n)
            })
            .collect();
        Ok(Self {
            grid,
            fft: Fft3::new(&grid),
            nu,
            dealias,
            advection: true,
            k2,
            kvec,
            keep,
        })
    }

    /// Same operator with the advective term switched off (pure heat flow).
    pub fn without_advection(mut self) -> Self {
        self.advection = false;
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn fft(&self) -> &Fft3 {
        &self.fft
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn dealias(&self) -> bool {
        self.dealias
    }

    /// Zero every coefficient outside the 2/3-rule box (no-op if dealiasing
    /// is off).
    pub fn apply_mask(&self, u: &mut SpectralVectorField) {
        for c in u.coeffs_mut().iter_mut() {
            for (v, &k) in c.iter_mut().zip(&self.keep) {
                if !k {
                    *v = Complex64::default();
                }
            }
        }
    }

    /// `P(−(u·∇)u)` together with `max|u|` on the grid.
    pub fn nonlinear_with_speed(&self, u: &SpectralVectorField) -> Result<(SpectralVectorField, f64)> {
        let c = u.coeffs();
        let ((p0, p1), p2) = rayon::join(
            || self.fft.inverse_real_pair(&c[0], &c[1]),
            || self.fft.inverse_real(&c[2]),
        );
        let phys = [p0, p1, p2];
        let max_speed = (0..self.grid.len())
            .map(|i| (phys[0][i] * phys[0][i] + phys[1][i] * phys[1][i] + phys[2][i] * phys[2][i]).sqrt())
            .fold(0.0_f64, f64::max);
        if !max_speed.is_finite() {
            return Err(Error::NonFinite("velocity in nonlinear term".into()));
        }
        if !self.advection {
            return Ok((SpectralVectorField::zeros(self.grid), max_speed));
        }
        let product = |(i, j): (usize, usize)| -> Vec<f64> { phys[i].iter().zip(&phys[j]).map(|(a, b)| a * b).collect() };
        let products: Vec<Vec<Complex64>> = PAIRS
            .par_chunks(2)
            .flat_map_iter(|pair| {
                let (a, b) = self.fft.forward_real_pair(&product(pair[0]), &product(pair[1]));
                [a, b]
            })
            .collect();
        let mut out = SpectralVectorField::zeros(self.grid);
        {
            let c = out.coeffs_mut();
            for idx in 0..self.grid.len() {
                let k2 = self.k2[idx];
                if !self.keep[idx] || k2 == 0.0 {
                    continue;
                }
                let k = self.kvec[idx];
                let mut s = [Complex64::default(); 3];
                for (i, si) in s.iter_mut().enumerate() {
                    for (j, kj) in k.iter().enumerate() {
                        *si += *kj * products[pair_slot(i, j)][idx];
                    }
                }
                // Leray projection folded in: s − ξ(ξ·s)/|ξ|².
                let d = (s[0] * k[0] + s[1] * k[1] + s[2] * k[2]) / k2;
                for i in 0..3 {
                    c[i][idx] = -I * (s[i] - d * k[i]);
                }
            }
        }
        if out.coeffs().iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("nonlinear term".into()));
        }
        Ok((out, max_speed))
    }

    /// Leray projection using the cached wavevectors; also clears the mean.
    fn project(&self, u: &mut SpectralVectorField) {
        let c = u.coeffs_mut();
        for (idx, (k, &k2)) in self.kvec.iter().zip(&self.k2).enumerate() {
            if k2 == 0.0 {
                if idx == 0 {
                    c.iter_mut().for_each(|a| a[0] = Complex64::default());
                }
                continue;
            }
            let d = (c[0][idx] * k[0] + c[1][idx] * k[1] + c[2][idx] * k[2]) / k2;
            for a in 0..3 {
                c[a][idx] -= d * k[a];
            }
        }
    }

    pub fn nonlinear_rhs(&self, u: &SpectralVectorField) -> Result<SpectralVectorField> {
        self.nonlinear_with_speed(u).map(|(n, _)| n)
    }

    fn factors(&self, dt: f64) -> (Vec<f64>, Vec<f64>) {
        let full = self.k2.iter().map(|k2| (-self.nu * k2 * dt).exp()).collect();
        let half = self.k2.iter().map(|k2| (-0.5 * self.nu * k2 * dt).exp()).collect();
        (full, half)
    }

    /// One integrating-factor RK4 step from time `t`.
    pub fn step(&self, state: &SimState, dt: f64) -> Result<SimState> {
        let (e, e2) = self.factors(dt);
        self.step_with(state, dt, &e, &e2)
    }

    fn step_with(&self, state: &SimState, dt: f64, e: &[f64], e2: &[f64]) -> Result<SimState> {
        let u = &state.u;
        let (k1, speed) = self.nonlinear_with_speed(u)?;
        if speed > BLOW_UP_SPEED {
            return Err(Error::BlowUp { t: state.t, max_speed: speed });
        }
        let limit = if speed > 0.0 { CFL_NUMBER * self.grid.spacing() / speed } else { f64::INFINITY };
        if dt > limit {
            return Err(Error::Cfl { t: state.t, dt, limit });
        }
        let combine = |terms: &[(&SpectralVectorField, &[f64], f64)]| -> SpectralVectorField {
            let mut out = SpectralVectorField::zeros(self.grid);
            for a in 0..3 {
                let dst = &mut out.coeffs_mut()[a];
                for &(f, w, s) in terms {
                    for ((d, v), wi) in dst.iter_mut().zip(&f.coeffs()[a]).zip(w) {
                        *d += v * (wi * s);
                    }
                }
            }
            out
        };
        let ones = vec![1.0; self.grid.len()];
        let a = combine(&[(u, e2, 1.0), (&k1, e2, 0.5 * dt)]);
        let k2 = self.nonlinear_rhs(&a)?;
        let b = combine(&[(u, e2, 1.0), (&k2, &ones, 0.5 * dt)]);
        let k3 = self.nonlinear_rhs(&b)?;
        let c = combine(&[(u, e, 1.0), (&k3, e2, dt)]);
        let k4 = self.nonlinear_rhs(&c)?;
        let mut next = combine(&[
            (u, e, 1.0),
            (&k1, e, dt / 6.0),
            (&k2, e2, dt / 3.0),
            (&k3, e2, dt / 3.0),
            (&k4, &ones, dt / 6.0),
        ]);
        self.project(&mut next);
        Ok(SimState {
            t: state.t + dt,
            u: next,
        })
    }

    /// Pressure from `−Δp = Σ_{ij} ∂_i u_j ∂_j u_i`, mean zero.
    pub fn pressure(&self, u: &SpectralVectorField) -> PressureSolution {
        let grad = u.gradient_physical(&self.fft);
        let rhs: Vec<f64> = (0..self.grid.len())
            .map(|p| {
                let mut s = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        s += grad[j][i].values()[p] * grad[i][j].values()[p];
                    }
                }
                s
            })
            .collect();
        let r = self.fft.forward_real(&rhs);
        let p_hat: Vec<Complex64> = r
            .iter()
            .zip(&self.k2)
            .map(|(z, &k2)| if k2 > 0.0 { z / k2 } else { Complex64::default() })
            .collect();
        // Residual of −Δp − rhs, by Parseval.
        let residual = p_hat
            .iter()
            .zip(&r)
            .zip(&self.k2)
            .map(|((p, z), &k2)| (p * k2 - z).norm_sqr())
            .sum::<f64>()
            * self.grid.volume();
        PressureSolution {
            pressure: ScalarField::new(self.grid, self.fft.inverse_real(&p_hat)).unwrap_or_else(|_| ScalarField::zeros(self.grid)),
            residual: residual.sqrt(),
        }
    }

    /// All per-sample scalars of a velocity.
    pub fn sample(&self, t: f64, u: &SpectralVectorField) -> Sample {
        let grid = self.grid;
        let dv = grid.cell_volume();
        let vel = u.to_physical(&self.fft);
        let grad = u.gradient_physical(&self.fft);
        let lap = u.laplacian().to_physical(&self.fft);
        let g = |i: usize, j: usize, p: usize| grad[i][j].values()[p];
        let comps: [Vec<f64>; 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)]
            .map(|(i, j)| (0..grid.len()).map(|p| 0.5 * (g(i, j, p) + g(j, i, p))).collect());
        let strain = StrainField::from_components(grid, comps);
        let det: f64 = strain.eigenvalues().determinant().values().iter().sum::<f64>() * dv;

        let mut stretching = 0.0;
        let mut advection = 0.0;
        let mut max_speed = 0.0_f64;
        for p in 0..grid.len() {
            let w = [g(2, 1, p) - g(1, 2, p), g(0, 2, p) - g(2, 0, p), g(1, 0, p) - g(0, 1, p)];
            let sw = strain.at(p).apply(w);
            stretching += w[0] * sw[0] + w[1] * sw[1] + w[2] * sw[2];
            let v = [vel[0].values()[p], vel[1].values()[p], vel[2].values()[p]];
            for i in 0..3 {
                let adv = v[0] * g(i, 0, p) + v[1] * g(i, 1, p) + v[2] * g(i, 2, p);
                advection -= adv * lap[i].values()[p];
            }
            max_speed = max_speed.max((v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt());
        }
        let (strain_sq, strain_h1_sq) = u.strain_norms_sq();
        let vort = u.curl();
        Sample {
            t,
            energy: 0.5 * u.l2_sq(),
            grad_sq: u.grad_l2_sq(),
            vorticity_sq: vort.l2_sq(),
            strain_sq,
            strain_h1_sq,
            det_integral: det,
            vorticity_h1_sq: vort.grad_l2_sq(),
            stretching: stretching * dv,
            laplacian_sq: u.laplacian_l2_sq(),
            advection_laplacian: advection * dv,
            max_speed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PressureSolution {
    pub pressure: ScalarField,
    /// `‖−Δp − Σ ∂_i u_j ∂_j u_i‖_{L²}`
    pub residual: f64,
}

/// Time and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub u: SpectralVectorField,
}

/// Scalars recorded at one sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// `½‖u‖²`
    pub energy: f64,
    /// `‖∇u‖²`
    pub grad_sq: f64,
    /// `‖ω‖²`
    pub vorticity_sq: f64,
    /// `‖S‖²`
    pub strain_sq: f64,
    /// `‖S‖²_{Ḣ¹}`
    pub strain_h1_sq: f64,
    /// `∫ det S`
    pub det_integral: f64,
    /// `‖ω‖²_{Ḣ¹}`
    pub vorticity_h1_sq: f64,
    /// `⟨Sω, ω⟩`
    pub stretching: f64,
    /// `‖Δu‖²`
    pub laplacian_sq: f64,
    /// `⟨(u·∇)u, −Δu⟩`
    pub advection_laplacian: f64,
    pub max_speed: f64,
}

pub const TRAJECTORY_CSV_HEADER: &str = "t,energy,grad_sq,vorticity_sq,strain_sq,strain_h1_sq,det_integral,vorticity_h1_sq,stretching,laplacian_sq,advection_laplacian,max_speed";

impl Sample {
    fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.energy,
            self.grad_sq,
            self.vorticity_sq,
            self.strain_sq,
            self.strain_h1_sq,
            self.det_integral,
            self.vorticity_h1_sq,
            self.stretching,
            self.laplacian_sq,
            self.advection_laplacian,
            self.max_speed
        )
    }

    fn is_finite(&self) -> bool {
        [
            self.t,
            self.energy,
            self.grad_sq,
            self.vorticity_sq,
            self.strain_sq,
            self.strain_h1_sq,
            self.det_integral,
            self.vorticity_h1_sq,
            self.stretching,
            self.laplacian_sq,
            self.advection_laplacian,
            self.max_speed,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Velocity kept at a sample time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: SpectralVectorField,
}

/// Samples of one run plus (optionally decimated) velocity snapshots.
#[derive(Debug, Clone)]
pub struct TrajectoryLog {
    pub grid: Grid,
    pub nu: f64,
    pub dt: f64,
    pub samples: Vec<Sample>,
    pub snapshots: Vec<Snapshot>,
}

impl TrajectoryLog {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(TRAJECTORY_CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(out, "{}", s.csv_row());
        }
        out
    }
}

/// Number of steps in `[0, t_end]`; `t_end` must be a whole number of steps.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    let steps = (t_end / dt).round();
    if (steps * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::Config {
            key: "t_end".into(),
            message: format!("{t_end} is not a whole number of steps of {dt}"),
        });
    }
    Ok(steps as usize)
}

/// Run the configured trajectory, sampling every `sample_every` steps and at
/// the final step.
pub fn simulate(config: &SolverConfig) -> Result<TrajectoryLog> {
    let grid = Grid::periodic(config.n)?;
    let ns = NavierStokes::new(grid, config.nu, config.dealias)?;
    let mut u = make_velocity(&config.init_kind(), grid, ns.fft())?;
    ns.apply_mask(&mut u);
    u.project_in_place();
    simulate_from(&ns, u, config.dt, config.t_end, config.sample_every, config.snapshot_every)
}

/// Integrate an explicit initial velocity.
pub fn simulate_from(
    ns: &NavierStokes,
    u0: SpectralVectorField,
    dt: f64,
    t_end: f64,
    sample_every: usize,
    snapshot_every: usize,
) -> Result<TrajectoryLog> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::Config { key: "dt".into(), message: format!("{dt} must be positive") });
    }
    if !(t_end >= 0.0 && t_end.is_finite()) {
        return Err(Error::Config { key: "t_end".into(), message: format!("{t_end} must be nonnegative") });
    }
    if sample_every == 0 {
        return Err(Error::Config { key: "sample_every".into(), message: "must be at least 1".into() });
    }
    u0.ensure_divergence_free()?;
    let steps = step_count(t_end, dt)?;
    let (e, e2) = ns.factors(dt);
    let mut log = TrajectoryLog {
        grid: *ns.grid(),
        nu: ns.nu(),
        dt,
        samples: Vec::new(),
        snapshots: Vec::new(),
    };
    let record = |log: &mut TrajectoryLog, state: &SimState| -> Result<()> {
        let s = ns.sample(state.t, &state.u);
        if !s.is_finite() {
            return Err(Error::NonFinite(format!("diagnostics at t = {}", state.t)));
        }
        if snapshot_every > 0 && log.samples.len().is_multiple_of(snapshot_every) {
            log.snapshots.push(Snapshot { t: state.t, u: state.u.clone() });
        }
        log.samples.push(s);
        Ok(())
    };
    let mut state = SimState { t: 0.0, u: u0 };
    record(&mut log, &state)?;
    for step in 1..=steps {
        let mut next = ns.step_with(&state, dt, &e, &e2)?;
        // Time from the step count, so repeated runs agree bit for bit.
        next.t = step as f64 * dt;
        let residual = next.u.divergence_residual();
        if residual > crate::spectral::DIVERGENCE_TOLERANCE {
            return Err(Error::NotDivergenceFree { residual });
        }
        state = next;
        if step % sample_every == 0 || step == steps {
            record(&mut log, &state)?;
        }
    }
    Ok(log)
}

/// One balance identity `d/dt Q = rate` evaluated at interior samples.
#[derive(Debug, Clone, PartialEq)]
pub struct IdentityCheck {
    pub name: &'static str,
    pub times: Vec<f64>,
    pub derivative: Vec<f64>,
    pub rate: Vec<f64>,
    pub budget: Vec<f64>,
}

impl IdentityCheck {
    pub fn residuals(&self) -> impl Iterator<Item = f64> + '_ {
        self.derivative.iter().zip(&self.rate).map(|(d, r)| d - r)
    }

    /// First `(time, residual, budget)` beyond budget.
    pub fn first_violation(&self) -> Option<(f64, f64, f64)> {
        self.residuals()
            .zip(&self.budget)
            .zip(&self.times)
            .find(|((r, b), _)| r.abs() > **b)
            .map(|((r, b), t)| (*t, r, *b))
    }

    pub fn passes(&self) -> bool {
        self.first_violation().is_none()
    }

    /// Largest `|residual| / budget`.
    pub fn worst_ratio(&self) -> f64 {
        self.residuals()
            .zip(&self.budget)
            .map(|(r, b)| r.abs() / b)
            .fold(0.0, f64::max)
    }
}

/// Absolute floor of every finite-difference budget.
pub const BUDGET_FLOOR: f64 = 1e-12;
pub const BUDGET_RELATIVE: f64 = 1e-3;

/// Centered-difference budget `max(1e−3|value|, 10 Δt² |rate''|, floor)`,
/// with `rate''` from second differences of the exact rate series.
pub fn fd_budget(times: &[f64], rate: &[f64], i: usize, value: f64) -> f64 {
    let h = 0.5 * (times[i + 1] - times[i - 1]);
    let lo = i.saturating_sub(1).max(1);
    let hi = (i + 1).min(times.len() - 2);
    let curvature = (lo..=hi)
        .map(|j| {
            let (a, b) = (times[j] - times[j - 1], times[j + 1] - times[j]);
            let d2 = 2.0 * (a * (rate[j + 1] - rate[j]) - b * (rate[j] - rate[j - 1])) / (a * b * (a + b));
            d2.abs()
        })
        .fold(0.0, f64::max);
    (BUDGET_RELATIVE * value.abs()).max(10.0 * h * h * curvature).max(BUDGET_FLOOR)
}

/// Centered derivative of `q` at interior index `i` (nonuniform spacing).
pub fn centered_derivative(times: &[f64], q: &[f64], i: usize) -> f64 {
    let (a, b) = (times[i] - times[i - 1], times[i + 1] - times[i]);
    (a * a * (q[i + 1] - q[i]) + b * b * (q[i] - q[i - 1])) / (a * b * (a + b))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalanceReport {
    pub identities: Vec<IdentityCheck>,
}

impl BalanceReport {
    pub fn passes(&self) -> bool {
        self.identities.iter().all(IdentityCheck::passes)
    }

    /// First violated identity with `(time, residual, budget)`.
    pub fn first_violation(&self) -> Option<(&'static str, f64, f64, f64)> {
        self.identities
            .iter()
            .find_map(|c| c.first_violation().map(|(t, r, b)| (c.name, t, r, b)))
    }
}

/// Check the energy, strain, vorticity and gradient balance identities at
/// every interior sample.
pub fn balance_checks(log: &TrajectoryLog, nu: f64) -> Result<BalanceReport> {
    let s = &log.samples;
    if s.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 samples, got {}", s.len())));
    }
    let times: Vec<f64> = s.iter().map(|x| x.t).collect();
    let series = |q: fn(&Sample) -> f64| -> Vec<f64> { s.iter().map(q).collect() };
    let specs: [(&'static str, Vec<f64>, Vec<f64>); 4] = [
        (
            "energy",
            series(|x| x.energy),
            s.iter().map(|x| -nu * x.grad_sq).collect(),
        ),
        (
            "strain",
            series(|x| x.strain_sq),
            s.iter().map(|x| -2.0 * nu * x.strain_h1_sq - 4.0 * x.det_integral).collect(),
        ),
        (
            "vorticity",
            s.iter().map(|x| 0.5 * x.vorticity_sq).collect(),
            s.iter().map(|x| -nu * x.vorticity_h1_sq + x.stretching).collect(),
        ),
        (
            "gradient",
            s.iter().map(|x| 0.5 * x.grad_sq).collect(),
            s.iter().map(|x| -nu * x.laplacian_sq - x.advection_laplacian).collect(),
        ),
    ];
    let identities = specs
        .into_iter()
        .map(|(name, q, rate)| {
            let idx: Vec<usize> = (1..times.len() - 1).collect();
            IdentityCheck {
                name,
                times: idx.iter().map(|&i| times[i]).collect(),
                derivative: idx.iter().map(|&i| centered_derivative(&times, &q, i)).collect(),
                rate: idx.iter().map(|&i| rate[i]).collect(),
                budget: idx.iter().map(|&i| fd_budget(&times, &rate, i, rate[i])).collect(),
            }
        })
        .collect();
    Ok(BalanceReport { identities })
}
