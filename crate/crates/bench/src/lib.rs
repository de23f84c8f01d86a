//! Fixtures shared by the benchmarks.

use ssns_core::fields::make_velocity;
use ssns_core::{Fft3, FieldKind, Grid, ScalarField, SpectralVectorField};

/// Random solenoidal velocity with a Kolmogorov-like spectrum.
pub fn velocity(n: usize, seed: u64) -> (Grid, Fft3, SpectralVectorField) {
    let grid = Grid::periodic(n).expect("valid grid");
    let fft = Fft3::new(&grid);
    let kind = FieldKind::RandomDivFree {
        seed,
        slope: -5.0 / 3.0,
        cutoff: 0,
    };
    let u = make_velocity(&kind, grid, &fft).expect("valid field");
    (grid, fft, u)
}

/// `|u|` of a random velocity, a realistic input for the Lorentz kernels.
pub fn speed(n: usize, seed: u64) -> ScalarField {
    let (_, fft, u) = velocity(n, seed);
    ssns_core::fields::magnitude(&u, &fft)
}
