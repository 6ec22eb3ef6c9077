#![allow(dead_code)]

use robustlrt::{DensityModel, NominalPair, QuadratureGrid};

/// Symmetric two-component mixture noise and its copy shifted by one.
pub fn mixture_models() -> (DensityModel, DensityModel) {
    let f0 = DensityModel::mixture(&[(0.5, -2.0, 1.0), (0.5, 2.0, 1.0)]).unwrap();
    let f1 = DensityModel::shifted(f0.clone(), 1.0).unwrap();
    (f0, f1)
}

pub fn mixture_pair() -> NominalPair {
    let (f0, f1) = mixture_models();
    let grid = QuadratureGrid::uniform(-8.0, 9.0, 4001).unwrap();
    NominalPair::tabulate(&f0, &f1, &grid)
}

/// `N(−1, 1)` against `N(1, 1)` on a grid symmetric about zero.
pub fn gaussian_pair(half_width: f64, points: usize) -> NominalPair {
    let grid = QuadratureGrid::uniform(-half_width, half_width, points).unwrap();
    NominalPair::tabulate(
        &DensityModel::gaussian(-1.0, 1.0).unwrap(),
        &DensityModel::gaussian(1.0, 1.0).unwrap(),
        &grid,
    )
}
