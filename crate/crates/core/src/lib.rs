//! Minimax robust likelihood ratio tests under α-divergence uncertainty balls.
//!
//! Given nominal densities `f0`, `f1`, an α-divergence order, a Bayesian
//! threshold `ρ` and ball radii `ε0`, `ε1`, the crate computes the least
//! favorable densities, the randomized robust decision rule and the robust
//! likelihood ratio, together with the largest admissible radii and error
//! probability evaluation by quadrature or Monte Carlo.

// `!(x >= 0.0)` is how argument checks reject NaN along with negatives.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod density;
pub mod divergence;
pub mod error;
pub mod evaluation;
pub mod lfd;
pub mod limits;
pub mod numeric;
pub mod oracle;

pub use density::{DensityModel, NominalPair, QuadratureGrid, QuadratureRule};
pub use divergence::{alpha_divergence, bhattacharyya, x_of, DivergenceSpec};
pub use error::{Error, Result};
pub use evaluation::ErrorReport;
pub use lfd::{KktParams, Region, RobustSolution, SolverConfig, ThresholdPair};
pub use limits::FeasibilityReport;
