//! The truncated viscous equation `d_t phi = Delta phi - 1/2 <A grad phi, grad phi>`
//! on `H_N`: exact separable oracles, a finite-difference solver for
//! `N <= 3`, and a common query surface over all solution kinds.

mod cole_hopf;
mod container;
mod field;
mod grid;

pub use cole_hopf::{
    cole_hopf_1d, cole_hopf_point, separable_eval, separable_points, ColeHopfPoint,
    QuadratureConfig,
};
pub use container::{read_grid, write_grid};
pub use field::{SeparableOracle, SolutionField};
pub use grid::{solve_fd, DiffusionScheme, GridField, GridSpec, HamiltonianScheme};
