//! Mean-field density system on a truncated box: finite-volume transport,
//! nonlocal reaction, splitting and Picard solvers, and the homogeneous ODE.

mod field;
mod fp;
mod grid;
mod ode;
mod reaction;
mod semigroup;
mod solve;

pub use field::{l1_bounds_check, sup_l1_distance, write_series_csv, write_series_frames, DensityField, L1BoundCheck};
pub use fp::{fokker_planck_step, FokkerPlanck};
pub use grid::Grid;
pub use ode::{sir_ode_reduce, SirSeries};
pub use reaction::{convolve_kernel, react, reaction_step, KernelConvolution};
pub use semigroup::{semigroup_mass_check, SemigroupMass};
pub use solve::{picard_solve, solve, solve_with_stride, step_count, PicardConfig, PicardOutcome, MAX_LEAKAGE};
