//! N-individual simulation: motion, transitions, cell lists and martingale tracking.

mod cell;
mod martingale;
mod pressure;
mod sim;
mod state;
mod step;

pub use cell::{build_cell_index, build_compartment_index, CellIndex};
pub use martingale::{martingale_track, MartingaleTracker};
pub use pressure::{infection_pressures_all, susceptible_pressures};
pub use sim::{advance, simulate, simulate_observed, Scheme, SimConfig, TrajectoryRecord, RATE_STEP_CAP};
pub use state::{init_population, PopulationState};
pub use step::{epidemic_step, epidemic_step_pairwise, epidemic_step_thinning, motion_step, Event, StepKey};
