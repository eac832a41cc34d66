//! Fluctuation ensembles, bracket quadrature, the Galerkin limit and normality diagnostics.

mod bracket;
mod ensemble;
mod initial;
mod ou;
mod report;

pub use bracket::{bracket_quadrature, BracketSeries, BracketVariant, GridDictionary};
pub use ensemble::{
    run_ensemble, run_martingale_ensemble, sample_initial_coords, MartingaleEnsemble, ReplicateEnsemble,
};
pub use initial::{initial_fluct_cov, initial_means};
pub use ou::{
    ou_covariance, ou_galerkin_build, ou_galerkin_simulate, psd_sqrt, OuBuildOptions, OuGalerkinSystem, OuScheme,
    ProjectionResidual, PSD_TOLERANCE,
};
pub use report::{
    cov_compare, gaussianity_report, write_cov_table, CovarianceRow, GaussianityReport, BOOTSTRAP, MIN_REPLICATES,
};
