//! Frequency-band decomposition of variance-based connectedness measures.
//!
//! The pipeline: estimate a VAR(p) on a multivariate panel, truncate its
//! moving-average representation at horizon H, form the generalized
//! forecast-error variance decomposition, and split the resulting
//! connectedness measures across frequency bands via the discrete Fourier
//! transform of the MA coefficients. Rolling-window estimation, a parametric
//! bootstrap, and a Monte Carlo harness sit on top.

pub mod bootstrap;
pub mod error;
pub mod fevd;
mod linalg;
pub mod panel;
pub mod rng;
pub mod rolling;
pub mod simulate;
pub mod spectral;
pub mod var;

pub use bootstrap::{
    bootstrap_window, BootstrapConfig, BootstrapMeasure, BootstrapSummary, InnovationMode,
};
pub use error::{Error, Result};
pub use fevd::{directional, gfevd, total_connectedness, DirectionalSummary, FevdMatrix};
pub use panel::{
    load_intraday, load_panel, realized_log_volatility, save_panel, IntradayReturnSet,
    TimeSeriesPanel,
};
pub use rolling::{
    compare_systems, run_rolling, BandPathEntry, ConnectednessPath, DifferenceRecord, GapRecord,
    PathDifference, RollingConfig, WindowRecord,
};
pub use simulate::{
    generate, load_grid, population_connectedness, run_study, BivariateSpec, MeanSd, MeasureStats,
    PopulationConnectedness, SimulationRow, SimulationTable,
};
pub use spectral::{
    band_connectedness, band_indices, band_theta, causation_spectrum, decorrelate, BandPartition,
    CausationSpectrum, FrequencyBand, SpectralDecomposition,
};
pub use var::{estimate_var, ma_truncated, msfe_convergence, MaRepresentation, VarModel, VarSpec};
