//! Two-photon coincidence rates for narrowband, noncollinear, degenerate
//! type-I down-conversion with a cosine spectral phase filter on the idler.
//!
//! - [`specfun`]: integer-order Bessel functions.
//! - [`model`]: parameters, the filter, and the Bessel-series amplitude.
//! - [`oracle`]: independent quadrature of the frequency integral.
//! - [`analysis`]: peak delay, sweeps, lobes, and conservation checks.

pub mod analysis;
pub mod error;
pub mod model;
pub mod oracle;
pub mod specfun;

pub use error::{Error, Result};
pub use model::{
    amplitude_series, count_rate, sample_curve, truncation_for, CorrelationCurve,
    CosinePhaseFilter, EvalSettings, Method, PhysicalParams, SeriesModel, SeriesTruncation,
};
pub use oracle::{QuadratureOracle, QuadratureSettings};
