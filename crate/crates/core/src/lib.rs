//! Sinusoids in colored 2-D noise.
//!
//! * [`model`] holds the observation and moving-average noise types together with
//!   the noise spectral density and the penalty constant `A`.
//! * [`synth`] draws seed-reproducible innovation, noise and observation fields.
//! * [`spectrum`] computes the scaled periodogram, its peaks and the sup statistic.
//! * [`estimator`] fits `k` sinusoids by least squares for any assumed `k`.
//! * [`selector`] scores orders with `chi(k) = NM ln L_k + xi k ln NM`.
//! * [`experiments`] runs seeded Monte Carlo studies and writes CSV/JSON reports.

pub mod error;
pub mod estimator;
pub mod experiments;
pub mod io;
pub mod model;
pub mod selector;
pub mod spectrum;
pub mod synth;

pub use error::{Error, Result};
pub use estimator::{
    linear_amplitudes, loss, lse_estimate, lse_path, LinearFit, LseResult, RefineOptions,
};
pub use model::{
    noise_constant_a, spectral_density, Distribution, Field2D, InnovationSpec, MaCoefficients,
    ParamVector, SinusoidParams, SupportKind,
};
pub use selector::{chi_statistic, select_order, xi_threshold, SelectionResult};
pub use spectrum::{
    direct_dft_periodogram, periodogram, sup_statistic, top_peaks, Peak, Periodogram,
};
pub use synth::{compose, gen_innovations, ma_filter, synthesize};
