//! Time-lag random matrix theory toolkit for multivariate return panels.
//!
//! The crate covers the whole analysis chain:
//!
//! - [`panel`]: price/return/magnitude panels with per-cell masks and CSV I/O,
//! - [`xcorr`]: plain and overlap-corrected lagged cross-correlation matrices,
//!   Wishart noise bounds and the off-diagonal noise histogram,
//! - [`spectrum`]: singular-value spectra, the largest-singular-value decay
//!   curve and log-log power-law fits,
//! - [`factor`]: standardization, PCA estimation of a single global factor,
//!   variance shares, factor/series correlations, ACF and Ljung-Box diagnostics,
//! - [`garch`]: GJR-GARCH(1,1) simulation, maximum-likelihood fitting and
//!   variance forecasting,
//! - [`simulate`]: synthetic global-factor panels used as ground truth.

pub mod error;
pub mod factor;
pub mod garch;
pub mod optim;
pub mod output;
pub mod panel;
pub mod simulate;
pub mod spectrum;
pub mod stats;
pub mod xcorr;

pub use error::{Error, Result};
