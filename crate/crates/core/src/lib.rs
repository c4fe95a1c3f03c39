//! Double-sieve forecasting of locally stationary functional time series.

pub mod basis;
pub mod bench;
pub mod dgp;
pub mod error;
pub mod fdata;
pub mod model;
pub mod par;
pub mod tvvar;

pub use error::{Error, Result};
