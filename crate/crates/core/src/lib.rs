//! Dictionary learning by offline and online nonnegative matrix factorization,
//! with pipelines for multi-channel time series (Hankel windows, rolling
//! reconstruction, inpainting), color image patches (compression, color
//! restoration) and video (spatial dictionaries, changepoint detection).

pub mod error;
pub mod imaging;
pub mod io;
pub mod matrix;
pub mod nmf;
pub mod online;
pub mod rng;
pub mod solvers;
pub mod timeseries;
pub mod video;

pub use error::{Error, Result};
pub use matrix::{EntryMask, NonnegMatrix};
pub use online::{OnlineDictionaryState, OnlineOptions};
pub use solvers::SolverOptions;
