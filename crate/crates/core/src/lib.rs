//! Per-pixel macroplastic detection on snapshot hyperspectral datacubes.
//!
//! The crate covers the whole offline pipeline:
//!
//! * [`cube_io`] — raster types and the `.rcube` / PGM / manifest file formats,
//! * [`calibrate`] — dark-frame and white-reference reflectance calibration,
//! * [`register`] — normalized-DLT homography estimation and bilinear warping,
//! * [`classify`] — logistic regression, linear SVM and a 100/50/25 MLP trained
//!   with mini-batch Adam,
//! * [`metrics`] — accuracy, precision, recall, F1 and ROC AUC,
//! * [`pipeline`] — train/validation split, synthetic scenes, experiment
//!   orchestration, detection-map rendering and the latency benchmark.

pub mod calibrate;
pub mod classify;
pub mod cube_io;
mod error;
pub mod metrics;
pub mod pipeline;
pub mod register;

pub use error::{Error, Result};
