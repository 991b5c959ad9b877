//! Cuffless blood-pressure estimation with a Windkessel-constrained latent ODE.
//!
//! Pipeline: synchronized PPG/ABP/ECG records are cut into beats at ECG
//! R-peaks ([`signal`]), each beat is resampled to 75 steps and encoded by an
//! LSTM, a head predicts positive three-element Windkessel parameters, a
//! latent ODE driven by those parameters is integrated with RK4, and a small
//! decoder emits systolic/diastolic pressure ([`model`]). [`train`] fits the
//! model and [`metrics`] scores it with MAE, Pearson r and the BHS and AAMI
//! protocols. [`windkessel`] simulates ground-truth pressure for synthetic
//! datasets.

pub mod checkpoint;
mod error;
pub mod metrics;
pub mod model;
pub mod signal;
pub mod train;
pub mod windkessel;

pub use error::{Error, Result};
pub use wkode_autodiff as autodiff;
