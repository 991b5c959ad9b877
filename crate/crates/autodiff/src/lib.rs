//! Dense reverse-mode automatic differentiation over rank-2 `f64` tensors.
//!
//! The engine is deliberately small: it carries exactly the operations needed
//! to build an LSTM encoder, MLP heads and a latent ODE solved with classic
//! RK4. Gradients flow through the unrolled solver (discretize, then
//! differentiate), so they are exact for the discrete integrator.
//!
//! ```
//! use wkode_autodiff::{ParamStore, Tape, Tensor};
//!
//! let mut store = ParamStore::new();
//! let w = store.insert("w", Tensor::column(vec![1.0, -2.0, 3.0]));
//!
//! let mut tape = Tape::new();
//! let x = tape.param(&store, w);
//! let sq = tape.mul(x, x).unwrap();
//! let loss = tape.sum(sq);
//! tape.backward(loss, &mut store).unwrap();
//!
//! assert_eq!(store.grad(w).data(), &[2.0, -4.0, 6.0]);
//! ```

mod error;
mod gradcheck;
mod ode;
mod params;
mod tape;
mod tensor;

pub use error::AdError;
pub use gradcheck::{grad_check, grad_check_with, GradCheckConfig, GradCheckReport};
pub use ode::{rk4_integrate, rk4_step_plain, Rk4Plain};
pub use params::{ParamId, ParamStore};
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;

pub type Result<T> = std::result::Result<T, AdError>;
