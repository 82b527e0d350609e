//! Probabilistic demand forecasting with a recurrent mixture-density
//! network, Monte Carlo scenario generation, and a two-stage stochastic
//! relocation program solved by an embedded simplex.

pub mod config;
pub mod data;
pub mod em;
pub mod error;
pub mod eval;
pub mod lp;
pub mod exec;
pub mod forecast;
pub mod mdn;
pub mod nn;
pub mod pipeline;
pub mod relocation;
pub mod scenario;
pub mod synth;

pub use error::{Error, Result};
pub use exec::ExecMode;
