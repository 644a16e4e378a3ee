pub mod backtest;
pub mod cli;
pub mod clustering;
pub mod config;
pub mod dgp;
pub mod error;
pub mod io;
pub mod objectives;
pub mod optimizer;
pub mod panel;
pub mod policy;
pub mod rng;
pub mod sampler;
pub mod stability;
pub mod universe;

pub use error::{Error, Result};
