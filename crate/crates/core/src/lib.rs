pub mod ase;
pub mod cli;
pub mod error;
pub mod kernels;
pub mod model;
pub mod numerics;
pub mod rates;
pub mod region;
pub mod sim;

pub use error::{Error, Result};
