//! Equilibrium reinsurance, premium and investment strategies for one reinsurer
//! and two competing insurers with bounded memory, plus numerical checks.

pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod kernels;
pub mod numerics;
pub mod oracle;
pub mod params;
pub mod sim;
pub mod value;
pub mod verify;

pub use error::{Error, Result};
