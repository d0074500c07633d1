//! Linear state-space modeling, Kalman-Bucy estimation and innovation
//! consistency checks for driven cavity optomechanics.

pub mod consistency;
pub mod error;
pub mod filter;
pub mod linalg;
pub mod noise;
pub mod optomech;
pub mod record;
pub mod sim;
pub mod statespace;
pub mod units;

pub use error::{Error, Result};
