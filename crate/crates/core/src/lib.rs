pub mod attack;
pub mod blackbox;
pub mod defense;
pub mod error;
pub mod gnn;
pub mod graphdata;
pub mod harness;
pub mod metrics;
pub mod optim;
pub mod unlearn;

pub use error::{Error, Result};
