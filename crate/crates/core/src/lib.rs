//! Collaborative reference as plan construction and plan inference.

pub mod belief;
pub mod collab;
pub mod error;
#[cfg(test)]
mod fixtures;
pub mod plan;
pub mod planner;
pub mod scenario;
pub mod schema;
pub mod sim;
pub mod term;

pub use error::{Error, Result};
