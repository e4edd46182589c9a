pub mod asymptotics;
pub mod banded;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiments;
pub mod hjb;
pub mod interp;
pub mod model;
pub mod output;
pub mod ms;
pub mod registry;
pub mod special;

pub use error::{Error, Result};
