//! Scene IO, parallel unmixing, the experiment harness and the command-line
//! front end for `nlunmix-core`.

pub mod cli;
pub mod error;
pub mod harness;
pub mod io;
pub mod runner;

pub use error::{Error, Result};
