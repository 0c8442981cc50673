//! Occupation measures, hitting times and topology checks for absorbing
//! Markov decision processes.

pub mod absorption;
pub mod cli;
pub mod error;
pub mod mdp;
pub mod measure;
pub mod number;
pub mod occupation;
pub mod report;
pub mod reproduce;
pub mod spaces;
pub mod topology;
pub mod zoo;

pub use error::{Error, Result};
pub use number::Number;
