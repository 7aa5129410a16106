pub mod cli;
pub mod error;
pub mod localiser;
pub mod ktheory;
pub mod models;
pub mod operators;
pub mod pairing;
pub mod semifinite;

pub use error::{Error, Result};
