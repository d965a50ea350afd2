pub mod basis;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod mesh;
pub mod output;
pub mod poisson;
pub mod scenarios;
pub mod timestep;
pub mod vlasov;

pub use error::{Error, Result};
