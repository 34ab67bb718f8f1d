pub mod analytic;
pub mod bounds;
pub mod error;
pub mod experiments;
pub mod fim;
pub mod geometry;
pub mod montecarlo;
pub mod plot;
pub mod quadrature;
pub mod specfun;
pub mod table;
pub mod validation;

pub use error::{Error, Result};
