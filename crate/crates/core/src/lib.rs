//! Numerical verification engine for projective Finsler metrizability of
//! sprays: truncated-jet arithmetic, field parsing, spray geometry, the
//! Helmholtz / semi-basic 1-form / 2-form condition suites, geodesic and
//! Jacobi integration, Grassmann-bundle transport, and the worked examples.

pub mod dynamics;
pub mod error;
pub mod examples;
pub mod fieldspec;
pub mod grassmann;
pub mod jets;
pub mod metrizability;
pub mod oracle;
pub mod par;
pub mod spray;

pub mod driver;

pub use error::{Error, Result};
