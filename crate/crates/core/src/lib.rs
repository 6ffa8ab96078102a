pub mod eigensolver;
pub mod energy;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod infinity;
pub mod quadrature;
pub mod reduce;

pub use energy::{FracParams, GridFunction, Seminorm, SystemEnergy};
pub use error::{Error, Result};
pub use geometry::{GridDomain, Point, Shape, TailWeight};
