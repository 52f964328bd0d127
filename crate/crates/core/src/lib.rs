pub mod cli;
pub mod error;
pub mod experiments;
pub mod fractal;
pub mod geometry;
pub mod io;
pub mod loewner;
pub mod observables;
pub mod rng;
pub mod sampler;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};

/// Points of the plane.
pub type Complex = num_complex::Complex64;
