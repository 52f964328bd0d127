//! Natural mass, l-adic covers, Hausdorff sums and box dimension.

mod bigsquare;
mod cover;
mod dimension;
mod minkowski;
mod raster;
mod square;

pub use bigsquare::{big_square_masses, big_square_prob_mc, BigSquareEstimate, BigSquareOptions, BigSquareSample};
pub use cover::{build_cover, hausdorff_upper, occupancy, occupancy_pieces, CoverReport, Occupancy};
pub use dimension::{box_counts, box_counts_pieces, box_dimension, box_dimension_pooled, DimensionFit};
pub use minkowski::{minkowski_mass, minkowski_mass_pieces, mu_field, mu_field_pieces, MeasureField};
pub use square::{LadicGrid, LadicSquare};
