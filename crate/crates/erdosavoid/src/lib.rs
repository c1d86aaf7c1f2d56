//! Exact constructions and finite-resolution certificates around the Erdős
//! similarity problem: interval-set algebra, Cantor gap trees and thickness,
//! constructive Cantor intersections, avoiding sets for slowly decreasing and
//! for increasing sequences, and sumset coverage probes.

pub mod error;
pub mod cantor_trees;
pub mod intersection_engine;
pub mod large_scale;
pub mod rational_intervals;
pub mod small_scale;
pub mod sumset_lab;

pub use error::{Error, Result};
