//! Fast-forward forecasting of tracked pedestrians.
//!
//! Positions observed up to a cut frame are extrapolated to a target frame
//! by dead reckoning, slowed by the scene's obstacle coverage and by a
//! density-conditioned Weibull speed reduction, then repositioned to remove
//! overlaps. Timed events (new obstacles, new people) split the forecast
//! window into segments that are advanced one after another.

pub mod cli;
pub mod evaluation;
pub mod forecast;
pub mod geometry;
pub mod ingestion;
pub mod rng;
pub mod statistics;
pub mod world;

pub use geometry::Point2;
