//! Hyperbolic prototype learning with ideal prototypes.
//!
//! Class prototypes are fixed on the ideal boundary of the Poincaré ball.
//! A Euclidean network output `x` is mapped into the ball with the
//! exponential map at the origin, and training minimizes the penalized
//! Busemann loss
//!
//! ```text
//! ℓ(z, p) = log(‖p − z‖² / (1 − ‖z‖²)) − φ · log(1 − ‖z‖²)
//! ```
//!
//! Prediction picks the prototype with the highest cosine similarity, and
//! the hyperbolic distance of the embedding from the origin serves as a
//! confidence score.
//!
//! Module map:
//!
//! - [`geometry`]: exponential map, geodesic distance, geodesic rays and the
//!   Busemann function (closed form and limit form).
//! - [`loss`]: the penalized loss, its gradient through `exp0`, batch
//!   aggregation and the radial normalization integral.
//! - [`prototypes`]: uniform, separation-optimized and projected prototypes.
//! - [`model`]: linear/MLP networks with manual backprop, Adam, training and
//!   inference.
//! - [`data_io`]: datasets, splits and persistence formats.
//! - [`verify`]: numerical verification suites shared by the CLI and tests.

pub mod data_io;
pub mod error;
pub mod geometry;
pub mod loss;
pub mod model;
pub mod prototypes;
mod quadrature;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{EuclideanVector, IdealPoint, PoincarePoint, BALL_EPS};
pub use prototypes::{IdealPrototype, PrototypeSet, Provenance};
