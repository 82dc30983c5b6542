//! Combinatorial models of polynomial Julia sets.
//!
//! The crate traces external rays of a polynomial numerically, detects which
//! rational rays land on a common point, assembles the resulting lamination
//! of the circle, and builds the pinched-disk quotient graph that models the
//! Julia set. A tuning layer transports the model of a renormalized (small)
//! Julia set into the ambient circle through an order-preserving digit
//! substitution and verifies the exact identities the transport must satisfy.
//!
//! Circle combinatorics is exact rational arithmetic throughout; floating
//! point appears only in the ray tracer and the renderer.

pub mod angle;
pub mod lamination;
pub mod model;
pub mod poly;
pub mod ray;
pub mod render;
pub mod tuning;

pub use angle::{in_ccw_order, leaves_cross, Angle, OrbitInfo};
pub use lamination::{AngleClass, Lamination};
pub use model::ModelGraph;
pub use poly::{ConnectivityReport, PolynomialSpec};
pub use ray::{LandingResult, RayTrace, Tracer, TracerConfig};
pub use tuning::TuningData;
