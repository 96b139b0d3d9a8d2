//! Numerical toolkit for metrics that change signature across a
//! hypersurface.
//!
//! The crate provides:
//!
//! * signed-power scalar algebra ([`signed_power`]),
//! * a small expression language with exact symbolic differentiation
//!   ([`expr`]),
//! * degenerate metric fields with singular-set location, radical
//!   directions and transversality diagnostics ([`metric`]),
//! * singular quadrature and the smooth-root integral transform
//!   ([`quadrature`], [`baldomero`]),
//! * numerical smoothness probing by one-sided Richardson ladders
//!   ([`smoothness`]),
//! * flow and geodesic integration with pregeodesic residuals
//!   ([`ode`], [`geodesic`]),
//! * construction and verification of normal coordinates around the
//!   singular set ([`normal_coords`]),
//! * a catalog of builtin example spaces ([`catalog`]) and a JSON space
//!   file schema ([`spacefile`]).

pub mod baldomero;
pub mod catalog;
pub mod error;
pub mod expr;
pub mod geodesic;
mod linalg;
pub mod metric;
pub mod normal_coords;
pub mod ode;
pub mod quadrature;
mod roots;
pub mod signed_power;
pub mod smoothness;
pub mod spacefile;

pub use error::{Error, Result};
pub use expr::Expression;
pub use metric::{MetricField, VectorField};
