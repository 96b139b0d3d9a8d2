pub mod baldomero;
pub mod catalog;
pub mod check;
pub mod geodesic;
pub mod normalize;
