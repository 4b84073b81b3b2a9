//! Exact finite metric geometry for curve-flat quotients of segment complexes.

pub mod complex;
pub mod constructions;
pub mod curveflat;
pub mod distortion;
pub mod io;
pub mod lipquot;
pub mod metric;
pub mod random;
pub mod rational;
pub mod verify;

pub use distortion::DistortionPL;
pub use metric::{DistMatrix, PseudometricSpace, ZeroClassPartition};
pub use rational::Q;
