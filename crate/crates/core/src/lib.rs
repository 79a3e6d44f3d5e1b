pub mod error;
pub mod geometry;
pub mod config;
pub mod green;
pub mod imaging;
pub mod operators;
pub mod solver;

pub use error::{Error, ErrorCategory, Result};
pub use geometry::{MediaConfig, Point, Variant, WaveParams, C64};
pub use green::{Direction, RayleighSeq, Side};
