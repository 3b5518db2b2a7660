pub mod body;
pub mod criterion;
pub mod curve;
pub mod error;
pub mod grid;
pub mod oscint;
pub mod quad;
pub mod special;

pub use body::{BodySpec, Cap, ConvexBoundary};
pub use curve::{CurveSpec, Family, GraphCurve, PartitionTable, TauSample};
pub use error::{Error, Result};
