//! Slow, direct reference implementations for testing `cverify`.
//!
//! Nothing here shares code with the library beyond its data types.

pub mod conformal;
pub mod gp;
pub mod stl;
