//! Statistical verification of black-box parameterized models against
//! Signal Temporal Logic requirements.
//!
//! The pipeline samples a parameter region, simulates each sample, scores the
//! resulting trajectories with the STL robustness monitor, fits a surrogate of
//! the parameter-to-robustness map and wraps it in a split-conformal
//! prediction band. Regions whose band is strictly positive (negative) are
//! labelled safe (unsafe) with probability at least `1 - alpha`; the rest are
//! refined until they become too small to be worth splitting.
//!
//! ```
//! use cverify::signal::Signal;
//! use cverify::stl;
//!
//! let sig = Signal::new(vec![0.0, 1.0, 2.0], vec![vec![0.1], vec![0.6], vec![0.2]]).unwrap();
//! let phi = stl::parse("F[0,2] (x0 > 0.45)").unwrap();
//! let rho = stl::robustness(&phi, &sig, 0.0).unwrap();
//! assert!((rho - 0.15).abs() < 1e-12);
//! ```

pub mod conformal;
pub mod optimize;
pub mod partition;
pub mod regress;
pub mod signal;
pub mod sim;
pub mod stl;
