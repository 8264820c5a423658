//! Free-flow and saturated throughput on a single link.
//!
//! Throughput is packet size times packet rate. A NIC that can only process
//! `λ_c` packets per second delivers its plateau throughput for large packets
//! and a throughput proportional to size below the critical size `p_c`. This
//! crate provides:
//!
//! - [`frame`]: Ethernet/IP/UDP overhead and fragmentation arithmetic
//! - [`saturation`]: the piecewise saturation law and its relations
//! - [`bifurcation`]: the transcritical normal form behind the transition
//! - [`sim`]: a virtual-time single-link simulator with a per-packet ceiling
//! - [`estimator`]: two-segment fitting of `T_max`, `p_c` and `λ_c`
//! - [`harness`]: a paced UDP sender and accounting receiver
//! - [`series`]: the sweep table shared by all of the above

pub mod bifurcation;
mod error;
pub mod estimator;
pub mod frame;
pub mod harness;
pub mod saturation;
pub mod series;
pub mod sim;

pub use error::{Error, Result};
pub use estimator::{classify, fit, FitOptions, FitResult, Regime};
pub use frame::FrameLayout;
pub use saturation::{LinkModel, TrafficPoint};
pub use series::{SizeConvention, SweepSample, SweepSeries};
pub use sim::{simulate, sweep, SimConfig, SimResult};
