//! Cross-linked movable antenna (CL-MA) array optimization.
//!
//! A CL-MA array moves whole columns of antennas along horizontal tracks and
//! whole rows along vertical tracks, so an `M x N` planar array needs only
//! `M + N` motors. This crate models the resulting multiuser uplink channel
//! and minimizes the total transmit power needed to meet per-user rate
//! targets:
//!
//! - [`channel`]: field-response channel model over antenna position vectors.
//! - [`receiver`]: zero-forcing / maximal-ratio combining, minimum-power
//!   allocation, and the per-user transmit power lower bound.
//! - [`closed_form`]: prime-factorization machinery and the closed-form
//!   optimal position construction that attains the bound for single-path
//!   users.
//! - [`optimizer`]: discrete position optimization on a candidate grid by
//!   sequential elimination and successive refinement, with an exhaustive
//!   oracle for small instances.
//! - [`statistical`]: two-timescale design that fixes positions from channel
//!   statistics via Monte-Carlo averaging.
//! - [`scenario`]: urban-sector scenario generation, baseline arrays, and
//!   beam patterns.

pub mod channel;
pub mod closed_form;
pub mod error;
pub mod optimizer;
pub mod receiver;
pub mod scenario;
pub mod statistical;

pub use error::{Error, Result};
