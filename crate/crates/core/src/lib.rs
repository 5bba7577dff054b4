//! Disturbance-observer based robust control toolkit for uncertain SISO
//! LTI plants: normal-form conversion, Q-filter design, robust-stability
//! analysis, controller realization, and closed-loop simulation.

pub mod config;
pub mod dob;
pub mod error;
pub mod lti;
pub mod poly;
pub mod qfilter;
pub mod sim;
pub mod stability;

pub use error::{DobError, Result};
