//! Off-ball scoring opportunity surfaces for basketball tracking data.

pub mod config;
pub mod control;
pub mod court;
pub mod empirical;
pub mod error;
pub mod estimation;
pub mod kinematics;
pub mod oracle;
pub mod pipeline;
pub mod scoring;
pub mod tracking;

pub use error::{Error, ErrorClass, Result};
