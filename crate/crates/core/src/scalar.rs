//! Scalar abstraction for the numeric core.
//!
//! Everything measure-valued (PageRank, integration, similarity, forest
//! thresholds) is generic over [`Real`]; the crate root pins `f64` aliases
//! for the shipped pipeline.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`, used when ingesting configuration values.
    fn from_config(value: f64) -> Self {
        Self::from_f64(value).expect("finite f64 converts to any Real")
    }

    /// Lossy conversion to `f64`, used when reporting.
    fn to_report(self) -> f64 {
        self.to_f64().expect("Real converts to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
