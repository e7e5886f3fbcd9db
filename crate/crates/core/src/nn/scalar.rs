//! Floating-point abstraction so layers and losses are written once and run
//! at f32 for training and f64 for gradient checking.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::Float;

pub trait Scalar:
    Float + Sum + Debug + Display + Send + Sync + Copy + PartialOrd + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
    /// Storage precision for checkpoints and digests.
    fn to_f32(self) -> f32;
    fn from_usize(x: usize) -> Self {
        Self::from_f64(x as f64)
    }
}

impl Scalar for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn to_f32(self) -> f32 {
        self
    }
}

impl Scalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(self) -> f64 {
        self
    }
    fn to_f32(self) -> f32 {
        self as f32
    }
}
