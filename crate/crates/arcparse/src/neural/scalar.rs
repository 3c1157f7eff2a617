//! Scalar abstraction for the network.
//!
//! Production models run in `f32` (matching the on-disk format); gradient
//! checks instantiate the same code at `f64` so central finite differences
//! are meaningful at tight tolerances.

use std::fmt;
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, NumAssignOps};

pub trait Real:
    Float
    + NumAssignOps
    + ScalarOperand
    + LinalgScalar
    + Sum
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    fn from_f64(x: f64) -> Self;
    fn into_f64(self) -> f64;
}

impl Real for f32 {
    fn from_f64(x: f64) -> Self {
        x as f32
    }

    fn into_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }

    fn into_f64(self) -> f64 {
        self
    }
}

/// Shorthand for lifting an `f64` constant into the scalar type.
pub(crate) fn c<F: Real>(x: f64) -> F {
    F::from_f64(x)
}

pub(crate) fn sigmoid<F: Real>(x: F) -> F {
    c::<F>(1.0) / (c::<F>(1.0) + (-x).exp())
}
