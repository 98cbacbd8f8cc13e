//! Scalar abstraction over the floating-point types the pipeline runs on.
//!
//! All numeric code is generic over [`Scalar`]; `f64` is the reference
//! precision (checkpoints, gradient checks, determinism tests) and `f32`
//! is available for faster training runs.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, NumAssignOps};

/// Floating-point scalar usable as tensor element.
pub trait Scalar:
    Float + NumAssignOps + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Widest-precision view of the value, used for serialization.
    fn to_double(self) -> f64;

    /// Conversion from `f64`; lossy for `f32` in the usual rounding sense.
    fn from_double(v: f64) -> Self;

    /// Parse from the decimal text form produced by [`Scalar::format_full`].
    fn parse_str(s: &str) -> Option<Self>;

    /// Shortest decimal form that parses back to the exact same value.
    fn format_full(self) -> String;

    /// Maximum relative error accepted by gradient checks at this precision.
    fn grad_check_tolerance() -> Self;
}

impl Scalar for f64 {
    fn to_double(self) -> f64 {
        self
    }
    fn from_double(v: f64) -> Self {
        v
    }
    fn parse_str(s: &str) -> Option<Self> {
        s.parse().ok()
    }
    fn format_full(self) -> String {
        format!("{self}")
    }
    fn grad_check_tolerance() -> Self {
        1e-5
    }
}

impl Scalar for f32 {
    fn to_double(self) -> f64 {
        self as f64
    }
    fn from_double(v: f64) -> Self {
        v as f32
    }
    fn parse_str(s: &str) -> Option<Self> {
        s.parse().ok()
    }
    fn format_full(self) -> String {
        format!("{self}")
    }
    fn grad_check_tolerance() -> Self {
        1e-2
    }
}
