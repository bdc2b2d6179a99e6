use std::fmt::{Debug, Display};
use std::iter::Sum;

use ndarray::{LinalgScalar, ScalarOperand};
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point element type the network and filters are generic over: `f32` or `f64`.
pub trait Scalar:
    'static
    + Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + LinalgScalar
    + ScalarOperand
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
{
    /// Lossy conversion from `f64`; constants and hyper-parameters go through here.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 is representable")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("float converts to f64")
    }

    /// Narrow to the on-disk element type.
    fn as_f32(self) -> f32 {
        self.to_f32().expect("float converts to f32")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
