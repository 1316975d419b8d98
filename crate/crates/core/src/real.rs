//! Scalar abstraction for the numerical core.
//!
//! Everything downstream (grids, fields, propagation, guidance, sampling) is
//! generic over [`Real`] so the same code runs at f32 or f64 precision. The
//! trait is a bound bundle, not a behavior extension: every method comes from
//! `num_traits` or `rustfft`, plus two conversion helpers so tolerances and
//! physical defaults can be written as f64 literals.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};
use rustfft::FftNum;

pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + FftNum
    + Default
    + Display
    + LowerExp
    + Debug
    + Send
    + Sync
    + 'static
{
    /// Converts an f64 literal into this scalar type. Panics on values a
    /// finite float cannot represent, which no in-repo constant triggers.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("constant representable in scalar type")
    }

    /// Widens to f64 for reporting and serialization.
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float widens to f64")
    }

    fn from_usize_exact(n: usize) -> Self {
        Self::from_usize(n).expect("grid size representable in scalar type")
    }
}

impl Real for f32 {}
impl Real for f64 {}
