//! Scalar traits shared by the analytic oracles and the learning controllers.
//!
//! [`Scalar`] only asks for field arithmetic and an ordering, so the Erlang
//! recursions and the automaton update also run over exact rationals.
//! [`Real`] adds the transcendental functions the neural policy needs.

use std::fmt::Debug;

use num_rational::Ratio;
use num_traits::{Float, Num};

/// Ordered field element usable by the closed-form oracles.
pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync {
    /// Embeds a channel or server count.
    fn from_u32(n: u32) -> Self;

    /// Slack allowed when checking that a probability vector sums to one.
    fn probability_tolerance() -> Self;

    fn abs_diff(self, other: Self) -> Self {
        if self >= other {
            self - other
        } else {
            other - self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

/// Floating-point scalar.
pub trait Real: Scalar + Float {
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

macro_rules! impl_float_scalar {
    ($t:ty, $tol:expr) => {
        impl Scalar for $t {
            fn from_u32(n: u32) -> Self {
                n as $t
            }

            fn probability_tolerance() -> Self {
                $tol
            }
        }

        impl Real for $t {
            fn from_f64(x: f64) -> Self {
                x as $t
            }

            fn to_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_float_scalar!(f32, 1e-5);
impl_float_scalar!(f64, 1e-12);

macro_rules! impl_ratio_scalar {
    ($t:ty) => {
        impl Scalar for Ratio<$t> {
            fn from_u32(n: u32) -> Self {
                Ratio::from_integer(n as $t)
            }

            fn probability_tolerance() -> Self {
                Ratio::from_integer(0)
            }
        }
    };
}

impl_ratio_scalar!(i64);
impl_ratio_scalar!(i128);
