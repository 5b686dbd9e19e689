//! Scalar abstraction: every numerical module is generic over [`Real`],
//! instantiated as `f32` or `f64`. Concrete `f64` aliases live at the crate
//! root.

use std::fmt;
use std::iter::Sum;
use std::ops::{AddAssign, SubAssign};

use num_traits::{Float, FromPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{de::DeserializeOwned, Serialize};

/// Floating-point scalar used throughout the toolkit.
pub trait Real:
    Float
    + FromPrimitive
    + AddAssign
    + SubAssign
    + Sum<Self>
    + fmt::Debug
    + fmt::Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Draw one standard normal variate in this precision.
    fn sample_standard_normal<G: Rng + ?Sized>(rng: &mut G) -> Self;

    /// Dyadic grid spacing that Brownian increments are snapped to at
    /// generation time.
    ///
    /// The spacing is a power of two several orders of magnitude below the
    /// increment scale, so it is invisible to distributional tests, while
    /// path magnitudes stay far below the integer-exactness limit of the
    /// type. Every partial sum of increments is then exact, which makes
    /// coarse/fine grid coupling and telescoping identities hold bitwise.
    fn increment_quantum() -> Self;
}

impl Real for f64 {
    fn sample_standard_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
        rng.sample(StandardNormal)
    }

    fn increment_quantum() -> Self {
        // 2^-26: |W| may reach 2^27 quanta, well below 2^53.
        (2.0f64).powi(-26)
    }
}

impl Real for f32 {
    fn sample_standard_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
        rng.sample(StandardNormal)
    }

    fn increment_quantum() -> Self {
        // Coarser grid so sums stay exact within f32's 2^24 integer range:
        // |W| stays below ~64, i.e. 2^24 quanta.
        (2.0f32).powi(-18)
    }
}

/// Convert an `f64` constant into the working precision.
pub(crate) fn rf<R: Real>(x: f64) -> R {
    R::from_f64(x).expect("constant not representable in scalar type")
}

/// Convert a count into the working precision.
pub(crate) fn rn<R: Real>(n: usize) -> R {
    R::from_usize(n).expect("count not representable in scalar type")
}
