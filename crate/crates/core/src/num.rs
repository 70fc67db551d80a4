//! Scalar abstraction shared by every numerical kernel in the crate.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real floating point type the library can be instantiated with.
pub trait Real:
    RealField
    + Copy
    + FromPrimitive
    + ToPrimitive
    + Serialize
    + DeserializeOwned
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Significant bits kept when λ is snapped onto its canonical grid.
    const SNAP_BITS: u32;

    /// Round `self` up to the nearest value whose stored mantissa has only
    /// its top `bits` bits set. Non-positive and non-finite values pass through.
    fn snap_up(self, bits: u32) -> Self;

    fn infinity() -> Self;

    fn is_finite_value(self) -> bool;
}

macro_rules! impl_real {
    ($f:ty, $bits:ty, $mant:expr, $snap:expr) => {
        impl Real for $f {
            const SNAP_BITS: u32 = $snap;

            fn snap_up(self, bits: u32) -> Self {
                if !(self > 0.0) || !self.is_finite() || bits >= $mant {
                    return self;
                }
                let drop = $mant - bits;
                let raw = self.to_bits();
                let mask: $bits = (1 << drop) - 1;
                if raw & mask == 0 {
                    self
                } else {
                    // carrying into the exponent field is the correct result
                    <$f>::from_bits((raw | mask) + 1)
                }
            }

            fn infinity() -> Self {
                <$f>::INFINITY
            }

            fn is_finite_value(self) -> bool {
                self.is_finite()
            }
        }
    };
}

impl_real!(f64, u64, 52, 24);
impl_real!(f32, u32, 23, 23);

/// Convert an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// `x` as a tolerance in `T`, but never below `ulps` machine epsilons.
#[inline]
pub fn tol<T: Real>(x: f64, ulps: f64) -> T {
    lit::<T>(x).max(T::default_epsilon() * lit(ulps))
}

/// Lossy conversion used for diagnostics and file output.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn snap_is_monotone_and_upward() {
        let xs = [1.0_f64, 1.0 + f64::EPSILON, 3.7, 1e-300, 2.5e17, 0.1];
        for &x in &xs {
            let s = x.snap_up(24);
            assert!(s >= x);
            assert!((s - x) / x < 2f64.powi(-23));
            assert_eq!(s.snap_up(24), s);
        }
        assert_eq!(1.0_f64.snap_up(24), 1.0);
        assert_eq!(0.0_f64.snap_up(24), 0.0);
        assert_eq!((-2.0_f64).snap_up(24), -2.0);
    }

    #[test]
    fn snap_absorbs_last_bit_noise() {
        let x = 0.3_f64 * 7.0;
        let y = f64::from_bits(x.to_bits() + 1);
        assert_eq!(x.snap_up(24), y.snap_up(24));
    }

    #[test]
    fn snap_carries_into_exponent() {
        let x = f64::from_bits(2.0_f64.to_bits() - 1);
        assert_eq!(x.snap_up(24), 2.0);
    }
}
