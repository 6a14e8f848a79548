//! Scalar types shared by the fast transforms and the factorized
//! exponentials: checked machine integers, doubles, big integers and
//! binary floats of configurable precision.

use std::fmt;

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::IBig;

use crate::error::{Error, Result};

/// Binary arbitrary-precision float.
pub type HpFloat = FBig<HalfEven, 2>;

/// Ring operations that report overflow instead of wrapping or saturating.
pub trait Scalar: Clone + fmt::Debug + Send + Sync {
    fn zero() -> Self;
    fn checked_add(&self, rhs: &Self) -> Result<Self>;
    fn checked_sub(&self, rhs: &Self) -> Result<Self>;
    fn checked_mul(&self, rhs: &Self) -> Result<Self>;
}

macro_rules! impl_scalar_int {
    ($($t:ty),*) => {$(
        impl Scalar for $t {
            fn zero() -> Self { 0 }
            fn checked_add(&self, rhs: &Self) -> Result<Self> {
                <$t>::checked_add(*self, *rhs)
                    .ok_or_else(|| Error::Overflow(format!("{} + {} overflows {}", self, rhs, stringify!($t))))
            }
            fn checked_sub(&self, rhs: &Self) -> Result<Self> {
                <$t>::checked_sub(*self, *rhs)
                    .ok_or_else(|| Error::Overflow(format!("{} - {} overflows {}", self, rhs, stringify!($t))))
            }
            fn checked_mul(&self, rhs: &Self) -> Result<Self> {
                <$t>::checked_mul(*self, *rhs)
                    .ok_or_else(|| Error::Overflow(format!("{} * {} overflows {}", self, rhs, stringify!($t))))
            }
        }
    )*};
}

impl_scalar_int!(i64, i128);

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Overflow(format!(
            "double-precision {what} left the finite range"
        )))
    }
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn checked_add(&self, rhs: &Self) -> Result<Self> {
        finite(self + rhs, "sum")
    }
    fn checked_sub(&self, rhs: &Self) -> Result<Self> {
        finite(self - rhs, "difference")
    }
    fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        finite(self * rhs, "product")
    }
}

impl Scalar for IBig {
    fn zero() -> Self {
        IBig::ZERO
    }
    fn checked_add(&self, rhs: &Self) -> Result<Self> {
        Ok(self + rhs)
    }
    fn checked_sub(&self, rhs: &Self) -> Result<Self> {
        Ok(self - rhs)
    }
    fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        Ok(self * rhs)
    }
}

impl Scalar for HpFloat {
    fn zero() -> Self {
        HpFloat::ZERO
    }
    fn checked_add(&self, rhs: &Self) -> Result<Self> {
        Ok(self + rhs)
    }
    fn checked_sub(&self, rhs: &Self) -> Result<Self> {
        Ok(self - rhs)
    }
    fn checked_mul(&self, rhs: &Self) -> Result<Self> {
        Ok(self * rhs)
    }
}

/// Real scalars that can be built from doubles and exponentiated.
pub trait Real: Scalar {
    fn lift(x: f64, bits: usize) -> Result<Self>;
    fn lift_int(x: &IBig, bits: usize) -> Self;
    fn lower(&self) -> f64;
    fn exp(&self) -> Self;
}

impl Real for f64 {
    fn lift(x: f64, _bits: usize) -> Result<Self> {
        finite(x, "input")
    }
    fn lift_int(x: &IBig, _bits: usize) -> Self {
        x.to_f64().value()
    }
    fn lower(&self) -> f64 {
        *self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
}

impl Real for HpFloat {
    fn lift(x: f64, bits: usize) -> Result<Self> {
        let v = HpFloat::try_from(x).map_err(|_| Error::invalid(format!("cannot represent {x} in high precision")))?;
        Ok(v.with_precision(bits).value())
    }
    fn lift_int(x: &IBig, bits: usize) -> Self {
        HpFloat::from(x.clone()).with_precision(bits).value()
    }
    fn lower(&self) -> f64 {
        self.to_f64().value()
    }
    fn exp(&self) -> Self {
        HpFloat::exp(self)
    }
}

/// Floating-point mode for the factorized exponentials.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Arithmetic {
    Double,
    HighPrecision,
    /// Double when the estimated loss of significance is small, high
    /// precision otherwise.
    #[default]
    Auto,
}

impl std::str::FromStr for Arithmetic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "double" => Ok(Self::Double),
            "high_precision" | "hp" => Ok(Self::HighPrecision),
            "auto" => Ok(Self::Auto),
            _ => Err(Error::invalid(format!(
                "unknown arithmetic '{s}' (expected double, high_precision or auto)"
            ))),
        }
    }
}

/// Working precision that leaves roughly 160 correct bits after losing
/// `lost_bits` to cancellation.
pub(crate) fn working_bits(lost_bits: f64) -> usize {
    160 + lost_bits.max(0.0).ceil() as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integer_overflow_is_reported() {
        assert!(Scalar::checked_add(&i64::MAX, &1).is_err());
        assert!(Scalar::checked_mul(&(1i128 << 100), &(1i128 << 40)).is_err());
        assert!(Scalar::checked_mul(&1e300f64, &1e10).is_err());
        assert_eq!(Scalar::checked_sub(&5i64, &7).unwrap(), -2);
    }

    #[test]
    fn high_precision_round_trip() {
        let x = HpFloat::lift(0.1, 200).unwrap();
        assert_eq!(x.lower(), 0.1);
        let e = Real::exp(&HpFloat::lift(-2.0, 200).unwrap());
        assert!((e.lower() - (-2.0f64).exp()).abs() < 1e-16);
        assert!(HpFloat::lift(f64::NAN, 64).is_err());
    }
}
