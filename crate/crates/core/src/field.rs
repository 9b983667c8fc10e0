//! Prime-field arithmetic with the modulus carried as a runtime value.
//!
//! The default field is Goldilocks (`2^64 - 2^32 + 1`). Tiny primes such as
//! 5 and 7 use the same types, which is what makes exhaustive enumeration of
//! constraint systems practical in tests.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

/// `2^64 - 2^32 + 1`.
pub const GOLDILOCKS_MODULUS: u64 = 0xffff_ffff_0000_0001;

/// Moduli below this bound are checked for primality on construction.
const TRIAL_DIVISION_BOUND: u64 = 1 << 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("modulus {0} is not a prime >= 2")]
    InvalidModulus(u64),
    #[error("operands live in different fields (p = {left} and p = {right})")]
    SpecMismatch { left: u64, right: u64 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("cannot parse field element from {0:?}")]
    Parse(String),
}

/// A prime field `F_p`, identified by its modulus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldSpec {
    modulus: u64,
}

impl FieldSpec {
    /// Builds a field for `modulus`. Primality is verified by trial division
    /// for moduli below `2^20`; larger moduli are trusted.
    pub fn new(modulus: u64) -> Result<Self, FieldError> {
        if modulus < 2 {
            return Err(FieldError::InvalidModulus(modulus));
        }
        if modulus < TRIAL_DIVISION_BOUND && !is_prime_small(modulus) {
            return Err(FieldError::InvalidModulus(modulus));
        }
        Ok(Self { modulus })
    }

    pub const fn goldilocks() -> Self {
        Self {
            modulus: GOLDILOCKS_MODULUS,
        }
    }

    pub const fn modulus(self) -> u64 {
        self.modulus
    }

    /// Reduces an arbitrary integer into the field.
    pub fn elem(self, value: u64) -> FieldElement {
        FieldElement {
            value: value % self.modulus,
            spec: self,
        }
    }

    /// Embeds a signed integer, mapping `-k` to `p - k`.
    pub fn from_i64(self, value: i64) -> FieldElement {
        let magnitude = self.elem(value.unsigned_abs());
        if value < 0 {
            -magnitude
        } else {
            magnitude
        }
    }

    pub fn zero(self) -> FieldElement {
        self.elem(0)
    }

    pub fn one(self) -> FieldElement {
        self.elem(1)
    }

    /// Parses a decimal string. Values must already be canonical.
    pub fn parse(self, text: &str) -> Result<FieldElement, FieldError> {
        let value: u64 = text.trim().parse().map_err(|_| FieldError::Parse(text.to_string()))?;
        if value >= self.modulus {
            return Err(FieldError::Parse(text.to_string()));
        }
        Ok(self.elem(value))
    }

    /// Iterates over every element of the field in increasing order.
    pub fn elements(self) -> impl Iterator<Item = FieldElement> {
        (0..self.modulus).map(move |v| self.elem(v))
    }
}

impl Default for FieldSpec {
    fn default() -> Self {
        Self::goldilocks()
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.modulus == GOLDILOCKS_MODULUS {
            write!(f, "goldilocks")
        } else {
            write!(f, "F_{}", self.modulus)
        }
    }
}

fn is_prime_small(n: u64) -> bool {
    if n < 4 {
        return n >= 2;
    }
    if n.is_multiple_of(2) {
        return false;
    }
    let mut d = 3;
    while d * d <= n {
        if n.is_multiple_of(d) {
            return false;
        }
        d += 2;
    }
    true
}

/// A canonically reduced element of some [`FieldSpec`].
///
/// The operator impls panic when the operands come from different fields;
/// use the `checked_*` methods where that is a recoverable condition.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement {
    value: u64,
    spec: FieldSpec,
}

impl FieldElement {
    pub fn value(self) -> u64 {
        self.value
    }

    pub fn spec(self) -> FieldSpec {
        self.spec
    }

    pub fn is_zero(self) -> bool {
        self.value == 0
    }

    pub fn is_one(self) -> bool {
        self.value == 1
    }

    fn same_spec(self, other: Self) -> Result<u64, FieldError> {
        if self.spec != other.spec {
            return Err(FieldError::SpecMismatch {
                left: self.spec.modulus,
                right: other.spec.modulus,
            });
        }
        Ok(self.spec.modulus)
    }

    pub fn checked_add(self, rhs: Self) -> Result<Self, FieldError> {
        let p = self.same_spec(rhs)? as u128;
        let sum = (self.value as u128 + rhs.value as u128) % p;
        Ok(Self {
            value: sum as u64,
            spec: self.spec,
        })
    }

    pub fn checked_sub(self, rhs: Self) -> Result<Self, FieldError> {
        let p = self.same_spec(rhs)? as u128;
        let diff = (self.value as u128 + p - rhs.value as u128) % p;
        Ok(Self {
            value: diff as u64,
            spec: self.spec,
        })
    }

    pub fn checked_mul(self, rhs: Self) -> Result<Self, FieldError> {
        let p = self.same_spec(rhs)? as u128;
        let prod = (self.value as u128 * rhs.value as u128) % p;
        Ok(Self {
            value: prod as u64,
            spec: self.spec,
        })
    }

    /// Square-and-multiply. `0^0` is defined as 1 so that a monomial with
    /// multiplicity zero evaluates to the empty product.
    pub fn pow(self, mut exp: u64) -> Self {
        let mut base = self;
        let mut acc = self.spec.one();
        while exp > 0 {
            if exp & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            exp >>= 1;
        }
        acc
    }

    /// Multiplicative inverse via the extended Euclidean algorithm.
    pub fn inv(self) -> Result<Self, FieldError> {
        if self.value == 0 {
            return Err(FieldError::ZeroInverse);
        }
        let p = self.spec.modulus as i128;
        let (mut old_r, mut r) = (self.value as i128, p);
        let (mut old_s, mut s) = (1i128, 0i128);
        while r != 0 {
            let q = old_r / r;
            (old_r, r) = (r, old_r - q * r);
            (old_s, s) = (s, old_s - q * s);
        }
        debug_assert_eq!(old_r, 1, "modulus is not prime");
        Ok(Self {
            value: old_s.rem_euclid(p) as u64,
            spec: self.spec,
        })
    }

    /// Renders the element as the signed integer of smallest magnitude,
    /// e.g. `p - 1` becomes `-1`.
    pub fn to_signed_string(self) -> String {
        let p = self.spec.modulus;
        if self.value > p / 2 {
            format!("-{}", p - self.value)
        } else {
            self.value.to_string()
        }
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

macro_rules! binary_op {
    ($trait:ident, $method:ident, $checked:ident) => {
        impl $trait for FieldElement {
            type Output = FieldElement;

            fn $method(self, rhs: FieldElement) -> FieldElement {
                match self.$checked(rhs) {
                    Ok(v) => v,
                    Err(e) => panic!("{e}"),
                }
            }
        }
    };
}

binary_op!(Add, add, checked_add);
binary_op!(Sub, sub, checked_sub);
binary_op!(Mul, mul, checked_mul);

impl Neg for FieldElement {
    type Output = FieldElement;

    fn neg(self) -> FieldElement {
        self.spec.zero() - self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn f(p: u64) -> FieldSpec {
        FieldSpec::new(p).unwrap()
    }

    #[test]
    fn small_field_arithmetic() {
        let f7 = f(7);
        assert_eq!(f7.elem(5) + f7.elem(4), f7.elem(2));
        assert_eq!(f7.elem(0) - f7.elem(1), f7.elem(6));
        assert_eq!(-f7.elem(1), f7.elem(6));
        assert_eq!(f7.elem(3) * f7.elem(5), f7.elem(1));
    }

    #[test]
    fn goldilocks_wraparound() {
        let g = FieldSpec::goldilocks();
        let minus_one = g.elem(GOLDILOCKS_MODULUS - 1);
        assert!((minus_one + g.one()).is_zero());
        assert_eq!(g.from_i64(-1), minus_one);
        assert_eq!(minus_one * minus_one, g.one());
    }

    #[test]
    fn rejects_composite_and_tiny_moduli() {
        assert_eq!(FieldSpec::new(1), Err(FieldError::InvalidModulus(1)));
        assert_eq!(FieldSpec::new(9), Err(FieldError::InvalidModulus(9)));
        assert!(FieldSpec::new(2).is_ok());
        assert!(FieldSpec::new(101).is_ok());
    }

    #[test]
    fn mismatched_specs_are_rejected() {
        let a = f(5).elem(1);
        let b = f(7).elem(1);
        assert_eq!(a.checked_add(b), Err(FieldError::SpecMismatch { left: 5, right: 7 }));
        assert!(a.checked_mul(b).is_err());
        assert!(a.checked_sub(b).is_err());
    }

    #[test]
    #[should_panic(expected = "different fields")]
    fn operator_panics_on_mismatch() {
        let _ = f(5).elem(1) + f(7).elem(1);
    }

    #[test]
    fn inverse_examples() {
        // 3 * 5 = 15 = 2*7 + 1
        assert_eq!(f(7).elem(3).inv().unwrap(), f(7).elem(5));
        assert_eq!(f(5).elem(1).inv().unwrap(), f(5).elem(1));
        assert_eq!(f(5).elem(0).inv(), Err(FieldError::ZeroInverse));
    }

    #[test]
    fn inverse_exhaustive_small_primes() {
        for p in [2u64, 3, 5, 7, 11, 13, 31, 97, 101] {
            let spec = f(p);
            for a in spec.elements().skip(1) {
                assert!((a * a.inv().unwrap()).is_one(), "p={p} a={a}");
            }
        }
    }

    #[test]
    fn pow_matches_repeated_multiplication() {
        let f7 = f(7);
        let three = f7.elem(3);
        let mut acc = f7.one();
        for _ in 0..5 {
            acc = acc * three;
        }
        assert_eq!(acc, f7.elem(5));
        assert_eq!(three.pow(5), acc);
        assert_eq!(three.pow(1), three);
        assert_eq!(three.pow(0), f7.one());
        assert_eq!(f7.zero().pow(0), f7.one());
        assert_eq!(f7.zero().pow(3), f7.zero());
    }

    #[test]
    fn goldilocks_inverse_and_fermat() {
        let g = FieldSpec::goldilocks();
        let x = g.elem(0x1234_5678_9abc_def0);
        assert!((x * x.inv().unwrap()).is_one());
        assert_eq!(x.pow(GOLDILOCKS_MODULUS - 1), g.one());
    }

    #[test]
    fn signed_rendering_and_parse() {
        let f7 = f(7);
        assert_eq!(f7.elem(6).to_signed_string(), "-1");
        assert_eq!(f7.elem(3).to_signed_string(), "3");
        assert_eq!(f7.parse("6").unwrap(), f7.elem(6));
        assert!(f7.parse("7").is_err());
        assert!(f7.parse("x").is_err());
    }

    fn spec_strategy() -> impl Strategy<Value = FieldSpec> {
        prop_oneof![Just(f(5)), Just(f(7)), Just(FieldSpec::goldilocks())]
    }

    fn triple() -> impl Strategy<Value = (FieldElement, FieldElement, FieldElement)> {
        spec_strategy().prop_flat_map(|s| {
            (any::<u64>(), any::<u64>(), any::<u64>()).prop_map(move |(a, b, c)| (s.elem(a), s.elem(b), s.elem(c)))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]

        #[test]
        fn field_axioms((a, b, c) in triple()) {
            prop_assert_eq!((a + b) + c, a + (b + c));
            prop_assert_eq!((a * b) * c, a * (b * c));
            prop_assert_eq!(a + b, b + a);
            prop_assert_eq!(a * b, b * a);
            prop_assert_eq!(a * (b + c), a * b + a * c);
            prop_assert_eq!(a - a, a.spec().zero());
            prop_assert_eq!(a + (-a), a.spec().zero());
            prop_assert!(a.value() < a.spec().modulus());
        }
    }
}
