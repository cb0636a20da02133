//! Exact fixed-point value model.
//!
//! A signal is described by a [`QInterval`] `[low, high, 2^step_exp]`: every
//! value it can take is a multiple of the step inside the closed range. All
//! bitwidths in the crate are derived from these intervals through
//! [`BitWidthSpec`], and the hardware price of a two-operand adder is given
//! by [`adder_cost`].

use std::fmt;
use std::ops::Mul;

use num_bigint::BigInt;
use num_traits::{One, Signed};
use serde::{Deserialize, Serialize};

use crate::{Dyadic, Error};

/// Sign applied to the second operand of an add/sub, or to a digit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sign {
    Pos,
    Neg,
}

impl Sign {
    pub fn from_i32(v: i32) -> Option<Self> {
        match v {
            1 => Some(Sign::Pos),
            -1 => Some(Sign::Neg),
            _ => None,
        }
    }

    pub fn as_i32(self) -> i32 {
        match self {
            Sign::Pos => 1,
            Sign::Neg => -1,
        }
    }

    pub fn flip(self) -> Self {
        match self {
            Sign::Pos => Sign::Neg,
            Sign::Neg => Sign::Pos,
        }
    }

    pub fn apply(self, v: &Dyadic) -> Dyadic {
        match self {
            Sign::Pos => v.clone(),
            Sign::Neg => -v,
        }
    }
}

impl Mul for Sign {
    type Output = Sign;
    fn mul(self, rhs: Sign) -> Sign {
        if self == rhs {
            Sign::Pos
        } else {
            Sign::Neg
        }
    }
}

/// Quantized interval: the exact value set of a fixed-point signal.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct QInterval {
    low: Dyadic,
    high: Dyadic,
    step_exp: i32,
}

impl QInterval {
    pub fn new(low: Dyadic, high: Dyadic, step_exp: i32) -> Result<Self, Error> {
        if low > high {
            return Err(Error::InvalidInterval(format!("low {low} exceeds high {high}")));
        }
        if !low.is_multiple_of_pow2(step_exp) || !high.is_multiple_of_pow2(step_exp) {
            return Err(Error::InvalidInterval(format!("[{low}, {high}] is not on the 2^{step_exp} grid")));
        }
        Ok(Self { low, high, step_exp })
    }

    /// Integer interval `[low, high]` with unit step.
    pub fn int(low: i64, high: i64) -> Self {
        Self::new(Dyadic::from_int(low), Dyadic::from_int(high), 0).expect("invalid integer interval")
    }

    /// The constant-zero signal.
    pub fn zero(step_exp: i32) -> Self {
        Self { low: Dyadic::zero(), high: Dyadic::zero(), step_exp }
    }

    pub fn low(&self) -> &Dyadic {
        &self.low
    }

    pub fn high(&self) -> &Dyadic {
        &self.high
    }

    pub fn step_exp(&self) -> i32 {
        self.step_exp
    }

    pub fn is_zero(&self) -> bool {
        self.low.is_zero() && self.high.is_zero()
    }

    pub fn contains(&self, v: &Dyadic) -> bool {
        v.is_multiple_of_pow2(self.step_exp) && &self.low <= v && v <= &self.high
    }

    /// `[-high, -low]`
    pub fn neg(&self) -> Self {
        Self { low: -&self.high, high: -&self.low, step_exp: self.step_exp }
    }

    /// Interval of `self * 2^k`.
    pub fn shl(&self, k: i32) -> Self {
        Self { low: self.low.shl(k), high: self.high.shl(k), step_exp: self.step_exp + k }
    }

    pub fn signed(&self, sign: Sign) -> Self {
        match sign {
            Sign::Pos => self.clone(),
            Sign::Neg => self.neg(),
        }
    }

    /// Number of grid points, `(high - low) / step + 1`.
    pub fn cardinality(&self) -> BigInt {
        let span = &self.high - &self.low;
        span.to_scaled_int(self.step_exp).expect("endpoints on grid") + BigInt::one()
    }

    /// The `i`-th grid value counted from `low`.
    pub fn nth(&self, i: &BigInt) -> Dyadic {
        &self.low + &Dyadic::new(i.clone(), self.step_exp)
    }

    pub fn bitwidth(&self) -> BitWidthSpec {
        BitWidthSpec::from_qint(self)
    }

    /// Occupied bit positions `[lsb, msb)` of the minimal containing
    /// fixed-point type. Empty for the zero signal.
    pub fn bit_range(&self) -> Option<(i32, i32)> {
        if self.is_zero() {
            return None;
        }
        let spec = self.bitwidth();
        Some((self.step_exp, spec.int_bits))
    }
}

impl fmt::Display for QInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, 2^{}]", self.low, self.high, self.step_exp)
    }
}

impl fmt::Debug for QInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// `fixed<S, W, I>`: sign flag, total width, integer bits including sign.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BitWidthSpec {
    pub signed: bool,
    pub width: u32,
    pub int_bits: i32,
}

impl BitWidthSpec {
    pub fn new(signed: bool, width: u32, int_bits: i32) -> Self {
        assert!(width >= 1, "fixed-point width must be at least 1");
        Self { signed, width, int_bits }
    }

    pub fn frac_bits(&self) -> i32 {
        self.width as i32 - self.int_bits
    }

    pub fn to_qint(&self) -> QInterval {
        qint_from_fixed(*self)
    }

    /// Minimal specification whose value range contains `q`.
    pub fn from_qint(q: &QInterval) -> Self {
        let step = q.step_exp;
        let signed = q.low.is_negative();
        // magnitude bits needed for the non-negative side: h / step + 1 values
        let pos_bits = if q.high.is_negative() {
            0
        } else {
            ceil_log2(&(q.high.to_scaled_int(step).expect("on grid") + BigInt::one()))
        };
        let width = if signed {
            let neg_bits = ceil_log2(&(-&q.low).to_scaled_int(step).expect("on grid"));
            pos_bits.max(neg_bits) + 1
        } else {
            pos_bits.max(1)
        };
        Self { signed, width, int_bits: step + width as i32 }
    }
}

/// `ceil(log2(k))` for `k >= 1`.
fn ceil_log2(k: &BigInt) -> u32 {
    debug_assert!(k.is_positive());
    if k <= &BigInt::one() {
        0
    } else {
        (k - BigInt::one()).bits() as u32
    }
}

pub fn qint_from_fixed(spec: BitWidthSpec) -> QInterval {
    let s = spec.signed as i32;
    let step_exp = spec.int_bits - spec.width as i32;
    let top = Dyadic::pow2(spec.int_bits - s);
    let low = if spec.signed { -&top } else { Dyadic::zero() };
    let high = &top - &Dyadic::pow2(step_exp);
    QInterval { low, high, step_exp }
}

/// Interval of `a + sign * (b << shift)`.
pub fn qint_add(a: &QInterval, b: &QInterval, sign: Sign, shift: i32) -> QInterval {
    let b = b.shl(shift).signed(sign);
    if a.is_zero() {
        return b;
    }
    if b.is_zero() {
        return a.clone();
    }
    QInterval {
        low: &a.low + &b.low,
        high: &a.high + &b.high,
        step_exp: a.step_exp.min(b.step_exp),
    }
}

/// Bit positions shared by `a` and `b << shift`.
pub fn overlap_bits(a: &QInterval, b: &QInterval, shift: i32) -> u32 {
    match (a.bit_range(), b.bit_range()) {
        (Some((la, ma)), Some((lb, mb))) => (ma.min(mb + shift) - la.max(lb + shift)).max(0) as u32,
        _ => 0,
    }
}

/// Full/half-adder count of `a + sign * (b << shift)`: the width of the bit
/// span covered by both operands plus one carry bit, when the operands
/// overlap. Disjoint operands concatenate for free.
pub fn adder_cost(a: &QInterval, b: &QInterval, _sign: Sign, shift: i32) -> u32 {
    if overlap_bits(a, b, shift) == 0 {
        return 0;
    }
    let (la, ma) = a.bit_range().expect("non-zero");
    let (lb, mb) = b.bit_range().expect("non-zero");
    (ma.max(mb + shift) - la.min(lb + shift) + 1) as u32
}

/// Price of a standalone negation `0 - x`: one adder as wide as the result.
pub fn negation_cost(q: &QInterval) -> u32 {
    if q.is_zero() {
        0
    } else {
        q.neg().bitwidth().width
    }
}
