//! Exact dyadic rationals (`mantissa * 2^exp`) and dense matrices over them.
//!
//! Every constant, interval endpoint and evaluated signal in the crate is a
//! [`Dyadic`]. Values are kept normalized (odd mantissa, or zero with
//! exponent 0) so structural equality is value equality.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::Error;

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    mantissa: BigInt,
    exp: i32,
}

impl Dyadic {
    pub fn new(mantissa: impl Into<BigInt>, exp: i32) -> Self {
        let mut mantissa = mantissa.into();
        if mantissa.is_zero() {
            return Self::zero();
        }
        let tz = mantissa.trailing_zeros().unwrap_or(0);
        let mut exp = exp;
        if tz > 0 {
            mantissa >>= tz;
            exp += tz as i32;
        }
        Self { mantissa, exp }
    }

    pub fn zero() -> Self {
        Self { mantissa: BigInt::zero(), exp: 0 }
    }

    pub fn from_int(v: i64) -> Self {
        Self::new(v, 0)
    }

    /// `2^exp`
    pub fn pow2(exp: i32) -> Self {
        Self { mantissa: BigInt::one(), exp }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.mantissa
    }

    pub fn exp(&self) -> i32 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa.is_negative()
    }

    pub fn signum(&self) -> i32 {
        if self.is_zero() {
            0
        } else if self.is_negative() {
            -1
        } else {
            1
        }
    }

    pub fn abs(&self) -> Self {
        Self { mantissa: self.mantissa.abs(), exp: self.exp }
    }

    /// Multiply by `2^k`.
    pub fn shl(&self, k: i32) -> Self {
        if self.is_zero() {
            return Self::zero();
        }
        Self { mantissa: self.mantissa.clone(), exp: self.exp + k }
    }

    /// Largest `e` such that `self / 2^e` is an odd integer. `None` for zero.
    pub fn valuation(&self) -> Option<i32> {
        (!self.is_zero()).then_some(self.exp)
    }

    pub fn is_integer(&self) -> bool {
        self.is_zero() || self.exp >= 0
    }

    /// `true` when the value is an integer multiple of `2^step_exp`.
    pub fn is_multiple_of_pow2(&self, step_exp: i32) -> bool {
        self.is_zero() || self.exp >= step_exp
    }

    /// The integer `self / 2^exp`, if exact.
    pub fn to_scaled_int(&self, exp: i32) -> Option<BigInt> {
        if self.is_zero() {
            return Some(BigInt::zero());
        }
        let k = self.exp - exp;
        if k < 0 {
            None
        } else {
            Some(&self.mantissa << k as usize)
        }
    }

    pub fn to_i64(&self) -> Option<i64> {
        self.to_scaled_int(0)?.to_i64()
    }

    pub fn to_f64(&self) -> f64 {
        let m = self.mantissa.to_f64().unwrap_or(f64::NAN);
        m * 2f64.powi(self.exp)
    }

    /// Parse a decimal fixed-point literal (`-3`, `0.375`, `1e-2` is not
    /// accepted). Fails when the value is not a dyadic rational with at most
    /// `max_frac_bits` fractional bits.
    pub fn parse_decimal(s: &str, max_frac_bits: u32) -> Result<Self, Error> {
        let bad = || Error::Parse(format!("invalid fixed-point literal {s:?}"));
        let t = s.trim();
        let (neg, body) = match t.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, t.strip_prefix('+').unwrap_or(t)),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(bad());
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let digits = format!("{int_part}{frac_part}");
        let mut num: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().map_err(|_| bad())? };
        if neg {
            num = -num;
        }
        // num / 10^k = num / (2^k * 5^k)
        let k = frac_part.len() as u32;
        let five_k = num_traits::pow(BigInt::from(5u32), k as usize);
        let (q, r) = num.div_rem(&five_k);
        if !r.is_zero() {
            return Err(Error::Parse(format!("{s:?} is not a binary fixed-point value")));
        }
        let v = Dyadic::new(q, -(k as i32));
        if !v.is_zero() && v.exp < -(max_frac_bits as i32) {
            return Err(Error::Parse(format!(
                "{s:?} needs {} fractional bits, more than the allowed {max_frac_bits}",
                -v.exp
            )));
        }
        Ok(v)
    }

    fn aligned(&self, other: &Self) -> (BigInt, BigInt, i32) {
        let e = self.exp.min(other.exp);
        let a = &self.mantissa << (self.exp - e) as usize;
        let b = &other.mantissa << (other.exp - e) as usize;
        (a, b, e)
    }
}

impl Default for Dyadic {
    fn default() -> Self {
        Self::zero()
    }
}

impl From<i64> for Dyadic {
    fn from(v: i64) -> Self {
        Self::from_int(v)
    }
}

impl From<i32> for Dyadic {
    fn from(v: i32) -> Self {
        Self::from_int(v as i64)
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.is_zero(), other.is_zero()) {
            (true, true) => Ordering::Equal,
            (true, false) => BigInt::zero().cmp(&other.mantissa),
            (false, true) => self.mantissa.cmp(&BigInt::zero()),
            _ => {
                let (a, b, _) = self.aligned(other);
                a.cmp(&b)
            }
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Add for &Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        let (a, b, e) = self.aligned(rhs);
        Dyadic::new(a + b, e)
    }
}

impl Sub for &Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: &Dyadic) -> Dyadic {
        self + &(-rhs)
    }
}

impl Mul for &Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: &Dyadic) -> Dyadic {
        Dyadic::new(&self.mantissa * &rhs.mantissa, self.exp + rhs.exp)
    }
}

impl Neg for &Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic { mantissa: -&self.mantissa, exp: self.exp }
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        &self + &rhs
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        &self - &rhs
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        &self * &rhs
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        -&self
    }
}

/// Exact decimal rendering; every dyadic rational has a finite expansion.
impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.exp >= 0 {
            return write!(f, "{}", &self.mantissa << self.exp as usize);
        }
        let k = (-self.exp) as usize;
        // m / 2^k = m * 5^k / 10^k
        let scaled = &self.mantissa * num_traits::pow(BigInt::from(5u32), k);
        let neg = scaled.is_negative();
        let digits = scaled.abs().to_string();
        let digits = if digits.len() <= k { format!("{}{}", "0".repeat(k + 1 - digits.len()), digits) } else { digits };
        let (i, frac) = digits.split_at(digits.len() - k);
        write!(f, "{}{}.{}", if neg { "-" } else { "" }, i, frac)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl FromStr for Dyadic {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        Self::parse_decimal(s, u32::MAX / 2)
    }
}

/// Dense row-major matrix of exact scalars. Rows index inputs, columns index
/// outputs (`y^T = x^T M`).
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<Dyadic>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Dyadic::zero(); rows * cols] }
    }

    pub fn from_rows(rows: Vec<Vec<Dyadic>>) -> Result<Self, Error> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged matrix rows".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    /// Convenience constructor for integer matrices. Panics on ragged input.
    pub fn from_i64<R: AsRef<[i64]>>(rows: &[R]) -> Self {
        let rows = rows.iter().map(|r| r.as_ref().iter().map(|&v| Dyadic::from_int(v)).collect()).collect();
        Self::from_rows(rows).expect("ragged integer matrix")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.rows == 0 || self.cols == 0
    }

    pub fn get(&self, r: usize, c: usize) -> &Dyadic {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Dyadic) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Dyadic] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<Dyadic> {
        (0..self.rows).map(|r| self.get(r, c).clone()).collect()
    }

    pub fn from_columns(rows: usize, columns: &[Vec<Dyadic>]) -> Self {
        let mut m = Self::zeros(rows, columns.len());
        for (c, col) in columns.iter().enumerate() {
            assert_eq!(col.len(), rows, "column length mismatch");
            for (r, v) in col.iter().enumerate() {
                m.set(r, c, v.clone());
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c).clone());
            }
        }
        t
    }

    pub fn mul(&self, rhs: &Matrix) -> Result<Matrix, Error> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a.is_zero() {
                    continue;
                }
                for c in 0..rhs.cols {
                    let b = rhs.get(k, c);
                    if !b.is_zero() {
                        let acc = out.get(r, c) + &(a * b);
                        out.set(r, c, acc);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Dyadic> {
        self.data.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_makes_equality_structural() {
        assert_eq!(Dyadic::new(4, 0), Dyadic::new(1, 2));
        assert_eq!(Dyadic::new(6, -1), Dyadic::from_int(3));
        assert_eq!(Dyadic::new(0, 7), Dyadic::zero());
    }

    #[test]
    fn arithmetic_and_order() {
        let a = Dyadic::new(3, -2); // 0.75
        let b = Dyadic::from_int(-2);
        assert_eq!(&a + &b, Dyadic::new(-5, -2));
        assert_eq!(&a * &b, Dyadic::new(-3, -1));
        assert!(b < a);
        assert!(Dyadic::zero() < a);
        assert!(b < Dyadic::zero());
    }

    #[test]
    fn decimal_round_trip() {
        for s in ["0", "-3", "0.375", "-1.875", "12.5", "0.0009765625"] {
            let v: Dyadic = s.parse().unwrap();
            assert_eq!(v.to_string(), s);
        }
        assert_eq!(Dyadic::parse_decimal("1.50", 4).unwrap(), Dyadic::new(3, -1));
        assert!(Dyadic::parse_decimal("0.1", 32).is_err());
        assert!(Dyadic::parse_decimal("0.0625", 3).is_err());
        assert!(Dyadic::parse_decimal("1.2.3", 8).is_err());
        assert!(Dyadic::parse_decimal("", 8).is_err());
    }

    #[test]
    fn matrix_product() {
        let a = Matrix::from_i64(&[[1, 2], [3, 4]]);
        let b = Matrix::from_i64(&[[0, 1], [1, 0]]);
        assert_eq!(a.mul(&b).unwrap(), Matrix::from_i64(&[[2, 1], [4, 3]]));
        assert!(a.mul(&Matrix::zeros(3, 1)).is_err());
    }
}
