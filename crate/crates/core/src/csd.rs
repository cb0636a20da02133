//! Canonical signed digit recoding and power-of-two matrix normalization.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::{Dyadic, Matrix, Sign};

/// Non-adjacent signed-digit form of a scalar. Digits are sorted by
/// ascending power.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct CsdScalar {
    pub digits: Vec<(i32, Sign)>,
}

impl CsdScalar {
    pub fn nnz(&self) -> usize {
        self.digits.len()
    }

    pub fn value(&self) -> Dyadic {
        self.digits.iter().fold(Dyadic::zero(), |acc, &(p, s)| &acc + &s.apply(&Dyadic::pow2(p)))
    }
}

/// Recode `value` into canonical signed digits.
pub fn to_csd(value: &Dyadic) -> CsdScalar {
    if value.is_zero() {
        return CsdScalar::default();
    }
    let exp = value.exp();
    let m = value.mantissa();
    let neg = m.is_negative();
    let (pos_sign, neg_sign) = if neg { (Sign::Neg, Sign::Pos) } else { (Sign::Pos, Sign::Neg) };
    let mut digits = Vec::new();
    if let Some(x) = m.abs().to_u64() {
        // x + (x >> 1) carries flag the positions where the NAF differs from
        // the binary expansion.
        let x = x as u128;
        let xh = x >> 1;
        let x3 = x + xh;
        let c = xh ^ x3;
        let mut pos = x3 & c;
        let mut negs = xh & c;
        while pos | negs != 0 {
            let tp = if pos == 0 { u32::MAX } else { pos.trailing_zeros() };
            let tn = if negs == 0 { u32::MAX } else { negs.trailing_zeros() };
            if tp < tn {
                digits.push((exp + tp as i32, pos_sign));
                pos &= pos - 1;
            } else {
                digits.push((exp + tn as i32, neg_sign));
                negs &= negs - 1;
            }
        }
    } else {
        let mut x = m.abs();
        let mut p = exp;
        let four = BigInt::from(4);
        while !x.is_zero() {
            if x.bit(0) {
                let r = (&x % &four).to_u8().unwrap();
                if r == 1 {
                    digits.push((p, pos_sign));
                    x -= 1;
                } else {
                    digits.push((p, neg_sign));
                    x += 1;
                }
            }
            x >>= 1;
            p += 1;
        }
    }
    CsdScalar { digits }
}

pub fn nnz(value: &Dyadic) -> usize {
    if value.is_zero() {
        return 0;
    }
    match value.mantissa().abs().to_u64() {
        Some(x) => {
            let x = x as u128;
            let xh = x >> 1;
            ((x + xh) ^ xh).count_ones() as usize
        }
        None => to_csd(value).nnz(),
    }
}

/// Total CSD digit count of a vector.
pub fn nnz_csd(values: &[Dyadic]) -> usize {
    values.iter().map(nnz).sum()
}

/// `original[i][j] = normalized[i][j] * 2^(row_shifts[i] + col_shifts[j])`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Normalization {
    pub row_shifts: Vec<i32>,
    pub col_shifts: Vec<i32>,
    pub normalized: Matrix,
}

impl Normalization {
    pub fn reconstruct(&self) -> Matrix {
        let m = &self.normalized;
        let mut out = m.clone();
        for r in 0..m.rows() {
            for c in 0..m.cols() {
                out.set(r, c, m.get(r, c).shl(self.row_shifts[r] + self.col_shifts[c]));
            }
        }
        out
    }
}

/// Divide every row, then every column, by its largest power-of-two factor.
/// Zero rows and columns keep shift 0.
pub fn normalize(m: &Matrix) -> Normalization {
    let mut normalized = m.clone();
    let row_shifts: Vec<i32> =
        (0..m.rows()).map(|r| m.row(r).iter().filter_map(Dyadic::valuation).min().unwrap_or(0)).collect();
    for (r, &s) in row_shifts.iter().enumerate() {
        for c in 0..m.cols() {
            let v = normalized.get(r, c).shl(-s);
            normalized.set(r, c, v);
        }
    }
    let col_shifts: Vec<i32> = (0..m.cols())
        .map(|c| (0..m.rows()).filter_map(|r| normalized.get(r, c).valuation()).min().unwrap_or(0))
        .collect();
    for (c, &s) in col_shifts.iter().enumerate() {
        for r in 0..m.rows() {
            let v = normalized.get(r, c).shl(-s);
            normalized.set(r, c, v);
        }
    }
    Normalization { row_shifts, col_shifts, normalized }
}

/// Sparse `{-1, 0, 1}` tensor indexed by (row, column, power). Rows are
/// implemented values, columns are outputs.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CsdTensor {
    rows: usize,
    columns: Vec<BTreeMap<(usize, i32), Sign>>,
}

impl CsdTensor {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, columns: vec![BTreeMap::new(); cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    /// Append an empty row, returning its index.
    pub fn push_row(&mut self) -> usize {
        self.rows += 1;
        self.rows - 1
    }

    pub fn get(&self, row: usize, col: usize, power: i32) -> Option<Sign> {
        self.columns[col].get(&(row, power)).copied()
    }

    pub fn set(&mut self, row: usize, col: usize, power: i32, sign: Sign) {
        assert!(row < self.rows, "row {row} out of range");
        self.columns[col].insert((row, power), sign);
    }

    pub fn remove(&mut self, row: usize, col: usize, power: i32) -> Option<Sign> {
        self.columns[col].remove(&(row, power))
    }

    /// Digits of one column as `(row, power, sign)`, ordered by row then power.
    pub fn column(&self, col: usize) -> impl Iterator<Item = (usize, i32, Sign)> + '_ {
        self.columns[col].iter().map(|(&(r, p), &s)| (r, p, s))
    }

    /// Digits of `row` inside column `col`.
    pub fn row_in_column(&self, row: usize, col: usize) -> impl Iterator<Item = (i32, Sign)> + '_ {
        self.columns[col].range((row, i32::MIN)..=(row, i32::MAX)).map(|(&(_, p), &s)| (p, s))
    }

    pub fn column_len(&self, col: usize) -> usize {
        self.columns[col].len()
    }

    pub fn digit_count(&self) -> usize {
        self.columns.iter().map(BTreeMap::len).sum()
    }

    /// Minimal and maximal stored power.
    pub fn power_range(&self) -> Option<(i32, i32)> {
        let mut it = self.columns.iter().flat_map(|c| c.keys().map(|&(_, p)| p));
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), p| (lo.min(p), hi.max(p))))
    }

    /// Span `B` of stored powers.
    pub fn band(&self) -> usize {
        self.power_range().map_or(0, |(lo, hi)| (hi - lo + 1) as usize)
    }

    /// `sum_{j,s} 2^s * values[j] * tensor[j, col, s]`
    pub fn evaluate_column(&self, col: usize, values: &[Dyadic]) -> Dyadic {
        self.column(col).fold(Dyadic::zero(), |acc, (r, p, s)| &acc + &s.apply(&values[r].shl(p)))
    }
}

pub fn matrix_to_tensor(m: &Matrix) -> CsdTensor {
    let mut t = CsdTensor::new(m.rows(), m.cols());
    for r in 0..m.rows() {
        for c in 0..m.cols() {
            for (p, s) in to_csd(m.get(r, c)).digits {
                t.set(r, c, p, s);
            }
        }
    }
    t
}
