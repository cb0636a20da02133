//! Bit-exact equivalence checks of an adder graph against `x^T M`.
//!
//! Random checks draw inputs from SplitMix64 seeded with the given seed:
//! each input takes `low + (next_u64() mod card) * step` of its interval, in
//! input order, trial after trial.

use std::fmt;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::RngCore;
use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::SplitMix64;
use serde_json::{json, Value};

use crate::graph::{input_space_size, AdderGraph, NodeId, Output};
use crate::{Dyadic, Error, Matrix, QInterval};

/// Default cap on exhaustively enumerated input vectors.
pub const DEFAULT_EXHAUSTIVE_LIMIT: u64 = 1 << 20;

/// Exact `x^T M`.
pub fn oracle(m: &Matrix, x: &[Dyadic]) -> Result<Vec<Dyadic>, Error> {
    if x.len() != m.rows() {
        return Err(Error::Dimension(format!("matrix has {} rows, input has {} entries", m.rows(), x.len())));
    }
    Ok((0..m.cols())
        .map(|c| (0..m.rows()).fold(Dyadic::zero(), |acc, r| &acc + &(&x[r] * m.get(r, c))))
        .collect())
}

/// `x^T M` on scaled integers when everything fits an `i128`.
struct FastOracle {
    /// column-major entries scaled by `2^-m_exp`
    entries: Vec<i128>,
    rows: usize,
    cols: usize,
    m_exp: i32,
}

impl FastOracle {
    fn new(m: &Matrix, qints: &[QInterval]) -> Option<Self> {
        let m_exp = m.iter().filter(|v| !v.is_zero()).map(Dyadic::exp).min().unwrap_or(0);
        let mut entries = Vec::with_capacity(m.rows() * m.cols());
        let mut max_m: u128 = 0;
        for c in 0..m.cols() {
            for r in 0..m.rows() {
                let v = m.get(r, c).to_scaled_int(m_exp)?.to_i64()? as i128;
                max_m = max_m.max(v.unsigned_abs());
                entries.push(v);
            }
        }
        // |x| < 2^63 scaled, times |m| < 2^63, times rows must stay below 2^126
        let rows_bits = 128 - (m.rows() as u128).leading_zeros();
        let m_bits = 128 - max_m.leading_zeros();
        let x_exp = qints.iter().map(QInterval::step_exp).min().unwrap_or(0);
        let x_bits = qints
            .iter()
            .flat_map(|q| [q.low(), q.high()])
            .map(|v| v.to_scaled_int(x_exp).map_or(u64::MAX, |v| v.bits()) as u32)
            .max()
            .unwrap_or(0);
        (m_bits.saturating_add(x_bits).saturating_add(rows_bits) <= 124).then_some(Self { entries, rows: m.rows(), cols: m.cols(), m_exp })
    }

    fn eval(&self, x: &[i128], x_exp: i32) -> Vec<Dyadic> {
        (0..self.cols)
            .map(|c| {
                let col = &self.entries[c * self.rows..(c + 1) * self.rows];
                let s: i128 = col.iter().zip(x).map(|(m, x)| m * x).sum();
                Dyadic::new(BigInt::from(s), self.m_exp + x_exp)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Mismatch {
    /// Vector index in enumeration or trial order.
    pub vector: u64,
    pub input: Vec<Dyadic>,
    pub expected: Vec<Dyadic>,
    pub got: Vec<Dyadic>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Report {
    pub exhaustive: bool,
    pub vectors: u64,
    pub mismatch: Option<Mismatch>,
    /// Nodes whose runtime value left their declared interval.
    pub out_of_range: Vec<NodeId>,
    /// Observed `(min, max)` of each output.
    pub output_ranges: Vec<Option<(Dyadic, Dyadic)>>,
}

impl Report {
    pub fn is_equivalent(&self) -> bool {
        self.mismatch.is_none() && self.out_of_range.is_empty()
    }

    pub fn to_json(&self) -> Value {
        let vec = |v: &[Dyadic]| v.iter().map(|d| d.to_string()).collect::<Vec<_>>();
        json!({
            "mode": if self.exhaustive { "exhaustive" } else { "random" },
            "vectors": self.vectors,
            "equivalent": self.is_equivalent(),
            "mismatch": self.mismatch.as_ref().map(|m| json!({
                "vector": m.vector,
                "input": vec(&m.input),
                "expected": vec(&m.expected),
                "got": vec(&m.got),
            })),
            "out_of_range": self.out_of_range,
            "output_ranges": self.output_ranges.iter().map(|r| r.as_ref().map(|(lo, hi)| [lo.to_string(), hi.to_string()])).collect::<Vec<_>>(),
        })
    }
}

fn join(v: &[Dyadic]) -> String {
    v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mode = if self.exhaustive { "exhaustive" } else { "random" };
        match &self.mismatch {
            None => writeln!(f, "equivalent: {} {mode} vectors", self.vectors)?,
            Some(m) => {
                writeln!(f, "MISMATCH at vector {}", m.vector)?;
                writeln!(f, "  input:    [{}]", join(&m.input))?;
                writeln!(f, "  expected: [{}]", join(&m.expected))?;
                writeln!(f, "  got:      [{}]", join(&m.got))?;
            }
        }
        if !self.out_of_range.is_empty() {
            writeln!(f, "nodes outside their interval: {:?}", self.out_of_range)?;
        }
        Ok(())
    }
}

struct Checker<'a> {
    m: &'a Matrix,
    qints: Vec<QInterval>,
    fast: Option<FastOracle>,
    /// common input exponent and per-input scaled lows
    x_exp: i32,
    lows: Vec<BigInt>,
    report: Report,
    scratch: Vec<i128>,
    out_of_range: Vec<bool>,
}

impl<'a> Checker<'a> {
    fn new(graph: &'a AdderGraph, m: &'a Matrix, exhaustive: bool) -> Result<Self, Error> {
        if graph.input_count() != m.rows() || graph.outputs.len() != m.cols() {
            return Err(Error::Dimension(format!(
                "graph is {}x{}, matrix is {}x{}",
                graph.input_count(),
                graph.outputs.len(),
                m.rows(),
                m.cols()
            )));
        }
        let qints = graph.input_qints();
        let x_exp = qints.iter().map(QInterval::step_exp).min().unwrap_or(0);
        let lows = qints.iter().map(|q| q.low().to_scaled_int(x_exp).expect("low on grid")).collect();
        Ok(Self {
            m,
            fast: FastOracle::new(m, &qints),
            qints,
            x_exp,
            lows,
            report: Report {
                exhaustive,
                vectors: 0,
                mismatch: None,
                out_of_range: Vec::new(),
                output_ranges: vec![None; m.cols()],
            },
            scratch: Vec::new(),
            out_of_range: vec![false; graph.nodes.len()],
        })
    }

    /// Check the input whose `j`-th entry is the `offsets[j]`-th grid point.
    fn check(&mut self, offsets: &[u64], eval: &crate::graph::Evaluator<'_>) -> Result<bool, Error> {
        let scaled: Vec<BigInt> = offsets
            .iter()
            .zip(&self.qints)
            .zip(&self.lows)
            .map(|((&o, q), lo)| lo + (BigInt::from(o) << (q.step_exp() - self.x_exp) as usize))
            .collect();
        let x: Vec<Dyadic> = scaled.iter().map(|v| Dyadic::new(v.clone(), self.x_exp)).collect();
        let expected = match &self.fast {
            Some(f) => {
                let xi: Vec<i128> = scaled.iter().map(|v| v.to_i128().expect("input fits")).collect();
                f.eval(&xi, self.x_exp)
            }
            None => oracle(self.m, &x)?,
        };
        let ev = eval.evaluate(&x, &mut self.scratch)?;
        for id in ev.out_of_range {
            self.out_of_range[id] = true;
        }
        for (r, v) in self.report.output_ranges.iter_mut().zip(&ev.outputs) {
            *r = Some(match r.take() {
                None => (v.clone(), v.clone()),
                Some((lo, hi)) => (lo.min(v.clone()), hi.max(v.clone())),
            });
        }
        let vector = self.report.vectors;
        self.report.vectors += 1;
        if ev.outputs != expected {
            self.report.mismatch = Some(Mismatch { vector, input: x, expected, got: ev.outputs });
            return Ok(false);
        }
        Ok(true)
    }

    fn finish(mut self) -> Report {
        self.report.out_of_range = self.out_of_range.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect();
        self.report
    }
}

/// Enumerate every input vector, stopping at the first mismatch.
pub fn check_exhaustive(graph: &AdderGraph, m: &Matrix, limit: u64) -> Result<Report, Error> {
    let size = input_space_size(&graph.input_qints());
    if size > BigInt::from(limit) {
        return Err(Error::SpaceTooLarge { size: size.to_string(), limit });
    }
    let mut ck = Checker::new(graph, m, true)?;
    let cards: Vec<u64> = ck.qints.iter().map(|q| q.cardinality().to_u64().expect("bounded by limit")).collect();
    let eval = graph.compile();
    let mut offsets = vec![0u64; cards.len()];
    loop {
        if !ck.check(&offsets, &eval)? {
            break;
        }
        // mixed-radix increment, last input fastest
        let mut j = cards.len();
        loop {
            if j == 0 {
                return Ok(ck.finish());
            }
            j -= 1;
            offsets[j] += 1;
            if offsets[j] < cards[j] {
                break;
            }
            offsets[j] = 0;
        }
    }
    Ok(ck.finish())
}

/// Check `trials` seeded pseudo-random input vectors.
pub fn check_random(graph: &AdderGraph, m: &Matrix, trials: u64, seed: u64) -> Result<Report, Error> {
    let mut ck = Checker::new(graph, m, false)?;
    let cards: Vec<u64> = ck.qints.iter().map(|q| q.cardinality().to_u64().unwrap_or(u64::MAX)).collect();
    let eval = graph.compile();
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut offsets = vec![0u64; cards.len()];
    for _ in 0..trials {
        for (o, &c) in offsets.iter_mut().zip(&cards) {
            *o = rng.next_u64() % c;
        }
        if !ck.check(&offsets, &eval)? {
            break;
        }
    }
    Ok(ck.finish())
}

/// `count` input vectors drawn exactly as [`check_random`] draws them.
pub fn sample_inputs(qints: &[QInterval], count: usize, seed: u64) -> Vec<Vec<Dyadic>> {
    let mut rng = SplitMix64::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            qints
                .iter()
                .map(|q| {
                    let card = q.cardinality().to_u64().unwrap_or(u64::MAX);
                    q.nth(&BigInt::from(rng.next_u64() % card))
                })
                .collect()
        })
        .collect()
}

/// Exhaustive when the input space fits `limit`, otherwise `trials` random
/// vectors.
pub fn check(graph: &AdderGraph, m: &Matrix, limit: u64, trials: u64, seed: u64) -> Result<Report, Error> {
    if input_space_size(&graph.input_qints()) <= BigInt::from(limit) {
        check_exhaustive(graph, m, limit)
    } else {
        check_random(graph, m, trials, seed)
    }
}

/// Nodes whose declared interval is not attained by the given report's
/// observed output range (tightness spot-check).
pub fn loose_outputs(graph: &AdderGraph, report: &Report) -> Vec<usize> {
    graph
        .outputs
        .iter()
        .zip(&report.output_ranges)
        .enumerate()
        .filter(|(_, (o, r))| match (o, r) {
            (Output::Zero, _) | (_, None) => false,
            (o, Some((lo, hi))) => {
                let q = graph.output_qint(o);
                q.low() != lo || q.high() != hi
            }
        })
        .map(|(i, _)| i)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NodeKind;
    use crate::solve;

    fn h264() -> Matrix {
        Matrix::from_i64(&[[1, 1, 1, 1], [2, 1, -1, -2], [1, -1, -1, 1], [1, -2, 2, -1]]).transpose()
    }

    fn ints(v: &[i64]) -> Vec<Dyadic> {
        v.iter().map(|&x| Dyadic::from_int(x)).collect()
    }

    #[test]
    fn oracle_examples() {
        let id = Matrix::from_i64(&[[1, 0], [0, 1]]);
        assert_eq!(oracle(&id, &ints(&[2, 3])).unwrap(), ints(&[2, 3]));
        assert_eq!(oracle(&h264(), &ints(&[1, 0, 0, 0])).unwrap(), ints(&[1, 2, 1, 1]));
        assert_eq!(oracle(&h264(), &ints(&[0, 0, 0, 0])).unwrap(), ints(&[0, 0, 0, 0]));
        assert!(oracle(&id, &ints(&[1])).is_err());
    }

    #[test]
    fn h264_exhaustive_4bit() {
        let m = h264();
        let sol = solve(&m, &vec![QInterval::int(-8, 7); 4], &[0; 4], -1).unwrap();
        let r = check_exhaustive(&sol.graph, &m, DEFAULT_EXHAUSTIVE_LIMIT).unwrap();
        assert!(r.is_equivalent(), "{r}");
        assert_eq!(r.vectors, 65536);
        assert!(loose_outputs(&sol.graph, &r).is_empty());
    }

    #[test]
    fn scalar_exhaustive() {
        let m = Matrix::from_i64(&[[3]]);
        let sol = solve(&m, &[QInterval::int(-128, 127)], &[0], -1).unwrap();
        let r = check_exhaustive(&sol.graph, &m, DEFAULT_EXHAUSTIVE_LIMIT).unwrap();
        assert!(r.is_equivalent());
        assert_eq!(r.vectors, 256);
    }

    #[test]
    fn flipped_sign_is_caught() {
        let m = h264();
        let sol = solve(&m, &vec![QInterval::int(-8, 7); 4], &[0; 4], -1).unwrap();
        let mut g = sol.graph.clone();
        let id = g.nodes.iter().position(|n| matches!(n.kind, NodeKind::AddSub { .. })).unwrap();
        if let NodeKind::AddSub { sign, .. } = &mut g.nodes[id].kind {
            *sign = sign.flip();
        }
        let r = check_exhaustive(&g, &m, DEFAULT_EXHAUSTIVE_LIMIT).unwrap();
        assert!(r.mismatch.is_some());
        assert!(!check_random(&g, &m, 10_000, 1).unwrap().is_equivalent());
        let mut g = sol.graph;
        if let Some(Output::Node { sign, .. }) = g.outputs.iter_mut().find(|o| matches!(o, Output::Node { .. })) {
            *sign = sign.flip();
        }
        assert!(check_random(&g, &m, 100, 1).unwrap().mismatch.is_some());
    }

    #[test]
    fn random_is_deterministic() {
        let m = h264();
        let sol = solve(&m, &vec![QInterval::int(-128, 127); 4], &[0; 4], 2).unwrap();
        let a = check_random(&sol.graph, &m, 10_000, 7).unwrap();
        assert!(a.is_equivalent());
        assert_eq!(a.vectors, 10_000);
        assert_eq!(a, check_random(&sol.graph, &m, 10_000, 7).unwrap());
        assert_eq!(a.to_json()["equivalent"], true);
    }

    #[test]
    fn sampler_matches_random_check() {
        let m = h264();
        let q = vec![QInterval::int(-8, 7); 4];
        let sol = solve(&m, &q, &[0; 4], -1).unwrap();
        let mut g = sol.graph;
        if let Some(Output::Node { sign, .. }) = g.outputs.iter_mut().find(|o| matches!(o, Output::Node { .. })) {
            *sign = sign.flip();
        }
        let r = check_random(&g, &m, 50, 3).unwrap();
        let mis = r.mismatch.unwrap();
        let xs = sample_inputs(&q, 50, 3);
        assert_eq!(xs[mis.vector as usize], mis.input);
        assert!(xs.iter().flatten().all(|v| q[0].contains(v)));
    }

    #[test]
    fn oversized_space_is_refused() {
        let m = h264();
        let sol = solve(&m, &vec![QInterval::int(-128, 127); 4], &[0; 4], -1).unwrap();
        assert!(matches!(check_exhaustive(&sol.graph, &m, DEFAULT_EXHAUSTIVE_LIMIT), Err(Error::SpaceTooLarge { .. })));
    }

    #[test]
    fn fractional_matrix() {
        let m = Matrix::from_rows(vec![
            vec![Dyadic::new(3, -2), Dyadic::new(-5, -3)],
            vec![Dyadic::new(7, 1), Dyadic::zero()],
        ])
        .unwrap();
        let q = vec![QInterval::new(Dyadic::new(-4, 0), Dyadic::new(7, -1), -1).unwrap(), QInterval::int(-8, 7)];
        let sol = solve(&m, &q, &[0, 0], -1).unwrap();
        let r = check_exhaustive(&sol.graph, &m, DEFAULT_EXHAUSTIVE_LIMIT).unwrap();
        assert!(r.is_equivalent(), "{r}");
    }
}
