//! Greedy two-term common subexpression elimination and the full solver.
//!
//! The state is a CSD tensor over implemented values (initially the inputs)
//! plus a frequency table of every two-digit pattern `a + sign * (b << s)`
//! that co-occurs within one output column. Each step implements the most
//! frequent pattern (optionally weighted by the operands' overlapping bits),
//! appends it as a new value and rewrites all its occurrences into single
//! digits of the new row. Leftover digits are summed per output by a
//! shallowest-first adder tree.
//!
//! With a delay constraint `dc >= 0`, every output `i` gets a depth budget
//! `D_i + dc`, where `D_i = ceil(log2(sum 2^depth))` over the output's digits
//! is the shallowest tree possible. A pattern is only implemented when every
//! affected column can still meet its budget.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::time::{Duration, Instant};

use crate::csd::{matrix_to_tensor, normalize, to_csd, CsdTensor};
use crate::decompose::{decompose, ColumnGraphResult};
use crate::fxp::qint_add;
use crate::graph::{AdderGraph, GraphBuilder, GraphStats, NodeId, Output};
use crate::{Dyadic, Error, Matrix, QInterval, Sign};

/// `a + sign * (b << shift)`, with `a` the operand at the lower power (lower
/// row on ties), so `shift >= 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SubexprKey {
    pub a: usize,
    pub b: usize,
    pub sign: Sign,
    pub shift: u32,
}

impl SubexprKey {
    /// Canonical key of two digits `(row, power, sign)` of one column, and
    /// the base digit (power and sign) the pair collapses to.
    fn of_pair(d1: (usize, i32, Sign), d2: (usize, i32, Sign)) -> (Self, (i32, Sign)) {
        let (lo, hi) = if (d1.1, d1.0) <= (d2.1, d2.0) { (d1, d2) } else { (d2, d1) };
        let key = SubexprKey { a: lo.0, b: hi.0, sign: lo.2 * hi.2, shift: (hi.1 - lo.1) as u32 };
        (key, (lo.1, lo.2))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Selection {
    /// Rank patterns by `count * overlapping bits`.
    #[default]
    Weighted,
    /// Rank patterns by raw count.
    Unweighted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Origin {
    Leaf(usize),
    Subexpr(SubexprKey),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImplValue {
    pub origin: Origin,
    pub qint: QInterval,
    pub depth: u32,
    bits: Option<(i32, i32)>,
}

/// One matched pattern inside a column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Occurrence {
    col: usize,
    power: i32,
    sign: Sign,
    b_power: i32,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Rank {
    weighted: Reverse<u64>,
    count: Reverse<u32>,
    key: SubexprKey,
}

fn pow2_sat(d: u32) -> u128 {
    if d >= 120 {
        1u128 << 120
    } else {
        1u128 << d
    }
}

/// `ceil(log2(sum))` for a Kraft sum of leaf depths.
pub fn kraft_depth(sum: u128) -> u32 {
    if sum <= 1 {
        0
    } else {
        128 - (sum - 1).leading_zeros()
    }
}

/// Shallowest possible adder-tree depth over leaves of the given depths.
pub fn minimal_depth(leaf_depths: impl IntoIterator<Item = u32>) -> u32 {
    kraft_depth(leaf_depths.into_iter().fold(0u128, |s, d| s.saturating_add(pow2_sat(d))))
}

#[derive(Clone, Debug)]
pub struct CseState {
    pub tensor: CsdTensor,
    pub values: Vec<ImplValue>,
    selection: Selection,
    freq: HashMap<SubexprKey, u32>,
    /// Keys with count >= 2, best first.
    ranked: BTreeSet<Rank>,
    kraft: Vec<u128>,
}

impl CseState {
    pub fn new(tensor: CsdTensor, qints: &[QInterval], depths: &[u32], selection: Selection) -> Self {
        assert_eq!(tensor.rows(), qints.len(), "one interval per tensor row");
        assert_eq!(tensor.rows(), depths.len(), "one depth per tensor row");
        let values = qints
            .iter()
            .zip(depths)
            .enumerate()
            .map(|(j, (q, &d))| ImplValue { origin: Origin::Leaf(j), qint: q.clone(), depth: d, bits: q.bit_range() })
            .collect();
        let mut state = Self {
            tensor,
            values,
            selection,
            freq: HashMap::new(),
            ranked: BTreeSet::new(),
            kraft: Vec::new(),
        };
        let mut freq: HashMap<SubexprKey, u32> = HashMap::new();
        for col in 0..state.tensor.cols() {
            let digits: Vec<_> = state.tensor.column(col).collect();
            for i in 0..digits.len() {
                for j in i + 1..digits.len() {
                    *freq.entry(SubexprKey::of_pair(digits[i], digits[j]).0).or_insert(0) += 1;
                }
            }
            let k = digits.iter().fold(0u128, |s, &(r, _, _)| s.saturating_add(pow2_sat(state.values[r].depth)));
            state.kraft.push(k);
        }
        for (&key, &count) in &freq {
            if count >= 2 {
                let rank = state.rank(key, count);
                state.ranked.insert(rank);
            }
        }
        state.freq = freq;
        state
    }

    fn weight(&self, key: &SubexprKey) -> u64 {
        match self.selection {
            Selection::Unweighted => 1,
            Selection::Weighted => match (self.values[key.a].bits, self.values[key.b].bits) {
                (Some((la, ma)), Some((lb, mb))) => {
                    let s = key.shift as i32;
                    (ma.min(mb + s) - la.max(lb + s)).max(0) as u64
                }
                _ => 0,
            },
        }
    }

    fn rank(&self, key: SubexprKey, count: u32) -> Rank {
        Rank { weighted: Reverse(count as u64 * self.weight(&key)), count: Reverse(count), key }
    }

    /// Raw pair count of `key`.
    pub fn count(&self, key: &SubexprKey) -> u32 {
        self.freq.get(key).copied().unwrap_or(0)
    }

    /// `(count, weighted count)` of `key`.
    pub fn frequency(&self, key: &SubexprKey) -> (u32, u64) {
        let c = self.count(key);
        (c, c as u64 * self.weight(key))
    }

    pub fn frequencies(&self) -> &HashMap<SubexprKey, u32> {
        &self.freq
    }

    /// Kraft bound of each column in its current state.
    pub fn column_min_depth(&self, col: usize) -> u32 {
        kraft_depth(self.kraft[col])
    }

    fn bump(&mut self, key: SubexprKey, delta: i32) {
        let old = self.count(&key);
        let new = (old as i64 + delta as i64) as u32;
        debug_assert!(old as i64 + delta as i64 >= 0, "negative count for {key:?}");
        if old >= 2 {
            let r = self.rank(key, old);
            self.ranked.remove(&r);
        }
        if new >= 2 {
            let r = self.rank(key, new);
            self.ranked.insert(r);
        }
        if new == 0 {
            self.freq.remove(&key);
        } else {
            self.freq.insert(key, new);
        }
    }

    /// Non-overlapping occurrences of `key`, scanning columns in order and
    /// powers upward.
    fn occurrences(&self, key: &SubexprKey) -> Vec<Occurrence> {
        let mut out = Vec::new();
        let shift = key.shift as i32;
        for col in 0..self.tensor.cols() {
            let mut taken: Vec<i32> = Vec::new();
            for (p, sa) in self.tensor.row_in_column(key.a, col) {
                if key.a == key.b && taken.contains(&p) {
                    continue;
                }
                let Some(sb) = self.tensor.get(key.b, col, p + shift) else { continue };
                if sa * sb != key.sign {
                    continue;
                }
                if key.a == key.b {
                    taken.push(p + shift);
                }
                out.push(Occurrence { col, power: p, sign: sa, b_power: p + shift });
            }
        }
        out
    }

    fn admissible(&self, key: &SubexprKey, occ: &[Occurrence], budgets: &[Option<u32>]) -> bool {
        let (da, db) = (self.values[key.a].depth, self.values[key.b].depth);
        let removed = pow2_sat(da) + pow2_sat(db);
        let added = pow2_sat(da.max(db) + 1);
        let mut per_col: Vec<(usize, u32)> = Vec::new();
        for o in occ {
            match per_col.last_mut() {
                Some((c, n)) if *c == o.col => *n += 1,
                _ => per_col.push((o.col, 1)),
            }
        }
        per_col.into_iter().all(|(col, n)| match budgets.get(col).copied().flatten() {
            None => true,
            Some(budget) => {
                let n = n as u128;
                let k = self.kraft[col] - n * removed + n * added;
                kraft_depth(k) <= budget
            }
        })
    }

    /// Best admissible pattern with at least two non-overlapping occurrences.
    pub fn select(&self, budgets: &[Option<u32>]) -> Option<SubexprKey> {
        let constrained = budgets.iter().any(Option::is_some);
        for r in &self.ranked {
            let occ = self.occurrences(&r.key);
            if occ.len() < 2 {
                continue;
            }
            if constrained && !self.admissible(&r.key, &occ, budgets) {
                continue;
            }
            return Some(r.key);
        }
        None
    }

    fn remove_digit(&mut self, col: usize, row: usize, power: i32) -> Sign {
        let sign = self.tensor.remove(row, col, power).expect("digit present");
        let d = (row, power, sign);
        let others: Vec<_> = self.tensor.column(col).collect();
        for e in others {
            self.bump(SubexprKey::of_pair(d, e).0, -1);
        }
        self.kraft[col] -= pow2_sat(self.values[row].depth);
        sign
    }

    fn add_digit(&mut self, col: usize, row: usize, power: i32, sign: Sign) {
        let d = (row, power, sign);
        let others: Vec<_> = self.tensor.column(col).collect();
        for e in others {
            self.bump(SubexprKey::of_pair(d, e).0, 1);
        }
        self.tensor.set(row, col, power, sign);
        self.kraft[col] = self.kraft[col].saturating_add(pow2_sat(self.values[row].depth));
    }

    /// Implement `key` as a new value and rewrite its occurrences. Returns
    /// the new value index.
    pub fn implement(&mut self, key: SubexprKey) -> usize {
        let occ = self.occurrences(&key);
        assert!(!occ.is_empty(), "pattern {key:?} does not occur");
        let (va, vb) = (&self.values[key.a], &self.values[key.b]);
        let qint = qint_add(&va.qint, &vb.qint, key.sign, key.shift as i32);
        let depth = va.depth.max(vb.depth) + 1;
        let row = self.tensor.push_row();
        let bits = qint.bit_range();
        self.values.push(ImplValue { origin: Origin::Subexpr(key), qint, depth, bits });
        for o in occ {
            self.remove_digit(o.col, key.a, o.power);
            self.remove_digit(o.col, key.b, o.b_power);
            self.add_digit(o.col, row, o.power, o.sign);
        }
        row
    }

    /// Run select/implement until no admissible pattern remains.
    pub fn run(&mut self, budgets: &[Option<u32>]) -> usize {
        let mut steps = 0;
        while let Some(key) = self.select(budgets) {
            self.implement(key);
            steps += 1;
        }
        steps
    }

    /// Value of every implemented value given the leaf values.
    pub fn values_for(&self, leaves: &[Dyadic]) -> Vec<Dyadic> {
        let mut out: Vec<Dyadic> = Vec::with_capacity(self.values.len());
        for v in &self.values {
            let x = match &v.origin {
                Origin::Leaf(j) => leaves[*j].clone(),
                Origin::Subexpr(k) => &out[k.a] + &k.sign.apply(&out[k.b].shl(k.shift as i32)),
            };
            out.push(x);
        }
        out
    }

    /// Recount pair frequencies from scratch.
    pub fn recount(&self) -> HashMap<SubexprKey, u32> {
        let fresh = CseState::new(
            self.tensor.clone(),
            &self.values.iter().map(|v| v.qint.clone()).collect::<Vec<_>>(),
            &self.values.iter().map(|v| v.depth).collect::<Vec<_>>(),
            self.selection,
        );
        fresh.freq
    }

    /// Build graph nodes for every implemented value, then sum each column's
    /// remaining digits shallowest-first.
    pub fn reduce_outputs(
        &self,
        builder: &mut GraphBuilder,
        leaf_nodes: &[NodeId],
        budgets: &[Option<u32>],
    ) -> Result<Vec<Output>, Error> {
        let mut nodes: Vec<NodeId> = Vec::with_capacity(self.values.len());
        for v in &self.values {
            let id = match &v.origin {
                Origin::Leaf(j) => leaf_nodes[*j],
                Origin::Subexpr(k) => builder.add_sub(nodes[k.a], nodes[k.b], k.sign, k.shift as i32),
            };
            nodes.push(id);
        }
        (0..self.tensor.cols())
            .map(|col| {
                let terms = self.tensor.column(col).map(|(r, p, s)| Term::new(builder, nodes[r], p, s)).collect();
                let out = reduce_terms(builder, terms);
                if let (Some(budget), Output::Node { node, .. }) = (budgets.get(col).copied().flatten(), &out) {
                    let depth = builder.node(*node).depth;
                    if depth > budget {
                        return Err(Error::BudgetInfeasible { output: col, depth, budget });
                    }
                }
                Ok(out)
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Term {
    depth: u32,
    width: u32,
    node: NodeId,
    power: i32,
    sign: Sign,
}

impl Term {
    fn new(b: &GraphBuilder, node: NodeId, power: i32, sign: Sign) -> Self {
        let n = b.node(node);
        Term { depth: n.depth, width: n.qint.bitwidth().width, node, power, sign }
    }
}

fn merge(builder: &mut GraphBuilder, t1: Term, t2: Term) -> Term {
    if t1.sign == t2.sign {
        let (lo, hi) = if (t1.power, t1.node) <= (t2.power, t2.node) { (t1, t2) } else { (t2, t1) };
        let node = builder.add_sub(lo.node, hi.node, Sign::Pos, hi.power - lo.power);
        Term::new(builder, node, lo.power, t1.sign)
    } else {
        let (pos, neg) = if t1.sign == Sign::Pos { (t1, t2) } else { (t2, t1) };
        let node = builder.add_sub(pos.node, neg.node, Sign::Neg, neg.power - pos.power);
        Term::new(builder, node, pos.power, Sign::Pos)
    }
}

/// Combine terms pairwise, always merging the two shallowest (then
/// narrowest, then lowest node id).
fn reduce_terms(builder: &mut GraphBuilder, terms: Vec<Term>) -> Output {
    let mut heap: BinaryHeap<Reverse<Term>> = terms.into_iter().map(Reverse).collect();
    loop {
        match (heap.pop(), heap.pop()) {
            (None, _) => return Output::Zero,
            (Some(Reverse(t)), None) => return Output::Node { node: t.node, shift: t.power, sign: t.sign },
            (Some(Reverse(t1)), Some(Reverse(t2))) => heap.push(Reverse(merge(builder, t1, t2))),
        }
    }
}

/// One row of a stage matrix multiplies `sign * (node << shift)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Leaf {
    node: NodeId,
    shift: i32,
    sign: Sign,
}

/// CSD tensor of `m` (normalized, with its shifts folded back into the digit
/// powers) over the given leaves. Rows of zero leaves stay empty.
fn stage_tensor(m: &Matrix, leaves: &[Option<Leaf>]) -> CsdTensor {
    let norm = normalize(m);
    let mut t = CsdTensor::new(m.rows(), m.cols());
    for (r, leaf) in leaves.iter().enumerate() {
        let Some(leaf) = leaf else { continue };
        for c in 0..m.cols() {
            let base = norm.row_shifts[r] + norm.col_shifts[c] + leaf.shift;
            for (p, s) in to_csd(norm.normalized.get(r, c)).digits {
                t.set(r, c, p + base, s * leaf.sign);
            }
        }
    }
    t
}

fn run_stage(
    builder: &mut GraphBuilder,
    m: &Matrix,
    leaves: &[Option<Leaf>],
    budgets: &[Option<u32>],
    selection: Selection,
) -> Result<Vec<Output>, Error> {
    let tensor = stage_tensor(m, leaves);
    let (qints, depths): (Vec<_>, Vec<_>) = leaves
        .iter()
        .map(|l| match l {
            Some(l) => {
                let n = builder.node(l.node);
                (n.qint.clone(), n.depth)
            }
            None => (QInterval::zero(0), 0),
        })
        .unzip();
    let mut state = CseState::new(tensor, &qints, &depths, selection);
    state.run(budgets);
    let leaf_nodes: Vec<NodeId> = leaves.iter().map(|l| l.map_or(usize::MAX, |l| l.node)).collect();
    state.reduce_outputs(builder, &leaf_nodes, budgets)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SolveOptions {
    /// Extra adder depth allowed over the minimum; `-1` for unconstrained.
    pub dc: i32,
    pub selection: Selection,
    /// Also solve without the column decomposition and keep the cheaper
    /// graph.
    pub compare_direct: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { dc: -1, selection: Selection::Weighted, compare_direct: true }
    }
}

impl SolveOptions {
    pub fn with_dc(dc: i32) -> Self {
        Self { dc, ..Self::default() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub graph: AdderGraph,
    pub stats: GraphStats,
    pub elapsed: Duration,
}

impl Solution {
    fn new(graph: AdderGraph, elapsed: Duration) -> Self {
        let stats = graph.stats();
        Self { graph, stats, elapsed }
    }
}

fn check_inputs(m: &Matrix, qints: &[QInterval], depths: &[u32]) -> Result<(), Error> {
    if qints.len() != m.rows() || depths.len() != m.rows() {
        return Err(Error::Dimension(format!(
            "matrix has {} rows but {} input intervals and {} depths were given",
            m.rows(),
            qints.len(),
            depths.len()
        )));
    }
    Ok(())
}

/// Per-output depth budgets `D_i + dc` against the original inputs.
pub fn output_budgets(m: &Matrix, depths: &[u32], dc: i32) -> Vec<Option<u32>> {
    if dc < 0 {
        return vec![None; m.cols()];
    }
    (0..m.cols())
        .map(|c| {
            let leaves = (0..m.rows()).flat_map(|r| std::iter::repeat_n(depths[r], crate::csd::nnz(m.get(r, c))));
            Some(minimal_depth(leaves) + dc as u32)
        })
        .collect()
}

fn add_inputs(builder: &mut GraphBuilder, qints: &[QInterval], depths: &[u32]) -> Vec<NodeId> {
    qints.iter().zip(depths).enumerate().map(|(i, (q, &d))| builder.add_input(i, q.clone(), d)).collect()
}

fn direct_graph(m: &Matrix, qints: &[QInterval], depths: &[u32], opts: &SolveOptions) -> Result<AdderGraph, Error> {
    let mut builder = GraphBuilder::new();
    let inputs = add_inputs(&mut builder, qints, depths);
    let leaves: Vec<_> = inputs.iter().map(|&node| Some(Leaf { node, shift: 0, sign: Sign::Pos })).collect();
    let budgets = output_budgets(m, depths, opts.dc);
    let outputs = run_stage(&mut builder, m, &leaves, &budgets, opts.selection)?;
    Ok(builder.finish(outputs))
}

/// Single CSE pass directly on `m`.
pub fn solve_stage2(
    m: &Matrix,
    qints: &[QInterval],
    depths: &[u32],
    dc: i32,
    selection: Selection,
) -> Result<Solution, Error> {
    check_inputs(m, qints, depths)?;
    let start = Instant::now();
    let graph = direct_graph(m, qints, depths, &SolveOptions { dc, selection, compare_direct: false })?;
    Ok(Solution::new(graph, start.elapsed()))
}

/// Depth budgets for the `m1` columns: each edge must leave room to sum the
/// `t_i` edges of every output path through it.
fn edge_budgets(dec: &ColumnGraphResult, out_budgets: &[Option<u32>]) -> Vec<Option<u32>> {
    let k = dec.m1.cols();
    let mut budgets: Vec<Option<u32>> = vec![None; k];
    for (i, b) in out_budgets.iter().enumerate() {
        let Some(b) = *b else { continue };
        let t = dec.path_terms(i) as u128;
        let room = b.saturating_sub(kraft_depth(t));
        for (e, slot) in budgets.iter_mut().enumerate() {
            if !dec.m2.get(e, i).is_zero() {
                *slot = Some(slot.map_or(room, |s| s.min(room)));
            }
        }
    }
    budgets
}

fn decomposed_graph(
    m: &Matrix,
    qints: &[QInterval],
    depths: &[u32],
    opts: &SolveOptions,
) -> Result<Option<AdderGraph>, Error> {
    let norm = normalize(m);
    let out_budgets = output_budgets(m, depths, opts.dc);

    // Shrink the tree depth cap until every edge column fits its budget.
    let mut cap_dc = opts.dc;
    let (dec, m1_budgets) = loop {
        let dec = decompose(&norm.normalized, cap_dc);
        if dec.is_trivial() {
            return Ok(None);
        }
        let budgets = edge_budgets(&dec, &out_budgets);
        let fits = budgets.iter().enumerate().all(|(e, b)| match b {
            None => true,
            Some(b) => {
                let leaves = (0..m.rows()).flat_map(|r| std::iter::repeat_n(depths[r], crate::csd::nnz(dec.m1.get(r, e))));
                minimal_depth(leaves) <= *b
            }
        });
        if fits {
            break (dec, budgets);
        }
        cap_dc -= 1;
    };

    let mut builder = GraphBuilder::new();
    let inputs = add_inputs(&mut builder, qints, depths);
    let leaves: Vec<_> = inputs
        .iter()
        .zip(&norm.row_shifts)
        .map(|(&node, &shift)| Some(Leaf { node, shift, sign: Sign::Pos }))
        .collect();
    let z = run_stage(&mut builder, &dec.m1, &leaves, &m1_budgets, opts.selection)?;

    let leaves: Vec<_> = z
        .iter()
        .map(|o| match *o {
            Output::Zero => None,
            Output::Node { node, shift, sign } => Some(Leaf { node, shift, sign }),
        })
        .collect();
    let mut outputs = run_stage(&mut builder, &dec.m2, &leaves, &out_budgets, opts.selection)?;
    for (o, &cs) in outputs.iter_mut().zip(&norm.col_shifts) {
        if let Output::Node { shift, .. } = o {
            *shift += cs;
        }
    }
    Ok(Some(builder.finish(outputs)))
}

/// Full two-stage solve with default options and the given delay constraint.
pub fn solve(m: &Matrix, qints: &[QInterval], depths: &[u32], dc: i32) -> Result<Solution, Error> {
    solve_with(m, qints, depths, &SolveOptions::with_dc(dc))
}

pub fn solve_with(m: &Matrix, qints: &[QInterval], depths: &[u32], opts: &SolveOptions) -> Result<Solution, Error> {
    check_inputs(m, qints, depths)?;
    let start = Instant::now();
    let decomposed = decomposed_graph(m, qints, depths, opts)?;
    let graph = match decomposed {
        None => direct_graph(m, qints, depths, opts)?,
        Some(g) if !opts.compare_direct => g,
        Some(g) => {
            let d = direct_graph(m, qints, depths, opts)?;
            let (sg, sd) = (g.stats(), d.stats());
            if (sd.cost, sd.adders) <= (sg.cost, sg.adders) {
                d
            } else {
                g
            }
        }
    };
    Ok(Solution::new(graph, start.elapsed()))
}

/// Adders used by plain CSD summation without sharing.
pub fn naive_adders(m: &Matrix) -> usize {
    let norm = normalize(m);
    let t = matrix_to_tensor(&norm.normalized);
    (0..t.cols()).map(|c| t.column_len(c).saturating_sub(1)).sum()
}
