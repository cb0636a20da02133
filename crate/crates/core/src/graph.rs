//! Adder-graph intermediate representation.
//!
//! Nodes are stored in topological order: inputs and `a + sign * (b << shift)`
//! add/sub nodes. Output-level shifts and negations live on the [`Output`]
//! records rather than as extra nodes.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::ToPrimitive;

use crate::fxp::{adder_cost, negation_cost, qint_add};
use crate::{Dyadic, Error, QInterval, Sign};

pub type NodeId = usize;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum NodeKind {
    Input(usize),
    AddSub { a: NodeId, b: NodeId, sign: Sign, shift: i32 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub qint: QInterval,
    pub depth: u32,
    pub cost: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Output {
    Zero,
    Node { node: NodeId, shift: i32, sign: Sign },
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdderGraph {
    pub nodes: Vec<Node>,
    pub outputs: Vec<Output>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct GraphStats {
    pub adders: usize,
    /// Maximal output depth above the deepest input.
    pub depth: u32,
    /// Sum of adder costs plus output negations.
    pub cost: u64,
    /// Register bits needed when pipelining; 0 for combinational.
    pub registers: u64,
}

impl AdderGraph {
    pub fn input_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Input(_))).count()
    }

    /// Input nodes ordered by input index.
    pub fn inputs(&self) -> Vec<NodeId> {
        let mut v: Vec<(usize, NodeId)> = self
            .nodes
            .iter()
            .enumerate()
            .filter_map(|(id, n)| match n.kind {
                NodeKind::Input(i) => Some((i, id)),
                _ => None,
            })
            .collect();
        v.sort();
        v.into_iter().map(|(_, id)| id).collect()
    }

    pub fn input_qints(&self) -> Vec<QInterval> {
        self.inputs().into_iter().map(|id| self.nodes[id].qint.clone()).collect()
    }

    pub fn adder_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::AddSub { .. })).count()
    }

    /// Interval of an output signal.
    pub fn output_qint(&self, out: &Output) -> QInterval {
        match *out {
            Output::Zero => QInterval::zero(0),
            Output::Node { node, shift, sign } => self.nodes[node].qint.shl(shift).signed(sign),
        }
    }

    pub fn output_depth(&self, out: &Output) -> u32 {
        match *out {
            Output::Zero => 0,
            Output::Node { node, .. } => self.nodes[node].depth,
        }
    }

    fn max_input_depth(&self) -> u32 {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Input(_))).map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn stats(&self) -> GraphStats {
        self.stats_pipelined(0)
    }

    /// Statistics with the register estimate for registers every
    /// `pipeline_every` adder levels.
    pub fn stats_pipelined(&self, pipeline_every: u32) -> GraphStats {
        let adders = self.adder_count();
        let base = self.max_input_depth();
        let depth = self.outputs.iter().map(|o| self.output_depth(o)).max().unwrap_or(base).saturating_sub(base);
        let mut cost: u64 = self.nodes.iter().map(|n| n.cost as u64).sum();
        for o in &self.outputs {
            if let Output::Node { node, sign: Sign::Neg, .. } = *o {
                cost += negation_cost(&self.nodes[node].qint) as u64;
            }
        }
        let registers = if pipeline_every == 0 { 0 } else { self.register_bits(pipeline_every) };
        GraphStats { adders, depth, cost, registers }
    }

    /// Sum of widths of values crossing each register boundary.
    fn register_bits(&self, every: u32) -> u64 {
        let base = self.max_input_depth();
        let stage = |d: u32| -> u32 {
            let rel = d.saturating_sub(base);
            if rel == 0 {
                0
            } else {
                (rel - 1) / every
            }
        };
        let max_depth = self.outputs.iter().map(|o| self.output_depth(o)).max().unwrap_or(base);
        let last = stage(max_depth);
        let mut needed = vec![0u32; self.nodes.len()];
        for n in &self.nodes {
            if let NodeKind::AddSub { a, b, .. } = n.kind {
                let s = stage(n.depth);
                needed[a] = needed[a].max(s);
                needed[b] = needed[b].max(s);
            }
        }
        for o in &self.outputs {
            if let Output::Node { node, .. } = *o {
                needed[node] = needed[node].max(last);
            }
        }
        self.nodes
            .iter()
            .enumerate()
            .map(|(id, n)| {
                let produced = match n.kind {
                    NodeKind::Input(_) => 0,
                    NodeKind::AddSub { .. } => stage(n.depth),
                };
                needed[id].saturating_sub(produced) as u64 * n.qint.bitwidth().width as u64
            })
            .sum()
    }

    /// Exact evaluation of every output for input vector `x`.
    pub fn evaluate(&self, x: &[Dyadic]) -> Result<Vec<Dyadic>, Error> {
        let values = self.evaluate_nodes(x)?;
        Ok(self.outputs.iter().map(|o| output_value(o, &values)).collect())
    }

    /// Exact value of every node for input vector `x`.
    pub fn evaluate_nodes(&self, x: &[Dyadic]) -> Result<Vec<Dyadic>, Error> {
        let inputs = self.input_count();
        if x.len() != inputs {
            return Err(Error::Dimension(format!("expected {inputs} inputs, got {}", x.len())));
        }
        let mut values: Vec<Dyadic> = Vec::with_capacity(self.nodes.len());
        for n in &self.nodes {
            let v = match n.kind {
                NodeKind::Input(i) => {
                    if !n.qint.contains(&x[i]) {
                        return Err(Error::Domain { index: i, value: x[i].to_string(), interval: n.qint.to_string() });
                    }
                    x[i].clone()
                }
                NodeKind::AddSub { a, b, sign, shift } => &values[a] + &sign.apply(&values[b].shl(shift)),
            };
            values.push(v);
        }
        Ok(values)
    }

    /// Structural findings; empty for a well-formed graph.
    pub fn validate(&self) -> Vec<String> {
        let mut findings = Vec::new();
        let mut used = vec![false; self.nodes.len()];
        for (id, n) in self.nodes.iter().enumerate() {
            match n.kind {
                NodeKind::Input(_) => {
                    if n.cost != 0 {
                        findings.push(format!("cost-mismatch: input node {id}"));
                    }
                }
                NodeKind::AddSub { a, b, sign, shift } => {
                    if a >= id || b >= id {
                        findings.push(format!("operand-after-use: node {id}"));
                        continue;
                    }
                    used[a] = true;
                    used[b] = true;
                    let (qa, qb) = (&self.nodes[a].qint, &self.nodes[b].qint);
                    if qint_add(qa, qb, sign, shift) != n.qint {
                        findings.push(format!("qint-mismatch: node {id}"));
                    }
                    if n.depth != self.nodes[a].depth.max(self.nodes[b].depth) + 1 {
                        findings.push(format!("depth-mismatch: node {id}"));
                    }
                    if n.cost != adder_cost(qa, qb, sign, shift) {
                        findings.push(format!("cost-mismatch: node {id}"));
                    }
                }
            }
        }
        for o in &self.outputs {
            if let Output::Node { node, .. } = *o {
                if node >= self.nodes.len() {
                    findings.push(format!("dangling-output: node {node}"));
                } else {
                    used[node] = true;
                }
            }
        }
        for (id, n) in self.nodes.iter().enumerate() {
            if matches!(n.kind, NodeKind::AddSub { .. }) && !used[id] {
                findings.push(format!("dead-node: node {id}"));
            }
        }
        findings
    }

    pub fn compile(&self) -> Evaluator<'_> {
        Evaluator::new(self)
    }
}

fn output_value(o: &Output, values: &[Dyadic]) -> Dyadic {
    match *o {
        Output::Zero => Dyadic::zero(),
        Output::Node { node, shift, sign } => sign.apply(&values[node].shl(shift)),
    }
}

/// Integer-lane evaluator: every node value is held as an `i128` multiple of
/// a common power of two, falling back to exact big arithmetic on overflow.
pub struct Evaluator<'g> {
    graph: &'g AdderGraph,
    base_exp: i32,
    /// per node: (low, high) as scaled integers, when they fit
    bounds: Vec<Option<(i128, i128)>>,
    /// `input index -> node id`
    input_nodes: Vec<NodeId>,
}

impl<'g> Evaluator<'g> {
    fn new(graph: &'g AdderGraph) -> Self {
        let base_exp = graph.nodes.iter().map(|n| n.qint.step_exp()).min().unwrap_or(0);
        let scale = |d: &Dyadic| d.to_scaled_int(base_exp).and_then(|v| v.to_i128());
        let bounds = graph.nodes.iter().map(|n| Some((scale(n.qint.low())?, scale(n.qint.high())?))).collect();
        Self { graph, base_exp, bounds, input_nodes: graph.inputs() }
    }

    pub fn base_exp(&self) -> i32 {
        self.base_exp
    }

    /// Scaled node values (`value = v * 2^base_exp`), or `None` when a value
    /// overflows the integer lane.
    fn run_lane(&self, x: &[Dyadic], out: &mut Vec<i128>) -> Result<Option<()>, Error> {
        out.clear();
        let g = self.graph;
        for n in &g.nodes {
            let v = match n.kind {
                NodeKind::Input(i) => {
                    if !n.qint.contains(&x[i]) {
                        return Err(Error::Domain { index: i, value: x[i].to_string(), interval: n.qint.to_string() });
                    }
                    match x[i].to_scaled_int(self.base_exp).and_then(|v| v.to_i128()) {
                        Some(v) => v,
                        None => return Ok(None),
                    }
                }
                NodeKind::AddSub { a, b, sign, shift } => {
                    let vb = out[b];
                    let shifted = if shift >= 0 {
                        if shift >= 127 || vb.unsigned_abs().leading_zeros() <= shift as u32 + 1 {
                            if vb != 0 {
                                return Ok(None);
                            }
                            0
                        } else {
                            vb << shift
                        }
                    } else {
                        vb >> (-shift).min(127)
                    };
                    let r = match sign {
                        Sign::Pos => out[a].checked_add(shifted),
                        Sign::Neg => out[a].checked_sub(shifted),
                    };
                    match r {
                        Some(r) => r,
                        None => return Ok(None),
                    }
                }
            };
            out.push(v);
        }
        Ok(Some(()))
    }

    /// Evaluate outputs, also reporting nodes whose runtime value left their
    /// declared interval.
    pub fn evaluate(&self, x: &[Dyadic], scratch: &mut Vec<i128>) -> Result<Evaluation, Error> {
        let g = self.graph;
        if x.len() != self.input_nodes.len() {
            return Err(Error::Dimension(format!("expected {} inputs, got {}", self.input_nodes.len(), x.len())));
        }
        if self.run_lane(x, scratch)?.is_some() {
            let mut out_of_range = Vec::new();
            for (id, &v) in scratch.iter().enumerate() {
                if let Some((lo, hi)) = self.bounds[id] {
                    if v < lo || v > hi {
                        out_of_range.push(id);
                    }
                }
            }
            let outputs = g
                .outputs
                .iter()
                .map(|o| match *o {
                    Output::Zero => Dyadic::zero(),
                    Output::Node { node, shift, sign } => {
                        sign.apply(&Dyadic::new(BigInt::from(scratch[node]), self.base_exp + shift))
                    }
                })
                .collect();
            return Ok(Evaluation { outputs, node_values: None, out_of_range });
        }
        let values = g.evaluate_nodes(x)?;
        let out_of_range = values.iter().enumerate().filter(|(id, v)| !g.nodes[*id].qint.contains(v)).map(|(id, _)| id).collect();
        let outputs = g.outputs.iter().map(|o| output_value(o, &values)).collect();
        Ok(Evaluation { outputs, node_values: Some(values), out_of_range })
    }
}

pub struct Evaluation {
    pub outputs: Vec<Dyadic>,
    /// Exact node values when the big-integer path was taken.
    pub node_values: Option<Vec<Dyadic>>,
    pub out_of_range: Vec<NodeId>,
}

/// Appends nodes to a graph, sharing structurally identical adders.
#[derive(Clone, Debug, Default)]
pub struct GraphBuilder {
    nodes: Vec<Node>,
    dedup: HashMap<NodeKind, NodeId>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_input(&mut self, index: usize, qint: QInterval, depth: u32) -> NodeId {
        let kind = NodeKind::Input(index);
        if let Some(&id) = self.dedup.get(&kind) {
            return id;
        }
        self.push(Node { kind, qint, depth, cost: 0 })
    }

    pub fn add_sub(&mut self, a: NodeId, b: NodeId, sign: Sign, shift: i32) -> NodeId {
        let kind = NodeKind::AddSub { a, b, sign, shift };
        if let Some(&id) = self.dedup.get(&kind) {
            return id;
        }
        let (qa, qb) = (&self.nodes[a].qint, &self.nodes[b].qint);
        let qint = qint_add(qa, qb, sign, shift);
        let cost = adder_cost(qa, qb, sign, shift);
        let depth = self.nodes[a].depth.max(self.nodes[b].depth) + 1;
        self.push(Node { kind, qint, depth, cost })
    }

    fn push(&mut self, node: Node) -> NodeId {
        let id = self.nodes.len();
        self.dedup.insert(node.kind.clone(), id);
        self.nodes.push(node);
        id
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Finish the graph, dropping add/sub nodes no output depends on and
    /// renumbering the rest.
    pub fn finish(self, outputs: Vec<Output>) -> AdderGraph {
        let n = self.nodes.len();
        let mut live = vec![false; n];
        for o in &outputs {
            if let Output::Node { node, .. } = *o {
                live[node] = true;
            }
        }
        for id in (0..n).rev() {
            match self.nodes[id].kind {
                NodeKind::Input(_) => live[id] = true,
                NodeKind::AddSub { a, b, .. } if live[id] => {
                    live[a] = true;
                    live[b] = true;
                }
                _ => {}
            }
        }
        let mut remap = vec![usize::MAX; n];
        let mut nodes = Vec::new();
        for (id, mut node) in self.nodes.into_iter().enumerate() {
            if !live[id] {
                continue;
            }
            if let NodeKind::AddSub { a, b, .. } = &mut node.kind {
                *a = remap[*a];
                *b = remap[*b];
            }
            remap[id] = nodes.len();
            nodes.push(node);
        }
        let outputs = outputs
            .into_iter()
            .map(|o| match o {
                Output::Node { node, shift, sign } => Output::Node { node: remap[node], shift, sign },
                Output::Zero => Output::Zero,
            })
            .collect();
        AdderGraph { nodes, outputs }
    }
}

/// Cardinality helper shared by verification and CLI reporting.
pub fn input_space_size(qints: &[QInterval]) -> BigInt {
    qints.iter().fold(BigInt::from(1), |acc, q| acc * q.cardinality())
}
