//! Verilog and JSON emission.
//!
//! Every graph value is a wire holding its raw two's-complement (or unsigned)
//! integer: value `v` with interval step `2^e` is stored as `v / 2^e` in the
//! width of its minimal [`BitWidthSpec`]. An adder aligns both operands to
//! its own step by appending zero bits, sign- or zero-extends them to its own
//! width and adds modulo `2^W`; interval analysis guarantees the true sum
//! fits, so no bits are ever lost.
//!
//! With `pipeline_every = k > 0`, a value produced at adder time `t` (inputs
//! arrive at their declared depth, each adder adds its latency, 1 unless
//! overridden) lives in stage `(t - 1) / k`, counted above the deepest input.
//! Values consumed in a later stage pass through one register per stage
//! boundary, so every input-to-output path sees the same latency.

use std::fmt::Write as _;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive};
use serde_json::{json, Map, Value};

use crate::graph::{AdderGraph, Node, NodeId, NodeKind, Output};
use crate::{BitWidthSpec, Dyadic, Error, QInterval, Sign};

/// Per-node adder latency in levels.
pub type LatencyFn<'a> = &'a dyn Fn(NodeId, &Node) -> u32;

#[derive(Clone, Copy)]
pub struct VerilogOptions<'a> {
    pub module_name: &'a str,
    /// Register boundary every `k` adder levels; 0 for combinational.
    pub pipeline_every: u32,
    pub latency: Option<LatencyFn<'a>>,
}

impl Default for VerilogOptions<'_> {
    fn default() -> Self {
        Self { module_name: "cmvm", pipeline_every: 0, latency: None }
    }
}

/// Stage assignment of a graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub time: Vec<u32>,
    pub stage: Vec<u32>,
    /// Number of stages; outputs are read in stage `stages - 1`.
    pub stages: u32,
    /// Last stage each value is needed in.
    pub needed: Vec<u32>,
}

impl Schedule {
    pub fn latency(&self) -> u32 {
        self.stages.saturating_sub(1)
    }
}

pub fn schedule(g: &AdderGraph, pipeline_every: u32, latency: Option<LatencyFn<'_>>) -> Schedule {
    let mut time: Vec<u32> = Vec::with_capacity(g.nodes.len());
    for (id, n) in g.nodes.iter().enumerate() {
        let t = match n.kind {
            NodeKind::Input(_) => n.depth,
            NodeKind::AddSub { a, b, .. } => time[a].max(time[b]) + latency.map_or(1, |f| f(id, n)),
        };
        time.push(t);
    }
    let base = g.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Input(_))).map(|n| n.depth).max().unwrap_or(0);
    let stage_of = |t: u32| -> u32 {
        if pipeline_every == 0 || t <= base {
            0
        } else {
            (t - base - 1) / pipeline_every
        }
    };
    let stage: Vec<u32> = g
        .nodes
        .iter()
        .zip(&time)
        .map(|(n, &t)| if matches!(n.kind, NodeKind::Input(_)) { 0 } else { stage_of(t) })
        .collect();
    let out_time = g
        .outputs
        .iter()
        .filter_map(|o| match *o {
            Output::Node { node, .. } => Some(time[node]),
            Output::Zero => None,
        })
        .max()
        .unwrap_or(base);
    let last = stage_of(out_time);
    let mut needed = stage.clone();
    for (id, n) in g.nodes.iter().enumerate() {
        if let NodeKind::AddSub { a, b, .. } = n.kind {
            needed[a] = needed[a].max(stage[id]);
            needed[b] = needed[b].max(stage[id]);
        }
    }
    for o in &g.outputs {
        if let Output::Node { node, .. } = *o {
            needed[node] = needed[node].max(last);
        }
    }
    Schedule { time, stage, stages: last + 1, needed }
}

fn spec(q: &QInterval) -> BitWidthSpec {
    q.bitwidth()
}

fn wire_name(id: NodeId, stage: u32, sched: &Schedule) -> String {
    if stage == sched.stage[id] {
        format!("n{id}")
    } else {
        format!("n{id}_p{stage}")
    }
}

/// `src` (width `w`, signedness `signed`) shifted left by `k` and extended
/// or truncated to `target` bits.
fn align(src: &str, w: u32, signed: bool, k: u32, target: u32) -> String {
    if k >= target {
        return format!("{target}'d0");
    }
    let avail = target - k;
    let mut parts = Vec::new();
    if w >= avail {
        parts.push(if w == avail { src.to_string() } else if avail == 1 { format!("{src}[0]") } else { format!("{src}[{}:0]", avail - 1) });
    } else {
        let ext = avail - w;
        let fill = if signed { format!("{src}[{}]", w - 1) } else { "1'b0".to_string() };
        parts.push(format!("{{{ext}{{{fill}}}}}"));
        parts.push(src.to_string());
    }
    if k > 0 {
        parts.push(format!("{k}'d0"));
    }
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        format!("{{{}}}", parts.join(", "))
    }
}

fn fmt_spec(s: &BitWidthSpec) -> String {
    format!("fixed<{},{},{}>", s.signed as u8, s.width, s.int_bits)
}

fn check(g: &AdderGraph) -> Result<(), Error> {
    let findings = g.validate();
    if findings.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidSolution(findings.join("; ")))
    }
}

/// Synthesizable Verilog-2001 module for `g`.
pub fn emit_verilog(g: &AdderGraph, opts: &VerilogOptions<'_>) -> Result<String, Error> {
    check(g)?;
    let sched = schedule(g, opts.pipeline_every, opts.latency);
    let inputs = g.inputs();
    let specs: Vec<BitWidthSpec> = g.nodes.iter().map(|n| spec(&n.qint)).collect();
    let out_specs: Vec<BitWidthSpec> = g.outputs.iter().map(|o| spec(&g.output_qint(o))).collect();
    let stats = g.stats_pipelined(opts.pipeline_every);
    let pipelined = sched.latency() > 0;
    let last = sched.stages - 1;

    let mut s = String::new();
    let _ = writeln!(s, "// adders: {}, depth: {}, cost: {}", stats.adders, stats.depth, stats.cost);
    let _ = writeln!(s, "// latency: {} cycles, register bits: {}", sched.latency(), stats.registers);
    for (j, &id) in inputs.iter().enumerate() {
        let _ = writeln!(s, "// x{j}: {}", fmt_spec(&specs[id]));
    }
    for (i, sp) in out_specs.iter().enumerate() {
        let _ = writeln!(s, "// y{i}: {}", fmt_spec(sp));
    }
    let mut ports: Vec<String> = Vec::new();
    if pipelined {
        ports.push("clk".into());
    }
    ports.extend((0..inputs.len()).map(|j| format!("x{j}")));
    ports.extend((0..g.outputs.len()).map(|i| format!("y{i}")));
    let _ = writeln!(s, "module {} ({});", opts.module_name, ports.join(", "));
    if pipelined {
        let _ = writeln!(s, "  input clk;");
    }
    for (j, &id) in inputs.iter().enumerate() {
        let _ = writeln!(s, "  input [{}:0] x{j};", specs[id].width - 1);
    }
    for (i, sp) in out_specs.iter().enumerate() {
        let _ = writeln!(s, "  output [{}:0] y{i};", sp.width - 1);
    }
    for (id, n) in g.nodes.iter().enumerate() {
        let w = specs[id].width;
        match n.kind {
            NodeKind::Input(j) => {
                let _ = writeln!(s, "  wire [{}:0] n{id} = x{j};", w - 1);
            }
            NodeKind::AddSub { .. } => {
                let _ = writeln!(s, "  wire [{}:0] n{id};", w - 1);
            }
        }
        for st in sched.stage[id] + 1..=sched.needed[id] {
            let _ = writeln!(s, "  reg [{}:0] {};", w - 1, wire_name(id, st, &sched));
        }
    }
    for (id, n) in g.nodes.iter().enumerate() {
        let NodeKind::AddSub { a, b, sign, shift } = n.kind else { continue };
        let st = sched.stage[id];
        let step = n.qint.step_exp();
        let w = specs[id].width;
        let ka = (g.nodes[a].qint.step_exp() - step) as u32;
        let kb = (g.nodes[b].qint.step_exp() + shift - step) as u32;
        let ea = align(&wire_name(a, st, &sched), specs[a].width, specs[a].signed, ka, w);
        let eb = align(&wire_name(b, st, &sched), specs[b].width, specs[b].signed, kb, w);
        let op = if sign == Sign::Pos { '+' } else { '-' };
        let _ = writeln!(s, "  assign n{id} = {ea} {op} {eb};");
    }
    for (i, o) in g.outputs.iter().enumerate() {
        let w = out_specs[i].width;
        match *o {
            Output::Zero => {
                let _ = writeln!(s, "  assign y{i} = {w}'d0;");
            }
            Output::Node { node, sign, .. } => {
                let e = align(&wire_name(node, last, &sched), specs[node].width, specs[node].signed, 0, w);
                let neg = if sign == Sign::Neg { "-" } else { "" };
                let _ = writeln!(s, "  assign y{i} = {neg}{e};");
            }
        }
    }
    if pipelined {
        let _ = writeln!(s, "  always @(posedge clk) begin");
        for id in 0..g.nodes.len() {
            for st in sched.stage[id] + 1..=sched.needed[id] {
                let _ = writeln!(s, "    {} <= {};", wire_name(id, st, &sched), wire_name(id, st - 1, &sched));
            }
        }
        let _ = writeln!(s, "  end");
    }
    let _ = writeln!(s, "endmodule");
    Ok(s)
}

/// Raw stored integer of `v` in `spec`, as an unsigned `width`-bit pattern.
fn raw_bits(v: &Dyadic, q: &QInterval, sp: &BitWidthSpec) -> BigInt {
    let raw = v.to_scaled_int(q.step_exp()).expect("value on grid");
    let modulus = BigInt::one() << sp.width as usize;
    ((raw % &modulus) + &modulus) % &modulus
}

/// Self-checking testbench applying `vectors` (input, expected output) to
/// the module emitted with the same options.
pub fn emit_testbench(g: &AdderGraph, opts: &VerilogOptions<'_>, vectors: &[(Vec<Dyadic>, Vec<Dyadic>)]) -> Result<String, Error> {
    check(g)?;
    let sched = schedule(g, opts.pipeline_every, opts.latency);
    let pipelined = sched.latency() > 0;
    let inputs = g.inputs();
    let in_q: Vec<QInterval> = inputs.iter().map(|&id| g.nodes[id].qint.clone()).collect();
    let out_q: Vec<QInterval> = g.outputs.iter().map(|o| g.output_qint(o)).collect();
    let in_s: Vec<BitWidthSpec> = in_q.iter().map(spec).collect();
    let out_s: Vec<BitWidthSpec> = out_q.iter().map(spec).collect();

    let mut s = String::new();
    let _ = writeln!(s, "`timescale 1ns/1ps");
    let _ = writeln!(s, "module {}_tb;", opts.module_name);
    if pipelined {
        let _ = writeln!(s, "  reg clk = 0;");
        let _ = writeln!(s, "  always #5 clk = ~clk;");
    }
    for (j, sp) in in_s.iter().enumerate() {
        let _ = writeln!(s, "  reg [{}:0] x{j};", sp.width - 1);
    }
    for (i, sp) in out_s.iter().enumerate() {
        let _ = writeln!(s, "  wire [{}:0] y{i};", sp.width - 1);
    }
    let _ = writeln!(s, "  integer errors = 0;");
    let mut ports: Vec<String> = Vec::new();
    if pipelined {
        ports.push(".clk(clk)".into());
    }
    ports.extend((0..inputs.len()).map(|j| format!(".x{j}(x{j})")));
    ports.extend((0..g.outputs.len()).map(|i| format!(".y{i}(y{i})")));
    let _ = writeln!(s, "  {} dut ({});", opts.module_name, ports.join(", "));
    let _ = writeln!(s, "  initial begin");
    for (t, (x, y)) in vectors.iter().enumerate() {
        if x.len() != in_q.len() || y.len() != out_q.len() {
            return Err(Error::Dimension(format!("vector {t} has the wrong length")));
        }
        for (j, v) in x.iter().enumerate() {
            if !in_q[j].contains(v) {
                return Err(Error::Domain { index: j, value: v.to_string(), interval: in_q[j].to_string() });
            }
            let _ = writeln!(s, "    x{j} = {}'h{:x};", in_s[j].width, raw_bits(v, &in_q[j], &in_s[j]));
        }
        if pipelined {
            let _ = writeln!(s, "    repeat ({}) @(posedge clk);", sched.latency());
            let _ = writeln!(s, "    #1;");
        } else {
            let _ = writeln!(s, "    #1;");
        }
        for (i, v) in y.iter().enumerate() {
            let w = out_s[i].width;
            let bits = if out_q[i].contains(v) { raw_bits(v, &out_q[i], &out_s[i]) } else { BigInt::from(-1) };
            let _ = writeln!(
                s,
                "    if (y{i} !== {w}'h{bits:x}) begin errors = errors + 1; $display(\"vector {t} y{i}: got %h\", y{i}); end"
            );
        }
    }
    let _ = writeln!(s, "    if (errors == 0) $display(\"PASS\"); else $display(\"FAIL: %0d errors\", errors);");
    let _ = writeln!(s, "    $finish;");
    let _ = writeln!(s, "  end");
    let _ = writeln!(s, "endmodule");
    Ok(s)
}

fn int_value(v: &BigInt) -> Value {
    match v.to_i64() {
        Some(i) => json!(i),
        None => json!(v.to_string()),
    }
}

fn qint_json(q: &QInterval) -> Value {
    json!({
        "low_mantissa": int_value(q.low().mantissa()),
        "low_exp": q.low().exp(),
        "high_mantissa": int_value(q.high().mantissa()),
        "high_exp": q.high().exp(),
        "step_exp": q.step_exp(),
    })
}

fn sign_json(s: Sign) -> Value {
    json!(s.as_i32())
}

pub fn graph_to_json(g: &AdderGraph) -> Value {
    let stats = g.stats();
    let inputs: Vec<Value> = g
        .inputs()
        .into_iter()
        .map(|id| {
            let n = &g.nodes[id];
            let NodeKind::Input(index) = n.kind else { unreachable!() };
            json!({ "index": index, "node": id, "qint": qint_json(&n.qint), "depth": n.depth })
        })
        .collect();
    let nodes: Vec<Value> = g
        .nodes
        .iter()
        .enumerate()
        .map(|(id, n)| {
            let mut m = Map::new();
            m.insert("id".into(), json!(id));
            match n.kind {
                NodeKind::Input(index) => {
                    m.insert("kind".into(), json!("input"));
                    m.insert("index".into(), json!(index));
                }
                NodeKind::AddSub { a, b, sign, shift } => {
                    m.insert("kind".into(), json!("addsub"));
                    m.insert("a".into(), json!(a));
                    m.insert("b".into(), json!(b));
                    m.insert("sign".into(), sign_json(sign));
                    m.insert("shift".into(), json!(shift));
                }
            }
            m.insert("qint".into(), qint_json(&n.qint));
            m.insert("depth".into(), json!(n.depth));
            m.insert("cost".into(), json!(n.cost));
            Value::Object(m)
        })
        .collect();
    let outputs: Vec<Value> = g
        .outputs
        .iter()
        .map(|o| match *o {
            Output::Zero => json!({ "node": null, "shift": 0, "sign": 1 }),
            Output::Node { node, shift, sign } => json!({ "node": node, "shift": shift, "sign": sign_json(sign) }),
        })
        .collect();
    json!({
        "inputs": inputs,
        "nodes": nodes,
        "outputs": outputs,
        "stats": { "adders": stats.adders, "depth": stats.depth, "cost": stats.cost },
    })
}

pub fn emit_json(g: &AdderGraph) -> String {
    let mut s = serde_json::to_string_pretty(&graph_to_json(g)).expect("json values serialize");
    s.push('\n');
    s
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Parse(msg.into())
}

fn field<'v>(v: &'v Value, key: &str) -> Result<&'v Value, Error> {
    v.get(key).ok_or_else(|| bad(format!("missing field `{key}`")))
}

fn get_i64(v: &Value, key: &str) -> Result<i64, Error> {
    field(v, key)?.as_i64().ok_or_else(|| bad(format!("field `{key}` is not an integer")))
}

fn get_usize(v: &Value, key: &str) -> Result<usize, Error> {
    usize::try_from(get_i64(v, key)?).map_err(|_| bad(format!("field `{key}` is negative")))
}

fn get_i32(v: &Value, key: &str) -> Result<i32, Error> {
    i32::try_from(get_i64(v, key)?).map_err(|_| bad(format!("field `{key}` is out of range")))
}

fn get_big(v: &Value, key: &str) -> Result<BigInt, Error> {
    match field(v, key)? {
        Value::Number(n) => n.as_i64().map(BigInt::from).ok_or_else(|| bad(format!("field `{key}` is not an integer"))),
        Value::String(s) => s.parse().map_err(|_| bad(format!("field `{key}` is not an integer"))),
        _ => Err(bad(format!("field `{key}` is not an integer"))),
    }
}

fn get_sign(v: &Value, key: &str) -> Result<Sign, Error> {
    Sign::from_i32(get_i32(v, key)?).ok_or_else(|| bad(format!("field `{key}` must be 1 or -1")))
}

fn parse_qint(v: &Value) -> Result<QInterval, Error> {
    let low = Dyadic::new(get_big(v, "low_mantissa")?, get_i32(v, "low_exp")?);
    let high = Dyadic::new(get_big(v, "high_mantissa")?, get_i32(v, "high_exp")?);
    QInterval::new(low, high, get_i32(v, "step_exp")?)
}

fn array<'v>(v: &'v Value, key: &str) -> Result<&'v Vec<Value>, Error> {
    field(v, key)?.as_array().ok_or_else(|| bad(format!("field `{key}` is not an array")))
}

/// Parse a graph written by [`emit_json`]. Structural problems are reported
/// as [`Error::InvalidSolution`].
pub fn parse_json(text: &str) -> Result<AdderGraph, Error> {
    let root: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let mut nodes = Vec::new();
    for (pos, n) in array(&root, "nodes")?.iter().enumerate() {
        if get_usize(n, "id")? != pos {
            return Err(bad(format!("node {pos} has id {}", n["id"])));
        }
        let kind = match field(n, "kind")?.as_str() {
            Some("input") => NodeKind::Input(get_usize(n, "index")?),
            Some("addsub") => NodeKind::AddSub {
                a: get_usize(n, "a")?,
                b: get_usize(n, "b")?,
                sign: get_sign(n, "sign")?,
                shift: get_i32(n, "shift")?,
            },
            _ => return Err(bad(format!("node {pos} has an unknown kind"))),
        };
        let depth = u32::try_from(get_i64(n, "depth")?).map_err(|_| bad("negative depth"))?;
        let cost = u32::try_from(get_i64(n, "cost")?).map_err(|_| bad("negative cost"))?;
        nodes.push(Node { kind, qint: parse_qint(field(n, "qint")?)?, depth, cost });
    }
    let mut outputs = Vec::new();
    for o in array(&root, "outputs")? {
        outputs.push(match field(o, "node")? {
            Value::Null => Output::Zero,
            _ => Output::Node { node: get_usize(o, "node")?, shift: get_i32(o, "shift")?, sign: get_sign(o, "sign")? },
        });
    }
    let g = AdderGraph { nodes, outputs };
    let mut indices: Vec<usize> = g
        .nodes
        .iter()
        .filter_map(|n| match n.kind {
            NodeKind::Input(i) => Some(i),
            _ => None,
        })
        .collect();
    indices.sort_unstable();
    if indices.iter().enumerate().any(|(k, &i)| k != i) {
        return Err(Error::InvalidSolution("input indices are not 0..n".into()));
    }
    check(&g)?;
    Ok(g)
}
