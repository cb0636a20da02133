#![allow(dead_code)]

pub mod verilog;

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use shiftadd::codegen::{emit_verilog, VerilogOptions};
use shiftadd::graph::AdderGraph;
use shiftadd::{Dyadic, Matrix, QInterval};

/// 4x4 H.264 forward core transform, oriented so that `y^T = x^T M`
/// computes `H x`.
pub fn h264() -> Matrix {
    Matrix::from_i64(&[[1, 2, 1, 1], [1, 1, -1, -2], [1, -1, -1, 2], [1, -2, 1, -1]])
}

pub fn int_inputs(n: usize, bits: u32) -> Vec<QInterval> {
    let h = (1i64 << (bits - 1)) - 1;
    vec![QInterval::int(-h - 1, h); n]
}

/// Direct `x^T M` over integers, independent of the library's arithmetic.
pub fn matvec_i64(m: &[Vec<i64>], x: &[i64]) -> Vec<i64> {
    let cols = m.first().map_or(0, Vec::len);
    (0..cols).map(|c| m.iter().zip(x).map(|(row, xv)| row[c] * xv).sum()).collect()
}

/// Raw bit pattern of `v` on a `width`-bit port with LSB weight `2^step`.
pub fn to_raw(v: &Dyadic, step: i32, width: u32) -> u128 {
    let raw = v.to_scaled_int(step).expect("on grid");
    let m = BigInt::one() << width as usize;
    (((raw % &m) + &m) % &m).to_u128().unwrap()
}

pub fn from_raw(raw: u128, step: i32, width: u32, signed: bool) -> Dyadic {
    let mut v = BigInt::from(raw);
    if signed && width > 0 && (raw >> (width - 1)) & 1 == 1 {
        v -= BigInt::one() << width as usize;
    }
    if v.is_zero() {
        return Dyadic::zero();
    }
    Dyadic::new(v, step)
}

/// Simulate the emitted module on a stream of inputs, one per clock, and
/// return the outputs observed `latency` cycles later.
pub fn simulate(g: &AdderGraph, pipeline_every: u32, xs: &[Vec<Dyadic>]) -> (Vec<Vec<Dyadic>>, u32) {
    let text = emit_verilog(g, &VerilogOptions { pipeline_every, ..VerilogOptions::default() }).unwrap();
    let module = verilog::parse(&text);
    let counts = verilog::path_register_counts(&module);
    let latency = counts.values().flat_map(|s| s.iter().copied()).max().unwrap_or(0);
    let mut sim = verilog::Sim::new(&module);
    let in_q = g.input_qints();
    let out_q: Vec<QInterval> = g.outputs.iter().map(|o| g.output_qint(o)).collect();
    let mut results = Vec::new();
    let total = xs.len() + latency as usize;
    for t in 0..total {
        if let Some(x) = xs.get(t) {
            for (j, v) in x.iter().enumerate() {
                let name = format!("x{j}");
                let w = module.widths[&name];
                sim.set_input(&name, to_raw(v, in_q[j].step_exp(), w));
            }
        }
        sim.settle();
        if t >= latency as usize {
            let y = out_q
                .iter()
                .enumerate()
                .map(|(i, q)| {
                    let name = format!("y{i}");
                    let w = module.widths[&name];
                    from_raw(sim.get(&name), q.step_exp(), w, q.low().is_negative())
                })
                .collect();
            results.push(y);
        }
        if module.has_clk {
            sim.clock();
        }
    }
    (results, latency)
}
