//! Interpreter for the Verilog subset the emitter produces, plus a static
//! register-count analysis over its netlist.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

#[derive(Clone, Debug)]
pub enum Expr {
    Ident(String),
    Slice(String, u32, u32),
    Lit(u32, u128),
    Concat(Vec<Expr>),
    Repeat(u32, Box<Expr>),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
}

impl Expr {
    fn idents(&self, out: &mut Vec<String>) {
        match self {
            Expr::Ident(n) | Expr::Slice(n, _, _) => out.push(n.clone()),
            Expr::Lit(..) => {}
            Expr::Concat(v) => v.iter().for_each(|e| e.idents(out)),
            Expr::Repeat(_, e) | Expr::Neg(e) => e.idents(out),
            Expr::Add(a, b) | Expr::Sub(a, b) => {
                a.idents(out);
                b.idents(out);
            }
        }
    }
}

#[derive(Debug, Default)]
pub struct Module {
    pub name: String,
    pub widths: HashMap<String, u32>,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub regs: BTreeSet<String>,
    pub has_clk: bool,
    /// combinational assignments in source order
    pub assigns: Vec<(String, Expr)>,
    /// `lhs <= rhs` inside the clocked block
    pub clocked: Vec<(String, String)>,
}

struct Lexer<'a> {
    s: &'a [u8],
    i: usize,
}

impl<'a> Lexer<'a> {
    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }
    fn peek(&mut self) -> u8 {
        self.ws();
        *self.s.get(self.i).unwrap_or(&0)
    }
    fn eat(&mut self, c: u8) {
        assert_eq!(self.peek() as char, c as char, "at {}", String::from_utf8_lossy(&self.s[self.i..]));
        self.i += 1;
    }
    fn word(&mut self) -> String {
        self.ws();
        let st = self.i;
        while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'_') {
            self.i += 1;
        }
        String::from_utf8(self.s[st..self.i].to_vec()).unwrap()
    }
    fn number(&mut self) -> u32 {
        self.word().parse().expect("decimal number")
    }
}

fn parse_expr(lx: &mut Lexer) -> Expr {
    let mut lhs = parse_unary(lx);
    loop {
        match lx.peek() {
            b'+' => {
                lx.i += 1;
                lhs = Expr::Add(Box::new(lhs), Box::new(parse_unary(lx)));
            }
            b'-' => {
                lx.i += 1;
                lhs = Expr::Sub(Box::new(lhs), Box::new(parse_unary(lx)));
            }
            _ => return lhs,
        }
    }
}

fn parse_unary(lx: &mut Lexer) -> Expr {
    if lx.peek() == b'-' {
        lx.i += 1;
        return Expr::Neg(Box::new(parse_unary(lx)));
    }
    parse_primary(lx)
}

fn parse_primary(lx: &mut Lexer) -> Expr {
    let c = lx.peek();
    if c == b'{' {
        lx.i += 1;
        if lx.peek().is_ascii_digit() {
            let save = lx.i;
            let n = lx.number();
            if lx.peek() == b'{' {
                lx.i += 1;
                let e = parse_expr(lx);
                lx.eat(b'}');
                lx.eat(b'}');
                return Expr::Repeat(n, Box::new(e));
            }
            lx.i = save;
        }
        let mut parts = vec![parse_expr(lx)];
        while lx.peek() == b',' {
            lx.i += 1;
            parts.push(parse_expr(lx));
        }
        lx.eat(b'}');
        return Expr::Concat(parts);
    }
    if c.is_ascii_digit() {
        let w = lx.number();
        lx.eat(b'\'');
        let base = lx.s[lx.i];
        lx.i += 1;
        let digits = lx.word();
        let radix = match base {
            b'd' => 10,
            b'h' => 16,
            b'b' => 2,
            _ => panic!("unsupported base"),
        };
        return Expr::Lit(w, u128::from_str_radix(&digits, radix).unwrap());
    }
    let name = lx.word();
    assert!(!name.is_empty(), "expected an identifier");
    if lx.peek() == b'[' {
        lx.i += 1;
        let h = lx.number();
        let l = if lx.peek() == b':' {
            lx.i += 1;
            lx.number()
        } else {
            h
        };
        lx.eat(b']');
        return Expr::Slice(name, h, l);
    }
    Expr::Ident(name)
}

fn decl_width(rest: &str) -> (u32, &str) {
    let rest = rest.trim();
    if let Some(r) = rest.strip_prefix('[') {
        let (range, tail) = r.split_once(']').unwrap();
        let (h, l) = range.split_once(':').unwrap();
        assert_eq!(l.trim(), "0");
        (h.trim().parse::<u32>().unwrap() + 1, tail.trim())
    } else {
        (1, rest)
    }
}

pub fn parse(text: &str) -> Module {
    let mut m = Module::default();
    let mut in_always = false;
    for raw in text.lines() {
        let line = raw.split("//").next().unwrap().trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("module ") {
            m.name = rest.split_whitespace().next().unwrap().to_string();
        } else if line == "endmodule" {
        } else if line.starts_with("always @(posedge clk) begin") {
            in_always = true;
        } else if in_always && line == "end" {
            in_always = false;
        } else if in_always {
            let (l, r) = line.trim_end_matches(';').split_once("<=").unwrap();
            m.clocked.push((l.trim().to_string(), r.trim().to_string()));
        } else if let Some(rest) = line.strip_prefix("input ") {
            let (w, name) = decl_width(rest);
            let name = name.trim_end_matches(';').to_string();
            if name == "clk" {
                m.has_clk = true;
            } else {
                m.inputs.push(name.clone());
            }
            m.widths.insert(name, w);
        } else if let Some(rest) = line.strip_prefix("output ") {
            let (w, name) = decl_width(rest);
            let name = name.trim_end_matches(';').to_string();
            m.outputs.push(name.clone());
            m.widths.insert(name, w);
        } else if let Some(rest) = line.strip_prefix("reg ") {
            let (w, name) = decl_width(rest);
            let name = name.trim_end_matches(';').to_string();
            m.regs.insert(name.clone());
            m.widths.insert(name, w);
        } else if let Some(rest) = line.strip_prefix("wire ") {
            let (w, tail) = decl_width(rest);
            let tail = tail.trim_end_matches(';');
            match tail.split_once('=') {
                Some((name, e)) => {
                    let name = name.trim().to_string();
                    m.widths.insert(name.clone(), w);
                    let mut lx = Lexer { s: e.as_bytes(), i: 0 };
                    m.assigns.push((name, parse_expr(&mut lx)));
                }
                None => {
                    m.widths.insert(tail.trim().to_string(), w);
                }
            }
        } else if let Some(rest) = line.strip_prefix("assign ") {
            let (l, r) = rest.trim_end_matches(';').split_once('=').unwrap();
            let mut lx = Lexer { s: r.as_bytes(), i: 0 };
            let e = parse_expr(&mut lx);
            lx.ws();
            assert_eq!(lx.i, r.len(), "trailing input in {line}");
            m.assigns.push((l.trim().to_string(), e));
        } else if line.starts_with("module") || line.starts_with(')') {
        } else {
            panic!("unsupported line: {line}");
        }
    }
    m
}

fn mask(w: u32) -> u128 {
    assert!(w <= 127, "width {w} exceeds the simulator");
    (1u128 << w) - 1
}

pub struct Sim<'m> {
    m: &'m Module,
    pub values: HashMap<String, u128>,
}

impl<'m> Sim<'m> {
    pub fn new(m: &'m Module) -> Self {
        let values = m.widths.keys().map(|k| (k.clone(), 0)).collect();
        Self { m, values }
    }

    /// (value, width)
    fn eval(&self, e: &Expr, ctx: u32) -> (u128, u32) {
        match e {
            Expr::Ident(n) => (self.values[n], self.m.widths[n]),
            Expr::Slice(n, h, l) => ((self.values[n] >> l) & mask(h - l + 1), h - l + 1),
            Expr::Lit(w, v) => (v & mask(*w), *w),
            Expr::Concat(parts) => parts.iter().fold((0, 0), |(acc, aw), p| {
                let (v, w) = self.eval(p, 0);
                ((acc << w) | v, aw + w)
            }),
            Expr::Repeat(n, inner) => {
                let (v, w) = self.eval(inner, 0);
                ((0..*n).fold(0, |acc, _| (acc << w) | v), w * n)
            }
            Expr::Neg(inner) => {
                let (v, _) = self.eval(inner, ctx);
                (v.wrapping_neg() & mask(ctx), ctx)
            }
            Expr::Add(a, b) => {
                let (x, _) = self.eval(a, ctx);
                let (y, _) = self.eval(b, ctx);
                (x.wrapping_add(y) & mask(ctx), ctx)
            }
            Expr::Sub(a, b) => {
                let (x, _) = self.eval(a, ctx);
                let (y, _) = self.eval(b, ctx);
                (x.wrapping_sub(y) & mask(ctx), ctx)
            }
        }
    }

    pub fn set_input(&mut self, name: &str, raw: u128) {
        let w = self.m.widths[name];
        self.values.insert(name.to_string(), raw & mask(w));
    }

    pub fn settle(&mut self) {
        // source order is topological for the emitter; repeat to be safe
        for _ in 0..2 {
            for (lhs, e) in &self.m.assigns {
                let w = self.m.widths[lhs];
                let (v, _) = self.eval(e, w);
                self.values.insert(lhs.clone(), v & mask(w));
            }
        }
    }

    pub fn clock(&mut self) {
        let next: Vec<(String, u128)> =
            self.m.clocked.iter().map(|(l, r)| (l.clone(), self.values[r] & mask(self.m.widths[l]))).collect();
        for (l, v) in next {
            self.values.insert(l, v);
        }
        self.settle();
    }

    pub fn get(&self, name: &str) -> u128 {
        self.values[name]
    }
}

/// Register counts over every path from any input port to each output port.
pub fn path_register_counts(m: &Module) -> HashMap<String, BTreeSet<u32>> {
    let mut deps: HashMap<String, Vec<(String, u32)>> = HashMap::new();
    for (lhs, e) in &m.assigns {
        let mut ids = Vec::new();
        e.idents(&mut ids);
        deps.entry(lhs.clone()).or_default().extend(ids.into_iter().map(|i| (i, 0)));
    }
    for (l, r) in &m.clocked {
        deps.entry(l.clone()).or_default().push((r.clone(), 1));
    }
    fn walk(
        n: &str,
        deps: &HashMap<String, Vec<(String, u32)>>,
        inputs: &[String],
        memo: &mut HashMap<String, BTreeSet<u32>>,
    ) -> BTreeSet<u32> {
        if let Some(s) = memo.get(n) {
            return s.clone();
        }
        let mut out = BTreeSet::new();
        if inputs.iter().any(|i| i == n) {
            out.insert(0);
        }
        for (d, w) in deps.get(n).into_iter().flatten() {
            for c in walk(d, deps, inputs, memo) {
                out.insert(c + w);
            }
        }
        memo.insert(n.to_string(), out.clone());
        out
    }
    let mut memo = HashMap::new();
    m.outputs.iter().map(|o| (o.clone(), walk(o, &deps, &m.inputs, &mut memo))).collect()
}

/// Number of `assign` lines computing a two-operand sum or difference.
pub fn adder_expressions(m: &Module) -> usize {
    m.assigns.iter().filter(|(_, e)| matches!(e, Expr::Add(..) | Expr::Sub(..))).count()
}
