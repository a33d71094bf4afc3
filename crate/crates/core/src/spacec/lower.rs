//! Lowering of typed mini-Space to Earth items, one instance per call site.
//!
//! Every block of code is entered by activating its first register and
//! leaves by activating a `next` label with a final `jmp next 0`. Latencies
//! count cycles from entry activation to `next` activation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::rc::Rc;

use crate::earth::{ItemKind, Operand};
use crate::interstring::{Interstring, Symbol};
use crate::machine::{Geometry, Opcode};

use super::typecheck::{Builtin, BuiltinOp, Callee, TStmt, TypedProgram, VarKind};
use super::{AllocError, SpaceError};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Latency {
    Static(u64),
    Dynamic,
}

impl Latency {
    fn plus(self, other: Latency) -> Latency {
        match (self, other) {
            (Latency::Static(a), Latency::Static(b)) => Latency::Static(a + b),
            _ => Latency::Dynamic,
        }
    }

    pub fn cycles(self) -> Option<u64> {
        match self {
            Latency::Static(n) => Some(n),
            Latency::Dynamic => None,
        }
    }
}

impl fmt::Display for Latency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Latency::Static(n) => write!(f, "{n}"),
            Latency::Dynamic => f.write_str("dynamic"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum JoinStrategy {
    /// Shorter branches are padded so that all finish in the same cycle.
    CycleBalanced,
    /// Branches raise completion flags that a poller thread waits on.
    FlagPolled,
}

impl fmt::Display for JoinStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            JoinStrategy::CycleBalanced => "CycleBalanced",
            JoinStrategy::FlagPolled => "FlagPolled",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StmtSchedule {
    pub instance: String,
    pub line: usize,
    pub what: String,
    pub latency: Latency,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JoinSchedule {
    pub instance: String,
    pub line: usize,
    pub what: String,
    pub strategy: JoinStrategy,
    pub branches: usize,
}

#[derive(Clone, Debug)]
pub(crate) struct DataReg {
    pub label: String,
    /// Source-level name, for values the allocation map reports.
    pub value: Option<String>,
}

#[derive(Clone, Debug)]
pub(crate) struct Instance {
    pub path: String,
    pub callee: String,
    pub parent: Option<usize>,
    pub code: Vec<ItemKind>,
    pub code_len: usize,
    pub data: Vec<DataReg>,
    pub entry: String,
    pub latency: Latency,
}

impl Instance {
    pub fn size(&self) -> usize {
        self.code_len + self.data.len()
    }
}

/// One `par` whose branches must write disjoint registers.
#[derive(Clone, Debug)]
pub(crate) struct ParSpan {
    pub owner: usize,
    pub line: usize,
    pub branches: Vec<BranchSpan>,
}

#[derive(Clone, Debug)]
pub(crate) struct BranchSpan {
    /// Code offsets `[start, end)` within the owner's code.
    pub code: (usize, usize),
    /// Instance indices `[start, end)` created for this branch.
    pub children: (usize, usize),
}

#[derive(Clone, Debug)]
pub(crate) struct Lowered {
    pub top: String,
    pub io: Vec<DataReg>,
    pub inputs: Vec<(String, u32, String)>,
    pub outputs: Vec<(String, u32, String)>,
    pub instances: Vec<Instance>,
    pub statements: Vec<StmtSchedule>,
    pub joins: Vec<JoinSchedule>,
    pub pars: Vec<ParSpan>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
struct Bit {
    reg: String,
    bit: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Src {
    Bit(Bit),
    Const(bool),
}

type TableFn = Rc<dyn Fn(u64) -> u64>;

enum Task<'a> {
    /// Computes `outputs` from `inputs` with a decision tree, then performs
    /// the `post` writes.
    Table {
        inputs: Vec<Src>,
        outputs: Vec<Bit>,
        f: TableFn,
        post: Vec<Bit>,
    },
    Adder {
        a: Vec<Src>,
        b: Vec<Src>,
        dst: Vec<Bit>,
        carry: String,
    },
    Stmt(&'a TStmt),
}

struct TaskOut {
    entry: String,
    latency: Latency,
    /// Completion flag of a call task, raised by its tail.
    done: Option<Bit>,
}

/// Register binding of a name visible in an instance.
#[derive(Clone, Debug)]
struct Slot {
    reg: String,
    width: u32,
}

type Scope = BTreeMap<String, Slot>;

struct Block {
    index: usize,
    path: String,
    items: Vec<ItemKind>,
    len: usize,
    labels: usize,
    temps: usize,
    calls: usize,
    data: Vec<DataReg>,
}

impl Block {
    fn new(index: usize, path: String) -> Self {
        Block {
            index,
            path,
            items: Vec::new(),
            len: 0,
            labels: 0,
            temps: 0,
            calls: 0,
            data: Vec::new(),
        }
    }

    fn label(&mut self) -> String {
        self.labels += 1;
        format!("{}/.L{}", self.path, self.labels)
    }

    fn place(&mut self, label: &str) {
        self.items.push(ItemKind::Label(label.to_string()));
    }

    fn instr(&mut self, opcode: Opcode, a: Operand, b: Operand) {
        self.items.push(ItemKind::Instr { opcode, a, b });
        self.len += 1;
    }

    fn write(&mut self, bit: &Bit, value: bool) {
        let op = if value { Opcode::Wr1 } else { Opcode::Wr0 };
        self.instr(op, Operand::sym(&bit.reg), Operand::Int(bit.bit as u64));
    }

    fn cnd(&mut self, bit: &Bit) {
        self.instr(Opcode::Cnd, Operand::sym(&bit.reg), Operand::Int(bit.bit as u64));
    }

    fn jmp(&mut self, label: &str, offset: u64) {
        self.instr(Opcode::Jmp, Operand::sym(label), Operand::Int(offset));
    }

    fn goto(&mut self, label: &str) {
        self.jmp(label, 0);
    }

    fn halt(&mut self) {
        self.instr(Opcode::Jmp, Operand::Int(0), Operand::Int(0));
    }

    fn patch_goto(&mut self, at: usize, label: &str, offset: u64) {
        self.items[at] = ItemKind::Instr {
            opcode: Opcode::Jmp,
            a: Operand::sym(label),
            b: Operand::Int(offset),
        };
    }

    /// `n` forward-stepping no-ops.
    fn pad(&mut self, n: u64) {
        for _ in 0..n {
            let l = self.label();
            self.goto(&l);
            self.place(&l);
        }
    }

    fn data(&mut self, name: &str, value: Option<String>) -> String {
        let label = format!("{}/{}", self.path, name);
        self.data.push(DataReg {
            label: label.clone(),
            value,
        });
        label
    }

    fn temp(&mut self, kind: &str) -> String {
        self.temps += 1;
        let name = format!(".{kind}{}", self.temps);
        self.data(&name, None)
    }
}

fn bits(reg: &str, width: u32) -> Vec<Bit> {
    (0..width)
        .map(|bit| Bit {
            reg: reg.to_string(),
            bit,
        })
        .collect()
}

fn src_bits(reg: &str, width: u32) -> Vec<Src> {
    bits(reg, width).into_iter().map(Src::Bit).collect()
}

fn const_bits(v: u64, width: u32) -> Vec<Src> {
    (0..width).map(|i| Src::Const(v >> i & 1 == 1)).collect()
}

fn op_fn(op: BuiltinOp) -> TableFn {
    match op {
        BuiltinOp::Not => Rc::new(|x| !x & 1),
        BuiltinOp::Mov => Rc::new(|x| x & 1),
        BuiltinOp::And => Rc::new(|x| (x & (x >> 1)) & 1),
        BuiltinOp::Or => Rc::new(|x| (x | (x >> 1)) & 1),
        BuiltinOp::Xor => Rc::new(|x| (x ^ (x >> 1)) & 1),
        BuiltinOp::Add => unreachable!("add lowers to a ripple chain"),
    }
}

/// Per-bit tasks for a bitwise op; `add` becomes one ripple-chain task.
fn op_tasks<'a>(op: BuiltinOp, srcs: &[Vec<Src>], dst: Vec<Bit>, carry: impl FnOnce() -> String) -> Vec<Task<'a>> {
    if op == BuiltinOp::Add {
        return vec![Task::Adder {
            a: srcs[0].clone(),
            b: srcs[1].clone(),
            dst,
            carry: carry(),
        }];
    }
    let f = op_fn(op);
    dst.into_iter()
        .enumerate()
        .map(|(i, d)| Task::Table {
            inputs: srcs.iter().map(|s| s[i].clone()).collect(),
            outputs: vec![d],
            f: f.clone(),
            post: Vec::new(),
        })
        .collect()
}

fn copy_task<'a>(from: Bit, to: Bit, clear_source: bool) -> Task<'a> {
    Task::Table {
        post: if clear_source { vec![from.clone()] } else { Vec::new() },
        inputs: vec![Src::Bit(from)],
        outputs: vec![to],
        f: Rc::new(|x| x & 1),
    }
}

fn clear_task<'a>(bit: Bit) -> Task<'a> {
    Task::Table {
        inputs: Vec::new(),
        outputs: vec![bit],
        f: Rc::new(|_| 0),
        post: Vec::new(),
    }
}

/// Emits a balanced decision tree over the non-constant inputs, one leaf
/// per distinct output pattern. Latency: 2 per live input, one per write,
/// one for the exit jump.
fn table(b: &mut Block, inputs: &[Src], outputs: &[Bit], f: &dyn Fn(u64) -> u64, post: &[Bit], next: &str) -> Latency {
    let mut base = 0u64;
    let mut live = Vec::new();
    for (i, s) in inputs.iter().enumerate() {
        match s {
            Src::Const(true) => base |= 1 << i,
            Src::Const(false) => {}
            Src::Bit(bit) => live.push((i, bit.clone())),
        }
    }
    let mut leaves: BTreeMap<u64, String> = BTreeMap::new();
    let mut order = Vec::new();

    fn node(
        b: &mut Block,
        live: &[(usize, Bit)],
        depth: usize,
        acc: u64,
        f: &dyn Fn(u64) -> u64,
        leaves: &mut BTreeMap<u64, String>,
        order: &mut Vec<u64>,
    ) -> String {
        if depth == live.len() {
            let pattern = f(acc);
            if let Some(l) = leaves.get(&pattern) {
                return l.clone();
            }
            let l = b.label();
            leaves.insert(pattern, l.clone());
            order.push(pattern);
            return l;
        }
        let (idx, bit) = &live[depth];
        let here = b.label();
        b.place(&here);
        b.cnd(bit);
        let j0 = b.items.len();
        b.halt();
        let j1 = b.items.len();
        b.halt();
        let l0 = node(b, live, depth + 1, acc, f, leaves, order);
        let l1 = node(b, live, depth + 1, acc | 1 << idx, f, leaves, order);
        b.patch_goto(j0, &l0, 0);
        b.patch_goto(j1, &l1, 0);
        here
    }

    node(b, &live, 0, base, f, &mut leaves, &mut order);
    for pattern in order {
        let l = leaves[&pattern].clone();
        b.place(&l);
        for (j, out) in outputs.iter().enumerate() {
            b.write(out, pattern >> j & 1 == 1);
        }
        for p in post {
            b.write(p, false);
        }
        b.goto(next);
    }
    Latency::Static(2 * live.len() as u64 + outputs.len() as u64 + post.len() as u64 + 1)
}

/// Ripple-carry adder: one full-adder table per bit, carries held in
/// `carry` and cleared as they are consumed.
fn adder(b: &mut Block, a: &[Src], bb: &[Src], dst: &[Bit], carry: &str, next: &str) -> Latency {
    let n = dst.len();
    let full: TableFn = Rc::new(|x| {
        let s = (x & 7).count_ones() as u64;
        (s & 1) | (s >> 1 & 1) << 1
    });
    let mut total = Latency::Static(0);
    for i in 0..n {
        let last = i + 1 == n;
        let after = if last { next.to_string() } else { b.label() };
        let cbit = |k: usize| Bit {
            reg: carry.to_string(),
            bit: k as u32,
        };
        let mut inputs = vec![a[i].clone(), bb[i].clone()];
        let mut outputs = vec![dst[i].clone()];
        let mut post = Vec::new();
        if i > 0 {
            inputs.push(Src::Bit(cbit(i)));
            post.push(cbit(i));
        }
        if !last {
            outputs.push(cbit(i + 1));
        }
        total = total.plus(table(b, &inputs, &outputs, &*full, &post, &after));
        if !last {
            b.place(&after);
        }
    }
    total
}

enum Exit {
    Goto(String),
    Halt,
}

struct Lowerer<'p> {
    prog: &'p TypedProgram,
    geometry: Geometry,
    instances: Vec<Option<Instance>>,
    /// Registers committed by finished instances, for the early size check.
    committed: usize,
    statements: Vec<StmtSchedule>,
    joins: Vec<JoinSchedule>,
    pars: Vec<ParSpan>,
}

pub(crate) fn lower(prog: &TypedProgram, top: &str, geometry: Geometry) -> Result<Lowered, SpaceError> {
    let callee = prog
        .resolve(top)
        .ok_or_else(|| SpaceError::UnknownTop(top.to_string()))?;
    let sig = prog.signature(callee);
    let mut lw = Lowerer {
        prog,
        geometry,
        instances: Vec::new(),
        committed: 0,
        statements: Vec::new(),
        joins: Vec::new(),
        pars: Vec::new(),
    };
    let mut io = Vec::new();
    let mut port = |name: &str, width: u32| {
        let label = format!("io/{name}");
        io.push(DataReg {
            label: label.clone(),
            value: Some(name.to_string()),
        });
        (name.to_string(), width, label)
    };
    let inputs: Vec<_> = sig.inputs.iter().map(|(n, w)| port(n, *w)).collect();
    let outputs: Vec<_> = sig.outputs.iter().map(|(n, w)| port(n, *w)).collect();
    lw.committed = io.len();
    let slot = |(_, w, l): &(String, u32, String)| Slot {
        reg: l.clone(),
        width: *w,
    };
    let ins = inputs.iter().map(slot).collect();
    let outs = outputs.iter().map(slot).collect();
    let top_name = prog.callee_name(callee);
    lw.instance(callee, top_name.clone(), None, ins, outs, Exit::Halt)?;
    Ok(Lowered {
        top: top_name,
        io,
        inputs,
        outputs,
        instances: lw.instances.into_iter().map(|i| i.expect("instance finished")).collect(),
        statements: lw.statements,
        joins: lw.joins,
        pars: lw.pars,
    })
}

impl<'p> Lowerer<'p> {
    fn check_size(&self, b: &Block) -> Result<(), SpaceError> {
        let needed = self.committed + b.len + b.data.len();
        let available = self.geometry.n_registers() - 1;
        if needed > available {
            return Err(SpaceError::Alloc(AllocError::OutOfRegisters { needed, available }));
        }
        Ok(())
    }

    /// Lowers one instance of `callee` and returns its entry label and
    /// latency. `ins` and `outs` are the caller's registers.
    fn instance(
        &mut self,
        callee: Callee,
        path: String,
        parent: Option<usize>,
        ins: Vec<Slot>,
        outs: Vec<Slot>,
        exit: Exit,
    ) -> Result<(String, Latency, Bit), SpaceError> {
        let index = self.instances.len();
        self.instances.push(None);
        let mut b = Block::new(index, path.clone());
        let entry = format!("{path}/.entry");
        b.place(&entry);
        let done = Bit {
            reg: b.data(".done", None),
            bit: 0,
        };
        let exit_label = match &exit {
            Exit::Goto(l) => l.clone(),
            Exit::Halt => format!("{path}/.exit"),
        };
        let latency = match callee {
            Callee::Builtin(bi) => self.builtin(&mut b, bi, &ins, &outs, &exit_label)?,
            Callee::User(m) => {
                let module = &self.prog.modules[m];
                let mut scope = Scope::new();
                for (v, s) in module.inputs.iter().zip(ins) {
                    scope.insert(v.name.clone(), s);
                }
                let mut copy_out = Vec::new();
                for (v, dst) in module.outputs.iter().zip(&outs) {
                    let reg = b.data(&v.name, Some(v.name.clone()));
                    copy_out.push((reg.clone(), dst.clone(), v.width));
                    scope.insert(v.name.clone(), Slot { reg, width: v.width });
                }
                let mut locals = Vec::new();
                for v in &module.locals {
                    let reg = b.data(&v.name, Some(v.name.clone()));
                    locals.push((reg.clone(), v.width));
                    scope.insert(v.name.clone(), Slot { reg, width: v.width });
                }
                debug_assert!(module.inputs.iter().all(|v| v.kind == VarKind::In));
                let epilogue = b.label();
                let body = self.seq(&mut b, &scope, &module.body, &epilogue)?;
                b.place(&epilogue);
                let mut tasks = Vec::new();
                for (reg, dst, width) in copy_out {
                    for (from, to) in bits(&reg, width).into_iter().zip(bits(&dst.reg, width)) {
                        tasks.push(copy_task(from, to, true));
                    }
                }
                for (reg, width) in locals {
                    tasks.extend(bits(&reg, width).into_iter().map(clear_task));
                }
                let (tail, _) = self.parallel(&mut b, &scope, tasks, &exit_label)?;
                body.plus(tail)
            }
        };
        if matches!(exit, Exit::Halt) {
            b.place(&exit_label);
            b.halt();
        }
        self.check_size(&b)?;
        self.committed += b.len + b.data.len();
        self.instances[index] = Some(Instance {
            path,
            callee: self.prog.callee_name(callee),
            parent,
            code: b.items,
            code_len: b.len,
            data: b.data,
            entry: entry.clone(),
            latency,
        });
        Ok((entry, latency, done))
    }

    fn builtin(&mut self, b: &mut Block, bi: Builtin, ins: &[Slot], outs: &[Slot], next: &str) -> Result<Latency, SpaceError> {
        let srcs: Vec<Vec<Src>> = ins.iter().map(|s| src_bits(&s.reg, bi.width)).collect();
        let dst = bits(&outs[0].reg, bi.width);
        let tasks = op_tasks(bi.op, &srcs, dst, || b.temp("c"));
        let (lat, join) = self.parallel(b, &Scope::new(), tasks, next)?;
        if let Some((strategy, branches)) = join {
            self.joins.push(JoinSchedule {
                instance: b.path.clone(),
                line: 0,
                what: bi.name(),
                strategy,
                branches,
            });
        }
        Ok(lat)
    }

    fn call(&mut self, b: &mut Block, scope: &Scope, s: &TStmt, exit: &str) -> Result<(String, Latency, Bit), SpaceError> {
        let TStmt::Call {
            callee, args, targets, ..
        } = s
        else {
            unreachable!("call statement")
        };
        b.calls += 1;
        let path = format!("{}/{}@{}", b.path, self.prog.callee_name(*callee), b.calls);
        let ins = args.iter().map(|a| scope[a].clone()).collect();
        let outs = targets.iter().map(|t| scope[t].clone()).collect();
        self.instance(*callee, path, Some(b.index), ins, outs, Exit::Goto(exit.to_string()))
    }

    fn seq(&mut self, b: &mut Block, scope: &Scope, stmts: &[TStmt], next: &str) -> Result<Latency, SpaceError> {
        if stmts.is_empty() {
            b.goto(next);
            return Ok(Latency::Static(1));
        }
        let mut total = Latency::Static(0);
        for (i, s) in stmts.iter().enumerate() {
            let last = i + 1 == stmts.len();
            let after = if last { next.to_string() } else { b.label() };
            total = total.plus(self.stmt(b, scope, s, &after)?);
            if !last {
                b.place(&after);
            }
            self.check_size(b)?;
        }
        Ok(total)
    }

    fn record(&mut self, b: &Block, line: usize, what: String, latency: Latency) {
        self.statements.push(StmtSchedule {
            instance: b.path.clone(),
            line,
            what,
            latency,
        });
    }

    fn stmt(&mut self, b: &mut Block, scope: &Scope, s: &TStmt, next: &str) -> Result<Latency, SpaceError> {
        let latency = match s {
            TStmt::Call { line, callee, .. } => {
                let (entry, lat, _) = self.call(b, scope, s, next)?;
                b.goto(&entry);
                let lat = Latency::Static(1).plus(lat);
                self.record(b, *line, format!("call {}", self.prog.callee_name(*callee)), lat);
                lat
            }
            TStmt::Layers { line, is } => {
                let lat = self.layers(b, scope, is, *line, next)?;
                self.record(b, *line, format!("layers {}", is.layers.len()), lat);
                lat
            }
            TStmt::Seq(stmts) => self.seq(b, scope, stmts, next)?,
            TStmt::Par { line, branches } => {
                let (lat, join) = self.par(b, scope, branches, *line, next)?;
                if let Some((strategy, n)) = join {
                    self.joins.push(JoinSchedule {
                        instance: b.path.clone(),
                        line: *line,
                        what: "par".into(),
                        strategy,
                        branches: n,
                    });
                }
                self.record(b, *line, "par".into(), lat);
                lat
            }
            TStmt::If {
                line,
                cond,
                then_body,
                else_body,
            } => {
                let c = Bit {
                    reg: scope[cond].reg.clone(),
                    bit: 0,
                };
                let (l_then, l_else) = (b.label(), b.label());
                let (t_then, t_else) = (b.label(), b.label());
                b.cnd(&c);
                b.goto(&l_else);
                b.goto(&l_then);
                b.place(&l_then);
                let a = self.seq(b, scope, then_body, &t_then)?;
                b.place(&l_else);
                let e = self.seq(b, scope, else_body, &t_else)?;
                let lat = match (a, e) {
                    (Latency::Static(x), Latency::Static(y)) => {
                        let m = x.max(y);
                        b.place(&t_then);
                        b.pad(m - x);
                        b.goto(next);
                        b.place(&t_else);
                        b.pad(m - y);
                        b.goto(next);
                        Latency::Static(m + 3)
                    }
                    _ => {
                        b.place(&t_then);
                        b.goto(next);
                        b.place(&t_else);
                        b.goto(next);
                        Latency::Dynamic
                    }
                };
                self.record(b, *line, "if".into(), lat);
                lat
            }
            TStmt::Repeat {
                line,
                count,
                unroll: true,
                body,
            } => {
                let mut total = Latency::Static(0);
                if *count == 0 {
                    b.goto(next);
                    total = Latency::Static(1);
                }
                for i in 0..*count {
                    let last = i + 1 == *count;
                    let after = if last { next.to_string() } else { b.label() };
                    total = total.plus(self.seq(b, scope, body, &after)?);
                    if !last {
                        b.place(&after);
                    }
                }
                self.record(b, *line, format!("unroll {count}"), total);
                total
            }
            TStmt::Repeat {
                line,
                count,
                unroll: false,
                body,
            } => {
                let lat = self.repeat(b, scope, *count, body, next)?;
                self.record(b, *line, format!("repeat {count}"), lat);
                lat
            }
        };
        Ok(latency)
    }

    /// Counter loop: set the counter to `k`, test it for zero, run the
    /// body, decrement with a bit-level borrow chain.
    fn repeat(&mut self, b: &mut Block, scope: &Scope, k: u64, body: &[TStmt], next: &str) -> Result<Latency, SpaceError> {
        if k == 0 {
            b.goto(next);
            return Ok(Latency::Static(1));
        }
        let nbits = 64 - k.leading_zeros();
        let counter = b.temp("k");
        let cb = |i: u32| Bit {
            reg: counter.clone(),
            bit: i,
        };
        for i in 0..nbits {
            if k >> i & 1 == 1 {
                b.write(&cb(i), true);
            }
        }
        let top = b.label();
        let body_l = b.label();
        let dec = b.label();
        b.place(&top);
        for i in 0..nbits {
            let t_next = b.label();
            b.cnd(&cb(i));
            b.goto(&t_next);
            b.goto(&body_l);
            b.place(&t_next);
        }
        b.goto(next);
        b.place(&body_l);
        self.seq(b, scope, body, &dec)?;
        b.place(&dec);
        for i in 0..nbits {
            let zero = b.label();
            let after = b.label();
            b.cnd(&cb(i));
            b.goto(&zero);
            b.write(&cb(i), false);
            b.goto(&top);
            b.place(&zero);
            b.write(&cb(i), true);
            b.goto(&after);
            b.place(&after);
        }
        b.goto(&top);
        Ok(Latency::Dynamic)
    }

    fn par(
        &mut self,
        b: &mut Block,
        scope: &Scope,
        branches: &[TStmt],
        line: usize,
        next: &str,
    ) -> Result<(Latency, Option<(JoinStrategy, usize)>), SpaceError> {
        let tasks = branches.iter().map(Task::Stmt).collect();
        let start = self.pars.len();
        self.pars.push(ParSpan {
            owner: b.index,
            line,
            branches: Vec::new(),
        });
        let out = self.parallel_spans(b, scope, tasks, next, Some(start))?;
        Ok(out)
    }

    fn parallel(
        &mut self,
        b: &mut Block,
        scope: &Scope,
        tasks: Vec<Task>,
        next: &str,
    ) -> Result<(Latency, Option<(JoinStrategy, usize)>), SpaceError> {
        self.parallel_spans(b, scope, tasks, next, None)
    }

    /// Spawns `tasks` from a fan-out ladder and joins them before `next`.
    fn parallel_spans(
        &mut self,
        b: &mut Block,
        scope: &Scope,
        tasks: Vec<Task>,
        next: &str,
        span: Option<usize>,
    ) -> Result<(Latency, Option<(JoinStrategy, usize)>), SpaceError> {
        let k = tasks.len();
        if k == 0 {
            b.goto(next);
            return Ok((Latency::Static(1), None));
        }
        if k == 1 {
            let (c0, i0) = (b.len, self.instances.len());
            let task = tasks.into_iter().next().expect("one task");
            let lat = match task {
                Task::Stmt(s) => self.stmt(b, scope, s, next)?,
                other => {
                    let out = self.task(b, scope, other, next)?;
                    out.latency
                }
            };
            if let Some(p) = span {
                self.pars[p].branches.push(BranchSpan {
                    code: (c0, b.len),
                    children: (i0, self.instances.len()),
                });
            }
            return Ok((lat, None));
        }
        let spawn = b.items.len();
        b.halt();
        let tails: Vec<String> = (0..k).map(|_| b.label()).collect();
        let mut outs = Vec::with_capacity(k);
        for (task, tail) in tasks.into_iter().zip(&tails) {
            let (c0, i0) = (b.len, self.instances.len());
            outs.push(self.task(b, scope, task, tail)?);
            if let Some(p) = span {
                self.pars[p].branches.push(BranchSpan {
                    code: (c0, b.len),
                    children: (i0, self.instances.len()),
                });
            }
            self.check_size(b)?;
        }
        let statics: Option<Vec<u64>> = outs.iter().map(|o| o.latency.cycles()).collect();
        let ladder = b.label();
        let (latency, strategy, ladder_len) = match statics {
            Some(lats) => {
                let max = *lats.iter().max().expect("k > 1");
                for (i, (tail, l)) in tails.iter().zip(&lats).enumerate() {
                    b.place(tail);
                    b.pad(max - l);
                    if i == 0 {
                        b.goto(next);
                    } else {
                        b.halt();
                    }
                }
                b.place(&ladder);
                for o in &outs {
                    b.goto(&o.entry);
                }
                (Latency::Static(max + 3), JoinStrategy::CycleBalanced, k)
            }
            None => {
                let mut owned = Vec::new();
                let mut flags = Vec::with_capacity(k);
                let w = self.geometry.word_width();
                for o in &outs {
                    let flag = match &o.done {
                        Some(bit) => bit.clone(),
                        None => {
                            if owned.len() % w as usize == 0 {
                                let reg = b.temp("j");
                                owned.push(reg);
                            } else {
                                let last = owned.last().expect("flag register").clone();
                                owned.push(last);
                            }
                            Bit {
                                reg: owned.last().expect("flag register").clone(),
                                bit: ((owned.len() - 1) % w as usize) as u32,
                            }
                        }
                    };
                    flags.push(flag);
                }
                for (tail, flag) in tails.iter().zip(&flags) {
                    b.place(tail);
                    b.write(flag, true);
                    b.halt();
                }
                let poller = b.label();
                b.place(&poller);
                for flag in &flags {
                    let wait = b.label();
                    b.place(&wait);
                    b.cnd(flag);
                    b.goto(&wait);
                    b.write(flag, false);
                }
                b.goto(next);
                b.place(&ladder);
                for o in &outs {
                    b.goto(&o.entry);
                }
                b.goto(&poller);
                (Latency::Dynamic, JoinStrategy::FlagPolled, k + 1)
            }
        };
        b.patch_goto(spawn, &ladder, ladder_len as u64 - 1);
        Ok((latency, Some((strategy, k))))
    }

    fn task(&mut self, b: &mut Block, scope: &Scope, task: Task, next: &str) -> Result<TaskOut, SpaceError> {
        if let Task::Stmt(s @ TStmt::Call { line, callee, .. }) = task {
            let (entry, latency, done) = self.call(b, scope, s, next)?;
            self.record(b, *line, format!("call {}", self.prog.callee_name(*callee)), latency);
            return Ok(TaskOut {
                entry,
                latency,
                done: Some(done),
            });
        }
        let entry = b.label();
        b.place(&entry);
        let latency = match task {
            Task::Table { inputs, outputs, f, post } => table(b, &inputs, &outputs, &*f, &post, next),
            Task::Adder { a, b: bb, dst, carry } => adder(b, &a, &bb, &dst, &carry, next),
            Task::Stmt(s) => self.stmt(b, scope, s, next)?,
        };
        Ok(TaskOut {
            entry,
            latency,
            done: None,
        })
    }

    /// Each layer runs its cells as parallel threads. A cell whose
    /// destination another cell of the layer reads writes a temporary that a
    /// second phase commits, so every read sees the pre-layer value.
    fn layers(&mut self, b: &mut Block, scope: &Scope, is: &Interstring, line: usize, next: &str) -> Result<Latency, SpaceError> {
        if is.layers.is_empty() {
            b.goto(next);
            return Ok(Latency::Static(1));
        }
        let mut total = Latency::Static(0);
        for (li, layer) in is.layers.iter().enumerate() {
            let last = li + 1 == is.layers.len();
            let after = if last { next.to_string() } else { b.label() };
            let reads: Vec<BTreeSet<&str>> = layer
                .iter()
                .map(|c| c.sources().iter().filter_map(Symbol::name).collect())
                .collect();
            let mut tasks = Vec::new();
            let mut commits = Vec::new();
            for (ci, cell) in layer.iter().enumerate() {
                let dst = &scope[cell.dst().expect("typechecked cell")];
                let hazard = reads
                    .iter()
                    .enumerate()
                    .any(|(cj, r)| cj != ci && r.contains(cell.dst().unwrap_or_default()));
                let target = if hazard {
                    let t = b.temp("t");
                    for (from, to) in bits(&t, dst.width).into_iter().zip(bits(&dst.reg, dst.width)) {
                        commits.push(copy_task(from, to, true));
                    }
                    t
                } else {
                    dst.reg.clone()
                };
                let srcs: Vec<Vec<Src>> = cell
                    .sources()
                    .iter()
                    .map(|s| match s {
                        Symbol::Name(n) => src_bits(&scope[n].reg, dst.width),
                        Symbol::Lit(v) => const_bits(*v, dst.width),
                    })
                    .collect();
                let op = BuiltinOp::from_name(cell.op().expect("typechecked cell")).expect("layer op");
                tasks.extend(op_tasks(op, &srcs, bits(&target, dst.width), || b.temp("c")));
            }
            let mut phases = vec![tasks];
            if !commits.is_empty() {
                phases.push(commits);
            }
            let n_phases = phases.len();
            for (pi, tasks) in phases.into_iter().enumerate() {
                let phase_next = if pi + 1 == n_phases { after.clone() } else { b.label() };
                let n = tasks.len();
                let (lat, join) = self.parallel(b, scope, tasks, &phase_next)?;
                if let Some((strategy, _)) = join {
                    self.joins.push(JoinSchedule {
                        instance: b.path.clone(),
                        line,
                        what: format!("layer {}{}", li + 1, if pi == 0 { "" } else { " commit" }),
                        strategy,
                        branches: n,
                    });
                }
                total = total.plus(lat);
                if pi + 1 != n_phases {
                    b.place(&phase_next);
                }
            }
            if !last {
                b.place(&after);
            }
            self.check_size(b)?;
        }
        Ok(total)
    }
}
