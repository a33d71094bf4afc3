use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::interstring::{validate, Algebra, Interstring, Symbol};

use super::ast::{Decl, ModuleDecl, RepeatCount, SourceProgram, Stmt, StmtKind};
use super::SpaceError;

/// Interstring operators usable inside `layers` blocks.
pub const LAYER_OPS: [&str; 6] = ["mov", "not", "and", "or", "xor", "add"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BuiltinOp {
    Not,
    Mov,
    And,
    Or,
    Xor,
    Add,
}

impl BuiltinOp {
    pub const ALL: [BuiltinOp; 6] = [Self::Not, Self::Mov, Self::And, Self::Or, Self::Xor, Self::Add];

    pub fn name(self) -> &'static str {
        match self {
            Self::Not => "not",
            Self::Mov => "mov",
            Self::And => "and",
            Self::Or => "or",
            Self::Xor => "xor",
            Self::Add => "add",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|op| op.name() == s)
    }

    pub fn arity(self) -> usize {
        match self {
            Self::Not | Self::Mov => 1,
            _ => 2,
        }
    }

    /// Reference semantics over `width`-bit values.
    pub fn apply(self, args: &[u64], width: u32) -> u64 {
        let mask = mask(width);
        let v = match self {
            Self::Not => !args[0],
            Self::Mov => args[0],
            Self::And => args[0] & args[1],
            Self::Or => args[0] | args[1],
            Self::Xor => args[0] ^ args[1],
            Self::Add => args[0].wrapping_add(args[1]),
        };
        v & mask
    }
}

pub(crate) fn mask(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// A builtin module such as `add8`: `opN(a[, b]) -> s`, all `uintN`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Builtin {
    pub op: BuiltinOp,
    pub width: u32,
}

impl Builtin {
    /// Recognises `<op><N>` with `N` written without leading zeros.
    pub fn parse(name: &str) -> Option<Builtin> {
        let split = name.find(|c: char| c.is_ascii_digit())?;
        let op = BuiltinOp::from_name(&name[..split])?;
        let width: u32 = name[split..].parse().ok()?;
        (width >= 1 && format!("{}{width}", op.name()) == name).then_some(Builtin { op, width })
    }

    pub fn name(&self) -> String {
        format!("{}{}", self.op.name(), self.width)
    }

    pub fn input_names(&self) -> &'static [&'static str] {
        if self.op.arity() == 1 {
            &["a"]
        } else {
            &["a", "b"]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Callee {
    Builtin(Builtin),
    /// Index into `TypedProgram::modules`.
    User(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    In,
    Out,
    Local,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Var {
    pub name: String,
    pub width: u32,
    pub kind: VarKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TStmt {
    Call {
        line: usize,
        callee: Callee,
        args: Vec<String>,
        targets: Vec<String>,
    },
    Layers {
        line: usize,
        is: Interstring,
    },
    Seq(Vec<TStmt>),
    Par {
        line: usize,
        branches: Vec<TStmt>,
    },
    If {
        line: usize,
        cond: String,
        then_body: Vec<TStmt>,
        else_body: Vec<TStmt>,
    },
    Repeat {
        line: usize,
        count: u64,
        unroll: bool,
        body: Vec<TStmt>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TModule {
    pub name: String,
    pub line: usize,
    pub inputs: Vec<Var>,
    pub outputs: Vec<Var>,
    /// Every local, including ones declared inline at a call target.
    pub locals: Vec<Var>,
    pub body: Vec<TStmt>,
}

impl TModule {
    pub fn var(&self, name: &str) -> Option<&Var> {
        self.inputs
            .iter()
            .chain(&self.outputs)
            .chain(&self.locals)
            .find(|v| v.name == name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypedProgram {
    pub modules: Vec<TModule>,
    pub word_width: u32,
}

/// Widths of a callee's inputs and outputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    pub inputs: Vec<(String, u32)>,
    pub outputs: Vec<(String, u32)>,
}

impl TypedProgram {
    /// Resolves a module or builtin name. User modules shadow nothing:
    /// builtin names are reserved.
    pub fn resolve(&self, name: &str) -> Option<Callee> {
        if let Some(i) = self.modules.iter().position(|m| m.name == name) {
            return Some(Callee::User(i));
        }
        Builtin::parse(name)
            .filter(|b| b.width <= self.word_width)
            .map(Callee::Builtin)
    }

    pub fn callee_name(&self, c: Callee) -> String {
        match c {
            Callee::Builtin(b) => b.name(),
            Callee::User(i) => self.modules[i].name.clone(),
        }
    }

    pub fn signature(&self, c: Callee) -> Signature {
        match c {
            Callee::Builtin(b) => Signature {
                inputs: b.input_names().iter().map(|n| (n.to_string(), b.width)).collect(),
                outputs: vec![("s".to_string(), b.width)],
            },
            Callee::User(i) => {
                let m = &self.modules[i];
                let f = |v: &Var| (v.name.clone(), v.width);
                Signature {
                    inputs: m.inputs.iter().map(f).collect(),
                    outputs: m.outputs.iter().map(f).collect(),
                }
            }
        }
    }

    /// The module compiled when none is named: the last one in the file.
    pub fn default_top(&self) -> Option<&str> {
        self.modules.last().map(|m| m.name.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TypeErrorKind {
    UnknownName(String),
    UnknownModule(String),
    DuplicateName(String),
    DuplicateModule(String),
    ReservedName(String),
    BadWidth(u32),
    WidthMismatch { what: String, expected: u32, found: u32 },
    ArgumentCount { callee: String, expected: usize, found: usize },
    TargetCount { callee: String, expected: usize, found: usize },
    DuplicateTarget(String),
    Recursion(Vec<String>),
    NonConstantRepeat(String),
    NotWritable(String),
    ParConflict(String),
    Layers(String),
}

impl fmt::Display for TypeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::UnknownName(n) => write!(f, "unknown name `{n}`"),
            Self::UnknownModule(n) => write!(f, "unknown module `{n}`"),
            Self::DuplicateName(n) => write!(f, "`{n}` is declared twice"),
            Self::DuplicateModule(n) => write!(f, "module `{n}` is defined twice"),
            Self::ReservedName(n) => write!(f, "`{n}` is the name of a builtin module"),
            Self::BadWidth(w) => write!(f, "width {w} is outside 1..=word width"),
            Self::WidthMismatch { what, expected, found } => {
                write!(f, "width mismatch for {what}: expected uint{expected}, found uint{found}")
            }
            Self::ArgumentCount { callee, expected, found } => {
                write!(f, "`{callee}` takes {expected} arguments, got {found}")
            }
            Self::TargetCount { callee, expected, found } => {
                write!(f, "`{callee}` has {expected} outputs, {found} targets given")
            }
            Self::DuplicateTarget(n) => write!(f, "`{n}` is assigned twice by one call"),
            Self::Recursion(chain) => write!(f, "recursive call chain {}", chain.join(" -> ")),
            Self::NonConstantRepeat(n) => write!(f, "repeat bound `{n}` is not a constant"),
            Self::NotWritable(n) => write!(f, "`{n}` is an input and cannot be written"),
            Self::ParConflict(n) => write!(f, "par branches conflict on `{n}`"),
            Self::Layers(m) => write!(f, "layers: {m}"),
        }
    }
}

fn terr(line: usize, kind: TypeErrorKind) -> SpaceError {
    SpaceError::Type { line, kind }
}

pub fn typecheck(ast: &SourceProgram, word_width: u32) -> Result<TypedProgram, SpaceError> {
    let mut names: BTreeMap<&str, usize> = BTreeMap::new();
    for (i, m) in ast.modules.iter().enumerate() {
        if Builtin::parse(&m.name).is_some() {
            return Err(terr(m.line, TypeErrorKind::ReservedName(m.name.clone())));
        }
        if names.insert(&m.name, i).is_some() {
            return Err(terr(m.line, TypeErrorKind::DuplicateModule(m.name.clone())));
        }
    }
    check_acyclic(ast, &names)?;

    let mut typed = TypedProgram {
        modules: Vec::with_capacity(ast.modules.len()),
        word_width,
    };
    // Signatures first so calls to later modules resolve.
    let mut sigs = Vec::new();
    for m in &ast.modules {
        let decl_var = |d: &Decl, kind| -> Result<Var, SpaceError> {
            if d.width == 0 || d.width > word_width {
                return Err(terr(d.line, TypeErrorKind::BadWidth(d.width)));
            }
            Ok(Var {
                name: d.name.clone(),
                width: d.width,
                kind,
            })
        };
        let inputs = m.inputs.iter().map(|d| decl_var(d, VarKind::In)).collect::<Result<Vec<_>, _>>()?;
        let outputs = m.outputs.iter().map(|d| decl_var(d, VarKind::Out)).collect::<Result<Vec<_>, _>>()?;
        sigs.push((inputs, outputs));
    }
    for (m, (inputs, outputs)) in ast.modules.iter().zip(&sigs) {
        typed.modules.push(TModule {
            name: m.name.clone(),
            line: m.line,
            inputs: inputs.clone(),
            outputs: outputs.clone(),
            locals: Vec::new(),
            body: Vec::new(),
        });
    }
    for (i, m) in ast.modules.iter().enumerate() {
        let (locals, body) = ModuleChecker::new(&typed, m)?.run(m)?;
        typed.modules[i].locals = locals;
        typed.modules[i].body = body;
    }
    Ok(typed)
}

fn check_acyclic(ast: &SourceProgram, names: &BTreeMap<&str, usize>) -> Result<(), SpaceError> {
    fn calls<'a>(stmts: &'a [Stmt], out: &mut Vec<(&'a str, usize)>) {
        for s in stmts {
            match &s.kind {
                StmtKind::Call { callee, .. } => out.push((callee, s.line)),
                StmtKind::Seq(b) | StmtKind::Par(b) | StmtKind::Repeat { body: b, .. } => calls(b, out),
                StmtKind::If { then_body, else_body, .. } => {
                    calls(then_body, out);
                    calls(else_body, out);
                }
                StmtKind::Local(_) | StmtKind::Layers(_) => {}
            }
        }
    }
    let edges: Vec<Vec<(usize, usize)>> = ast
        .modules
        .iter()
        .map(|m| {
            let mut c = Vec::new();
            calls(&m.body, &mut c);
            c.into_iter().filter_map(|(n, line)| names.get(n).map(|&j| (j, line))).collect()
        })
        .collect();
    // 0 = unvisited, 1 = on stack, 2 = done
    fn dfs(
        u: usize,
        edges: &[Vec<(usize, usize)>],
        state: &mut [u8],
        stack: &mut Vec<usize>,
        ast: &SourceProgram,
    ) -> Result<(), SpaceError> {
        state[u] = 1;
        stack.push(u);
        for &(v, line) in &edges[u] {
            if state[v] == 1 {
                let from = stack.iter().position(|&x| x == v).unwrap_or(0);
                let mut chain: Vec<String> = stack[from..].iter().map(|&x| ast.modules[x].name.clone()).collect();
                chain.push(ast.modules[v].name.clone());
                return Err(terr(line, TypeErrorKind::Recursion(chain)));
            }
            if state[v] == 0 {
                dfs(v, edges, state, stack, ast)?;
            }
        }
        stack.pop();
        state[u] = 2;
        Ok(())
    }
    let mut state = vec![0u8; ast.modules.len()];
    for u in 0..ast.modules.len() {
        if state[u] == 0 {
            dfs(u, &edges, &mut state, &mut Vec::new(), ast)?;
        }
    }
    Ok(())
}

struct ModuleChecker<'a> {
    prog: &'a TypedProgram,
    vars: BTreeMap<String, Var>,
    locals: Vec<Var>,
    algebra: Algebra,
}

impl<'a> ModuleChecker<'a> {
    fn new(prog: &'a TypedProgram, m: &ModuleDecl) -> Result<Self, SpaceError> {
        let mut c = ModuleChecker {
            prog,
            vars: BTreeMap::new(),
            locals: Vec::new(),
            algebra: Algebra::standard(prog.word_width).restricted(&LAYER_OPS),
        };
        let idx = prog.modules.iter().position(|x| x.name == m.name).expect("module registered");
        let tm = &prog.modules[idx];
        for (v, d) in tm.inputs.iter().chain(&tm.outputs).zip(m.inputs.iter().chain(&m.outputs)) {
            c.declare(v.clone(), d.line)?;
        }
        Ok(c)
    }

    fn run(mut self, m: &ModuleDecl) -> Result<(Vec<Var>, Vec<TStmt>), SpaceError> {
        let body = self.block(&m.body)?;
        Ok((self.locals, body))
    }

    fn declare(&mut self, v: Var, line: usize) -> Result<(), SpaceError> {
        if v.width == 0 || v.width > self.prog.word_width {
            return Err(terr(line, TypeErrorKind::BadWidth(v.width)));
        }
        if self.vars.contains_key(&v.name) {
            return Err(terr(line, TypeErrorKind::DuplicateName(v.name)));
        }
        if v.kind == VarKind::Local {
            self.locals.push(v.clone());
        }
        self.vars.insert(v.name.clone(), v);
        Ok(())
    }

    fn lookup(&self, name: &str, line: usize) -> Result<&Var, SpaceError> {
        self.vars
            .get(name)
            .ok_or_else(|| terr(line, TypeErrorKind::UnknownName(name.to_string())))
    }

    fn writable(&self, name: &str, line: usize) -> Result<&Var, SpaceError> {
        let v = self.lookup(name, line)?;
        if v.kind == VarKind::In {
            return Err(terr(line, TypeErrorKind::NotWritable(name.to_string())));
        }
        Ok(v)
    }

    fn block(&mut self, stmts: &[Stmt]) -> Result<Vec<TStmt>, SpaceError> {
        let mut out = Vec::new();
        for s in stmts {
            if let Some(t) = self.stmt(s)? {
                out.push(t);
            }
        }
        Ok(out)
    }

    fn stmt(&mut self, s: &Stmt) -> Result<Option<TStmt>, SpaceError> {
        let line = s.line;
        let t = match &s.kind {
            StmtKind::Local(decls) => {
                for d in decls {
                    self.declare(
                        Var {
                            name: d.name.clone(),
                            width: d.width,
                            kind: VarKind::Local,
                        },
                        d.line,
                    )?;
                }
                return Ok(None);
            }
            StmtKind::Call { targets, callee, args } => {
                let c = self
                    .prog
                    .resolve(callee)
                    .ok_or_else(|| terr(line, TypeErrorKind::UnknownModule(callee.clone())))?;
                let sig = self.prog.signature(c);
                if args.len() != sig.inputs.len() {
                    return Err(terr(
                        line,
                        TypeErrorKind::ArgumentCount {
                            callee: callee.clone(),
                            expected: sig.inputs.len(),
                            found: args.len(),
                        },
                    ));
                }
                for (a, (pname, w)) in args.iter().zip(&sig.inputs) {
                    let v = self.lookup(a, line)?;
                    if v.width != *w {
                        return Err(terr(
                            line,
                            TypeErrorKind::WidthMismatch {
                                what: format!("argument `{a}` to `{callee}` parameter `{pname}`"),
                                expected: *w,
                                found: v.width,
                            },
                        ));
                    }
                }
                if targets.len() != sig.outputs.len() {
                    return Err(terr(
                        line,
                        TypeErrorKind::TargetCount {
                            callee: callee.clone(),
                            expected: sig.outputs.len(),
                            found: targets.len(),
                        },
                    ));
                }
                let mut seen = BTreeSet::new();
                for (t, (_, w)) in targets.iter().zip(&sig.outputs) {
                    if !seen.insert(&t.name) {
                        return Err(terr(line, TypeErrorKind::DuplicateTarget(t.name.clone())));
                    }
                    if let Some(dw) = t.width {
                        if dw != *w {
                            return Err(terr(
                                line,
                                TypeErrorKind::WidthMismatch {
                                    what: format!("target `{}` of `{callee}`", t.name),
                                    expected: *w,
                                    found: dw,
                                },
                            ));
                        }
                        self.declare(
                            Var {
                                name: t.name.clone(),
                                width: dw,
                                kind: VarKind::Local,
                            },
                            line,
                        )?;
                    }
                    let v = self.writable(&t.name, line)?;
                    if v.width != *w {
                        return Err(terr(
                            line,
                            TypeErrorKind::WidthMismatch {
                                what: format!("target `{}` of `{callee}`", t.name),
                                expected: *w,
                                found: v.width,
                            },
                        ));
                    }
                }
                TStmt::Call {
                    line,
                    callee: c,
                    args: args.clone(),
                    targets: targets.iter().map(|t| t.name.clone()).collect(),
                }
            }
            StmtKind::Layers(is) => {
                self.layers(is, line)?;
                TStmt::Layers { line, is: is.clone() }
            }
            StmtKind::Seq(b) => TStmt::Seq(self.block(b)?),
            StmtKind::Par(b) => {
                let branches = self.block(b)?;
                check_par(&branches, line)?;
                TStmt::Par { line, branches }
            }
            StmtKind::If {
                cond,
                then_body,
                else_body,
            } => {
                let v = self.lookup(cond, line)?;
                if v.width != 1 {
                    return Err(terr(
                        line,
                        TypeErrorKind::WidthMismatch {
                            what: format!("condition `{cond}`"),
                            expected: 1,
                            found: v.width,
                        },
                    ));
                }
                TStmt::If {
                    line,
                    cond: cond.clone(),
                    then_body: self.block(then_body)?,
                    else_body: self.block(else_body)?,
                }
            }
            StmtKind::Repeat { count, unroll, body } => {
                let count = match count {
                    RepeatCount::Const(k) => *k,
                    RepeatCount::Name(n) => return Err(terr(line, TypeErrorKind::NonConstantRepeat(n.clone()))),
                };
                TStmt::Repeat {
                    line,
                    count,
                    unroll: *unroll,
                    body: self.block(body)?,
                }
            }
        };
        Ok(Some(t))
    }

    fn layers(&self, is: &Interstring, line: usize) -> Result<(), SpaceError> {
        let env: BTreeSet<String> = self.vars.keys().cloned().collect();
        let report = validate(is, Some(&self.algebra), &env);
        if let Some(f) = report.findings.first() {
            return Err(terr(line, TypeErrorKind::Layers(f.to_string())));
        }
        for (_, _, cell) in is.cells() {
            let dst = cell.dst().expect("validated");
            let dv = self.writable(dst, line)?;
            for s in cell.sources() {
                match s {
                    Symbol::Name(n) => {
                        let v = self.lookup(n, line)?;
                        if v.width != dv.width {
                            return Err(terr(
                                line,
                                TypeErrorKind::WidthMismatch {
                                    what: format!("`{n}` in cell `{cell}`"),
                                    expected: dv.width,
                                    found: v.width,
                                },
                            ));
                        }
                    }
                    Symbol::Lit(v) => {
                        if *v & !mask(dv.width) != 0 {
                            return Err(terr(
                                line,
                                TypeErrorKind::WidthMismatch {
                                    what: format!("literal {v} in cell `{cell}`"),
                                    expected: dv.width,
                                    found: 64 - v.leading_zeros(),
                                },
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Names a statement reads and writes.
pub(crate) fn effects(s: &TStmt, reads: &mut BTreeSet<String>, writes: &mut BTreeSet<String>) {
    match s {
        TStmt::Call { args, targets, .. } => {
            reads.extend(args.iter().cloned());
            writes.extend(targets.iter().cloned());
        }
        TStmt::Layers { is, .. } => {
            for (_, _, cell) in is.cells() {
                if let Some(d) = cell.dst() {
                    writes.insert(d.to_string());
                }
                reads.extend(cell.sources().iter().filter_map(|s| s.name().map(str::to_string)));
            }
        }
        TStmt::Seq(b) | TStmt::Par { branches: b, .. } | TStmt::Repeat { body: b, .. } => {
            b.iter().for_each(|s| effects(s, reads, writes))
        }
        TStmt::If {
            cond,
            then_body,
            else_body,
            ..
        } => {
            reads.insert(cond.clone());
            then_body.iter().chain(else_body).for_each(|s| effects(s, reads, writes));
        }
    }
}

fn check_par(branches: &[TStmt], line: usize) -> Result<(), SpaceError> {
    let sets: Vec<(BTreeSet<String>, BTreeSet<String>)> = branches
        .iter()
        .map(|b| {
            let (mut r, mut w) = (BTreeSet::new(), BTreeSet::new());
            effects(b, &mut r, &mut w);
            (r, w)
        })
        .collect();
    for i in 0..sets.len() {
        for j in 0..sets.len() {
            if i == j {
                continue;
            }
            let (ri, wi) = &sets[i];
            let wj = &sets[j].1;
            if let Some(n) = wi.intersection(wj).next().or_else(|| ri.intersection(wj).next()) {
                return Err(terr(line, TypeErrorKind::ParConflict(n.clone())));
            }
        }
    }
    Ok(())
}
