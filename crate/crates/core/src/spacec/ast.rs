use crate::interstring::Interstring;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decl {
    pub name: String,
    pub width: u32,
    pub line: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Target {
    pub name: String,
    /// Present when the target is declared inline (`t:uint8 = ...`).
    pub width: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum RepeatCount {
    Const(u64),
    Name(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StmtKind {
    Local(Vec<Decl>),
    Call {
        targets: Vec<Target>,
        callee: String,
        args: Vec<String>,
    },
    Layers(Interstring),
    Seq(Vec<Stmt>),
    Par(Vec<Stmt>),
    If {
        cond: String,
        then_body: Vec<Stmt>,
        else_body: Vec<Stmt>,
    },
    Repeat {
        count: RepeatCount,
        unroll: bool,
        body: Vec<Stmt>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stmt {
    pub line: usize,
    pub kind: StmtKind,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModuleDecl {
    pub name: String,
    pub line: usize,
    pub inputs: Vec<Decl>,
    pub outputs: Vec<Decl>,
    pub body: Vec<Stmt>,
}

/// A parsed `.spc` file.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SourceProgram {
    pub modules: Vec<ModuleDecl>,
}
