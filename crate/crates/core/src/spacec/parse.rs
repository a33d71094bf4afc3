//! Lexer and recursive-descent parser for mini-Space.
//!
//! ```text
//! module sum2(in a:uint8, b:uint8; out s:uint8) {
//!   local t:uint8
//!   par { t = xor8(a, b); s = add8(a, b) }
//!   layers {
//!     s xor s t
//!   }
//!   if (c) { ... } else { ... }
//!   repeat 3 { ... }          # `@unroll repeat 3 { ... }` unrolls
//! }
//! ```

use crate::interstring::{self, DEFAULT_MAX_CELL_LEN};

use super::ast::{Decl, ModuleDecl, RepeatCount, SourceProgram, Stmt, StmtKind, Target};
use super::SpaceError;

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(u64),
    Punct(char),
    Newline,
    /// Raw body of a `layers { ... }` block.
    Raw(String),
    Eof,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
}

fn err(line: usize, msg: impl Into<String>) -> SpaceError {
    SpaceError::Parse {
        line,
        message: msg.into(),
    }
}

fn lex(src: &str) -> Result<Vec<Token>, SpaceError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let mut line = 1;
    while i < chars.len() {
        let c = chars[i];
        match c {
            '\n' => {
                out.push(Token { tok: Tok::Newline, line });
                line += 1;
                i += 1;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            c if c.is_whitespace() => i += 1,
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                let text: String = chars[start..i].iter().collect();
                let v = text.parse().map_err(|_| err(line, format!("bad number `{text}`")))?;
                out.push(Token { tok: Tok::Int(v), line });
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let is_layers = word == "layers";
                out.push(Token { tok: Tok::Ident(word), line });
                if is_layers {
                    while i < chars.len() && chars[i].is_whitespace() {
                        if chars[i] == '\n' {
                            line += 1;
                        }
                        i += 1;
                    }
                    if chars.get(i) != Some(&'{') {
                        return Err(err(line, "expected `{` after `layers`"));
                    }
                    i += 1;
                    let body_line = line;
                    let start = i;
                    while i < chars.len() && chars[i] != '}' {
                        if chars[i] == '\n' {
                            line += 1;
                        }
                        i += 1;
                    }
                    if i == chars.len() {
                        return Err(err(body_line, "unterminated `layers` block"));
                    }
                    let body: String = chars[start..i].iter().collect();
                    i += 1;
                    out.push(Token {
                        tok: Tok::Raw(body),
                        line: body_line,
                    });
                }
            }
            '(' | ')' | '{' | '}' | ',' | ';' | ':' | '=' | '@' => {
                out.push(Token { tok: Tok::Punct(c), line });
                i += 1;
            }
            other => return Err(err(line, format!("unexpected character `{other}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, line });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn line(&self) -> usize {
        self.toks[self.pos].line
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn skip_newlines(&mut self) {
        while *self.peek() == Tok::Newline {
            self.bump();
        }
    }

    fn skip_separators(&mut self) {
        while matches!(self.peek(), Tok::Newline | Tok::Punct(';')) {
            self.bump();
        }
    }

    fn expect_punct(&mut self, c: char) -> Result<(), SpaceError> {
        if *self.peek() == Tok::Punct(c) {
            self.bump();
            Ok(())
        } else {
            Err(err(self.line(), format!("expected `{c}`, found {}", describe(self.peek()))))
        }
    }

    fn ident(&mut self) -> Result<String, SpaceError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(err(self.line(), format!("expected a name, found {}", describe(&other)))),
        }
    }

    fn keyword(&mut self, kw: &str) -> Result<(), SpaceError> {
        match self.peek() {
            Tok::Ident(s) if s == kw => {
                self.bump();
                Ok(())
            }
            other => Err(err(self.line(), format!("expected `{kw}`, found {}", describe(other)))),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == kw)
    }

    fn width(&mut self) -> Result<u32, SpaceError> {
        let line = self.line();
        let ty = self.ident()?;
        ty.strip_prefix("uint")
            .and_then(|n| n.parse().ok())
            .ok_or_else(|| err(line, format!("expected a type `uint<N>`, found `{ty}`")))
    }

    fn decl(&mut self) -> Result<Decl, SpaceError> {
        let line = self.line();
        let name = self.ident()?;
        self.expect_punct(':')?;
        let width = self.width()?;
        Ok(Decl { name, width, line })
    }

    fn decls(&mut self) -> Result<Vec<Decl>, SpaceError> {
        let mut out = vec![self.decl()?];
        while *self.peek() == Tok::Punct(',') {
            self.bump();
            out.push(self.decl()?);
        }
        Ok(out)
    }

    fn module(&mut self) -> Result<ModuleDecl, SpaceError> {
        let line = self.line();
        self.keyword("module")?;
        let name = self.ident()?;
        self.expect_punct('(')?;
        let mut inputs = Vec::new();
        let mut outputs = Vec::new();
        if self.at_keyword("in") {
            self.bump();
            inputs = self.decls()?;
            if *self.peek() == Tok::Punct(';') {
                self.bump();
            }
        }
        if self.at_keyword("out") {
            self.bump();
            outputs = self.decls()?;
        }
        self.expect_punct(')')?;
        self.skip_newlines();
        let body = self.block()?;
        Ok(ModuleDecl {
            name,
            line,
            inputs,
            outputs,
            body,
        })
    }

    /// `{ stmt* }`
    fn block(&mut self) -> Result<Vec<Stmt>, SpaceError> {
        self.expect_punct('{')?;
        let mut out = Vec::new();
        loop {
            self.skip_separators();
            if *self.peek() == Tok::Punct('}') {
                self.bump();
                return Ok(out);
            }
            if *self.peek() == Tok::Eof {
                return Err(err(self.line(), "unexpected end of input, missing `}`"));
            }
            out.push(self.stmt()?);
        }
    }

    fn stmt(&mut self) -> Result<Stmt, SpaceError> {
        let line = self.line();
        let kind = match self.peek().clone() {
            Tok::Punct('@') => {
                self.bump();
                let attr = self.ident()?;
                if attr != "unroll" {
                    return Err(err(line, format!("unknown attribute `@{attr}`")));
                }
                if !self.at_keyword("repeat") {
                    return Err(err(line, "`@unroll` applies to `repeat`"));
                }
                let mut s = self.stmt()?;
                if let StmtKind::Repeat { unroll, .. } = &mut s.kind {
                    *unroll = true;
                }
                return Ok(s);
            }
            Tok::Ident(kw) => match kw.as_str() {
                "local" => {
                    self.bump();
                    StmtKind::Local(self.decls()?)
                }
                "seq" => {
                    self.bump();
                    StmtKind::Seq(self.block()?)
                }
                "par" => {
                    self.bump();
                    StmtKind::Par(self.block()?)
                }
                "if" => {
                    self.bump();
                    self.expect_punct('(')?;
                    let cond = self.ident()?;
                    self.expect_punct(')')?;
                    let then_body = self.block()?;
                    let save = self.pos;
                    self.skip_newlines();
                    let else_body = if self.at_keyword("else") {
                        self.bump();
                        self.block()?
                    } else {
                        self.pos = save;
                        Vec::new()
                    };
                    StmtKind::If {
                        cond,
                        then_body,
                        else_body,
                    }
                }
                "repeat" => {
                    self.bump();
                    let count = match self.bump().tok {
                        Tok::Int(v) => RepeatCount::Const(v),
                        Tok::Ident(n) => RepeatCount::Name(n),
                        other => return Err(err(line, format!("expected a repeat count, found {}", describe(&other)))),
                    };
                    StmtKind::Repeat {
                        count,
                        unroll: false,
                        body: self.block()?,
                    }
                }
                "layers" => {
                    self.bump();
                    let tok = self.bump();
                    let Tok::Raw(text) = tok.tok else {
                        return Err(err(line, "expected a layers block"));
                    };
                    // Line numbers inside the block count from the `{` line.
                    let is = interstring::parse::parse_with_offset(&text, DEFAULT_MAX_CELL_LEN, tok.line - 1)
                        .map_err(|e| err(e.line, e.kind.to_string()))?;
                    StmtKind::Layers(is)
                }
                _ => self.call()?,
            },
            other => return Err(err(line, format!("expected a statement, found {}", describe(&other)))),
        };
        Ok(Stmt { line, kind })
    }

    fn call(&mut self) -> Result<StmtKind, SpaceError> {
        let mut targets = Vec::new();
        loop {
            let name = self.ident()?;
            let width = if *self.peek() == Tok::Punct(':') {
                self.bump();
                Some(self.width()?)
            } else {
                None
            };
            targets.push(Target { name, width });
            if *self.peek() == Tok::Punct(',') {
                self.bump();
            } else {
                break;
            }
        }
        self.expect_punct('=')?;
        let callee = self.ident()?;
        self.expect_punct('(')?;
        let mut args = Vec::new();
        if *self.peek() != Tok::Punct(')') {
            args.push(self.ident()?);
            while *self.peek() == Tok::Punct(',') {
                self.bump();
                args.push(self.ident()?);
            }
        }
        self.expect_punct(')')?;
        Ok(StmtKind::Call { targets, callee, args })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(v) => format!("`{v}`"),
        Tok::Punct(c) => format!("`{c}`"),
        Tok::Newline => "end of line".into(),
        Tok::Raw(_) => "a layers block".into(),
        Tok::Eof => "end of input".into(),
    }
}

pub fn parse_space(src: &str) -> Result<SourceProgram, SpaceError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let mut modules = Vec::new();
    loop {
        p.skip_separators();
        if *p.peek() == Tok::Eof {
            break;
        }
        modules.push(p.module()?);
    }
    Ok(SourceProgram { modules })
}
