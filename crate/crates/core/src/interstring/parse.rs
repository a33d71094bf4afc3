use thiserror::Error;

use super::{Cell, Interstring, Symbol};

pub const DEFAULT_MAX_CELL_LEN: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("cell length {len} > {max}")]
    CellTooLong { len: usize, max: usize },
    #[error("empty cell")]
    EmptyCell,
    #[error("illegal symbol `{0}`")]
    IllegalSymbol(String),
}

fn parse_symbol(tok: &str) -> Option<Symbol> {
    let first = tok.chars().next()?;
    if first.is_ascii_digit() {
        return tok.parse().ok().map(Symbol::Lit);
    }
    let ident = (first.is_ascii_alphabetic() || first == '_')
        && tok.chars().all(|c| c.is_ascii_alphanumeric() || c == '_');
    ident.then(|| Symbol::Name(tok.to_string()))
}

/// Parses interstring text with cells of at most `max_cell_len` symbols.
/// `first_line` offsets reported line numbers for embedded blocks.
pub fn parse_interstring(text: &str, max_cell_len: usize) -> Result<Interstring, ParseError> {
    parse_with_offset(text, max_cell_len, 0)
}

pub(crate) fn parse_with_offset(text: &str, max_cell_len: usize, line_offset: usize) -> Result<Interstring, ParseError> {
    let mut layers = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1 + line_offset;
        let body = raw.split('#').next().unwrap_or_default();
        if body.trim().is_empty() {
            continue;
        }
        let mut layer = Vec::new();
        for cell_text in body.split(';') {
            let mut symbols = Vec::new();
            for tok in cell_text.split_whitespace() {
                let sym = parse_symbol(tok).ok_or_else(|| ParseError {
                    line,
                    kind: ParseErrorKind::IllegalSymbol(tok.to_string()),
                })?;
                symbols.push(sym);
            }
            if symbols.is_empty() {
                return Err(ParseError {
                    line,
                    kind: ParseErrorKind::EmptyCell,
                });
            }
            if symbols.len() > max_cell_len {
                return Err(ParseError {
                    line,
                    kind: ParseErrorKind::CellTooLong {
                        len: symbols.len(),
                        max: max_cell_len,
                    },
                });
            }
            layer.push(Cell { symbols });
        }
        layers.push(layer);
    }
    Ok(Interstring { layers, max_cell_len })
}
