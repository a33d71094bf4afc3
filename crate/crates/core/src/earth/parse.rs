use crate::machine::{parse_uint, strip_comment, Geometry, Opcode};

use super::ast::{Item, ItemKind, Macro, Operand, Program};
use super::{AsmError, AsmErrorKind};

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn syntax(line: usize, msg: impl Into<String>) -> AsmError {
    AsmError::new(line, AsmErrorKind::Syntax(msg.into()))
}

fn parse_operand(tok: &str, line: usize) -> Result<Operand, AsmError> {
    let tok = tok.trim();
    if tok.chars().next().is_some_and(|c| c.is_ascii_digit()) {
        return parse_uint(tok)
            .map(Operand::Int)
            .map_err(|_| syntax(line, format!("bad number `{tok}`")));
    }
    let (name, offset) = match tok.split_once('+') {
        Some((name, off)) => (
            name.trim(),
            parse_uint(off.trim()).map_err(|_| syntax(line, format!("bad offset in `{tok}`")))?,
        ),
        None => (tok, 0),
    };
    if !is_ident(name) {
        return Err(syntax(line, format!("bad operand `{tok}`")));
    }
    Ok(Operand::Sym {
        name: name.to_string(),
        offset,
    })
}

fn parse_bit_ref(tok: &str, line: usize) -> Result<(Operand, Operand), AsmError> {
    let (a, b) = tok
        .rsplit_once('.')
        .ok_or_else(|| syntax(line, format!("expected `<reg>.<bit>`, got `{tok}`")))?;
    Ok((parse_operand(a, line)?, parse_operand(b, line)?))
}

/// Parses the call syntax `name(a, b, ...)`.
fn parse_call(text: &str, line: usize) -> Result<(String, Vec<String>), AsmError> {
    let (name, rest) = text
        .split_once('(')
        .ok_or_else(|| syntax(line, format!("expected `name(...)`, got `{text}`")))?;
    let inner = rest
        .trim_end()
        .strip_suffix(')')
        .ok_or_else(|| syntax(line, "missing `)`"))?;
    let name = name.trim();
    if !is_ident(name) {
        return Err(syntax(line, format!("bad name `{name}`")));
    }
    let args = if inner.trim().is_empty() {
        Vec::new()
    } else {
        inner.split(',').map(|s| s.trim().to_string()).collect()
    };
    Ok((name.to_string(), args))
}

/// Parses one statement (labels already removed).
fn parse_statement(text: &str, line: usize, geometry: &mut Option<Geometry>) -> Result<Vec<ItemKind>, AsmError> {
    let mut words = text.split_whitespace();
    let head = words.next().unwrap_or_default();
    let rest: Vec<&str> = words.collect();
    let item = match head {
        "wr0" | "wr1" | "cnd" => {
            let [ab] = rest.as_slice() else {
                return Err(syntax(line, format!("`{head}` takes one `<reg>.<bit>` operand")));
            };
            let (a, b) = parse_bit_ref(ab, line)?;
            ItemKind::Instr {
                opcode: Opcode::from_mnemonic(head).unwrap(),
                a,
                b,
            }
        }
        "jmp" => {
            let [t, o] = rest.as_slice() else {
                return Err(syntax(line, "`jmp` takes a target and an offset"));
            };
            ItemKind::Instr {
                opcode: Opcode::Jmp,
                a: parse_operand(t, line)?,
                b: parse_operand(o, line)?,
            }
        }
        "halt" => {
            if !rest.is_empty() {
                return Err(syntax(line, "`halt` takes no operands"));
            }
            ItemKind::Instr {
                opcode: Opcode::Jmp,
                a: Operand::Int(0),
                b: Operand::Int(0),
            }
        }
        "data" => {
            let [v] = rest.as_slice() else {
                return Err(syntax(line, "`data` takes one value"));
            };
            ItemKind::Data(parse_operand(v, line)?)
        }
        "at" => {
            let [v] = rest.as_slice() else {
                return Err(syntax(line, "`at` takes one register index"));
            };
            ItemKind::At(parse_uint(v).map_err(|_| syntax(line, format!("bad index `{v}`")))? as usize)
        }
        "entry" => {
            if rest.is_empty() {
                return Err(syntax(line, "`entry` needs at least one label"));
            }
            ItemKind::Entry(rest.iter().map(|t| parse_operand(t, line)).collect::<Result<_, _>>()?)
        }
        "const" => {
            let body = text["const".len()..].trim();
            let (name, value) = body
                .split_once('=')
                .ok_or_else(|| syntax(line, "expected `const NAME = <int>`"))?;
            let name = name.trim();
            if !is_ident(name) {
                return Err(syntax(line, format!("bad const name `{name}`")));
            }
            let value = parse_uint(value.trim()).map_err(|_| syntax(line, "const value must be an integer"))?;
            ItemKind::Const {
                name: name.to_string(),
                value,
            }
        }
        "use" => {
            let (name, args) = parse_call(text["use".len()..].trim(), line)?;
            let args = args.iter().map(|a| parse_operand(a, line)).collect::<Result<_, _>>()?;
            ItemKind::Use { name, args }
        }
        "reg" => {
            // Image-format line: pins placement, then defines the register.
            let (idx, def) = text["reg".len()..]
                .split_once('=')
                .ok_or_else(|| syntax(line, "expected `reg <idx> = ...`"))?;
            let idx = parse_uint(idx.trim()).map_err(|_| syntax(line, "bad register index"))? as usize;
            let mut items = vec![ItemKind::At(idx)];
            items.extend(parse_statement(def.trim(), line, geometry)?);
            return Ok(items);
        }
        "config" => {
            let mut n = None;
            let mut w = None;
            for tok in &rest {
                match tok.split_once('=') {
                    Some(("n", v)) => n = parse_uint(v).ok().map(|v| v as usize),
                    Some(("w", v)) => w = parse_uint(v).ok().map(|v| v as u32),
                    _ => return Err(syntax(line, format!("bad config field `{tok}`"))),
                }
            }
            let (Some(n), Some(w)) = (n, w) else {
                return Err(syntax(line, "config needs n=<int> w=<int>"));
            };
            *geometry = Some(Geometry::new(n, w).map_err(|e| AsmError::new(line, AsmErrorKind::Config(e)))?);
            return Ok(Vec::new());
        }
        other => return Err(syntax(line, format!("unknown statement `{other}`"))),
    };
    Ok(vec![item])
}

/// Splits leading `label:` prefixes off a line.
fn split_labels(mut text: &str) -> (Vec<String>, &str) {
    let mut labels = Vec::new();
    while let Some((head, tail)) = text.split_once(':') {
        if !is_ident(head.trim_end()) {
            break;
        }
        labels.push(head.trim_end().to_string());
        text = tail.trim_start();
    }
    (labels, text)
}

pub fn parse_program(source: &str) -> Result<Program, AsmError> {
    let mut program = Program::default();
    let mut open_macro: Option<Macro> = None;
    for (i, raw) in source.lines().enumerate() {
        let line = i + 1;
        let text = strip_comment(raw).trim();
        if text.is_empty() {
            continue;
        }
        if text == "}" {
            let m = open_macro.take().ok_or_else(|| syntax(line, "unmatched `}`"))?;
            if program.macros.contains_key(&m.name) {
                return Err(AsmError::new(m.line, AsmErrorKind::DuplicateMacro(m.name)));
            }
            program.macros.insert(m.name.clone(), m);
            continue;
        }
        if let Some(head) = text.strip_prefix("macro ") {
            if open_macro.is_some() {
                return Err(syntax(line, "macro definitions cannot nest"));
            }
            let head = head
                .trim_end()
                .strip_suffix('{')
                .ok_or_else(|| syntax(line, "expected `{` after the macro header"))?;
            let (name, params) = parse_call(head.trim(), line)?;
            for p in &params {
                if !is_ident(p) {
                    return Err(syntax(line, format!("bad macro parameter `{p}`")));
                }
            }
            open_macro = Some(Macro {
                name,
                params,
                body: Vec::new(),
                line,
            });
            continue;
        }
        let (labels, rest) = split_labels(text);
        let mut items: Vec<ItemKind> = labels.into_iter().map(ItemKind::Label).collect();
        if !rest.is_empty() {
            items.extend(parse_statement(rest, line, &mut program.geometry)?);
        }
        let target = match open_macro.as_mut() {
            Some(m) => {
                if let Some(bad) = items.iter().find(|k| {
                    matches!(k, ItemKind::At(_) | ItemKind::Entry(_) | ItemKind::Const { .. })
                }) {
                    let what = match bad {
                        ItemKind::At(_) => "at/reg",
                        ItemKind::Entry(_) => "entry",
                        _ => "const",
                    };
                    return Err(AsmError::new(line, AsmErrorKind::NotAllowedInMacro(what.into())));
                }
                &mut m.body
            }
            None => &mut program.items,
        };
        target.extend(items.into_iter().map(|kind| Item { line, kind }));
    }
    if let Some(m) = open_macro {
        return Err(syntax(m.line, format!("macro `{}` is never closed", m.name)));
    }
    Ok(program)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_labels_and_statements() {
        let p = parse_program("entry main\nmain: wr1 flag.0\nhalt\nflag: data 0").unwrap();
        let kinds: Vec<_> = p.items.iter().map(|i| i.kind.clone()).collect();
        assert_eq!(kinds[0], ItemKind::Entry(vec![Operand::sym("main")]));
        assert_eq!(kinds[1], ItemKind::Label("main".into()));
        assert_eq!(
            kinds[2],
            ItemKind::Instr {
                opcode: Opcode::Wr1,
                a: Operand::sym("flag"),
                b: Operand::Int(0)
            }
        );
        assert_eq!(kinds[5], ItemKind::Data(Operand::Int(0)));
    }

    #[test]
    fn parses_macro_definition_and_use() {
        let p = parse_program("macro set(r) {\n  wr1 r.0\n}\nuse set(x+1)\n").unwrap();
        assert_eq!(p.macros["set"].params, vec!["r".to_string()]);
        assert_eq!(
            p.items[0].kind,
            ItemKind::Use {
                name: "set".into(),
                args: vec![Operand::Sym {
                    name: "x".into(),
                    offset: 1
                }]
            }
        );
    }

    #[test]
    fn image_lines_are_accepted() {
        let p = parse_program("config n=16 w=16\nentry 1\nreg 3 = wr1 2.0").unwrap();
        assert_eq!(p.geometry, Some(Geometry::new(16, 16).unwrap()));
        assert_eq!(p.items[1].kind, ItemKind::At(3));
    }

    #[test]
    fn syntax_errors_carry_lines() {
        assert_eq!(parse_program("halt\nwr1 x").unwrap_err().line, 2);
        assert_eq!(parse_program("jmp 1").unwrap_err().line, 1);
        assert!(matches!(
            parse_program("macro m() {\nentry x\n}").unwrap_err().kind,
            AsmErrorKind::NotAllowedInMacro(_)
        ));
        assert!(parse_program("macro m() {\nhalt").is_err());
    }
}
