//! Line lexer shared by the sectioned text formats.
//!
//! A file is a list of blocks. A block starts at an unindented header line
//! and owns the indented lines below it. `#` starts a comment only at the
//! beginning of a line.

use crate::error::{Error, Result};
use crate::symbolic::{parse_atom, DomainUniverse, StateSet};

#[derive(Clone, Copy, Debug)]
pub(crate) struct Line<'a> {
    pub no: usize,
    /// 1-based column of the first character of `text`.
    pub col: usize,
    pub text: &'a str,
}

impl<'a> Line<'a> {
    pub fn err(&self, offset: usize, msg: impl Into<String>) -> Error {
        Error::parse(self.no, self.col + offset, msg)
    }

    /// Splits `key: value`. The value's column is returned with it.
    pub fn key_value(&self) -> Result<(&'a str, Field<'a>)> {
        let colon = self.text.find(':').ok_or_else(|| self.err(0, "expected `key: value`"))?;
        let key = self.text[..colon].trim_end();
        let rest = &self.text[colon + 1..];
        let lead = rest.len() - rest.trim_start().len();
        Ok((
            key,
            Field {
                no: self.no,
                col: self.col + colon + 1 + lead,
                text: rest.trim(),
            },
        ))
    }
}

pub(crate) type Field<'a> = Line<'a>;

pub(crate) struct Block<'a> {
    pub header: Line<'a>,
    pub body: Vec<Line<'a>>,
}

pub(crate) fn blocks(text: &str) -> Result<Vec<Block<'_>>> {
    let mut out: Vec<Block<'_>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let indent = raw.len() - trimmed.len();
        let line = Line {
            no: i + 1,
            col: indent + 1,
            text: trimmed.trim_end(),
        };
        if indent == 0 {
            out.push(Block {
                header: line,
                body: Vec::new(),
            });
        } else {
            match out.last_mut() {
                Some(b) => b.body.push(line),
                None => return Err(line.err(0, "indented line outside any section")),
            }
        }
    }
    Ok(out)
}

/// Whitespace-separated tokens with their byte offsets.
pub(crate) fn tokens(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.split_whitespace()
        .map(move |t| (t.as_ptr() as usize - text.as_ptr() as usize, t))
}

/// Checks the atom grammar of `token` found at `offset` inside `field`.
pub(crate) fn check_atom(field: &Field<'_>, offset: usize, token: &str) -> Result<()> {
    parse_atom(token)
        .map(|_| ())
        .map_err(|e| field.err(offset + e.offset, format!("bad atom `{token}`: {}", e.message)))
}

/// A whitespace-separated atom list resolved against `universe`.
pub(crate) fn atom_set(field: &Field<'_>, universe: &DomainUniverse) -> Result<StateSet> {
    let mut set = universe.empty_set();
    for (offset, token) in tokens(field.text) {
        check_atom(field, offset, token)?;
        let i = universe
            .index_of(token)
            .ok_or_else(|| field.err(offset, format!("unknown atom `{token}`")))?;
        set.insert(i);
    }
    Ok(set)
}

pub(crate) fn parse_bool(field: &Field<'_>) -> Result<bool> {
    match field.text {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(field.err(0, "expected `true` or `false`")),
    }
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

/// Atoms of `set` in index order, space separated.
pub(crate) fn atom_list(universe: &DomainUniverse, set: &StateSet) -> String {
    universe.atoms(set).join(" ")
}

/// Reads a whole file; the error names the path.
pub(crate) fn read_file(path: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blocks_group_indented_lines() {
        let text = "# comment\nfirst\n  a: 1\n\n  b:   two words\nsecond\n";
        let b = blocks(text).unwrap();
        assert_eq!(b.len(), 2);
        assert_eq!((b[0].header.no, b[0].header.text), (2, "first"));
        assert_eq!(b[0].body.len(), 2);
        let (key, value) = b[0].body[1].key_value().unwrap();
        assert_eq!((key, value.text, value.no, value.col), ("b", "two words", 5, 8));
        assert!(b[1].body.is_empty());
    }

    #[test]
    fn stray_indentation_is_located() {
        let Err(Error::Parse { line, column, .. }) = blocks("\n   orphan\n") else {
            panic!("expected a parse error");
        };
        assert_eq!((line, column), (2, 4));
    }

    #[test]
    fn atom_lists_resolve_with_columns() {
        let u = DomainUniverse::new(["On(a,b)", "Clear(a)"], Vec::new()).unwrap();
        let b = blocks("x\n  pre: Clear(a)  On(a,b)\n  add: On(a,c)\n").unwrap();
        let (_, pre) = b[0].body[0].key_value().unwrap();
        assert_eq!(atom_set(&pre, &u).unwrap(), u.set_of(["On(a,b)", "Clear(a)"]).unwrap());
        let (_, add) = b[0].body[1].key_value().unwrap();
        let Err(Error::Parse { line, column, .. }) = atom_set(&add, &u) else {
            panic!("expected a parse error");
        };
        assert_eq!((line, column), (3, 8));
        assert_eq!(tokens(" a  bc").collect::<Vec<_>>(), vec![(1, "a"), (4, "bc")]);
    }
}
