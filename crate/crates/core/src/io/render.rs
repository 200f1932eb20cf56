//! Indented text form of behavior trees, and a Graphviz rendering.
//!
//! One node per line, two spaces of indent per level. `?` is a fallback,
//! `->` a sequence, `{A, B}` a condition, anything else an action id.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::symbolic::{BtNode, DomainUniverse};

pub fn render_bt(tree: &BtNode, universe: &DomainUniverse) -> String {
    let mut out = String::new();
    render_into(tree, universe, 0, &mut out);
    out
}

fn render_into(node: &BtNode, universe: &DomainUniverse, depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
    match node {
        BtNode::Condition(c) => out.push_str(&universe.render_set(c)),
        BtNode::Action(id) => out.push_str(id),
        BtNode::Sequence(_) => out.push_str("->"),
        BtNode::Fallback(_) => out.push('?'),
    }
    out.push('\n');
    for child in node.children() {
        render_into(child, universe, depth + 1, out);
    }
}

fn parse_condition(text: &str, universe: &DomainUniverse, line: usize, column: usize) -> Result<BtNode> {
    let inner = text
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| Error::parse(line, column, "condition must be `{...}`"))?;
    let mut set = universe.empty_set();
    let mut offset = 1;
    for part in top_level_parts(inner) {
        let lead = part.len() - part.trim_start().len();
        let atom = part.trim();
        if !atom.is_empty() {
            let i = universe
                .index_of(atom)
                .ok_or_else(|| Error::parse(line, column + offset + lead, format!("unknown atom `{atom}`")))?;
            set.insert(i);
        } else if inner.trim().is_empty() {
            break;
        } else {
            return Err(Error::parse(line, column + offset, "empty atom in condition"));
        }
        offset += part.len() + 1;
    }
    Ok(BtNode::Condition(set))
}

/// Splits at commas outside parentheses.
fn top_level_parts(text: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

/// Inverse of [`render_bt`].
pub fn parse_bt(text: &str, universe: &DomainUniverse) -> Result<BtNode> {
    // (depth, node, line) in document order
    let mut items: Vec<(usize, BtNode, usize)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let indent = raw.len() - raw.trim_start_matches(' ').len();
        if raw[indent..].starts_with('\t') {
            return Err(Error::parse(line, indent + 1, "tabs are not allowed in tree indentation"));
        }
        if indent % 2 != 0 {
            return Err(Error::parse(line, indent + 1, "indentation must be a multiple of two spaces"));
        }
        let body = raw.trim();
        let node = match body {
            "?" => BtNode::Fallback(Vec::new()),
            "->" => BtNode::Sequence(Vec::new()),
            b if b.starts_with('{') => parse_condition(b, universe, line, indent + 1)?,
            b if b.chars().any(char::is_whitespace) => {
                return Err(Error::parse(line, indent + 1, "action ids cannot contain spaces"))
            }
            b => BtNode::Action(b.to_string()),
        };
        items.push((indent / 2, node, line));
    }
    let Some(&(root_depth, _, root_line)) = items.first() else {
        return Err(Error::parse(1, 1, "empty tree"));
    };
    if root_depth != 0 {
        return Err(Error::parse(root_line, 1, "root must not be indented"));
    }
    let mut pos = 0;
    let root = build(&items, &mut pos, 0)?;
    if let Some(&(_, _, line)) = items.get(pos) {
        return Err(Error::parse(line, 1, "more than one root"));
    }
    if !root.is_well_formed() {
        return Err(Error::parse(root_line, 1, "control node without children"));
    }
    Ok(root)
}

fn build(items: &[(usize, BtNode, usize)], pos: &mut usize, depth: usize) -> Result<BtNode> {
    let (_, node, line) = &items[*pos];
    *pos += 1;
    let mut node = node.clone();
    while let Some((d, _, child_line)) = items.get(*pos) {
        if *d <= depth {
            break;
        }
        if *d > depth + 1 {
            return Err(Error::parse(*child_line, 1, "indentation skips a level"));
        }
        let child = build(items, pos, depth + 1)?;
        match &mut node {
            BtNode::Sequence(c) | BtNode::Fallback(c) => c.push(child),
            _ => return Err(Error::parse(*line, 1, "only `?` and `->` nodes can have children")),
        }
    }
    Ok(node)
}

/// Graphviz digraph of the tree.
pub fn render_dot(tree: &BtNode, universe: &DomainUniverse) -> String {
    let mut out = String::from("digraph bt {\n  node [fontname=\"monospace\"];\n");
    let mut next = 0usize;
    dot_node(tree, universe, &mut next, &mut out);
    out.push_str("}\n");
    out
}

fn dot_node(node: &BtNode, universe: &DomainUniverse, next: &mut usize, out: &mut String) -> usize {
    let id = *next;
    *next += 1;
    let (label, shape) = match node {
        BtNode::Condition(c) => (universe.render_set(c), "ellipse"),
        BtNode::Action(a) => (a.clone(), "box"),
        BtNode::Sequence(_) => ("->".to_string(), "square"),
        BtNode::Fallback(_) => ("?".to_string(), "square"),
    };
    let label = label.replace('\\', "\\\\").replace('"', "\\\"");
    let _ = writeln!(out, "  n{id} [label=\"{label}\", shape={shape}];");
    for child in node.children() {
        let c = dot_node(child, universe, next, out);
        let _ = writeln!(out, "  n{id} -> n{c};");
    }
    id
}
