//! Propositions and the universe that interns them.

use std::collections::HashMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::symbolic::StateSet;

/// A grounded atom such as `Holding(apple)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Proposition {
    pub predicate: String,
    pub args: Vec<String>,
    pub index: usize,
}

impl fmt::Display for Proposition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "{}", self.predicate)
        } else {
            write!(f, "{}({})", self.predicate, self.args.join(","))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObjectInfo {
    pub name: String,
    pub description: Option<String>,
}

/// Error from [`parse_atom`]; `offset` is the byte offset inside the atom
/// text where the problem was found.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AtomError {
    pub offset: usize,
    pub message: String,
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

/// Parses `Predicate(arg1,arg2)` or a bare `Predicate`. No whitespace is
/// allowed anywhere inside an atom.
pub fn parse_atom(text: &str) -> std::result::Result<(String, Vec<String>), AtomError> {
    let err = |offset: usize, message: &str| AtomError {
        offset,
        message: message.to_string(),
    };
    let mut chars = text.char_indices().peekable();
    match chars.peek() {
        None => return Err(err(0, "empty atom")),
        Some(&(_, c)) if !is_ident_start(c) => {
            return Err(err(0, "atom must start with a letter or `_`"))
        }
        _ => {}
    }
    let mut pred_end = text.len();
    while let Some(&(i, c)) = chars.peek() {
        if c == '(' {
            pred_end = i;
            break;
        }
        if !is_ident_char(c) {
            return Err(err(i, &format!("unexpected character `{c}` in predicate")));
        }
        chars.next();
    }
    let predicate = text[..pred_end].to_string();
    if pred_end == text.len() {
        return Ok((predicate, Vec::new()));
    }
    chars.next(); // '('
    let mut args = Vec::new();
    let mut current = String::new();
    let mut arg_start = pred_end + 1;
    loop {
        match chars.next() {
            None => return Err(err(text.len(), "unbalanced `(`: missing `)`")),
            Some((i, ')')) => {
                if current.is_empty() {
                    if !args.is_empty() {
                        return Err(err(i, "empty argument"));
                    }
                } else {
                    args.push(std::mem::take(&mut current));
                }
                if let Some((j, _)) = chars.next() {
                    return Err(err(j, "trailing characters after `)`"));
                }
                return Ok((predicate, args));
            }
            Some((i, ',')) => {
                if current.is_empty() {
                    return Err(err(arg_start, "empty argument"));
                }
                args.push(std::mem::take(&mut current));
                arg_start = i + 1;
            }
            Some((_, c)) if is_ident_char(c) || c == '.' => current.push(c),
            Some((i, c)) => return Err(err(i, &format!("unexpected character `{c}` in arguments"))),
        }
    }
}

fn atom_key(predicate: &str, args: &[String]) -> String {
    if args.is_empty() {
        predicate.to_string()
    } else {
        format!("{}({})", predicate, args.join(","))
    }
}

/// The finite, immutable set of propositions a domain talks about.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DomainUniverse {
    props: Vec<Proposition>,
    lookup: HashMap<String, usize>,
    objects: Vec<ObjectInfo>,
}

impl DomainUniverse {
    pub fn new<I, S>(atoms: I, objects: Vec<ObjectInfo>) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut props = Vec::new();
        let mut lookup = HashMap::new();
        for atom in atoms {
            let atom = atom.as_ref();
            let (predicate, args) = parse_atom(atom).map_err(|e| {
                Error::domain(format!("bad atom `{atom}`: {}", e.message))
            })?;
            let key = atom_key(&predicate, &args);
            if lookup.contains_key(&key) {
                return Err(Error::domain(format!("duplicate proposition `{key}`")));
            }
            let index = props.len();
            lookup.insert(key, index);
            props.push(Proposition {
                predicate,
                args,
                index,
            });
        }
        if props.is_empty() {
            return Err(Error::domain("a universe needs at least one proposition"));
        }
        Ok(DomainUniverse {
            props,
            lookup,
            objects,
        })
    }

    /// Universe `p0 .. p{n-1}` for synthetic experiments.
    pub fn synthetic(n: usize) -> Self {
        Self::new((0..n).map(|i| format!("p{i}")), Vec::new())
            .expect("synthetic universe is well formed")
    }

    pub fn len(&self) -> usize {
        self.props.len()
    }

    pub fn is_empty(&self) -> bool {
        self.props.is_empty()
    }

    pub fn propositions(&self) -> &[Proposition] {
        &self.props
    }

    pub fn proposition(&self, index: usize) -> &Proposition {
        &self.props[index]
    }

    pub fn objects(&self) -> &[ObjectInfo] {
        &self.objects
    }

    pub fn index_of(&self, atom: &str) -> Option<usize> {
        if let Some(&i) = self.lookup.get(atom) {
            return Some(i);
        }
        // Accept `Pred()` as an alias for the bare form.
        let (p, a) = parse_atom(atom).ok()?;
        self.lookup.get(&atom_key(&p, &a)).copied()
    }

    pub fn empty_set(&self) -> StateSet {
        StateSet::empty(self.len())
    }

    pub fn full_set(&self) -> StateSet {
        StateSet::full(self.len())
    }

    pub fn set_of<I, S>(&self, atoms: I) -> Result<StateSet>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut s = self.empty_set();
        for atom in atoms {
            let atom = atom.as_ref();
            let i = self
                .index_of(atom)
                .ok_or_else(|| Error::domain(format!("unknown atom `{atom}`")))?;
            s.insert(i);
        }
        Ok(s)
    }

    pub fn atoms(&self, set: &StateSet) -> Vec<String> {
        set.iter().map(|i| self.props[i].to_string()).collect()
    }

    /// `{A, B}` rendering used in reports and tree text.
    pub fn render_set(&self, set: &StateSet) -> String {
        format!("{{{}}}", self.atoms(set).join(", "))
    }

    pub fn check(&self, set: &StateSet) -> Result<()> {
        if set.width() != self.len() {
            return Err(Error::domain(format!(
                "set of width {} used with a universe of {} propositions",
                set.width(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Objects mentioned as arguments of any atom in `set`.
    pub fn objects_of(&self, set: &StateSet) -> Vec<&str> {
        let mut out: Vec<&str> = set
            .iter()
            .flat_map(|i| self.props[i].args.iter().map(String::as_str))
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}
