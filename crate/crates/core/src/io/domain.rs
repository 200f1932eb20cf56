//! Domain files.
//!
//! ```text
//! domain drawer
//!
//! objects:
//!   apple: a red apple
//!   drawer
//!
//! propositions:
//!   IsOpen(drawer)
//!   Holding(apple)
//!
//! mutex:
//!   Holding(apple) HandEmpty
//!
//! rules:
//!   add_pre_disjoint: true
//!   del_subset_pre: true
//!   explicit_models: false
//!
//! env:
//!   fill_prob: 0.5
//!   check: literal
//!
//! policy open_drawer:
//!   description: pull the drawer handle
//!   pre: HandEmpty
//!   add: IsOpen(drawer)
//!   del:
//!   duration: 1
//!   failure_prob: 0
//!
//! model open:
//!   pre: HandEmpty
//!   add: IsOpen(drawer)
//!   del:
//! ```
//!
//! Atom lists are whitespace separated. Declared models form the model
//! space only when `explicit_models` is true; otherwise they are kept as
//! reference models.

use std::fmt::Write as _;
use std::path::Path;

use crate::env::{CheckMode, ControlPolicy, EnvConfig, PolicyLibrary, SimEnv};
use crate::error::{Error, Result};
use crate::grounding::{GroundingProblem, ModelSpace};
use crate::io::text::{atom_list, atom_set, blocks, check_atom, is_ident, parse_bool, tokens, read_file, Block, Line};
use crate::planner::Task;
use crate::symbolic::{ActionModel, DomainUniverse, ObjectInfo, StateSet, ValidityRules};

#[derive(Clone, Debug, PartialEq)]
pub struct DomainFile {
    pub name: String,
    pub universe: DomainUniverse,
    /// Mutex groups live in `rules.mutex_groups`.
    pub rules: ValidityRules,
    pub explicit_models: bool,
    pub env: EnvConfig,
    pub policies: Vec<ControlPolicy>,
    pub models: Vec<ActionModel>,
}

impl DomainFile {
    pub fn parse(text: &str) -> Result<Self> {
        parse_domain(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = read_file(path)?;
        parse_domain(&text).map_err(|e| with_path(e, path))
    }

    pub fn space(&self) -> Result<ModelSpace> {
        let n = self.universe.len();
        if self.explicit_models {
            ModelSpace::explicit(n, self.rules.clone(), self.models.clone())
        } else {
            Ok(ModelSpace::intensional(n, self.rules.clone()))
        }
    }

    pub fn library(&self) -> Result<PolicyLibrary> {
        PolicyLibrary::new(self.policies.clone())
    }

    pub fn sim_env(&self) -> Result<SimEnv> {
        SimEnv::new(
            self.universe.len(),
            self.rules.mutex_groups.clone(),
            self.library()?,
            self.env,
        )
    }

    pub fn problem(&self, tasks: Vec<Task>) -> Result<GroundingProblem> {
        GroundingProblem::new(self.universe.clone(), tasks, self.space()?, self.sim_env()?)
    }

    pub fn model(&self, name: &str) -> Option<&ActionModel> {
        self.models.iter().find(|m| m.name == name)
    }

    /// Canonical text: fixed section order, atoms in index order.
    pub fn to_text(&self) -> String {
        let u = &self.universe;
        let mut out = String::new();
        let _ = writeln!(out, "domain {}", self.name);
        if !u.objects().is_empty() {
            out.push_str("\nobjects:\n");
            for o in u.objects() {
                match &o.description {
                    Some(d) => {
                        let _ = writeln!(out, "  {}: {d}", o.name);
                    }
                    None => {
                        let _ = writeln!(out, "  {}", o.name);
                    }
                }
            }
        }
        out.push_str("\npropositions:\n");
        for p in u.propositions() {
            let _ = writeln!(out, "  {p}");
        }
        if !self.rules.mutex_groups.is_empty() {
            out.push_str("\nmutex:\n");
            for g in &self.rules.mutex_groups {
                let _ = writeln!(out, "  {}", atom_list(u, g));
            }
        }
        let _ = write!(
            out,
            "\nrules:\n  add_pre_disjoint: {}\n  del_subset_pre: {}\n  explicit_models: {}\n",
            self.rules.add_pre_disjoint, self.rules.del_subset_pre, self.explicit_models
        );
        let mode = match self.env.mode {
            CheckMode::Literal => "literal",
            CheckMode::Strict => "strict",
        };
        let _ = write!(out, "\nenv:\n  fill_prob: {}\n  check: {mode}\n", self.env.fill_prob);
        for p in &self.policies {
            let h = p.hidden();
            let _ = writeln!(out, "\npolicy {}:", p.id);
            if !p.description.is_empty() {
                let _ = writeln!(out, "  description: {}", p.description);
            }
            write_triple(&mut out, u, &h.pre, &h.add, &h.del);
            let _ = writeln!(out, "  duration: {}", p.duration_ticks);
            let _ = writeln!(out, "  failure_prob: {}", p.failure_prob);
            let (fa, fd) = p.failure_effect();
            if !fa.is_empty() {
                let _ = writeln!(out, "  failure_add: {}", atom_list(u, fa));
            }
            if !fd.is_empty() {
                let _ = writeln!(out, "  failure_del: {}", atom_list(u, fd));
            }
        }
        for m in &self.models {
            let _ = writeln!(out, "\nmodel {}:", m.name);
            write_triple(&mut out, u, &m.pre, &m.add, &m.del);
        }
        out
    }
}

fn write_triple(out: &mut String, u: &DomainUniverse, pre: &StateSet, add: &StateSet, del: &StateSet) {
    for (key, set) in [("pre", pre), ("add", add), ("del", del)] {
        let list = atom_list(u, set);
        if list.is_empty() {
            let _ = writeln!(out, "  {key}:");
        } else {
            let _ = writeln!(out, "  {key}: {list}");
        }
    }
}

pub(crate) fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Parse {
            line, column, message, ..
        } => Error::Parse {
            file: Some(path.display().to_string()),
            line,
            column,
            message,
        },
        other => other,
    }
}

/// `<keyword> <name>:` headers; returns the name.
fn named_header<'a>(h: &Line<'a>, keyword: &str) -> Result<&'a str> {
    let rest = &h.text[keyword.len()..];
    let name = rest
        .trim()
        .strip_suffix(':')
        .ok_or_else(|| h.err(h.text.len(), "section header must end with `:`"))?
        .trim_end();
    if name.is_empty() || name.chars().any(char::is_whitespace) || matches!(name, "?" | "->") || name.starts_with('{')
    {
        return Err(h.err(keyword.len() + 1, format!("bad {keyword} name `{name}`")));
    }
    Ok(name)
}

fn expect_empty_header(h: &Line<'_>, section: &str) -> Result<()> {
    if h.text != format!("{section}:") {
        return Err(h.err(0, format!("expected `{section}:`")));
    }
    Ok(())
}

pub fn parse_domain(text: &str) -> Result<DomainFile> {
    let blocks = blocks(text)?;
    let first = blocks.first().ok_or_else(|| Error::parse(1, 1, "empty domain file"))?;
    let name = first
        .header
        .text
        .strip_prefix("domain ")
        .map(str::trim)
        .filter(|n| is_ident(n))
        .ok_or_else(|| first.header.err(0, "expected `domain <name>`"))?
        .to_string();
    if !first.body.is_empty() {
        return Err(first.body[0].err(0, "unexpected indented line after the domain header"));
    }
    let find = |section: &'static str| {
        blocks
            .iter()
            .filter(move |b| b.header.text.split(':').next() == Some(section))
    };

    let mut objects = Vec::new();
    for b in find("objects") {
        expect_empty_header(&b.header, "objects")?;
        for l in &b.body {
            let (obj, desc) = match l.text.find(':') {
                Some(i) => (l.text[..i].trim_end(), Some(l.text[i + 1..].trim().to_string())),
                None => (l.text, None),
            };
            if !is_ident(obj) {
                return Err(l.err(0, format!("bad object name `{obj}`")));
            }
            if objects.iter().any(|o: &ObjectInfo| o.name == obj) {
                return Err(l.err(0, format!("duplicate object `{obj}`")));
            }
            objects.push(ObjectInfo {
                name: obj.to_string(),
                description: desc.filter(|d| !d.is_empty()),
            });
        }
    }

    let mut atoms: Vec<&str> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    let mut props_header = None;
    for b in find("propositions") {
        expect_empty_header(&b.header, "propositions")?;
        props_header.get_or_insert(b.header);
        for l in &b.body {
            for (offset, token) in tokens(l.text) {
                check_atom(l, offset, token)?;
                if !seen.insert(token) {
                    return Err(l.err(offset, format!("duplicate proposition `{token}`")));
                }
                atoms.push(token);
            }
        }
    }
    let Some(props_header) = props_header else {
        return Err(first.header.err(0, "domain declares no `propositions:` section"));
    };
    if atoms.is_empty() {
        return Err(props_header.err(0, "a domain needs at least one proposition"));
    }
    let universe = DomainUniverse::new(&atoms, objects).map_err(|e| props_header.err(0, e.to_string()))?;

    let mut rules = ValidityRules::default();
    let mut explicit_models = false;
    for b in find("mutex") {
        expect_empty_header(&b.header, "mutex")?;
        for l in &b.body {
            let g = atom_set(l, &universe)?;
            if g.len() < 2 {
                return Err(l.err(0, "a mutex group needs at least two atoms"));
            }
            rules.mutex_groups.push(g);
        }
    }
    for b in find("rules") {
        expect_empty_header(&b.header, "rules")?;
        for l in &b.body {
            let (key, v) = l.key_value()?;
            match key {
                "add_pre_disjoint" => rules.add_pre_disjoint = parse_bool(&v)?,
                "del_subset_pre" => rules.del_subset_pre = parse_bool(&v)?,
                "explicit_models" => explicit_models = parse_bool(&v)?,
                _ => return Err(l.err(0, format!("unknown rule `{key}`"))),
            }
        }
    }
    let mut env = EnvConfig::default();
    for b in find("env") {
        expect_empty_header(&b.header, "env")?;
        for l in &b.body {
            let (key, v) = l.key_value()?;
            match key {
                "fill_prob" => {
                    env.fill_prob = v
                        .text
                        .parse::<f64>()
                        .ok()
                        .filter(|p| (0.0..=1.0).contains(p))
                        .ok_or_else(|| v.err(0, "fill_prob must be a number in [0, 1]"))?
                }
                "check" => {
                    env.mode = match v.text {
                        "literal" => CheckMode::Literal,
                        "strict" => CheckMode::Strict,
                        _ => return Err(v.err(0, "check must be `literal` or `strict`")),
                    }
                }
                _ => return Err(l.err(0, format!("unknown env setting `{key}`"))),
            }
        }
    }

    let mut policies: Vec<ControlPolicy> = Vec::new();
    let mut models: Vec<ActionModel> = Vec::new();
    for b in &blocks[1..] {
        let h = &b.header;
        let keyword = h.text.split([' ', ':']).next().unwrap_or("");
        match keyword {
            "objects" | "propositions" | "mutex" | "rules" | "env" => {}
            "policy" => {
                let id = named_header(h, "policy")?;
                if policies.iter().any(|p| p.id == id) {
                    return Err(h.err(7, format!("duplicate policy `{id}`")));
                }
                policies.push(parse_policy(b, id, &universe)?);
            }
            "model" => {
                let id = named_header(h, "model")?;
                if models.iter().any(|m| m.name == id) {
                    return Err(h.err(6, format!("duplicate model `{id}`")));
                }
                let t = parse_triple(b, &universe, &[])?;
                models.push(ActionModel::new(id, t.pre, t.add, t.del));
            }
            _ => return Err(h.err(0, format!("unknown section `{keyword}`"))),
        }
    }

    Ok(DomainFile {
        name,
        universe,
        rules,
        explicit_models,
        env,
        policies,
        models,
    })
}

struct Triple<'a> {
    pre: StateSet,
    add: StateSet,
    del: StateSet,
    /// Lines of keys outside pre/add/del.
    extra: Vec<(&'a str, Line<'a>)>,
}

fn parse_triple<'a>(b: &Block<'a>, u: &DomainUniverse, extra_keys: &[&str]) -> Result<Triple<'a>> {
    let mut t = Triple {
        pre: u.empty_set(),
        add: u.empty_set(),
        del: u.empty_set(),
        extra: Vec::new(),
    };
    let mut seen: Vec<&str> = Vec::new();
    let mut del_line = None;
    for l in &b.body {
        let (key, v) = l.key_value()?;
        if seen.contains(&key) {
            return Err(l.err(0, format!("`{key}` given twice")));
        }
        seen.push(key);
        match key {
            "pre" => t.pre = atom_set(&v, u)?,
            "add" => t.add = atom_set(&v, u)?,
            "del" => {
                t.del = atom_set(&v, u)?;
                del_line = Some(v);
            }
            k if extra_keys.contains(&k) => t.extra.push((k, v)),
            _ => return Err(l.err(0, format!("unknown key `{key}`"))),
        }
    }
    if t.add.intersects(&t.del) {
        let both = t.add.intersection(&t.del);
        let first = u.atoms(&both).remove(0);
        let at = del_line.expect("del is nonempty");
        let offset = tokens(at.text).find(|(_, tok)| *tok == first).map_or(0, |(o, _)| o);
        return Err(at.err(offset, format!("`{first}` is both added and deleted")));
    }
    Ok(t)
}

fn parse_policy(b: &Block<'_>, id: &str, u: &DomainUniverse) -> Result<ControlPolicy> {
    let t = parse_triple(
        b,
        u,
        &["description", "duration", "failure_prob", "failure_add", "failure_del"],
    )?;
    let mut description = String::new();
    let mut duration = 1u32;
    let mut failure_prob = 0.0;
    let mut fail_add = u.empty_set();
    let mut fail_del = u.empty_set();
    let mut fail_line = None;
    for (key, v) in &t.extra {
        match *key {
            "description" => description = v.text.to_string(),
            "duration" => {
                duration = v
                    .text
                    .parse()
                    .ok()
                    .filter(|d| *d > 0)
                    .ok_or_else(|| v.err(0, "duration must be a positive integer"))?
            }
            "failure_prob" => {
                failure_prob = v
                    .text
                    .parse::<f64>()
                    .ok()
                    .filter(|p| (0.0..=1.0).contains(p))
                    .ok_or_else(|| v.err(0, "failure_prob must be a number in [0, 1]"))?
            }
            "failure_add" => fail_add = atom_set(v, u)?,
            "failure_del" => {
                fail_del = atom_set(v, u)?;
                fail_line = Some(*v);
            }
            _ => unreachable!("filtered by parse_triple"),
        }
    }
    if fail_add.intersects(&fail_del) {
        let at = fail_line.expect("failure_del is nonempty");
        return Err(at.err(0, "failure effect adds and deletes the same atom"));
    }
    let h = &b.header;
    ControlPolicy::new(id, description, t.pre, t.add, t.del)
        .and_then(|p| p.with_duration(duration))
        .and_then(|p| p.with_failure(failure_prob, fail_add, fail_del))
        .map_err(|e| h.err(0, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const DRAWER: &str = "\
domain drawer

objects:
  apple: a red apple
  drawer

propositions:
  IsOpen(drawer)
  Holding(apple)
  In(apple,drawer)
  HandEmpty

mutex:
  Holding(apple) HandEmpty

policy put_in:
  description: put the held object in the drawer
  pre: IsOpen(drawer) Holding(apple)
  add: In(apple,drawer) HandEmpty
  del: Holding(apple)
";

    #[test]
    fn parses_the_drawer_example() {
        let d = parse_domain(DRAWER).unwrap();
        assert_eq!(d.universe.len(), 4);
        assert_eq!(d.universe.index_of("IsOpen(drawer)"), Some(0));
        assert_eq!(d.universe.index_of("In(apple,drawer)"), Some(2));
        assert_eq!(d.policies.len(), 1);
        assert_eq!(d.rules.mutex_groups.len(), 1);
        assert!(d.rules.add_pre_disjoint && d.rules.del_subset_pre);
    }

    #[test]
    fn canonical_text_round_trips() {
        let d = parse_domain(DRAWER).unwrap();
        let text = d.to_text();
        let again = parse_domain(&text).unwrap();
        assert_eq!(d, again);
        assert_eq!(text, again.to_text());
    }

    #[test]
    fn no_policies_is_fine() {
        let d = parse_domain("domain t\npropositions:\n  p\n").unwrap();
        assert!(d.policies.is_empty());
    }

    #[test]
    fn unbalanced_atom_reports_its_column() {
        let err = parse_domain("domain t\npropositions:\n  p Holding(apple\n").unwrap_err();
        match err {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (3, 5 + "Holding(apple".len())),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn located_errors() {
        let cases = [
            ("domain t\npropositions:\n  p\n  p\n", (4, 3)),
            ("domain t\npropositions:\n  p q\nmutex:\n  p r\n", (5, 5)),
            ("domain t\npropositions:\n  p q\npolicy a:\n  add: p q\n  del: q\n", (6, 8)),
            ("domain t\npropositions:\n  p\nmodel m:\n  add: p\n  del: p\n", (6, 8)),
            ("domain t\npropositions:\n  p\nbogus:\n", (4, 1)),
        ];
        for (text, at) in cases {
            match parse_domain(text) {
                Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), at, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }
}
