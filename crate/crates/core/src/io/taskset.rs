//! Task-set files.
//!
//! ```text
//! tasks drawer-tasks
//! domain: drawer.domain
//!
//! task stow_apple:
//!   init: Holding(apple)
//!   goal: In(apple,drawer)
//! ```
//!
//! The domain path is resolved relative to the task-set file.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::domain::{with_path, DomainFile};
use crate::io::text::{atom_list, atom_set, blocks, is_ident, Block};
use crate::planner::Task;
use crate::symbolic::DomainUniverse;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskSetFile {
    pub name: String,
    /// Domain path as written in the file.
    pub domain: String,
    pub tasks: Vec<Task>,
}

struct Header {
    name: String,
    domain: String,
}

fn header(blocks: &[Block<'_>]) -> Result<Header> {
    let first = blocks.first().ok_or_else(|| Error::parse(1, 1, "empty task-set file"))?;
    let name = first
        .header
        .text
        .strip_prefix("tasks ")
        .map(str::trim)
        .filter(|n| is_ident(n))
        .ok_or_else(|| first.header.err(0, "expected `tasks <name>`"))?;
    if let Some(l) = first.body.first() {
        return Err(l.err(0, "unexpected indented line after the tasks header"));
    }
    let second = blocks
        .get(1)
        .ok_or_else(|| first.header.err(0, "missing `domain: <path>` line"))?;
    let (key, v) = second.header.key_value()?;
    if key != "domain" || v.text.is_empty() {
        return Err(second.header.err(0, "expected `domain: <path>`"));
    }
    if let Some(l) = second.body.first() {
        return Err(l.err(0, "unexpected indented line after the domain line"));
    }
    Ok(Header {
        name: name.to_string(),
        domain: v.text.to_string(),
    })
}

impl TaskSetFile {
    /// The domain path named in `text`, without resolving any atoms.
    pub fn domain_ref(text: &str) -> Result<String> {
        Ok(header(&blocks(text)?)?.domain)
    }

    pub fn parse(text: &str, universe: &DomainUniverse) -> Result<Self> {
        let blocks = blocks(text)?;
        let Header { name, domain } = header(&blocks)?;
        let mut tasks: Vec<Task> = Vec::new();
        for b in &blocks[2..] {
            let h = &b.header;
            let id = h
                .text
                .strip_prefix("task ")
                .and_then(|r| r.trim().strip_suffix(':'))
                .map(str::trim_end)
                .ok_or_else(|| h.err(0, "expected `task <id>:`"))?;
            if !is_ident(id) {
                return Err(h.err(5, format!("bad task id `{id}`")));
            }
            if tasks.iter().any(|t| t.id == id) {
                return Err(h.err(5, format!("duplicate task `{id}`")));
            }
            let mut init = None;
            let mut goal = None;
            for l in &b.body {
                let (key, v) = l.key_value()?;
                let slot = match key {
                    "init" => &mut init,
                    "goal" => &mut goal,
                    _ => return Err(l.err(0, format!("unknown key `{key}`"))),
                };
                if slot.is_some() {
                    return Err(l.err(0, format!("`{key}` given twice")));
                }
                *slot = Some(atom_set(&v, universe)?);
            }
            tasks.push(Task::new(
                id,
                init.unwrap_or_else(|| universe.empty_set()),
                goal.unwrap_or_else(|| universe.empty_set()),
            ));
        }
        Ok(TaskSetFile { name, domain, tasks })
    }

    pub fn to_text(&self, universe: &DomainUniverse) -> String {
        let mut out = format!("tasks {}\ndomain: {}\n", self.name, self.domain);
        for t in &self.tasks {
            let _ = write!(out, "\ntask {}:\n", t.id);
            for (key, set) in [("init", &t.init), ("goal", &t.goal)] {
                let list = atom_list(universe, set);
                if list.is_empty() {
                    let _ = writeln!(out, "  {key}:");
                } else {
                    let _ = writeln!(out, "  {key}: {list}");
                }
            }
        }
        out
    }

    pub fn task(&self, id: &str) -> Option<&Task> {
        self.tasks.iter().find(|t| t.id == id)
    }
}

/// A task set with its domain.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub domain: DomainFile,
    pub domain_path: PathBuf,
    pub taskset: TaskSetFile,
}

impl Workspace {
    pub fn load(taskset_path: &Path) -> Result<Self> {
        let text = crate::io::read_file(taskset_path)?;
        let reference = TaskSetFile::domain_ref(&text).map_err(|e| with_path(e, taskset_path))?;
        let domain_path = taskset_path.parent().unwrap_or(Path::new("")).join(&reference);
        let domain = DomainFile::load(&domain_path)?;
        let taskset = TaskSetFile::parse(&text, &domain.universe).map_err(|e| with_path(e, taskset_path))?;
        Ok(Workspace {
            domain,
            domain_path,
            taskset,
        })
    }
}
