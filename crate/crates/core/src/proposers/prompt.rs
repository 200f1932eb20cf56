//! Text rendering of requests for language-model adapters.
//!
//! Templates are plain text with `{{name}}` placeholders. [`placeholders`]
//! lists what a request provides; a context that was ablated renders as
//! `(not provided)`. Unknown placeholders are an error so a template typo
//! does not silently reach the model.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::proposers::{ExecutionRecord, ModelRecord, Payload, PlanningRecord, ProposerRequest, SpaceDigest};

const NOT_PROVIDED: &str = "(not provided)";

fn atoms(list: &[String]) -> String {
    if list.is_empty() {
        "(none)".into()
    } else {
        list.join(", ")
    }
}

fn model(m: &ModelRecord) -> String {
    format!(
        "{}\n  pre: {}\n  add: {}\n  del: {}",
        m.name,
        atoms(&m.pre),
        atoms(&m.add),
        atoms(&m.del)
    )
}

fn space(d: &SpaceDigest) -> String {
    let mut rules = vec!["add and del are disjoint".to_string()];
    if d.add_pre_disjoint {
        rules.push("add and pre are disjoint".into());
    }
    if d.del_subset_pre {
        rules.push("del is part of pre".into());
    }
    let mut out = rules.join("; ");
    if let Some(n) = d.explicit_models {
        let _ = write!(out, "; only the {n} listed models are allowed");
    }
    let _ = write!(out, "; {} models proposed so far", d.proposed);
    out
}

fn planning(records: &[PlanningRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let _ = writeln!(out, "task {}: not solved after expanding {} conditions", r.task_id, r.expanded_condition_count);
        let _ = writeln!(out, "  init: {}", atoms(&r.init));
        let _ = writeln!(out, "  goal: {}", atoms(&r.goal));
        for c in &r.frontier {
            let _ = writeln!(out, "  unreached condition: {}", atoms(c));
        }
        if !r.actions_used.is_empty() {
            let _ = writeln!(out, "  actions in the partial tree: {}", r.actions_used.join(", "));
        }
        out.push_str("  partial tree:\n");
        for line in r.sketch.lines() {
            let _ = writeln!(out, "    {line}");
        }
    }
    out.trim_end().to_string()
}

fn history(records: &[ExecutionRecord]) -> String {
    let mut out = String::new();
    for r in records {
        let verdict = if r.succeeded { "matched" } else { "did not match" };
        let _ = writeln!(out, "attempt {} with policy {}: {verdict}", r.attempt, r.policy_id);
        let _ = writeln!(out, "  before: {}", atoms(&r.s0));
        let _ = writeln!(out, "  after: {}", atoms(&r.s_t));
        let _ = writeln!(out, "  became true: {}", atoms(&r.added));
        let _ = writeln!(out, "  became false: {}", atoms(&r.removed));
        let _ = writeln!(out, "  expected to hold: {}", atoms(&r.expected));
        if !r.forbidden.is_empty() {
            let _ = writeln!(out, "  expected to be false: {}", atoms(&r.forbidden));
        }
        if let Some(note) = &r.note {
            let _ = writeln!(out, "  note: {note}");
        }
    }
    out.trim_end().to_string()
}

/// Every placeholder value the request provides.
pub fn placeholders(req: &ProposerRequest) -> BTreeMap<&'static str, String> {
    let mut v = BTreeMap::new();
    v.insert("phase", serde_json::to_value(req.phase).map(|p| p.as_str().unwrap_or_default().to_string()).unwrap_or_default());
    let opt = |text: Option<String>| text.unwrap_or_else(|| NOT_PROVIDED.to_string());
    match &req.payload {
        Payload::Proposal(p) => {
            v.insert("propositions", p.propositions.join("\n"));
            let objects = p
                .objects
                .iter()
                .map(|o| match &o.description {
                    Some(d) => format!("{}: {d}", o.name),
                    None => o.name.clone(),
                })
                .collect::<Vec<_>>();
            v.insert("objects", objects.join("\n"));
            v.insert("mutex_groups", p.mutex_groups.iter().map(|g| g.join(" | ")).collect::<Vec<_>>().join("\n"));
            let tasks = p
                .tasks
                .iter()
                .map(|t| format!("{}: from {} reach {}", t.id, atoms(&t.init), atoms(&t.goal)))
                .collect::<Vec<_>>();
            v.insert("tasks", tasks.join("\n"));
            v.insert("space", space(&p.space));
            v.insert("batch", p.batch.to_string());
            v.insert("failures", opt(p.failures.as_deref().map(planning)));
        }
        Payload::Sample(p) => {
            v.insert("model", model(&p.model));
            v.insert("catalog", catalog(&p.catalog));
            v.insert("attempt", p.attempt.to_string());
            v.insert("history", opt(p.history.as_deref().map(history)));
        }
        Payload::Refine(p) => {
            v.insert("model", model(&p.model));
            v.insert("propositions", p.propositions.join("\n"));
            v.insert("mutex_groups", p.mutex_groups.iter().map(|g| g.join(" | ")).collect::<Vec<_>>().join("\n"));
            v.insert("space", space(&p.space));
            v.insert("catalog", catalog(&p.catalog));
            v.insert("planning", opt(p.planning.as_deref().map(planning)));
            v.insert("history", opt(p.history.as_deref().map(history)));
        }
    }
    v
}

fn catalog(c: &[crate::env::PolicyInfo]) -> String {
    c.iter()
        .map(|p| format!("{}: {}", p.id, p.description))
        .collect::<Vec<_>>()
        .join("\n")
}

/// Fills `{{name}}` placeholders from the request.
pub fn render_prompt(template: &str, req: &ProposerRequest) -> Result<String> {
    let values = placeholders(req);
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(open) = rest.find("{{") {
        out.push_str(&rest[..open]);
        let after = &rest[open + 2..];
        let close = after
            .find("}}")
            .ok_or_else(|| Error::domain("unclosed `{{` in prompt template"))?;
        let name = after[..close].trim();
        let value = values
            .get(name)
            .ok_or_else(|| Error::domain(format!("placeholder `{name}` is not available for {:?} requests", req.phase)))?;
        out.push_str(value);
        rest = &after[close + 2..];
    }
    out.push_str(rest);
    Ok(out)
}
