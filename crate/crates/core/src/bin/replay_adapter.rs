//! Minimal external proposer: answers over stdin/stdout with the models a
//! domain file declares.
//!
//! ```text
//! btg-replay-adapter <domain> [--log <file>] [--unknown-policy] [--exit-after <n>]
//! ```
//!
//! Proposal requests get the declared models once, then nothing. Sample
//! requests get the policy named like the model if there is one, else the
//! catalog entry at the attempt index. Refine requests get no model. With
//! `--log` every request line is appended to the file as received.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use bt_grounding::io::DomainFile;
use bt_grounding::proposers::{ModelRecord, ModelsResponse, Phase, PolicyChoice, ProposerRequest, RefineResponse};

struct Options {
    domain: PathBuf,
    log: Option<PathBuf>,
    unknown_policy: bool,
    exit_after: Option<usize>,
}

fn options() -> Options {
    let mut args = std::env::args().skip(1);
    let mut opts = Options {
        domain: PathBuf::new(),
        log: None,
        unknown_policy: false,
        exit_after: None,
    };
    while let Some(a) = args.next() {
        match a.as_str() {
            "--log" => opts.log = args.next().map(PathBuf::from),
            "--unknown-policy" => opts.unknown_policy = true,
            "--exit-after" => opts.exit_after = args.next().and_then(|n| n.parse().ok()),
            _ => opts.domain = PathBuf::from(a),
        }
    }
    opts
}

fn main() {
    let opts = options();
    let domain = match DomainFile::load(&opts.domain) {
        Ok(d) => d,
        Err(e) => {
            eprintln!("btg-replay-adapter: {e}");
            std::process::exit(2);
        }
    };
    let declared: Vec<ModelRecord> = domain
        .models
        .iter()
        .map(|h| ModelRecord::from_model(h, &domain.universe))
        .collect();
    let mut log = opts.log.as_ref().map(|p| {
        std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(p)
            .expect("log file")
    });
    let mut proposed = false;
    let stdout = std::io::stdout();
    for (served, line) in std::io::stdin().lock().lines().enumerate() {
        if opts.exit_after == Some(served) {
            return;
        }
        let Ok(line) = line else { return };
        if let Some(f) = log.as_mut() {
            let _ = writeln!(f, "{line}");
        }
        let req: ProposerRequest = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                eprintln!("btg-replay-adapter: bad request: {e}");
                return;
            }
        };
        let reply = match req.phase {
            Phase::InitialProposal | Phase::RepairProposal => {
                let models = if proposed { Vec::new() } else { declared.clone() };
                proposed = true;
                serde_json::to_string(&ModelsResponse { models })
            }
            Phase::PolicySample => {
                let p = req.sample().expect("sample payload");
                let id = if opts.unknown_policy {
                    "no_such_policy".to_string()
                } else if let Some(same) = p.catalog.iter().find(|c| c.id == p.model.name) {
                    same.id.clone()
                } else {
                    p.catalog[p.attempt % p.catalog.len()].id.clone()
                };
                serde_json::to_string(&PolicyChoice::id(id))
            }
            Phase::Refine => serde_json::to_string(&RefineResponse::default()),
        };
        let mut out = stdout.lock();
        let _ = writeln!(out, "{}", reply.expect("responses serialize"));
        let _ = out.flush();
    }
}
