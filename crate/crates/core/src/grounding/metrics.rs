use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The per-run numbers the metrics need.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tasks: usize,
    pub solved: usize,
    pub feedback_cycles: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub runs: usize,
    /// Mean fraction of tasks solved per run.
    pub asr: f64,
    /// Fraction of runs that solved every task.
    pub csr: f64,
    /// Mean feedback cycles.
    pub fc: f64,
}

pub fn compute_metrics(runs: &[RunSummary]) -> Result<Metrics> {
    if runs.is_empty() {
        return Err(Error::domain("metrics need at least one run"));
    }
    let n = runs.len() as f64;
    let mut asr = 0.0;
    let mut csr = 0.0;
    let mut fc = 0.0;
    for r in runs {
        if r.solved > r.tasks {
            return Err(Error::domain(format!("run solved {} of {} tasks", r.solved, r.tasks)));
        }
        asr += if r.tasks == 0 { 1.0 } else { r.solved as f64 / r.tasks as f64 };
        if r.solved == r.tasks {
            csr += 1.0;
        }
        fc += r.feedback_cycles as f64;
    }
    Ok(Metrics {
        runs: runs.len(),
        asr: asr / n,
        csr: csr / n,
        fc: fc / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(tasks: usize, solved: usize, fc: usize) -> RunSummary {
        RunSummary {
            tasks,
            solved,
            feedback_cycles: fc,
        }
    }

    #[test]
    fn all_solved() {
        let m = compute_metrics(&vec![run(3, 3, 0); 10]).unwrap();
        assert_eq!((m.asr, m.csr, m.fc), (1.0, 1.0, 0.0));
    }

    #[test]
    fn partial_runs() {
        let m = compute_metrics(&[run(3, 3, 1), run(3, 2, 2)]).unwrap();
        assert!((m.asr - 5.0 / 6.0).abs() < 1e-12);
        assert_eq!(m.csr, 0.5);
        assert_eq!(m.fc, 1.5);
    }

    #[test]
    fn empty_is_an_error() {
        assert!(compute_metrics(&[]).is_err());
    }
}
