//! File formats and text renderings.

mod domain;
mod render;
mod results;
mod taskset;
mod text;

pub use domain::{parse_domain, DomainFile};
pub use render::{parse_bt, render_bt, render_dot};
pub use results::{ActionRecord, ReportRecord, ResultsFile, RunConfig, TaskResult, Timing, RESULTS_FORMAT};
pub use taskset::{TaskSetFile, Workspace};
pub(crate) use domain::with_path;
pub(crate) use text::read_file;
