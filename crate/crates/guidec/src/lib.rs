//! File formats, parallel execution, and glue for the `guidec` CLI.
//!
//! The algorithmic engine lives in `guidec-core`; this crate owns everything
//! that touches the outside world: the JSON model format, TOML scenario and
//! corpus files, trace/report JSON, CSV metrics output, and the thread pool
//! capped by `GUIDEC_THREADS`.

pub mod corpus_file;
pub mod csv_out;
pub mod model_file;
pub mod parallel;
pub mod report_json;
pub mod runner;
pub mod scenario_file;
pub mod trace_json;

pub use guidec_core as core;
