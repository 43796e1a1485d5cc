//! Experiment harness: grid search over the neural field's hyperparameters,
//! per-representation build timing and size, and CSV/Markdown reports.

pub mod cli;
pub mod error;
pub mod grid;
pub mod measure;
pub mod report;

pub use error::{BenchError, Result};
pub use grid::{average_by, run_grid, GridAverage, GridCell, GridCellResult, GridSettings, GridSpec};
pub use measure::{build_and_measure, BenchConfig, BenchRecord, Representation, Step};
pub use report::emit_report;
