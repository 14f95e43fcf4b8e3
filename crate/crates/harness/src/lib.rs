//! Evaluation runs, report emission and the workbench HTTP service.

pub mod config;
pub mod error;
pub mod eval;
pub mod mockdata;
pub mod report;
pub mod service;

pub use config::{BackendSpec, RunConfig};
pub use error::{HarnessError, Result};
pub use eval::{evaluate, evaluate_with, RunRecord};
pub use report::{emit_report, ReportFormat};
