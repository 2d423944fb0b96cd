//! Files, experiments and services around [`rhirl_core`]: story documents,
//! the trace corpus on disk, weight files, result tables and charts, the
//! `rhirl` command line and the live play service.

pub mod chart;
pub mod cli;
pub mod error;
pub mod fsutil;
pub mod groups;
pub mod manifest;
pub mod pipeline;
pub mod questionnaire;
pub mod repl;
pub mod service;
pub mod store;
pub mod story_io;
pub mod tables;
pub mod weights;

pub use error::{Result, WorkbenchError};
