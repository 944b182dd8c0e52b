//! File formats, dataset assembly and pipeline orchestration behind the
//! `crowdnms` command-line tool. The computation kernels live in
//! `crowdnms-core`; this crate adds everything that touches the filesystem.

pub mod dataset;
pub mod formats;
pub mod pipeline;
pub mod sweep;

/// Tool name embedded in reports.
pub const TOOL_NAME: &str = "crowdnms";

/// Tool version embedded in reports.
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");
