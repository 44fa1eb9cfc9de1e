//! File formats and command pipelines behind the `arenkit` binary.
//!
//! Split out as a library so the parsers can be driven directly by tests
//! and fuzz targets.

pub mod arch_file;
pub mod pipeline;
pub mod spec_file;
pub mod sweep;
