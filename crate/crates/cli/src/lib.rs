//! File formats, presets, sweeps and result tables behind the `twohop` binary.

pub mod app;
pub mod policy_file;
pub mod presets;
pub mod report;
pub mod scenario_file;
pub mod sweep;
