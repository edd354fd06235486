pub mod fit;
pub mod simulate;
pub mod sweep;
pub mod synth;
pub mod transfer;

use std::path::Path;

use anyhow::Context;
use battdmd::{load_csv, ColumnMap, TimeSeries};

/// Version stamped into every JSON report.
pub const REPORT_FORMAT_VERSION: u32 = 1;

pub(crate) fn load_series(path: &Path, columns: &ColumnMap) -> anyhow::Result<TimeSeries> {
    load_csv(path, columns).with_context(|| format!("reading {}", path.display()))
}

pub(crate) fn file_label(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}
