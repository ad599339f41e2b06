//! One module per subcommand.

pub mod accumulate;
pub mod estimate_ego;
pub mod evaluate;
pub mod simulate;

use std::path::Path;

use crate::CliError;

/// Creates `dir` and its parents, failing with the offending path.
pub(crate) fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::file(dir, e))
}

/// Formats an optional float cell; absent values stay empty, like the
/// estimates CSV does.
pub(crate) fn float_cell(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}
