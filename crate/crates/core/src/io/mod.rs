//! Model files, bounds archives and CSV reports.

pub mod archive;
pub mod cassandra;
pub mod model_file;
pub mod report;

pub use archive::{load_archive, parse_archive, BoundsArchive};
pub use cassandra::parse_cassandra;
pub use model_file::{augment_finite_horizon, load_model, parse_model, write_model, ModelFile};
pub use report::{fmt9, write_atomic};

/// Reads a file, naming it in the error.
pub(crate) fn read_text(path: &std::path::Path) -> crate::Result<String> {
    std::fs::read_to_string(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())).into())
}
