//! Versioned JSON archive of solved bounds.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solvers::ValueBounds;

pub const ARCHIVE_FORMAT: &str = "pomdp-voi-bounds";
pub const ARCHIVE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsArchive {
    pub format: String,
    pub version: u32,
    pub n_states: usize,
    pub solver: String,
    pub config_digest: String,
    pub bounds: ValueBounds,
}

impl BoundsArchive {
    pub fn new(bounds: ValueBounds, solver: &str, config_digest: &str) -> Self {
        BoundsArchive {
            format: ARCHIVE_FORMAT.into(),
            version: ARCHIVE_VERSION,
            n_states: bounds.upper_corners.len(),
            solver: solver.into(),
            config_digest: config_digest.into(),
            bounds,
        }
    }
}

pub fn archive_to_string(a: &BoundsArchive) -> Result<String> {
    Ok(serde_json::to_string(a)?)
}

pub fn parse_archive(text: &str) -> Result<BoundsArchive> {
    let a: BoundsArchive = serde_json::from_str(text)?;
    if a.format != ARCHIVE_FORMAT {
        return Err(Error::Config(format!("not a bounds archive (format '{}')", a.format)));
    }
    if a.version != ARCHIVE_VERSION {
        return Err(Error::Config(format!("unsupported archive version {}", a.version)));
    }
    if a.bounds.upper_corners.len() != a.n_states || a.bounds.lower.iter().any(|v| v.values.len() != a.n_states) {
        return Err(Error::Config("archive bounds do not match its state count".into()));
    }
    Ok(a)
}

pub fn load_archive(path: &Path) -> Result<BoundsArchive> {
    parse_archive(&super::read_text(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::AlphaVector;
    use crate::model::JointAction;

    #[test]
    fn round_trip_and_version_check() {
        let b = ValueBounds {
            lower: vec![AlphaVector::new(vec![-1.0, -2.0], JointAction::new(0, 1))],
            upper_corners: vec![0.0, -1.5],
            upper_points: vec![],
        };
        let a = BoundsArchive::new(b, "gap", "abc");
        let text = archive_to_string(&a).unwrap();
        assert_eq!(parse_archive(&text).unwrap(), a);
        let newer = text.replace("\"version\":1", "\"version\":9");
        assert!(matches!(parse_archive(&newer), Err(Error::Config(_))));
    }
}
