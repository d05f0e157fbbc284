use std::path::{Path, PathBuf};

use acdc_core::bundle::{Violation, ViolationCode};
use thiserror::Error;

/// Failure to read or write one of the on-disk formats. Every variant names
/// the offending file or field.
#[derive(Debug, Error)]
pub enum IoError {
    #[error("missing file {}", .path.display())]
    MissingFile { path: PathBuf },
    #[error("shape mismatch at {at}: {detail}")]
    ShapeMismatch { at: String, detail: String },
    #[error("non-finite value at {at}")]
    NonFiniteValue { at: String },
    #[error("duplicate object id `{id}`")]
    DuplicateObjectId { id: String },
    #[error("duplicate asset id `{id}`")]
    DuplicateAssetId { id: String },
    #[error("unresolved support at {at}")]
    UnresolvedSupport { at: String },
    #[error("invalid value at {at}: {detail}")]
    InvalidValue { at: String, detail: String },
    #[error("{} failed validation: {}", .what, join(.violations))]
    Invalid { what: String, violations: Vec<Violation> },
    #[error("cannot parse {}: {message}", .path.display())]
    Parse { path: PathBuf, message: String },
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
}

impl IoError {
    pub(crate) fn io(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
        move |source| {
            if source.kind() == std::io::ErrorKind::NotFound {
                IoError::MissingFile { path: path.to_path_buf() }
            } else {
                IoError::Io {
                    path: path.to_path_buf(),
                    source,
                }
            }
        }
    }

    pub(crate) fn parse(path: &Path, e: impl std::fmt::Display) -> IoError {
        IoError::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    /// Turns validator output into the most specific error, if any.
    ///
    /// `resolve` maps a violation path like `objects[1]` to a display name
    /// like the object id.
    pub(crate) fn from_violations(
        what: &str,
        violations: Vec<Violation>,
        resolve: impl Fn(&str) -> String,
    ) -> Result<(), IoError> {
        if violations.is_empty() {
            return Ok(());
        }
        let rank = |c: ViolationCode| match c {
            ViolationCode::ShapeMismatch | ViolationCode::NoSnapshots => 0,
            ViolationCode::NonFiniteValue => 1,
            ViolationCode::DuplicateObjectId | ViolationCode::DuplicateAssetId => 2,
            ViolationCode::UnresolvedSupport => 3,
            _ => 4,
        };
        let first = violations.iter().min_by_key(|v| rank(v.code)).expect("non-empty");
        let name = resolve(&first.path);
        let at = if name == first.path {
            format!("{what}: {name}")
        } else {
            format!("{what}: {} ({name})", first.path)
        };
        Err(match first.code {
            ViolationCode::ShapeMismatch | ViolationCode::NoSnapshots => IoError::ShapeMismatch {
                at,
                detail: first.code.as_str().into(),
            },
            ViolationCode::NonFiniteValue => IoError::NonFiniteValue { at },
            ViolationCode::DuplicateObjectId => IoError::DuplicateObjectId { id: name },
            ViolationCode::DuplicateAssetId => IoError::DuplicateAssetId { id: name },
            ViolationCode::UnresolvedSupport => IoError::UnresolvedSupport { at },
            _ => IoError::Invalid {
                what: what.into(),
                violations,
            },
        })
    }
}
