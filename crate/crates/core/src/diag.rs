//! Non-fatal conditions raised while processing.

use alloc::string::String;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    /// Mask selected no depth-valid pixel.
    EmptyObjectPoints,
    /// Every point was classified as noise; the input was kept.
    AllNoise,
    /// Orientation refinement skipped on a degenerate cloud.
    RefinementSkipped,
    /// Delegate choice was not among the offered candidates.
    DelegateFallback,
    /// Observed articulation counts missing; threshold not applied.
    ArticulationCountsMissing,
    /// The wall lies in front of the object's front face.
    WallBehindFront,
    /// Collision resolution hit the iteration cap with overlaps left.
    CollisionFixpointNotReached,
    /// A measured extent was degenerate and replaced by the canonical aspect.
    DegenerateExtentReplaced,
    /// Floor plane could not be fitted; the default plane was used.
    FloorPlaneDefaulted,
    /// A wall plane could not be fitted.
    WallPlaneSkipped,
}

/// A warning tied to an object (when there is one) and a pipeline stage.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Warning {
    pub kind: WarningKind,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub object_id: Option<String>,
    pub stage: String,
    pub message: String,
}

impl Warning {
    pub fn new(kind: WarningKind, stage: &str, message: impl Into<String>) -> Self {
        Warning {
            kind,
            object_id: None,
            stage: stage.into(),
            message: message.into(),
        }
    }

    pub fn for_object(mut self, id: &str) -> Self {
        self.object_id = Some(id.into());
        self
    }
}

/// A value with an optional warning flag attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Flagged<T> {
    pub value: T,
    pub warning: Option<WarningKind>,
}

impl<T> Flagged<T> {
    pub fn ok(value: T) -> Self {
        Flagged {
            value,
            warning: None,
        }
    }

    pub fn warn(value: T, kind: WarningKind) -> Self {
        Flagged {
            value,
            warning: Some(kind),
        }
    }
}
