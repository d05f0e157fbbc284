//! Allocation-only kernels for compiling digital-cousin scenes from a
//! single-view extraction bundle and an asset database.
//!
//! The crate is `no_std` (with `alloc`); file formats, hashing and the CLI
//! live in the `acdc` crate.

#![cfg_attr(not(test), no_std)]
// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod affordance;
pub mod bundle;
pub mod diag;
pub mod geometry;
pub mod matching;
pub mod math;
pub mod metrics;
pub mod scenegen;

pub use bundle::{
    AssetDatabase, AssetEntry, ExtractionBundle, ObjectRecord, PlacedObject, SceneDescription,
};
pub use diag::{Flagged, Warning, WarningKind};
pub use math::{Quat, Vec3};
