//! File formats, hashing, parallel pipeline stages and the command line for
//! the acdc digital-cousin scene compiler. The kernels live in `acdc-core`.

pub mod arrays;
pub mod bundle_io;
pub mod cli;
pub mod config;
pub mod db_io;
pub mod error;
pub mod fsio;
pub mod hash;
pub mod obj;
pub mod pipeline;
pub mod scene_io;

pub use bundle_io::{read_bundle, write_bundle};
pub use db_io::{read_asset_db, write_asset_db};
pub use error::IoError;
pub use scene_io::{read_scene, write_scene};
