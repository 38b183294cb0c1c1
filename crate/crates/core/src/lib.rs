//! Geometry toolchain for turning a scanned sculpture into printable shell
//! parts with posed electronics mounts.

pub mod assembly;
pub mod blank;
pub mod fixtures;
pub mod geom2d;
pub mod mesh;
pub mod registration;
pub mod voxel;
