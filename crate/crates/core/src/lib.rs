//! Post-network geometry for grid-based stair detectors.
//!
//! The crate covers the pieces around a stair line/segmentation network:
//! encoding stair lines into coarse heatmap and location grids, linking
//! decoded cells back into line equations, turning depth plus a
//! segmentation mask into per-class point clouds, reference loss functions,
//! evaluation metrics and a synthetic scene generator that provides exact
//! ground truth for all of the above.
//!
//! ```
//! use stairkit::{encode_lines, link_lines, GridGeometry, LineKind, LineSegment, LinkerConfig};
//!
//! let geom = GridGeometry::default();
//! let lines = [
//!     LineSegment::new(LineKind::Convex, (40.0, 200.0), (470.0, 210.0)),
//!     LineSegment::new(LineKind::Concave, (40.0, 260.0), (470.0, 270.0)),
//! ];
//! let (convex, concave) = encode_lines(&lines, &geom).unwrap();
//! let eqs = link_lines(&convex, &concave, &LinkerConfig::default(), &geom).unwrap();
//! assert_eq!(eqs.len(), 2);
//! ```

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod camera;
pub mod cli;
pub mod csvio;
pub mod error;
pub mod focus;
mod fsio;
pub mod geometry;
pub mod label_codec;
pub mod linker;
pub mod losses;
pub mod metrics;
pub mod ply;
pub mod reconstruct;
pub mod synth;
pub mod tensor;

pub use camera::{format_intrinsics, parse_intrinsics, CameraIntrinsics};
pub use error::{Error, Result};
pub use focus::{focus_slice, focus_unslice};
pub use geometry::{GridGeometry, LineEquation, LineKind, LineSegment};
pub use label_codec::{cell_to_pixels, decode_cells, encode_lines, gaussian_response, CellDetection, LabelPair};
pub use linker::{link_kind, link_lines, LinkerConfig};
pub use reconstruct::{
    backproject_pixel, class_depth, fit_plane, harden_mask, reconstruct_cloud, PointCloud, Reconstructor, SurfaceClass,
};
pub use synth::{generate_scene, SceneTruth, StairSpec};
pub use tensor::{read_tensor, write_tensor, TensorGrid};
