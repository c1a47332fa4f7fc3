//! Facade mapping from mobile mapping data.
//!
//! The crate turns a georeferenced street point cloud, a 2D cadastral map and
//! a set of calibrated street-level images into per-facade quadrilaterals and
//! occlusion-free facade textures:
//!
//! 1. [`accumulation`] projects the cloud into a planimetric vote grid and
//!    separates points of vertical structures (hyper-points) from the rest.
//! 2. [`extract`] fuses hyper-points with cadastral segments into disjoint
//!    facade clusters.
//! 3. [`fit`] estimates the vertical facade plane, its planimetric extremities
//!    and its bottom/top altitudes.
//! 4. [`occlusion`] finds laser points lying between the trajectory and each
//!    facade plane.
//! 5. [`masking`] turns occluders into per-image masks with disc morphology.
//! 6. [`texturing`] rectifies the unmasked parts of each view onto the facade
//!    plane and mosaics them.
//!
//! [`synth`] is a procedural street simulator producing datasets with ground
//! truth, and [`eval`] holds the metrics used against it.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accumulation;
pub mod error;
pub mod eval;
pub mod extract;
pub mod fit;
pub mod geometry;
pub mod ingest;
pub mod masking;
pub mod occlusion;
pub mod synth;
pub mod texturing;

pub use accumulation::{build_accumulation_map, split_hyper_points, AccumulationGrid, HyperSplit};
pub use error::{Error, Result};
pub use extract::{extract_facade_clusters, FacadeCluster};
pub use fit::{fit_facade, FacadeFit, TopProfile};
pub use geometry::{FacadeQuad, LodFlag, PinholeCamera, Point2, Point3, RigidPose, Segment2, VerticalPlane};
pub use ingest::{CameraEntry, Dataset, LaserFrame, PipelineConfig, PointRecord, RgbImage};
pub use masking::{BinaryMask, SoftMask};
pub use occlusion::{OccluderPoint, OccluderSet, PointSource};
pub use texturing::{OrthoFrame, OrthoGrid, OrthoLayer, ViewScore};
