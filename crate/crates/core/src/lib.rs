//! Core library for simulated autonomous tissue scanning.
//!
//! The crate is organized bottom-up:
//!
//! - [`se3`]: rigid transforms and pose-error metrics
//! - [`grid`]: images and other per-pixel grids
//! - [`camera`]: pinhole projection
//! - [`cloud`]: organized point clouds and surface normals
//! - [`tracker`]: rigid tissue-pose tracking from stereo frames
//! - [`servo`]: scan trajectories, the visual-servoing control law, and a
//!   first-order robot plant
//! - [`sim`]: a deforming-phantom simulator that stands in for the robot rig

pub mod camera;
pub mod cloud;
pub mod grid;
pub mod se3;
pub mod servo;
pub mod sim;
pub mod tracker;

pub use camera::CameraIntrinsics;
pub use cloud::OrganizedPointCloud;
pub use se3::{pose_error, PoseError, RigidTransform, Rotation3};
