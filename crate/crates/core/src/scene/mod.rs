//! Meshes, device geometry and the object pose schedule.

pub mod geometry;
pub mod mesh;
pub mod pose;
pub mod primitives;

pub use geometry::{change_frame, change_frame_inverse, look_at, PinholeDevice, RigidPose, Vec3};
pub use mesh::{load_mesh, normalize_and_place, Mesh, DEFAULT_ALBEDO};
pub use pose::{generate_pose_schedule, object_pose, PoseEntry, PoseSchedule};
