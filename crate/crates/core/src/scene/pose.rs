use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scene::geometry::{PinholeDevice, RigidPose, Vec3};

/// One object orientation: yaw about the camera y-axis, then roll about
/// the camera z-axis, both in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseEntry {
    pub yaw_deg: f64,
    pub roll_deg: f64,
}

/// Ordered object orientations, yaw-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseSchedule {
    pub entries: Vec<PoseEntry>,
}

impl PoseSchedule {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Default for PoseSchedule {
    fn default() -> Self {
        generate_pose_schedule(12, 30.0, 12, 5.0).expect("default schedule is valid")
    }
}

pub fn generate_pose_schedule(n_yaw: usize, yaw_step_deg: f64, n_roll: usize, roll_step_deg: f64) -> Result<PoseSchedule> {
    if n_yaw == 0 || n_roll == 0 {
        return Err(Error::invalid("pose schedule counts must be at least 1"));
    }
    if !yaw_step_deg.is_finite() || !roll_step_deg.is_finite() {
        return Err(Error::invalid("pose schedule steps must be finite"));
    }
    let entries = (0..n_yaw)
        .flat_map(|i| {
            (0..n_roll).map(move |j| PoseEntry {
                yaw_deg: i as f64 * yaw_step_deg,
                roll_deg: j as f64 * roll_step_deg,
            })
        })
        .collect();
    Ok(PoseSchedule { entries })
}

/// Rigid motion of the object for one schedule entry: the rotation is
/// carried out in the camera's axes and pivots on `center`.
pub fn object_pose(entry: &PoseEntry, camera: &PinholeDevice, center: &Vec3) -> RigidPose {
    let yaw = nalgebra::Rotation3::from_axis_angle(&Vec3::y_axis(), entry.yaw_deg.to_radians());
    let roll = nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), entry.roll_deg.to_radians());
    let local: Matrix3<f64> = *(roll * yaw).matrix();
    let rc = camera.pose.rotation;
    RigidPose::rotation_about(rc * local * rc.transpose(), center)
}
