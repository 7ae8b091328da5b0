//! Rigid poses and the pinhole model shared by the camera and the projector.
//!
//! Device frames follow the usual vision convention: +Z along the optical
//! axis, +X to the right of the image, +Y down the image. A pixel `(i, j)`
//! has its center at `(i + 0.5, j + 0.5)`.

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Maps points from a local frame to a parent frame: `p' = R p + t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RigidPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl Default for RigidPose {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidPose {
    pub fn identity() -> Self {
        RigidPose {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Fails when `rotation` is not orthonormal with determinant +1.
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        let det = rotation.determinant();
        if ortho > 1e-9 || (det - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!(
                "rotation not proper orthonormal (|RᵀR - I| = {ortho:e}, det = {det})"
            )));
        }
        Ok(RigidPose {
            rotation,
            translation,
        })
    }

    pub fn from_axis_angle(axis: &Vec3, angle_rad: f64, translation: Vec3) -> Self {
        let rot = Rotation3::from_axis_angle(&Unit::new_normalize(*axis), angle_rad);
        RigidPose {
            rotation: *rot.matrix(),
            translation,
        }
    }

    /// Rotation by `rotation` about `center`, expressed in the parent frame.
    pub fn rotation_about(rotation: Matrix3<f64>, center: &Vec3) -> Self {
        RigidPose {
            rotation,
            translation: center - rotation * center,
        }
    }

    #[inline]
    pub fn apply(&self, point: &Vec3) -> Vec3 {
        self.rotation * point + self.translation
    }

    #[inline]
    pub fn apply_inverse(&self, point: &Vec3) -> Vec3 {
        self.rotation.transpose() * (point - self.translation)
    }

    #[inline]
    pub fn apply_vector(&self, v: &Vec3) -> Vec3 {
        self.rotation * v
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        RigidPose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ inner`: applies `inner` first.
    pub fn compose(&self, inner: &RigidPose) -> Self {
        RigidPose {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
        }
    }
}

/// Forward change of frame, `R·p + t`.
pub fn change_frame(pose: &RigidPose, point: &Vec3) -> Vec3 {
    pose.apply(point)
}

/// Inverse change of frame, `Rᵀ·(p − t)`.
pub fn change_frame_inverse(pose: &RigidPose, point: &Vec3) -> Vec3 {
    pose.apply_inverse(point)
}

/// Pinhole intrinsics plus the device → world pose.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PinholeDevice {
    pub focal: (f64, f64),
    pub center: (f64, f64),
    pub resolution: (u32, u32),
    pub pose: RigidPose,
}

impl PinholeDevice {
    pub fn new(focal: (f64, f64), center: (f64, f64), resolution: (u32, u32), pose: RigidPose) -> Result<Self> {
        if !(focal.0 > 0.0 && focal.1 > 0.0) {
            return Err(Error::invalid(format!("focal lengths must be positive, got {focal:?}")));
        }
        let (w, h) = (resolution.0 as f64, resolution.1 as f64);
        if !(0.0..=w).contains(&center.0) || !(0.0..=h).contains(&center.1) {
            return Err(Error::invalid(format!(
                "principal point {center:?} outside image {}x{}",
                resolution.0, resolution.1
            )));
        }
        Ok(PinholeDevice {
            focal,
            center,
            resolution,
            pose,
        })
    }

    /// Square-pixel device whose horizontal field of view is `fov_deg`,
    /// principal point at the image center.
    pub fn from_fov(fov_deg: f64, resolution: (u32, u32), pose: RigidPose) -> Result<Self> {
        if !(fov_deg > 0.0 && fov_deg < 180.0) {
            return Err(Error::invalid(format!("field of view {fov_deg}° out of (0, 180)")));
        }
        let f = 0.5 * resolution.0 as f64 / (0.5 * fov_deg.to_radians()).tan();
        Self::new(
            (f, f),
            (0.5 * resolution.0 as f64, 0.5 * resolution.1 as f64),
            resolution,
            pose,
        )
    }

    pub fn width(&self) -> usize {
        self.resolution.0 as usize
    }

    pub fn height(&self) -> usize {
        self.resolution.1 as usize
    }

    pub fn position(&self) -> Vec3 {
        self.pose.translation
    }

    /// Optical axis in world coordinates.
    pub fn forward(&self) -> Vec3 {
        self.pose.rotation.column(2).into_owned()
    }

    /// Device-frame point to pixel coordinates.
    pub fn project_point(&self, point: &Vec3) -> Result<(f64, f64)> {
        if point.z <= 0.0 {
            return Err(Error::BehindDevice { z: point.z });
        }
        Ok((
            self.focal.0 * point.x / point.z + self.center.0,
            self.focal.1 * point.y / point.z + self.center.1,
        ))
    }

    /// Device-frame ray through a pixel coordinate, scaled so that `z = 1`.
    #[inline]
    pub fn pixel_ray(&self, px: f64, py: f64) -> Vec3 {
        Vec3::new(
            (px - self.center.0) / self.focal.0,
            (py - self.center.1) / self.focal.1,
            1.0,
        )
    }

    /// Device-frame point at camera-space depth `depth` behind a pixel.
    pub fn unproject(&self, px: f64, py: f64, depth: f64) -> Vec3 {
        self.pixel_ray(px, py) * depth
    }

    /// World-space ray through the center of pixel `(i, j)`; the direction
    /// keeps unit device-frame Z so ray parameters are camera depths.
    #[inline]
    pub fn world_ray(&self, i: usize, j: usize) -> (Vec3, Vec3) {
        let d = self.pixel_ray(i as f64 + 0.5, j as f64 + 0.5);
        (self.pose.translation, self.pose.rotation * d)
    }

    /// World → device frame.
    pub fn to_device(&self, world: &Vec3) -> Vec3 {
        self.pose.apply_inverse(world)
    }
}

/// Device pose at `position` looking at `target`, with world `up` mapped
/// to image-up (device −Y).
pub fn look_at(position: Vec3, target: Vec3, up: Vec3) -> Result<RigidPose> {
    let forward = target - position;
    if forward.norm() == 0.0 {
        return Err(Error::invalid("look_at target coincides with position"));
    }
    let z = forward.normalize();
    let x = z.cross(&up);
    if x.norm() < 1e-12 {
        return Err(Error::invalid("look_at up vector parallel to view direction"));
    }
    let x = x.normalize();
    let y = z.cross(&x);
    let rotation = Matrix3::from_columns(&[x, y, z]);
    Ok(RigidPose {
        rotation,
        translation: position,
    })
}
