use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fringe::FringeSpec;
use crate::scene::{look_at, object_pose, PinholeDevice, PoseEntry, RigidPose, Vec3};

/// Projector power that maps to full exposure.
pub const FULL_SCALE_POWER: f64 = 55.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Falloff {
    Constant,
    /// `(reference_m / d)²`, unity at the reference distance.
    InverseSquare { reference_m: f64 },
}

impl Falloff {
    #[inline]
    pub fn factor(&self, distance: f64) -> f64 {
        match *self {
            Falloff::Constant => 1.0,
            Falloff::InverseSquare { reference_m } => (reference_m / distance).powi(2),
        }
    }
}

/// The six per-group realism parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariationParams {
    /// Projector texture scale: multiplies `X/Z` before the texture lookup.
    pub period: f64,
    pub fringe_rotation_deg: f64,
    pub cam_proj_angle_deg: f64,
    pub projector_power: f64,
    pub ambient: f64,
    pub env_rotation_deg: f64,
}

impl Default for VariationParams {
    fn default() -> Self {
        VariationParams {
            period: 5.5,
            fringe_rotation_deg: 0.0,
            cam_proj_angle_deg: 15.0,
            projector_power: 37.5,
            ambient: 0.5,
            env_rotation_deg: 180.0,
        }
    }
}

/// Fixed rig and imaging constants shared by every render of a dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub width: u32,
    pub height: u32,
    pub fov_deg: f64,
    pub pattern_width: u32,
    pub pattern_height: u32,
    /// Texels per fringe cycle of the projected pattern.
    pub pattern_period: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub noise_sigma: f64,
    pub inverse_square: bool,
    pub wall_y: f64,
    pub projector_position: Vec3,
    pub model_position: Vec3,
    pub camera_radius: f64,
    pub max_dim: f64,
    pub modulation_threshold: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            width: 512,
            height: 512,
            fov_deg: 7.0,
            pattern_width: 1024,
            pattern_height: 1024,
            pattern_period: 16.0,
            amplitude: 0.5,
            offset: 0.5,
            noise_sigma: 0.005,
            inverse_square: false,
            wall_y: 0.05,
            projector_position: Vec3::new(0.0, -1.5, 0.0),
            model_position: Vec3::new(0.0, 0.0, -0.02),
            camera_radius: 1.5,
            max_dim: 0.14,
            modulation_threshold: 0.02,
        }
    }
}

/// Everything needed to render one fringe/depth pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneParams {
    pub fringe: FringeSpec,
    pub camera: PinholeDevice,
    pub projector: PinholeDevice,
    pub cam_proj_angle_deg: f64,
    pub projector_power: f64,
    pub ambient: f64,
    pub env_rotation_deg: f64,
    pub wall_y: f64,
    pub object_pose: RigidPose,
    pub noise_sigma: f64,
    pub falloff: Falloff,
}

impl SceneParams {
    /// Builds the rig: the projector at its fixed position and the camera on
    /// the horizontal circle of radius `camera_radius` around the model,
    /// swung by the camera–projector angle toward +x. Both aim at the model.
    pub fn compose(settings: &RenderSettings, variation: &VariationParams, pose: &PoseEntry) -> Result<SceneParams> {
        let center = settings.model_position;
        let up = Vec3::z();
        let to_projector = settings.projector_position - center;
        let horizontal = Vec3::new(to_projector.x, to_projector.y, 0.0);
        if horizontal.norm() == 0.0 {
            return Err(Error::invalid("projector directly above or below the model"));
        }
        let alpha = variation.cam_proj_angle_deg.to_radians();
        let rot = nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), alpha);
        let cam_dir = rot * horizontal.normalize();
        let camera_position = Vec3::new(
            center.x + settings.camera_radius * cam_dir.x,
            center.y + settings.camera_radius * cam_dir.y,
            settings.projector_position.z,
        );
        let camera = PinholeDevice::from_fov(
            settings.fov_deg,
            (settings.width, settings.height),
            look_at(camera_position, center, up)?,
        )?;
        let (pw, ph) = (settings.pattern_width, settings.pattern_height);
        let projector = PinholeDevice::new(
            (variation.period * pw as f64, variation.period * ph as f64),
            (0.5 * pw as f64, 0.5 * ph as f64),
            (pw, ph),
            look_at(settings.projector_position, center, up)?,
        )?;
        let fringe = FringeSpec {
            period: settings.pattern_period,
            rotation_deg: variation.fringe_rotation_deg,
            amplitude: settings.amplitude,
            offset: settings.offset,
            phase_shift: 0.0,
            pattern_resolution: (pw, ph),
        };
        fringe.validate()?;
        let falloff = if settings.inverse_square {
            Falloff::InverseSquare {
                reference_m: to_projector.norm(),
            }
        } else {
            Falloff::Constant
        };
        Ok(SceneParams {
            fringe,
            object_pose: object_pose(pose, &camera, &center),
            camera,
            projector,
            cam_proj_angle_deg: variation.cam_proj_angle_deg,
            projector_power: variation.projector_power,
            ambient: variation.ambient,
            env_rotation_deg: variation.env_rotation_deg,
            wall_y: settings.wall_y,
            noise_sigma: settings.noise_sigma,
            falloff,
        })
    }

    /// Projector texture scale recovered from its intrinsics.
    pub fn projector_scale(&self) -> f64 {
        self.projector.focal.0 / self.projector.resolution.0 as f64
    }

    pub fn power_norm(&self) -> f64 {
        self.projector_power / FULL_SCALE_POWER
    }

    /// Ambient irradiance after the environment orientation weighting.
    pub fn ambient_level(&self) -> f64 {
        self.ambient * env_weight(self.env_rotation_deg)
    }
}

/// Smooth stand-in for rotating an environment map: a raised cosine in
/// the rotation angle, 1 at 0° and 0.5 at 180°.
pub fn env_weight(env_rotation_deg: f64) -> f64 {
    0.75 + 0.25 * env_rotation_deg.to_radians().cos()
}
