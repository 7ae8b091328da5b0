//! Sinusoidal fringe synthesis and projective texture lookup.
//!
//! Pattern texels are addressed by index coordinates: texel `(i, j)` sits
//! at `(i, j)` and at texture coordinate `((i + 0.5)/W, (j + 0.5)/H)`.
//! Pattern rotation pivots on the texture center.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;
use crate::scene::{PinholeDevice, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FringeSpec {
    /// Texels per fringe cycle.
    pub period: f64,
    /// In-plane pattern rotation, degrees.
    pub rotation_deg: f64,
    pub amplitude: f64,
    pub offset: f64,
    /// Radians.
    pub phase_shift: f64,
    pub pattern_resolution: (u32, u32),
}

impl Default for FringeSpec {
    fn default() -> Self {
        FringeSpec {
            period: 16.0,
            rotation_deg: 0.0,
            amplitude: 0.5,
            offset: 0.5,
            phase_shift: 0.0,
            pattern_resolution: (1024, 1024),
        }
    }
}

impl FringeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.period > 2.0) {
            return Err(Error::invalid(format!("fringe period {} must exceed 2 texels", self.period)));
        }
        if !(self.amplitude >= 0.0) || self.offset - self.amplitude < 0.0 || self.offset + self.amplitude > 1.0 {
            return Err(Error::invalid(format!(
                "fringe offset {} ± amplitude {} leaves [0, 1]",
                self.offset, self.amplitude
            )));
        }
        if self.pattern_resolution.0 == 0 || self.pattern_resolution.1 == 0 {
            return Err(Error::invalid("empty pattern resolution"));
        }
        Ok(())
    }

    /// Fringe cycles across the pattern width.
    pub fn cycles_per_width(&self) -> f64 {
        self.pattern_resolution.0 as f64 / self.period
    }

    /// Copy of `self` with `cycles` fringe cycles across the pattern width.
    pub fn with_cycles(&self, cycles: f64) -> FringeSpec {
        FringeSpec {
            period: self.pattern_resolution.0 as f64 / cycles,
            ..self.clone()
        }
    }

    fn texture_center(&self) -> (f64, f64) {
        (
            0.5 * (self.pattern_resolution.0 as f64 - 1.0),
            0.5 * (self.pattern_resolution.1 as f64 - 1.0),
        )
    }

    /// Coordinate across the fringes (texels) at texel position `(x, y)`.
    #[inline]
    pub fn across_coordinate(&self, x: f64, y: f64) -> f64 {
        let (cx, cy) = self.texture_center();
        let (s, c) = self.rotation_deg.to_radians().sin_cos();
        cx + c * (x - cx) + s * (y - cy)
    }

    /// Pattern phase at texel position `(x, y)`, not reduced modulo 2π.
    #[inline]
    pub fn phase_at(&self, x: f64, y: f64) -> f64 {
        TAU * self.across_coordinate(x, y) / self.period + self.phase_shift
    }
}

/// Grid of pattern intensities in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct PatternRaster(pub Raster<f64>);

impl PatternRaster {
    pub fn raster(&self) -> &Raster<f64> {
        &self.0
    }

    /// Constant pattern; a flood-light projector.
    pub fn uniform(width: usize, height: usize, value: f64) -> Self {
        PatternRaster(Raster::filled(width, height, value.clamp(0.0, 1.0)))
    }
}

/// `I = b + a·cos(2π·x′/period + shift)` with `x′` the rotated column coordinate.
pub fn synth_pattern(spec: &FringeSpec) -> Result<PatternRaster> {
    spec.validate()?;
    let (w, h) = (spec.pattern_resolution.0 as usize, spec.pattern_resolution.1 as usize);
    Ok(PatternRaster(Raster::from_fn(w, h, |x, y| {
        (spec.offset + spec.amplitude * spec.phase_at(x as f64, y as f64).cos()).clamp(0.0, 1.0)
    })))
}

/// Perspective divide onto the projector texture:
/// `(u, v) = rot(θ)·(X/Z, Y/Z)·scale + (0.5, 0.5)`.
pub fn projector_uv(point: &Vec3, scale: f64, rotation_deg: f64) -> Result<(f64, f64)> {
    if point.z <= 0.0 {
        return Err(Error::BehindDevice { z: point.z });
    }
    let (x, y) = (point.x / point.z, point.y / point.z);
    let (s, c) = rotation_deg.to_radians().sin_cos();
    Ok(((c * x - s * y) * scale + 0.5, (s * x + c * y) * scale + 0.5))
}

/// Bilinear lookup with edge clamping; zero outside the unit square.
pub fn sample_pattern(pattern: &PatternRaster, (u, v): (f64, f64)) -> f64 {
    if !(0.0..=1.0).contains(&u) || !(0.0..=1.0).contains(&v) {
        return 0.0;
    }
    let r = &pattern.0;
    let x = u * r.width() as f64 - 0.5;
    let y = v * r.height() as f64 - 0.5;
    let x0 = x.floor();
    let y0 = y.floor();
    let (tx, ty) = (x - x0, y - y0);
    let (x0, y0) = (x0 as isize, y0 as isize);
    let p00 = r.get_clamped(x0, y0);
    let p10 = r.get_clamped(x0 + 1, y0);
    let p01 = r.get_clamped(x0, y0 + 1);
    let p11 = r.get_clamped(x0 + 1, y0 + 1);
    let top = p00 + (p10 - p00) * tx;
    let bottom = p01 + (p11 - p01) * tx;
    top + (bottom - top) * ty
}

/// Texel-index position of a projector-frame point, from the projector's
/// pinhole intrinsics (pixel centers at `+0.5`).
pub fn texel_position(projector: &PinholeDevice, point: &Vec3) -> Result<(f64, f64)> {
    let (px, py) = projector.project_point(point)?;
    Ok((px - 0.5, py - 0.5))
}

/// Continuous pattern phase the projector casts onto a projector-frame point.
pub fn projected_phase(projector: &PinholeDevice, spec: &FringeSpec, point: &Vec3) -> Result<f64> {
    let (x, y) = texel_position(projector, point)?;
    Ok(spec.phase_at(x, y))
}

/// Projector-frame normal of the plane of points whose projected phase is
/// `phase`. The plane passes through the projector center.
pub fn iso_phase_plane_normal(projector: &PinholeDevice, spec: &FringeSpec, phase: f64) -> Vec3 {
    let across = (phase - spec.phase_shift) * spec.period / TAU;
    let (cx, cy) = spec.texture_center();
    let (s, c) = spec.rotation_deg.to_radians().sin_cos();
    // texel offset of the principal point from the texture center
    let dx = projector.center.0 - 0.5 - cx;
    let dy = projector.center.1 - 0.5 - cy;
    Vec3::new(
        c * projector.focal.0,
        s * projector.focal.1,
        c * dx + s * dy - (across - cx),
    )
}
