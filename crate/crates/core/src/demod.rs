//! Classical fringe analysis: N-step phase shifting, Fourier-transform
//! profilometry, multi-frequency temporal unwrapping, and triangulation of
//! unwrapped phase against the projector's iso-phase planes.

use std::f64::consts::{PI, TAU};

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fringe::{iso_phase_plane_normal, FringeSpec};
use crate::raster::Raster;
use crate::scene::PinholeDevice;

/// Minimum fringe modulation (fraction of full scale) for a valid pixel.
pub const DEFAULT_MODULATION_THRESHOLD: f64 = 0.02;

/// Rays meeting an iso-phase plane at less than this angle are dropped.
pub const MIN_INTERSECTION_ANGLE_DEG: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PhaseState {
    Wrapped,
    Unwrapped,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhaseMap {
    pub phase: Raster<f64>,
    pub state: PhaseState,
    pub modulation: Raster<f64>,
    pub valid: Raster<bool>,
    /// Integer fringe order added by unwrapping; `Φ = φ + 2π·order`.
    pub fringe_order: Option<Raster<i32>>,
}

impl PhaseMap {
    pub fn dims(&self) -> (usize, usize) {
        self.phase.dims()
    }

    pub fn valid_fraction(&self) -> f64 {
        self.valid.as_slice().iter().filter(|&&v| v).count() as f64 / self.valid.len().max(1) as f64
    }

    /// Treats a wrapped map whose true phase lies in `[0, 2π)` (a single
    /// fringe across the field) as absolute phase.
    pub fn lift_single_fringe(&self) -> PhaseMap {
        let order = self.phase.map(|&p| if p < 0.0 { 1 } else { 0 });
        PhaseMap {
            phase: self.phase.zip_map(&order, |&p, &k| p + TAU * k as f64).expect("same size"),
            state: PhaseState::Unwrapped,
            modulation: self.modulation.clone(),
            valid: self.valid.clone(),
            fringe_order: Some(order),
        }
    }
}

/// Reduces an angle into `(−π, π]`.
#[inline]
pub fn wrap(phase: f64) -> f64 {
    let r = phase - TAU * (phase / TAU).round();
    if r <= -PI {
        r + TAU
    } else if r > PI {
        r - TAU
    } else {
        r
    }
}

fn snap(v: f64) -> f64 {
    if v.abs() < 1e-15 {
        0.0
    } else {
        v
    }
}

pub fn ps_wrapped_phase(images: &[Raster<f64>]) -> Result<PhaseMap> {
    ps_wrapped_phase_with(images, DEFAULT_MODULATION_THRESHOLD)
}

/// N-step phase shifting with shifts `2πk/N`:
/// `φ = atan2(−Σ Iₖ sin δₖ, Σ Iₖ cos δₖ)`, modulation `(2/N)·|Σ Iₖ e^{iδₖ}|`.
pub fn ps_wrapped_phase_with(images: &[Raster<f64>], threshold: f64) -> Result<PhaseMap> {
    let n = images.len();
    if n < 3 {
        return Err(Error::invalid(format!("phase shifting needs N ≥ 3 images, got {n}")));
    }
    for img in &images[1..] {
        images[0].check_same_size(img)?;
    }
    let trig: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let (s, c) = (TAU * k as f64 / n as f64).sin_cos();
            (snap(s), snap(c))
        })
        .collect();
    let (w, h) = images[0].dims();
    let mut phase = Raster::filled(w, h, 0.0);
    let mut modulation = Raster::filled(w, h, 0.0);
    for idx in 0..w * h {
        let (mut s, mut c) = (0.0, 0.0);
        for (img, &(sk, ck)) in images.iter().zip(&trig) {
            let v = img.as_slice()[idx];
            s += v * sk;
            c += v * ck;
        }
        let mut p = (-s).atan2(c);
        if p <= -PI {
            p += TAU;
        }
        phase.as_mut_slice()[idx] = p;
        modulation.as_mut_slice()[idx] = 2.0 / n as f64 * s.hypot(c);
    }
    let valid = modulation.map(|&m| m >= threshold);
    Ok(PhaseMap {
        phase,
        state: PhaseState::Wrapped,
        modulation,
        valid,
        fringe_order: None,
    })
}

pub fn ftp_wrapped_phase(image: &Raster<f64>, carrier_freq: f64, half_bandwidth: f64) -> Result<PhaseMap> {
    ftp_wrapped_phase_with(image, carrier_freq, half_bandwidth, DEFAULT_MODULATION_THRESHOLD)
}

/// Row-wise Fourier-transform profilometry. Frequencies are in cycles per
/// image width. The positive carrier lobe is isolated with a raised-cosine
/// band-pass of half width `half_bandwidth`; the phase is the angle of the
/// resulting analytic signal minus the carrier ramp `2π·f₀·x/W`.
pub fn ftp_wrapped_phase_with(image: &Raster<f64>, carrier_freq: f64, half_bandwidth: f64, threshold: f64) -> Result<PhaseMap> {
    if !(half_bandwidth > 0.0) {
        return Err(Error::invalid(format!("half bandwidth must be positive, got {half_bandwidth}")));
    }
    let (w, h) = image.dims();
    let nyquist = w as f64 / 2.0;
    if carrier_freq - half_bandwidth <= 0.0 {
        return Err(Error::SpectrumOverlap(format!(
            "carrier {carrier_freq} − half bandwidth {half_bandwidth} reaches DC"
        )));
    }
    if carrier_freq + half_bandwidth >= nyquist {
        return Err(Error::SpectrumOverlap(format!(
            "carrier {carrier_freq} + half bandwidth {half_bandwidth} reaches Nyquist {nyquist}"
        )));
    }
    let window: Vec<f64> = (0..w)
        .map(|k| {
            let f = if k as f64 <= nyquist { k as f64 } else { k as f64 - w as f64 };
            let d = (f - carrier_freq).abs();
            if f > 0.0 && d < half_bandwidth {
                0.5 * (1.0 + (PI * d / half_bandwidth).cos())
            } else {
                0.0
            }
        })
        .collect();
    let mut planner = FftPlanner::<f64>::new();
    let forward = planner.plan_fft_forward(w);
    let inverse = planner.plan_fft_inverse(w);
    let mut phase = Raster::filled(w, h, 0.0);
    let mut modulation = Raster::filled(w, h, 0.0);
    let mut buf = vec![Complex::new(0.0, 0.0); w];
    for y in 0..h {
        for (x, b) in buf.iter_mut().enumerate() {
            *b = Complex::new(*image.get(x, y), 0.0);
        }
        forward.process(&mut buf);
        for (b, &wk) in buf.iter_mut().zip(&window) {
            *b *= wk;
        }
        inverse.process(&mut buf);
        for (x, z) in buf.iter().enumerate() {
            let z = z / w as f64;
            let ramp = TAU * carrier_freq * x as f64 / w as f64;
            let demod = z * Complex::from_polar(1.0, -ramp);
            *phase.get_mut(x, y) = wrap(demod.arg());
            *modulation.get_mut(x, y) = 2.0 * z.norm();
        }
    }
    let valid = modulation.map(|&m| m >= threshold);
    Ok(PhaseMap {
        phase,
        state: PhaseState::Wrapped,
        modulation,
        valid,
        fringe_order: None,
    })
}

/// Two-frequency temporal unwrapping:
/// `Φ_high = φ_high + 2π·round((ratio·Φ_low − φ_high)/2π)`.
pub fn temporal_unwrap(phase_high: &PhaseMap, phase_low: &PhaseMap, freq_ratio: f64) -> Result<PhaseMap> {
    if !(freq_ratio > 1.0) {
        return Err(Error::invalid(format!("frequency ratio must exceed 1, got {freq_ratio}")));
    }
    phase_high.phase.check_same_size(&phase_low.phase)?;
    let order = phase_high
        .phase
        .zip_map(&phase_low.phase, |&hi, &lo| ((freq_ratio * lo - hi) / TAU).round() as i32)?;
    let phase = phase_high.phase.zip_map(&order, |&hi, &k| hi + TAU * k as f64)?;
    let valid = phase_high.valid.zip_map(&phase_low.valid, |&a, &b| a && b)?;
    Ok(PhaseMap {
        phase,
        state: PhaseState::Unwrapped,
        modulation: phase_high.modulation.clone(),
        valid,
        fringe_order: Some(order),
    })
}

/// Intersects each camera ray with the projector plane of its unwrapped
/// phase. Returns camera-space Z; invalid pixels are NaN.
pub fn phase_to_depth(phase: &PhaseMap, camera: &PinholeDevice, projector: &PinholeDevice, fringe: &FringeSpec) -> Result<Raster<f64>> {
    if phase.state != PhaseState::Unwrapped {
        return Err(Error::invalid("triangulation needs an unwrapped phase map"));
    }
    if phase.dims() != (camera.width(), camera.height()) {
        return Err(Error::SizeMismatch {
            left: phase.dims(),
            right: (camera.width(), camera.height()),
        });
    }
    let min_sin = MIN_INTERSECTION_ANGLE_DEG.to_radians().sin();
    let baseline = projector.position() - camera.position();
    let (w, h) = phase.dims();
    Ok(Raster::from_fn(w, h, |i, j| {
        if !*phase.valid.get(i, j) {
            return f64::NAN;
        }
        let normal = projector.pose.apply_vector(&iso_phase_plane_normal(projector, fringe, *phase.phase.get(i, j)));
        let (_, dir) = camera.world_ray(i, j);
        let denom = normal.dot(&dir);
        if denom.abs() < min_sin * normal.norm() * dir.norm() {
            return f64::NAN;
        }
        let t = normal.dot(&baseline) / denom;
        if t > 0.0 {
            t
        } else {
            f64::NAN
        }
    }))
}

/// Camera-space depth of the background wall plane `y = wall_y` per pixel.
pub fn wall_depth(camera: &PinholeDevice, wall_y: f64) -> Raster<f64> {
    Raster::from_fn(camera.width(), camera.height(), |i, j| {
        let (o, d) = camera.world_ray(i, j);
        let t = (wall_y - o.y) / d.y;
        if t > 0.0 && t.is_finite() {
            t
        } else {
            f64::MAX
        }
    })
}

/// Everything the reconstruction needs to know about the virtual rig.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub camera: PinholeDevice,
    pub projector: PinholeDevice,
    /// Pattern description; `period` is overridden per frequency.
    pub fringe: FringeSpec,
    /// Fringe cycles across the pattern width, ascending; the first must
    /// not exceed one cycle.
    pub frequencies: Vec<f64>,
    pub n_steps: usize,
    pub wall_y: f64,
    pub modulation_threshold: f64,
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    pub phase: PhaseMap,
    /// Camera-space Z, NaN where invalid.
    pub depth: Raster<f64>,
}

impl Reconstruction {
    /// Depth with invalid pixels replaced by the wall depth.
    pub fn depth_for_export(&self, calib: &Calibration) -> Raster<f64> {
        let wall = wall_depth(&calib.camera, calib.wall_y);
        self.depth
            .zip_map(&wall, |&d, &w| if d.is_finite() { d } else { w })
            .expect("same size")
    }
}

/// Phase shifting per frequency, hierarchical temporal unwrapping from the
/// single-fringe map upward, then triangulation at the finest frequency.
/// `stacks[i]` holds the images for `calib.frequencies[i]`.
pub fn reconstruct(stacks: &[Vec<Raster<f64>>], calib: &Calibration) -> Result<Reconstruction> {
    if stacks.len() != calib.frequencies.len() || stacks.is_empty() {
        return Err(Error::invalid(format!(
            "{} image stacks for {} frequencies",
            stacks.len(),
            calib.frequencies.len()
        )));
    }
    if calib.frequencies[0] > 1.0 {
        return Err(Error::invalid(format!(
            "lowest frequency {} exceeds one fringe across the pattern; absolute phase is ambiguous",
            calib.frequencies[0]
        )));
    }
    let maps = stacks
        .iter()
        .map(|s| ps_wrapped_phase_with(s, calib.modulation_threshold))
        .collect::<Result<Vec<_>>>()?;
    let mut absolute = maps[0].lift_single_fringe();
    for (map, f) in maps[1..].iter().zip(calib.frequencies.windows(2)) {
        absolute = temporal_unwrap(map, &absolute, f[1] / f[0])?;
    }
    let top = calib.fringe.with_cycles(*calib.frequencies.last().expect("non-empty"));
    let depth = phase_to_depth(&absolute, &calib.camera, &calib.projector, &top)?;
    Ok(Reconstruction {
        phase: absolute,
        depth,
    })
}

/// Removes pixels within `band` pixels (Chebyshev) of a pixel outside `mask`.
pub fn erode(mask: &Raster<bool>, band: usize) -> Raster<bool> {
    let (w, h) = mask.dims();
    let b = band as isize;
    Raster::from_fn(w, h, |i, j| {
        if !*mask.get(i, j) {
            return false;
        }
        for dy in -b..=b {
            for dx in -b..=b {
                let (x, y) = (i as isize + dx, j as isize + dy);
                if x < 0 || y < 0 || x >= w as isize || y >= h as isize || !*mask.get(x as usize, y as usize) {
                    return false;
                }
            }
        }
        true
    })
}

/// RMS of `estimate − truth` over pixels in `mask` where the estimate is finite.
pub fn rms_error(estimate: &Raster<f64>, truth: &Raster<f64>, mask: &Raster<bool>) -> Result<(f64, usize)> {
    estimate.check_same_size(truth)?;
    estimate.check_same_size(mask)?;
    let (mut sum, mut n) = (0.0, 0usize);
    for ((e, t), m) in estimate.as_slice().iter().zip(truth.as_slice()).zip(mask.as_slice()) {
        if *m && e.is_finite() {
            sum += (e - t).powi(2);
            n += 1;
        }
    }
    Ok((if n > 0 { (sum / n as f64).sqrt() } else { f64::NAN }, n))
}
