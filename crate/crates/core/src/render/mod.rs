//! Direct-illumination ray casting of fringe images and depth maps.
//!
//! Each camera pixel casts one ray through its center. The nearest hit on
//! the object or the background wall fixes the depth; object hits are lit
//! by the projector (Lambertian, point emitter, shadow-tested) plus an
//! ambient term. The wall only receives ambient light.

pub mod bvh;
mod params;

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use params::{env_weight, Falloff, RenderSettings, SceneParams, VariationParams, FULL_SCALE_POWER};

use crate::error::{Error, Result};
use crate::fringe::{projector_uv, sample_pattern, synth_pattern, PatternRaster};
use crate::raster::Raster;
use crate::scene::{Mesh, Vec3, DEFAULT_ALBEDO};
use bvh::Bvh;

/// Relative offset applied to shadow-ray parameters to skip the surface
/// the ray starts on.
const SHADOW_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Surface {
    Object,
    Wall,
    Nothing,
}

/// Per-pixel shading inputs that are independent of the projected pattern.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub surface: Surface,
    /// Camera-space Z of the hit.
    pub depth: f64,
    /// Multiplier on the pattern value: albedo · cos · power · falloff · visibility.
    pub lit: f64,
    /// Texture coordinate of the hit in the projector pattern.
    pub uv: (f64, f64),
    /// Pattern-independent radiance (ambient · albedo).
    pub ambient: f64,
}

/// Traced scene for one camera view.
#[derive(Clone, Debug)]
pub struct GBuffer {
    pub samples: Raster<Sample>,
}

impl GBuffer {
    pub fn depth(&self) -> Raster<f64> {
        self.samples.map(|s| s.depth)
    }

    pub fn object_mask(&self) -> Raster<bool> {
        self.samples.map(|s| s.surface == Surface::Object)
    }
}

/// A posed object plus its acceleration structure.
pub struct Scene<'a> {
    pub params: &'a SceneParams,
    world: Mesh,
    bvh: Bvh,
}

impl<'a> Scene<'a> {
    pub fn new(mesh: &Mesh, params: &'a SceneParams) -> Scene<'a> {
        let world = mesh.transformed(&params.object_pose);
        let bvh = Bvh::build(&world);
        Scene { params, world, bvh }
    }

    fn wall_hit(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        if dir.y == 0.0 {
            return None;
        }
        let t = (self.params.wall_y - origin.y) / dir.y;
        (t > 0.0).then_some(t)
    }

    fn shade_object(&self, point: &Vec3, dir: &Vec3, hit: &bvh::Hit) -> Sample {
        let p = self.params;
        let [a, b, c] = self.world.corners(hit.triangle);
        let mut normal = (b - a).cross(&(c - a)).normalize();
        if normal.dot(dir) > 0.0 {
            normal = -normal;
        }
        let albedo = self.world.albedo_at(hit.triangle, hit.u, hit.v);
        let to_light = p.projector.position() - point;
        let distance = to_light.norm();
        let cos = normal.dot(&(to_light / distance));
        let local = p.projector.to_device(point);
        let mut lit = 0.0;
        let mut uv = (-1.0, -1.0);
        if cos > 0.0 && local.z > 0.0 {
            if let Ok(coords) = projector_uv(&local, p.projector_scale(), 0.0) {
                uv = coords;
                if !self.occluded(point, &to_light) {
                    lit = albedo * cos * p.power_norm() * p.falloff.factor(distance);
                }
            }
        }
        Sample {
            surface: Surface::Object,
            depth: 0.0,
            lit,
            uv,
            ambient: albedo * p.ambient_level(),
        }
    }

    fn occluded(&self, point: &Vec3, to_light: &Vec3) -> bool {
        let t_max = 1.0 - SHADOW_EPS;
        if self.bvh.any_hit(point, to_light, SHADOW_EPS, t_max) {
            return true;
        }
        self.wall_hit(point, to_light)
            .is_some_and(|t| t > SHADOW_EPS && t < t_max)
    }

    fn trace_pixel(&self, i: usize, j: usize) -> Sample {
        let (origin, dir) = self.params.camera.world_ray(i, j);
        let wall = self.wall_hit(&origin, &dir);
        let t_max = wall.unwrap_or(f64::INFINITY);
        if let Some(hit) = self.bvh.closest_hit(&origin, &dir, 0.0, t_max) {
            let point = origin + dir * hit.t;
            let mut s = self.shade_object(&point, &dir, &hit);
            s.depth = hit.t;
            return s;
        }
        match wall {
            Some(t) => Sample {
                surface: Surface::Wall,
                depth: t,
                lit: 0.0,
                uv: (-1.0, -1.0),
                ambient: DEFAULT_ALBEDO * self.params.ambient_level(),
            },
            None => Sample {
                surface: Surface::Nothing,
                depth: f64::INFINITY,
                lit: 0.0,
                uv: (-1.0, -1.0),
                ambient: 0.0,
            },
        }
    }

    /// Casts every camera ray; rows are traced in parallel.
    pub fn trace(&self) -> GBuffer {
        let (w, h) = (self.params.camera.width(), self.params.camera.height());
        let rows: Vec<Vec<Sample>> = (0..h)
            .into_par_iter()
            .map(|j| (0..w).map(|i| self.trace_pixel(i, j)).collect())
            .collect();
        let samples = Raster::from_vec(w, h, rows.into_iter().flatten().collect()).expect("row sizes match");
        GBuffer { samples }
    }
}

/// Applies one projected pattern to a traced view. Noise is additive
/// Gaussian, drawn from a per-row stream of `seed` so the image does not
/// depend on scheduling.
pub fn shade(gbuffer: &GBuffer, pattern: &PatternRaster, noise_sigma: f64, seed: u64) -> Raster<f64> {
    let w = gbuffer.samples.width();
    let rows: Vec<Vec<f64>> = gbuffer
        .samples
        .as_slice()
        .par_chunks(w.max(1))
        .enumerate()
        .map(|(j, row)| {
            let mut rng = (noise_sigma > 0.0).then(|| {
                let mut r = ChaCha8Rng::seed_from_u64(seed);
                r.set_stream(j as u64);
                r
            });
            row.iter()
                .map(|s| {
                    let mut v = s.ambient;
                    if s.lit > 0.0 {
                        v += s.lit * sample_pattern(pattern, s.uv);
                    }
                    if let Some(r) = rng.as_mut() {
                        let n: f64 = StandardNormal.sample(r);
                        v += noise_sigma * n;
                    }
                    v.clamp(0.0, 1.0)
                })
                .collect()
        })
        .collect();
    Raster::from_vec(w, gbuffer.samples.height(), rows.into_iter().flatten().collect()).expect("row sizes match")
}

/// Fringe image and ground-truth depth rendered from identical geometry.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePair {
    pub fringe: Raster<f64>,
    pub depth: Raster<f64>,
    pub params: SceneParams,
    pub model_id: String,
    pub pose_index: usize,
    pub group_id: usize,
}

pub fn render_fringe(mesh: &Mesh, params: &SceneParams, seed: u64) -> Result<Raster<f64>> {
    let pattern = synth_pattern(&params.fringe)?;
    render_fringe_with_pattern(mesh, params, &pattern, seed)
}

/// Renders with an arbitrary projected pattern (flood light, test charts).
pub fn render_fringe_with_pattern(mesh: &Mesh, params: &SceneParams, pattern: &PatternRaster, seed: u64) -> Result<Raster<f64>> {
    let gbuffer = Scene::new(mesh, params).trace();
    Ok(shade(&gbuffer, pattern, params.noise_sigma, seed))
}

pub fn render_depth(mesh: &Mesh, params: &SceneParams) -> Raster<f64> {
    Scene::new(mesh, params).trace().depth()
}

pub fn render_pair(mesh: &Mesh, params: &SceneParams, seed: u64) -> Result<ImagePair> {
    let pattern = synth_pattern(&params.fringe)?;
    let gbuffer = Scene::new(mesh, params).trace();
    Ok(ImagePair {
        fringe: shade(&gbuffer, &pattern, params.noise_sigma, seed),
        depth: gbuffer.depth(),
        params: params.clone(),
        model_id: String::new(),
        pose_index: 0,
        group_id: 0,
    })
}

/// N phase-shifted fringe images at one fringe frequency.
#[derive(Clone, Debug, PartialEq)]
pub struct FringeStack {
    /// Fringe cycles across the pattern width.
    pub frequency: f64,
    pub images: Vec<Raster<f64>>,
    pub depth: Raster<f64>,
}

/// For each frequency, `n_steps` images with shifts `2πk/n_steps`. The
/// scene is traced once and shared by every image.
pub fn render_phase_sequence(mesh: &Mesh, params: &SceneParams, n_steps: usize, frequencies: &[f64], seed: u64) -> Result<Vec<FringeStack>> {
    if n_steps < 3 {
        return Err(Error::invalid(format!("phase sequence needs N ≥ 3 steps, got {n_steps}")));
    }
    if frequencies.is_empty() {
        return Err(Error::invalid("phase sequence needs at least one frequency"));
    }
    let gbuffer = Scene::new(mesh, params).trace();
    let depth = gbuffer.depth();
    let mut image_index = 0u64;
    let mut stacks = Vec::with_capacity(frequencies.len());
    for &freq in frequencies {
        let base = params.fringe.with_cycles(freq);
        let mut images = Vec::with_capacity(n_steps);
        for k in 0..n_steps {
            let spec = crate::fringe::FringeSpec {
                phase_shift: TAU * k as f64 / n_steps as f64,
                ..base.clone()
            };
            let pattern = synth_pattern(&spec)?;
            let image_seed = seed ^ image_index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
            images.push(shade(&gbuffer, &pattern, params.noise_sigma, image_seed));
            image_index += 1;
        }
        stacks.push(FringeStack {
            frequency: freq,
            images,
            depth: depth.clone(),
        });
    }
    Ok(stacks)
}
