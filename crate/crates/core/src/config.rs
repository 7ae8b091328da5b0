//! INI-style configuration.
//!
//! ```ini
//! [ranges]
//! period = 4.4, 6.6
//! [recipe]
//! id = D3
//! models_dir = meshes
//! [render]
//! width = 256
//! [schedule]
//! n_yaw = 2
//! ```
//!
//! `#` and `;` start comments. Relative paths resolve against the config
//! file's directory. Unknown sections and keys are errors.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::datasetgen::{discover_models, ModelSource, Param, ParamRanges, Range, Recipe, RecipeId};
use crate::error::{Error, Result};
use crate::render::RenderSettings;
use crate::scene::{generate_pose_schedule, PoseSchedule, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecipeConfig {
    pub id: RecipeId,
    pub n_groups: Option<usize>,
    pub extra_groups: Option<usize>,
    pub varying: Option<Vec<Param>>,
    pub seed: u64,
    pub split_ratio: f64,
    pub models: Vec<PathBuf>,
    pub models_dir: Option<PathBuf>,
    pub colored_models: Vec<PathBuf>,
    pub colored_models_dir: Option<PathBuf>,
}

impl Default for RecipeConfig {
    fn default() -> Self {
        RecipeConfig {
            id: RecipeId::D3,
            n_groups: None,
            extra_groups: None,
            varying: None,
            seed: 0,
            split_ratio: 0.85,
            models: vec![],
            models_dir: None,
            colored_models: vec![],
            colored_models_dir: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScheduleConfig {
    pub n_yaw: usize,
    pub yaw_step_deg: f64,
    pub n_roll: usize,
    pub roll_step_deg: f64,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        ScheduleConfig {
            n_yaw: 12,
            yaw_step_deg: 30.0,
            n_roll: 12,
            roll_step_deg: 5.0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Config {
    pub ranges: ParamRanges,
    pub recipe: RecipeConfig,
    pub render: RenderSettings,
    pub schedule: ScheduleConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, String> {
    v.parse().map_err(|_| format!("'{v}' is not a valid number"))
}

fn list(v: &str) -> Vec<&str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
}

fn floats<const N: usize>(v: &str) -> std::result::Result<[f64; N], String> {
    let parts = list(v);
    if parts.len() != N {
        return Err(format!("expected {N} comma-separated numbers, got '{v}'"));
    }
    let mut out = [0.0; N];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = num(p)?;
    }
    Ok(out)
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Ok(true),
        "false" | "no" | "0" | "off" => Ok(false),
        _ => Err(format!("'{v}' is not a boolean")),
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Config::parse(&text, &base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Config> {
        let mut cfg = Config {
            base_dir: base_dir.to_path_buf(),
            ..Config::default()
        };
        let mut section: Option<String> = None;
        let mut seen = HashSet::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let err = |message: String| Error::Config { line: line_no, message };
            let line = raw.split(['#', ';']).next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(format!("unterminated section header '{line}'")))?
                    .trim();
                if !["ranges", "recipe", "render", "schedule"].contains(&name) {
                    return Err(err(format!("unknown section [{name}]")));
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(format!("expected 'key = value', got '{line}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section.as_deref().ok_or_else(|| err(format!("key '{key}' outside any section")))?;
            if !seen.insert(format!("{sec}.{key}")) {
                return Err(err(format!("duplicate key '{key}' in [{sec}]")));
            }
            cfg.set(sec, key, value).map_err(err)?;
        }
        Ok(cfg)
    }

    /// Applies a `section.key=value` override.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (path, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("override '{spec}' is not section.key=value")))?;
        let (sec, key) = path
            .trim()
            .split_once('.')
            .ok_or_else(|| Error::invalid(format!("override '{spec}' is not section.key=value")))?;
        self.set(sec, key, value.trim())
            .map_err(|m| Error::invalid(format!("override '{spec}': {m}")))
    }

    fn set(&mut self, sec: &str, key: &str, v: &str) -> std::result::Result<(), String> {
        match sec {
            "ranges" => {
                let p = Param::from_name(key).ok_or_else(|| format!("unknown key '{key}' in [ranges]"))?;
                let [lo, hi] = floats::<2>(v)?;
                if !(lo <= hi) {
                    return Err(format!("range {key} has lo > hi"));
                }
                *self.ranges.get_mut(p) = Range::new(lo, hi);
            }
            "recipe" => {
                let r = &mut self.recipe;
                match key {
                    "id" => r.id = v.parse().map_err(|e: Error| e.to_string())?,
                    "n_groups" => r.n_groups = Some(num(v)?),
                    "extra_groups" => r.extra_groups = Some(num(v)?),
                    "varying" => {
                        r.varying = Some(
                            list(v)
                                .into_iter()
                                .map(|n| Param::from_name(n).ok_or_else(|| format!("unknown parameter '{n}'")))
                                .collect::<std::result::Result<_, _>>()?,
                        )
                    }
                    "seed" => r.seed = num(v)?,
                    "split_ratio" => r.split_ratio = num(v)?,
                    "models" => r.models = list(v).into_iter().map(|p| self.base_dir.join(p)).collect(),
                    "models_dir" => r.models_dir = Some(self.base_dir.join(v)),
                    "colored_models" => r.colored_models = list(v).into_iter().map(|p| self.base_dir.join(p)).collect(),
                    "colored_models_dir" => r.colored_models_dir = Some(self.base_dir.join(v)),
                    _ => return Err(format!("unknown key '{key}' in [recipe]")),
                }
            }
            "render" => {
                let s = &mut self.render;
                match key {
                    "width" => s.width = num(v)?,
                    "height" => s.height = num(v)?,
                    "fov_deg" => s.fov_deg = num(v)?,
                    "pattern_width" => s.pattern_width = num(v)?,
                    "pattern_height" => s.pattern_height = num(v)?,
                    "pattern_period" => s.pattern_period = num(v)?,
                    "amplitude" => s.amplitude = num(v)?,
                    "offset" => s.offset = num(v)?,
                    "noise_sigma" => s.noise_sigma = num(v)?,
                    "inverse_square" => s.inverse_square = boolean(v)?,
                    "wall_y" => s.wall_y = num(v)?,
                    "projector_position" => s.projector_position = Vec3::from(floats::<3>(v)?),
                    "model_position" => s.model_position = Vec3::from(floats::<3>(v)?),
                    "camera_radius" => s.camera_radius = num(v)?,
                    "max_dim" => s.max_dim = num(v)?,
                    "modulation_threshold" => s.modulation_threshold = num(v)?,
                    _ => return Err(format!("unknown key '{key}' in [render]")),
                }
            }
            "schedule" => {
                let s = &mut self.schedule;
                match key {
                    "n_yaw" => s.n_yaw = num(v)?,
                    "yaw_step_deg" => s.yaw_step_deg = num(v)?,
                    "n_roll" => s.n_roll = num(v)?,
                    "roll_step_deg" => s.roll_step_deg = num(v)?,
                    _ => return Err(format!("unknown key '{key}' in [schedule]")),
                }
            }
            _ => return Err(format!("unknown section [{sec}]")),
        }
        Ok(())
    }

    pub fn recipe(&self) -> Recipe {
        let mut r = Recipe::standard(self.recipe.id);
        if let Some(n) = self.recipe.n_groups {
            r.n_groups = n;
        }
        if let Some(n) = self.recipe.extra_groups {
            r.extra_groups = n;
        }
        if let Some(v) = &self.recipe.varying {
            r.varying = v.clone();
        }
        r
    }

    pub fn schedule(&self) -> Result<PoseSchedule> {
        let s = &self.schedule;
        generate_pose_schedule(s.n_yaw, s.yaw_step_deg, s.n_roll, s.roll_step_deg)
    }

    /// Listed model files followed by directory contents; base set first.
    pub fn model_sources(&self) -> Result<Vec<ModelSource>> {
        let r = &self.recipe;
        let mut out = Vec::new();
        for (files, dir, colored) in [(&r.models, &r.models_dir, false), (&r.colored_models, &r.colored_models_dir, true)] {
            for f in files {
                out.push(ModelSource::from_path(f.clone(), colored)?);
            }
            if let Some(d) = dir {
                out.extend(discover_models(d, colored)?);
            }
        }
        Ok(out)
    }
}
