use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::render::VariationParams;

/// RNG stream tags; each consumer of the dataset seed draws from its own stream.
pub(crate) const STREAM_GROUP_PARAMS: u64 = 1 << 32;
pub(crate) const STREAM_GROUP_ASSIGN: u64 = 2 << 32;
pub(crate) const STREAM_SPLIT: u64 = 3 << 32;
pub(crate) const STREAM_ALBEDO: u64 = 4 << 32;

pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The six per-group realism parameters, in table order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    Period,
    FringeRotationDeg,
    CamProjAngleDeg,
    ProjectorPower,
    Ambient,
    EnvRotationDeg,
}

impl Param {
    pub const ALL: [Param; 6] = [
        Param::Period,
        Param::FringeRotationDeg,
        Param::CamProjAngleDeg,
        Param::ProjectorPower,
        Param::Ambient,
        Param::EnvRotationDeg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::Period => "period",
            Param::FringeRotationDeg => "fringe_rotation_deg",
            Param::CamProjAngleDeg => "cam_proj_angle_deg",
            Param::ProjectorPower => "projector_power",
            Param::Ambient => "ambient",
            Param::EnvRotationDeg => "env_rotation_deg",
        }
    }

    pub fn from_name(name: &str) -> Option<Param> {
        Param::ALL.into_iter().find(|p| p.name() == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Range {
        Range { lo, hi }
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRanges {
    pub period: Range,
    pub fringe_rotation_deg: Range,
    pub cam_proj_angle_deg: Range,
    pub projector_power: Range,
    pub ambient: Range,
    pub env_rotation_deg: Range,
}

impl Default for ParamRanges {
    fn default() -> Self {
        ParamRanges {
            period: Range::new(4.4, 6.6),
            fringe_rotation_deg: Range::new(-5.0, 5.0),
            cam_proj_angle_deg: Range::new(10.0, 20.0),
            projector_power: Range::new(20.0, 55.0),
            ambient: Range::new(0.0, 1.0),
            env_rotation_deg: Range::new(0.0, 360.0),
        }
    }
}

impl ParamRanges {
    pub fn get(&self, p: Param) -> Range {
        match p {
            Param::Period => self.period,
            Param::FringeRotationDeg => self.fringe_rotation_deg,
            Param::CamProjAngleDeg => self.cam_proj_angle_deg,
            Param::ProjectorPower => self.projector_power,
            Param::Ambient => self.ambient,
            Param::EnvRotationDeg => self.env_rotation_deg,
        }
    }

    pub fn get_mut(&mut self, p: Param) -> &mut Range {
        match p {
            Param::Period => &mut self.period,
            Param::FringeRotationDeg => &mut self.fringe_rotation_deg,
            Param::CamProjAngleDeg => &mut self.cam_proj_angle_deg,
            Param::ProjectorPower => &mut self.projector_power,
            Param::Ambient => &mut self.ambient,
            Param::EnvRotationDeg => &mut self.env_rotation_deg,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for p in Param::ALL {
            let r = self.get(p);
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo <= r.hi) {
                return Err(Error::invalid(format!("range for {} is [{}, {}]", p.name(), r.lo, r.hi)));
            }
        }
        Ok(())
    }
}

fn set_param(v: &mut VariationParams, p: Param, value: f64) {
    match p {
        Param::Period => v.period = value,
        Param::FringeRotationDeg => v.fringe_rotation_deg = value,
        Param::CamProjAngleDeg => v.cam_proj_angle_deg = value,
        Param::ProjectorPower => v.projector_power = value,
        Param::Ambient => v.ambient = value,
        Param::EnvRotationDeg => v.env_rotation_deg = value,
    }
}

pub fn param_value(v: &VariationParams, p: Param) -> f64 {
    match p {
        Param::Period => v.period,
        Param::FringeRotationDeg => v.fringe_rotation_deg,
        Param::CamProjAngleDeg => v.cam_proj_angle_deg,
        Param::ProjectorPower => v.projector_power,
        Param::Ambient => v.ambient,
        Param::EnvRotationDeg => v.env_rotation_deg,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RecipeId {
    D1,
    D2,
    D3,
    D4,
}

impl fmt::Display for RecipeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for RecipeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "D1" => Ok(RecipeId::D1),
            "D2" => Ok(RecipeId::D2),
            "D3" => Ok(RecipeId::D3),
            "D4" => Ok(RecipeId::D4),
            _ => Err(Error::invalid(format!("unknown recipe '{s}' (expected D1..D4)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub id: RecipeId,
    pub varying: Vec<Param>,
    /// Groups of the base model set.
    pub n_groups: usize,
    /// Additional groups for the colored model set, numbered after the base groups.
    pub extra_groups: usize,
}

impl Recipe {
    pub fn standard(id: RecipeId) -> Recipe {
        let (varying, extra_groups) = match id {
            RecipeId::D1 => (vec![], 0),
            RecipeId::D2 => (Param::ALL[..3].to_vec(), 0),
            RecipeId::D3 => (Param::ALL.to_vec(), 0),
            RecipeId::D4 => (Param::ALL.to_vec(), 8),
        };
        Recipe {
            id,
            varying,
            n_groups: 13,
            extra_groups,
        }
    }

    pub fn total_groups(&self) -> usize {
        self.n_groups + self.extra_groups
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_groups == 0 {
            return Err(Error::invalid("recipe needs at least one group"));
        }
        Ok(())
    }
}

/// Deterministic shuffle of the sorted ids, then round-robin into groups.
pub fn assign_groups(model_ids: &[String], n_groups: usize, seed: u64) -> Result<BTreeMap<String, usize>> {
    if model_ids.is_empty() {
        return Err(Error::invalid("cannot assign groups to an empty model list"));
    }
    if n_groups == 0 {
        return Err(Error::invalid("n_groups must be at least 1"));
    }
    let mut ids = model_ids.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() != model_ids.len() {
        return Err(Error::invalid("duplicate model ids"));
    }
    ids.shuffle(&mut stream_rng(seed, STREAM_GROUP_ASSIGN));
    Ok(ids.into_iter().enumerate().map(|(i, id)| (id, i % n_groups)).collect())
}

/// Parameter template of one group: varying parameters uniform in their
/// ranges from a stream keyed by (seed, group), the rest at range midpoints.
/// All six values are always drawn so a parameter's value does not depend
/// on which others vary.
pub fn sample_group_params(recipe: &Recipe, ranges: &ParamRanges, group_id: usize, seed: u64) -> Result<VariationParams> {
    recipe.validate()?;
    ranges.validate()?;
    if group_id >= recipe.total_groups() {
        return Err(Error::invalid(format!(
            "group {group_id} out of range for {} groups",
            recipe.total_groups()
        )));
    }
    let mut rng = stream_rng(seed, STREAM_GROUP_PARAMS | group_id as u64);
    let mut v = VariationParams::default();
    for p in Param::ALL {
        let r = ranges.get(p);
        let u: f64 = rng.random();
        let value = if recipe.varying.contains(&p) { r.lo + u * (r.hi - r.lo) } else { r.midpoint() };
        set_param(&mut v, p, value);
    }
    Ok(v)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Number of training models: `round_half_up(ratio · n)` kept within `[1, n − 1]`.
pub fn train_count(n_models: usize, ratio: f64) -> usize {
    let raw = (ratio * n_models as f64 + 0.5).floor() as usize;
    raw.clamp(1, n_models.saturating_sub(1).max(1))
}

/// Model-level split: the sorted ids are shuffled and the first
/// `train_count` go to training.
pub fn split_train_test(model_ids: &[String], ratio: f64, seed: u64) -> Result<BTreeMap<String, Split>> {
    if model_ids.len() < 2 {
        return Err(Error::invalid(format!("a train/test split needs at least 2 models, got {}", model_ids.len())));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!("split ratio must be in (0, 1), got {ratio}")));
    }
    let mut ids = model_ids.to_vec();
    ids.sort();
    ids.dedup();
    if ids.len() != model_ids.len() {
        return Err(Error::invalid("duplicate model ids"));
    }
    ids.shuffle(&mut stream_rng(seed, STREAM_SPLIT));
    let n_train = train_count(ids.len(), ratio);
    Ok(ids
        .into_iter()
        .enumerate()
        .map(|(i, id)| (id, if i < n_train { Split::Train } else { Split::Test }))
        .collect())
}
