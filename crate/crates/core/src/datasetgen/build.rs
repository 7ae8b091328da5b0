use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;

use rand::RngExt;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::manifest::{entry_path, DatasetManifest, FailedModel, GroupRecord, ManifestEntry, ParamsSnapshot, MANIFEST_FILE, SCHEMA_VERSION};
use super::params::{assign_groups, sample_group_params, split_train_test, stream_rng, ParamRanges, Param, Recipe, Split, STREAM_ALBEDO};
use crate::error::{Error, Result};
use crate::imageio;
use crate::raster::Raster;
use crate::render::{render_pair, RenderSettings, SceneParams, VariationParams};
use crate::scene::{load_mesh, normalize_and_place, Mesh, PoseSchedule};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelSource {
    pub id: String,
    pub path: PathBuf,
    /// Member of the colored add-on set.
    pub colored: bool,
}

impl ModelSource {
    /// Uses the file stem as the model id.
    pub fn from_path(path: impl Into<PathBuf>, colored: bool) -> Result<ModelSource> {
        let path = path.into();
        let id = path
            .file_stem()
            .and_then(|s| s.to_str())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| Error::invalid(format!("{}: cannot derive a model id", path.display())))?
            .to_string();
        Ok(ModelSource { id, path, colored })
    }
}

/// Mesh files (`.stl`, `.obj`) directly inside `dir`, sorted by name.
pub fn discover_models(dir: &Path, colored: bool) -> Result<Vec<ModelSource>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("stl" | "obj")) {
            out.push(ModelSource::from_path(path, colored)?);
        }
    }
    out.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(out)
}

/// Produces the fringe image and depth map of one entry.
pub trait PairRenderer: Sync {
    type Model: Send + Sync;

    fn load(&self, source: &ModelSource) -> Result<Self::Model>;
    fn has_vertex_albedo(&self, model: &Self::Model) -> bool;
    fn with_albedo(&self, model: Self::Model, albedo: f64) -> Self::Model;
    fn render(&self, model: &Self::Model, params: &SceneParams, seed: u64) -> Result<(Raster<f64>, Raster<f64>)>;
}

/// Loads meshes from disk, normalizes them into the rig and ray-casts them.
pub struct MeshRenderer {
    pub settings: RenderSettings,
}

impl PairRenderer for MeshRenderer {
    type Model = Mesh;

    fn load(&self, source: &ModelSource) -> Result<Mesh> {
        normalize_and_place(&load_mesh(&source.path)?, self.settings.max_dim, self.settings.model_position)
    }

    fn has_vertex_albedo(&self, model: &Mesh) -> bool {
        model.albedo.is_some()
    }

    fn with_albedo(&self, model: Mesh, albedo: f64) -> Mesh {
        model.with_uniform_albedo(albedo)
    }

    fn render(&self, model: &Mesh, params: &SceneParams, seed: u64) -> Result<(Raster<f64>, Raster<f64>)> {
        let pair = render_pair(model, params, seed)?;
        Ok((pair.fringe, pair.depth))
    }
}

/// Destination of dataset files, addressed by root-relative paths.
pub trait PairStore: Sync {
    fn read(&self, rel: &str) -> Option<Vec<u8>>;
    fn write(&self, rel: &str, bytes: &[u8]) -> Result<()>;
}

pub struct FsStore {
    pub root: PathBuf,
}

impl PairStore for FsStore {
    fn read(&self, rel: &str) -> Option<Vec<u8>> {
        std::fs::read(self.root.join(rel)).ok()
    }

    fn write(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        imageio::write_file(&self.root.join(rel), bytes)
    }
}

/// In-memory store. With a capacity, every image write after the first
/// `capacity` fails as on a full disk; the manifest is always accepted.
#[derive(Default)]
pub struct MemoryStore {
    pub files: Mutex<BTreeMap<String, Vec<u8>>>,
    pub capacity: Option<usize>,
    writes: AtomicUsize,
}

impl MemoryStore {
    pub fn with_capacity(writes: usize) -> MemoryStore {
        MemoryStore {
            capacity: Some(writes),
            ..MemoryStore::default()
        }
    }

    pub fn snapshot(&self) -> BTreeMap<String, Vec<u8>> {
        self.files.lock().expect("store lock").clone()
    }
}

impl PairStore for MemoryStore {
    fn read(&self, rel: &str) -> Option<Vec<u8>> {
        self.files.lock().expect("store lock").get(rel).cloned()
    }

    fn write(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        if rel != MANIFEST_FILE && self.capacity.is_some_and(|c| self.writes.fetch_add(1, Ordering::SeqCst) >= c) {
            return Err(Error::io(rel, std::io::Error::other("no space left on device")));
        }
        self.files.lock().expect("store lock").insert(rel.to_string(), bytes.to_vec());
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuildConfig {
    pub recipe: Recipe,
    pub ranges: ParamRanges,
    pub settings: RenderSettings,
    pub schedule: PoseSchedule,
    pub seed: u64,
    pub split_ratio: f64,
    pub workers: usize,
}

#[derive(Debug)]
pub struct BuildSummary {
    pub manifest: DatasetManifest,
    pub rendered: usize,
    pub reused: usize,
    /// Set when a write failed; the stored manifest is then partial.
    pub abort: Option<Error>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn fnv1a(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Noise seed of one (model, pose) render.
pub fn entry_seed(seed: u64, model_id: &str, pose_index: usize) -> u64 {
    splitmix64(seed ^ splitmix64(fnv1a(model_id) ^ splitmix64(pose_index as u64)))
}

/// Uniform albedo for a colored model without vertex colors: luminance of
/// an RGB triple with channels uniform in [0.3, 0.9].
pub fn colored_albedo(seed: u64, model_id: &str) -> f64 {
    let mut rng = stream_rng(seed, STREAM_ALBEDO | (fnv1a(model_id) & 0xffff_ffff));
    let mut channel = || 0.3 + 0.6 * rng.random::<f64>();
    0.2126 * channel() + 0.7152 * channel() + 0.0722 * channel()
}

struct Plan<'a> {
    source: &'a ModelSource,
    group_id: usize,
    split: Split,
    variation: VariationParams,
}

enum ModelOutcome {
    Done { entries: Vec<ManifestEntry>, rendered: usize, reused: usize },
    Failed(FailedModel),
    Aborted { entries: Vec<ManifestEntry>, rendered: usize, reused: usize },
}

fn same_entry_ignoring_outputs(a: &ManifestEntry, b: &ManifestEntry) -> bool {
    a.model_id == b.model_id
        && a.group_id == b.group_id
        && a.pose_index == b.pose_index
        && a.split == b.split
        && a.fringe_path == b.fringe_path
        && a.depth_path == b.depth_path
        && a.params.variation == b.params.variation
        && a.params.yaw_deg == b.params.yaw_deg
        && a.params.roll_deg == b.params.roll_deg
        && a.params.seed == b.params.seed
}

fn stored_matches<S: PairStore>(store: &S, entry: &ManifestEntry) -> bool {
    let check = |rel: &str, hash: &str| store.read(rel).is_some_and(|b| sha256_hex(&b) == hash);
    check(&entry.fringe_path, &entry.fringe_sha256) && check(&entry.depth_path, &entry.depth_sha256)
}

/// Renders every (model, pose) pair, writes PNG/EXR files and the manifest.
/// Entries already present in a previous manifest whose files still match
/// their hashes are kept without re-rendering. Models that fail to load or
/// render are listed in `failed_models`. A failed write stops the build and
/// leaves a manifest (with `complete = false`) describing what was written.
pub fn build_dataset<R: PairRenderer, S: PairStore>(models: &[ModelSource], cfg: &BuildConfig, renderer: &R, store: &S) -> Result<BuildSummary> {
    cfg.recipe.validate()?;
    cfg.ranges.validate()?;
    if cfg.schedule.is_empty() {
        return Err(Error::invalid("empty pose schedule"));
    }
    let (colored, base): (Vec<&ModelSource>, Vec<&ModelSource>) = models.iter().partition(|m| m.colored);
    if !colored.is_empty() && cfg.recipe.extra_groups == 0 {
        return Err(Error::invalid(format!(
            "recipe {} has no groups for the {} colored models",
            cfg.recipe.id,
            colored.len()
        )));
    }
    let all_ids: Vec<String> = models.iter().map(|m| m.id.clone()).collect();
    let split = split_train_test(&all_ids, cfg.split_ratio, cfg.seed)?;
    let mut group_of = BTreeMap::new();
    if !base.is_empty() {
        let ids: Vec<String> = base.iter().map(|m| m.id.clone()).collect();
        group_of.extend(assign_groups(&ids, cfg.recipe.n_groups, cfg.seed)?);
    }
    if !colored.is_empty() {
        let ids: Vec<String> = colored.iter().map(|m| m.id.clone()).collect();
        for (id, g) in assign_groups(&ids, cfg.recipe.extra_groups, cfg.seed)? {
            group_of.insert(id, g + cfg.recipe.n_groups);
        }
    }
    let groups = (0..cfg.recipe.total_groups())
        .map(|g| {
            let colored = g >= cfg.recipe.n_groups;
            Ok(GroupRecord {
                group_id: g,
                varying: if colored { Param::ALL.to_vec() } else { cfg.recipe.varying.clone() },
                params: sample_group_params(&cfg.recipe, &cfg.ranges, g, cfg.seed)?,
                colored,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let previous: HashMap<(String, usize), ManifestEntry> = store
        .read(MANIFEST_FILE)
        .and_then(|b| DatasetManifest::from_json(&b, Path::new(MANIFEST_FILE)).ok())
        .map(|m| m.entries.into_iter().map(|e| ((e.model_id.clone(), e.pose_index), e)).collect())
        .unwrap_or_default();

    let mut plans: Vec<Plan> = models
        .iter()
        .map(|m| {
            let group_id = group_of[&m.id];
            Plan {
                source: m,
                group_id,
                split: split[&m.id],
                variation: groups[group_id].params,
            }
        })
        .collect();
    plans.sort_by(|a, b| a.source.id.cmp(&b.source.id));

    let aborted = AtomicBool::new(false);
    let first_error: Mutex<Option<Error>> = Mutex::new(None);
    let fail_write = |e: Error| {
        aborted.store(true, Ordering::SeqCst);
        first_error.lock().expect("error lock").get_or_insert(e);
    };

    let process = |plan: &Plan| -> ModelOutcome {
        let id = &plan.source.id;
        let expected: Vec<ManifestEntry> = cfg
            .schedule
            .entries
            .iter()
            .enumerate()
            .map(|(k, pose)| ManifestEntry {
                model_id: id.clone(),
                group_id: plan.group_id,
                pose_index: k,
                split: plan.split,
                params: ParamsSnapshot {
                    variation: plan.variation,
                    yaw_deg: pose.yaw_deg,
                    roll_deg: pose.roll_deg,
                    albedo: None,
                    seed: entry_seed(cfg.seed, id, k),
                },
                fringe_path: entry_path(plan.group_id, id, k, "png"),
                depth_path: entry_path(plan.group_id, id, k, "exr"),
                fringe_sha256: String::new(),
                depth_sha256: String::new(),
            })
            .collect();
        let reusable: Vec<Option<ManifestEntry>> = expected
            .iter()
            .map(|e| {
                previous
                    .get(&(e.model_id.clone(), e.pose_index))
                    .filter(|p| same_entry_ignoring_outputs(p, e) && stored_matches(store, p))
                    .cloned()
            })
            .collect();
        if reusable.iter().all(Option::is_some) {
            let entries: Vec<ManifestEntry> = reusable.into_iter().flatten().collect();
            let reused = entries.len();
            return ModelOutcome::Done { entries, rendered: 0, reused };
        }
        if aborted.load(Ordering::SeqCst) {
            let entries: Vec<ManifestEntry> = reusable.into_iter().flatten().collect();
            let reused = entries.len();
            return ModelOutcome::Aborted { entries, rendered: 0, reused };
        }
        let failed = |e: Error| {
            log::warn!("model {id}: {e}");
            ModelOutcome::Failed(FailedModel {
                model_id: id.clone(),
                path: plan.source.path.display().to_string(),
                error: e.to_string(),
            })
        };
        let mut model = match renderer.load(plan.source) {
            Ok(m) => m,
            Err(e) => return failed(e),
        };
        let albedo = (plan.source.colored && !renderer.has_vertex_albedo(&model)).then(|| colored_albedo(cfg.seed, id));
        if let Some(a) = albedo {
            model = renderer.with_albedo(model, a);
        }
        let results: Vec<Result<Option<(ManifestEntry, bool)>>> = expected
            .into_par_iter()
            .zip(reusable)
            .map(|(mut entry, prior)| {
                if let Some(p) = prior {
                    return Ok(Some((p, false)));
                }
                if aborted.load(Ordering::SeqCst) {
                    return Ok(None);
                }
                entry.params.albedo = albedo;
                let pose = &cfg.schedule.entries[entry.pose_index];
                let params = SceneParams::compose(&cfg.settings, &plan.variation, pose)?;
                let (fringe, depth) = renderer.render(&model, &params, entry.params.seed)?;
                let png = imageio::encode_png(&fringe)?;
                let exr = imageio::encode_exr(&depth)?;
                entry.fringe_sha256 = sha256_hex(&png);
                entry.depth_sha256 = sha256_hex(&exr);
                let written = store.write(&entry.fringe_path, &png).and_then(|_| store.write(&entry.depth_path, &exr));
                if let Err(e) = written {
                    fail_write(e);
                    return Ok(None);
                }
                Ok(Some((entry, true)))
            })
            .collect();
        let mut entries = Vec::new();
        let (mut rendered, mut reused) = (0, 0);
        for r in results {
            match r {
                Ok(Some((e, fresh))) => {
                    if fresh {
                        rendered += 1;
                    } else {
                        reused += 1;
                    }
                    entries.push(e);
                }
                Ok(None) => {}
                Err(e) => return failed(e),
            }
        }
        if entries.len() < cfg.schedule.len() {
            ModelOutcome::Aborted { entries, rendered, reused }
        } else {
            log::info!("model {id}: {rendered} rendered, {reused} reused");
            ModelOutcome::Done { entries, rendered, reused }
        }
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let outcomes: Vec<ModelOutcome> = pool.install(|| plans.par_iter().map(process).collect());

    let mut entries = Vec::new();
    let mut failed_models = Vec::new();
    let (mut rendered, mut reused) = (0, 0);
    for outcome in outcomes {
        match outcome {
            ModelOutcome::Done { entries: e, rendered: r, reused: u } | ModelOutcome::Aborted { entries: e, rendered: r, reused: u } => {
                entries.extend(e);
                rendered += r;
                reused += u;
            }
            ModelOutcome::Failed(f) => failed_models.push(f),
        }
    }
    entries.sort_by(|a, b| (&a.model_id, a.pose_index).cmp(&(&b.model_id, b.pose_index)));
    failed_models.sort_by(|a, b| a.model_id.cmp(&b.model_id));
    let abort = first_error.into_inner().expect("error lock");
    let manifest = DatasetManifest {
        schema_version: SCHEMA_VERSION,
        recipe: cfg.recipe.id,
        seed: cfg.seed,
        split_ratio: cfg.split_ratio,
        complete: abort.is_none(),
        ranges: cfg.ranges.clone(),
        settings: cfg.settings.clone(),
        schedule: cfg.schedule.clone(),
        groups,
        entries,
        failed_models,
    };
    store.write(MANIFEST_FILE, &manifest.to_json())?;
    Ok(BuildSummary {
        manifest,
        rendered,
        reused,
        abort,
    })
}
