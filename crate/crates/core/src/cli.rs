//! Command-line front end. Every invocation produces a [`RunReport`].

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Config;
use crate::datasetgen::{build_dataset, sample_group_params, BuildConfig, FsStore, MeshRenderer, Param, RecipeId};
use crate::demod::{erode, reconstruct, rms_error, wall_depth, Calibration};
use crate::error::{Error, Result};
use crate::imageio;
use crate::metrics::{error_std, mae, minmax_normalize, ssim, MetricConfig};
use crate::raster::Raster;
use crate::render::{render_pair, render_phase_sequence, SceneParams, VariationParams};
use crate::scene::{load_mesh, normalize_and_place};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const CALIBRATION_FILE: &str = "calibration.json";

#[derive(Parser, Debug)]
#[command(name = "fpp-forge", version, about = "Virtual fringe-projection profilometry toolkit")]
pub struct Cli {
    /// Also write the JSON run report to this file.
    #[arg(long, global = true)]
    pub report: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Render one fringe/depth pair, or a phase-shifted sequence.
    Render(RenderArgs),
    /// Dataset operations.
    #[command(subcommand)]
    Dataset(DatasetCommand),
    /// Reconstruct depth from a rendered phase-shift sequence.
    Demod(DemodArgs),
    /// Compare predicted depth images against ground truth.
    Eval(EvalArgs),
}

#[derive(Subcommand, Debug)]
pub enum DatasetCommand {
    /// Render every model under every pose of the schedule.
    Build(BuildArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct ConfigArgs {
    /// INI configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override a config value, e.g. `--set render.width=256`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    pub overrides: Vec<String>,
}

impl ConfigArgs {
    fn load(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        for o in &self.overrides {
            cfg.apply_override(o)?;
        }
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    #[arg(long)]
    pub mesh: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Noise seed; defaults to the config's recipe seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Use this group's sampled parameters instead of range midpoints.
    #[arg(long)]
    pub group: Option<usize>,
    /// Index into the pose schedule.
    #[arg(long, default_value_t = 0)]
    pub pose: usize,
    /// Render a phase-shift sequence with this many steps per frequency.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Fringe frequencies of the sequence, in cycles across the pattern.
    #[arg(long, value_delimiter = ',', default_value = "1,16")]
    pub freqs: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub config: ConfigArgs,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub recipe: Option<RecipeId>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug)]
pub struct DemodArgs {
    /// Directory holding `f<F>_s<K>.png` images.
    #[arg(long)]
    pub input: PathBuf,
    /// Calibration JSON; defaults to `<input>/calibration.json`.
    #[arg(long)]
    pub calib: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Ground-truth depth for the residual report; defaults to `<input>/depth.exr` if present.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Silhouette band excluded from the residual, in pixels.
    #[arg(long, default_value_t = 2)]
    pub band: usize,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Compare raw values instead of per-image [−1, 1] normalized ones.
    #[arg(long)]
    pub raw: bool,
    /// SSIM dynamic range; defaults to 2 (normalized data).
    #[arg(long)]
    pub dynamic_range: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ItemStatus {
    pub id: String,
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<Value>,
}

impl ItemStatus {
    fn ok(id: impl Into<String>) -> ItemStatus {
        ItemStatus {
            id: id.into(),
            status: "ok".into(),
            message: None,
            metrics: None,
        }
    }

    fn failed(id: impl Into<String>, message: impl Into<String>) -> ItemStatus {
        ItemStatus {
            id: id.into(),
            status: "failed".into(),
            message: Some(message.into()),
            metrics: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub wall_time_s: f64,
    pub items: Vec<ItemStatus>,
    pub aggregate: Value,
    pub exit_code: i32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunReport {
    fn new(command: &str) -> RunReport {
        RunReport {
            command: command.into(),
            config: Value::Null,
            seed: None,
            wall_time_s: 0.0,
            items: vec![],
            aggregate: json!({}),
            exit_code: EXIT_OK,
            error: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::Io { .. } | Error::Json { .. } | Error::Codec(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Help and version requests return `None` after printing.
pub fn run<I, T>(args: I) -> Option<RunReport>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let start = Instant::now();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand) {
                let _ = e.print();
                return None;
            }
            let mut report = RunReport::new(args.get(1).and_then(|a| a.to_str()).unwrap_or(""));
            report.exit_code = EXIT_USAGE;
            report.error = Some(e.render().to_string().trim().to_string());
            return Some(report);
        }
    };
    let name = match &cli.command {
        Command::Render(_) => "render",
        Command::Dataset(DatasetCommand::Build(_)) => "dataset build",
        Command::Demod(_) => "demod",
        Command::Eval(_) => "eval",
    };
    let mut report = RunReport::new(name);
    let result = match &cli.command {
        Command::Render(a) => cmd_render(a, &mut report),
        Command::Dataset(DatasetCommand::Build(a)) => cmd_dataset_build(a, &mut report),
        Command::Demod(a) => cmd_demod(a, &mut report),
        Command::Eval(a) => cmd_eval(a, &mut report),
    };
    if let Err(e) = result {
        report.exit_code = exit_code_for(&e);
        report.error = Some(e.to_string());
    }
    report.wall_time_s = start.elapsed().as_secs_f64();
    if let Some(path) = &cli.report {
        if let Err(e) = imageio::write_file(path, report.to_json().as_bytes()) {
            report.exit_code = EXIT_IO;
            report.error.get_or_insert_with(|| e.to_string());
        }
    }
    Some(report)
}

fn config_json(cfg: &Config) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn freq_label(f: f64) -> String {
    format!("{f}")
}

/// File name of step `k` at frequency `f` in a rendered sequence.
pub fn sequence_file(f: f64, k: usize) -> String {
    format!("f{}_s{k}.png", freq_label(f))
}

fn cmd_render(a: &RenderArgs, report: &mut RunReport) -> Result<()> {
    let cfg = a.config.load()?;
    report.config = config_json(&cfg);
    let seed = a.seed.unwrap_or(cfg.recipe.seed);
    report.seed = Some(seed);
    let schedule = cfg.schedule()?;
    let pose = schedule
        .entries
        .get(a.pose)
        .ok_or_else(|| Error::invalid(format!("pose {} out of range for {} poses", a.pose, schedule.len())))?;
    let variation = match a.group {
        Some(g) => sample_group_params(&cfg.recipe(), &cfg.ranges, g, seed)?,
        None => {
            let mut v = VariationParams::default();
            let mid = |p: Param| cfg.ranges.get(p).midpoint();
            v.period = mid(Param::Period);
            v.fringe_rotation_deg = mid(Param::FringeRotationDeg);
            v.cam_proj_angle_deg = mid(Param::CamProjAngleDeg);
            v.projector_power = mid(Param::ProjectorPower);
            v.ambient = mid(Param::Ambient);
            v.env_rotation_deg = mid(Param::EnvRotationDeg);
            v
        }
    };
    let params = SceneParams::compose(&cfg.render, &variation, pose)?;
    let mesh = normalize_and_place(&load_mesh(&a.mesh)?, cfg.render.max_dim, cfg.render.model_position)?;
    let mut written = Vec::new();
    match a.steps {
        None => {
            let pair = render_pair(&mesh, &params, seed)?;
            let fringe = a.out.join("fringe.png");
            let depth = a.out.join("depth.exr");
            imageio::write_png(&fringe, &pair.fringe)?;
            imageio::write_exr(&depth, &pair.depth)?;
            written.extend([fringe, depth]);
        }
        Some(n) => {
            let stacks = render_phase_sequence(&mesh, &params, n, &a.freqs, seed)?;
            for s in &stacks {
                for (k, img) in s.images.iter().enumerate() {
                    let p = a.out.join(sequence_file(s.frequency, k));
                    imageio::write_png(&p, img)?;
                    written.push(p);
                }
            }
            let depth = a.out.join("depth.exr");
            imageio::write_exr(&depth, &stacks[0].depth)?;
            let calib = Calibration {
                camera: params.camera.clone(),
                projector: params.projector.clone(),
                fringe: params.fringe.clone(),
                frequencies: a.freqs.clone(),
                n_steps: n,
                wall_y: params.wall_y,
                modulation_threshold: cfg.render.modulation_threshold,
            };
            let cpath = a.out.join(CALIBRATION_FILE);
            imageio::write_file(&cpath, serde_json::to_string_pretty(&calib).expect("calibration serializes").as_bytes())?;
            written.extend([depth, cpath]);
        }
    }
    report.items = written.iter().map(|p| ItemStatus::ok(p.display().to_string())).collect();
    report.aggregate = json!({
        "files": written.len(),
        "params": params,
        "triangles": mesh.triangle_count(),
    });
    Ok(())
}

fn cmd_dataset_build(a: &BuildArgs, report: &mut RunReport) -> Result<()> {
    let mut cfg = a.config.load()?;
    if let Some(r) = a.recipe {
        cfg.recipe.id = r;
    }
    if let Some(s) = a.seed {
        cfg.recipe.seed = s;
    }
    report.config = config_json(&cfg);
    report.seed = Some(cfg.recipe.seed);
    let models = cfg.model_sources()?;
    if models.is_empty() {
        return Err(Error::invalid("no models configured (set recipe.models or recipe.models_dir)"));
    }
    let workers = a
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    let build = BuildConfig {
        recipe: cfg.recipe(),
        ranges: cfg.ranges.clone(),
        settings: cfg.render.clone(),
        schedule: cfg.schedule()?,
        seed: cfg.recipe.seed,
        split_ratio: cfg.recipe.split_ratio,
        workers,
    };
    let renderer = MeshRenderer {
        settings: cfg.render.clone(),
    };
    let store = FsStore { root: a.out.clone() };
    let summary = build_dataset(&models, &build, &renderer, &store)?;
    let m = &summary.manifest;
    let mut per_model: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &m.entries {
        *per_model.entry(e.model_id.as_str()).or_default() += 1;
    }
    report.items = per_model
        .iter()
        .map(|(id, n)| ItemStatus {
            metrics: Some(json!({ "entries": n })),
            ..ItemStatus::ok(*id)
        })
        .chain(m.failed_models.iter().map(|f| ItemStatus::failed(&f.model_id, &f.error)))
        .collect();
    report.aggregate = json!({
        "entries": m.entries.len(),
        "rendered": summary.rendered,
        "reused": summary.reused,
        "models": per_model.len(),
        "failed_models": m.failed_models.len(),
        "groups": m.groups,
        "train_models": m.models_in(crate::datasetgen::Split::Train).len(),
        "test_models": m.models_in(crate::datasetgen::Split::Test).len(),
        "complete": m.complete,
        "workers": workers,
    });
    if let Some(e) = summary.abort {
        report.exit_code = EXIT_IO;
        report.error = Some(format!("build aborted, partial manifest written: {e}"));
    } else if !m.failed_models.is_empty() {
        report.exit_code = EXIT_PARTIAL;
    }
    Ok(())
}

fn cmd_demod(a: &DemodArgs, report: &mut RunReport) -> Result<()> {
    let cpath = a.calib.clone().unwrap_or_else(|| a.input.join(CALIBRATION_FILE));
    let text = std::fs::read(&cpath).map_err(|e| Error::io(&cpath, e))?;
    let calib: Calibration = serde_json::from_slice(&text).map_err(|source| Error::Json {
        path: cpath.clone(),
        source,
    })?;
    report.config = serde_json::to_value(&calib).expect("calibration serializes");
    let mut stacks = Vec::new();
    for &f in &calib.frequencies {
        let mut images = Vec::new();
        while a.input.join(sequence_file(f, images.len())).exists() {
            images.push(imageio::read_png(a.input.join(sequence_file(f, images.len())))?);
        }
        if images.len() < 3 {
            return Err(Error::invalid(format!(
                "frequency {f}: found {} images; phase shifting fails for N < 3",
                images.len()
            )));
        }
        if images.len() != calib.n_steps {
            return Err(Error::invalid(format!(
                "frequency {f}: found {} images but the calibration declares {} steps",
                images.len(),
                calib.n_steps
            )));
        }
        report.items.push(ItemStatus {
            metrics: Some(json!({ "images": images.len() })),
            ..ItemStatus::ok(format!("f{}", freq_label(f)))
        });
        stacks.push(images);
    }
    let recon = reconstruct(&stacks, &calib)?;
    let dpath = a.out.join("depth.exr");
    imageio::write_exr(&dpath, &recon.depth_for_export(&calib))?;
    let mut aggregate = json!({
        "valid_fraction": recon.phase.valid_fraction(),
        "output": dpath.display().to_string(),
    });
    let truth_path = a.truth.clone().or_else(|| Some(a.input.join("depth.exr")).filter(|p| p.exists()));
    if let Some(tp) = truth_path {
        let truth = imageio::read_exr(&tp)?;
        let wall = wall_depth(&calib.camera, calib.wall_y);
        let object = truth.zip_map(&wall, |t, w| *t < w - 1e-6 * w.abs().max(1.0))?;
        let interior = erode(&object, a.band);
        let (rms, n) = rms_error(&recon.depth, &truth, &interior)?;
        let (lo, hi) = truth
            .as_slice()
            .iter()
            .zip(object.as_slice())
            .filter(|(_, m)| **m)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (t, _)| (lo.min(*t), hi.max(*t)));
        aggregate["truth"] = json!(tp.display().to_string());
        aggregate["rms"] = json!(rms);
        aggregate["compared_pixels"] = json!(n);
        aggregate["object_pixels"] = json!(object.as_slice().iter().filter(|&&m| m).count());
        aggregate["truth_depth_min"] = json!(lo);
        aggregate["truth_depth_max"] = json!(hi);
    }
    let mut text = String::new();
    for (k, v) in aggregate.as_object().expect("object") {
        let _ = writeln!(text, "{k}: {v}");
    }
    imageio::write_file(&a.out.join("report.txt"), text.as_bytes())?;
    report.aggregate = aggregate;
    Ok(())
}

fn read_depth_like(path: &Path) -> Result<Raster<f64>> {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("exr") => imageio::read_exr(path),
        Some("png") => imageio::read_png(path),
        _ => Err(Error::invalid(format!("{}: unsupported image type", path.display()))),
    }
}

fn image_files(root: &Path) -> Result<Vec<String>> {
    if !root.is_dir() {
        return Err(Error::io(root, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
    }
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::io(root, e.into()))?;
        let ext = entry.path().extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if entry.file_type().is_file() && matches!(ext.as_deref(), Some("exr" | "png")) {
            let rel = entry.path().strip_prefix(root).expect("under root");
            out.push(rel.to_string_lossy().replace('\\', "/"));
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct EvalRow {
    image: String,
    mae: f64,
    msde: f64,
    ssim: f64,
}

fn cmd_eval(a: &EvalArgs, report: &mut RunReport) -> Result<()> {
    let cfg = MetricConfig::for_range(a.dynamic_range.unwrap_or(2.0));
    report.config = json!({ "normalize": !a.raw, "metrics": cfg });
    let gt = image_files(&a.gt)?;
    let pred = image_files(&a.pred)?;
    let missing_pred: Vec<&String> = gt.iter().filter(|g| !pred.contains(g)).collect();
    let missing_gt: Vec<&String> = pred.iter().filter(|p| !gt.contains(p)).collect();
    let mut rows = Vec::new();
    for name in gt.iter().filter(|g| pred.contains(g)) {
        let outcome = (|| -> Result<EvalRow> {
            let mut g = read_depth_like(&a.pred.join(name))?;
            let mut d = read_depth_like(&a.gt.join(name))?;
            if !a.raw {
                g = minmax_normalize(&g)?.raster;
                d = minmax_normalize(&d)?.raster;
            }
            Ok(EvalRow {
                image: name.clone(),
                mae: mae(&g, &d)?,
                msde: error_std(&g, &d)?,
                ssim: ssim(&g, &d, &cfg)?,
            })
        })();
        match outcome {
            Ok(row) => {
                report.items.push(ItemStatus {
                    metrics: Some(json!({ "mae": row.mae, "msde": row.msde, "ssim": row.ssim })),
                    ..ItemStatus::ok(name)
                });
                rows.push(row);
            }
            Err(e) => report.items.push(ItemStatus::failed(name, e.to_string())),
        }
    }
    for m in &missing_pred {
        report.items.push(ItemStatus::failed(*m, "no prediction"));
    }
    for m in &missing_gt {
        report.items.push(ItemStatus::failed(*m, "no ground truth"));
    }
    let n = rows.len().max(1) as f64;
    let mean = EvalRow {
        image: "mean".into(),
        mae: rows.iter().map(|r| r.mae).sum::<f64>() / n,
        msde: rows.iter().map(|r| r.msde).sum::<f64>() / n,
        ssim: rows.iter().map(|r| r.ssim).sum::<f64>() / n,
    };
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let csv_path = a.out.join("eval.csv");
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::io(&csv_path, e.into()))?;
    for r in rows.iter().chain(std::iter::once(&mean)) {
        w.serialize(r).map_err(|e| Error::io(&csv_path, e.into()))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    let width = rows.iter().map(|r| r.image.len()).max().unwrap_or(0).max(5);
    let mut text = format!("{:<width$}  {:>12}  {:>12}  {:>8}\n", "image", "MAE", "MSDE", "SSIM");
    for r in rows.iter().chain(std::iter::once(&mean)) {
        let _ = writeln!(text, "{:<width$}  {:>12.6}  {:>12.6}  {:>8.4}", r.image, r.mae, r.msde, r.ssim);
    }
    imageio::write_file(&a.out.join("eval.txt"), text.as_bytes())?;
    report.aggregate = json!({
        "pairs": rows.len(),
        "mae": mean.mae,
        "msde": mean.msde,
        "ssim": mean.ssim,
        "missing_predictions": missing_pred,
        "missing_ground_truth": missing_gt,
    });
    if rows.len() < gt.len().max(pred.len()) || report.items.iter().any(|i| i.status != "ok") {
        report.exit_code = EXIT_PARTIAL;
    }
    Ok(())
}
