//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::f64::consts::TAU;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{model_sources, write_ascii_stl, CountingStore, StubRenderer};
use fpp_forge::datasetgen::{build_dataset, BuildConfig, MemoryStore, MeshRenderer, ParamRanges, Recipe, RecipeId, Split};
use fpp_forge::demod::{erode, ps_wrapped_phase, reconstruct, rms_error, temporal_unwrap, wall_depth, Calibration, PhaseMap, PhaseState};
use fpp_forge::imageio::quantized;
use fpp_forge::metrics::{loss_t1, loss_t2, lsgan_d_loss, mae, minmax_normalize, msde, ssim, unet_loss, MetricConfig};
use fpp_forge::render::{render_pair, render_phase_sequence, RenderSettings, SceneParams, VariationParams};
use fpp_forge::scene::{normalize_and_place, primitives, Mesh, PoseEntry, PoseSchedule, Vec3};
use fpp_forge::Raster;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

const STILL: PoseEntry = PoseEntry {
    yaw_deg: 0.0,
    roll_deg: 0.0,
};

/// Renders a 4-step stack at frequencies (1, 16), quantizes to 8 bits,
/// reconstructs and compares with the render's own depth on interior
/// object pixels. Returns (rms, object depth range).
fn full_loop(mesh: &Mesh, params: &SceneParams, band: usize) -> Result<(f64, f64, usize), String> {
    let freqs = [1.0, 16.0];
    let stacks = render_phase_sequence(mesh, params, 4, &freqs, 11).map_err(|e| e.to_string())?;
    let images: Vec<Vec<Raster<f64>>> = stacks.iter().map(|s| s.images.iter().map(quantized).collect()).collect();
    let calib = Calibration {
        camera: params.camera.clone(),
        projector: params.projector.clone(),
        fringe: params.fringe.clone(),
        frequencies: freqs.to_vec(),
        n_steps: 4,
        wall_y: params.wall_y,
        modulation_threshold: 0.02,
    };
    let recon = reconstruct(&images, &calib).map_err(|e| e.to_string())?;
    let truth = &stacks[0].depth;
    let wall = wall_depth(&params.camera, params.wall_y);
    let object = truth.zip_map(&wall, |t, w| *t < w - 1e-9).unwrap();
    let interior = erode(&object, band);
    let (rms, n) = rms_error(&recon.depth, truth, &interior).map_err(|e| e.to_string())?;
    let on_object: Vec<f64> = truth.as_slice().iter().zip(object.as_slice()).filter(|(_, m)| **m).map(|(t, _)| *t).collect();
    let range = on_object.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - on_object.iter().cloned().fold(f64::INFINITY, f64::min);
    let interior_count = interior.as_slice().iter().filter(|&&m| m).count();
    ensure(n as f64 > 0.95 * interior_count as f64, || format!("only {n} of {interior_count} interior pixels reconstructed"))?;
    Ok((rms, range, n))
}

fn criterion_full_loop() -> Check {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    pool.install(|| {
        let start = Instant::now();
        // noiseless renders; the 8-bit quantization in full_loop remains
        let settings = RenderSettings {
            width: 256,
            height: 256,
            noise_sigma: 0.0,
            ..RenderSettings::default()
        };
        let params = SceneParams::compose(&settings, &VariationParams::default(), &STILL).map_err(|e| e.to_string())?;
        let center = settings.model_position;
        let z0 = (center - params.camera.position()).dot(&params.camera.forward());
        let plane = primitives::square(center, -params.camera.forward(), 0.3);
        let (plane_rms, _, plane_n) = full_loop(&plane, &params, 0)?;
        let sphere = normalize_and_place(&primitives::uv_sphere(Vec3::zeros(), 1.0, 32, 64), 0.14, center).map_err(|e| e.to_string())?;
        let (sphere_rms, range, sphere_n) = full_loop(&sphere, &params, 2)?;
        let secs = start.elapsed().as_secs_f64();
        let detail = format!(
            "noise 0, 8-bit; plane rms {plane_rms:.3e} m (limit {:.3e}, {plane_n} px); sphere rms {sphere_rms:.3e} m = {:.3}% of range {range:.4} m (limit 0.5%, {sphere_n} px); {secs:.1} s single-threaded (limit 60 s)",
            1e-4 * z0,
            100.0 * sphere_rms / range
        );
        ensure(plane_rms < 1e-4 * z0 && sphere_rms < 0.005 * range && secs < 60.0, || detail.clone())?;
        Ok(detail)
    })
}

fn criterion_dataset_arithmetic() -> Check {
    let start = Instant::now();
    let mut cfg = BuildConfig {
        recipe: Recipe::standard(RecipeId::D3),
        ranges: ParamRanges::default(),
        settings: RenderSettings::default(),
        schedule: PoseSchedule::default(),
        seed: 2024,
        split_ratio: 0.85,
        workers: 4,
    };
    let base = model_sources("thing", 624, false);
    let store = CountingStore::default();
    let s = build_dataset(&base, &cfg, &StubRenderer, &store).map_err(|e| e.to_string())?;
    let m = &s.manifest;
    ensure(m.entries.len() == 89_856, || format!("{} entries, expected 89856", m.entries.len()))?;
    let mut per_group = vec![std::collections::BTreeSet::new(); 13];
    for e in &m.entries {
        per_group[e.group_id].insert(e.model_id.clone());
    }
    ensure(per_group.iter().all(|g| g.len() == 48), || format!("group sizes {:?}", per_group.iter().map(|g| g.len()).collect::<Vec<_>>()))?;
    let train = m.models_in(Split::Train);
    let test = m.models_in(Split::Test);
    ensure(train.intersection(&test).count() == 0, || "train and test share models".into())?;
    ensure(train.len() == 530 && test.len() == 94, || format!("split {}/{}", train.len(), test.len()))?;

    cfg.recipe = Recipe::standard(RecipeId::D4);
    let mut all = base;
    all.extend(model_sources("colored", 320, true));
    let s4 = build_dataset(&all, &cfg, &StubRenderer, &CountingStore::default()).map_err(|e| e.to_string())?;
    let added = s4.manifest.entries.iter().filter(|e| e.group_id >= 13).count();
    ensure(added == 46_080, || format!("D4 add-on produced {added} entries, expected 46080"))?;
    let colored_groups = s4.manifest.groups.iter().filter(|g| g.colored).count();
    ensure(colored_groups == 8, || format!("{colored_groups} colored groups"))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 10.0, || format!("took {secs:.1} s (limit 10 s)"))?;
    Ok(format!(
        "89856 entries, 13 groups x 48, split 530/94 disjoint, D4 add-on 46080 entries in 8 groups; {secs:.2} s (limit 10 s)"
    ))
}

/// Direct two-pass evaluation of every 8×8 window with replicated borders.
fn ssim_brute_force(u: &Raster<f64>, v: &Raster<f64>, cfg: &MetricConfig) -> f64 {
    let (w, h) = u.dims();
    let win = cfg.ssim_window as isize;
    let lo = win / 2;
    let mut total = 0.0;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for dy in 0..win {
                for dx in 0..win {
                    a.push(u.get_clamped(x - lo + dx, y - lo + dy));
                    b.push(v.get_clamped(x - lo + dx, y - lo + dy));
                }
            }
            let n = a.len() as f64;
            let ma = a.iter().sum::<f64>() / n;
            let mb = b.iter().sum::<f64>() / n;
            let va = a.iter().map(|p| (p - ma).powi(2)).sum::<f64>() / n;
            let vb = b.iter().map(|p| (p - mb).powi(2)).sum::<f64>() / n;
            let cov = a.iter().zip(&b).map(|(p, q)| (p - ma) * (q - mb)).sum::<f64>() / n;
            total += ((2.0 * ma * mb + cfg.c1) * (2.0 * cov + cfg.c2)) / ((ma * ma + mb * mb + cfg.c1) * (va + vb + cfg.c2));
        }
    }
    total / (w * h) as f64
}

fn random_raster(rng: &mut ChaCha8Rng, w: usize, h: usize) -> Raster<f64> {
    Raster::from_fn(w, h, |_, _| rng.random_range(-1.0..1.0))
}

fn criterion_metric_oracles() -> Check {
    let cfg = MetricConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst: f64 = 0.0;
    let mut pairs = Vec::new();
    for _ in 0..50 {
        let (w, h) = (rng.random_range(8..=32), rng.random_range(8..=32));
        let u = random_raster(&mut rng, w, h);
        // correlated partner so SSIM spans a useful range
        let mix: f64 = rng.random();
        let noise = random_raster(&mut rng, w, h);
        let v = u.zip_map(&noise, |a, b| mix * a + (1.0 - mix) * b).unwrap();
        let fast = ssim(&u, &v, &cfg).map_err(|e| e.to_string())?;
        worst = worst.max((fast - ssim_brute_force(&u, &v, &cfg)).abs());
        pairs.push((u, v));
    }
    ensure(worst < 1e-12, || format!("ssim deviates from brute force by {worst:e}"))?;
    for (g, d) in &pairs {
        let mut sum = 0.0;
        for i in 0..g.len() {
            sum += (g.as_slice()[i] - d.as_slice()[i]).abs();
        }
        let expected = sum / g.len() as f64;
        let got = mae(g, d).unwrap();
        ensure(got == expected, || format!("mae {got} vs tabulated {expected}"))?;
    }
    let mut stds = 0.0;
    for (g, d) in &pairs {
        let mut errs = Vec::new();
        for i in 0..g.len() {
            errs.push(g.as_slice()[i] - d.as_slice()[i]);
        }
        let n = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / n;
        let mut ss = 0.0;
        for e in &errs {
            ss += (e - mean).powi(2);
        }
        stds += (ss / n).sqrt();
    }
    let expected = stds / pairs.len() as f64;
    let refs: Vec<(&Raster<f64>, &Raster<f64>)> = pairs.iter().map(|(g, d)| (g, d)).collect();
    let got = msde(&refs).unwrap();
    ensure(got == expected, || format!("msde {got} vs tabulated {expected}"))?;
    for (u, _) in &pairs {
        let n = minmax_normalize(&u.map(|v| 3.0 * v + 7.0)).unwrap().raster;
        let (lo, hi) = n.min_max();
        ensure(lo == -1.0 && hi == 1.0, || format!("normalized range [{lo}, {hi}]"))?;
    }
    Ok(format!("50 pairs: max |ssim - brute force| = {worst:.1e} (limit 1e-12); mae, msde exact; normalize endpoints exactly -1, 1"))
}

fn criterion_loss_identities() -> Check {
    let cfg = MetricConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let u = random_raster(&mut rng, 24, 20);
    let t1 = loss_t1(&u, &u, &cfg).unwrap();
    ensure(t1.abs() < 1e-12, || format!("loss_t1(u,u) = {t1:e}"))?;
    let mut worst_t2: f64 = 0.0;
    for _ in 0..20 {
        let c: f64 = rng.random_range(-10.0..10.0);
        worst_t2 = worst_t2.max(loss_t2(&u, &u.map(|v| v + c)).unwrap());
    }
    // Laplacian weights sum to zero, but u + c rounds differently from u
    ensure(worst_t2 < 1e-12, || format!("loss_t2(u, u + c) up to {worst_t2:e}"))?;
    let d = random_raster(&mut rng, 24, 20);
    let composite = unet_loss(&u, &d, &cfg).unwrap();
    let recomposed = 100.0 * loss_t1(&u, &d, &cfg).unwrap() + 10.0 * loss_t2(&u, &d).unwrap();
    ensure((composite - recomposed).abs() < 1e-12, || format!("unet_loss {composite} vs {recomposed}"))?;
    let z = Raster::filled(4, 4, 0.0);
    let o = Raster::filled(4, 4, 1.0);
    let h = Raster::filled(4, 4, 0.5);
    let cases = [lsgan_d_loss(&z, &o).unwrap(), lsgan_d_loss(&o, &z).unwrap(), lsgan_d_loss(&h, &h).unwrap()];
    ensure(cases == [0.0, 1.0, 0.25], || format!("lsgan cases {cases:?}"))?;
    Ok(format!(
        "loss_t1(u,u) = {t1:.1e}; max loss_t2(u,u+c) over 20 constants = {worst_t2:.1e}; unet recomposition diff {:.1e}; lsgan 0, 1, 0.25 exact",
        (composite - recomposed).abs()
    ))
}

fn synthetic_stack(phase: &Raster<f64>, n: usize, a: f64, b: f64) -> Vec<Raster<f64>> {
    (0..n).map(|k| phase.map(|&p| a + b * (p + TAU * k as f64 / n as f64).cos())).collect()
}

fn criterion_demod_exactness() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst_phase: f64 = 0.0;
    let mut worst_invariance: f64 = 0.0;
    for n in 3..=8 {
        let truth = Raster::from_fn(32, 16, |_, _| rng.random_range(-3.1..3.1));
        let imgs = synthetic_stack(&truth, n, 0.5, 0.3);
        let m = ps_wrapped_phase(&imgs).unwrap();
        for (p, t) in m.phase.as_slice().iter().zip(truth.as_slice()) {
            worst_phase = worst_phase.max((p - t).abs());
        }
        let (alpha, beta) = (rng.random_range(0.1..4.0), rng.random_range(-2.0..2.0));
        let scaled: Vec<_> = imgs.iter().map(|im| im.map(|v| alpha * v + beta)).collect();
        let m2 = ps_wrapped_phase(&scaled).unwrap();
        for (p, q) in m.phase.as_slice().iter().zip(m2.phase.as_slice()) {
            worst_invariance = worst_invariance.max((p - q).abs());
        }
    }
    ensure(worst_phase < 1e-9, || format!("phase error {worst_phase:e}"))?;
    ensure(worst_invariance < 1e-12, || format!("gain/offset changes phase by {worst_invariance:e}"))?;

    let w = 512;
    let low_true = Raster::from_fn(w, 4, |x, y| TAU * (x as f64 + 0.25 * y as f64) / w as f64);
    let low = PhaseMap {
        phase: low_true.clone(),
        state: PhaseState::Unwrapped,
        modulation: Raster::filled(w, 4, 1.0),
        valid: Raster::filled(w, 4, true),
        fringe_order: None,
    };
    let high = ps_wrapped_phase(&synthetic_stack(&low_true.map(|p| 12.0 * p), 4, 0.5, 0.4)).unwrap();
    let un = temporal_unwrap(&high, &low, 12.0).unwrap();
    let order = un.fringe_order.as_ref().unwrap();
    let mut worst_multiple: f64 = 0.0;
    for i in 0..un.phase.len() {
        let k = (un.phase.as_slice()[i] - high.phase.as_slice()[i]) / TAU;
        worst_multiple = worst_multiple.max((k - order.as_slice()[i] as f64).abs());
    }
    ensure(worst_multiple < 1e-12, || format!("unwrap residual off an integer multiple of 2pi by {worst_multiple:e}"))?;
    Ok(format!(
        "N=3..8 max phase error {worst_phase:.1e} (limit 1e-9); gain/offset change {worst_invariance:.1e}; unwrap residual/2pi off integer by {worst_multiple:.1e}"
    ))
}

fn criterion_determinism() -> Check {
    let settings = RenderSettings {
        width: 64,
        height: 64,
        noise_sigma: 0.01,
        ..RenderSettings::default()
    };
    let params = SceneParams::compose(&settings, &VariationParams::default(), &PoseEntry { yaw_deg: 30.0, roll_deg: 5.0 }).unwrap();
    let mesh = normalize_and_place(&primitives::icosphere(Vec3::zeros(), 1.0, 3), 0.14, settings.model_position).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let sources: Vec<_> = (0..3)
        .map(|i| {
            let path = dir.path().join(format!("shape{i}.stl"));
            let m = match i {
                0 => primitives::cube(Vec3::zeros(), 1.0),
                1 => primitives::icosphere(Vec3::zeros(), 1.0, 2),
                _ => primitives::uv_sphere(Vec3::new(0.0, 0.0, 1.0), 0.5, 8, 16),
            };
            write_ascii_stl(&path, &m);
            fpp_forge::datasetgen::ModelSource::from_path(path, false).unwrap()
        })
        .collect();
    let small = RenderSettings {
        width: 32,
        height: 32,
        ..RenderSettings::default()
    };
    let build_cfg = |workers| BuildConfig {
        recipe: Recipe::standard(RecipeId::D3),
        ranges: ParamRanges::default(),
        settings: small.clone(),
        schedule: fpp_forge::scene::generate_pose_schedule(2, 30.0, 2, 5.0).unwrap(),
        seed: 3,
        split_ratio: 0.85,
        workers,
    };
    let mut renders = Vec::new();
    let mut datasets = Vec::new();
    for workers in [1, 4, 16] {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().unwrap();
        renders.push(pool.install(|| render_pair(&mesh, &params, 99).unwrap()));
        let store = MemoryStore::default();
        build_dataset(&sources, &build_cfg(workers), &MeshRenderer { settings: small.clone() }, &store).map_err(|e| e.to_string())?;
        datasets.push(store.snapshot());
    }
    let bits = |r: &fpp_forge::render::ImagePair| -> Vec<u64> { r.fringe.as_slice().iter().chain(r.depth.as_slice()).map(|v| v.to_bits()).collect() };
    ensure(bits(&renders[0]) == bits(&renders[1]) && bits(&renders[0]) == bits(&renders[2]), || "renders differ across thread counts".into())?;
    ensure(datasets[0] == datasets[1] && datasets[0] == datasets[2], || "datasets differ across worker counts".into())?;
    let files = datasets[0].len();
    ensure(files == 3 * 4 * 2 + 1, || format!("{files} files written"))?;
    Ok(format!("render_pair and a {files}-file dataset bit-identical at 1, 4 and 16 workers"))
}

type Criterion = (&'static str, fn() -> Check);

fn main() {
    let criteria: [Criterion; 6] = [
        ("full-loop geometric self-consistency", criterion_full_loop),
        ("dataset arithmetic", criterion_dataset_arithmetic),
        ("metric oracle equivalence", criterion_metric_oracles),
        ("loss identities", criterion_loss_identities),
        ("demodulation exactness", criterion_demod_exactness),
        ("determinism", criterion_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
