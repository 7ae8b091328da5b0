//! Loss and evaluation math: windowed SSIM, Laplacian edge loss, composite
//! generator/discriminator losses, MAE/MSDE and min-max normalization.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::Raster;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricConfig {
    pub ssim_window: usize,
    pub c1: f64,
    pub c2: f64,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig::for_range(2.0)
    }
}

impl MetricConfig {
    /// Standard stabilizers `c₁ = (0.01 L)²`, `c₂ = (0.03 L)²` for dynamic range `L`.
    pub fn for_range(dynamic_range: f64) -> Self {
        MetricConfig {
            ssim_window: 8,
            c1: (0.01 * dynamic_range).powi(2),
            c2: (0.03 * dynamic_range).powi(2),
            lambda1: 100.0,
            lambda2: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ssim_window < 2 {
            return Err(Error::invalid(format!("SSIM window must be at least 2, got {}", self.ssim_window)));
        }
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return Err(Error::invalid(format!("SSIM stabilizers must be positive, got c1={} c2={}", self.c1, self.c2)));
        }
        if !(self.lambda1 >= 0.0 && self.lambda2 >= 0.0) {
            return Err(Error::invalid(format!(
                "loss weights must be non-negative, got λ1={} λ2={}",
                self.lambda1, self.lambda2
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Normalized {
    pub raster: Raster<f64>,
    /// Set when the input was constant; the output is then all zeros.
    pub degenerate: bool,
}

/// Affine map of `[min, max]` onto `[−1, 1]`.
pub fn minmax_normalize(raster: &Raster<f64>) -> Result<Normalized> {
    if raster.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("cannot normalize a raster with non-finite values"));
    }
    let (lo, hi) = raster.min_max();
    if !(hi > lo) {
        return Ok(Normalized {
            raster: raster.map(|_| 0.0),
            degenerate: true,
        });
    }
    let span = hi - lo;
    Ok(Normalized {
        raster: raster.map(|&v| 2.0 * ((v - lo) / span) - 1.0),
        degenerate: false,
    })
}

/// Mean of each `win × win` window (offsets `−win/2 .. win − win/2 − 1`)
/// with replicated borders, by separable direct sums.
fn box_mean(img: &Raster<f64>, win: usize) -> Raster<f64> {
    let (w, h) = img.dims();
    let lo = (win / 2) as isize;
    let horizontal = Raster::from_fn(w, h, |x, y| {
        (0..win as isize).map(|k| img.get_clamped(x as isize - lo + k, y as isize)).sum::<f64>()
    });
    let scale = 1.0 / (win * win) as f64;
    Raster::from_fn(w, h, |x, y| {
        (0..win as isize).map(|k| horizontal.get_clamped(x as isize, y as isize - lo + k)).sum::<f64>() * scale
    })
}

/// Per-pixel SSIM map over sliding uniform windows.
pub fn ssim_map(u: &Raster<f64>, v: &Raster<f64>, cfg: &MetricConfig) -> Result<Raster<f64>> {
    cfg.validate()?;
    u.check_same_size(v)?;
    if u.is_empty() {
        return Err(Error::invalid("SSIM of an empty raster"));
    }
    let win = cfg.ssim_window;
    let mu = box_mean(u, win);
    let mv = box_mean(v, win);
    let uu = box_mean(&u.map(|a| a * a), win);
    let vv = box_mean(&v.map(|a| a * a), win);
    let uv = box_mean(&u.zip_map(v, |a, b| a * b)?, win);
    let (w, h) = u.dims();
    Ok(Raster::from_fn(w, h, |x, y| {
        let (a, b) = (*mu.get(x, y), *mv.get(x, y));
        let var_u = uu.get(x, y) - a * a;
        let var_v = vv.get(x, y) - b * b;
        let cov = uv.get(x, y) - a * b;
        ((2.0 * a * b + cfg.c1) * (2.0 * cov + cfg.c2)) / ((a * a + b * b + cfg.c1) * (var_u + var_v + cfg.c2))
    }))
}

pub fn ssim(u: &Raster<f64>, v: &Raster<f64>, cfg: &MetricConfig) -> Result<f64> {
    Ok(ssim_map(u, v, cfg)?.mean())
}

pub fn loss_t1(g: &Raster<f64>, d: &Raster<f64>, cfg: &MetricConfig) -> Result<f64> {
    Ok(1.0 - ssim(g, d, cfg)?)
}

/// 3×3 Laplacian `{0,1,0; 1,−4,1; 0,1,0}` with replicated borders.
pub fn laplacian(raster: &Raster<f64>) -> Result<Raster<f64>> {
    let (w, h) = raster.dims();
    if w < 3 || h < 3 {
        return Err(Error::invalid(format!("Laplacian needs at least 3×3, got {w}×{h}")));
    }
    Ok(Raster::from_fn(w, h, |x, y| {
        let (x, y) = (x as isize, y as isize);
        raster.get_clamped(x - 1, y) + raster.get_clamped(x + 1, y) + raster.get_clamped(x, y - 1) + raster.get_clamped(x, y + 1)
            - 4.0 * raster.get_clamped(x, y)
    }))
}

/// `mean |La(g) − La(d)|`.
pub fn loss_t2(g: &Raster<f64>, d: &Raster<f64>) -> Result<f64> {
    g.check_same_size(d)?;
    let diff = laplacian(g)?.zip_map(&laplacian(d)?, |a, b| (a - b).abs())?;
    Ok(diff.mean())
}

pub fn unet_loss(g: &Raster<f64>, d: &Raster<f64>, cfg: &MetricConfig) -> Result<f64> {
    Ok(cfg.lambda1 * loss_t1(g, d, cfg)? + cfg.lambda2 * loss_t2(g, d)?)
}

/// Least-squares discriminator loss `½·mean(fake²) + ½·mean((1 − real)²)`.
pub fn lsgan_d_loss(d_fake: &Raster<f64>, d_real: &Raster<f64>) -> Result<f64> {
    if d_fake.is_empty() || d_real.is_empty() {
        return Err(Error::invalid("empty discriminator score map"));
    }
    let fake = d_fake.as_slice().iter().map(|s| s * s).sum::<f64>() / d_fake.len() as f64;
    let real = d_real.as_slice().iter().map(|s| (1.0 - s).powi(2)).sum::<f64>() / d_real.len() as f64;
    Ok(0.5 * fake + 0.5 * real)
}

pub struct DiscriminatorScores<'a> {
    pub fake: &'a Raster<f64>,
    pub real: &'a Raster<f64>,
}

pub fn pix2pix_loss(scores: &DiscriminatorScores<'_>, g: &Raster<f64>, d: &Raster<f64>, cfg: &MetricConfig) -> Result<f64> {
    Ok(lsgan_d_loss(scores.fake, scores.real)? + unet_loss(g, d, cfg)?)
}

pub fn mae(g: &Raster<f64>, d: &Raster<f64>) -> Result<f64> {
    g.check_same_size(d)?;
    if g.is_empty() {
        return Err(Error::invalid("MAE of an empty raster"));
    }
    Ok(g.as_slice().iter().zip(d.as_slice()).map(|(a, b)| (a - b).abs()).sum::<f64>() / g.len() as f64)
}

/// Population standard deviation of the signed error `g − d`.
pub fn error_std(g: &Raster<f64>, d: &Raster<f64>) -> Result<f64> {
    g.check_same_size(d)?;
    if g.is_empty() {
        return Err(Error::invalid("error spread of an empty raster"));
    }
    let n = g.len() as f64;
    let errs: Vec<f64> = g.as_slice().iter().zip(d.as_slice()).map(|(a, b)| a - b).collect();
    let mean = errs.iter().sum::<f64>() / n;
    Ok((errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n).sqrt())
}

/// Mean over images of the per-image error standard deviation.
pub fn msde(pairs: &[(&Raster<f64>, &Raster<f64>)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::invalid("MSDE of an empty set"));
    }
    let mut total = 0.0;
    for (g, d) in pairs {
        total += error_std(g, d)?;
    }
    Ok(total / pairs.len() as f64)
}
