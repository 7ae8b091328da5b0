#![allow(dead_code)]

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use fpp_forge::datasetgen::{ModelSource, PairRenderer, PairStore, MANIFEST_FILE};
use fpp_forge::render::SceneParams;
use fpp_forge::scene::Mesh;
use fpp_forge::{Raster, Result};

/// Writes `mesh` as ASCII STL.
pub fn write_ascii_stl(path: &Path, mesh: &Mesh) {
    let mut s = String::from("solid test\n");
    for t in 0..mesh.triangle_count() {
        let [a, b, c] = mesh.corners(t);
        let n = (b - a).cross(&(c - a)).normalize();
        s += &format!(" facet normal {:e} {:e} {:e}\n  outer loop\n", n.x, n.y, n.z);
        for v in [a, b, c] {
            s += &format!("   vertex {:e} {:e} {:e}\n", v.x, v.y, v.z);
        }
        s += "  endloop\n endfacet\n";
    }
    s += "endsolid test\n";
    std::fs::write(path, s).unwrap();
}

/// Constant-time renderer: 1×1 rasters derived from the seed.
pub struct StubRenderer;

impl PairRenderer for StubRenderer {
    type Model = ();

    fn load(&self, _: &ModelSource) -> Result<()> {
        Ok(())
    }

    fn has_vertex_albedo(&self, _: &()) -> bool {
        false
    }

    fn with_albedo(&self, _: (), _: f64) {}

    fn render(&self, _: &(), params: &SceneParams, seed: u64) -> Result<(Raster<f64>, Raster<f64>)> {
        Ok((Raster::filled(1, 1, (seed % 256) as f64 / 255.0), Raster::filled(1, 1, params.projector.focal.0)))
    }
}

/// Discards image bytes, keeps the manifest.
#[derive(Default)]
pub struct CountingStore {
    pub writes: AtomicUsize,
    pub manifest: std::sync::Mutex<Option<Vec<u8>>>,
}

impl PairStore for CountingStore {
    fn read(&self, rel: &str) -> Option<Vec<u8>> {
        if rel == MANIFEST_FILE {
            self.manifest.lock().unwrap().clone()
        } else {
            None
        }
    }

    fn write(&self, rel: &str, bytes: &[u8]) -> Result<()> {
        if rel == MANIFEST_FILE {
            *self.manifest.lock().unwrap() = Some(bytes.to_vec());
        } else {
            self.writes.fetch_add(1, Ordering::Relaxed);
        }
        Ok(())
    }
}

pub fn model_sources(prefix: &str, n: usize, colored: bool) -> Vec<ModelSource> {
    (0..n)
        .map(|i| ModelSource {
            id: format!("{prefix}{i:04}"),
            path: format!("{prefix}{i:04}.stl").into(),
            colored,
        })
        .collect()
}
