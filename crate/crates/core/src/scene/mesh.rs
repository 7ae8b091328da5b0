use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::geometry::{RigidPose, Vec3};

/// Albedo used when a mesh carries no per-vertex color.
pub const DEFAULT_ALBEDO: f64 = 0.8;

/// Triangle mesh in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
    /// Per-vertex albedo in [0, 1]; `None` means [`DEFAULT_ALBEDO`] everywhere.
    pub albedo: Option<Vec<f64>>,
    /// Faces removed at construction because they had (near) zero area.
    pub dropped_degenerate: usize,
}

impl Mesh {
    /// Builds a mesh, dropping degenerate faces. Fails on out-of-range
    /// indices, non-finite coordinates, or when no face survives.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, albedo: Option<Vec<f64>>) -> Result<Self> {
        Self::build(vertices, triangles, albedo, Path::new("<memory>"))
    }

    fn build(vertices: Vec<Vec3>, triangles: Vec<[u32; 3]>, albedo: Option<Vec<f64>>, path: &Path) -> Result<Self> {
        let malformed = |reason: String| Error::MalformedMesh {
            path: path.to_path_buf(),
            reason,
        };
        if let Some(v) = vertices.iter().find(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(malformed(format!("non-finite vertex {v:?}")));
        }
        if let Some(a) = &albedo {
            if a.len() != vertices.len() {
                return Err(malformed(format!("{} albedo values for {} vertices", a.len(), vertices.len())));
            }
        }
        let n = vertices.len() as u32;
        let mut kept = Vec::with_capacity(triangles.len());
        let mut dropped = 0;
        for tri in triangles {
            if tri.iter().any(|&i| i >= n) {
                return Err(malformed(format!("triangle {tri:?} indexes past {n} vertices")));
            }
            if is_degenerate(&vertices, tri) {
                dropped += 1;
            } else {
                kept.push(tri);
            }
        }
        if kept.is_empty() {
            return Err(Error::EmptyMesh {
                path: path.to_path_buf(),
            });
        }
        if dropped > 0 {
            log::debug!("{}: dropped {dropped} degenerate triangles", path.display());
        }
        Ok(Mesh {
            vertices,
            triangles: kept,
            albedo: albedo.map(|a| a.into_iter().map(|v| v.clamp(0.0, 1.0)).collect()),
            dropped_degenerate: dropped,
        })
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, tri: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[tri];
        [self.vertices[a as usize], self.vertices[b as usize], self.vertices[c as usize]]
    }

    /// Albedo at barycentric point `(u, v)` of triangle `tri`.
    pub fn albedo_at(&self, tri: usize, u: f64, v: f64) -> f64 {
        match &self.albedo {
            None => DEFAULT_ALBEDO,
            Some(a) => {
                let [i, j, k] = self.triangles[tri];
                (1.0 - u - v) * a[i as usize] + u * a[j as usize] + v * a[k as usize]
            }
        }
    }

    pub fn bounding_box(&self) -> (Vec3, Vec3) {
        let mut lo = Vec3::repeat(f64::INFINITY);
        let mut hi = Vec3::repeat(f64::NEG_INFINITY);
        for v in &self.vertices {
            lo = lo.inf(v);
            hi = hi.sup(v);
        }
        (lo, hi)
    }

    /// Largest axis-aligned extent.
    pub fn max_extent(&self) -> f64 {
        let (lo, hi) = self.bounding_box();
        (hi - lo).max()
    }

    pub fn bbox_center(&self) -> Vec3 {
        let (lo, hi) = self.bounding_box();
        (lo + hi) * 0.5
    }

    pub fn transformed(&self, pose: &RigidPose) -> Mesh {
        Mesh {
            vertices: self.vertices.iter().map(|v| pose.apply(v)).collect(),
            triangles: self.triangles.clone(),
            albedo: self.albedo.clone(),
            dropped_degenerate: self.dropped_degenerate,
        }
    }

    pub fn with_uniform_albedo(mut self, albedo: f64) -> Mesh {
        self.albedo = Some(vec![albedo.clamp(0.0, 1.0); self.vertices.len()]);
        self
    }
}

fn is_degenerate(vertices: &[Vec3], [a, b, c]: [u32; 3]) -> bool {
    if a == b || b == c || a == c {
        return true;
    }
    let (a, b, c) = (vertices[a as usize], vertices[b as usize], vertices[c as usize]);
    let e1 = b - a;
    let e2 = c - a;
    let scale = e1.norm_squared().max(e2.norm_squared()).max((c - b).norm_squared());
    e1.cross(&e2).norm() <= 1e-12 * scale
}

/// Reads an STL (binary or ASCII) or OBJ file. OBJ polygons are
/// fan-triangulated; `v x y z r g b` vertex colors become luminance albedo.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<Mesh> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "stl" => load_stl(path),
        "obj" => load_obj(path),
        _ => Err(Error::MalformedMesh {
            path: path.to_path_buf(),
            reason: format!("unsupported mesh format {ext:?} (expected .stl or .obj)"),
        }),
    }
}

fn load_stl(path: &Path) -> Result<Mesh> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let indexed = stl_io::read_stl(&mut reader).map_err(|e| Error::MalformedMesh {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let vertices = indexed
        .vertices
        .iter()
        .map(|v| Vec3::new(v[0] as f64, v[1] as f64, v[2] as f64))
        .collect();
    let triangles = indexed
        .faces
        .iter()
        .map(|f| [f.vertices[0] as u32, f.vertices[1] as u32, f.vertices[2] as u32])
        .collect();
    Mesh::build(vertices, triangles, None, path)
}

fn load_obj(path: &Path) -> Result<Mesh> {
    if !path.exists() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        ));
    }
    let options = tobj::LoadOptions {
        triangulate: true,
        single_index: false,
        ..Default::default()
    };
    let (models, _materials) = tobj::load_obj(path, &options).map_err(|e| Error::MalformedMesh {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut albedo = Vec::new();
    let mut colored = true;
    for model in &models {
        let m = &model.mesh;
        let base = vertices.len() as u32;
        let n = m.positions.len() / 3;
        vertices.extend(
            m.positions
                .chunks_exact(3)
                .map(|p| Vec3::new(p[0] as f64, p[1] as f64, p[2] as f64)),
        );
        if m.vertex_color.len() == m.positions.len() && n > 0 {
            albedo.extend(
                m.vertex_color
                    .chunks_exact(3)
                    .map(|c| 0.2126 * c[0] as f64 + 0.7152 * c[1] as f64 + 0.0722 * c[2] as f64),
            );
        } else {
            colored = false;
        }
        triangles.extend(
            m.indices
                .chunks_exact(3)
                .map(|t| [base + t[0], base + t[1], base + t[2]]),
        );
    }
    let albedo = (colored && !albedo.is_empty()).then_some(albedo);
    Mesh::build(vertices, triangles, albedo, path)
}

/// Uniformly scales the mesh so its largest bounding-box extent is
/// `max_dim`, then translates the bounding-box center to `position`.
pub fn normalize_and_place(mesh: &Mesh, max_dim: f64, position: Vec3) -> Result<Mesh> {
    if !(max_dim > 0.0) {
        return Err(Error::invalid(format!("max_dim must be positive, got {max_dim}")));
    }
    let extent = mesh.max_extent();
    if !(extent > 0.0) {
        return Err(Error::ZeroExtent);
    }
    let center = mesh.bbox_center();
    let scale = max_dim / extent;
    Ok(Mesh {
        vertices: mesh
            .vertices
            .iter()
            .map(|v| (v - center) * scale + position)
            .collect(),
        triangles: mesh.triangles.clone(),
        albedo: mesh.albedo.clone(),
        dropped_degenerate: mesh.dropped_degenerate,
    })
}
