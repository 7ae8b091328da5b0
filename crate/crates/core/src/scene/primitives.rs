//! Analytic test geometry.

use std::collections::HashMap;

use crate::scene::geometry::Vec3;
use crate::scene::mesh::Mesh;

/// Axis-aligned cube, 12 triangles.
pub fn cube(center: Vec3, edge: f64) -> Mesh {
    let h = 0.5 * edge;
    let vertices: Vec<Vec3> = (0..8)
        .map(|i| {
            let s = |bit: u32| if i & (1 << bit) != 0 { h } else { -h };
            center + Vec3::new(s(0), s(1), s(2))
        })
        .collect();
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let triangles = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    Mesh::new(vertices, triangles, None).expect("cube is valid")
}

/// Square of side `2·half_size` centered at `center`, perpendicular to `normal`.
pub fn square(center: Vec3, normal: Vec3, half_size: f64) -> Mesh {
    let n = normal.normalize();
    let helper = if n.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
    let a = n.cross(&helper).normalize() * half_size;
    let b = n.cross(&a).normalize() * half_size;
    let vertices = vec![center - a - b, center + a - b, center + a + b, center - a + b];
    Mesh::new(vertices, vec![[0, 1, 2], [0, 2, 3]], None).expect("square is valid")
}

/// Latitude/longitude sphere. `n_lat` even and `n_lon` divisible by four put
/// vertices on every axis extreme, so the bounding box spans the diameter.
pub fn uv_sphere(center: Vec3, radius: f64, n_lat: usize, n_lon: usize) -> Mesh {
    let mut vertices = vec![center + Vec3::new(0.0, 0.0, radius)];
    for i in 1..n_lat {
        let theta = std::f64::consts::PI * i as f64 / n_lat as f64;
        for j in 0..n_lon {
            let phi = std::f64::consts::TAU * j as f64 / n_lon as f64;
            vertices.push(center + radius * Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos()));
        }
    }
    vertices.push(center - Vec3::new(0.0, 0.0, radius));
    let south = (vertices.len() - 1) as u32;
    let ring = |i: usize, j: usize| (1 + (i - 1) * n_lon + j % n_lon) as u32;
    let mut triangles = Vec::new();
    for j in 0..n_lon {
        triangles.push([0, ring(1, j), ring(1, j + 1)]);
        triangles.push([south, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)]);
    }
    for i in 1..n_lat - 1 {
        for j in 0..n_lon {
            let (a, b, c, d) = (ring(i, j), ring(i, j + 1), ring(i + 1, j + 1), ring(i + 1, j));
            triangles.push([a, d, c]);
            triangles.push([a, c, b]);
        }
    }
    Mesh::new(vertices, triangles, None).expect("uv sphere is valid")
}

/// Subdivided icosahedron projected onto the sphere.
pub fn icosphere(center: Vec3, radius: f64, subdivisions: u32) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(u32, u32), u32> = HashMap::new();
        let mut mid = |a: u32, b: u32, verts: &mut Vec<Vec3>| -> u32 {
            let key = (a.min(b), a.max(b));
            *midpoints.entry(key).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                (verts.len() - 1) as u32
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let vertices = verts.into_iter().map(|v| center + v * radius).collect();
    Mesh::new(vertices, faces, None).expect("icosphere is valid")
}
