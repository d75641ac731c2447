//! Indexed triangle meshes and a minimal Wavefront OBJ reader.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

use crate::math::Vec3;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("io error reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("triangle {tri} references vertex {index} but mesh has {count} vertices")]
    IndexOutOfRange {
        tri: usize,
        index: usize,
        count: usize,
    },
    #[error("mesh has no triangles")]
    Empty,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    /// Builds a mesh, checking indices and dropping zero-area triangles.
    pub fn new(vertices: Vec<Vec3>, triangles: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let count = vertices.len();
        for (tri, t) in triangles.iter().enumerate() {
            if let Some(&index) = t.iter().find(|&&i| i >= count) {
                return Err(MeshError::IndexOutOfRange { tri, index, count });
            }
        }
        let mut mesh = Self {
            vertices,
            triangles,
        };
        mesh.remove_degenerate();
        Ok(mesh)
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn triangle(&self, i: usize) -> [Vec3; 3] {
        let t = self.triangles[i];
        [
            self.vertices[t[0]],
            self.vertices[t[1]],
            self.vertices[t[2]],
        ]
    }

    pub fn triangles_iter(&self) -> impl Iterator<Item = [Vec3; 3]> + '_ {
        (0..self.triangles.len()).map(move |i| self.triangle(i))
    }

    fn remove_degenerate(&mut self) {
        let verts = &self.vertices;
        self.triangles.retain(|t| {
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return false;
            }
            let (a, b, c) = (verts[t[0]], verts[t[1]], verts[t[2]]);
            (b - a).cross(c - a).norm() > 1e-14
        });
    }

    /// Axis-aligned bounding box `(min, max)`; `None` for a mesh without vertices.
    pub fn aabb(&self) -> Option<(Vec3, Vec3)> {
        let mut it = self.triangles.iter().flatten().map(|&i| self.vertices[i]);
        let first = it.next()?;
        Some(it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v))))
    }

    pub fn map_vertices(&self, f: impl Fn(Vec3) -> Vec3) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|&v| f(v)).collect(),
            triangles: self.triangles.clone(),
        }
    }

    /// Signed enclosed volume (divergence theorem); positive for outward winding.
    pub fn signed_volume(&self) -> f64 {
        self.triangles_iter()
            .map(|[a, b, c]| a.dot(b.cross(c)) / 6.0)
            .sum()
    }

    /// Every undirected edge is shared by exactly two triangles, traversed in
    /// opposite directions.
    pub fn is_watertight(&self) -> bool {
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_default() += 1;
            }
        }
        directed
            .iter()
            .all(|(&(a, b), &n)| n == 1 && directed.get(&(b, a)) == Some(&1))
    }

    /// Closed axis-aligned box spanning `[lo, hi]` with outward winding.
    pub fn cuboid(lo: Vec3, hi: Vec3) -> TriangleMesh {
        let v = |i: usize| {
            Vec3::new(
                if i & 1 == 0 { lo.x } else { hi.x },
                if i & 2 == 0 { lo.y } else { hi.y },
                if i & 4 == 0 { lo.z } else { hi.z },
            )
        };
        let vertices = (0..8).map(v).collect();
        // faces as quads (outward winding), split along one diagonal
        let quads: [[usize; 4]; 6] = [
            [0, 4, 6, 2], // -x
            [1, 3, 7, 5], // +x
            [0, 1, 5, 4], // -y
            [2, 6, 7, 3], // +y
            [0, 2, 3, 1], // -z
            [4, 5, 7, 6], // +z
        ];
        let triangles = quads
            .iter()
            .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
            .collect();
        TriangleMesh {
            vertices,
            triangles,
        }
    }

    /// Writes the mesh as OBJ text (vertices and triangular faces only).
    pub fn to_obj(&self) -> String {
        let mut s = String::new();
        for v in &self.vertices {
            s.push_str(&format!("v {:?} {:?} {:?}\n", v.x, v.y, v.z));
        }
        for t in &self.triangles {
            s.push_str(&format!("f {} {} {}\n", t[0] + 1, t[1] + 1, t[2] + 1));
        }
        s
    }

    /// Parses OBJ text. Only `v` and `f` statements are read; polygonal faces are
    /// fan-triangulated; texture/normal indices and negative indices are accepted.
    pub fn from_obj_str(text: &str) -> Result<Self, MeshError> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let mut parts = raw.split_whitespace();
            match parts.next() {
                Some("v") => {
                    let mut c = [0.0; 3];
                    for slot in &mut c {
                        let tok = parts.next().ok_or_else(|| MeshError::Parse {
                            line,
                            msg: "vertex needs 3 coordinates".into(),
                        })?;
                        *slot = tok.parse().map_err(|_| MeshError::Parse {
                            line,
                            msg: format!("bad coordinate {tok:?}"),
                        })?;
                    }
                    vertices.push(Vec3::from_array(c));
                }
                Some("f") => {
                    let mut idx = Vec::new();
                    for tok in parts {
                        let head = tok.split('/').next().unwrap_or("");
                        let i: i64 = head.parse().map_err(|_| MeshError::Parse {
                            line,
                            msg: format!("bad face index {tok:?}"),
                        })?;
                        let resolved = match i {
                            i if i > 0 => i - 1,
                            i if i < 0 => vertices.len() as i64 + i,
                            _ => -1,
                        };
                        if resolved < 0 || resolved as usize >= vertices.len() {
                            return Err(MeshError::Parse {
                                line,
                                msg: format!("face index {i} out of range"),
                            });
                        }
                        idx.push(resolved as usize);
                    }
                    if idx.len() < 3 {
                        return Err(MeshError::Parse {
                            line,
                            msg: "face needs at least 3 vertices".into(),
                        });
                    }
                    for k in 1..idx.len() - 1 {
                        triangles.push([idx[0], idx[k], idx[k + 1]]);
                    }
                }
                _ => {}
            }
        }
        let mesh = TriangleMesh::new(vertices, triangles)?;
        if mesh.is_empty() {
            return Err(MeshError::Empty);
        }
        Ok(mesh)
    }

    pub fn load_obj(path: impl AsRef<Path>) -> Result<Self, MeshError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| MeshError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_obj_str(&text)
    }
}
