#![allow(dead_code)]

use std::collections::HashSet;
use std::path::PathBuf;

use rand::Rng;
use ssrkit::math::{Quaternion, Vec3};
use ssrkit::mesh::TriangleMesh;
use ssrkit::ssr::{RoomType, Scene, SceneObject};

pub const G: f64 = 0.05;
pub const PAD: i64 = 2;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(rel)
}

pub fn read_fixture(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn grid_step(rng: &mut impl Rng, lo: f64, hi: f64, step: f64) -> f64 {
    let n = ((hi - lo) / step).round() as i64;
    lo + rng.gen_range(0..=n) as f64 * step
}

/// Rectangle `[0, w] x [0, d]` (shifted by `off`) with optional rectangular
/// notches cut from its corners.
#[derive(Debug, Clone)]
pub struct NotchedRoom {
    pub off: [f64; 2],
    pub w: f64,
    pub d: f64,
    /// (nx, nz) per corner BL, BR, TR, TL; zero = no notch.
    pub notches: [[f64; 2]; 4],
    pub height: f64,
}

impl NotchedRoom {
    pub fn random(rng: &mut impl Rng) -> Self {
        let w = grid_step(rng, 3.0, 6.0, G);
        let d = grid_step(rng, 3.0, 6.0, G);
        let mut notches = [[0.0; 2]; 4];
        for n in notches.iter_mut() {
            if rng.gen_bool(0.4) {
                *n = [
                    grid_step(rng, 0.5, w / 2.0 - 0.2, G),
                    grid_step(rng, 0.5, d / 2.0 - 0.2, G),
                ];
            }
        }
        Self {
            off: [
                grid_step(rng, -3.0, 0.0, 0.01),
                grid_step(rng, -3.0, 0.0, 0.01),
            ],
            w,
            d,
            notches,
            height: grid_step(rng, 2.4, 3.0, 0.01),
        }
    }

    pub fn corners(&self) -> Vec<[f64; 2]> {
        let (w, d) = (self.w, self.d);
        let [bl, br, tr, tl] = self.notches;
        let mut c = Vec::new();
        let mut push = |p: [f64; 2]| c.push([p[0] + self.off[0], p[1] + self.off[1]]);
        if bl == [0.0, 0.0] {
            push([0.0, 0.0]);
        } else {
            push([0.0, bl[1]]);
            push([bl[0], bl[1]]);
            push([bl[0], 0.0]);
        }
        if br == [0.0, 0.0] {
            push([w, 0.0]);
        } else {
            push([w - br[0], 0.0]);
            push([w - br[0], br[1]]);
            push([w, br[1]]);
        }
        if tr == [0.0, 0.0] {
            push([w, d]);
        } else {
            push([w, d - tr[1]]);
            push([w - tr[0], d - tr[1]]);
            push([w - tr[0], d]);
        }
        if tl == [0.0, 0.0] {
            push([0.0, d]);
        } else {
            push([tl[0], d]);
            push([tl[0], d - tl[1]]);
            push([0.0, d - tl[1]]);
        }
        c
    }

    pub fn area(&self) -> f64 {
        self.w * self.d - self.notches.iter().map(|n| n[0] * n[1]).sum::<f64>()
    }

    /// Point strictly inside the floor polygon (points on edges are not asked).
    pub fn contains(&self, x: f64, z: f64) -> bool {
        let (x, z) = (x - self.off[0], z - self.off[1]);
        let (w, d) = (self.w, self.d);
        if !(x > 0.0 && x < w && z > 0.0 && z < d) {
            return false;
        }
        let [bl, br, tr, tl] = self.notches;
        let in_bl = x < bl[0] && z < bl[1];
        let in_br = x > w - br[0] && z < br[1];
        let in_tr = x > w - tr[0] && z > d - tr[1];
        let in_tl = x < tl[0] && z > d - tl[1];
        !(in_bl || in_br || in_tr || in_tl)
    }

    pub fn scene(&self) -> Scene {
        Scene::from_floor(RoomType::Other, &self.corners(), self.height)
    }
}

/// Axis-aligned (up to quarter turns) box resting on the floor.
pub fn random_box(rng: &mut impl Rng, room: &NotchedRoom) -> SceneObject {
    let size = Vec3::new(
        grid_step(rng, 0.2, 1.5, 0.01),
        grid_step(rng, 0.3, 2.0, 0.01),
        grid_step(rng, 0.2, 1.5, 0.01),
    );
    let pos = Vec3::new(
        grid_step(rng, room.off[0] - 0.5, room.off[0] + room.w + 0.5, 0.01),
        0.0,
        grid_step(rng, room.off[1] - 0.5, room.off[1] + room.d + 0.5, 0.01),
    );
    let turns = rng.gen_range(0..4u8);
    SceneObject::new("box", size, pos, Quaternion::from_quarter_turns(turns))
}

/// Footprint half extents of an object rotated by a whole number of quarter turns.
fn world_box(o: &SceneObject) -> ([f64; 3], [f64; 3]) {
    let r = o.rot.rotate(Vec3::new(1.0, 0.0, 0.0));
    let swapped = r.x.abs() < 0.5;
    let (hx, hz) = if swapped {
        (o.size.z / 2.0, o.size.x / 2.0)
    } else {
        (o.size.x / 2.0, o.size.z / 2.0)
    };
    (
        [o.pos.x - hx, o.pos.y, o.pos.z - hz],
        [o.pos.x + hx, o.pos.y + o.size.y, o.pos.z + hz],
    )
}

fn snap(u: f64) -> f64 {
    let r = u.round();
    if (u - r).abs() <= 1e-6 {
        r
    } else {
        u
    }
}

/// Cells `i` whose open span `(i, i + 1)` meets the closed interval `[lo, hi]`.
fn cell_span(lo: f64, hi: f64) -> std::ops::Range<i64> {
    lo.floor() as i64..hi.ceil() as i64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleCounts {
    pub oob: u64,
    pub mbl: u64,
    pub total: u64,
}

/// Brute force OOB / MBL / total counts by enumerating cells.
pub fn vbl_oracle(room: &NotchedRoom, objects: &[SceneObject]) -> OracleCounts {
    let corners = room.corners();
    let min_x = corners.iter().map(|c| c[0]).fold(f64::INFINITY, f64::min);
    let min_z = corners.iter().map(|c| c[1]).fold(f64::INFINITY, f64::min);
    let origin = [
        min_x - PAD as f64 * G,
        -(PAD as f64) * G,
        min_z - PAD as f64 * G,
    ];
    let lat = |v: f64, a: usize| snap((v - origin[a]) / G);
    let ceiling = lat(room.height, 1);
    let floor = lat(0.0, 1);
    let in_room = |c: [i64; 3]| {
        let j = c[1] as f64;
        let y_ok = j < ceiling && j + 1.0 > floor;
        let x = origin[0] + (c[0] as f64 + 0.5) * G;
        let z = origin[2] + (c[2] as f64 + 0.5) * G;
        y_ok && room.contains(x, z)
    };

    let mut cells: Vec<HashSet<[i64; 3]>> = Vec::new();
    for o in objects {
        let (lo, hi) = world_box(o);
        let r: [std::ops::Range<i64>; 3] =
            std::array::from_fn(|a| cell_span(lat(lo[a], a), lat(hi[a], a)));
        let mut set = HashSet::new();
        for i in r[0].clone() {
            for j in r[1].clone() {
                for k in r[2].clone() {
                    set.insert([i, j, k]);
                }
            }
        }
        cells.push(set);
    }
    let total = cells.iter().map(|s| s.len() as u64).sum();
    let oob = cells
        .iter()
        .flat_map(|s| s.iter())
        .filter(|&&c| !in_room(c))
        .count() as u64;
    let mut mbl = 0;
    for i in 0..cells.len() {
        for j in i + 1..cells.len() {
            mbl += cells[i].iter().filter(|c| cells[j].contains(*c)).count() as u64;
        }
    }
    OracleCounts { oob, mbl, total }
}

/// Random centroid and edge splits; edge splits leave T-junctions behind.
pub fn refine(mesh: &TriangleMesh, rng: &mut impl Rng, steps: usize) -> TriangleMesh {
    let mut v = mesh.vertices.clone();
    let mut t = mesh.triangles.clone();
    for _ in 0..steps {
        let i = rng.gen_range(0..t.len());
        let [a, b, c] = t[i];
        if rng.gen_bool(0.5) {
            let m = (v[a] + v[b] + v[c]).scale(1.0 / 3.0);
            v.push(m);
            let m = v.len() - 1;
            t[i] = [a, b, m];
            t.push([b, c, m]);
            t.push([c, a, m]);
        } else {
            let s: f64 = rng.gen_range(0.2..0.8);
            let m = v[a] + (v[b] - v[a]).scale(s);
            v.push(m);
            let m = v.len() - 1;
            t[i] = [a, m, c];
            t.push([m, b, c]);
        }
    }
    TriangleMesh::new(v, t).expect("refined mesh is valid")
}
