//! Solid voxelization: conservative surface rasterization plus parity fill.
//!
//! All work happens in lattice units, `u = (p - origin) / voxel_size`, with
//! coordinates within [`SNAP_EPS`] of an integer snapped onto it, so that faces
//! lying on cell planes are recognised exactly. A cell is occupied iff a triangle
//! meets its open interior, or its center lies inside the solid.

use super::{VoxelConfig, VoxelError, VoxelGrid};
use crate::math::Vec3;
use crate::mesh::TriangleMesh;
use crate::ssr::SceneObject;

/// Snap radius in voxel units.
pub const SNAP_EPS: f64 = 1e-6;

/// Fraction of scanlines with odd crossing counts that triggers surface-only output.
pub const PARITY_FAILURE_RATIO: f64 = 0.01;

#[inline]
fn snap(u: f64) -> f64 {
    let r = u.round();
    if (u - r).abs() <= SNAP_EPS {
        r
    } else {
        u
    }
}

pub(crate) fn to_lattice(p: Vec3, origin: Vec3, g: f64) -> [f64; 3] {
    [
        snap((p.x - origin.x) / g),
        snap((p.y - origin.y) / g),
        snap((p.z - origin.z) / g),
    ]
}

/// Strict triangle/box separating-axis test against the open unit cell
/// `[c - 0.5, c + 0.5]^3`: touching counts as separated.
fn tri_overlaps_cell(tri: &[[f64; 3]; 3], center: [f64; 3]) -> bool {
    const H: f64 = 0.5;
    let v: [[f64; 3]; 3] = std::array::from_fn(|k| std::array::from_fn(|a| tri[k][a] - center[a]));

    for a in 0..3 {
        let lo = v[0][a].min(v[1][a]).min(v[2][a]);
        let hi = v[0][a].max(v[1][a]).max(v[2][a]);
        if lo >= H || hi <= -H {
            return false;
        }
    }

    let e: [[f64; 3]; 3] =
        std::array::from_fn(|k| std::array::from_fn(|a| v[(k + 1) % 3][a] - v[k][a]));
    let cross = |p: [f64; 3], q: [f64; 3]| {
        [
            p[1] * q[2] - p[2] * q[1],
            p[2] * q[0] - p[0] * q[2],
            p[0] * q[1] - p[1] * q[0],
        ]
    };
    let dot = |p: [f64; 3], q: [f64; 3]| p[0] * q[0] + p[1] * q[1] + p[2] * q[2];
    let separated_on = |axis: [f64; 3]| {
        let r = H * (axis[0].abs() + axis[1].abs() + axis[2].abs());
        let p = [dot(axis, v[0]), dot(axis, v[1]), dot(axis, v[2])];
        let lo = p[0].min(p[1]).min(p[2]);
        let hi = p[0].max(p[1]).max(p[2]);
        lo >= r || hi <= -r
    };

    let n = cross(e[0], e[1]);
    if dot(n, n) > 0.0 && separated_on(n) {
        return false;
    }
    let scale = dot(e[0], e[0]).max(dot(e[1], e[1])).max(dot(e[2], e[2]));
    for edge in e {
        for a in 0..3 {
            let mut unit = [0.0; 3];
            unit[a] = 1.0;
            let axis = cross(unit, edge);
            // skip axes degenerate up to rounding (edge parallel to a box axis)
            if dot(axis, axis) <= 1e-24 * scale {
                continue;
            }
            if separated_on(axis) {
                return false;
            }
        }
    }
    true
}

/// Sign of the 2D edge function of `(a, b)` at `p`, with exact ties broken by
/// an infinitesimal shift of `p` by `(eps, eps^2)`. Computed in a canonical
/// endpoint order so an edge shared by two triangles gets one consistent answer.
fn edge_side(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    let flip = (b[0], b[1]) < (a[0], a[1]);
    let (a, b) = if flip { (b, a) } else { (a, b) };
    let (du, dv) = (b[0] - a[0], b[1] - a[1]);
    let e = du * (p[1] - a[1]) - dv * (p[0] - a[0]);
    let positive = if e != 0.0 {
        e > 0.0
    } else if dv != 0.0 {
        dv < 0.0
    } else {
        du > 0.0
    };
    positive != flip
}

struct Lattice {
    origin: Vec3,
    g: f64,
}

/// Cell index range `[lo, hi)` of cells whose open interior meets `[min, max]`.
fn cell_range(min: f64, max: f64) -> (i64, i64) {
    let lo = min.floor() as i64;
    let hi = (max.ceil() as i64).max(
        lo + if min == max && min.fract() != 0.0 {
            1
        } else {
            0
        },
    );
    (lo, hi)
}

fn voxelize_lattice_tris(tris: &[[[f64; 3]; 3]], lat: &Lattice) -> VoxelGrid {
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for t in tris {
        for v in t {
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
    }
    let mut offset = [0i64; 3];
    let mut dims = [0usize; 3];
    for a in 0..3 {
        let (l, h) = cell_range(lo[a], hi[a]);
        offset[a] = l;
        dims[a] = (h - l).max(0) as usize;
    }
    let mut grid = VoxelGrid::empty(lat.origin, lat.g, offset, dims);
    if dims.contains(&0) {
        return grid;
    }

    // surface
    for t in tris {
        let mut r = [(0i64, 0i64); 3];
        for a in 0..3 {
            let mn = t[0][a].min(t[1][a]).min(t[2][a]);
            let mx = t[0][a].max(t[1][a]).max(t[2][a]);
            let (l, h) = cell_range(mn, mx);
            r[a] = (l.max(offset[a]), h.min(offset[a] + dims[a] as i64));
        }
        for k in r[2].0..r[2].1 {
            for j in r[1].0..r[1].1 {
                for i in r[0].0..r[0].1 {
                    let c = [i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5];
                    if tri_overlaps_cell(t, c) {
                        grid.set_local(
                            (i - offset[0]) as usize,
                            (j - offset[1]) as usize,
                            (k - offset[2]) as usize,
                        );
                    }
                }
            }
        }
    }
    let surface = grid.bits.clone();

    // interior: rays along +x through cell centers, one per (j, k)
    let [nx, ny, nz] = dims;
    let mut rows: Vec<Vec<f64>> = vec![Vec::new(); ny * nz];
    for t in tris {
        let p: [[f64; 2]; 3] = std::array::from_fn(|k| [t[k][1], t[k][2]]);
        let area2 =
            (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[1][1] - p[0][1]) * (p[2][0] - p[0][0]);
        if area2 == 0.0 {
            continue;
        }
        let ymin = p[0][0].min(p[1][0]).min(p[2][0]);
        let ymax = p[0][0].max(p[1][0]).max(p[2][0]);
        let zmin = p[0][1].min(p[1][1]).min(p[2][1]);
        let zmax = p[0][1].max(p[1][1]).max(p[2][1]);
        // centers c = j + 0.5 with ymin <= c <= ymax
        let j0 = ((ymin - 0.5).ceil() as i64).max(offset[1]);
        let j1 = ((ymax - 0.5).floor() as i64).min(offset[1] + ny as i64 - 1);
        let k0 = ((zmin - 0.5).ceil() as i64).max(offset[2]);
        let k1 = ((zmax - 0.5).floor() as i64).min(offset[2] + nz as i64 - 1);
        if j0 > j1 || k0 > k1 {
            continue;
        }
        // plane: n . (q - v0) = 0 solved for x
        let e1 = [t[1][0] - t[0][0], t[1][1] - t[0][1], t[1][2] - t[0][2]];
        let e2 = [t[2][0] - t[0][0], t[2][1] - t[0][1], t[2][2] - t[0][2]];
        let n = [
            e1[1] * e2[2] - e1[2] * e2[1],
            e1[2] * e2[0] - e1[0] * e2[2],
            e1[0] * e2[1] - e1[1] * e2[0],
        ];
        for k in k0..=k1 {
            for j in j0..=j1 {
                let q = [j as f64 + 0.5, k as f64 + 0.5];
                let s0 = edge_side(p[0], p[1], q);
                if edge_side(p[1], p[2], q) != s0 || edge_side(p[2], p[0], q) != s0 {
                    continue;
                }
                let x = t[0][0] - (n[1] * (q[0] - t[0][1]) + n[2] * (q[1] - t[0][2])) / n[0];
                rows[(k - offset[2]) as usize * ny + (j - offset[1]) as usize].push(x);
            }
        }
    }

    let mut odd_rows = 0usize;
    for k in 0..nz {
        for j in 0..ny {
            let xs = &mut rows[k * ny + j];
            if xs.is_empty() {
                continue;
            }
            if xs.len() % 2 == 1 {
                odd_rows += 1;
                continue;
            }
            xs.sort_by(f64::total_cmp);
            for pair in xs.chunks_exact(2) {
                // centers i + 0.5 within [x0, x1]
                let i0 = ((pair[0] - 0.5).ceil() as i64).max(offset[0]);
                let i1 = ((pair[1] - 0.5).floor() as i64).min(offset[0] + nx as i64 - 1);
                for i in i0..=i1 {
                    grid.set_local((i - offset[0]) as usize, j, k);
                }
            }
        }
    }
    let scanlines = (ny * nz).max(1);
    if odd_rows > 0 && odd_rows as f64 >= PARITY_FAILURE_RATIO * scanlines as f64 {
        log::warn!("mesh is not watertight ({odd_rows} of {scanlines} scanlines odd); using surface occupancy");
        grid.bits = surface;
        grid.surface_only = true;
    }
    grid
}

/// Solid occupancy of `mesh` on the lattice anchored at `lattice_origin`.
pub fn voxelize_mesh(
    mesh: &TriangleMesh,
    cfg: &VoxelConfig,
    lattice_origin: Vec3,
) -> Result<VoxelGrid, VoxelError> {
    if !(cfg.voxel_size > 0.0) {
        return Err(VoxelError::BadConfig(format!(
            "voxel size {} must be positive",
            cfg.voxel_size
        )));
    }
    if mesh.is_empty() {
        return Err(VoxelError::EmptyMesh);
    }
    let tris: Vec<[[f64; 3]; 3]> = mesh
        .triangles_iter()
        .map(|t| t.map(|v| to_lattice(v, lattice_origin, cfg.voxel_size)))
        .collect();
    Ok(voxelize_lattice_tris(
        &tris,
        &Lattice {
            origin: lattice_origin,
            g: cfg.voxel_size,
        },
    ))
}

/// World-space geometry of an object: its mesh (or its box when `mesh` is
/// `None`) fitted to `obj.size` with bottom-center at the origin, rotated by
/// `obj.rot` and moved to `obj.pos`.
pub fn object_world_mesh(obj: &SceneObject, mesh: Option<&TriangleMesh>) -> TriangleMesh {
    let rot = obj.rot.normalized();
    let half = Vec3::new(obj.size.x / 2.0, 0.0, obj.size.z / 2.0);
    let local = match mesh.and_then(|m| m.aabb().map(|bb| (m, bb))) {
        None => TriangleMesh::cuboid(-half, Vec3::new(half.x, obj.size.y, half.z)),
        Some((m, (lo, hi))) => {
            let ext = hi - lo;
            let base = Vec3::new((lo.x + hi.x) / 2.0, lo.y, (lo.z + hi.z) / 2.0);
            let factor = |s: f64, e: f64| if e > 0.0 { s / e } else { 0.0 };
            let scale = Vec3::new(
                factor(obj.size.x, ext.x),
                factor(obj.size.y, ext.y),
                factor(obj.size.z, ext.z),
            );
            m.map_vertices(|v| (v - base).mul_elem(scale))
        }
    };
    local.map_vertices(|v| rot.rotate(v) + obj.pos)
}

pub fn place_object_voxels(
    obj: &SceneObject,
    mesh: Option<&TriangleMesh>,
    cfg: &VoxelConfig,
    lattice_origin: Vec3,
) -> Result<VoxelGrid, VoxelError> {
    voxelize_mesh(&object_world_mesh(obj, mesh), cfg, lattice_origin)
}
