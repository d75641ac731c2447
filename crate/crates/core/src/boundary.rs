//! Rectilinear room boundaries: corner extraction from floor meshes, polygon
//! measures, and the extruded boundary prism used for voxelization.
//!
//! Polygons live in the floor plane `(x, z)`. Extracted corner lists start at the
//! corner with minimal x (ties: minimal z) and are ordered so that the shoelace
//! sum over `(x, z)` is negative, i.e. the walk leaves the start corner along +z.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use crate::math::Vec3;
use crate::mesh::TriangleMesh;

/// Tolerance (meters) for "same height" and axis-alignment checks.
pub const AXIS_TOL: f64 = 1e-4;

/// Point keys are quantized to this resolution when welding mesh vertices.
const WELD_RES: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum BoundaryError {
    #[error("mesh has no horizontal floor faces")]
    NoFloor,
    #[error("boundary edge from ({0}, {1}) to ({2}, {3}) is not axis-aligned")]
    NotRectilinear(f64, f64, f64, f64),
    #[error("boundary edges do not close into a loop")]
    OpenBoundary,
    #[error("floor boundary has {0} loops; holes are not supported")]
    MultipleLoops(usize),
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RectilinearPolygon {
    corners: Vec<[f64; 2]>,
    pub y_floor: f64,
    pub y_ceiling: f64,
}

impl RectilinearPolygon {
    /// Validates closure, axis alignment, true corners and simplicity.
    pub fn new(
        corners: Vec<[f64; 2]>,
        y_floor: f64,
        y_ceiling: f64,
    ) -> Result<Self, BoundaryError> {
        let bad = |m: String| Err(BoundaryError::InvalidPolygon(m));
        let n = corners.len();
        if n < 4 {
            return bad(format!("{n} corners, need at least 4"));
        }
        if corners.iter().flatten().any(|c| !c.is_finite())
            || !y_floor.is_finite()
            || !y_ceiling.is_finite()
        {
            return bad("non-finite coordinate".into());
        }
        for i in 0..n {
            let (a, b) = (corners[i], corners[(i + 1) % n]);
            let (dx, dz) = (b[0] - a[0], b[1] - a[1]);
            if dx.abs() <= AXIS_TOL && dz.abs() <= AXIS_TOL {
                return bad(format!("zero-length edge at corner {i}"));
            }
            if dx.abs() > AXIS_TOL && dz.abs() > AXIS_TOL {
                return Err(BoundaryError::NotRectilinear(a[0], a[1], b[0], b[1]));
            }
        }
        for i in 0..n {
            let (a, b, c) = (corners[i], corners[(i + 1) % n], corners[(i + 2) % n]);
            let horizontal_ab = (b[1] - a[1]).abs() <= AXIS_TOL;
            let horizontal_bc = (c[1] - b[1]).abs() <= AXIS_TOL;
            if horizontal_ab == horizontal_bc {
                return bad(format!("collinear edges meet at corner {}", (i + 1) % n));
            }
        }
        let poly = Self {
            corners,
            y_floor,
            y_ceiling,
        };
        if !poly.is_simple() {
            return bad("edges self-intersect".into());
        }
        Ok(poly)
    }

    /// Builds a polygon from a raw ring, merging duplicate points and collinear
    /// runs first.
    pub fn from_ring(
        points: &[[f64; 2]],
        y_floor: f64,
        y_ceiling: f64,
    ) -> Result<Self, BoundaryError> {
        Self::new(collapse_collinear(points), y_floor, y_ceiling)
    }

    pub fn corners(&self) -> &[[f64; 2]] {
        &self.corners
    }

    pub fn len(&self) -> usize {
        self.corners.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corners.is_empty()
    }

    pub fn height(&self) -> f64 {
        self.y_ceiling - self.y_floor
    }

    fn edges(&self) -> impl Iterator<Item = ([f64; 2], [f64; 2])> + '_ {
        let n = self.corners.len();
        (0..n).map(move |i| (self.corners[i], self.corners[(i + 1) % n]))
    }

    /// Shoelace sum over `(x, z)`; half of it is the signed area.
    pub fn signed_area(&self) -> f64 {
        0.5 * self
            .edges()
            .map(|(a, b)| a[0] * b[1] - b[0] * a[1])
            .sum::<f64>()
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    /// Area-weighted centroid `(x, z)`.
    pub fn centroid(&self) -> [f64; 2] {
        let a = self.signed_area();
        let (mut cx, mut cz) = (0.0, 0.0);
        for (p, q) in self.edges() {
            let cross = p[0] * q[1] - q[0] * p[1];
            cx += (p[0] + q[0]) * cross;
            cz += (p[1] + q[1]) * cross;
        }
        [cx / (6.0 * a), cz / (6.0 * a)]
    }

    /// Closed-region containment: points on the boundary count as inside.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        for (a, b) in self.edges() {
            if on_segment(a, b, p) {
                return true;
            }
        }
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a[1] > p[1]) != (b[1] > p[1]) {
                let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
                if p[0] < x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn is_simple(&self) -> bool {
        let n = self.corners.len();
        let edges: Vec<_> = self.edges().collect();
        for i in 0..n {
            for j in i + 1..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (a, b) = edges[i];
                let (c, d) = edges[j];
                if adjacent {
                    // adjacent edges may only share their common corner
                    let (other_i, other_j) = if j == i + 1 { (a, d) } else { (b, c) };
                    if on_segment(c, d, other_i) || on_segment(a, b, other_j) {
                        return false;
                    }
                } else if segments_touch(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }

    /// Same polygon with its corner list rotated to start at index `k`.
    pub fn cyclic_shift(&self, k: usize) -> Self {
        let mut corners = self.corners.clone();
        if !corners.is_empty() {
            let k = k % corners.len();
            corners.rotate_left(k);
        }
        Self {
            corners,
            ..self.clone()
        }
    }

    /// Canonical ordering: start at min x (then min z), negative (x,z) shoelace.
    pub fn canonicalized(&self) -> Self {
        let mut corners = self.corners.clone();
        if self.signed_area() > 0.0 {
            corners.reverse();
        }
        let start = (0..corners.len())
            .min_by(|&i, &j| {
                let (a, b) = (corners[i], corners[j]);
                a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1]))
            })
            .unwrap_or(0);
        corners.rotate_left(start);
        Self {
            corners,
            ..self.clone()
        }
    }
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    if cross.abs() > 1e-9 * len.max(1.0) {
        return false;
    }
    let lo = |i: usize| a[i].min(b[i]) - 1e-12;
    let hi = |i: usize| a[i].max(b[i]) + 1e-12;
    p[0] >= lo(0) && p[0] <= hi(0) && p[1] >= lo(1) && p[1] <= hi(1)
}

fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

fn segments_touch(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> bool {
    let (d1, d2) = (orient(c, d, a), orient(c, d, b));
    let (d3, d4) = (orient(a, b, c), orient(a, b, d));
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    on_segment(c, d, a) || on_segment(c, d, b) || on_segment(a, b, c) || on_segment(a, b, d)
}

/// Drops repeated points and interior points of straight runs from a closed ring.
pub fn collapse_collinear(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut ring: Vec<[f64; 2]> = Vec::with_capacity(points.len());
    for &p in points {
        if ring
            .last()
            .is_none_or(|q| (q[0] - p[0]).abs() > AXIS_TOL || (q[1] - p[1]).abs() > AXIS_TOL)
        {
            ring.push(p);
        }
    }
    while ring.len() > 1 {
        let (f, l) = (ring[0], ring[ring.len() - 1]);
        if (f[0] - l[0]).abs() <= AXIS_TOL && (f[1] - l[1]).abs() <= AXIS_TOL {
            ring.pop();
        } else {
            break;
        }
    }
    loop {
        let n = ring.len();
        if n < 3 {
            return ring;
        }
        let mut removed = false;
        for i in 0..n {
            let (a, b, c) = (ring[(i + n - 1) % n], ring[i], ring[(i + 1) % n]);
            let same_x = (a[0] - b[0]).abs() <= AXIS_TOL && (b[0] - c[0]).abs() <= AXIS_TOL;
            let same_z = (a[1] - b[1]).abs() <= AXIS_TOL && (b[1] - c[1]).abs() <= AXIS_TOL;
            if same_x || same_z {
                ring.remove(i);
                removed = true;
                break;
            }
        }
        if !removed {
            return ring;
        }
    }
}

type Key = (i64, i64);

fn key(x: f64, z: f64) -> Key {
    ((x / WELD_RES).round() as i64, (z / WELD_RES).round() as i64)
}

/// Extracts the ordered corner polygon of the floor of `mesh`.
///
/// Floor faces are the horizontal triangles at the lowest horizontal level. Edges
/// used by exactly one floor face (after splitting collinear edges at every vertex
/// lying on them, so T-junctions cancel correctly) are chained into a single loop,
/// snapped to the axes and reduced to true corners. The ceiling height is the
/// highest horizontal level found, or the mesh's max y if there is only one.
pub fn extract_corners(mesh: &TriangleMesh) -> Result<RectilinearPolygon, BoundaryError> {
    let horizontal: Vec<[Vec3; 3]> = mesh
        .triangles_iter()
        .filter(|t| (t[0].y - t[1].y).abs() <= AXIS_TOL && (t[0].y - t[2].y).abs() <= AXIS_TOL)
        .collect();
    let y_floor = horizontal
        .iter()
        .map(|t| t[0].y)
        .min_by(f64::total_cmp)
        .ok_or(BoundaryError::NoFloor)?;
    let floor: Vec<&[Vec3; 3]> = horizontal
        .iter()
        .filter(|t| (t[0].y - y_floor).abs() <= AXIS_TOL)
        .collect();
    let y_top_level = horizontal
        .iter()
        .map(|t| t[0].y)
        .max_by(f64::total_cmp)
        .unwrap_or(y_floor);
    let y_ceiling = if y_top_level - y_floor > AXIS_TOL {
        y_top_level
    } else {
        mesh.aabb().map(|(_, hi)| hi.y).unwrap_or(y_floor)
    };

    let mut coords: HashMap<Key, [f64; 2]> = HashMap::new();
    let mut edges: Vec<(Key, Key)> = Vec::new();
    for t in &floor {
        let ks: Vec<Key> = t
            .iter()
            .map(|v| {
                let k = key(v.x, v.z);
                coords.entry(k).or_insert([v.x, v.z]);
                k
            })
            .collect();
        for i in 0..3 {
            edges.push((ks[i], ks[(i + 1) % 3]));
        }
    }

    let boundary = boundary_segments(&edges, &coords);
    if boundary.is_empty() {
        return Err(BoundaryError::OpenBoundary);
    }
    for &(a, b) in &boundary {
        let (p, q) = (coords[&a], coords[&b]);
        if (p[0] - q[0]).abs() > AXIS_TOL && (p[1] - q[1]).abs() > AXIS_TOL {
            return Err(BoundaryError::NotRectilinear(p[0], p[1], q[0], q[1]));
        }
    }

    let ring = chain_loop(&boundary)?;
    let points: Vec<[f64; 2]> = ring.iter().map(|k| coords[k]).collect();
    let corners = snap_axes(&collapse_collinear(&points));
    RectilinearPolygon::new(corners, y_floor, y_ceiling).map(|p| p.canonicalized())
}

type KeyCoord = fn(Key) -> i64;

/// Edges covered by exactly one floor face. Every edge is split at the vertices
/// lying on it, so that a long edge and the two shorter edges of a neighbour
/// sharing it cancel.
fn boundary_segments(edges: &[(Key, Key)], coords: &HashMap<Key, [f64; 2]>) -> Vec<(Key, Key)> {
    // supporting lines of axis-aligned edges: (axis, fixed coordinate key)
    let mut on_line: BTreeMap<(u8, i64), Vec<Key>> = BTreeMap::new();
    for &k in coords.keys() {
        on_line.entry((0, k.0)).or_default().push(k);
        on_line.entry((1, k.1)).or_default().push(k);
    }
    let line_tol = (AXIS_TOL / WELD_RES).round() as i64;
    let mut count: HashMap<(Key, Key), usize> = HashMap::new();
    let mut bump = |a: Key, b: Key| {
        let e = if a <= b { (a, b) } else { (b, a) };
        *count.entry(e).or_default() += 1;
    };
    for &(a, b) in edges {
        let axis = if (a.0 - b.0).abs() <= line_tol {
            Some(0u8)
        } else if (a.1 - b.1).abs() <= line_tol {
            Some(1u8)
        } else {
            None
        };
        let Some(axis) = axis else {
            // diagonal (interior) edges: split at any vertex within tolerance of the segment
            let (p, q) = (coords[&a], coords[&b]);
            let d = [q[0] - p[0], q[1] - p[1]];
            let len2 = d[0] * d[0] + d[1] * d[1];
            let mut chain: Vec<(f64, Key)> = coords
                .iter()
                .filter(|&(&k, _)| k != a && k != b)
                .filter_map(|(&k, c)| {
                    let t = ((c[0] - p[0]) * d[0] + (c[1] - p[1]) * d[1]) / len2;
                    let off = (c[0] - p[0]) * d[1] - (c[1] - p[1]) * d[0];
                    (t > 0.0 && t < 1.0 && off.abs() <= AXIS_TOL * len2.sqrt()).then_some((t, k))
                })
                .collect();
            chain.sort_by(|x, y| x.0.total_cmp(&y.0));
            let mut prev = a;
            for (_, k) in chain {
                bump(prev, k);
                prev = k;
            }
            bump(prev, b);
            continue;
        };
        // points on this line strictly between a and b, ordered along the edge
        let (fixed, along): (KeyCoord, KeyCoord) = if axis == 0 {
            (|k| k.0, |k| k.1)
        } else {
            (|k| k.1, |k| k.0)
        };
        let (lo, hi) = (along(a).min(along(b)), along(a).max(along(b)));
        let mut chain: Vec<Key> = Vec::new();
        for pts in on_line
            .range((axis, fixed(a) - line_tol)..=(axis, fixed(a) + line_tol))
            .map(|(_, v)| v)
        {
            chain.extend(
                pts.iter()
                    .copied()
                    .filter(|&k| along(k) > lo && along(k) < hi),
            );
        }
        chain.sort_by_key(|&k| along(k));
        chain.dedup();
        let mut prev = if along(a) <= along(b) { a } else { b };
        let last = if along(a) <= along(b) { b } else { a };
        for k in chain {
            bump(prev, k);
            prev = k;
        }
        bump(prev, last);
    }
    let mut out: Vec<(Key, Key)> = count
        .into_iter()
        .filter(|&(_, n)| n == 1)
        .map(|(e, _)| e)
        .collect();
    out.sort();
    out
}

fn chain_loop(segments: &[(Key, Key)]) -> Result<Vec<Key>, BoundaryError> {
    let mut adj: BTreeMap<Key, Vec<Key>> = BTreeMap::new();
    for &(a, b) in segments {
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    if adj.values().any(|v| v.len() % 2 == 1) {
        return Err(BoundaryError::OpenBoundary);
    }
    if adj.values().any(|v| v.len() != 2) {
        // pinch vertices only arise where several loops touch
        return Err(BoundaryError::MultipleLoops(2));
    }
    let start = *adj.keys().next().expect("non-empty");
    let mut ring = vec![start];
    let mut prev = start;
    let mut cur = adj[&start][0];
    while cur != start {
        ring.push(cur);
        let nbrs = &adj[&cur];
        let next = if nbrs[0] == prev { nbrs[1] } else { nbrs[0] };
        prev = cur;
        cur = next;
        if ring.len() > segments.len() {
            return Err(BoundaryError::OpenBoundary);
        }
    }
    if ring.len() != segments.len() {
        // every vertex has degree 2, so the remainder forms further loops
        let mut seen: std::collections::BTreeSet<Key> = ring.iter().copied().collect();
        let mut loops = 1;
        for &k in adj.keys() {
            if seen.insert(k) {
                loops += 1;
                let mut prev = k;
                let mut cur = adj[&k][0];
                while cur != k {
                    seen.insert(cur);
                    let nbrs = &adj[&cur];
                    let next = if nbrs[0] == prev { nbrs[1] } else { nbrs[0] };
                    prev = cur;
                    cur = next;
                }
            }
        }
        return Err(BoundaryError::MultipleLoops(loops));
    }
    Ok(ring)
}

/// Makes consecutive corners share their common coordinate exactly.
fn snap_axes(corners: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let n = corners.len();
    let mut out = corners.to_vec();
    for i in 0..n {
        let j = (i + 1) % n;
        let (a, b) = (out[i], out[j]);
        if (a[0] - b[0]).abs() <= AXIS_TOL && (a[1] - b[1]).abs() > AXIS_TOL {
            out[j][0] = a[0];
        } else if (a[1] - b[1]).abs() <= AXIS_TOL && (a[0] - b[0]).abs() > AXIS_TOL {
            out[j][1] = a[1];
        }
    }
    out
}

/// Ear-clipping triangulation of a simple polygon; returns index triples with
/// counter-clockwise orientation in `(x, z)`.
fn triangulate(points: &[[f64; 2]]) -> Vec<[usize; 3]> {
    let n = points.len();
    let area: f64 = (0..n)
        .map(|i| {
            let (a, b) = (points[i], points[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum();
    let mut idx: Vec<usize> = (0..n).collect();
    if area < 0.0 {
        idx.reverse();
    }
    let mut tris = Vec::with_capacity(n.saturating_sub(2));
    while idx.len() > 3 {
        let m = idx.len();
        let mut clipped = false;
        for i in 0..m {
            let (ia, ib, ic) = (idx[(i + m - 1) % m], idx[i], idx[(i + 1) % m]);
            let (a, b, c) = (points[ia], points[ib], points[ic]);
            if orient(a, b, c) <= 0.0 {
                continue;
            }
            let blocked = idx.iter().any(|&k| {
                if k == ia || k == ib || k == ic {
                    return false;
                }
                let p = points[k];
                orient(a, b, p) >= 0.0 && orient(b, c, p) >= 0.0 && orient(c, a, p) >= 0.0
            });
            if !blocked {
                tris.push([ia, ib, ic]);
                idx.remove(i);
                clipped = true;
                break;
            }
        }
        if !clipped {
            // numerically stuck; fall back to a fan over the remainder
            for k in 1..idx.len() - 1 {
                tris.push([idx[0], idx[k], idx[k + 1]]);
            }
            return tris;
        }
    }
    tris.push([idx[0], idx[1], idx[2]]);
    tris
}

/// Closed prism over the polygon between floor and ceiling, outward winding.
pub fn extrude_boundary_mesh(poly: &RectilinearPolygon) -> Result<TriangleMesh, BoundaryError> {
    if !(poly.height() > 0.0) {
        return Err(BoundaryError::InvalidPolygon(format!(
            "ceiling {} must be above floor {}",
            poly.y_ceiling, poly.y_floor
        )));
    }
    let c = poly.corners();
    let n = c.len();
    let mut vertices: Vec<Vec3> = c
        .iter()
        .map(|p| Vec3::new(p[0], poly.y_floor, p[1]))
        .collect();
    vertices.extend(c.iter().map(|p| Vec3::new(p[0], poly.y_ceiling, p[1])));

    // ccw in (x, z) has normal -y under the right-handed y-up frame
    let mut triangles = Vec::with_capacity(4 * n - 4);
    let ccw = poly.signed_area() > 0.0;
    for t in triangulate(c) {
        triangles.push(t);
        triangles.push([t[0] + n, t[2] + n, t[1] + n]);
    }
    for i in 0..n {
        let j = (i + 1) % n;
        let (b0, b1, t0, t1) = (i, j, i + n, j + n);
        if ccw {
            triangles.push([b0, t0, t1]);
            triangles.push([b0, t1, b1]);
        } else {
            triangles.push([b0, t1, t0]);
            triangles.push([b0, b1, t1]);
        }
    }
    Ok(TriangleMesh {
        vertices,
        triangles,
    })
}
