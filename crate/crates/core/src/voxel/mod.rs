//! Voxel occupancy and the layout-violation metrics built on it: out-of-bounds
//! voxels (OOB), pairwise overlap (MBL), their sum (VBL) and the change in VBL
//! caused by adding one object.

mod grid;
mod voxelize;

use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boundary::{extrude_boundary_mesh, BoundaryError};
use crate::math::Vec3;
use crate::mesh::{MeshError, TriangleMesh};
use crate::ssr::{Scene, SceneObject};

pub use grid::{Footprint, VoxelConfig, VoxelGrid};
pub use voxelize::{
    object_world_mesh, place_object_voxels, voxelize_mesh, PARITY_FAILURE_RATIO, SNAP_EPS,
};

#[derive(Debug, Error)]
pub enum VoxelError {
    #[error("grids are on different lattices")]
    LatticeMismatch,
    #[error("no mesh for asset {0:?}")]
    MissingMesh(String),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("invalid scene bounds: {0}")]
    InvalidBounds(String),
    #[error("scene boundary: {0}")]
    Boundary(#[from] BoundaryError),
    #[error("'after' is not 'before' plus exactly one object")]
    NotSingleAddition,
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("bad voxel config: {0}")]
    BadConfig(String),
}

/// Supplies per-object geometry. `Ok(None)` means "use the object's box".
pub trait MeshResolver: Sync {
    fn resolve(&self, obj: &SceneObject) -> Result<Option<TriangleMesh>, VoxelError>;
}

/// Every object is its own bounding box.
#[derive(Debug, Clone, Copy, Default)]
pub struct BoxGeometry;

impl MeshResolver for BoxGeometry {
    fn resolve(&self, _obj: &SceneObject) -> Result<Option<TriangleMesh>, VoxelError> {
        Ok(None)
    }
}

/// Loads `<dir>/<id>.obj`, where `id` is the sampled asset jid, else the jid.
/// Objects without any id fall back to their box.
#[derive(Debug, Clone)]
pub struct MeshDir {
    pub dir: PathBuf,
}

impl MeshDir {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }
}

fn asset_id(obj: &SceneObject) -> Option<&str> {
    obj.sampled_asset_jid.as_deref().or(obj.jid.as_deref())
}

impl MeshResolver for MeshDir {
    fn resolve(&self, obj: &SceneObject) -> Result<Option<TriangleMesh>, VoxelError> {
        let Some(id) = asset_id(obj) else {
            return Ok(None);
        };
        let path = self.dir.join(format!("{id}.obj"));
        if !path.is_file() {
            return Err(VoxelError::MissingMesh(id.to_string()));
        }
        Ok(Some(TriangleMesh::load_obj(path)?))
    }
}

/// In-memory meshes keyed by asset id; unknown ids are an error.
#[derive(Debug, Clone, Default)]
pub struct MeshTable(pub HashMap<String, TriangleMesh>);

impl MeshResolver for MeshTable {
    fn resolve(&self, obj: &SceneObject) -> Result<Option<TriangleMesh>, VoxelError> {
        let Some(id) = asset_id(obj) else {
            return Ok(None);
        };
        match self.0.get(id) {
            Some(m) => Ok(Some(m.clone())),
            None => Err(VoxelError::MissingMesh(id.to_string())),
        }
    }
}

/// Overlap counts and totals for one scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationReport {
    pub oob_voxels: u64,
    pub mbl_voxels: u64,
    pub vbl_voxels: u64,
    pub per_object_oob: Vec<u64>,
    /// Nonzero pair overlaps keyed `"i,j"` with `i < j`.
    pub per_pair_mbl: BTreeMap<String, u64>,
    pub total_object_voxels: u64,
    pub per_object_voxels: Vec<u64>,
    pub oob_norm: f64,
    pub mbl_norm: f64,
    pub vbl_norm: f64,
}

impl ViolationReport {
    fn assemble(
        per_object_voxels: Vec<u64>,
        per_object_oob: Vec<u64>,
        pairs: Vec<((usize, usize), u64)>,
    ) -> Self {
        let oob_voxels: u64 = per_object_oob.iter().sum();
        let mbl_voxels: u64 = pairs.iter().map(|p| p.1).sum();
        let total_object_voxels: u64 = per_object_voxels.iter().sum();
        let norm = |c: u64| {
            if total_object_voxels == 0 {
                0.0
            } else {
                c as f64 / total_object_voxels as f64
            }
        };
        Self {
            oob_voxels,
            mbl_voxels,
            vbl_voxels: oob_voxels + mbl_voxels,
            per_object_oob,
            per_pair_mbl: pairs
                .into_iter()
                .filter(|p| p.1 > 0)
                .map(|((i, j), c)| (pair_key(i, j), c))
                .collect(),
            total_object_voxels,
            per_object_voxels,
            oob_norm: norm(oob_voxels),
            mbl_norm: norm(mbl_voxels),
            vbl_norm: norm(oob_voxels + mbl_voxels),
        }
    }

    /// Overlap of objects `i` and `j` (order irrelevant).
    pub fn pair(&self, i: usize, j: usize) -> u64 {
        self.per_pair_mbl
            .get(&pair_key(i.min(j), i.max(j)))
            .copied()
            .unwrap_or(0)
    }

    /// Normalized VBL of the same scene with object `k` removed, derived from
    /// the per-object and per-pair terms.
    pub fn vbl_norm_without(&self, k: usize) -> f64 {
        let total = self.total_object_voxels - self.per_object_voxels[k];
        let oob = self.oob_voxels - self.per_object_oob[k];
        let mbl = self.mbl_voxels
            - (0..self.per_object_voxels.len())
                .filter(|&j| j != k)
                .map(|j| self.pair(k, j))
                .sum::<u64>();
        if total == 0 {
            0.0
        } else {
            (oob + mbl) as f64 / total as f64
        }
    }
}

fn pair_key(i: usize, j: usize) -> String {
    format!("{i},{j}")
}

/// Shared lattice anchor: boundary AABB minimum (x, floor y, z) minus `padding` voxels.
pub fn scene_lattice_origin(scene: &Scene, cfg: &VoxelConfig) -> Vec3 {
    let pad = cfg.padding as f64 * cfg.voxel_size;
    let (mut x, mut z) = (f64::INFINITY, f64::INFINITY);
    for v in &scene.bounds_bottom {
        x = x.min(v.x);
        z = z.min(v.z);
    }
    if !x.is_finite() {
        x = 0.0;
        z = 0.0;
    }
    Vec3::new(x - pad, scene.floor_y() - pad, z - pad)
}

/// Occupancy of the extruded boundary prism (interior plus walls).
pub fn boundary_grid(
    scene: &Scene,
    cfg: &VoxelConfig,
    origin: Vec3,
) -> Result<VoxelGrid, VoxelError> {
    scene.check_bounds().map_err(VoxelError::InvalidBounds)?;
    let mesh = extrude_boundary_mesh(&scene.floor_polygon()?)?;
    voxelize_mesh(&mesh, cfg, origin)
}

/// Object cells not covered by the scene grid.
pub fn compute_oob(obj: &VoxelGrid, scene: &VoxelGrid) -> Result<u64, VoxelError> {
    if !obj.same_lattice(scene) {
        return Err(VoxelError::LatticeMismatch);
    }
    Ok(obj.iter_occupied().filter(|&c| !scene.get(c)).count() as u64)
}

fn boxes_overlap(a: &VoxelGrid, b: &VoxelGrid) -> bool {
    let (ae, be) = (a.end(), b.end());
    (0..3).all(|k| a.offset[k].max(b.offset[k]) < ae[k].min(be[k]))
}

/// Exact cell-by-cell overlap count.
pub fn count_overlap(a: &VoxelGrid, b: &VoxelGrid) -> Result<u64, VoxelError> {
    if !a.same_lattice(b) {
        return Err(VoxelError::LatticeMismatch);
    }
    if !boxes_overlap(a, b) {
        return Ok(0);
    }
    let (ae, be) = (a.end(), b.end());
    let lo: [i64; 3] = std::array::from_fn(|k| a.offset[k].max(b.offset[k]));
    let hi: [i64; 3] = std::array::from_fn(|k| ae[k].min(be[k]));
    let mut n = 0;
    for z in lo[2]..hi[2] {
        for y in lo[1]..hi[1] {
            for x in lo[0]..hi[0] {
                if a.get([x, y, z]) && b.get([x, y, z]) {
                    n += 1;
                }
            }
        }
    }
    Ok(n)
}

/// Pair overlap with the horizontal-projection early exit.
pub fn compute_mbl_pair(a: &VoxelGrid, b: &VoxelGrid) -> Result<u64, VoxelError> {
    if !a.same_lattice(b) {
        return Err(VoxelError::LatticeMismatch);
    }
    if !boxes_overlap(a, b) || !a.footprint().intersects(&b.footprint()) {
        return Ok(0);
    }
    count_overlap(a, b)
}

/// Voxelizes every object of `scene` on the lattice at `origin`, in object order.
pub fn object_grids(
    scene: &Scene,
    resolver: &dyn MeshResolver,
    cfg: &VoxelConfig,
    origin: Vec3,
) -> Result<Vec<VoxelGrid>, VoxelError> {
    scene
        .objects
        .par_iter()
        .map(|o| {
            let mesh = resolver.resolve(o)?;
            place_object_voxels(o, mesh.as_ref(), cfg, origin)
        })
        .collect()
}

fn check_config(cfg: &VoxelConfig) -> Result<(), VoxelError> {
    if !(cfg.voxel_size > 0.0 && cfg.voxel_size.is_finite()) {
        return Err(VoxelError::BadConfig(format!(
            "voxel size {} must be positive",
            cfg.voxel_size
        )));
    }
    if cfg.padding < 0 {
        return Err(VoxelError::BadConfig(format!(
            "padding {} must be non-negative",
            cfg.padding
        )));
    }
    Ok(())
}

pub fn compute_vbl(
    scene: &Scene,
    resolver: &dyn MeshResolver,
    cfg: &VoxelConfig,
) -> Result<ViolationReport, VoxelError> {
    check_config(cfg)?;
    let origin = scene_lattice_origin(scene, cfg);
    let room = boundary_grid(scene, cfg, origin)?;
    let grids = object_grids(scene, resolver, cfg, origin)?;
    report_from_grids(&room, &grids, cfg.early_stop)
}

/// Builds the report from precomputed grids.
pub fn report_from_grids(
    room: &VoxelGrid,
    grids: &[VoxelGrid],
    early_stop: bool,
) -> Result<ViolationReport, VoxelError> {
    let per_object_voxels = grids.iter().map(VoxelGrid::count).collect();
    let per_object_oob = grids
        .par_iter()
        .map(|g| compute_oob(g, room))
        .collect::<Result<Vec<_>, _>>()?;
    let n = grids.len();
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let counts = pairs
        .par_iter()
        .map(|&(i, j)| {
            let c = if early_stop {
                compute_mbl_pair(&grids[i], &grids[j])
            } else {
                count_overlap(&grids[i], &grids[j])
            };
            c.map(|c| ((i, j), c))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ViolationReport::assemble(
        per_object_voxels,
        per_object_oob,
        counts,
    ))
}

/// `vbl_norm(after) - vbl_norm(before)` for a single added object.
pub fn delta_vbl(
    before: &Scene,
    after: &Scene,
    resolver: &dyn MeshResolver,
    cfg: &VoxelConfig,
) -> Result<f64, VoxelError> {
    let is_addition = after.objects.len() == before.objects.len() + 1
        && after.bounds_bottom == before.bounds_bottom
        && after.bounds_top == before.bounds_top
        && before
            .objects
            .iter()
            .zip(&after.objects)
            .all(|(a, b)| a == b);
    if !is_addition {
        return Err(VoxelError::NotSingleAddition);
    }
    check_config(cfg)?;
    let origin = scene_lattice_origin(after, cfg);
    let room = boundary_grid(after, cfg, origin)?;
    let grids = object_grids(after, resolver, cfg, origin)?;
    let full = report_from_grids(&room, &grids, cfg.early_stop)?;
    Ok(full.vbl_norm - full.vbl_norm_without(grids.len() - 1))
}
