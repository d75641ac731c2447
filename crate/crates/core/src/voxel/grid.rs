use serde::{Deserialize, Serialize};

use crate::math::Vec3;

/// Voxelization parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoxelConfig {
    /// Voxel edge length in meters.
    pub voxel_size: f64,
    /// Empty voxels added around the boundary's bounding box when anchoring the lattice.
    pub padding: i64,
    /// Skip the 3D overlap count for object pairs whose floor footprints are disjoint.
    pub early_stop: bool,
}

impl Default for VoxelConfig {
    fn default() -> Self {
        Self {
            voxel_size: 0.05,
            padding: 2,
            early_stop: true,
        }
    }
}

impl VoxelConfig {
    pub fn with_voxel_size(voxel_size: f64) -> Self {
        Self {
            voxel_size,
            ..Self::default()
        }
    }
}

/// Binary occupancy over a box of cells of a global lattice.
///
/// Cell `(i, j, k)` (absolute lattice index) spans
/// `origin + [i, i+1) * voxel_size` per axis. A grid stores only the box
/// `offset .. offset + dims`; cells outside it are empty.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    pub(crate) origin: Vec3,
    pub(crate) voxel_size: f64,
    pub(crate) offset: [i64; 3],
    pub(crate) dims: [usize; 3],
    pub(crate) bits: Vec<u64>,
    pub(crate) surface_only: bool,
}

impl VoxelGrid {
    pub(crate) fn empty(origin: Vec3, voxel_size: f64, offset: [i64; 3], dims: [usize; 3]) -> Self {
        let n = dims[0] * dims[1] * dims[2];
        Self {
            origin,
            voxel_size,
            offset,
            dims,
            bits: vec![0; n.div_ceil(64)],
            surface_only: false,
        }
    }

    /// Lattice anchor shared by every grid of a scene.
    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    /// Absolute lattice index of the stored box's minimum cell.
    pub fn offset(&self) -> [i64; 3] {
        self.offset
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Set when the mesh was not watertight and interior fill was skipped.
    pub fn is_surface_only(&self) -> bool {
        self.surface_only
    }

    pub fn same_lattice(&self, other: &VoxelGrid) -> bool {
        self.origin == other.origin && self.voxel_size == other.voxel_size
    }

    #[inline]
    fn local_index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims[1] + j) * self.dims[0] + i
    }

    #[inline]
    pub(crate) fn set_local(&mut self, i: usize, j: usize, k: usize) {
        let n = self.local_index(i, j, k);
        self.bits[n / 64] |= 1 << (n % 64);
    }

    #[inline]
    pub(crate) fn get_local(&self, i: usize, j: usize, k: usize) -> bool {
        let n = self.local_index(i, j, k);
        self.bits[n / 64] >> (n % 64) & 1 == 1
    }

    /// Occupancy of an absolute lattice cell.
    #[inline]
    pub fn get(&self, idx: [i64; 3]) -> bool {
        let mut local = [0usize; 3];
        for a in 0..3 {
            let d = idx[a] - self.offset[a];
            if d < 0 || d as usize >= self.dims[a] {
                return false;
            }
            local[a] = d as usize;
        }
        self.get_local(local[0], local[1], local[2])
    }

    pub fn count(&self) -> u64 {
        self.bits.iter().map(|w| w.count_ones() as u64).sum()
    }

    /// Absolute indices of occupied cells, x fastest.
    pub fn iter_occupied(&self) -> impl Iterator<Item = [i64; 3]> + '_ {
        let [nx, ny, nz] = self.dims;
        (0..nz).flat_map(move |k| {
            (0..ny).flat_map(move |j| {
                (0..nx)
                    .filter(move |&i| self.get_local(i, j, k))
                    .map(move |i| {
                        [
                            self.offset[0] + i as i64,
                            self.offset[1] + j as i64,
                            self.offset[2] + k as i64,
                        ]
                    })
            })
        })
    }

    /// Exclusive upper corner of the stored box.
    pub fn end(&self) -> [i64; 3] {
        [
            self.offset[0] + self.dims[0] as i64,
            self.offset[1] + self.dims[1] as i64,
            self.offset[2] + self.dims[2] as i64,
        ]
    }

    /// Columns `(x, z)` containing at least one occupied cell.
    pub fn footprint(&self) -> Footprint {
        let [nx, ny, nz] = self.dims;
        let mut cols = vec![false; nx * nz];
        for k in 0..nz {
            for j in 0..ny {
                for i in 0..nx {
                    if self.get_local(i, j, k) {
                        cols[k * nx + i] = true;
                    }
                }
            }
        }
        Footprint {
            offset: [self.offset[0], self.offset[2]],
            dims: [nx, nz],
            cols,
        }
    }
}

/// Horizontal projection of a grid's occupied cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    offset: [i64; 2],
    dims: [usize; 2],
    cols: Vec<bool>,
}

impl Footprint {
    fn get(&self, x: i64, z: i64) -> bool {
        let (dx, dz) = (x - self.offset[0], z - self.offset[1]);
        if dx < 0 || dz < 0 || dx as usize >= self.dims[0] || dz as usize >= self.dims[1] {
            return false;
        }
        self.cols[dz as usize * self.dims[0] + dx as usize]
    }

    /// True when some column is occupied in both projections.
    pub fn intersects(&self, other: &Footprint) -> bool {
        let x0 = self.offset[0].max(other.offset[0]);
        let z0 = self.offset[1].max(other.offset[1]);
        let x1 = (self.offset[0] + self.dims[0] as i64).min(other.offset[0] + other.dims[0] as i64);
        let z1 = (self.offset[1] + self.dims[1] as i64).min(other.offset[1] + other.dims[1] as i64);
        (z0..z1).any(|z| (x0..x1).any(|x| self.get(x, z) && other.get(x, z)))
    }
}
