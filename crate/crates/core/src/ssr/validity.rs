use serde::{Deserialize, Serialize};

use super::Scene;
use crate::voxel::{compute_vbl, MeshResolver, VoxelConfig, VoxelError};

pub const MIN_BOUNDS: usize = 4;
pub const MIN_OBJECTS: usize = 3;
pub const MAX_OBJECTS: usize = 50;
/// Upper bound (exclusive) on normalized VBL for a usable scene.
pub const MAX_VBL_NORM: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityReason {
    Ok,
    BadBounds,
    ObjectCount,
    VblExceeded,
    Rescued,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneValidity {
    pub is_valid: bool,
    pub reason: ValidityReason,
    pub rescued_index: Option<usize>,
    /// Normalized VBL of the scene as given, when it was computed.
    pub vbl_norm: Option<f64>,
}

impl SceneValidity {
    fn rejected(reason: ValidityReason, vbl_norm: Option<f64>) -> Self {
        Self {
            is_valid: false,
            reason,
            rescued_index: None,
            vbl_norm,
        }
    }
}

/// Dataset filter: boundary size, object count and normalized VBL. A scene
/// over the VBL limit is kept if dropping a single object brings it under;
/// the lowest such index is reported.
pub fn validate_scene(
    scene: &Scene,
    meshes: &dyn MeshResolver,
    cfg: &VoxelConfig,
) -> Result<SceneValidity, VoxelError> {
    if scene.check_bounds().is_err() || scene.floor_polygon().is_err() {
        return Ok(SceneValidity::rejected(ValidityReason::BadBounds, None));
    }
    let n = scene.objects.len();
    if !(MIN_OBJECTS..=MAX_OBJECTS).contains(&n) {
        return Ok(SceneValidity::rejected(ValidityReason::ObjectCount, None));
    }
    let report = compute_vbl(scene, meshes, cfg)?;
    if report.vbl_norm < MAX_VBL_NORM {
        return Ok(SceneValidity {
            is_valid: true,
            reason: ValidityReason::Ok,
            rescued_index: None,
            vbl_norm: Some(report.vbl_norm),
        });
    }
    // the reduced scene must still satisfy the object-count bound
    if n > MIN_OBJECTS {
        if let Some(k) = (0..n).find(|&k| report.vbl_norm_without(k) < MAX_VBL_NORM) {
            return Ok(SceneValidity {
                is_valid: true,
                reason: ValidityReason::Rescued,
                rescued_index: Some(k),
                vbl_norm: Some(report.vbl_norm),
            });
        }
    }
    Ok(SceneValidity::rejected(
        ValidityReason::VblExceeded,
        Some(report.vbl_norm),
    ))
}
