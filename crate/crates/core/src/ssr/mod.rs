//! Structured scene representation (SSR): a room type, paired floor/ceiling
//! boundary rings, and a flat list of objects described in natural language.
//!
//! On disk an SSR document is JSON:
//!
//! ```json
//! {"room_type": "bedroom",
//!  "bounds_top": [[-1.55, 2.6, 1.9], ...], "bounds_bottom": [[-1.55, 0.0, 1.9], ...],
//!  "objects": [{"desc": "...", "size": [1.77, 0.99, 1.94], "pos": [0.44, 0.0, -0.44],
//!               "rot": [0.0, 0.70711, 0.0, -0.70711], "jid": "..."}]}
//! ```
//!
//! `rot` is a quaternion stored **scalar-last**, `[x, y, z, w]`. `pos` is the
//! bottom-center of the object's box; rotation is about the vertical axis
//! through `pos`.

mod json;
mod transform;
mod validity;

use std::fmt;

use serde_json::{Map, Value};

use crate::boundary::{BoundaryError, RectilinearPolygon, AXIS_TOL};
use crate::math::{Quaternion, Vec3};

pub(crate) use json::object_from_value;
pub use json::{parse_ssr, serialize_object, serialize_ssr, ParseError};
pub use transform::{
    add_object, apply_augment, augment, remove_objects, sample_augment_params, translate_to_origin,
    AugmentParams, EditError, JITTER,
};
pub use validity::{
    validate_scene, SceneValidity, ValidityReason, MAX_OBJECTS, MAX_VBL_NORM, MIN_BOUNDS,
    MIN_OBJECTS,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum RoomType {
    Bedroom,
    Livingroom,
    Other,
}

impl RoomType {
    pub fn as_str(self) -> &'static str {
        match self {
            RoomType::Bedroom => "bedroom",
            RoomType::Livingroom => "livingroom",
            RoomType::Other => "other",
        }
    }

    /// Unknown strings map to [`RoomType::Other`].
    pub fn parse_lenient(s: &str) -> (Self, bool) {
        match s {
            "bedroom" => (RoomType::Bedroom, true),
            "livingroom" => (RoomType::Livingroom, true),
            "other" => (RoomType::Other, true),
            _ => (RoomType::Other, false),
        }
    }
}

impl fmt::Display for RoomType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneObject {
    pub desc: String,
    /// Box extents in the object's local frame, meters.
    pub size: Vec3,
    pub pos: Vec3,
    pub rot: Quaternion,
    pub jid: Option<String>,
    pub sampled_asset_jid: Option<String>,
    pub sampled_asset_desc: Option<String>,
    pub sampled_asset_size: Option<Vec3>,
    pub uuid: Option<String>,
    /// Keys not part of the schema, kept for round-tripping.
    pub extra: Map<String, Value>,
}

impl SceneObject {
    pub fn new(desc: impl Into<String>, size: Vec3, pos: Vec3, rot: Quaternion) -> Self {
        Self {
            desc: desc.into(),
            size,
            pos,
            rot,
            jid: None,
            sampled_asset_jid: None,
            sampled_asset_desc: None,
            sampled_asset_size: None,
            uuid: None,
            extra: Map::new(),
        }
    }

    pub fn with_jid(mut self, jid: impl Into<String>) -> Self {
        self.jid = Some(jid.into());
        self
    }

    pub fn check(&self) -> Result<(), String> {
        if self.desc.trim().is_empty() {
            return Err("desc is empty".into());
        }
        if !(self.size.is_finite() && self.pos.is_finite() && self.rot.is_finite()) {
            return Err("non-finite number".into());
        }
        if self.size.x <= 0.0 || self.size.y <= 0.0 || self.size.z <= 0.0 {
            return Err(format!(
                "size must be positive, got {:?}",
                self.size.to_array()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub room_type: RoomType,
    pub bounds_top: Vec<Vec3>,
    pub bounds_bottom: Vec<Vec3>,
    pub objects: Vec<SceneObject>,
    pub extra: Map<String, Value>,
}

impl Scene {
    /// Scene with floor corners `(x, z)` at `y = 0` and ceiling at `height`.
    pub fn from_floor(room_type: RoomType, corners: &[[f64; 2]], height: f64) -> Self {
        Self {
            room_type,
            bounds_top: corners
                .iter()
                .map(|c| Vec3::new(c[0], height, c[1]))
                .collect(),
            bounds_bottom: corners.iter().map(|c| Vec3::new(c[0], 0.0, c[1])).collect(),
            objects: Vec::new(),
            extra: Map::new(),
        }
    }

    pub fn with_objects(mut self, objects: Vec<SceneObject>) -> Self {
        self.objects = objects;
        self
    }

    /// Checks ring pairing, planarity and rectilinearity of the bounds.
    pub fn check_bounds(&self) -> Result<(), String> {
        let (top, bottom) = (&self.bounds_top, &self.bounds_bottom);
        if top.len() != bottom.len() {
            return Err(format!(
                "bounds_top has {} points, bounds_bottom {}",
                top.len(),
                bottom.len()
            ));
        }
        if bottom.len() < MIN_BOUNDS {
            return Err(format!(
                "{} boundary points, need at least {MIN_BOUNDS}",
                bottom.len()
            ));
        }
        if top.iter().chain(bottom).any(|v| !v.is_finite()) {
            return Err("non-finite boundary coordinate".into());
        }
        let (yb, yt) = (bottom[0].y, top[0].y);
        for (i, (t, b)) in top.iter().zip(bottom).enumerate() {
            if (t.x - b.x).abs() > AXIS_TOL || (t.z - b.z).abs() > AXIS_TOL {
                return Err(format!(
                    "bounds_top[{i}] and bounds_bottom[{i}] differ in x/z"
                ));
            }
            if (b.y - yb).abs() > AXIS_TOL || (t.y - yt).abs() > AXIS_TOL {
                return Err(format!("boundary ring {i} is not planar"));
            }
        }
        if yt - yb <= AXIS_TOL {
            return Err("ceiling must be above floor".into());
        }
        let n = bottom.len();
        for i in 0..n {
            let (a, b) = (bottom[i], bottom[(i + 1) % n]);
            if (a.x - b.x).abs() > AXIS_TOL && (a.z - b.z).abs() > AXIS_TOL {
                return Err(format!("boundary edge {i} is not axis-aligned"));
            }
        }
        Ok(())
    }

    pub fn floor_y(&self) -> f64 {
        self.bounds_bottom.first().map_or(0.0, |v| v.y)
    }

    pub fn ceiling_y(&self) -> f64 {
        self.bounds_top.first().map_or(0.0, |v| v.y)
    }

    /// The floor outline as a corner polygon (collinear boundary points merged).
    pub fn floor_polygon(&self) -> Result<RectilinearPolygon, BoundaryError> {
        let ring: Vec<[f64; 2]> = self.bounds_bottom.iter().map(|v| [v.x, v.z]).collect();
        RectilinearPolygon::from_ring(&ring, self.floor_y(), self.ceiling_y())
    }
}
