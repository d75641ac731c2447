use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::{Scene, SceneObject};
use crate::boundary::BoundaryError;
use crate::math::{Quaternion, Vec3};

/// Half-width of the uniform jitter applied to object x/z position and size.
pub const JITTER: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EditError {
    #[error("object index {index} out of range for {len} objects")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("object index {0} listed twice")]
    DuplicateIndex(usize),
}

pub fn add_object(scene: &Scene, obj: SceneObject) -> Scene {
    let mut out = scene.clone();
    out.objects.push(obj);
    out
}

/// Removes the listed objects; survivors keep their relative order.
pub fn remove_objects(scene: &Scene, indices: &[usize]) -> Result<Scene, EditError> {
    let len = scene.objects.len();
    let mut drop = vec![false; len];
    for &index in indices {
        if index >= len {
            return Err(EditError::IndexOutOfRange { index, len });
        }
        if std::mem::replace(&mut drop[index], true) {
            return Err(EditError::DuplicateIndex(index));
        }
    }
    let mut out = scene.clone();
    out.objects = scene
        .objects
        .iter()
        .zip(&drop)
        .filter(|(_, &d)| !d)
        .map(|(o, _)| o.clone())
        .collect();
    Ok(out)
}

fn clean_zero(v: f64) -> f64 {
    // folds -0.0 into 0.0
    v + 0.0
}

/// Moves the floor centroid to `(0, ·, 0)` and the floor plane to `y = 0`.
pub fn translate_to_origin(scene: &Scene) -> Result<Scene, BoundaryError> {
    let [cx, cz] = scene.floor_polygon()?.centroid();
    let snap = |v: f64| if v.abs() < 1e-12 { 0.0 } else { v };
    let offset = Vec3::new(snap(cx), snap(scene.floor_y()), snap(cz));
    if offset == Vec3::ZERO {
        return Ok(scene.clone());
    }
    let shift = |v: &Vec3| {
        let d = *v - offset;
        Vec3::new(clean_zero(d.x), clean_zero(d.y), clean_zero(d.z))
    };
    let mut out = scene.clone();
    out.bounds_top = scene.bounds_top.iter().map(shift).collect();
    out.bounds_bottom = scene.bounds_bottom.iter().map(shift).collect();
    for o in &mut out.objects {
        o.pos = shift(&o.pos);
    }
    Ok(out)
}

/// One draw of the augmentation transforms.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentParams {
    /// Yaw in multiples of 90 degrees (right-handed about +y).
    pub quarter_turns: u8,
    /// Left rotation applied to both boundary rings.
    pub shift: usize,
    /// Per object: deltas for `[pos.x, pos.z, size.x, size.z]`.
    pub deltas: Vec<[f64; 4]>,
}

impl AugmentParams {
    pub fn identity(n_objects: usize) -> Self {
        Self {
            quarter_turns: 0,
            shift: 0,
            deltas: vec![[0.0; 4]; n_objects],
        }
    }
}

/// Draws rotation, ring shift and per-object jitter, in that order.
pub fn sample_augment_params(scene: &Scene, rng: &mut impl Rng) -> AugmentParams {
    let quarter_turns = rng.gen_range(0..4u8);
    let shift = rng.gen_range(0..scene.bounds_bottom.len().max(1));
    let deltas = scene
        .objects
        .iter()
        .map(|_| std::array::from_fn(|_| rng.gen_range(-JITTER..JITTER)))
        .collect();
    AugmentParams {
        quarter_turns,
        shift,
        deltas,
    }
}

fn yaw_point(v: Vec3, turns: u8) -> Vec3 {
    let (x, z) = match turns % 4 {
        0 => (v.x, v.z),
        1 => (v.z, -v.x),
        2 => (-v.x, -v.z),
        _ => (-v.z, v.x),
    };
    Vec3::new(clean_zero(x), v.y, clean_zero(z))
}

/// Applies `params`: yaw about the origin, cyclic ring shift, then jitter.
pub fn apply_augment(scene: &Scene, params: &AugmentParams) -> Scene {
    let turns = params.quarter_turns % 4;
    let mut out = scene.clone();
    if turns != 0 {
        let q = Quaternion::from_quarter_turns(turns);
        for v in out
            .bounds_top
            .iter_mut()
            .chain(out.bounds_bottom.iter_mut())
        {
            *v = yaw_point(*v, turns);
        }
        for o in &mut out.objects {
            o.pos = yaw_point(o.pos, turns);
            o.rot = q.compose(o.rot);
        }
    }
    let n = out.bounds_bottom.len();
    if n > 0 && !params.shift.is_multiple_of(n) {
        out.bounds_top.rotate_left(params.shift % n);
        out.bounds_bottom.rotate_left(params.shift % n);
    }
    for (o, d) in out.objects.iter_mut().zip(&params.deltas) {
        o.pos.x += d[0];
        o.pos.z += d[1];
        // a jittered extent must stay positive
        if o.size.x + d[2] > 0.0 {
            o.size.x += d[2];
        }
        if o.size.z + d[3] > 0.0 {
            o.size.z += d[3];
        }
    }
    out
}

/// Random augmentation seeded with ChaCha8.
pub fn augment(scene: &Scene, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = sample_augment_params(scene, &mut rng);
    apply_augment(scene, &params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ssr::{serialize_ssr, RoomType};

    fn scene() -> Scene {
        Scene::from_floor(
            RoomType::Bedroom,
            &[[-2.0, -1.0], [-2.0, 1.0], [2.0, 1.0], [2.0, -1.0]],
            2.6,
        )
        .with_objects(vec![
            SceneObject::new(
                "bed",
                Vec3::new(1.6, 0.5, 2.0),
                Vec3::new(1.0, 0.0, 2.0),
                Quaternion::IDENTITY,
            ),
            SceneObject::new(
                "lamp",
                Vec3::new(0.3, 1.5, 0.3),
                Vec3::new(-1.0, 0.0, 0.5),
                Quaternion::from_yaw(0.4),
            ),
            SceneObject::new(
                "rug",
                Vec3::new(2.0, 0.01, 1.0),
                Vec3::new(0.0, 0.0, 0.0),
                Quaternion::IDENTITY,
            ),
            SceneObject::new(
                "desk",
                Vec3::new(1.2, 0.75, 0.6),
                Vec3::new(-1.4, 0.0, -0.7),
                Quaternion::IDENTITY,
            ),
        ])
    }

    #[test]
    fn remove_and_add() {
        let s = scene();
        assert_eq!(remove_objects(&s, &[]).unwrap(), s);
        let r = remove_objects(&s, &[0, 2]).unwrap();
        assert_eq!(
            r.objects
                .iter()
                .map(|o| o.desc.as_str())
                .collect::<Vec<_>>(),
            ["lamp", "desk"]
        );
        let extra = SceneObject::new(
            "chair",
            Vec3::new(0.5, 0.9, 0.5),
            Vec3::ZERO,
            Quaternion::IDENTITY,
        );
        let added = add_object(&s, extra);
        assert_eq!(remove_objects(&added, &[4]).unwrap(), s);
        assert_eq!(
            remove_objects(&s, &[4]),
            Err(EditError::IndexOutOfRange { index: 4, len: 4 })
        );
        assert_eq!(
            remove_objects(&s, &[1, 1]),
            Err(EditError::DuplicateIndex(1))
        );
    }

    #[test]
    fn identity_augment_is_bitwise_identity() {
        let s = scene();
        let out = apply_augment(&s, &AugmentParams::identity(s.objects.len()));
        assert_eq!(serialize_ssr(&out), serialize_ssr(&s));
    }

    #[test]
    fn half_turn_twice_restores() {
        let s = scene();
        let p = AugmentParams {
            quarter_turns: 2,
            ..AugmentParams::identity(4)
        };
        let back = apply_augment(&apply_augment(&s, &p), &p);
        for (a, b) in back.objects.iter().zip(&s.objects) {
            assert!((a.pos - b.pos).norm() < 1e-9);
            assert!(a.rot.same_rotation(b.rot, 1e-9));
        }
        assert_eq!(back.bounds_bottom, s.bounds_bottom);
    }

    #[test]
    fn quarter_turn_moves_position() {
        let s = scene();
        let p = AugmentParams {
            quarter_turns: 1,
            ..AugmentParams::identity(4)
        };
        let out = apply_augment(&s, &p);
        assert_eq!(out.objects[0].pos, Vec3::new(2.0, 0.0, -1.0));
        // orientation follows the room: rotating the object frame matches rotating points
        let local = Vec3::new(0.3, 0.0, 0.1);
        let before = s.objects[1].rot.rotate(local) + s.objects[1].pos;
        let after = out.objects[1].rot.rotate(local) + out.objects[1].pos;
        assert!((after - yaw_point(before, 1)).norm() < 1e-12);
    }

    #[test]
    fn translate_moves_centroid() {
        let s = scene();
        assert_eq!(translate_to_origin(&s).unwrap(), s);
        let mut off = s.clone();
        let d = Vec3::new(5.0, 0.0, 3.0);
        for v in off
            .bounds_top
            .iter_mut()
            .chain(off.bounds_bottom.iter_mut())
        {
            *v = *v + d;
        }
        for o in &mut off.objects {
            o.pos = o.pos + d;
        }
        let back = translate_to_origin(&off).unwrap();
        for (a, b) in back.objects.iter().zip(&s.objects) {
            assert!((a.pos - b.pos).norm() < 1e-12);
        }
    }

    #[test]
    fn seeded_augment_is_deterministic_and_bounded() {
        let s = scene();
        assert_eq!(augment(&s, 7), augment(&s, 7));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = sample_augment_params(&s, &mut rng);
        assert!(p.deltas.iter().flatten().all(|d| d.abs() <= JITTER));
        assert!(p.shift < 4 && p.quarter_turns < 4);
    }
}
