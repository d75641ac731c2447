use std::fmt::Write as _;

use serde_json::{Map, Value};
use thiserror::Error;

use super::{RoomType, Scene, SceneObject};
use crate::math::{Quaternion, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("missing key {0}")]
    MissingKey(String),
    #[error("bad type at {0}")]
    BadType(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

/// Quaternions whose norm is further than this from 1 are renormalized on load.
const RENORM_EPS: f64 = 1e-12;
/// Beyond this deviation a renormalization is logged as suspicious.
const RENORM_WARN: f64 = 1e-3;

const SCENE_KEYS: [&str; 4] = ["room_type", "bounds_top", "bounds_bottom", "objects"];
const OBJECT_KEYS: [&str; 9] = [
    "desc",
    "size",
    "pos",
    "rot",
    "jid",
    "sampled_asset_jid",
    "sampled_asset_desc",
    "sampled_asset_size",
    "uuid",
];

pub fn parse_ssr(text: &str) -> Result<Scene, ParseError> {
    let doc: Value =
        serde_json::from_str(text).map_err(|e| ParseError::Malformed(e.to_string()))?;
    scene_from_value(&doc)
}

pub(crate) fn scene_from_value(doc: &Value) -> Result<Scene, ParseError> {
    let obj = doc
        .as_object()
        .ok_or_else(|| ParseError::BadType("$".into()))?;
    let room = get(obj, "room_type", "")?
        .as_str()
        .ok_or_else(|| ParseError::BadType("room_type".into()))?;
    let (room_type, known) = RoomType::parse_lenient(room);
    if !known {
        log::warn!("unknown room_type {room:?}, treating as \"other\"");
    }
    let bounds_top = point_list(get(obj, "bounds_top", "")?, "bounds_top")?;
    let bounds_bottom = point_list(get(obj, "bounds_bottom", "")?, "bounds_bottom")?;
    let objects = get(obj, "objects", "")?
        .as_array()
        .ok_or_else(|| ParseError::BadType("objects".into()))?
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let path = format!("objects[{i}]");
            let o = object_from_value(v, &path)?;
            o.check()
                .map_err(|m| ParseError::InvariantViolation(format!("{path}: {m}")))?;
            Ok(o)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let extra = extras(obj, &SCENE_KEYS);
    let scene = Scene {
        room_type,
        bounds_top,
        bounds_bottom,
        objects,
        extra,
    };
    scene
        .check_bounds()
        .map_err(ParseError::InvariantViolation)?;
    Ok(scene)
}

/// Reads one object dictionary. Extra keys are kept in `extra`; object
/// invariants (positive size, non-empty desc) are left to the caller.
pub(crate) fn object_from_value(v: &Value, path: &str) -> Result<SceneObject, ParseError> {
    let obj = v
        .as_object()
        .ok_or_else(|| ParseError::BadType(path.to_string()))?;
    let desc = get(obj, "desc", path)?
        .as_str()
        .ok_or_else(|| ParseError::BadType(format!("{path}.desc")))?
        .to_string();
    let size = vec3(get(obj, "size", path)?, &format!("{path}.size"))?;
    let pos = vec3(get(obj, "pos", path)?, &format!("{path}.pos"))?;
    let rot_path = format!("{path}.rot");
    let rot_raw = numbers::<4>(get(obj, "rot", path)?, &rot_path)?;
    let rot = normalize_rot(Quaternion::from_xyzw(rot_raw), &rot_path)?;
    let opt_str = |k: &str| -> Result<Option<String>, ParseError> {
        match obj.get(k) {
            None | Some(Value::Null) => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(ParseError::BadType(format!("{path}.{k}"))),
        }
    };
    let sampled_asset_size = match obj.get("sampled_asset_size") {
        None | Some(Value::Null) => None,
        Some(v) => Some(vec3(v, &format!("{path}.sampled_asset_size"))?),
    };
    Ok(SceneObject {
        desc,
        size,
        pos,
        rot,
        jid: opt_str("jid")?,
        sampled_asset_jid: opt_str("sampled_asset_jid")?,
        sampled_asset_desc: opt_str("sampled_asset_desc")?,
        sampled_asset_size,
        uuid: opt_str("uuid")?,
        extra: extras(obj, &OBJECT_KEYS),
    })
}

fn normalize_rot(q: Quaternion, path: &str) -> Result<Quaternion, ParseError> {
    let n = q.norm();
    if !(n > 0.0) {
        return Err(ParseError::InvariantViolation(format!(
            "{path}: zero quaternion"
        )));
    }
    if (n - 1.0).abs() <= RENORM_EPS {
        return Ok(q);
    }
    if (n - 1.0).abs() > RENORM_WARN {
        log::warn!("{path}: quaternion norm {n} renormalized");
    }
    Ok(q.normalized())
}

fn get<'a>(obj: &'a Map<String, Value>, key: &str, path: &str) -> Result<&'a Value, ParseError> {
    obj.get(key).ok_or_else(|| {
        ParseError::MissingKey(if path.is_empty() {
            key.to_string()
        } else {
            format!("{path}.{key}")
        })
    })
}

fn extras(obj: &Map<String, Value>, known: &[&str]) -> Map<String, Value> {
    obj.iter()
        .filter(|(k, _)| !known.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect()
}

fn numbers<const N: usize>(v: &Value, path: &str) -> Result<[f64; N], ParseError> {
    let arr = v
        .as_array()
        .ok_or_else(|| ParseError::BadType(path.to_string()))?;
    if arr.len() != N {
        return Err(ParseError::BadType(format!(
            "{path} (expected {N} numbers, got {})",
            arr.len()
        )));
    }
    let mut out = [0.0; N];
    for (i, (slot, x)) in out.iter_mut().zip(arr).enumerate() {
        *slot = x
            .as_f64()
            .ok_or_else(|| ParseError::BadType(format!("{path}[{i}]")))?;
        if !slot.is_finite() {
            return Err(ParseError::InvariantViolation(format!(
                "{path}[{i}] is not finite"
            )));
        }
    }
    Ok(out)
}

fn vec3(v: &Value, path: &str) -> Result<Vec3, ParseError> {
    numbers::<3>(v, path).map(Vec3::from_array)
}

fn point_list(v: &Value, path: &str) -> Result<Vec<Vec3>, ParseError> {
    v.as_array()
        .ok_or_else(|| ParseError::BadType(path.to_string()))?
        .iter()
        .enumerate()
        .map(|(i, p)| vec3(p, &format!("{path}[{i}]")))
        .collect()
}

/// Serializes a scene on a single line with `", "` / `": "` separators.
///
/// Key order is `room_type, bounds_top, bounds_bottom, objects`, then any extra
/// keys in their original order. Numbers use the shortest representation that
/// parses back to the same `f64`.
pub fn serialize_ssr(scene: &Scene) -> String {
    let mut s = String::with_capacity(256 + 256 * scene.objects.len());
    s.push('{');
    write_key(&mut s, "room_type");
    write_str(&mut s, scene.room_type.as_str());
    s.push_str(", ");
    write_key(&mut s, "bounds_top");
    write_points(&mut s, &scene.bounds_top);
    s.push_str(", ");
    write_key(&mut s, "bounds_bottom");
    write_points(&mut s, &scene.bounds_bottom);
    s.push_str(", ");
    write_key(&mut s, "objects");
    s.push('[');
    for (i, o) in scene.objects.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        write_object(&mut s, o);
    }
    s.push(']');
    write_extras(&mut s, &scene.extra);
    s.push('}');
    s
}

/// One object as a JSON dictionary in the same style as [`serialize_ssr`].
pub fn serialize_object(o: &SceneObject) -> String {
    let mut s = String::new();
    write_object(&mut s, o);
    s
}

fn write_object(s: &mut String, o: &SceneObject) {
    s.push('{');
    write_key(s, "desc");
    write_str(s, &o.desc);
    s.push_str(", ");
    write_key(s, "size");
    write_nums(s, &o.size.to_array());
    s.push_str(", ");
    write_key(s, "pos");
    write_nums(s, &o.pos.to_array());
    s.push_str(", ");
    write_key(s, "rot");
    write_nums(s, &o.rot.to_xyzw());
    let strings = [
        ("jid", &o.jid),
        ("sampled_asset_jid", &o.sampled_asset_jid),
        ("sampled_asset_desc", &o.sampled_asset_desc),
    ];
    for (k, v) in strings {
        if let Some(v) = v {
            s.push_str(", ");
            write_key(s, k);
            write_str(s, v);
        }
    }
    if let Some(size) = o.sampled_asset_size {
        s.push_str(", ");
        write_key(s, "sampled_asset_size");
        write_nums(s, &size.to_array());
    }
    if let Some(uuid) = &o.uuid {
        s.push_str(", ");
        write_key(s, "uuid");
        write_str(s, uuid);
    }
    write_extras(s, &o.extra);
    s.push('}');
}

fn write_extras(s: &mut String, extra: &Map<String, Value>) {
    for (k, v) in extra {
        s.push_str(", ");
        write_key(s, k);
        write_value(s, v);
    }
}

fn write_key(s: &mut String, k: &str) {
    write_str(s, k);
    s.push_str(": ");
}

fn write_str(s: &mut String, v: &str) {
    // serde_json escaping of a plain string cannot fail
    s.push_str(&serde_json::to_string(v).expect("string serialization"));
}

pub(crate) fn fmt_num(x: f64) -> String {
    // Debug prints the shortest round-trip form and keeps a trailing ".0"
    format!("{:?}", x)
}

fn write_nums(s: &mut String, xs: &[f64]) {
    s.push('[');
    for (i, x) in xs.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        s.push_str(&fmt_num(*x));
    }
    s.push(']');
}

fn write_points(s: &mut String, pts: &[Vec3]) {
    s.push('[');
    for (i, p) in pts.iter().enumerate() {
        if i > 0 {
            s.push_str(", ");
        }
        write_nums(s, &p.to_array());
    }
    s.push(']');
}

fn write_value(s: &mut String, v: &Value) {
    match v {
        Value::Array(a) => {
            s.push('[');
            for (i, x) in a.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                write_value(s, x);
            }
            s.push(']');
        }
        Value::Object(m) => {
            s.push('{');
            for (i, (k, x)) in m.iter().enumerate() {
                if i > 0 {
                    s.push_str(", ");
                }
                write_key(s, k);
                write_value(s, x);
            }
            s.push('}');
        }
        Value::String(x) => write_str(s, x),
        other => {
            let _ = write!(s, "{other}");
        }
    }
}
