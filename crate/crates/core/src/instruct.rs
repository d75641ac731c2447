//! Instruction tuples `(partial scene, prompt, object to add)` drawn from full
//! scenes, the model-input template, and the floor-area to object-count prior.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ssr::{serialize_object, serialize_ssr, Scene, SceneObject};

pub const PROMPTS_PER_OBJECT: usize = 10;
/// Probabilities of the zero-start and full-scene instruction types; the rest is random.
pub const W_ZERO_START: f64 = 0.1;
pub const W_FULL_SCENE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum InstructError {
    #[error("no prompts for asset {0:?}")]
    MissingPromptBankEntry(String),
    #[error("scene has no objects")]
    EmptyScene,
    #[error("bad prompt bank: {0}")]
    BadBank(String),
    #[error("no scenes given")]
    NoScenes,
    #[error("bin count must be positive")]
    BadBins,
    #[error("scene boundary: {0}")]
    Boundary(#[from] crate::boundary::BoundaryError),
}

/// Ten short prompts per asset id.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PromptBank(pub HashMap<String, Vec<String>>);

impl PromptBank {
    pub fn from_json(text: &str) -> Result<Self, InstructError> {
        let map: HashMap<String, Vec<String>> =
            serde_json::from_str(text).map_err(|e| InstructError::BadBank(e.to_string()))?;
        let bank = PromptBank(map);
        bank.check()?;
        Ok(bank)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, InstructError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| InstructError::BadBank(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn check(&self) -> Result<(), InstructError> {
        for (jid, prompts) in &self.0 {
            if prompts.len() != PROMPTS_PER_OBJECT {
                return Err(InstructError::BadBank(format!(
                    "{jid}: {} prompts, expected {PROMPTS_PER_OBJECT}",
                    prompts.len()
                )));
            }
            if prompts.iter().any(|p| p.trim().is_empty()) {
                return Err(InstructError::BadBank(format!("{jid}: empty prompt")));
            }
        }
        Ok(())
    }

    pub fn prompts_for(&self, obj: &SceneObject) -> Result<&[String], InstructError> {
        let jid = obj.jid.as_deref().unwrap_or("");
        self.0
            .get(jid)
            .map(Vec::as_slice)
            .ok_or_else(|| InstructError::MissingPromptBankEntry(jid.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ZType {
    #[serde(rename = "Z0_zero_start")]
    ZeroStart,
    #[serde(rename = "Z1_full_scene")]
    FullScene,
    #[serde(rename = "Z2_random")]
    Random,
}

impl ZType {
    pub fn as_str(self) -> &'static str {
        match self {
            ZType::ZeroStart => "Z0_zero_start",
            ZType::FullScene => "Z1_full_scene",
            ZType::Random => "Z2_random",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instruction {
    pub partial_scene: Scene,
    pub prompt: String,
    pub gt_object: SceneObject,
    pub z_type: ZType,
}

impl Instruction {
    /// One-line JSON with keys `partial_scene, prompt, gt_object, z_type`.
    pub fn to_json_line(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{{\"partial_scene\": {}, \"prompt\": {}, \"gt_object\": {}, \"z_type\": \"{}\"}}",
            serialize_ssr(&self.partial_scene),
            serde_json::Value::String(self.prompt.clone()),
            serialize_object(&self.gt_object),
            self.z_type.as_str()
        );
        s
    }
}

/// Draws one instruction with the caller's generator.
///
/// Order of draws: object permutation, instruction type, drop count (random
/// type only), prompt.
pub fn gen_instruction_with(
    scene: &Scene,
    bank: &PromptBank,
    rng: &mut impl Rng,
) -> Result<Instruction, InstructError> {
    let n = scene.objects.len();
    if n == 0 {
        return Err(InstructError::EmptyScene);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let u: f64 = rng.gen();
    let (z_type, kept) = if u < W_ZERO_START {
        (ZType::ZeroStart, 0)
    } else if u < W_ZERO_START + W_FULL_SCENE {
        (ZType::FullScene, n - 1)
    } else {
        let m = rng.gen_range(0..n);
        (ZType::Random, n - m - 1)
    };
    let gt_object = scene.objects[order[kept]].clone();
    let prompts = bank.prompts_for(&gt_object)?;
    let prompt = prompts
        .choose(rng)
        .expect("bank entries are non-empty")
        .clone();
    let mut partial_scene = scene.clone();
    partial_scene.objects = order[..kept]
        .iter()
        .map(|&i| scene.objects[i].clone())
        .collect();
    Ok(Instruction {
        partial_scene,
        prompt,
        gt_object,
        z_type,
    })
}

/// [`gen_instruction_with`] on a ChaCha8 generator seeded with `seed`.
pub fn gen_instruction(
    scene: &Scene,
    bank: &PromptBank,
    seed: u64,
) -> Result<Instruction, InstructError> {
    gen_instruction_with(scene, bank, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// `<scenegraph>{partial scene SSR}</scenegraph>\n<add>{prompt}</add>`
pub fn render_model_input(instr: &Instruction) -> String {
    format!(
        "<scenegraph>{}</scenegraph>\n<add>{}</add>",
        serialize_ssr(&instr.partial_scene),
        instr.prompt
    )
}

/// Object-count distribution per equal-width floor-area bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountPrior {
    pub min_area: f64,
    pub max_area: f64,
    /// `bins[b]` maps object count to number of scenes.
    pub bins: Vec<BTreeMap<usize, u64>>,
}

impl CountPrior {
    pub fn bin_of(&self, area: f64) -> usize {
        let nb = self.bins.len();
        let width = (self.max_area - self.min_area) / nb as f64;
        if !(width > 0.0) {
            return 0;
        }
        (((area - self.min_area) / width).floor().max(0.0) as usize).min(nb - 1)
    }

    /// Draws a count for a room of `area`, using the nearest non-empty bin.
    pub fn sample_count(&self, area: f64, rng: &mut impl Rng) -> usize {
        let b = self.bin_of(area);
        let hist = (0..self.bins.len())
            .flat_map(|d| [b.checked_sub(d), b.checked_add(d)])
            .flatten()
            .filter_map(|i| self.bins.get(i))
            .find(|h| !h.is_empty())
            .expect("a prior holds at least one scene");
        let total: u64 = hist.values().sum();
        let mut pick = rng.gen_range(0..total);
        for (&count, &freq) in hist {
            if pick < freq {
                return count;
            }
            pick -= freq;
        }
        unreachable!("pick is below the histogram total")
    }
}

pub fn object_count_prior(scenes: &[Scene], bins: usize) -> Result<CountPrior, InstructError> {
    if scenes.is_empty() {
        return Err(InstructError::NoScenes);
    }
    if bins == 0 {
        return Err(InstructError::BadBins);
    }
    let samples = scenes
        .iter()
        .map(|s| Ok((s.floor_polygon()?.area(), s.objects.len())))
        .collect::<Result<Vec<_>, InstructError>>()?;
    let min_area = samples.iter().map(|s| s.0).fold(f64::INFINITY, f64::min);
    let max_area = samples
        .iter()
        .map(|s| s.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let mut prior = CountPrior {
        min_area,
        max_area,
        bins: vec![BTreeMap::new(); bins],
    };
    for (area, count) in samples {
        let b = prior.bin_of(area);
        *prior.bins[b].entry(count).or_insert(0) += 1;
    }
    Ok(prior)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::{Quaternion, Vec3};
    use crate::ssr::RoomType;

    fn scene(n: usize) -> (Scene, PromptBank) {
        let mut bank = PromptBank::default();
        let objects = (0..n)
            .map(|i| {
                let jid = format!("asset-{i}");
                bank.0.insert(
                    jid.clone(),
                    (0..10).map(|k| format!("object {i} prompt {k}")).collect(),
                );
                SceneObject::new(
                    format!("object {i}"),
                    Vec3::new(0.5, 0.5, 0.5),
                    Vec3::new(i as f64 * 0.1, 0.0, 0.0),
                    Quaternion::IDENTITY,
                )
                .with_jid(jid)
            })
            .collect();
        let s = Scene::from_floor(
            RoomType::Bedroom,
            &[[-2.0, -2.0], [-2.0, 2.0], [2.0, 2.0], [2.0, -2.0]],
            2.6,
        )
        .with_objects(objects);
        (s, bank)
    }

    #[test]
    fn single_object_is_forced() {
        let (s, bank) = scene(1);
        for seed in 0..50 {
            let ins = gen_instruction(&s, &bank, seed).unwrap();
            assert!(ins.partial_scene.objects.is_empty());
            assert_eq!(ins.gt_object, s.objects[0]);
        }
    }

    #[test]
    fn reconstruction_and_type_shapes() {
        let (s, bank) = scene(5);
        let key = |o: &SceneObject| o.jid.clone().unwrap();
        for seed in 0..300 {
            let ins = gen_instruction(&s, &bank, seed).unwrap();
            // the partial scene plus the target are distinct objects of the source
            let mut all: Vec<String> = ins.partial_scene.objects.iter().map(key).collect();
            all.push(key(&ins.gt_object));
            all.sort();
            all.dedup();
            assert_eq!(all.len(), ins.partial_scene.objects.len() + 1);
            assert!(all
                .iter()
                .all(|k| s.objects.iter().any(|o| o.jid.as_ref() == Some(k))));
            assert!(bank
                .prompts_for(&ins.gt_object)
                .unwrap()
                .contains(&ins.prompt));
            match ins.z_type {
                ZType::ZeroStart => assert!(ins.partial_scene.objects.is_empty()),
                ZType::FullScene => assert_eq!(ins.partial_scene.objects.len(), 4),
                ZType::Random => {}
            }
        }
    }

    #[test]
    fn missing_bank_entry() {
        let (s, _) = scene(2);
        assert!(matches!(
            gen_instruction(&s, &PromptBank::default(), 0),
            Err(InstructError::MissingPromptBankEntry(_))
        ));
    }

    #[test]
    fn bank_validation() {
        assert!(PromptBank::from_json(r#"{"a": ["x"]}"#).is_err());
        let ten: Vec<String> = (0..10).map(|i| format!("p{i}")).collect();
        let ok = serde_json::json!({ "a": ten }).to_string();
        assert_eq!(PromptBank::from_json(&ok).unwrap().0["a"].len(), 10);
    }

    #[test]
    fn render_template() {
        let (s, bank) = scene(1);
        let ins = gen_instruction(&s, &bank, 3).unwrap();
        let text = render_model_input(&ins);
        assert!(text.contains("\"objects\": []"));
        assert!(text.starts_with("<scenegraph>{\"room_type\": \"bedroom\""));
        assert!(text.ends_with(&format!("</scenegraph>\n<add>{}</add>", ins.prompt)));
        assert_eq!(text, render_model_input(&ins.clone()));
    }

    #[test]
    fn json_line_parses() {
        let (s, bank) = scene(3);
        let line = gen_instruction(&s, &bank, 11).unwrap().to_json_line();
        let v: serde_json::Value = serde_json::from_str(&line).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        assert_eq!(keys, ["partial_scene", "prompt", "gt_object", "z_type"]);
    }

    #[test]
    fn prior_bins() {
        let (small, _) = scene(3);
        let (mut large, _) = scene(6);
        for v in large
            .bounds_top
            .iter_mut()
            .chain(large.bounds_bottom.iter_mut())
        {
            v.x *= 2.0;
        }
        let p = object_count_prior(&[small.clone(), small.clone(), large.clone()], 2).unwrap();
        assert_eq!(p.bins[0], BTreeMap::from([(3, 2)]));
        assert_eq!(p.bins[1], BTreeMap::from([(6, 1)]));
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(p.sample_count(16.0, &mut rng), 3);
        assert_eq!(p.sample_count(32.0, &mut rng), 6);
        let same = object_count_prior(&[small.clone(), small], 4).unwrap();
        assert_eq!(same.bins.iter().filter(|b| !b.is_empty()).count(), 1);
        assert_eq!(same.sample_count(16.0, &mut rng), 3);
    }
}
