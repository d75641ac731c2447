//! Prompt-match score, description similarity, the insertion reward filter,
//! group-relative advantages, Best-of-N selection and removal accuracy.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::commands::{parse_candidate_object, InvalidOutput};
use crate::sampler::{EmbeddingTable, SamplerError};
use crate::ssr::{add_object, serialize_object, Scene, SceneObject};
use crate::voxel::{delta_vbl, MeshResolver, VoxelConfig, VoxelError};

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("prompt has no words")]
    EmptyPrompt,
    #[error("vectors have {0} and {1} components")]
    DimensionMismatch(usize, usize),
    #[error("need at least 2 rewards, got {0}")]
    TooFewSamples(usize),
    #[error("every candidate is invalid")]
    AllInvalid,
    #[error("edited scene contains an object not present before")]
    IllegalEdit,
    #[error(transparent)]
    Voxel(#[from] VoxelError),
    #[error(transparent)]
    Embedding(#[from] SamplerError),
}

const PUNCT: &[char] = &['.', ',', ';', ':', '!', '?', '"', '\'', '(', ')'];

/// Lowercased whitespace tokens with surrounding punctuation stripped.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|t| t.trim_matches(PUNCT).to_lowercase())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Fraction of prompt words that occur as words of `desc`.
pub fn pms(prompt: &str, desc: &str) -> Result<f64, MetricError> {
    let words = tokenize(prompt);
    if words.is_empty() {
        return Err(MetricError::EmptyPrompt);
    }
    let vocab: std::collections::HashSet<String> = tokenize(desc).into_iter().collect();
    let hits = words.iter().filter(|w| vocab.contains(*w)).count();
    Ok(hits as f64 / words.len() as f64)
}

/// Cosine similarity of two unit embeddings.
pub fn dss(a: &[f64], b: &[f64]) -> Result<f64, MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::DimensionMismatch(a.len(), b.len()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub pms_min: f64,
    pub dss_min: f64,
    /// Exclusive bound on the normalized VBL increase caused by the insertion.
    pub vbl_max: f64,
    /// Exclusive bound on the Euclidean size error in meters.
    pub size_l2_max: f64,
    pub invalid_reward: f64,
    pub pass_reward: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            pms_min: 0.85,
            dss_min: 0.9,
            vbl_max: 1e-5,
            size_l2_max: 0.2,
            invalid_reward: -1.0,
            pass_reward: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardStatus {
    InvalidOutput,
    Pass,
    FailFilterMasked,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardComponents {
    pub pms: f64,
    pub dss: f64,
    /// Normalized VBL increase from inserting the candidate.
    pub vbl_norm: f64,
    pub size_l2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardOutcome {
    pub reward: f64,
    pub status: RewardStatus,
    /// True when the sample should not contribute to the loss.
    pub masked: bool,
    pub components: Option<RewardComponents>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub invalid: Option<InvalidOutput>,
}

impl RewardOutcome {
    pub fn is_valid(&self) -> bool {
        self.status != RewardStatus::InvalidOutput
    }
}

/// Everything needed to score a candidate insertion.
pub struct RewardContext<'a> {
    pub scene: &'a Scene,
    pub prompt: &'a str,
    pub gt_object: &'a SceneObject,
    pub embeddings: &'a EmbeddingTable,
    pub meshes: &'a dyn MeshResolver,
    pub cfg: RewardConfig,
    pub vox: VoxelConfig,
}

fn desc_similarity(a: &str, b: &str, table: &EmbeddingTable) -> Result<f64, MetricError> {
    if a == b {
        return Ok(1.0);
    }
    dss(table.get(a)?, table.get(b)?)
}

/// Filter components for an already parsed candidate.
pub fn candidate_components(
    cand: &SceneObject,
    ctx: &RewardContext<'_>,
) -> Result<RewardComponents, MetricError> {
    let after = add_object(ctx.scene, cand.clone());
    Ok(RewardComponents {
        pms: pms(ctx.prompt, &cand.desc)?,
        dss: desc_similarity(&ctx.gt_object.desc, &cand.desc, ctx.embeddings)?,
        vbl_norm: delta_vbl(ctx.scene, &after, ctx.meshes, &ctx.vox)?,
        size_l2: (ctx.gt_object.size - cand.size).norm(),
    })
}

pub fn passes(c: &RewardComponents, cfg: &RewardConfig) -> bool {
    c.pms >= cfg.pms_min
        && c.dss >= cfg.dss_min
        && c.vbl_norm < cfg.vbl_max
        && c.size_l2 < cfg.size_l2_max
}

/// Verifiable reward of one model output: `invalid_reward` if it does not
/// parse as an object, `pass_reward` if every filter passes, otherwise 0 with
/// the mask flag set.
pub fn score_candidate(
    candidate_text: &str,
    ctx: &RewardContext<'_>,
) -> Result<RewardOutcome, MetricError> {
    let cand = match parse_candidate_object(candidate_text) {
        Ok(c) => c,
        Err(e) => {
            return Ok(RewardOutcome {
                reward: ctx.cfg.invalid_reward,
                status: RewardStatus::InvalidOutput,
                masked: false,
                components: None,
                invalid: Some(e),
            })
        }
    };
    let c = candidate_components(&cand, ctx)?;
    let pass = passes(&c, &ctx.cfg);
    Ok(RewardOutcome {
        reward: if pass { ctx.cfg.pass_reward } else { 0.0 },
        status: if pass {
            RewardStatus::Pass
        } else {
            RewardStatus::FailFilterMasked
        },
        masked: !pass,
        components: Some(c),
        invalid: None,
    })
}

/// `(r - mean) / std` with the population standard deviation; all zeros when
/// the rewards are (numerically) constant.
pub fn group_advantage(rewards: &[f64]) -> Result<Vec<f64>, MetricError> {
    if rewards.len() < 2 {
        return Err(MetricError::TooFewSamples(rewards.len()));
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
    if std < 1e-12 {
        return Ok(vec![0.0; rewards.len()]);
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BonCandidate {
    pub valid: bool,
    pub pms: f64,
    pub delta_vbl: f64,
}

impl From<&RewardOutcome> for BonCandidate {
    fn from(o: &RewardOutcome) -> Self {
        match o.components {
            Some(c) if o.is_valid() => BonCandidate {
                valid: true,
                pms: c.pms,
                delta_vbl: c.vbl_norm,
            },
            _ => BonCandidate {
                valid: false,
                pms: 0.0,
                delta_vbl: 0.0,
            },
        }
    }
}

/// Among valid candidates with the highest PMS, the one with the smallest
/// VBL increase; ties go to the lower index.
pub fn best_of_n(cands: &[BonCandidate]) -> Result<usize, MetricError> {
    let best_pms = cands
        .iter()
        .filter(|c| c.valid)
        .map(|c| c.pms)
        .fold(f64::NEG_INFINITY, f64::max);
    cands
        .iter()
        .enumerate()
        .filter(|(_, c)| c.valid && c.pms == best_pms)
        .min_by(|(i, a), (j, b)| a.delta_vbl.total_cmp(&b.delta_vbl).then(i.cmp(j)))
        .map(|(i, _)| i)
        .ok_or(MetricError::AllInvalid)
}

/// Picks the objects of a scene that a removal prompt refers to.
pub trait RemovalMatcher {
    fn matches(&self, scene: &Scene, prompt: &str) -> Result<Vec<usize>, MetricError>;
}

/// The highest-PMS object (lowest index on ties) if its PMS reaches
/// `min_pms`, together with every object sharing its `jid` (or its exact
/// description when it has no jid).
#[derive(Debug, Clone, Copy)]
pub struct JidGroupMatcher {
    pub min_pms: f64,
}

impl Default for JidGroupMatcher {
    fn default() -> Self {
        Self { min_pms: 0.5 }
    }
}

impl RemovalMatcher for JidGroupMatcher {
    fn matches(&self, scene: &Scene, prompt: &str) -> Result<Vec<usize>, MetricError> {
        let mut best: Option<(usize, f64)> = None;
        for (i, o) in scene.objects.iter().enumerate() {
            let s = pms(prompt, &o.desc)?;
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        let Some((k, _)) = best.filter(|b| b.1 >= self.min_pms) else {
            return Ok(Vec::new());
        };
        let anchor = &scene.objects[k];
        Ok(scene
            .objects
            .iter()
            .enumerate()
            .filter(|(_, o)| match &anchor.jid {
                Some(j) => o.jid.as_ref() == Some(j),
                None => o.desc == anchor.desc,
            })
            .map(|(i, _)| i)
            .collect())
    }
}

fn sorted_keys<'a>(objs: impl Iterator<Item = &'a SceneObject>) -> Vec<String> {
    let mut v: Vec<String> = objs.map(serialize_object).collect();
    v.sort();
    v
}

/// True iff exactly the objects matched by `matcher` in `before` are missing
/// from `after` (compared as multisets).
pub fn removal_accuracy(
    before: &Scene,
    after: &Scene,
    prompt: &str,
    matcher: &dyn RemovalMatcher,
) -> Result<bool, MetricError> {
    let mut remaining = sorted_keys(before.objects.iter());
    for key in sorted_keys(after.objects.iter()) {
        match remaining.binary_search(&key) {
            Ok(i) => {
                remaining.remove(i);
            }
            Err(_) => return Err(MetricError::IllegalEdit),
        }
    }
    let matched = matcher.matches(before, prompt)?;
    let expected = sorted_keys(matched.iter().map(|&i| &before.objects[i]));
    Ok(remaining == expected)
}
