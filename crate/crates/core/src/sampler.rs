//! Asset retrieval: score catalog entries by a blend of embedding similarity and
//! size similarity, then pick greedily or sample from a tempered, truncated
//! distribution.

use std::collections::HashMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math::Vec3;

/// Embeddings must be unit length within this tolerance.
pub const NORM_TOL: f64 = 1e-6;
/// Larger deviations than [`NORM_TOL`] up to this are renormalized with a warning.
pub const RENORM_TOL: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {msg}")]
    BadFormat { line: usize, msg: String },
    #[error("line {line}: embedding norm {norm} is not 1")]
    BadNorm { line: usize, norm: f64 },
    #[error("line {line}: embedding has {found} components, expected {expected}")]
    InconsistentDimension {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("vector has {found} components, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("no embedding for {0:?}")]
    MissingEmbedding(String),
    #[error("nothing to choose from")]
    Empty,
    #[error("bad sampler config: {0}")]
    BadConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssetEntry {
    pub jid: String,
    pub desc: String,
    pub embedding: Vec<f64>,
    /// Native bounding-box extents.
    pub size: Vec3,
    pub mesh_path: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Catalog {
    pub dim: usize,
    pub entries: Vec<AssetEntry>,
}

impl Catalog {
    pub fn get(&self, jid: &str) -> Option<&AssetEntry> {
        self.entries.iter().find(|e| e.jid == jid)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn read(path: &Path) -> Result<String, SamplerError> {
    std::fs::read_to_string(path).map_err(|source| SamplerError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_floats(s: &str, line: usize, what: &str) -> Result<Vec<f64>, SamplerError> {
    s.split_whitespace()
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(SamplerError::BadFormat {
                line,
                msg: format!("bad {what} value {t:?}"),
            }),
        })
        .collect()
}

fn unit_norm(mut v: Vec<f64>, line: usize) -> Result<Vec<f64>, SamplerError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let off = (norm - 1.0).abs();
    if off <= NORM_TOL {
        return Ok(v);
    }
    if off > RENORM_TOL {
        return Err(SamplerError::BadNorm { line, norm });
    }
    log::warn!("line {line}: embedding norm {norm}, renormalizing");
    v.iter_mut().for_each(|x| *x /= norm);
    Ok(v)
}

/// Reads the `#dim=D` header if present.
fn header_dim(line: &str, n: usize) -> Result<Option<usize>, SamplerError> {
    let Some(rest) = line.trim().strip_prefix("#dim=") else {
        return Ok(None);
    };
    match rest.trim().parse::<usize>() {
        Ok(d) if d > 0 => Ok(Some(d)),
        _ => Err(SamplerError::BadFormat {
            line: n,
            msg: format!("bad header {line:?}"),
        }),
    }
}

struct Record<'a> {
    line: usize,
    fields: Vec<&'a str>,
}

/// Non-blank, non-comment lines plus the declared dimension.
fn records(text: &str) -> Result<(Option<usize>, Vec<Record<'_>>), SamplerError> {
    let mut dim = None;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        if raw.trim_start().starts_with('#') {
            if let Some(d) = header_dim(raw, line)? {
                dim = Some(d);
            }
            continue;
        }
        out.push(Record {
            line,
            fields: raw.split('\t').collect(),
        });
    }
    Ok((dim, out))
}

fn check_dim(dim: &mut Option<usize>, found: usize, line: usize) -> Result<(), SamplerError> {
    match *dim {
        None => *dim = Some(found),
        Some(expected) if expected != found => {
            return Err(SamplerError::InconsistentDimension {
                line,
                expected,
                found,
            })
        }
        _ => {}
    }
    Ok(())
}

/// Parses the tab-separated catalog format:
/// `jid<TAB>desc<TAB>sx<TAB>sy<TAB>sz<TAB>e1 e2 ... eD`, optional `#dim=D` header.
pub fn parse_catalog(text: &str) -> Result<Catalog, SamplerError> {
    let (mut dim, recs) = records(text)?;
    if recs.is_empty() {
        return Err(SamplerError::BadFormat {
            line: 0,
            msg: "catalog has no entries".into(),
        });
    }
    let mut entries = Vec::with_capacity(recs.len());
    for Record { line, fields } in recs {
        if fields.len() < 6 {
            return Err(SamplerError::BadFormat {
                line,
                msg: format!(
                    "expected at least 6 tab-separated fields, got {}",
                    fields.len()
                ),
            });
        }
        let jid = fields[0].trim();
        if jid.is_empty() {
            return Err(SamplerError::BadFormat {
                line,
                msg: "empty jid".into(),
            });
        }
        let mut size = [0.0; 3];
        for (k, s) in fields[2..5].iter().enumerate() {
            size[k] = match s.trim().parse::<f64>() {
                Ok(v) if v.is_finite() && v > 0.0 => v,
                _ => {
                    return Err(SamplerError::BadFormat {
                        line,
                        msg: format!("bad size component {s:?}"),
                    })
                }
            };
        }
        let embedding = parse_floats(&fields[5..].join(" "), line, "embedding")?;
        if embedding.is_empty() {
            return Err(SamplerError::BadFormat {
                line,
                msg: "missing embedding".into(),
            });
        }
        check_dim(&mut dim, embedding.len(), line)?;
        entries.push(AssetEntry {
            jid: jid.to_string(),
            desc: fields[1].trim().to_string(),
            embedding: unit_norm(embedding, line)?,
            size: Vec3::from_array(size),
            mesh_path: None,
        });
    }
    Ok(Catalog {
        dim: dim.unwrap_or(0),
        entries,
    })
}

pub fn load_catalog(path: impl AsRef<Path>) -> Result<Catalog, SamplerError> {
    parse_catalog(&read(path.as_ref())?)
}

/// Precomputed text embeddings looked up by exact string.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    pub dim: usize,
    pub vectors: HashMap<String, Vec<f64>>,
}

impl EmbeddingTable {
    pub fn get(&self, key: &str) -> Result<&[f64], SamplerError> {
        self.vectors
            .get(key)
            .map(Vec::as_slice)
            .ok_or_else(|| SamplerError::MissingEmbedding(key.to_string()))
    }

    pub fn insert(&mut self, key: impl Into<String>, v: Vec<f64>) {
        if self.vectors.is_empty() {
            self.dim = v.len();
        }
        self.vectors.insert(key.into(), v);
    }

    /// Table holding every catalog description.
    pub fn from_catalog(catalog: &Catalog) -> Self {
        let vectors = catalog
            .entries
            .iter()
            .map(|e| (e.desc.clone(), e.embedding.clone()))
            .collect();
        Self {
            dim: catalog.dim,
            vectors,
        }
    }
}

/// Parses `key<TAB>e1 e2 ... eD` lines, or lines in the catalog layout (keyed by
/// their first field).
pub fn parse_embeddings(text: &str) -> Result<EmbeddingTable, SamplerError> {
    let (mut dim, recs) = records(text)?;
    if recs.is_empty() {
        return Err(SamplerError::BadFormat {
            line: 0,
            msg: "embedding file has no entries".into(),
        });
    }
    let mut vectors = HashMap::with_capacity(recs.len());
    for Record { line, fields } in recs {
        let vec_fields = match fields.len() {
            2 => &fields[1..],
            n if n >= 6 => &fields[5..],
            n => {
                return Err(SamplerError::BadFormat {
                    line,
                    msg: format!("expected 2 or at least 6 tab-separated fields, got {n}"),
                })
            }
        };
        let v = parse_floats(&vec_fields.join(" "), line, "embedding")?;
        if v.is_empty() {
            return Err(SamplerError::BadFormat {
                line,
                msg: "missing embedding".into(),
            });
        }
        check_dim(&mut dim, v.len(), line)?;
        vectors.insert(fields[0].to_string(), unit_norm(v, line)?);
    }
    Ok(EmbeddingTable {
        dim: dim.unwrap_or(0),
        vectors,
    })
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable, SamplerError> {
    parse_embeddings(&read(path.as_ref())?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Weight of the semantic term; `1 - lambda` goes to the size term.
    pub lambda: f64,
    pub sigma: f64,
    pub temperature: f64,
    pub top_p: f64,
    pub top_k: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            lambda: 0.5,
            sigma: 0.2,
            temperature: 0.2,
            top_p: 0.95,
            top_k: 20,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: &str| Err(SamplerError::BadConfig(m.to_string()));
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("lambda must lie in [0, 1]");
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be positive");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad("top_p must lie in (0, 1]");
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredAsset {
    pub jid: String,
    pub score: f64,
}

pub fn dot(a: &[f64], b: &[f64]) -> Result<f64, SamplerError> {
    if a.len() != b.len() {
        return Err(SamplerError::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

fn by_score_then_jid(a: &ScoredAsset, b: &ScoredAsset) -> std::cmp::Ordering {
    b.score.total_cmp(&a.score).then_with(|| a.jid.cmp(&b.jid))
}

/// `lambda * <q, e> + (1 - lambda) * exp(-|s_q - s|^2 / (2 sigma^2))` for every
/// entry, best first (ties by jid).
pub fn score_assets(
    query: &[f64],
    target_size: Vec3,
    catalog: &Catalog,
    cfg: &SamplerConfig,
) -> Result<Vec<ScoredAsset>, SamplerError> {
    let mut out = catalog
        .entries
        .iter()
        .map(|e| {
            let sem = dot(&e.embedding, query)?;
            let d = target_size - e.size;
            let geo = (-d.dot(d) / (2.0 * cfg.sigma * cfg.sigma)).exp();
            Ok(ScoredAsset {
                jid: e.jid.clone(),
                score: cfg.lambda * sem + (1.0 - cfg.lambda) * geo,
            })
        })
        .collect::<Result<Vec<_>, SamplerError>>()?;
    out.sort_by(by_score_then_jid);
    Ok(out)
}

/// Top-k, tempered softmax, then the smallest nucleus reaching `top_p`,
/// renormalized. Entries are returned best first.
pub fn filtered_distribution(
    scores: &[ScoredAsset],
    cfg: &SamplerConfig,
) -> Result<Vec<(String, f64)>, SamplerError> {
    cfg.validate()?;
    if scores.is_empty() {
        return Err(SamplerError::Empty);
    }
    let mut ranked = scores.to_vec();
    ranked.sort_by(by_score_then_jid);
    ranked.truncate(cfg.top_k);

    let max = ranked[0].score / cfg.temperature;
    let weights: Vec<f64> = ranked
        .iter()
        .map(|s| (s.score / cfg.temperature - max).exp())
        .collect();
    let z: f64 = weights.iter().sum();

    let mut kept = Vec::new();
    let mut cum = 0.0;
    for (s, w) in ranked.iter().zip(&weights) {
        let p = w / z;
        kept.push((s.jid.clone(), p));
        cum += p;
        // slack for rounding so top_p = 1 does not demand an exact sum
        if cum >= cfg.top_p - 1e-12 {
            break;
        }
    }
    let mass: f64 = kept.iter().map(|k| k.1).sum();
    kept.iter_mut().for_each(|k| k.1 /= mass);
    Ok(kept)
}

/// Draws from [`filtered_distribution`] with the caller's generator.
pub fn sample_asset_with(
    scores: &[ScoredAsset],
    cfg: &SamplerConfig,
    rng: &mut impl Rng,
) -> Result<String, SamplerError> {
    let dist = filtered_distribution(scores, cfg)?;
    let u: f64 = rng.gen();
    let mut cum = 0.0;
    for (jid, p) in &dist {
        cum += p;
        if u < cum {
            return Ok(jid.clone());
        }
    }
    Ok(dist.last().expect("distribution is non-empty").0.clone())
}

/// Draws one asset with a ChaCha8 generator seeded from `cfg.seed`.
pub fn sample_asset(scores: &[ScoredAsset], cfg: &SamplerConfig) -> Result<String, SamplerError> {
    sample_asset_with(scores, cfg, &mut ChaCha8Rng::seed_from_u64(cfg.seed))
}

/// Highest score, ties by smallest jid.
pub fn greedy_asset(scores: &[ScoredAsset]) -> Result<String, SamplerError> {
    scores
        .iter()
        .min_by(|a, b| by_score_then_jid(a, b))
        .map(|s| s.jid.clone())
        .ok_or(SamplerError::Empty)
}
