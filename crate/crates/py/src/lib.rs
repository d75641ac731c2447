//! Python bindings for the reward, advantage, metric and retrieval functions.
//!
//! Only strings, numbers and lists cross the boundary: scenes and objects are
//! passed as SSR JSON text, files by path.

use std::collections::HashMap;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

use ssrkit::commands::parse_candidate_object;
use ssrkit::math::Vec3;
use ssrkit::metrics::{self, MetricError, RewardConfig, RewardContext};
use ssrkit::sampler::{
    self, load_catalog, load_embeddings, parse_embeddings, EmbeddingTable, SamplerConfig,
    SamplerError,
};
use ssrkit::ssr::{parse_ssr, ParseError};
use ssrkit::voxel::{BoxGeometry, VoxelConfig, VoxelError};

create_exception!(ssrkit_py, SsrkitError, PyException);
create_exception!(ssrkit_py, SceneParseError, SsrkitError);
create_exception!(ssrkit_py, VoxelizationError, SsrkitError);
create_exception!(ssrkit_py, MetricComputationError, SsrkitError);
create_exception!(ssrkit_py, SamplingError, SsrkitError);
create_exception!(ssrkit_py, ConfigError, SsrkitError);

fn parse_err(e: ParseError) -> PyErr {
    SceneParseError::new_err(e.to_string())
}

fn voxel_err(e: VoxelError) -> PyErr {
    VoxelizationError::new_err(e.to_string())
}

fn metric_err(e: MetricError) -> PyErr {
    MetricComputationError::new_err(e.to_string())
}

fn sampler_err(e: SamplerError) -> PyErr {
    SamplingError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(f)) => f.into_pyobject(py)?.into_any(),
            _ => py.None().into_bound(py),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(a) => {
            let list = PyList::empty(py);
            for x in a {
                list.append(to_py(py, x)?)?;
            }
            list.into_any()
        }
        Value::Object(m) => {
            let d = PyDict::new(py);
            for (k, x) in m {
                d.set_item(k, to_py(py, x)?)?;
            }
            d.into_any()
        }
    })
}

/// Reward and voxel settings from a flat `name -> number` map.
fn configs(config: Option<HashMap<String, f64>>) -> PyResult<(RewardConfig, VoxelConfig)> {
    let mut r = RewardConfig::default();
    let mut v = VoxelConfig::default();
    for (k, x) in config.unwrap_or_default() {
        match k.as_str() {
            "pms_min" => r.pms_min = x,
            "dss_min" => r.dss_min = x,
            "vbl_max" => r.vbl_max = x,
            "size_l2_max" => r.size_l2_max = x,
            "invalid_reward" => r.invalid_reward = x,
            "pass_reward" => r.pass_reward = x,
            "voxel_size" => v.voxel_size = x,
            _ => return Err(ConfigError::new_err(format!("unknown config key {k:?}"))),
        }
    }
    Ok((r, v))
}

fn embeddings(text: Option<&str>) -> PyResult<EmbeddingTable> {
    text.map(parse_embeddings)
        .transpose()
        .map_err(sampler_err)
        .map(Option::unwrap_or_default)
}

fn score_many<'py>(
    py: Python<'py>,
    candidates: &[String],
    scene_text: &str,
    prompt: &str,
    gt_text: &str,
    embeddings_text: Option<&str>,
    config: Option<HashMap<String, f64>>,
) -> PyResult<Vec<Bound<'py, PyAny>>> {
    let scene = parse_ssr(scene_text).map_err(parse_err)?;
    let gt = parse_candidate_object(gt_text)
        .map_err(|e| SceneParseError::new_err(format!("ground truth: {e}")))?;
    let table = embeddings(embeddings_text)?;
    let (cfg, vox) = configs(config)?;
    let ctx = RewardContext {
        scene: &scene,
        prompt,
        gt_object: &gt,
        embeddings: &table,
        meshes: &BoxGeometry,
        cfg,
        vox,
    };
    candidates
        .iter()
        .map(|c| {
            let outcome = metrics::score_candidate(c, &ctx).map_err(metric_err)?;
            let v = serde_json::to_value(outcome).expect("outcome serializes");
            to_py(py, &v)
        })
        .collect()
}

/// Reward of one candidate object; the result has the same fields as the CLI's
/// `reward` output lines.
#[pyfunction]
#[pyo3(signature = (candidate_text, scene_text, prompt, gt_text, embeddings_text=None, config=None))]
fn score_candidate<'py>(
    py: Python<'py>,
    candidate_text: String,
    scene_text: &str,
    prompt: &str,
    gt_text: &str,
    embeddings_text: Option<&str>,
    config: Option<HashMap<String, f64>>,
) -> PyResult<Bound<'py, PyAny>> {
    let mut out = score_many(
        py,
        &[candidate_text],
        scene_text,
        prompt,
        gt_text,
        embeddings_text,
        config,
    )?;
    Ok(out.remove(0))
}

/// Rewards for a batch of candidates, in order.
#[pyfunction]
#[pyo3(signature = (candidates, scene_text, prompt, gt_text, embeddings_text=None, config=None))]
fn score_candidates<'py>(
    py: Python<'py>,
    candidates: Vec<String>,
    scene_text: &str,
    prompt: &str,
    gt_text: &str,
    embeddings_text: Option<&str>,
    config: Option<HashMap<String, f64>>,
) -> PyResult<Vec<Bound<'py, PyAny>>> {
    score_many(
        py,
        &candidates,
        scene_text,
        prompt,
        gt_text,
        embeddings_text,
        config,
    )
}

#[pyfunction]
fn group_advantage(rewards: Vec<f64>) -> PyResult<Vec<f64>> {
    metrics::group_advantage(&rewards).map_err(metric_err)
}

#[pyfunction]
fn pms(prompt: &str, desc: &str) -> PyResult<f64> {
    metrics::pms(prompt, desc).map_err(metric_err)
}

#[pyfunction]
fn dss(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    metrics::dss(&a, &b).map_err(metric_err)
}

/// Violation report of a scene (objects as boxes) as a dict.
#[pyfunction]
#[pyo3(signature = (scene_text, voxel_size=0.05))]
fn compute_vbl<'py>(
    py: Python<'py>,
    scene_text: &str,
    voxel_size: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let scene = parse_ssr(scene_text).map_err(parse_err)?;
    let report = ssrkit::voxel::compute_vbl(
        &scene,
        &BoxGeometry,
        &VoxelConfig::with_voxel_size(voxel_size),
    )
    .map_err(voxel_err)?;
    to_py(
        py,
        &serde_json::to_value(report).expect("report serializes"),
    )
}

/// Normalized VBL change from `before` to `after` (one object added).
#[pyfunction]
#[pyo3(signature = (before_text, after_text, voxel_size=0.05))]
fn delta_vbl(before_text: &str, after_text: &str, voxel_size: f64) -> PyResult<f64> {
    let before = parse_ssr(before_text).map_err(parse_err)?;
    let after = parse_ssr(after_text).map_err(parse_err)?;
    ssrkit::voxel::delta_vbl(
        &before,
        &after,
        &BoxGeometry,
        &VoxelConfig::with_voxel_size(voxel_size),
    )
    .map_err(voxel_err)
}

fn scores(
    prompt: &str,
    size: (f64, f64, f64),
    catalog_path: &str,
    embeddings_path: Option<&str>,
    cfg: &SamplerConfig,
) -> PyResult<Vec<sampler::ScoredAsset>> {
    let catalog = load_catalog(catalog_path).map_err(sampler_err)?;
    let table = match embeddings_path {
        Some(p) => load_embeddings(p).map_err(sampler_err)?,
        None => EmbeddingTable::from_catalog(&catalog),
    };
    let query = table.get(prompt).map_err(sampler_err)?;
    sampler::score_assets(query, Vec3::new(size.0, size.1, size.2), &catalog, cfg)
        .map_err(sampler_err)
}

#[pyfunction]
#[pyo3(signature = (prompt, size, catalog_path, embeddings_path=None, seed=0, lambda_=0.5, sigma=0.2, temperature=0.2, top_p=0.95, top_k=20))]
#[allow(clippy::too_many_arguments)]
fn sample_asset(
    prompt: &str,
    size: (f64, f64, f64),
    catalog_path: &str,
    embeddings_path: Option<&str>,
    seed: u64,
    lambda_: f64,
    sigma: f64,
    temperature: f64,
    top_p: f64,
    top_k: usize,
) -> PyResult<String> {
    let cfg = SamplerConfig {
        lambda: lambda_,
        sigma,
        temperature,
        top_p,
        top_k,
        seed,
    };
    cfg.validate()
        .map_err(|e| ConfigError::new_err(e.to_string()))?;
    let s = scores(prompt, size, catalog_path, embeddings_path, &cfg)?;
    sampler::sample_asset(&s, &cfg).map_err(sampler_err)
}

#[pyfunction]
#[pyo3(signature = (prompt, size, catalog_path, embeddings_path=None, lambda_=0.5, sigma=0.2))]
fn greedy_asset(
    prompt: &str,
    size: (f64, f64, f64),
    catalog_path: &str,
    embeddings_path: Option<&str>,
    lambda_: f64,
    sigma: f64,
) -> PyResult<String> {
    let cfg = SamplerConfig {
        lambda: lambda_,
        sigma,
        ..SamplerConfig::default()
    };
    let s = scores(prompt, size, catalog_path, embeddings_path, &cfg)?;
    sampler::greedy_asset(&s).map_err(sampler_err)
}

#[pymodule]
fn ssrkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add("__version__", ssrkit::VERSION)?;
    m.add("SsrkitError", py.get_type::<SsrkitError>())?;
    m.add("SceneParseError", py.get_type::<SceneParseError>())?;
    m.add("VoxelizationError", py.get_type::<VoxelizationError>())?;
    m.add(
        "MetricComputationError",
        py.get_type::<MetricComputationError>(),
    )?;
    m.add("SamplingError", py.get_type::<SamplingError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add_function(wrap_pyfunction!(score_candidate, m)?)?;
    m.add_function(wrap_pyfunction!(score_candidates, m)?)?;
    m.add_function(wrap_pyfunction!(group_advantage, m)?)?;
    m.add_function(wrap_pyfunction!(pms, m)?)?;
    m.add_function(wrap_pyfunction!(dss, m)?)?;
    m.add_function(wrap_pyfunction!(compute_vbl, m)?)?;
    m.add_function(wrap_pyfunction!(delta_vbl, m)?)?;
    m.add_function(wrap_pyfunction!(sample_asset, m)?)?;
    m.add_function(wrap_pyfunction!(greedy_asset, m)?)?;
    Ok(())
}
