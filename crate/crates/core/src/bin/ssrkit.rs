use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use ssrkit::boundary::extract_corners;
use ssrkit::commands::parse_candidate_object;
use ssrkit::instruct::{gen_instruction, PromptBank};
use ssrkit::manifest::RunManifest;
use ssrkit::mesh::TriangleMesh;
use ssrkit::metrics::{best_of_n, pms, score_candidate, BonCandidate, RewardConfig, RewardContext};
use ssrkit::sampler::{
    filtered_distribution, greedy_asset, load_catalog, load_embeddings, sample_asset, score_assets,
    EmbeddingTable, SamplerConfig,
};
use ssrkit::ssr::{add_object, augment, parse_ssr, validate_scene, Scene};
use ssrkit::voxel::{compute_vbl, delta_vbl, BoxGeometry, MeshDir, MeshResolver, VoxelConfig};

#[derive(Parser)]
#[command(
    name = "ssrkit",
    version,
    about = "Scene representation, layout metrics and rewards for 3D indoor scenes"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Global {
    /// Line-delimited JSON output.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Write results here instead of stdout; the run manifest goes to `<out>.manifest.json`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Explicit manifest path.
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct VoxArgs {
    #[arg(long, default_value_t = 0.05)]
    voxel_size: f64,
    /// Directory of `<jid>.obj` meshes; objects are boxes when omitted.
    #[arg(long)]
    meshes: Option<PathBuf>,
}

impl VoxArgs {
    fn config(&self) -> VoxelConfig {
        VoxelConfig::with_voxel_size(self.voxel_size)
    }

    fn resolver(&self) -> Box<dyn MeshResolver> {
        match &self.meshes {
            Some(d) => Box::new(MeshDir::new(d)),
            None => Box::new(BoxGeometry),
        }
    }
}

#[derive(Args)]
struct SamplerArgs {
    #[arg(long, default_value_t = 0.5)]
    lambda: f64,
    #[arg(long, default_value_t = 0.2)]
    sigma: f64,
    #[arg(long, default_value_t = 0.2)]
    temperature: f64,
    #[arg(long, default_value_t = 0.95)]
    top_p: f64,
    #[arg(long, default_value_t = 20)]
    top_k: usize,
}

#[derive(Args)]
struct RewardArgs {
    #[arg(long, default_value_t = 0.85)]
    pms_min: f64,
    #[arg(long, default_value_t = 0.9)]
    dss_min: f64,
    #[arg(long, default_value_t = 1e-5)]
    vbl_max: f64,
    #[arg(long, default_value_t = 0.2)]
    size_l2_max: f64,
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    invalid_reward: f64,
    #[arg(long, default_value_t = 1.0)]
    pass_reward: f64,
}

impl RewardArgs {
    fn config(&self) -> RewardConfig {
        RewardConfig {
            pms_min: self.pms_min,
            dss_min: self.dss_min,
            vbl_max: self.vbl_max,
            size_l2_max: self.size_l2_max,
            invalid_reward: self.invalid_reward,
            pass_reward: self.pass_reward,
        }
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Apply the dataset filter to scene files or directories of `.json` scenes.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[command(flatten)]
        vox: VoxArgs,
    },
    /// Voxel violation report for a scene; with `--before`, also the VBL change.
    Vbl {
        scene: PathBuf,
        #[arg(long)]
        before: Option<PathBuf>,
        #[command(flatten)]
        vox: VoxArgs,
    },
    /// Floor corners of a room mesh as SSR bounds.
    ExtractBounds {
        mesh: PathBuf,
        /// Ceiling height above the floor; defaults to the mesh's highest level.
        #[arg(long)]
        height: Option<f64>,
    },
    /// Retrieve an asset for a prompt and target size.
    SampleAsset {
        #[arg(long)]
        prompt: String,
        /// Target size as `x,y,z`.
        #[arg(long, value_parser = parse_size)]
        size: [f64; 3],
        #[arg(long)]
        catalog: PathBuf,
        /// Prompt embeddings; defaults to the catalog's own descriptions.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long, conflicts_with = "seed")]
        greedy: bool,
        #[arg(long, env = "SSRKIT_SEED")]
        seed: Option<u64>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Score candidate objects (one JSON document per line) for insertion.
    Reward {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        prompt: String,
        /// Ground-truth object as a JSON file.
        #[arg(long)]
        gt: PathBuf,
        candidates: PathBuf,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[command(flatten)]
        reward: RewardArgs,
        #[command(flatten)]
        vox: VoxArgs,
    },
    /// Pick the best of N candidates: highest PMS, then smallest VBL increase.
    Bon {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        prompt: String,
        candidates: PathBuf,
        /// Only consider the first N candidates.
        #[arg(long)]
        n: Option<usize>,
        #[command(flatten)]
        vox: VoxArgs,
    },
    /// Sample instruction tuples from scenes.
    GenInstructions {
        #[arg(required = true)]
        scenes: Vec<PathBuf>,
        #[arg(long)]
        bank: PathBuf,
        /// Instructions per scene.
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, env = "SSRKIT_SEED", default_value_t = 0)]
        seed: u64,
        /// Randomly rotate, shift and jitter each scene first.
        #[arg(long)]
        augment: bool,
    },
}

fn parse_size(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()?;
    match parts.as_slice() {
        [x, y, z] if parts.iter().all(|v| v.is_finite()) => Ok([*x, *y, *z]),
        _ => Err(format!("expected x,y,z, got {s:?}")),
    }
}

/// Exit 2: unreadable or invalid input. Exit 1: the run completed but a check failed.
enum Failure {
    Input(String),
    Check(String),
}

fn input<E: std::fmt::Display>(ctx: impl std::fmt::Display) -> impl FnOnce(E) -> Failure {
    move |e| Failure::Input(format!("{ctx}: {e}"))
}

type Outcome = Result<bool, Failure>;

struct Run {
    out: Box<dyn Write>,
    json: bool,
    manifest: Option<PathBuf>,
    started: Instant,
    inputs: Vec<String>,
    config: Value,
    seed: Option<u64>,
}

impl Run {
    fn line(&mut self, s: &str) -> Result<(), Failure> {
        writeln!(self.out, "{s}").map_err(|e| Failure::Input(format!("write failed: {e}")))
    }

    fn input(&mut self, p: &Path) {
        self.inputs.push(p.display().to_string());
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(input(path.display()))
}

fn read_scene(path: &Path) -> Result<Scene, Failure> {
    parse_ssr(&read(path)?).map_err(input(path.display()))
}

/// Files named on the command line plus `*.json` files of named directories, sorted.
fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(input(p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            out.extend(found);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

fn embeddings_or(
    path: &Option<PathBuf>,
    fallback: impl FnOnce() -> EmbeddingTable,
) -> Result<EmbeddingTable, Failure> {
    match path {
        Some(p) => load_embeddings(p).map_err(input(p.display())),
        None => Ok(fallback()),
    }
}

fn cmd_validate(run: &mut Run, paths: &[PathBuf], vox: &VoxArgs) -> Outcome {
    let files = expand(paths)?;
    let cfg = vox.config();
    let resolver = vox.resolver();
    run.config = json!({ "voxel": cfg });
    let results: Vec<Result<_, Failure>> = files
        .par_iter()
        .map(|f| {
            let scene = read_scene(f)?;
            validate_scene(&scene, resolver.as_ref(), &cfg).map_err(input(f.display()))
        })
        .collect();
    let (mut ok, mut bad) = (0usize, 0usize);
    for (f, r) in files.iter().zip(results) {
        run.input(f);
        let v = r?;
        if v.is_valid {
            ok += 1;
        } else {
            bad += 1;
        }
        let reason = serde_json::to_value(v.reason).expect("reason serializes");
        if run.json {
            let mut doc = serde_json::to_value(&v).expect("validity serializes");
            doc["path"] = json!(f.display().to_string());
            run.line(&doc.to_string())?;
        } else {
            let tail = v
                .rescued_index
                .map(|i| format!(" (drop object {i})"))
                .unwrap_or_default();
            let status = if v.is_valid { "valid" } else { "invalid" };
            run.line(&format!(
                "{}: {status} {}{tail}",
                f.display(),
                reason.as_str().unwrap_or("")
            ))?;
        }
    }
    eprintln!("{ok} valid, {bad} invalid");
    Ok(bad == 0)
}

fn cmd_vbl(run: &mut Run, scene: &Path, before: &Option<PathBuf>, vox: &VoxArgs) -> Outcome {
    let cfg = vox.config();
    run.config = json!({ "voxel": cfg });
    run.input(scene);
    let s = read_scene(scene)?;
    let resolver = vox.resolver();
    let report = compute_vbl(&s, resolver.as_ref(), &cfg).map_err(input(scene.display()))?;
    let mut doc = serde_json::to_value(&report).expect("report serializes");
    if let Some(b) = before {
        run.input(b);
        let prev = read_scene(b)?;
        let d = delta_vbl(&prev, &s, resolver.as_ref(), &cfg).map_err(input(b.display()))?;
        doc["delta_vbl"] = json!(d);
    }
    run.line(&doc.to_string())?;
    Ok(true)
}

fn cmd_extract_bounds(run: &mut Run, mesh: &Path, height: Option<f64>) -> Outcome {
    run.input(mesh);
    run.config = json!({ "height": height });
    let m = TriangleMesh::load_obj(mesh).map_err(input(mesh.display()))?;
    let poly = extract_corners(&m).map_err(input(mesh.display()))?;
    let ceiling = height.map_or(poly.y_ceiling, |h| poly.y_floor + h);
    if !(ceiling > poly.y_floor) {
        return Err(Failure::Input(format!(
            "{}: ceiling must be above the floor",
            mesh.display()
        )));
    }
    let ring = |y: f64| {
        poly.corners()
            .iter()
            .map(|c| json!([c[0], y, c[1]]))
            .collect::<Vec<_>>()
    };
    let doc = json!({ "bounds_top": ring(ceiling), "bounds_bottom": ring(poly.y_floor) });
    run.line(&doc.to_string())?;
    Ok(true)
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample_asset(
    run: &mut Run,
    prompt: &str,
    size: [f64; 3],
    catalog: &Path,
    embeddings: &Option<PathBuf>,
    greedy: bool,
    seed: Option<u64>,
    sa: &SamplerArgs,
) -> Outcome {
    run.input(catalog);
    if let Some(e) = embeddings {
        run.input(e);
    }
    let seed = seed.unwrap_or(0);
    let cfg = SamplerConfig {
        lambda: sa.lambda,
        sigma: sa.sigma,
        temperature: sa.temperature,
        top_p: sa.top_p,
        top_k: sa.top_k,
        seed,
    };
    cfg.validate().map_err(input("sampler flags"))?;
    run.config = json!({ "sampler": cfg, "greedy": greedy });
    run.seed = (!greedy).then_some(seed);
    let cat = load_catalog(catalog).map_err(input(catalog.display()))?;
    let table = embeddings_or(embeddings, || EmbeddingTable::from_catalog(&cat))?;
    let q = table.get(prompt).map_err(input("query"))?;
    let target = ssrkit::math::Vec3::from_array(size);
    let scores = score_assets(q, target, &cat, &cfg).map_err(input("query"))?;
    let jid = if greedy {
        greedy_asset(&scores)
    } else {
        sample_asset(&scores, &cfg)
    }
    .map_err(input("catalog"))?;
    let entry = cat.get(&jid).expect("sampled jid is in the catalog");
    let semantic = ssrkit::sampler::dot(&entry.embedding, q).map_err(input("query"))?;
    let d = target - entry.size;
    let geometric = (-d.dot(d) / (2.0 * cfg.sigma * cfg.sigma)).exp();
    let score = scores
        .iter()
        .find(|s| s.jid == jid)
        .map(|s| s.score)
        .unwrap_or(f64::NAN);
    let probability = if greedy {
        None
    } else {
        filtered_distribution(&scores, &cfg)
            .ok()
            .and_then(|dist| dist.into_iter().find(|x| x.0 == jid).map(|x| x.1))
    };
    if run.json {
        let doc = json!({
            "jid": jid, "desc": entry.desc, "size": entry.size.to_array(), "score": score,
            "semantic": semantic, "geometric": geometric, "probability": probability,
        });
        run.line(&doc.to_string())?;
    } else {
        run.line(&format!(
            "{jid}\tscore={score:.6} semantic={semantic:.6} geometric={geometric:.6}"
        ))?;
    }
    Ok(true)
}

fn candidate_lines(path: &Path) -> Result<Vec<String>, Failure> {
    Ok(read(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect())
}

#[allow(clippy::too_many_arguments)]
fn cmd_reward(
    run: &mut Run,
    scene: &Path,
    prompt: &str,
    gt: &Path,
    candidates: &Path,
    embeddings: &Option<PathBuf>,
    ra: &RewardArgs,
    vox: &VoxArgs,
) -> Outcome {
    for p in [scene, gt, candidates] {
        run.input(p);
    }
    let s = read_scene(scene)?;
    let gt_obj = parse_candidate_object(&read(gt)?).map_err(input(gt.display()))?;
    let table = embeddings_or(embeddings, EmbeddingTable::default)?;
    let resolver = vox.resolver();
    let ctx = RewardContext {
        scene: &s,
        prompt,
        gt_object: &gt_obj,
        embeddings: &table,
        meshes: resolver.as_ref(),
        cfg: ra.config(),
        vox: vox.config(),
    };
    run.config = json!({ "reward": ctx.cfg, "voxel": ctx.vox, "prompt": prompt });
    let lines = candidate_lines(candidates)?;
    let outcomes = lines
        .par_iter()
        .map(|l| score_candidate(l, &ctx))
        .collect::<Result<Vec<_>, _>>()
        .map_err(input(candidates.display()))?;
    for o in &outcomes {
        run.line(&serde_json::to_string(o).expect("outcome serializes"))?;
    }
    Ok(true)
}

fn cmd_bon(
    run: &mut Run,
    scene: &Path,
    prompt: &str,
    candidates: &Path,
    n: Option<usize>,
    vox: &VoxArgs,
) -> Outcome {
    run.input(scene);
    run.input(candidates);
    let s = read_scene(scene)?;
    let cfg = vox.config();
    run.config = json!({ "voxel": cfg, "prompt": prompt, "n": n });
    let resolver = vox.resolver();
    let mut lines = candidate_lines(candidates)?;
    if let Some(n) = n {
        lines.truncate(n);
    }
    let scored = lines
        .par_iter()
        .map(|l| match parse_candidate_object(l) {
            Err(_) => Ok(BonCandidate {
                valid: false,
                pms: 0.0,
                delta_vbl: 0.0,
            }),
            Ok(obj) => {
                let p = pms(prompt, &obj.desc).map_err(input("prompt"))?;
                let after = add_object(&s, obj);
                let d = delta_vbl(&s, &after, resolver.as_ref(), &cfg)
                    .map_err(input(candidates.display()))?;
                Ok(BonCandidate {
                    valid: true,
                    pms: p,
                    delta_vbl: d,
                })
            }
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    let Ok(best) = best_of_n(&scored) else {
        return Err(Failure::Check("every candidate is invalid".into()));
    };
    if run.json {
        let doc = json!({ "index": best, "pms": scored[best].pms, "delta_vbl": scored[best].delta_vbl, "candidate": lines[best] });
        run.line(&doc.to_string())?;
    } else {
        run.line(&format!("{best}\t{}", lines[best]))?;
    }
    Ok(true)
}

fn cmd_gen_instructions(
    run: &mut Run,
    scenes: &[PathBuf],
    bank: &Path,
    count: usize,
    seed: u64,
    aug: bool,
) -> Outcome {
    let files = expand(scenes)?;
    run.input(bank);
    run.seed = Some(seed);
    run.config = json!({ "count": count, "augment": aug });
    let bank = PromptBank::load(bank).map_err(input(bank.display()))?;
    // per-file seeds drawn up front so output does not depend on scheduling
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = files.iter().map(|_| master.gen()).collect();
    let per_file: Vec<Result<Vec<String>, Failure>> = files
        .par_iter()
        .zip(&seeds)
        .map(|(f, &fs)| {
            let scene = read_scene(f)?;
            let mut rng = ChaCha8Rng::seed_from_u64(fs);
            (0..count)
                .map(|_| {
                    let (aug_seed, gen_seed): (u64, u64) = (rng.gen(), rng.gen());
                    let src = if aug {
                        augment(&scene, aug_seed)
                    } else {
                        scene.clone()
                    };
                    gen_instruction(&src, &bank, gen_seed)
                        .map(|i| i.to_json_line())
                        .map_err(input(f.display()))
                })
                .collect()
        })
        .collect();
    for (f, r) in files.iter().zip(per_file) {
        run.input(f);
        for line in r? {
            run.line(&line)?;
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let g = cli.global;
    if let Some(j) = g.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let out: Box<dyn Write> = match &g.out {
        Some(p) => match fs::File::create(p) {
            Ok(f) => Box::new(BufWriter::new(f)),
            Err(e) => {
                eprintln!("error: {}: {e}", p.display());
                return ExitCode::from(2);
            }
        },
        None => Box::new(BufWriter::new(io::stdout())),
    };
    let manifest = g.manifest.clone().or_else(|| {
        g.out
            .as_ref()
            .map(|p| PathBuf::from(format!("{}.manifest.json", p.display())))
    });
    let mut run = Run {
        out,
        json: g.json,
        manifest,
        started: Instant::now(),
        inputs: Vec::new(),
        config: Value::Null,
        seed: None,
    };

    let (name, result) = match &cli.cmd {
        Cmd::Validate { paths, vox } => ("validate", cmd_validate(&mut run, paths, vox)),
        Cmd::Vbl { scene, before, vox } => ("vbl", cmd_vbl(&mut run, scene, before, vox)),
        Cmd::ExtractBounds { mesh, height } => (
            "extract-bounds",
            cmd_extract_bounds(&mut run, mesh, *height),
        ),
        Cmd::SampleAsset {
            prompt,
            size,
            catalog,
            embeddings,
            greedy,
            seed,
            sampler,
        } => (
            "sample-asset",
            cmd_sample_asset(
                &mut run, prompt, *size, catalog, embeddings, *greedy, *seed, sampler,
            ),
        ),
        Cmd::Reward {
            scene,
            prompt,
            gt,
            candidates,
            embeddings,
            reward,
            vox,
        } => (
            "reward",
            cmd_reward(
                &mut run, scene, prompt, gt, candidates, embeddings, reward, vox,
            ),
        ),
        Cmd::Bon {
            scene,
            prompt,
            candidates,
            n,
            vox,
        } => ("bon", cmd_bon(&mut run, scene, prompt, candidates, *n, vox)),
        Cmd::GenInstructions {
            scenes,
            bank,
            count,
            seed,
            augment,
        } => (
            "gen-instructions",
            cmd_gen_instructions(&mut run, scenes, bank, *count, *seed, *augment),
        ),
    };
    if let Err(e) = run.out.flush() {
        eprintln!("error: write failed: {e}");
        return ExitCode::from(2);
    }

    let m = RunManifest::new(
        name,
        run.config.clone(),
        run.inputs.clone(),
        run.seed,
        run.started,
    );
    match &run.manifest {
        Some(p) => {
            if let Err(e) = m.write(p) {
                eprintln!("error: {}: {e}", p.display());
                return ExitCode::from(2);
            }
        }
        None => eprintln!(
            "manifest: {}",
            serde_json::to_string(&m).expect("manifest serializes")
        ),
    }

    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Check(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
