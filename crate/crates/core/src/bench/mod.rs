//! Benchmark runner: dataset preparation, planner × scene × center episode
//! grids, result tables and trace export.

mod export;
mod prep;

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{EnvConfig, EnvError, Environment, StepRecord};
use crate::metrics::{auc, chamfer_distance, meters_to_cm, CoverageTracker, MetricError, ReconCloud};
use crate::planners::{by_name, GreedyConfig, GreedyPlanner, Planner, PlanContext, PlannerError};
use crate::scene::{cache, load_mesh, shapes, Scene, SceneConfig, SceneError, DEFAULT_SURFACE_POINTS, OBJECT_CENTERS};

pub use export::{export, ExportFormat, ExportReport};
pub use prep::{prep, Manifest, ManifestEntry, PrepFailure, PrepReport, MANIFEST_FILE};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid bench config: {0}")]
    Config(String),
    #[error("unknown export format {0:?}")]
    UnknownFormat(String),
    #[error("bad trace: {0}")]
    Trace(String),
    #[error("replay diverged from the trace at step {0}")]
    ReplayMismatch(usize),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Planner(#[from] PlannerError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Where a scene's mesh and ground truth come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SceneSource {
    /// A mesh from the bundled suite.
    Suite { name: String },
    /// A mesh file prepared on the fly.
    Mesh { path: PathBuf },
    /// A ground-truth cache written by `prep`.
    Cache { path: PathBuf },
}

/// Everything needed to rebuild one placed scene.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneRecipe {
    pub id: String,
    pub mesh: String,
    pub source: SceneSource,
    pub placement: SceneConfig,
    pub surface_points: usize,
    pub prep_seed: u64,
}

impl SceneRecipe {
    pub fn build(&self, env: &EnvConfig) -> Result<Scene, BenchError> {
        let frame = env.frame()?;
        let raw = match &self.source {
            SceneSource::Cache { path } => {
                let scene = cache::load(path)?;
                if scene.gt.frame() != &frame {
                    return Err(BenchError::Config(format!(
                        "cache {} was prepared for a different grid",
                        path.display()
                    )));
                }
                return Ok(scene);
            }
            SceneSource::Suite { name } => shapes::suite()
                .into_iter()
                .find(|(n, _)| n == name)
                .map(|(_, m)| m)
                .ok_or_else(|| BenchError::Config(format!("no bundled mesh {name:?}")))?,
            SceneSource::Mesh { path } => load_mesh(path)?,
        };
        Ok(Scene::prepare(
            self.id.clone(),
            &raw,
            &self.placement,
            frame,
            self.surface_points,
            self.prep_seed,
        )?)
    }
}

/// Scene id for a mesh placed at `center`.
pub fn scene_id(mesh: &str, center: [f64; 2]) -> String {
    format!("{mesh}@{},{}", center[0], center[1])
}

/// Bench configuration. Every field has a default so config files only
/// list what they change.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchSpec {
    /// Each entry is `suite`, `suite:<name>`, a mesh file or a directory
    /// written by `prep`.
    pub scenes: Vec<String>,
    pub planners: Vec<String>,
    pub object_centers: Vec<[f64; 2]>,
    /// Images per episode, counting the one taken at reset.
    pub views_budget: usize,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
    /// CR threshold in meters; defaults to the voxel size.
    pub tau: Option<f64>,
    pub surface_points: usize,
    pub prep_seed: u64,
    pub target_extent: f64,
    pub ground_height: f64,
    /// Hash-grid cell used to thin the reconstruction cloud, meters.
    pub recon_cell: f64,
    pub write_traces: bool,
    pub debug_candidates: bool,
    pub env: EnvConfig,
    pub greedy: GreedyConfig,
}

impl Default for BenchSpec {
    fn default() -> Self {
        let env = EnvConfig {
            stop_at_target: false,
            ..EnvConfig::default()
        };
        BenchSpec {
            scenes: vec!["suite".into()],
            planners: vec!["greedy".into(), "random".into()],
            object_centers: OBJECT_CENTERS.to_vec(),
            views_budget: 30,
            seeds: vec![0],
            output_dir: PathBuf::from("bench_out"),
            tau: None,
            surface_points: DEFAULT_SURFACE_POINTS,
            prep_seed: 0,
            target_extent: 8.0,
            ground_height: 1.0,
            recon_cell: 0.1,
            write_traces: true,
            debug_candidates: false,
            env,
            greedy: GreedyConfig::default(),
        }
    }
}

impl BenchSpec {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.scenes.is_empty() || self.planners.is_empty() || self.seeds.is_empty() {
            return Err(BenchError::Config("scenes, planners and seeds must be non-empty".into()));
        }
        if self.object_centers.is_empty() {
            return Err(BenchError::Config("object_centers must be non-empty".into()));
        }
        if self.views_budget == 0 || self.views_budget > self.env.max_steps {
            return Err(BenchError::Config(format!(
                "views_budget {} must be in 1..={}",
                self.views_budget, self.env.max_steps
            )));
        }
        if self.tau.is_some_and(|t| !(t > 0.0)) || !(self.recon_cell > 0.0) {
            return Err(BenchError::Config("tau and recon_cell must be positive".into()));
        }
        self.env.validate()?;
        for p in &self.planners {
            by_name(p)?;
        }
        for c in &self.object_centers {
            self.placement(*c).validate()?;
        }
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        self.tau.unwrap_or_else(|| self.env.voxel_size())
    }

    pub fn placement(&self, center: [f64; 2]) -> SceneConfig {
        SceneConfig {
            target_extent: self.target_extent,
            scene_size: self.env.scene_size,
            object_center: center,
            ground_height: self.ground_height,
        }
    }

    fn recipe(&self, mesh: &str, source: SceneSource, center: [f64; 2]) -> SceneRecipe {
        SceneRecipe {
            id: scene_id(mesh, center),
            mesh: mesh.to_string(),
            source,
            placement: self.placement(center),
            surface_points: self.surface_points,
            prep_seed: self.prep_seed,
        }
    }

    /// Expands the `scenes` entries into one recipe per (mesh, center), in
    /// entry order, then center order.
    pub fn recipes(&self) -> Result<Vec<SceneRecipe>, BenchError> {
        let mut out = Vec::new();
        for entry in &self.scenes {
            let meshes: Vec<(String, SceneSource)> = if entry == "suite" {
                shapes::suite()
                    .into_iter()
                    .map(|(n, _)| (n.to_string(), SceneSource::Suite { name: n.to_string() }))
                    .collect()
            } else if let Some(name) = entry.strip_prefix("suite:") {
                vec![(name.to_string(), SceneSource::Suite { name: name.to_string() })]
            } else {
                let path = PathBuf::from(entry);
                if path.is_dir() {
                    out.extend(self.cache_recipes(&path)?);
                    continue;
                }
                vec![(mesh_stem(&path), SceneSource::Mesh { path })]
            };
            for (mesh, source) in meshes {
                for c in &self.object_centers {
                    out.push(self.recipe(&mesh, source.clone(), *c));
                }
            }
        }
        Ok(out)
    }

    fn cache_recipes(&self, dir: &Path) -> Result<Vec<SceneRecipe>, BenchError> {
        let manifest = Manifest::read(dir)?;
        let mut out = Vec::new();
        for e in &manifest.entries {
            if !self.object_centers.contains(&e.center) {
                continue;
            }
            out.push(SceneRecipe {
                id: e.id.clone(),
                mesh: e.mesh.clone(),
                source: SceneSource::Cache {
                    path: dir.join(&e.file),
                },
                placement: manifest.placement(e.center),
                surface_points: manifest.surface_points,
                prep_seed: manifest.seed,
            });
        }
        Ok(out)
    }

    fn planner(&self, name: &str, seed: u64) -> Result<Box<dyn Planner>, BenchError> {
        let mut p: Box<dyn Planner> = if name == "greedy" {
            let mut cfg = self.greedy.clone();
            cfg.debug |= self.debug_candidates;
            Box::new(GreedyPlanner::new(cfg, seed))
        } else {
            by_name(name)?
        };
        p.reset(seed);
        Ok(p)
    }
}

pub(crate) fn mesh_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "mesh".into())
}

/// First line of every trace file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub scene: SceneRecipe,
    pub planner: String,
    pub seed: u64,
    pub views_budget: usize,
    pub tau: f64,
    pub recon_cell: f64,
    pub env: EnvConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub header: TraceHeader,
    pub steps: Vec<StepRecord>,
}

impl Trace {
    pub fn to_jsonl(&self) -> Result<String, BenchError> {
        let mut s = serde_json::to_string(&self.header)?;
        s.push('\n');
        for r in &self.steps {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        Ok(s)
    }

    pub fn from_jsonl(text: &str) -> Result<Trace, BenchError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines.next().ok_or_else(|| BenchError::Trace("empty trace".into()))?;
        let header = serde_json::from_str(header).map_err(|e| BenchError::Trace(format!("header: {e}")))?;
        let steps = lines
            .enumerate()
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| BenchError::Trace(format!("line {}: {e}", i + 2))))
            .collect::<Result<_, _>>()?;
        Ok(Trace { header, steps })
    }

    pub fn read(path: &Path) -> Result<Trace, BenchError> {
        Trace::from_jsonl(&fs::read_to_string(path).map_err(io_err(path))?)
    }
}

/// Per-view measurements of one episode. Index 0 is the reset capture.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeCurves {
    pub cr: Vec<f64>,
    pub face_coverage: Vec<f64>,
    pub reward: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct EpisodeOutcome {
    pub ordinal: usize,
    pub scene_id: String,
    pub mesh: String,
    pub planner: String,
    pub center: [f64; 2],
    pub seed: u64,
    pub curves: EpisodeCurves,
    pub cd_cm: Option<f64>,
    pub error: Option<String>,
    pub trace: Trace,
    pub candidates: Vec<String>,
    pub env_seconds: f64,
    pub wall_seconds: f64,
    pub recon_points: usize,
}

impl EpisodeOutcome {
    pub fn final_cr(&self) -> Option<f64> {
        self.curves.cr.last().copied()
    }

    pub fn auc(&self) -> Option<f64> {
        auc(&self.curves.cr).ok()
    }

    /// Environment steps per second of wall-clock time spent stepping.
    pub fn env_fps(&self) -> f64 {
        let steps = self.curves.cr.len().saturating_sub(1);
        if self.env_seconds > 0.0 {
            steps as f64 / self.env_seconds
        } else {
            0.0
        }
    }

    /// Views per second including planning.
    pub fn episode_fps(&self) -> f64 {
        if self.wall_seconds > 0.0 {
            self.curves.cr.len() as f64 / self.wall_seconds
        } else {
            0.0
        }
    }
}

/// Runs one episode to the view budget, accumulating the thinned
/// reconstruction cloud. Planner or environment failures end the episode
/// early and are reported in `error`.
pub fn run_episode(
    spec: &BenchSpec,
    recipe: &SceneRecipe,
    scene: Arc<Scene>,
    planner_name: &str,
    seed: u64,
    ordinal: usize,
) -> Result<EpisodeOutcome, BenchError> {
    let tau = spec.tau();
    let mut cfg = spec.env.clone();
    cfg.stop_at_target = false;
    let header = TraceHeader {
        scene: recipe.clone(),
        planner: planner_name.to_string(),
        seed,
        views_budget: spec.views_budget,
        tau,
        recon_cell: spec.recon_cell,
        env: cfg.clone(),
    };
    let wall = Instant::now();
    let mut planner = spec.planner(planner_name, seed)?;
    let mut env = Environment::new(scene.clone(), cfg)?;
    let mut tracker = CoverageTracker::new(scene.gt.surface_points(), tau)?;
    let mut recon = ReconCloud::new(spec.recon_cell);

    let t = Instant::now();
    let obs = env.reset(seed)?;
    let mut env_seconds = t.elapsed().as_secs_f64();
    tracker.add(recon.extend(&obs.points));
    let mut curves = EpisodeCurves {
        cr: vec![tracker.ratio()],
        face_coverage: vec![env.face_coverage()?],
        reward: vec![0.0],
    };
    let mut steps = Vec::new();
    let mut candidates = Vec::new();
    let mut error = None;

    for _ in 1..spec.views_budget {
        let decision = match PlanContext::from_env(&env).map_err(PlannerError::from).and_then(|ctx| planner.plan(&ctx)) {
            Ok(d) => d,
            Err(e) => {
                error = Some(format!("planner: {e}"));
                break;
            }
        };
        if let Some(scores) = &decision.debug {
            candidates.push(serde_json::to_string(&serde_json::json!({
                "ordinal": ordinal,
                "step": env.step_index()?,
                "lookat": [decision.lookat.x, decision.lookat.y, decision.lookat.z],
                "candidates": scores,
            }))?);
        }
        let t = Instant::now();
        let r = match env.step(decision.action, decision.lookat) {
            Ok(r) => r,
            Err(e) => {
                error = Some(format!("env: {e}"));
                break;
            }
        };
        env_seconds += t.elapsed().as_secs_f64();
        tracker.add(recon.extend(&r.obs.points));
        curves.cr.push(tracker.ratio());
        curves.face_coverage.push(r.face_coverage);
        curves.reward.push(r.reward);
        steps.push(r.record(decision.action));
    }

    let cd_cm = if error.is_none() {
        Some(meters_to_cm(chamfer_distance(recon.points(), scene.gt.surface_points())?))
    } else {
        None
    };
    Ok(EpisodeOutcome {
        ordinal,
        scene_id: recipe.id.clone(),
        mesh: recipe.mesh.clone(),
        planner: planner_name.to_string(),
        center: recipe.placement.object_center,
        seed,
        curves,
        cd_cm,
        error,
        trace: Trace { header, steps },
        candidates,
        env_seconds,
        wall_seconds: wall.elapsed().as_secs_f64(),
        recon_points: recon.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRow {
    pub ordinal: usize,
    pub scene_id: String,
    pub mesh: String,
    pub planner: String,
    pub center_x: f64,
    pub center_y: f64,
    pub seed: u64,
    pub step: usize,
    pub cr: f64,
    pub face_coverage: f64,
    pub reward: f64,
    pub auc: f64,
    pub tau: f64,
    pub fov_deg: f64,
    pub g: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub ordinal: usize,
    pub scene_id: String,
    pub mesh: String,
    pub planner: String,
    pub planner_origin: &'static str,
    pub center_x: f64,
    pub center_y: f64,
    pub seed: u64,
    pub views: usize,
    pub cr: Option<f64>,
    pub cd_cm: Option<f64>,
    pub auc: Option<f64>,
    pub face_coverage: Option<f64>,
    pub tau: f64,
    pub fov_deg: f64,
    pub g: usize,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mesh: String,
    pub planner: String,
    pub planner_origin: &'static str,
    pub centers: usize,
    pub episodes: usize,
    pub failed: usize,
    pub cr: f64,
    pub cd_cm: f64,
    pub auc: f64,
    pub face_coverage: f64,
    /// Max minus min of the per-center mean CR.
    pub cr_spread: f64,
    pub tau: f64,
    pub fov_deg: f64,
    pub g: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub ordinal: usize,
    pub scene_id: String,
    pub planner: String,
    pub seed: u64,
    pub env_fps: f64,
    pub episode_fps: f64,
    pub wall_seconds: f64,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Mean over centers of the per-center means over seeds, per (mesh, planner)
/// in first-appearance order. Failed episodes are counted but not averaged.
/// Where a planner's view-selection rule comes from, carried in every
/// result row. The greedy oracle's candidate scheme belongs to this crate.
pub fn planner_origin(name: &str) -> &'static str {
    match name {
        "greedy" => "scripted-oracle",
        "random" | "frontier" => "baseline",
        n if n.starts_with("extern:") => "external",
        _ => "unknown",
    }
}

pub fn summarize(rows: &[EpisodeRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<((String, String), Vec<&EpisodeRow>)> = Vec::new();
    for r in rows {
        let key = (r.mesh.clone(), r.planner.clone());
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|((mesh, planner), eps)| {
            let ok: Vec<&EpisodeRow> = eps.iter().copied().filter(|r| r.error.is_none()).collect();
            let mut centers: Vec<[f64; 2]> = Vec::new();
            for r in &ok {
                let c = [r.center_x, r.center_y];
                if !centers.contains(&c) {
                    centers.push(c);
                }
            }
            let per_center = |f: &dyn Fn(&EpisodeRow) -> Option<f64>| -> Vec<f64> {
                centers
                    .iter()
                    .map(|c| {
                        let v: Vec<f64> = ok
                            .iter()
                            .filter(|r| [r.center_x, r.center_y] == *c)
                            .filter_map(|r| f(r))
                            .collect();
                        mean(&v)
                    })
                    .collect()
            };
            let cr = per_center(&|r| r.cr);
            let spread = cr.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - cr.iter().cloned().fold(f64::INFINITY, f64::min);
            let first = eps[0];
            SummaryRow {
                mesh,
                planner_origin: planner_origin(&planner),
                planner,
                centers: centers.len(),
                episodes: eps.len(),
                failed: eps.len() - ok.len(),
                cr: mean(&cr),
                cd_cm: mean(&per_center(&|r| r.cd_cm)),
                auc: mean(&per_center(&|r| r.auc)),
                face_coverage: mean(&per_center(&|r| r.face_coverage)),
                cr_spread: if centers.is_empty() { f64::NAN } else { spread },
                tau: first.tau,
                fov_deg: first.fov_deg,
                g: first.g,
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub episodes: Vec<EpisodeOutcome>,
    pub episode_rows: Vec<EpisodeRow>,
    pub summary: Vec<SummaryRow>,
    /// Scenes that could not be built, with the reason.
    pub scene_failures: Vec<(String, String)>,
}

impl RunReport {
    pub fn failures(&self) -> usize {
        self.scene_failures.len() + self.episode_rows.iter().filter(|r| r.error.is_some()).count()
    }
}

struct Job<'a> {
    ordinal: usize,
    recipe: &'a SceneRecipe,
    scene: Arc<Scene>,
    planner: &'a str,
    seed: u64,
}

/// Runs every (scene, planner, seed) episode. Jobs run on the rayon pool and
/// are collected in ordinal order, so outputs do not depend on scheduling.
pub fn run(spec: &BenchSpec) -> Result<RunReport, BenchError> {
    spec.validate()?;
    let recipes = spec.recipes()?;
    if recipes.is_empty() {
        return Err(BenchError::Config("no scenes matched the requested centers".into()));
    }
    let mut scenes = Vec::new();
    let mut scene_failures = Vec::new();
    for r in &recipes {
        match r.build(&spec.env) {
            Ok(s) => scenes.push((r, Arc::new(s))),
            Err(e) => {
                log::warn!("scene {}: {e}", r.id);
                scene_failures.push((r.id.clone(), e.to_string()));
            }
        }
    }
    let mut jobs = Vec::new();
    for (recipe, scene) in &scenes {
        for planner in &spec.planners {
            for &seed in &spec.seeds {
                jobs.push(Job {
                    ordinal: jobs.len(),
                    recipe,
                    scene: scene.clone(),
                    planner,
                    seed,
                });
            }
        }
    }
    let episodes = jobs
        .par_iter()
        .map(|j| {
            let out = run_episode(spec, j.recipe, j.scene.clone(), j.planner, j.seed, j.ordinal);
            if let Ok(o) = &out {
                log::info!(
                    "{} {} seed {}: CR {:.3} after {} views",
                    o.scene_id,
                    o.planner,
                    o.seed,
                    o.final_cr().unwrap_or(0.0),
                    o.curves.cr.len()
                );
            }
            out
        })
        .collect::<Result<Vec<_>, _>>()?;
    let episode_rows: Vec<EpisodeRow> = episodes.iter().map(|e| episode_row(spec, e)).collect();
    let summary = summarize(&episode_rows);
    Ok(RunReport {
        episodes,
        episode_rows,
        summary,
        scene_failures,
    })
}

fn episode_row(spec: &BenchSpec, e: &EpisodeOutcome) -> EpisodeRow {
    let ok = e.error.is_none();
    EpisodeRow {
        ordinal: e.ordinal,
        scene_id: e.scene_id.clone(),
        mesh: e.mesh.clone(),
        planner: e.planner.clone(),
        planner_origin: planner_origin(&e.planner),
        center_x: e.center[0],
        center_y: e.center[1],
        seed: e.seed,
        views: e.curves.cr.len(),
        cr: e.final_cr().filter(|_| ok),
        cd_cm: e.cd_cm,
        auc: e.auc().filter(|_| ok),
        face_coverage: e.curves.face_coverage.last().copied().filter(|_| ok),
        tau: spec.tau(),
        fov_deg: spec.env.vertical_fov.to_degrees(),
        g: spec.env.resolution,
        error: e.error.clone(),
    }
}

fn step_rows(spec: &BenchSpec, e: &EpisodeOutcome) -> Vec<StepRow> {
    (0..e.curves.cr.len())
        .map(|i| StepRow {
            ordinal: e.ordinal,
            scene_id: e.scene_id.clone(),
            mesh: e.mesh.clone(),
            planner: e.planner.clone(),
            center_x: e.center[0],
            center_y: e.center[1],
            seed: e.seed,
            step: i,
            cr: e.curves.cr[i],
            face_coverage: e.curves.face_coverage[i],
            reward: e.curves.reward[i],
            auc: auc(&e.curves.cr[..=i]).unwrap_or(0.0),
            tau: spec.tau(),
            fov_deg: spec.env.vertical_fov.to_degrees(),
            g: spec.env.resolution,
        })
        .collect()
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn write_text(path: &Path, text: &str) -> Result<(), BenchError> {
    let mut f = BufWriter::new(fs::File::create(path).map_err(io_err(path))?);
    f.write_all(text.as_bytes()).map_err(io_err(path))?;
    f.flush().map_err(io_err(path))
}

/// Trace file name for an episode.
pub fn trace_name(e: &EpisodeOutcome) -> String {
    let safe: String = e
        .scene_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect();
    let planner: String = e.planner.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '_' }).collect();
    format!("{:04}_{safe}_{planner}_s{}.jsonl", e.ordinal, e.seed)
}

/// Writes `steps.csv`, `episodes.csv`, `summary.csv`, `timing.csv`, the
/// resolved run configuration and, when enabled, traces and candidate dumps. Everything
/// except `timing.csv` is a pure function of the configuration.
pub fn write_outputs(spec: &BenchSpec, report: &RunReport) -> Result<(), BenchError> {
    let out = &spec.output_dir;
    fs::create_dir_all(out).map_err(io_err(out))?;
    write_text(&out.join("spec.json"), &serde_json::to_string_pretty(spec)?)?;
    let steps: Vec<StepRow> = report.episodes.iter().flat_map(|e| step_rows(spec, e)).collect();
    write_csv(&out.join("steps.csv"), &steps)?;
    write_csv(&out.join("episodes.csv"), &report.episode_rows)?;
    write_csv(&out.join("summary.csv"), &report.summary)?;
    let timing: Vec<TimingRow> = report
        .episodes
        .iter()
        .map(|e| TimingRow {
            ordinal: e.ordinal,
            scene_id: e.scene_id.clone(),
            planner: e.planner.clone(),
            seed: e.seed,
            env_fps: e.env_fps(),
            episode_fps: e.episode_fps(),
            wall_seconds: e.wall_seconds,
        })
        .collect();
    write_csv(&out.join("timing.csv"), &timing)?;
    if !report.scene_failures.is_empty() {
        let text: String = report
            .scene_failures
            .iter()
            .map(|(id, e)| format!("{id}\t{e}\n"))
            .collect();
        write_text(&out.join("scene_failures.txt"), &text)?;
    }
    if spec.write_traces {
        let dir = out.join("traces");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for e in &report.episodes {
            write_text(&dir.join(trace_name(e)), &e.trace.to_jsonl()?)?;
        }
    }
    if spec.debug_candidates {
        let dir = out.join("candidates");
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for e in report.episodes.iter().filter(|e| !e.candidates.is_empty()) {
            let mut text = e.candidates.join("\n");
            text.push('\n');
            write_text(&dir.join(trace_name(e)), &text)?;
        }
    }
    Ok(())
}
