//! The stepping environment.
//!
//! A step takes a normalized position action and a look-at point, projects
//! the position onto the nearest collision-free location below the current
//! height cap, captures depth and gray images from there, fuses them into
//! the voxel belief and scores the newly revealed faces.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{render, unproject, CameraError, DepthImage, GrayImage, Intrinsics, Pose};
use crate::scene::{gt_lookat, Scene, SceneError};
use crate::voxel_grid::{GridError, GridFrame, VoxelGrid, VoxelIndex};
use crate::Point;

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("episode has terminated; call reset")]
    EpisodeDone,
    #[error("environment has not been reset")]
    NotReset,
    #[error("non-finite action or look-at")]
    NonFinite,
    #[error("no collision-free start position below the height cap")]
    NoStart,
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

/// Height cap over the episode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum HeightSchedule {
    /// Piecewise-constant caps: `(from_step, cap_m)` pairs with increasing steps.
    Steps { caps: Vec<(usize, f64)> },
    /// One cap per episode, drawn uniformly between the start height and `max_cap`.
    TrainingRandom { max_cap: f64 },
}

impl Default for HeightSchedule {
    fn default() -> Self {
        HeightSchedule::Steps {
            caps: vec![(0, 10.0), (40, 5.0), (45, 2.0)],
        }
    }
}

impl HeightSchedule {
    /// Cap for a fixed schedule; `None` for the randomized mode.
    pub fn cap_at(&self, step: usize) -> Option<f64> {
        match self {
            HeightSchedule::Steps { caps } => caps
                .iter()
                .take_while(|(from, _)| *from <= step)
                .last()
                .map(|(_, c)| *c),
            HeightSchedule::TrainingRandom { .. } => None,
        }
    }

    fn initial_cap(&self) -> f64 {
        match self {
            HeightSchedule::Steps { caps } => caps[0].1,
            HeightSchedule::TrainingRandom { max_cap } => *max_cap,
        }
    }

    fn validate(&self) -> Result<(), EnvError> {
        match self {
            HeightSchedule::Steps { caps } => {
                if caps.first().map(|c| c.0) != Some(0) {
                    return Err(EnvError::Config("height schedule must start at step 0".into()));
                }
                for w in caps.windows(2) {
                    if w[1].0 <= w[0].0 || w[1].1 > w[0].1 {
                        return Err(EnvError::Config(
                            "height schedule steps must increase and caps must not".into(),
                        ));
                    }
                }
                if caps.iter().any(|c| !c.1.is_finite()) {
                    return Err(EnvError::Config("non-finite height cap".into()));
                }
            }
            HeightSchedule::TrainingRandom { max_cap } => {
                if !max_cap.is_finite() {
                    return Err(EnvError::Config("non-finite height cap".into()));
                }
            }
        }
        Ok(())
    }
}

/// Piecewise cap of the fixed schedule at `step`.
pub fn height_cap(step: usize, cfg: &EnvConfig) -> Option<f64> {
    cfg.height_schedule.cap_at(step)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardMode {
    /// Newly seen voxel faces.
    #[default]
    Face,
    /// Newly occupied voxels, ignoring faces.
    Point,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub resolution: usize,
    pub width: usize,
    pub height: usize,
    pub scene_size: f64,
    pub max_steps: usize,
    pub face_target: f64,
    /// End the episode as soon as `face_target` is reached.
    pub stop_at_target: bool,
    pub coverage_scale: f64,
    pub penalty: f64,
    /// Discount factor for external trainers; the environment never reads it.
    pub gamma_doc: f64,
    pub height_schedule: HeightSchedule,
    pub floor_clearance: f64,
    pub seed: u64,
    /// Radians.
    pub vertical_fov: f64,
    /// Defaults to the scene diagonal.
    pub max_range: Option<f64>,
    pub reward_mode: RewardMode,
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig {
            resolution: 20,
            width: 300,
            height: 300,
            scene_size: 20.0,
            max_steps: 50,
            face_target: 0.9,
            stop_at_target: true,
            coverage_scale: 0.3,
            penalty: 0.01,
            gamma_doc: 0.1,
            height_schedule: HeightSchedule::default(),
            floor_clearance: 0.0,
            seed: 0,
            vertical_fov: PI / 3.0,
            max_range: None,
            reward_mode: RewardMode::Face,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if !(self.face_target > 0.0 && self.face_target <= 1.0) {
            return Err(EnvError::Config(format!("face_target {}", self.face_target)));
        }
        if self.max_steps == 0 {
            return Err(EnvError::Config("max_steps must be at least 1".into()));
        }
        if !(self.scene_size > 0.0) || self.resolution == 0 {
            return Err(EnvError::Config("scene size and resolution must be positive".into()));
        }
        if !(self.coverage_scale >= 0.0 && self.penalty >= 0.0) {
            return Err(EnvError::Config("coverage_scale and penalty must be non-negative".into()));
        }
        if self.max_range.is_some_and(|r| !(r > 0.0)) {
            return Err(EnvError::Config("max_range must be positive".into()));
        }
        self.height_schedule.validate()?;
        self.intrinsics()?;
        Ok(())
    }

    pub fn intrinsics(&self) -> Result<Intrinsics, EnvError> {
        Ok(Intrinsics::new(self.width, self.height, self.vertical_fov)?)
    }

    pub fn frame(&self) -> Result<GridFrame, EnvError> {
        Ok(GridFrame::scene_volume(self.resolution, self.scene_size)?)
    }

    pub fn max_range(&self) -> f64 {
        self.max_range.unwrap_or(self.scene_size * 3f64.sqrt())
    }

    pub fn voxel_size(&self) -> f64 {
        self.scene_size / self.resolution as f64
    }
}

/// Maps `[-1,1]³` onto the scene volume: x, y over `±size/2`, z over
/// `[0, size]`. Out-of-range components are clamped; the flag reports it.
pub fn scale_action(a: [f64; 3], scene_size: f64) -> Result<(Point, bool), EnvError> {
    if !a.iter().all(|v| v.is_finite()) {
        return Err(EnvError::NonFinite);
    }
    let clamped = a.map(|v| v.clamp(-1.0, 1.0));
    let half = scene_size / 2.0;
    let p = Point::new(clamped[0] * half, clamped[1] * half, (clamped[2] + 1.0) * half);
    Ok((p, clamped != a))
}

/// Inverse of [`scale_action`] for in-bounds points.
pub fn unscale_position(p: &Point, scene_size: f64) -> [f64; 3] {
    let half = scene_size / 2.0;
    [p.x / half, p.y / half, p.z / half - 1.0]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Observation {
    pub gray: GrayImage,
    pub depth: DepthImage,
    /// `(x, y, z, pitch, yaw, H)` with `H` the cap for the next step.
    pub vector: [f64; 6],
    pub grid: VoxelGrid,
    pub lookat: Point,
    pub pose: Pose,
    /// World points unprojected from `depth`.
    pub points: Vec<Point>,
}

impl Observation {
    /// Ten channels per voxel: occupancy, positional encoding, six face bits.
    pub fn grid_channels(&self) -> Vec<f32> {
        self.grid.to_channels()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Budget,
    Target,
    Error,
}

/// Per-step bookkeeping beyond the reward.
#[derive(Clone, Debug, PartialEq)]
pub struct StepInfo {
    pub step: usize,
    /// Scaled action before projection.
    pub target: Point,
    /// Projected capture position.
    pub a_prime: Point,
    pub height_cap: f64,
    pub action_clamped: bool,
    pub in_non_free: bool,
    pub above_cap: bool,
    pub newly_occupied: usize,
    pub skipped_coincident: Vec<VoxelIndex>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub obs: Observation,
    pub reward: f64,
    pub coverage_reward: f64,
    pub constraint_penalty: f64,
    /// `true` when the action was collision-free (positive reward allowed).
    pub m_col: bool,
    pub newly_seen_faces: usize,
    pub face_coverage: f64,
    pub terminated: bool,
    pub termination_reason: Option<TerminationReason>,
    pub info: StepInfo,
}

/// One line of an episode trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub action: [f64; 3],
    pub lookat: [f64; 3],
    pub target: [f64; 3],
    pub a_prime: [f64; 3],
    pub yaw: f64,
    pub pitch: f64,
    pub height_cap: f64,
    pub reward: f64,
    pub coverage_reward: f64,
    pub constraint_penalty: f64,
    pub m_col: bool,
    pub newly_seen_faces: usize,
    pub face_coverage: f64,
    pub terminated: bool,
    pub termination_reason: Option<TerminationReason>,
}

fn arr(p: &Point) -> [f64; 3] {
    [p.x, p.y, p.z]
}

impl StepResult {
    pub fn record(&self, action: [f64; 3]) -> StepRecord {
        StepRecord {
            step: self.info.step,
            action,
            lookat: arr(&self.obs.lookat),
            target: arr(&self.info.target),
            a_prime: arr(&self.info.a_prime),
            yaw: self.obs.pose.yaw,
            pitch: self.obs.pose.pitch,
            height_cap: self.info.height_cap,
            reward: self.reward,
            coverage_reward: self.coverage_reward,
            constraint_penalty: self.constraint_penalty,
            m_col: self.m_col,
            newly_seen_faces: self.newly_seen_faces,
            face_coverage: self.face_coverage,
            terminated: self.terminated,
            termination_reason: self.termination_reason,
        }
    }
}

#[derive(Clone, Debug)]
struct Episode {
    grid: VoxelGrid,
    pose: Pose,
    step: usize,
    done: bool,
    random_cap: Option<f64>,
    face_coverage: f64,
}

/// One single-threaded environment instance over a prepared scene.
#[derive(Clone, Debug)]
pub struct Environment {
    cfg: EnvConfig,
    scene: Arc<Scene>,
    intrinsics: Intrinsics,
    episode: Option<Episode>,
}

struct Capture {
    depth: DepthImage,
    gray: GrayImage,
    points: Vec<Point>,
}

impl Environment {
    pub fn new(scene: Arc<Scene>, cfg: EnvConfig) -> Result<Environment, EnvError> {
        cfg.validate()?;
        if scene.gt.frame() != &cfg.frame()? {
            return Err(EnvError::Config(
                "scene ground truth was prepared for a different grid".into(),
            ));
        }
        let intrinsics = cfg.intrinsics()?;
        Ok(Environment {
            cfg,
            scene,
            intrinsics,
            episode: None,
        })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn scene(&self) -> &Arc<Scene> {
        &self.scene
    }

    pub fn intrinsics(&self) -> &Intrinsics {
        &self.intrinsics
    }

    fn episode(&self) -> Result<&Episode, EnvError> {
        self.episode.as_ref().ok_or(EnvError::NotReset)
    }

    pub fn grid(&self) -> Result<&VoxelGrid, EnvError> {
        Ok(&self.episode()?.grid)
    }

    pub fn pose(&self) -> Result<Pose, EnvError> {
        Ok(self.episode()?.pose)
    }

    /// Number of steps taken since reset.
    pub fn step_index(&self) -> Result<usize, EnvError> {
        Ok(self.episode()?.step)
    }

    pub fn is_done(&self) -> bool {
        self.episode.as_ref().map_or(true, |e| e.done)
    }

    pub fn face_coverage(&self) -> Result<f64, EnvError> {
        Ok(self.episode()?.face_coverage)
    }

    /// Height cap in force at `step`.
    pub fn height_cap_at(&self, step: usize) -> Result<f64, EnvError> {
        let ep = self.episode()?;
        Ok(ep
            .random_cap
            .or_else(|| self.cfg.height_schedule.cap_at(step))
            .unwrap_or_else(|| self.cfg.height_schedule.initial_cap()))
    }

    /// Cap for the next step (the last cap once the budget is spent).
    pub fn height_cap(&self) -> Result<f64, EnvError> {
        let s = self.step_index()?;
        self.height_cap_at(s.min(self.cfg.max_steps - 1))
    }

    /// Ground-truth look-at for the current belief.
    pub fn gt_lookat(&self) -> Result<Point, EnvError> {
        Ok(gt_lookat(&self.scene.gt, self.episode()?.grid.face_masks())?)
    }

    fn capture(&self, pose: &Pose) -> Capture {
        let (depth, gray) = render(&self.scene.bvh, pose, &self.intrinsics, self.cfg.max_range());
        let points = unproject(&depth, pose, &self.intrinsics);
        Capture { depth, gray, points }
    }

    fn observation(&self, cap: Capture, lookat: Point) -> Result<Observation, EnvError> {
        let ep = self.episode()?;
        let p = ep.pose.position;
        Ok(Observation {
            gray: cap.gray,
            depth: cap.depth,
            vector: [p.x, p.y, p.z, ep.pose.pitch, ep.pose.yaw, self.height_cap()?],
            grid: ep.grid.clone(),
            lookat,
            pose: ep.pose,
            points: cap.points,
        })
    }

    /// Starts a new episode from a uniformly random collision-free position
    /// looking at the object's bounding-box center.
    pub fn reset(&mut self, seed: u64) -> Result<Observation, EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gt = &self.scene.gt;
        let frame = *gt.frame();
        let cap0 = self.cfg.height_schedule.initial_cap();
        let floor = self.cfg.floor_clearance;
        let s = frame.voxel_size;
        let starts: Vec<VoxelIndex> = frame
            .indices()
            .filter(|&v| {
                let z = frame.center(v).z;
                gt.is_reachable(v) && z <= cap0 && z >= floor
            })
            .collect();
        if starts.is_empty() {
            return Err(EnvError::NoStart);
        }
        let v = starts[rng.gen_range(0..starts.len())];
        let c = frame.center(v);
        let mut p = Point::new(
            c.x + s * (rng.gen::<f64>() - 0.5),
            c.y + s * (rng.gen::<f64>() - 0.5),
            c.z + s * (rng.gen::<f64>() - 0.5),
        );
        p.z = p.z.clamp(floor, cap0);
        let random_cap = match self.cfg.height_schedule {
            HeightSchedule::TrainingRandom { max_cap } => Some(rng.gen_range(p.z..=max_cap)),
            HeightSchedule::Steps { .. } => None,
        };

        let lookat = self.scene.object_aabb_center();
        let pose = Pose::from_lookat(p, lookat)?;
        let mut grid = VoxelGrid::new(frame);
        let cap = self.capture(&pose);
        grid.carve_free_space(&cap.depth, &pose, &self.intrinsics);
        grid.integrate_observation(&cap.points, &pose.position);
        let face_coverage = grid.face_coverage(gt)?;
        self.episode = Some(Episode {
            grid,
            pose,
            step: 0,
            done: false,
            random_cap,
            face_coverage,
        });
        self.observation(cap, lookat)
    }

    pub fn step(&mut self, action: [f64; 3], lookat: Point) -> Result<StepResult, EnvError> {
        let ep = self.episode()?;
        if ep.done {
            return Err(EnvError::EpisodeDone);
        }
        if !lookat.coords.iter().all(|c| c.is_finite()) {
            return Err(EnvError::NonFinite);
        }
        let step = ep.step;
        let (target, action_clamped) = scale_action(action, self.cfg.scene_size)?;
        let h = self.height_cap_at(step)?;
        let floor = self.cfg.floor_clearance;

        let grid = &ep.grid;
        let in_non_free = !grid.is_free(grid.frame().clamped_voxel(&target));
        let above_cap = target.z > h;
        let m_col = !(in_non_free || above_cap);
        let a_prime = match grid.nearest_collision_free(&target, h, floor) {
            Ok(p) => p,
            Err(e) => {
                self.fail();
                return Err(e.into());
            }
        };
        let pose = match Pose::from_lookat(a_prime, lookat) {
            Ok(p) => p,
            Err(e) => {
                self.fail();
                return Err(e.into());
            }
        };

        let cap = self.capture(&pose);
        let ep = self.episode.as_mut().expect("checked above");
        ep.grid.carve_free_space(&cap.depth, &pose, &self.intrinsics);
        let report = ep.grid.integrate_observation(&cap.points, &pose.position);
        let n = self.scene.gt.frame().voxel_count() as f64;
        let gain = match self.cfg.reward_mode {
            RewardMode::Face => report.newly_seen_faces as f64 / (6.0 * n),
            RewardMode::Point => report.newly_occupied as f64 / n,
        };
        let coverage_reward = if m_col { gain * self.cfg.coverage_scale } else { 0.0 };
        let constraint_penalty = if coverage_reward == 0.0 || above_cap || in_non_free {
            -self.cfg.penalty
        } else {
            0.0
        };
        let face_coverage = ep.grid.face_coverage(&self.scene.gt)?;
        ep.face_coverage = face_coverage;
        ep.pose = pose;
        ep.step += 1;
        let reason = if self.cfg.stop_at_target && face_coverage >= self.cfg.face_target {
            Some(TerminationReason::Target)
        } else if ep.step >= self.cfg.max_steps {
            Some(TerminationReason::Budget)
        } else {
            None
        };
        ep.done = reason.is_some();

        let obs = self.observation(cap, lookat)?;
        Ok(StepResult {
            obs,
            reward: coverage_reward + constraint_penalty,
            coverage_reward,
            constraint_penalty,
            m_col,
            newly_seen_faces: report.newly_seen_faces,
            face_coverage,
            terminated: reason.is_some(),
            termination_reason: reason,
            info: StepInfo {
                step,
                target,
                a_prime,
                height_cap: h,
                action_clamped,
                in_non_free,
                above_cap,
                newly_occupied: report.newly_occupied,
                skipped_coincident: report.skipped_coincident,
            },
        })
    }

    fn fail(&mut self) {
        if let Some(ep) = self.episode.as_mut() {
            ep.done = true;
        }
    }
}
