//! View planners: random, frontier look-at, greedy candidate oracle and an
//! external process reached over TCP.

mod external;
mod greedy;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{Intrinsics, Pose};
use crate::env::{unscale_position, EnvConfig, EnvError, Environment};
use crate::scene::Scene;
use crate::voxel_grid::{Face, FaceMask, GridError, VoxelGrid, VoxelIndex, VoxelState};
use crate::Point;

pub use external::ExternPlanner;
pub use greedy::{candidate_set, fibonacci_directions, plan_greedy_oracle, score_candidates, CandidateSet, GreedyConfig};

#[derive(Debug, Error)]
pub enum PlannerError {
    #[error("no free voxel below the height cap")]
    NoFreeVoxel,
    #[error("unknown planner {0:?}")]
    UnknownPlanner(String),
    #[error("external planner: {0}")]
    External(String),
    #[error(transparent)]
    Grid(GridError),
    #[error(transparent)]
    Env(#[from] EnvError),
}

impl From<GridError> for PlannerError {
    fn from(e: GridError) -> Self {
        match e {
            GridError::NoFreeVoxel { .. } => PlannerError::NoFreeVoxel,
            e => PlannerError::Grid(e),
        }
    }
}

/// Everything a planner may look at when choosing the next view.
#[derive(Clone, Copy, Debug)]
pub struct PlanContext<'a> {
    pub grid: &'a VoxelGrid,
    pub scene: &'a Scene,
    pub cfg: &'a EnvConfig,
    pub intrinsics: &'a Intrinsics,
    pub pose: Pose,
    pub height_cap: f64,
    pub step: usize,
}

impl<'a> PlanContext<'a> {
    pub fn from_env(env: &'a Environment) -> Result<PlanContext<'a>, EnvError> {
        Ok(PlanContext {
            grid: env.grid()?,
            scene: env.scene(),
            cfg: env.config(),
            intrinsics: env.intrinsics(),
            pose: env.pose()?,
            height_cap: env.height_cap()?,
            step: env.step_index()?,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub index: usize,
    pub position: [f64; 3],
    pub score: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PlannerDecision {
    /// Normalized position action in `[-1, 1]³`.
    pub action: [f64; 3],
    pub lookat: Point,
    /// Set when the planner could not apply its own rule and fell back to
    /// a random free voxel.
    pub fallback: bool,
    pub debug: Option<Vec<CandidateScore>>,
}

pub trait Planner: Send {
    fn name(&self) -> String;
    /// Reseeds any internal randomness at episode start.
    fn reset(&mut self, _seed: u64) {}
    fn plan(&mut self, ctx: &PlanContext) -> Result<PlannerDecision, PlannerError>;
}

/// Planner by CLI name: `random`, `frontier`, `greedy` or `extern:<addr>`.
pub fn by_name(name: &str) -> Result<Box<dyn Planner>, PlannerError> {
    match name {
        "random" => Ok(Box::new(RandomPlanner::new(0))),
        "frontier" => Ok(Box::new(FrontierPlanner::new(0))),
        "greedy" => Ok(Box::new(GreedyPlanner::new(GreedyConfig::default(), 0))),
        _ => match name.strip_prefix("extern:") {
            Some(addr) if !addr.is_empty() => Ok(Box::new(ExternPlanner::new(addr))),
            _ => Err(PlannerError::UnknownPlanner(name.to_string())),
        },
    }
}

fn qualifies(grid: &VoxelGrid, v: VoxelIndex, cap: f64, floor: f64) -> bool {
    let z = grid.frame().center(v).z;
    grid.is_free(v) && z <= cap && z >= floor
}

/// Uniform free voxel center between the floor and the cap, looking at
/// `lookat`.
pub fn plan_random(
    grid: &VoxelGrid,
    height_cap: f64,
    floor: f64,
    scene_size: f64,
    lookat: Point,
    rng: &mut ChaCha8Rng,
) -> Result<PlannerDecision, PlannerError> {
    let frame = grid.frame();
    let valid: Vec<VoxelIndex> = frame
        .indices()
        .filter(|&v| qualifies(grid, v, height_cap, floor) && frame.center(v) != lookat)
        .collect();
    if valid.is_empty() {
        return Err(PlannerError::NoFreeVoxel);
    }
    let c = frame.center(valid[rng.gen_range(0..valid.len())]);
    Ok(PlannerDecision {
        action: unscale_position(&c, scene_size),
        lookat,
        fallback: false,
        debug: None,
    })
}

/// Unseen faces of an observed occupied voxel that open onto non-occupied
/// space (or leave the grid).
pub fn open_unseen_faces(grid: &VoxelGrid, v: VoxelIndex) -> FaceMask {
    if grid.state(v) != VoxelState::Occupied {
        return FaceMask::EMPTY;
    }
    let seen = grid.faces(v);
    Face::ALL.iter().fold(FaceMask::EMPTY, |m, &f| {
        let open = grid
            .frame()
            .neighbor(v, f)
            .map_or(true, |n| grid.state(n) != VoxelState::Occupied);
        if open && !seen.contains(f) {
            m.with(f)
        } else {
            m
        }
    })
}

/// Unseen-face-weighted centroid of the observed surface, with per-face
/// totals. `None` when no observed voxel has an open unseen face.
pub fn frontier(grid: &VoxelGrid) -> Option<(Point, [u64; 6])> {
    let frame = grid.frame();
    let mut acc = Point::origin().coords;
    let mut per_face = [0u64; 6];
    let mut weight = 0u64;
    for v in frame.indices() {
        let m = open_unseen_faces(grid, v);
        if m.is_empty() {
            continue;
        }
        let w = m.count() as u64;
        acc += frame.center(v).coords * w as f64;
        weight += w;
        for f in m.faces() {
            per_face[f.index()] += 1;
        }
    }
    (weight > 0).then(|| (Point::from(acc / weight as f64), per_face))
}

/// Stand off from the frontier centroid along the face direction with the
/// most unseen faces, then project onto collision-free space.
pub fn plan_frontier(
    ctx: &PlanContext,
    standoff: f64,
    rng: &mut ChaCha8Rng,
) -> Result<PlannerDecision, PlannerError> {
    let size = ctx.cfg.scene_size;
    let floor = ctx.cfg.floor_clearance;
    let Some((lookat, per_face)) = frontier(ctx.grid) else {
        let mut d = plan_random(
            ctx.grid,
            ctx.height_cap,
            floor,
            size,
            ctx.scene.object_aabb_center(),
            rng,
        )?;
        d.fallback = true;
        return Ok(d);
    };
    let best = (0..6).fold(0, |b, f| if per_face[f] > per_face[b] { f } else { b });
    let n = Face::ALL[best].normal();
    let half = size / 2.0;
    let mut p = lookat + n * standoff;
    p.x = p.x.clamp(-half, half);
    p.y = p.y.clamp(-half, half);
    p.z = p.z.clamp(floor, ctx.height_cap.max(floor));
    let a = ctx.grid.nearest_collision_free(&p, ctx.height_cap, floor)?;
    if a == lookat {
        let mut d = plan_random(ctx.grid, ctx.height_cap, floor, size, lookat, rng)?;
        d.fallback = true;
        return Ok(d);
    }
    Ok(PlannerDecision {
        action: unscale_position(&a, size),
        lookat,
        fallback: false,
        debug: None,
    })
}

pub struct RandomPlanner {
    rng: ChaCha8Rng,
}

impl RandomPlanner {
    pub fn new(seed: u64) -> Self {
        RandomPlanner {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Planner for RandomPlanner {
    fn name(&self) -> String {
        "random".into()
    }

    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn plan(&mut self, ctx: &PlanContext) -> Result<PlannerDecision, PlannerError> {
        plan_random(
            ctx.grid,
            ctx.height_cap,
            ctx.cfg.floor_clearance,
            ctx.cfg.scene_size,
            ctx.scene.object_aabb_center(),
            &mut self.rng,
        )
    }
}

pub struct FrontierPlanner {
    /// Meters; defaults to the object's bounding radius.
    pub standoff: Option<f64>,
    rng: ChaCha8Rng,
}

impl FrontierPlanner {
    pub fn new(seed: u64) -> Self {
        FrontierPlanner {
            standoff: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Planner for FrontierPlanner {
    fn name(&self) -> String {
        "frontier".into()
    }

    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn plan(&mut self, ctx: &PlanContext) -> Result<PlannerDecision, PlannerError> {
        let d = self.standoff.unwrap_or_else(|| ctx.scene.object_radius());
        plan_frontier(ctx, d, &mut self.rng)
    }
}

pub struct GreedyPlanner {
    pub cfg: GreedyConfig,
    rng: ChaCha8Rng,
}

impl GreedyPlanner {
    pub fn new(cfg: GreedyConfig, seed: u64) -> Self {
        GreedyPlanner {
            cfg,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl Planner for GreedyPlanner {
    fn name(&self) -> String {
        "greedy".into()
    }

    fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn plan(&mut self, ctx: &PlanContext) -> Result<PlannerDecision, PlannerError> {
        plan_greedy_oracle(ctx, &self.cfg, &mut self.rng)
    }
}
