//! Greedy candidate oracle: sample viewpoints on shells around the frontier,
//! score each by the faces a low-resolution probe would newly reveal, and
//! take the best.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{frontier, plan_random, CandidateScore, PlanContext, PlannerDecision, PlannerError};
use crate::camera::{render_depth, unproject, Intrinsics, Pose};
use crate::env::unscale_position;
use crate::scene::gt_lookat;
use crate::{Point, Vec3};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GreedyConfig {
    /// Shell radii as multiples of the object radius.
    pub radii: Vec<f64>,
    pub directions: usize,
    /// Probe image side, pixels.
    pub probe: usize,
    /// Attach per-candidate scores to each decision.
    pub debug: bool,
}

impl Default for GreedyConfig {
    fn default() -> Self {
        GreedyConfig {
            radii: vec![0.75, 1.0, 1.25],
            directions: 64,
            probe: 64,
            debug: false,
        }
    }
}

/// Near-uniform unit directions on a Fibonacci spiral.
pub fn fibonacci_directions(n: usize) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * i as f64;
            Vec3::new(r * a.cos(), r * a.sin(), z)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateSet {
    pub center: Point,
    /// Distinct collision-free positions in generation order.
    pub positions: Vec<Point>,
    /// Raw samples before projection and deduplication.
    pub generated: usize,
}

/// Shell samples around `center`, each moved to its nearest collision-free
/// point under the current grid and cap. Duplicates after projection and
/// positions coinciding with `center` are dropped.
pub fn candidate_set(ctx: &PlanContext, center: Point, cfg: &GreedyConfig) -> CandidateSet {
    let radius = ctx.scene.object_radius();
    let dirs = fibonacci_directions(cfg.directions);
    let mut positions: Vec<Point> = Vec::new();
    let mut generated = 0;
    for r in &cfg.radii {
        for d in &dirs {
            generated += 1;
            let c = center + d * (r * radius);
            let Ok(p) = ctx
                .grid
                .nearest_collision_free(&c, ctx.height_cap, ctx.cfg.floor_clearance)
            else {
                continue;
            };
            if p != center && !positions.contains(&p) {
                positions.push(p);
            }
        }
    }
    CandidateSet {
        center,
        positions,
        generated,
    }
}

/// Faces each position would newly reveal looking at `lookat`, rendered at
/// `probe × probe` with the environment's field of view.
pub fn score_candidates(ctx: &PlanContext, positions: &[Point], lookat: Point, probe: usize) -> Vec<usize> {
    let intr = Intrinsics {
        width: probe,
        height: probe,
        vertical_fov: ctx.intrinsics.vertical_fov,
    };
    let max_range = ctx.cfg.max_range();
    positions
        .par_iter()
        .map(|p| {
            let Ok(pose) = Pose::from_lookat(*p, lookat) else {
                return 0;
            };
            let depth = render_depth(&ctx.scene.bvh, &pose, &intr, max_range);
            ctx.grid.preview_new_faces(&unproject(&depth, &pose, &intr), p)
        })
        .collect()
}

pub fn plan_greedy_oracle(
    ctx: &PlanContext,
    cfg: &GreedyConfig,
    rng: &mut ChaCha8Rng,
) -> Result<PlannerDecision, PlannerError> {
    let center = frontier(ctx.grid)
        .map(|(c, _)| c)
        .or_else(|| gt_lookat(&ctx.scene.gt, ctx.grid.face_masks()).ok())
        .unwrap_or_else(|| ctx.scene.object_aabb_center());
    let set = candidate_set(ctx, center, cfg);
    if set.positions.is_empty() {
        let mut d = plan_random(
            ctx.grid,
            ctx.height_cap,
            ctx.cfg.floor_clearance,
            ctx.cfg.scene_size,
            center,
            rng,
        )?;
        d.fallback = true;
        return Ok(d);
    }
    let scores = score_candidates(ctx, &set.positions, center, cfg.probe);
    let best = (0..scores.len()).fold(0, |b, i| if scores[i] > scores[b] { i } else { b });
    let debug = cfg.debug.then(|| {
        set.positions
            .iter()
            .zip(&scores)
            .enumerate()
            .map(|(index, (p, s))| CandidateScore {
                index,
                position: [p.x, p.y, p.z],
                score: *s,
            })
            .collect()
    });
    Ok(PlannerDecision {
        action: unscale_position(&set.positions[best], ctx.cfg.scene_size),
        lookat: center,
        fallback: false,
        debug,
    })
}
