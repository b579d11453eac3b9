mod common;

use nbv_core::env::{height_cap, EnvConfig, EnvError, Environment};
use nbv_core::planners::{PlanContext, Planner, PlannerError, RandomPlanner};
use nbv_core::scene::{shapes, OBJECT_CENTERS};
use nbv_core::Point;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg() -> EnvConfig {
    EnvConfig {
        width: 64,
        height: 64,
        stop_at_target: false,
        ..EnvConfig::default()
    }
}

#[test]
fn fifty_episodes_are_monotone_and_sound() {
    let cfg = cfg();
    let suite = shapes::suite();
    let mut violations = Vec::new();
    for seed in 0..50u64 {
        let (name, mesh) = &suite[seed as usize % suite.len()];
        let center = OBJECT_CENTERS[seed as usize % OBJECT_CENTERS.len()];
        let scene = common::scene(name, mesh, center, &cfg, 500);
        let mut env = Environment::new(scene, cfg.clone()).unwrap();
        env.reset(seed).unwrap();
        let mut planner = RandomPlanner::new(seed);
        let mut coverage = env.face_coverage().unwrap();
        while !env.is_done() {
            let before = env.grid().unwrap().clone();
            // a cap below all known free space ends the episode early
            let d = match planner.plan(&PlanContext::from_env(&env).unwrap()) {
                Ok(d) => d,
                Err(PlannerError::NoFreeVoxel) => break,
                Err(e) => panic!("seed {seed}: {e}"),
            };
            let r = env.step(d.action, d.lookat).unwrap();
            violations.extend(common::step_violations(&before, coverage, &r, cfg.floor_clearance));
            coverage = r.face_coverage;
        }
    }
    assert!(violations.is_empty(), "{violations:#?}");
}

#[test]
fn coverage_reward_stays_within_budget() {
    let cfg = cfg();
    let scene = common::scene("l_shape", &shapes::l_shape(), [0.0, 0.0], &cfg, 500);
    let mut env = Environment::new(scene, cfg).unwrap();
    for seed in 0..20 {
        env.reset(seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut total = 0.0;
        while !env.is_done() {
            let a = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0)];
            let r = env.step(a, Point::new(0.0, 0.0, 5.0)).unwrap();
            assert_eq!(r.reward, r.coverage_reward + r.constraint_penalty);
            assert!(r.coverage_reward >= 0.0);
            if !r.m_col {
                assert_eq!(r.reward, -0.01);
            }
            total += r.coverage_reward;
        }
        assert!(total <= 0.3, "{total}");
    }
}

#[test]
fn collision_and_revisit_are_penalized() {
    let cfg = cfg();
    let scene = common::scene("cube", &shapes::unit_cube(), [0.0, 0.0], &cfg, 500);
    let mut env = Environment::new(scene, cfg).unwrap();
    env.reset(1).unwrap();
    let target = Point::new(0.0, 0.0, 5.0);
    // the cube's center voxel is enclosed and never free
    let hit = env.step([0.0, 0.0, -0.5], target).unwrap();
    assert!(!hit.m_col);
    assert_eq!((hit.coverage_reward, hit.constraint_penalty, hit.reward), (0.0, -0.01, -0.01));
    assert_ne!(hit.info.a_prime, hit.info.target);

    let a = [0.6, 0.6, -0.3];
    let first = env.step(a, target).unwrap();
    assert!(first.m_col);
    let again = env.step(a, target).unwrap();
    assert_eq!(again.newly_seen_faces, 0);
    assert_eq!(again.reward, -0.01);
}

#[test]
fn above_cap_is_penalized_and_capped() {
    let cfg = cfg();
    let scene = common::scene("cube", &shapes::unit_cube(), [0.0, 0.0], &cfg, 500);
    let mut env = Environment::new(scene, cfg.clone()).unwrap();
    env.reset(2).unwrap();
    let r = env.step([0.8, -0.8, 0.5], Point::new(0.0, 0.0, 5.0)).unwrap();
    assert!(r.info.above_cap && !r.m_col);
    assert_eq!(r.reward, -0.01);
    assert!(r.info.a_prime.z <= height_cap(1, &cfg).unwrap());
}

#[test]
fn identical_inputs_give_identical_streams() {
    let cfg = cfg();
    let run = || {
        let scene = common::scene("torus", &shapes::torus(3.0, 1.0, 24, 12), [-4.0, 4.0], &cfg, 500);
        let mut env = Environment::new(scene, cfg.clone()).unwrap();
        env.reset(17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut out = Vec::new();
        while !env.is_done() {
            let a = [rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=0.0)];
            let r = env.step(a, Point::new(-4.0, 4.0, 3.0)).unwrap();
            out.push(serde_json::to_string(&r.record(a)).unwrap());
        }
        out
    };
    assert_eq!(run(), run());
}

#[test]
fn stepping_a_finished_episode_fails() {
    let cfg = EnvConfig {
        max_steps: 2,
        ..cfg()
    };
    let scene = common::scene("cube", &shapes::unit_cube(), [0.0, 0.0], &cfg, 500);
    let mut env = Environment::new(scene, cfg).unwrap();
    env.reset(0).unwrap();
    let l = Point::new(0.0, 0.0, 5.0);
    env.step([0.5, 0.5, -0.5], l).unwrap();
    assert!(env.step([-0.5, 0.5, -0.5], l).unwrap().terminated);
    assert!(matches!(env.step([0.0, 0.5, -0.5], l), Err(EnvError::EpisodeDone)));
}
