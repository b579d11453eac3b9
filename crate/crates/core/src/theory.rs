//! Coupon-collector model of single-ray coverage.
//!
//! A scene of `k` unit cubes has `6k` faces. Each ray hits one uniformly
//! random cube and one uniformly random face of it. Scenario 1 stops once
//! every cube has been hit; scenario 2 stops once every face has.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum TheoryError {
    #[error("closed form needs k >= 2, got {0}")]
    SmallK(u64),
    #[error("k and trials must be at least 1")]
    Empty,
}

/// `k · H_k`, the expected number of rays until every cube is hit.
pub fn expected_rays_all_cubes(k: u64) -> f64 {
    let h: f64 = (1..=k).rev().map(|i| 1.0 / i as f64).sum();
    k as f64 * h
}

/// Asymptotic unseen-face fraction `k^(-1/6)` after stopping at full cube
/// coverage.
pub fn unseen_fraction_closed_form(k: u64) -> Result<f64, TheoryError> {
    if k < 2 {
        return Err(TheoryError::SmallK(k));
    }
    Ok((k as f64).powf(-1.0 / 6.0))
}

/// `E[(1 − 1/(6k))^T]` averaged over observed stopping times `T`: the
/// expected unseen fraction given how long each trial ran.
pub fn conditional_unseen_expectation(k: u64, rays: &[u64]) -> f64 {
    let q = 1.0 - 1.0 / (6 * k) as f64;
    rays.iter().map(|&t| q.powf(t as f64)).sum::<f64>() / rays.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Trial {
    pub rays_used: u64,
    pub unseen_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageExperiment {
    pub k: u64,
    pub trials: usize,
    pub seed: u64,
    pub results: Vec<Trial>,
}

impl CoverageExperiment {
    pub fn mean_unseen(&self) -> f64 {
        mean(self.results.iter().map(|t| t.unseen_fraction))
    }

    /// Sample standard deviation of the unseen fraction.
    pub fn std_unseen(&self) -> f64 {
        std(self.results.iter().map(|t| t.unseen_fraction))
    }

    pub fn mean_rays(&self) -> f64 {
        mean(self.results.iter().map(|t| t.rays_used as f64))
    }

    pub fn std_rays(&self) -> f64 {
        std(self.results.iter().map(|t| t.rays_used as f64))
    }

    pub fn rays(&self) -> Vec<u64> {
        self.results.iter().map(|t| t.rays_used).collect()
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn std(xs: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = xs.collect();
    if v.len() < 2 {
        return 0.0;
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[derive(Clone, Copy)]
enum Stop {
    AllCubes,
    AllFaces,
}

fn one_trial(k: u64, rng: &mut ChaCha8Rng, stop: Stop) -> Trial {
    let n = (6 * k) as usize;
    let mut face_seen = vec![false; n];
    let mut cube_seen = vec![false; k as usize];
    let (mut faces, mut cubes, mut rays) = (0usize, 0usize, 0u64);
    loop {
        let f = rng.gen_range(0..n);
        rays += 1;
        if !face_seen[f] {
            face_seen[f] = true;
            faces += 1;
        }
        let c = f / 6;
        if !cube_seen[c] {
            cube_seen[c] = true;
            cubes += 1;
        }
        let done = match stop {
            Stop::AllCubes => cubes == k as usize,
            Stop::AllFaces => faces == n,
        };
        if done {
            break;
        }
    }
    Trial {
        rays_used: rays,
        unseen_fraction: (n - faces) as f64 / n as f64,
    }
}

fn simulate(k: u64, trials: usize, seed: u64, stop: Stop) -> Result<CoverageExperiment, TheoryError> {
    if k == 0 || trials == 0 {
        return Err(TheoryError::Empty);
    }
    let results = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(t as u64));
            one_trial(k, &mut rng, stop)
        })
        .collect();
    Ok(CoverageExperiment { k, trials, seed, results })
}

/// Draw until every cube has been hit at least once.
pub fn simulate_scenario1(k: u64, trials: usize, seed: u64) -> Result<CoverageExperiment, TheoryError> {
    simulate(k, trials, seed, Stop::AllCubes)
}

/// Draw until every face has been hit at least once.
pub fn simulate_scenario2(k: u64, trials: usize, seed: u64) -> Result<CoverageExperiment, TheoryError> {
    simulate(k, trials, seed, Stop::AllFaces)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoryRow {
    pub k: u64,
    pub closed_form: Option<f64>,
    pub empirical_mean: f64,
    pub empirical_std: f64,
    pub trials: usize,
    pub mean_rays: f64,
    pub expected_rays: f64,
}

pub fn theory_rows(ks: &[u64], trials: usize, seed: u64) -> Result<Vec<TheoryRow>, TheoryError> {
    ks.iter()
        .map(|&k| {
            let e = simulate_scenario1(k, trials, seed)?;
            Ok(TheoryRow {
                k,
                closed_form: unseen_fraction_closed_form(k).ok(),
                empirical_mean: e.mean_unseen(),
                empirical_std: e.std_unseen(),
                trials,
                mean_rays: e.mean_rays(),
                expected_rays: expected_rays_all_cubes(k),
            })
        })
        .collect()
}

pub fn rows_to_csv(rows: &[TheoryRow]) -> String {
    let mut s = String::from("k,closed_form,empirical_mean,empirical_std,trials\n");
    for r in rows {
        let cf = r.closed_form.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{},{}", r.k, cf, r.empirical_mean, r.empirical_std, r.trials);
    }
    s
}

/// Whitespace-separated columns for gnuplot; `NaN` where the closed form is
/// undefined.
pub fn rows_to_curve(rows: &[TheoryRow]) -> String {
    let mut s = String::from("# k closed_form empirical_mean empirical_std\n");
    for r in rows {
        let cf = r.closed_form.unwrap_or(f64::NAN);
        let _ = writeln!(s, "{} {} {} {}", r.k, cf, r.empirical_mean, r.empirical_std);
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_small_values() {
        assert_eq!(expected_rays_all_cubes(1), 1.0);
        assert_eq!(expected_rays_all_cubes(2), 3.0);
    }

    #[test]
    fn harmonic_matches_asymptotic() {
        let k = 8000.0f64;
        let approx = k * k.ln() + 0.5772 * k;
        assert!((expected_rays_all_cubes(8000) - approx).abs() / approx < 0.01);
    }

    #[test]
    fn closed_form_values() {
        assert!((unseen_fraction_closed_form(64).unwrap() - 0.5).abs() < 1e-15);
        assert!((unseen_fraction_closed_form(4096).unwrap() - 0.25).abs() < 1e-15);
        assert!((unseen_fraction_closed_form(8000).unwrap() - 0.2236).abs() < 1e-4);
        assert_eq!(unseen_fraction_closed_form(1), Err(TheoryError::SmallK(1)));
    }

    #[test]
    fn single_cube_ends_after_one_ray() {
        let e = simulate_scenario1(1, 50, 3).unwrap();
        assert!(e.results.iter().all(|t| t.rays_used == 1 && t.unseen_fraction == 5.0 / 6.0));
    }

    #[test]
    fn scenario1_matches_conditional_expectation() {
        let e = simulate_scenario1(64, 2000, 11).unwrap();
        let refined = conditional_unseen_expectation(64, &e.rays());
        let se = e.std_unseen() / (e.trials as f64).sqrt();
        assert!((e.mean_unseen() - refined).abs() < 3.0 * se, "{} vs {refined}", e.mean_unseen());
    }

    #[test]
    fn scenario2_single_cube_is_six_coupons() {
        let e = simulate_scenario2(1, 2000, 5).unwrap();
        assert!(e.results.iter().all(|t| t.unseen_fraction == 0.0));
        let h6: f64 = (1..=6).map(|i| 1.0 / i as f64).sum();
        let se = e.std_rays() / (e.trials as f64).sqrt();
        assert!((e.mean_rays() - 6.0 * h6).abs() < 3.0 * se);
    }

    #[test]
    fn scenario2_needs_more_rays() {
        for k in [1, 4, 32] {
            let a = simulate_scenario1(k, 100, 1).unwrap();
            let b = simulate_scenario2(k, 100, 1).unwrap();
            assert!(b.mean_rays() > a.mean_rays());
        }
    }

    #[test]
    fn unseen_fraction_decreases_with_k() {
        let means: Vec<f64> = [2, 8, 64, 512]
            .iter()
            .map(|&k| simulate_scenario1(k, 200, 9).unwrap().mean_unseen())
            .collect();
        assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
    }

    #[test]
    fn replay_is_deterministic() {
        assert_eq!(simulate_scenario1(100, 20, 4).unwrap(), simulate_scenario1(100, 20, 4).unwrap());
        // trial t uses seed base + t
        let shifted = simulate_scenario1(100, 19, 5).unwrap();
        assert_eq!(simulate_scenario1(100, 20, 4).unwrap().results[1..], shifted.results[..]);
    }

    #[test]
    fn csv_shape() {
        let rows = theory_rows(&[1, 64], 10, 0).unwrap();
        let csv = rows_to_csv(&rows);
        assert_eq!(csv.lines().count(), 3);
        assert!(csv.lines().nth(1).unwrap().starts_with("1,,"));
        assert!(rows_to_curve(&rows).contains("NaN"));
    }
}
