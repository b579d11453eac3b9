use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::Serialize;

use super::{io_err, write_csv, BenchError, Trace};
use crate::camera::dump::{write_pfm, write_pgm, write_ply_points};
use crate::camera::{DepthImage, GrayImage};
use crate::env::Environment;
use crate::metrics::{CoverageTracker, ReconCloud};
use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExportFormat {
    /// Accumulated reconstruction cloud.
    Ply,
    /// Per-step coverage curve.
    Csv,
    /// Gray frames.
    Pgm,
    /// Depth frames.
    Pfm,
}

impl FromStr for ExportFormat {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ply" => Ok(ExportFormat::Ply),
            "csv" => Ok(ExportFormat::Csv),
            "pgm" => Ok(ExportFormat::Pgm),
            "pfm" => Ok(ExportFormat::Pfm),
            _ => Err(BenchError::UnknownFormat(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExportReport {
    pub files: Vec<PathBuf>,
    pub ply_points: usize,
    pub curve_rows: usize,
}

#[derive(Serialize)]
struct CurveRow {
    step: usize,
    face_coverage: f64,
    cr: f64,
    reward: f64,
}

fn write_frame(dir: &Path, view: usize, gray: &GrayImage, depth: &DepthImage, formats: &[ExportFormat], files: &mut Vec<PathBuf>) -> Result<(), BenchError> {
    if formats.contains(&ExportFormat::Pgm) {
        let p = dir.join(format!("gray_{view:03}.pgm"));
        write_pgm(BufWriter::new(File::create(&p).map_err(io_err(&p))?), gray).map_err(io_err(&p))?;
        files.push(p);
    }
    if formats.contains(&ExportFormat::Pfm) {
        let p = dir.join(format!("depth_{view:03}.pfm"));
        write_pfm(BufWriter::new(File::create(&p).map_err(io_err(&p))?), depth).map_err(io_err(&p))?;
        files.push(p);
    }
    Ok(())
}

/// Replays `trace` against its scene and writes the requested artifacts to
/// `out_dir`. Every replayed step must reproduce the recorded reward and
/// face coverage exactly.
pub fn export(trace: &Trace, out_dir: &Path, formats: &[ExportFormat]) -> Result<ExportReport, BenchError> {
    let h = &trace.header;
    let scene = Arc::new(h.scene.build(&h.env)?);
    let mut env = Environment::new(scene.clone(), h.env.clone())?;
    let mut tracker = CoverageTracker::new(scene.gt.surface_points(), h.tau)?;
    let mut recon = ReconCloud::new(h.recon_cell);
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut report = ExportReport::default();

    let obs = env.reset(h.seed)?;
    tracker.add(recon.extend(&obs.points));
    write_frame(out_dir, 0, &obs.gray, &obs.depth, formats, &mut report.files)?;
    let mut rows = Vec::with_capacity(trace.steps.len());
    for rec in &trace.steps {
        let lookat = Point::new(rec.lookat[0], rec.lookat[1], rec.lookat[2]);
        let r = env.step(rec.action, lookat)?;
        if r.reward.to_bits() != rec.reward.to_bits() || r.face_coverage.to_bits() != rec.face_coverage.to_bits() {
            return Err(BenchError::ReplayMismatch(rec.step));
        }
        tracker.add(recon.extend(&r.obs.points));
        write_frame(out_dir, rec.step + 1, &r.obs.gray, &r.obs.depth, formats, &mut report.files)?;
        rows.push(CurveRow {
            step: rec.step,
            face_coverage: r.face_coverage,
            cr: tracker.ratio(),
            reward: r.reward,
        });
    }

    if formats.contains(&ExportFormat::Ply) {
        let p = out_dir.join("recon.ply");
        write_ply_points(BufWriter::new(File::create(&p).map_err(io_err(&p))?), recon.points()).map_err(io_err(&p))?;
        report.ply_points = recon.len();
        report.files.push(p);
    }
    if formats.contains(&ExportFormat::Csv) {
        let p = out_dir.join("coverage.csv");
        write_csv(&p, &rows)?;
        report.curve_rows = rows.len();
        report.files.push(p);
    }
    Ok(report)
}
