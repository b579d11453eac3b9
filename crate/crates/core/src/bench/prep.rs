use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, mesh_stem, scene_id, write_text, BenchError, BenchSpec};
use crate::scene::{cache, load_mesh, shapes, Scene, SceneConfig, TriangleMesh};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub mesh: String,
    pub source: String,
    pub center: [f64; 2],
    pub file: String,
    pub triangles: usize,
    pub occupied_voxels: usize,
    pub visible_faces: u64,
    pub surface_points: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrepFailure {
    pub source: String,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub resolution: usize,
    pub scene_size: f64,
    pub target_extent: f64,
    pub ground_height: f64,
    pub surface_points: usize,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
    pub failures: Vec<PrepFailure>,
}

impl Manifest {
    pub fn read(dir: &Path) -> Result<Manifest, BenchError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(io_err(&path))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn placement(&self, center: [f64; 2]) -> SceneConfig {
        SceneConfig {
            target_extent: self.target_extent,
            scene_size: self.scene_size,
            object_center: center,
            ground_height: self.ground_height,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrepReport {
    pub manifest: Manifest,
    pub written: Vec<PathBuf>,
}

impl PrepReport {
    pub fn all_failed(&self) -> bool {
        self.manifest.entries.is_empty() && !self.manifest.failures.is_empty()
    }
}

fn is_mesh_file(p: &Path) -> bool {
    p.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "obj" | "ply"))
}

/// Expands prep inputs into named mesh loaders: `suite`, `suite:<name>`,
/// mesh files and directories of mesh files (sorted by name).
fn mesh_inputs(inputs: &[String]) -> Result<Vec<(String, String, Option<TriangleMesh>)>, BenchError> {
    let mut out = Vec::new();
    for entry in inputs {
        if entry == "suite" {
            out.extend(
                shapes::suite()
                    .into_iter()
                    .map(|(n, m)| (n.to_string(), format!("suite:{n}"), Some(m))),
            );
        } else if let Some(name) = entry.strip_prefix("suite:") {
            let m = shapes::suite().into_iter().find(|(n, _)| *n == name).map(|(_, m)| m);
            if m.is_none() {
                return Err(BenchError::Config(format!("no bundled mesh {name:?}")));
            }
            out.push((name.to_string(), entry.clone(), m));
        } else {
            let path = PathBuf::from(entry);
            if path.is_dir() {
                let mut files: Vec<PathBuf> = fs::read_dir(&path)
                    .map_err(io_err(&path))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.is_file() && is_mesh_file(p))
                    .collect();
                files.sort();
                out.extend(files.into_iter().map(|f| (mesh_stem(&f), f.display().to_string(), None)));
            } else {
                out.push((mesh_stem(&path), entry.clone(), None));
            }
        }
    }
    Ok(out)
}

fn cache_file_name(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' || c == ',' { c } else { '_' })
        .collect();
    format!("{safe}.nbvgt")
}

/// Builds one ground-truth cache per (mesh, center) under `out_dir` and a
/// manifest. Unreadable meshes and failed placements are logged and listed
/// in the manifest; the rest continue.
pub fn prep(inputs: &[String], out_dir: &Path, spec: &BenchSpec) -> Result<PrepReport, BenchError> {
    spec.env.validate()?;
    let frame = spec.env.frame()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    let mut written = Vec::new();
    for (mesh, source, bundled) in mesh_inputs(inputs)? {
        let raw = match bundled {
            Some(m) => m,
            None => match load_mesh(&source) {
                Ok(m) => m,
                Err(e) => {
                    log::warn!("{source}: {e}");
                    failures.push(PrepFailure {
                        source,
                        error: e.to_string(),
                    });
                    continue;
                }
            },
        };
        for &center in &spec.object_centers {
            let id = scene_id(&mesh, center);
            let scene = match Scene::prepare(
                id.clone(),
                &raw,
                &spec.placement(center),
                frame,
                spec.surface_points,
                spec.prep_seed,
            ) {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("{id}: {e}");
                    failures.push(PrepFailure {
                        source: format!("{source} @ {},{}", center[0], center[1]),
                        error: e.to_string(),
                    });
                    continue;
                }
            };
            let file = cache_file_name(&id);
            let path = out_dir.join(&file);
            cache::save(&path, &scene)?;
            log::info!("{id}: {} visible faces", scene.gt.visible_face_count());
            entries.push(ManifestEntry {
                id,
                mesh: mesh.clone(),
                source: source.clone(),
                center,
                file,
                triangles: scene.mesh.triangles.len(),
                occupied_voxels: scene.gt.occupied_count(),
                visible_faces: scene.gt.visible_face_count(),
                surface_points: scene.gt.surface_points().len(),
            });
            written.push(path);
        }
    }
    let manifest = Manifest {
        version: cache::VERSION,
        resolution: spec.env.resolution,
        scene_size: spec.env.scene_size,
        target_extent: spec.target_extent,
        ground_height: spec.ground_height,
        surface_points: spec.surface_points,
        seed: spec.prep_seed,
        entries,
        failures,
    };
    write_text(&out_dir.join(MANIFEST_FILE), &serde_json::to_string_pretty(&manifest)?)?;
    Ok(PrepReport { manifest, written })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cache_names_are_filesystem_safe() {
        assert_eq!(cache_file_name("a b@4,-4"), "a_b_4,-4.nbvgt");
    }
}
