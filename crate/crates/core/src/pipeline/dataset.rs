use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::DataConfig;
use super::stream_seed;
use crate::error::{Error, Result};
use crate::geometry::io::{read_cloud, read_mesh, write_xyz};
use crate::geometry::{extract_patch_pairs, sample_mesh, Normalization, PatchPair, TriangleMesh};

pub const MANIFEST: &str = "manifest.toml";

/// Built-in shapes followed by mesh files, each scaled into the unit sphere.
pub fn load_meshes(shapes: &[crate::geometry::AnalyticShape], files: &[std::path::PathBuf]) -> Result<Vec<(String, TriangleMesh)>> {
    let mut out: Vec<(String, TriangleMesh)> = shapes.iter().map(|s| (s.name().to_string(), s.mesh())).collect();
    for f in files {
        let name = f.file_stem().and_then(|s| s.to_str()).unwrap_or("mesh").to_string();
        out.push((name, read_mesh(f)?.normalized()));
    }
    if out.is_empty() {
        return Err(Error::InvalidArgument("no meshes configured".into()));
    }
    Ok(out)
}

/// `pairs_per_mesh` patch pairs from a dense sampling of every mesh. Each mesh
/// draws from its own stream of `seed`, so the result does not depend on
/// scheduling.
pub fn generate_dataset(data: &DataConfig, points: usize, ratio: usize, seed: u64) -> Result<Vec<PatchPair>> {
    let meshes = load_meshes(&data.shapes, &data.meshes)?;
    if data.dense_points < points * ratio {
        return Err(Error::InsufficientPoints {
            what: "dense sampling",
            requested: points * ratio,
            available: data.dense_points,
        });
    }
    let per_mesh: Vec<Vec<PatchPair>> = meshes
        .par_iter()
        .enumerate()
        .map(|(i, (_, mesh))| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, 0x6d65_7368, i as u64));
            let dense = sample_mesh(mesh, data.dense_points, data.sampling, &mut rng)?;
            extract_patch_pairs(&dense, data.pairs_per_mesh, points, ratio, &mut rng)
        })
        .collect::<Result<_>>()?;
    Ok(per_mesh.into_iter().flatten().collect())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    count: usize,
    points: usize,
    ratio: usize,
    pairs: Vec<ManifestEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestEntry {
    input: String,
    target: String,
    centroid: [f64; 3],
    scale: f64,
}

/// One XYZ file per cloud plus a manifest with the normalization of each pair.
pub fn write_dataset(dir: &Path, pairs: &[PatchPair]) -> Result<()> {
    let first = pairs.first().ok_or(Error::EmptyCloud)?;
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(pairs.len());
    for (i, p) in pairs.iter().enumerate() {
        let (input, target) = (format!("pair_{i:05}_input.xyz"), format!("pair_{i:05}_target.xyz"));
        write_xyz(&dir.join(&input), &p.input)?;
        write_xyz(&dir.join(&target), &p.target)?;
        entries.push(ManifestEntry {
            input,
            target,
            centroid: p.normalization.centroid,
            scale: p.normalization.scale,
        });
    }
    let manifest = Manifest {
        count: pairs.len(),
        points: first.input.len(),
        ratio: first.target.len() / first.input.len(),
        pairs: entries,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    fs::write(dir.join(MANIFEST), text)?;
    Ok(())
}

pub fn read_dataset(dir: &Path) -> Result<Vec<PatchPair>> {
    let path = dir.join(MANIFEST);
    let manifest: Manifest = toml::from_str(&fs::read_to_string(&path)?).map_err(|e| Error::Parse {
        path: path.clone(),
        message: e.to_string(),
    })?;
    if manifest.pairs.len() != manifest.count {
        return Err(Error::Parse {
            path,
            message: format!("manifest lists {} pairs but declares {}", manifest.pairs.len(), manifest.count),
        });
    }
    manifest
        .pairs
        .iter()
        .map(|e| {
            let input = read_cloud(&dir.join(&e.input))?;
            let target = read_cloud(&dir.join(&e.target))?;
            if input.len() != manifest.points || target.len() != manifest.points * manifest.ratio {
                return Err(Error::Parse {
                    path: dir.join(&e.input),
                    message: format!("pair has {}→{} points, manifest says {}→{}", input.len(), target.len(), manifest.points, manifest.points * manifest.ratio),
                });
            }
            Ok(PatchPair {
                input,
                target,
                normalization: Normalization {
                    centroid: e.centroid,
                    scale: e.scale,
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::AnalyticShape;

    fn small_data() -> DataConfig {
        DataConfig {
            shapes: vec![AnalyticShape::Sphere, AnalyticShape::Box],
            pairs_per_mesh: 3,
            dense_points: 600,
            ..DataConfig::default()
        }
    }

    #[test]
    fn counts_and_determinism() {
        let a = generate_dataset(&small_data(), 32, 4, 5).unwrap();
        assert_eq!(a.len(), 6);
        assert!(a.iter().all(|p| p.input.len() == 32 && p.target.len() == 128));
        assert_eq!(a, generate_dataset(&small_data(), 32, 4, 5).unwrap());
        assert_ne!(a, generate_dataset(&small_data(), 32, 4, 6).unwrap());
    }

    #[test]
    fn too_coarse_density() {
        let d = DataConfig { dense_points: 100, ..small_data() };
        assert!(generate_dataset(&d, 32, 4, 0).is_err());
    }

    #[test]
    fn directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let pairs = generate_dataset(&small_data(), 16, 2, 1).unwrap();
        write_dataset(dir.path(), &pairs).unwrap();
        let back = read_dataset(dir.path()).unwrap();
        assert_eq!(back.len(), pairs.len());
        for (a, b) in pairs.iter().zip(&back) {
            assert_eq!(a.normalization, b.normalization);
            for (p, q) in a.target.points().iter().zip(b.target.points()) {
                assert!((0..3).all(|c| (p[c] - q[c]).abs() <= 5e-7));
            }
        }
    }
}
