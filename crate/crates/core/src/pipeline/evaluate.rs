use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::EvalConfig;
use super::inference::upsample_to_ratio;
use super::{load_meshes, stream_seed};
use crate::error::Result;
use crate::geometry::{add_gaussian_noise, sample_mesh, SamplingMode};
use crate::metrics::{chamfer_distance, hausdorff_distance, point_to_surface, HausdorffMode};
use crate::network::Model;

/// Reports print metrics in these units.
pub const REPORT_UNIT: f64 = 1e-3;

/// Raw metric values, in model units.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub shape: String,
    pub noise: f64,
    pub cd: f64,
    pub hd: f64,
    pub p2f: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub noise_levels: Vec<f64>,
    /// Mesh-major, then noise level.
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    /// Mean over meshes at one noise level.
    pub fn aggregate(&self, noise: f64) -> Option<EvalRow> {
        let rows: Vec<&EvalRow> = self.rows.iter().filter(|r| r.noise == noise).collect();
        if rows.is_empty() {
            return None;
        }
        let n = rows.len() as f64;
        Some(EvalRow {
            shape: "mean".into(),
            noise,
            cd: rows.iter().map(|r| r.cd).sum::<f64>() / n,
            hd: rows.iter().map(|r| r.hd).sum::<f64>() / n,
            p2f: rows.iter().map(|r| r.p2f).sum::<f64>() / n,
        })
    }

    fn with_aggregates(&self) -> Vec<EvalRow> {
        let mut all = self.rows.clone();
        all.extend(self.noise_levels.iter().filter_map(|&l| self.aggregate(l)));
        all
    }

    /// Aligned text table, metrics in units of 1e-3.
    pub fn to_table(&self) -> String {
        let mut s = format!("{:<12} {:>8} {:>12} {:>12} {:>12}\n", "shape", "noise", "CD(1e-3)", "HD(1e-3)", "P2F(1e-3)");
        for r in self.with_aggregates() {
            let _ = writeln!(
                s,
                "{:<12} {:>8} {:>12.4} {:>12.4} {:>12.4}",
                r.shape,
                r.noise,
                r.cd / REPORT_UNIT,
                r.hd / REPORT_UNIT,
                r.p2f / REPORT_UNIT
            );
        }
        s
    }

    /// `shape,noise,cd,hd,p2f` with metrics in units of 1e-3; `mean` rows last.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("shape,noise,cd,hd,p2f\n");
        for r in self.with_aggregates() {
            let _ = writeln!(s, "{},{},{:.6},{:.6},{:.6}", r.shape, r.noise, r.cd / REPORT_UNIT, r.hd / REPORT_UNIT, r.p2f / REPORT_UNIT);
        }
        s
    }
}

/// For every mesh: a `ratio·M` ground-truth sampling and an `M`-point input,
/// drawn once; then for every noise level the perturbed input is upsampled
/// and scored against both.
pub fn evaluate(model: &Model, eval: &EvalConfig, ratio: usize) -> Result<EvalReport> {
    let meshes = load_meshes(&eval.shapes, &eval.meshes)?;
    let per_mesh: Vec<Vec<EvalRow>> = meshes
        .par_iter()
        .enumerate()
        .map(|(i, (name, mesh))| {
            let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(eval.seed, 0x6576_616c, i as u64));
            let truth = sample_mesh(mesh, ratio * eval.input_points, SamplingMode::Poisson, &mut rng)?;
            let input = sample_mesh(mesh, eval.input_points, SamplingMode::Poisson, &mut rng)?;
            eval.noise_levels
                .iter()
                .enumerate()
                .map(|(l, &noise)| {
                    let mut noise_rng = ChaCha8Rng::seed_from_u64(stream_seed(eval.seed, i as u64, l as u64));
                    let noisy = add_gaussian_noise(&input, noise, &mut noise_rng)?;
                    let out = upsample_to_ratio(model, &noisy, ratio, eval.coverage_factor)?;
                    Ok(EvalRow {
                        shape: name.clone(),
                        noise,
                        cd: chamfer_distance(&out, &truth),
                        hd: hausdorff_distance(&out, &truth, HausdorffMode::Symmetric),
                        p2f: point_to_surface(&out, mesh)?,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        noise_levels: eval.noise_levels.clone(),
        rows: per_mesh.into_iter().flatten().collect(),
    })
}
