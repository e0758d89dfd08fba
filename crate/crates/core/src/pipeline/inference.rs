use crate::error::{Error, Result};
use crate::geometry::{farthest_point_sample, knn, merge_patches, Normalization, PointCloud};
use crate::network::Model;
use crate::tensor::{no_grad, BnMode};

/// Patches per forward pass.
const CHUNK: usize = 8;

/// Seed indices for inference patches: farthest-point seeds, then the first
/// uncovered point until every input point lies in some patch.
fn patch_seeds(cloud: &PointCloud, n: usize, coverage_factor: f64) -> Result<Vec<Vec<usize>>> {
    let wanted = ((coverage_factor * cloud.len() as f64 / n as f64).ceil() as usize).clamp(1, cloud.len());
    let mut covered = vec![false; cloud.len()];
    let mut patches: Vec<Vec<usize>> = Vec::with_capacity(wanted);
    let fps = farthest_point_sample(cloud, wanted, 0)?;
    // a seed always covers itself, so one forward scan finishes the job
    for i in 0..fps.len() + cloud.len() {
        let seed = match fps.get(i) {
            Some(&s) => s,
            None if !covered[i - fps.len()] => i - fps.len(),
            None => continue,
        };
        let idx = knn(cloud, cloud.get(seed), n)?;
        idx.iter().for_each(|&j| covered[j] = true);
        patches.push(idx);
    }
    Ok(patches)
}

/// One pass of the model: `|cloud|` points in, `ratio·|cloud|` points out.
pub fn upsample_cloud(model: &Model, cloud: &PointCloud, coverage_factor: f64) -> Result<PointCloud> {
    let config = model.config();
    let n = config.points;
    if cloud.len() < n {
        return Err(Error::InsufficientPoints {
            what: "upsampling input",
            requested: n,
            available: cloud.len(),
        });
    }
    if !(coverage_factor > 0.0) {
        return Err(Error::InvalidArgument("coverage factor must be positive".into()));
    }
    let seeds = patch_seeds(cloud, n, coverage_factor)?;
    let _guard = no_grad();
    let mut outputs = Vec::with_capacity(seeds.len());
    for chunk in seeds.chunks(CHUNK) {
        let mut inputs = Vec::with_capacity(chunk.len());
        let mut norms = Vec::with_capacity(chunk.len());
        for idx in chunk {
            let patch = cloud.select(idx)?;
            let norm = Normalization::fit(&patch);
            inputs.push(norm.normalize(&patch));
            norms.push(norm);
        }
        let dense = PointCloud::from_tensor(&model.forward(&inputs, BnMode::Eval, false)?.dense)?;
        let per = n * config.ratio;
        for (p, norm) in norms.into_iter().enumerate() {
            let idx: Vec<usize> = (p * per..(p + 1) * per).collect();
            outputs.push((dense.select(&idx)?, norm));
        }
    }
    merge_patches(&outputs, cloud.len() * config.ratio)
}

/// Repeated passes until `ratio` is reached; `ratio` must be a power of the
/// model's own ratio.
pub fn upsample_to_ratio(model: &Model, cloud: &PointCloud, ratio: usize, coverage_factor: f64) -> Result<PointCloud> {
    let passes = passes_for(model.config().ratio, ratio)?;
    let mut current = cloud.clone();
    for _ in 0..passes {
        current = upsample_cloud(model, &current, coverage_factor)?;
    }
    Ok(current)
}

/// Number of model passes giving `ratio`.
pub fn passes_for(model_ratio: usize, ratio: usize) -> Result<u32> {
    let err = || Error::InvalidArgument(format!("ratio {ratio} is not a power of the model ratio {model_ratio}"));
    if ratio == 0 {
        return Err(err());
    }
    if model_ratio == 1 {
        return if ratio == 1 { Ok(0) } else { Err(err()) };
    }
    let (mut r, mut k) = (ratio, 0);
    while r % model_ratio == 0 {
        r /= model_ratio;
        k += 1;
    }
    if r == 1 {
        Ok(k)
    } else {
        Err(err())
    }
}
