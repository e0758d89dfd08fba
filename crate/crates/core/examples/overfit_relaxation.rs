//! Optimizes the upsampled coordinates of one sphere patch directly, with no
//! network in between, starting from the duplicated input as the model does.
//! Shows how far Chamfer descent from that start can get in 500 Adam steps.
//!
//! `cargo run --release --example overfit_relaxation`

use pumfa::geometry::AnalyticShape;
use pumfa::metrics::chamfer_loss;
use pumfa::network::duplicate;
use pumfa::pipeline::{generate_dataset, PipelineConfig, Profile};
use pumfa::tensor::optim::{zero_grads, AdamConfig, AdamState};
use pumfa::Tensor;

fn main() -> pumfa::Result<()> {
    let mut config = PipelineConfig::profile(Profile::Desk);
    config.data.shapes = vec![AnalyticShape::Sphere];
    config.data.pairs_per_mesh = 1;
    let (n, r) = (config.model.points, config.model.ratio);
    let pair = generate_dataset(&config.data, n, r, 0)?.remove(0);
    let target = pair.target.to_tensor();
    for lr in [1e-3f32, 1e-2] {
        let start = duplicate(&pair.input.to_tensor(), r)?.to_vec();
        let q = Tensor::param(start, &[n * r, 3])?;
        let mut adam = AdamState::new(AdamConfig { lr, ..AdamConfig::default() }, &[q.clone()]);
        let initial = chamfer_loss(&q, &target)?.item();
        for _ in 0..500 {
            zero_grads(&[q.clone()]);
            chamfer_loss(&q, &target)?.backward()?;
            adam.step(&[q.clone()])?;
        }
        let last = chamfer_loss(&q, &target)?.item();
        println!("lr {lr:e}: CD {initial:.5} → {last:.5}, ratio {:.3}", last / initial);
    }
    Ok(())
}
