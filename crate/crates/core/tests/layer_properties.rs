use proptest::prelude::*;
use pumfa::geometry::PointCloud;
use pumfa::layers::{Gcra, Module, MultiHeadAttention, Neighborhood, PtLayer, Slot};
use pumfa::tensor::gradcheck::{check, max_relative_error, split_kinks};
use pumfa::tensor::{BnMode, Tensor};
use pumfa::Result;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f32 = 1e-3;
const TOL: f32 = 1e-3;
const FLOOR: f32 = 1.0;

fn params_of(m: &dyn Module) -> Vec<Tensor> {
    let mut out = Vec::new();
    m.visit("", &mut |_, slot| {
        if let Slot::Param(t) = slot {
            out.push(t.clone());
        }
    });
    out
}

fn random_param(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::param((0..n).map(|_| rng.random_range(-1.0f32..1.0)).collect(), shape).unwrap()
}

fn cloud(rng: &mut ChaCha8Rng, n: usize) -> PointCloud {
    PointCloud::new((0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect()).unwrap()
}

/// Up to `per_param` random entries of every tensor.
fn sample_locations(rng: &mut ChaCha8Rng, params: &[Tensor], per_param: usize) -> Vec<(usize, usize)> {
    params
        .iter()
        .enumerate()
        .flat_map(|(p, t)| {
            let n = t.numel();
            (0..per_param.min(n)).map(|_| (p, rng.random_range(0..n))).collect::<Vec<_>>()
        })
        .collect()
}

fn assert_gradients(name: &str, f: &dyn Fn() -> Result<Tensor>, params: &[Tensor], rng: &mut ChaCha8Rng) {
    let locations = sample_locations(rng, params, 6);
    let probes = check(f, params, &locations, H).unwrap();
    // a central difference across a ReLU switch is no oracle
    let (smooth, kinks) = split_kinks(&probes, 2.0 * TOL);
    assert!(kinks.len() * 10 <= probes.len(), "{name}: {} of {} probes straddle kinks", kinks.len(), probes.len());
    let worst = max_relative_error(&smooth, FLOOR);
    assert!(worst < TOL, "{name}: max relative error {worst}");
}

fn permutation(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        p.swap(i, rng.random_range(0..=i));
    }
    p
}

#[test]
fn pt_layer_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let pts = cloud(&mut rng, 12);
    let layer = PtLayer::new(4, 6, &mut rng);
    let nb = Neighborhood::new(&[pts, cloud(&mut rng, 12)], 5).unwrap();
    let x = random_param(&mut rng, &[24, 4]);
    let mut params = params_of(&layer);
    params.push(x.clone());
    assert_gradients("pt_layer", &|| layer.forward(&x, &nb), &params, &mut rng);
}

#[test]
fn attention_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mha = MultiHeadAttention::new(5, 8, 2, &mut rng).unwrap();
    let q = random_param(&mut rng, &[12, 5]);
    let p = random_param(&mut rng, &[12, 8]);
    let mut params = params_of(&mha);
    params.extend([q.clone(), p.clone()]);
    assert_gradients("multihead_attention", &|| mha.forward(&q, &p, 6, None), &params, &mut rng);
}

#[test]
fn gcra_gradients_reach_query_and_pool() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let g = Gcra::new(6, 8, 4, 2, &mut rng).unwrap();
    let q = random_param(&mut rng, &[10, 6]);
    let p = random_param(&mut rng, &[10, 8]);
    let mut params = params_of(&g);
    params.extend([q.clone(), p.clone()]);
    let f = || g.forward(&q, &p, 5, BnMode::Train, None);
    assert_gradients("gcra", &f, &params, &mut rng);

    f().unwrap().sum().backward().unwrap();
    let nonzero = |t: &Tensor| t.grad().is_some_and(|g| g.iter().any(|&v| v != 0.0));
    assert!(nonzero(&q) && nonzero(&p));
    assert!(nonzero(&g.attention.query.weight) && nonzero(&g.attention.key.weight));
}

#[test]
fn pt_layer_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let pts = cloud(&mut rng, 30);
    let layer = PtLayer::new(3, 8, &mut rng);
    let perm = permutation(&mut rng, 30);
    let shuffled = pts.select(&perm).unwrap();
    let y = layer.forward(&pts.to_tensor(), &Neighborhood::new(&[pts.clone()], 6).unwrap()).unwrap().to_vec();
    let z = layer.forward(&shuffled.to_tensor(), &Neighborhood::new(&[shuffled.clone()], 6).unwrap()).unwrap().to_vec();
    for (row, &src) in perm.iter().enumerate() {
        for c in 0..8 {
            assert!((z[row * 8 + c] - y[src * 8 + c]).abs() < 1e-5);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn attention_invariant_to_pool_order(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mha = MultiHeadAttention::new(4, 8, 4, &mut rng).unwrap();
        let q = random_param(&mut rng, &[7, 4]);
        let pool = random_param(&mut rng, &[9, 8]);
        let perm = permutation(&mut rng, 9);
        let shuffled = pool.index_select(&perm).unwrap();
        let a = mha.forward(&q, &pool, 7, None).unwrap().to_vec();
        let b = mha.forward(&q, &shuffled, 7, None).unwrap().to_vec();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-5);
        }
    }
}
