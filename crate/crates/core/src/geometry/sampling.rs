use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{add, dist, scale, sub, Point3, PointCloud, TriangleMesh};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    Uniform,
    #[default]
    Poisson,
}

/// Candidates drawn per requested point before elimination.
const OVERSAMPLE: usize = 4;
/// Weight falloff exponent and lower-radius shaping used by sample elimination.
const ALPHA: i32 = 8;
const BETA: f64 = 0.65;
const GAMMA: f64 = 1.5;

/// `n` points on the surface of `mesh`.
///
/// Uniform mode picks faces proportionally to area and points uniformly
/// inside each face. Poisson mode draws `4n` uniform candidates and removes
/// the most crowded one until `n` remain, which spreads the survivors out.
pub fn sample_mesh<R: Rng + ?Sized>(mesh: &TriangleMesh, n: usize, mode: SamplingMode, rng: &mut R) -> Result<PointCloud> {
    if mesh.is_empty() {
        return Err(Error::EmptyMesh);
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    match mode {
        SamplingMode::Uniform => PointCloud::new(uniform(mesh, n, rng)),
        SamplingMode::Poisson => {
            let candidates = uniform(mesh, n * OVERSAMPLE, rng);
            let keep = eliminate(&candidates, n, mesh.total_area());
            PointCloud::new(keep.into_iter().map(|i| candidates[i]).collect())
        }
    }
}

fn uniform<R: Rng + ?Sized>(mesh: &TriangleMesh, n: usize, rng: &mut R) -> Vec<Point3> {
    let mut cdf = Vec::with_capacity(mesh.faces().len());
    let mut total = 0.0;
    for f in 0..mesh.faces().len() {
        total += mesh.face_area(f);
        cdf.push(total);
    }
    (0..n)
        .map(|_| {
            let t = rng.random::<f64>() * total;
            let face = cdf.partition_point(|&c| c <= t).min(cdf.len() - 1);
            let [a, b, c] = mesh.triangle(face);
            let su = rng.random::<f64>().sqrt();
            let v = rng.random::<f64>();
            // barycentric (1 - su, su (1 - v), su v) is uniform over the face
            add(a, add(scale(sub(b, a), su * (1.0 - v)), scale(sub(c, a), su * v)))
        })
        .collect()
}

#[derive(PartialEq)]
struct Entry {
    weight: f64,
    index: usize,
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // heaviest first, ties to the lower index
    fn cmp(&self, other: &Self) -> Ordering {
        self.weight.total_cmp(&other.weight).then(other.index.cmp(&self.index))
    }
}

/// Weighted sample elimination down to `target` survivors; returns their
/// indices in ascending order.
fn eliminate(points: &[Point3], target: usize, area: f64) -> Vec<usize> {
    let m = points.len();
    let r_max = (area / (2.0 * 3f64.sqrt() * target as f64)).sqrt();
    let r_min = r_max * BETA * (1.0 - (target as f64 / m as f64).powf(GAMMA));
    let reach = 2.0 * r_max;
    let weight = |d: f64| (1.0 - d.max(r_min) / reach).powi(ALPHA);

    let cell = |p: Point3| -> (i64, i64, i64) {
        (
            (p[0] / reach).floor() as i64,
            (p[1] / reach).floor() as i64,
            (p[2] / reach).floor() as i64,
        )
    };
    let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for (i, &p) in points.iter().enumerate() {
        grid.entry(cell(p)).or_default().push(i);
    }
    let mut neighbors: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for (i, &p) in points.iter().enumerate() {
        let (cx, cy, cz) = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = grid.get(&(cx + dx, cy + dy, cz + dz)) else {
                        continue;
                    };
                    for &j in bucket {
                        let d = dist(p, points[j]);
                        if j != i && d < reach {
                            neighbors[i].push((j, weight(d)));
                        }
                    }
                }
            }
        }
    }

    let mut weights: Vec<f64> = neighbors.iter().map(|ns| ns.iter().map(|&(_, w)| w).sum()).collect();
    let mut alive = vec![true; m];
    let mut heap: BinaryHeap<Entry> = weights.iter().enumerate().map(|(index, &weight)| Entry { weight, index }).collect();
    let mut remaining = m;
    while remaining > target {
        let Entry { weight, index } = heap.pop().expect("heap holds every live sample");
        if !alive[index] || weight != weights[index] {
            continue;
        }
        alive[index] = false;
        remaining -= 1;
        for &(j, w) in &neighbors[index] {
            if alive[j] {
                weights[j] -= w;
                heap.push(Entry { weight: weights[j], index: j });
            }
        }
    }
    (0..m).filter(|&i| alive[i]).collect()
}
