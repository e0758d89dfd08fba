use std::cmp::Ordering;

use super::{dist2, Point3, PointCloud};
use crate::error::{Error, Result};

/// Ascending by squared distance, ties by lower index.
fn by_distance(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

fn check_k(what: &'static str, k: usize, n: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument(format!("{what}: count must be at least 1")));
    }
    if k > n {
        return Err(Error::InsufficientPoints {
            what,
            requested: k,
            available: n,
        });
    }
    Ok(())
}

/// Indices of the `k` points nearest to `query`, nearest first. A query that
/// belongs to the set finds itself at distance zero.
pub fn knn(points: &PointCloud, query: Point3, k: usize) -> Result<Vec<usize>> {
    check_k("knn", k, points.len())?;
    let mut d: Vec<(f64, usize)> = points.points().iter().enumerate().map(|(i, &p)| (dist2(p, query), i)).collect();
    if k < d.len() {
        d.select_nth_unstable_by(k - 1, by_distance);
        d.truncate(k);
    }
    d.sort_unstable_by(by_distance);
    Ok(d.into_iter().map(|(_, i)| i).collect())
}

/// Neighborhoods of every point: row `i` of the flat `len·k` result holds
/// `knn(points, points[i], k)`.
pub fn knn_all(points: &PointCloud, k: usize) -> Result<Vec<usize>> {
    check_k("knn", k, points.len())?;
    let mut out = Vec::with_capacity(points.len() * k);
    for &q in points.points() {
        out.extend(knn(points, q, k)?);
    }
    Ok(out)
}

/// Greedy max-min subset: starts at `seed`, then repeatedly takes the point
/// farthest from everything chosen so far (ties by lower index). Never picks
/// an index twice, even among coincident points.
pub fn farthest_point_sample(points: &PointCloud, m: usize, seed: usize) -> Result<Vec<usize>> {
    let n = points.len();
    check_k("farthest point sampling", m, n)?;
    if seed >= n {
        return Err(Error::InvalidArgument(format!("farthest point sampling: seed {seed} out of range for {n} points")));
    }
    let pts = points.points();
    let mut min_d = vec![f64::INFINITY; n];
    let mut chosen = Vec::with_capacity(m);
    let mut current = seed;
    for _ in 0..m {
        chosen.push(current);
        min_d[current] = f64::NEG_INFINITY;
        let c = pts[current];
        let mut best = usize::MAX;
        let mut best_d = f64::NEG_INFINITY;
        for (i, (&p, d)) in pts.iter().zip(min_d.iter_mut()).enumerate() {
            if *d == f64::NEG_INFINITY {
                continue;
            }
            let nd = dist2(c, p);
            if nd < *d {
                *d = nd;
            }
            if *d > best_d {
                best_d = *d;
                best = i;
            }
        }
        if best == usize::MAX {
            break;
        }
        current = best;
    }
    Ok(chosen)
}
