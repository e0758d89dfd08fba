use std::sync::Mutex;

use super::{numel, Tensor};
use crate::error::{invalid, Error, Result};

pub const BN_EPS: f32 = 1e-5;
pub const BN_MOMENTUM: f32 = 0.1;

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch {
            op,
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    Ok(())
}

fn check_axis(op: &'static str, t: &Tensor, axis: usize) -> Result<()> {
    if axis >= t.rank() {
        return Err(Error::AxisOutOfRange {
            op,
            axis,
            rank: t.rank(),
        });
    }
    Ok(())
}

/// (outer, extent, inner) decomposition of a shape around `axis`.
fn split_axis(shape: &[usize], axis: usize) -> (usize, usize, usize) {
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    (outer, shape[axis], inner)
}

fn reduced_shape(shape: &[usize], axis: usize) -> Vec<usize> {
    let mut out: Vec<usize> = shape.iter().enumerate().filter(|&(i, _)| i != axis).map(|(_, &d)| d).collect();
    if out.is_empty() {
        out.push(1);
    }
    out
}

/// `c = a(m×k) · b(k×n)` with arbitrary strides; `c` is row-major m×n.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f32],
    rsa: usize,
    csa: usize,
    b: &[f32],
    rsb: usize,
    csb: usize,
    c: &mut [f32],
) {
    debug_assert!(c.len() >= m * n);
    // SAFETY: the callers pass slices whose extents cover every strided
    // access implied by (m, k, n) and the given strides.
    unsafe {
        matrixmultiply::sgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            0.0,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl Tensor {
    fn unary(&self, f: impl Fn(f32) -> f32, df: impl Fn(f32, f32) -> f32 + Send + Sync + 'static) -> Tensor {
        let x = self.to_vec();
        let y: Vec<f32> = x.iter().map(|&v| f(v)).collect();
        let y_saved = if self.requires_grad() { y.clone() } else { Vec::new() };
        Tensor::from_op(y, self.shape().to_vec(), vec![self.clone()], move |g| {
            // df receives (input, output)
            let dx = g.iter().zip(&x).zip(&y_saved).map(|((&g, &x), &y)| g * df(x, y)).collect();
            vec![Some(dx)]
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        same_shape("add", self, other)?;
        let rhs = other.to_vec();
        let data = self.data().iter().zip(&rhs).map(|(a, b)| a + b).collect();
        Ok(Tensor::from_op(data, self.shape().to_vec(), vec![self.clone(), other.clone()], |g| {
            vec![Some(g.to_vec()), Some(g.to_vec())]
        }))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        same_shape("sub", self, other)?;
        let rhs = other.to_vec();
        let data = self.data().iter().zip(&rhs).map(|(a, b)| a - b).collect();
        Ok(Tensor::from_op(data, self.shape().to_vec(), vec![self.clone(), other.clone()], |g| {
            vec![Some(g.to_vec()), Some(g.iter().map(|v| -v).collect())]
        }))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        same_shape("mul", self, other)?;
        let a = self.to_vec();
        let b = other.to_vec();
        let data = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        Ok(Tensor::from_op(data, self.shape().to_vec(), vec![self.clone(), other.clone()], move |g| {
            let da = g.iter().zip(&b).map(|(g, y)| g * y).collect();
            let db = g.iter().zip(&a).map(|(g, x)| g * x).collect();
            vec![Some(da), Some(db)]
        }))
    }

    pub fn scale(&self, c: f32) -> Tensor {
        let data = self.data().iter().map(|v| v * c).collect();
        Tensor::from_op(data, self.shape().to_vec(), vec![self.clone()], move |g| {
            vec![Some(g.iter().map(|v| v * c).collect())]
        })
    }

    pub fn add_scalar(&self, c: f32) -> Tensor {
        let data = self.data().iter().map(|v| v + c).collect();
        Tensor::from_op(data, self.shape().to_vec(), vec![self.clone()], |g| vec![Some(g.to_vec())])
    }

    pub fn relu(&self) -> Tensor {
        self.unary(|v| v.max(0.0), |x, _| if x > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn exp(&self) -> Tensor {
        self.unary(f32::exp, |_, y| y)
    }

    pub fn sum(&self) -> Tensor {
        let total: f32 = self.data().iter().sum();
        let n = self.numel();
        Tensor::from_op(vec![total], vec![1], vec![self.clone()], move |g| vec![Some(vec![g[0]; n])])
    }

    pub fn mean(&self) -> Tensor {
        let n = self.numel();
        self.sum().scale(1.0 / n as f32)
    }

    /// Sums out `axis`, dropping it from the shape.
    pub fn sum_axis(&self, axis: usize) -> Result<Tensor> {
        check_axis("sum_axis", self, axis)?;
        let (outer, dim, inner) = split_axis(self.shape(), axis);
        let x = self.data();
        let mut out = vec![0.0f32; outer * inner];
        for o in 0..outer {
            for d in 0..dim {
                let src = &x[(o * dim + d) * inner..(o * dim + d + 1) * inner];
                let dst = &mut out[o * inner..(o + 1) * inner];
                dst.iter_mut().zip(src).for_each(|(a, b)| *a += b);
            }
        }
        drop(x);
        Ok(Tensor::from_op(out, reduced_shape(self.shape(), axis), vec![self.clone()], move |g| {
            let mut dx = vec![0.0f32; outer * dim * inner];
            for o in 0..outer {
                let src = &g[o * inner..(o + 1) * inner];
                for d in 0..dim {
                    dx[(o * dim + d) * inner..(o * dim + d + 1) * inner].copy_from_slice(src);
                }
            }
            vec![Some(dx)]
        }))
    }

    pub fn mean_axis(&self, axis: usize) -> Result<Tensor> {
        check_axis("mean_axis", self, axis)?;
        let dim = self.shape()[axis];
        Ok(self.sum_axis(axis)?.scale(1.0 / dim as f32))
    }

    /// Minimum along `axis` (dropped from the shape). The gradient flows to
    /// the first index attaining the minimum.
    pub fn min_axis(&self, axis: usize) -> Result<Tensor> {
        check_axis("min_axis", self, axis)?;
        let (outer, dim, inner) = split_axis(self.shape(), axis);
        let x = self.data();
        let mut out = vec![f32::INFINITY; outer * inner];
        let mut arg = vec![0usize; outer * inner];
        for o in 0..outer {
            for d in 0..dim {
                for i in 0..inner {
                    let v = x[(o * dim + d) * inner + i];
                    let slot = o * inner + i;
                    if v < out[slot] {
                        out[slot] = v;
                        arg[slot] = d;
                    }
                }
            }
        }
        drop(x);
        Ok(Tensor::from_op(out, reduced_shape(self.shape(), axis), vec![self.clone()], move |g| {
            let mut dx = vec![0.0f32; outer * dim * inner];
            for o in 0..outer {
                for i in 0..inner {
                    let slot = o * inner + i;
                    dx[(o * dim + arg[slot]) * inner + i] += g[slot];
                }
            }
            vec![Some(dx)]
        }))
    }

    /// Softmax along `axis`, stabilized by subtracting the slice maximum.
    pub fn softmax(&self, axis: usize) -> Result<Tensor> {
        check_axis("softmax", self, axis)?;
        let (outer, dim, inner) = split_axis(self.shape(), axis);
        let x = self.data();
        let mut y = vec![0.0f32; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |d: usize| (o * dim + d) * inner + i;
                let max = (0..dim).map(|d| x[at(d)]).fold(f32::NEG_INFINITY, f32::max);
                let mut total = 0.0f32;
                for d in 0..dim {
                    let e = (x[at(d)] - max).exp();
                    y[at(d)] = e;
                    total += e;
                }
                for d in 0..dim {
                    y[at(d)] /= total;
                }
            }
        }
        drop(x);
        let y_saved = if self.requires_grad() { y.clone() } else { Vec::new() };
        Ok(Tensor::from_op(y, self.shape().to_vec(), vec![self.clone()], move |g| {
            let mut dx = vec![0.0f32; g.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let at = |d: usize| (o * dim + d) * inner + i;
                    let dot: f32 = (0..dim).map(|d| g[at(d)] * y_saved[at(d)]).sum();
                    for d in 0..dim {
                        dx[at(d)] = y_saved[at(d)] * (g[at(d)] - dot);
                    }
                }
            }
            vec![Some(dx)]
        }))
    }

    /// Row-major reinterpretation with the same element count.
    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.numel() || shape.contains(&0) {
            return Err(Error::ShapeMismatch {
                op: "reshape",
                lhs: self.shape().to_vec(),
                rhs: shape.to_vec(),
            });
        }
        Ok(Tensor::from_op(self.to_vec(), shape.to_vec(), vec![self.clone()], |g| vec![Some(g.to_vec())]))
    }

    fn as_matrix(&self, op: &'static str) -> Result<(usize, usize)> {
        match *self.shape() {
            [r, c] => Ok((r, c)),
            _ => Err(invalid(format!("{op}: expected a matrix, got shape {:?}", self.shape()))),
        }
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = self.as_matrix("matmul")?;
        let (k2, n) = other.as_matrix("matmul")?;
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape().to_vec(),
                rhs: other.shape().to_vec(),
            });
        }
        let mut out = vec![0.0f32; m * n];
        let rhs = other.to_vec();
        gemm(m, k, n, &self.data(), k, 1, &rhs, n, 1, &mut out);
        let (a, b) = (self.clone(), other.clone());
        let (need_a, need_b) = (self.requires_grad(), other.requires_grad());
        Ok(Tensor::from_op(out, vec![m, n], vec![self.clone(), other.clone()], move |g| {
            let da = need_a.then(|| {
                let mut da = vec![0.0f32; m * k];
                gemm(m, n, k, g, n, 1, &b.data(), 1, n, &mut da);
                da
            });
            let db = need_b.then(|| {
                let mut db = vec![0.0f32; k * n];
                gemm(k, m, n, &a.data(), 1, k, g, n, 1, &mut db);
                db
            });
            vec![da, db]
        }))
    }

    pub fn transpose(&self) -> Result<Tensor> {
        let (r, c) = self.as_matrix("transpose")?;
        let x = self.data();
        let mut out = vec![0.0f32; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = x[i * c + j];
            }
        }
        drop(x);
        Ok(Tensor::from_op(out, vec![c, r], vec![self.clone()], move |g| {
            let mut dx = vec![0.0f32; r * c];
            for i in 0..r {
                for j in 0..c {
                    dx[i * c + j] = g[j * r + i];
                }
            }
            vec![Some(dx)]
        }))
    }

    /// Adds a length-F vector to every slice along the last axis.
    pub fn add_bias(&self, bias: &Tensor) -> Result<Tensor> {
        let f = *self.shape().last().unwrap_or(&1);
        if bias.shape() != [f] {
            return Err(Error::ShapeMismatch {
                op: "add_bias",
                lhs: self.shape().to_vec(),
                rhs: bias.shape().to_vec(),
            });
        }
        let b = bias.data();
        let data = self.data().iter().enumerate().map(|(i, v)| v + b[i % f]).collect();
        drop(b);
        Ok(Tensor::from_op(data, self.shape().to_vec(), vec![self.clone(), bias.clone()], move |g| {
            let mut db = vec![0.0f32; f];
            for row in g.chunks_exact(f) {
                db.iter_mut().zip(row).for_each(|(a, b)| *a += b);
            }
            vec![Some(g.to_vec()), Some(db)]
        }))
    }

    /// Gathers rows of a matrix; repeated indices accumulate on backward.
    pub fn index_select(&self, rows: &[usize]) -> Result<Tensor> {
        let (r, c) = self.as_matrix("index_select")?;
        if let Some(&bad) = rows.iter().find(|&&i| i >= r) {
            return Err(invalid(format!("index_select: row {bad} out of range for {r} rows")));
        }
        if rows.is_empty() {
            return Err(invalid("index_select: empty index list"));
        }
        let x = self.data();
        let mut out = Vec::with_capacity(rows.len() * c);
        for &i in rows {
            out.extend_from_slice(&x[i * c..(i + 1) * c]);
        }
        drop(x);
        let rows = rows.to_vec();
        let n = rows.len();
        Ok(Tensor::from_op(out, vec![n, c], vec![self.clone()], move |g| {
            let mut dx = vec![0.0f32; r * c];
            for (k, &i) in rows.iter().enumerate() {
                let src = &g[k * c..(k + 1) * c];
                dx[i * c..(i + 1) * c].iter_mut().zip(src).for_each(|(a, b)| *a += b);
            }
            vec![Some(dx)]
        }))
    }

    /// Contiguous slice `[start, start + len)` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Tensor> {
        check_axis("narrow", self, axis)?;
        let (outer, dim, inner) = split_axis(self.shape(), axis);
        if len == 0 || start + len > dim {
            return Err(invalid(format!("narrow: range {start}..{} exceeds extent {dim}", start + len)));
        }
        let x = self.data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            out.extend_from_slice(&x[(o * dim + start) * inner..(o * dim + start + len) * inner]);
        }
        drop(x);
        let mut shape = self.shape().to_vec();
        shape[axis] = len;
        Ok(Tensor::from_op(out, shape, vec![self.clone()], move |g| {
            let mut dx = vec![0.0f32; outer * dim * inner];
            for o in 0..outer {
                dx[(o * dim + start) * inner..(o * dim + start + len) * inner]
                    .copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
            }
            vec![Some(dx)]
        }))
    }

    /// Concatenates tensors that agree on every axis except `axis`.
    pub fn concat(parts: &[Tensor], axis: usize) -> Result<Tensor> {
        let first = parts.first().ok_or_else(|| invalid("concat: no tensors"))?;
        check_axis("concat", first, axis)?;
        for p in parts {
            let ok = p.rank() == first.rank()
                && p.shape().iter().zip(first.shape()).enumerate().all(|(i, (a, b))| i == axis || a == b);
            if !ok {
                return Err(Error::ShapeMismatch {
                    op: "concat",
                    lhs: first.shape().to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
        }
        let (outer, _, inner) = split_axis(first.shape(), axis);
        let dims: Vec<usize> = parts.iter().map(|p| p.shape()[axis]).collect();
        let total: usize = dims.iter().sum();
        let mut out = Vec::with_capacity(outer * total * inner);
        let values: Vec<Vec<f32>> = parts.iter().map(|p| p.to_vec()).collect();
        for o in 0..outer {
            for (x, &d) in values.iter().zip(&dims) {
                out.extend_from_slice(&x[o * d * inner..(o + 1) * d * inner]);
            }
        }
        let mut shape = first.shape().to_vec();
        shape[axis] = total;
        Ok(Tensor::from_op(out, shape, parts.to_vec(), move |g| {
            let mut grads: Vec<Vec<f32>> = dims.iter().map(|&d| Vec::with_capacity(outer * d * inner)).collect();
            let mut cursor = 0;
            for _ in 0..outer {
                for (dst, &d) in grads.iter_mut().zip(&dims) {
                    dst.extend_from_slice(&g[cursor..cursor + d * inner]);
                    cursor += d * inner;
                }
            }
            grads.into_iter().map(Some).collect()
        }))
    }

    /// Euclidean distances between the rows of two point matrices, `n×m`.
    /// The gradient at coincident points is taken to be zero.
    pub fn pairwise_distance(&self, other: &Tensor) -> Result<Tensor> {
        let (n, d) = self.as_matrix("pairwise_distance")?;
        let (m, d2) = other.as_matrix("pairwise_distance")?;
        if d != d2 {
            return Err(Error::ShapeMismatch {
                op: "pairwise_distance",
                lhs: self.shape().to_vec(),
                rhs: other.shape().to_vec(),
            });
        }
        let a = self.to_vec();
        let b = other.to_vec();
        let mut out = vec![0.0f32; n * m];
        for i in 0..n {
            let ai = &a[i * d..(i + 1) * d];
            for j in 0..m {
                let bj = &b[j * d..(j + 1) * d];
                let s: f32 = ai.iter().zip(bj).map(|(x, y)| (x - y) * (x - y)).sum();
                out[i * m + j] = s.sqrt();
            }
        }
        let dist = if self.requires_grad() || other.requires_grad() { out.clone() } else { Vec::new() };
        Ok(Tensor::from_op(out, vec![n, m], vec![self.clone(), other.clone()], move |g| {
            let mut da = vec![0.0f32; n * d];
            let mut db = vec![0.0f32; m * d];
            for i in 0..n {
                for j in 0..m {
                    let gij = g[i * m + j];
                    let dij = dist[i * m + j];
                    if gij == 0.0 || dij == 0.0 {
                        continue;
                    }
                    let w = gij / dij;
                    for c in 0..d {
                        let diff = a[i * d + c] - b[j * d + c];
                        da[i * d + c] += w * diff;
                        db[j * d + c] -= w * diff;
                    }
                }
            }
            vec![Some(da), Some(db)]
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    Train,
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f32>,
    pub var: Vec<f32>,
}

impl RunningStats {
    /// Zero mean, unit variance.
    pub fn identity(features: usize) -> Self {
        RunningStats {
            mean: vec![0.0; features],
            var: vec![1.0; features],
        }
    }
}

/// Per-feature normalization over every axis but the last.
///
/// Train mode normalizes with the biased batch variance and folds the batch
/// statistics into `stats` (unbiased variance, momentum [`BN_MOMENTUM`]),
/// starting from [`RunningStats::identity`] when none exist yet. Eval mode
/// uses `stats` only and fails if there are none.
pub fn batch_norm(
    x: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    stats: &Mutex<Option<RunningStats>>,
    mode: BnMode,
) -> Result<Tensor> {
    let f = *x.shape().last().unwrap_or(&1);
    if x.rank() < 2 || gamma.shape() != [f] || beta.shape() != [f] {
        return Err(Error::ShapeMismatch {
            op: "batch_norm",
            lhs: x.shape().to_vec(),
            rhs: gamma.shape().to_vec(),
        });
    }
    let rows = x.numel() / f;
    let xv = x.to_vec();

    let (mean, var) = match mode {
        BnMode::Train => {
            if rows < 2 {
                return Err(invalid("batch_norm: training needs at least two rows per feature"));
            }
            let mut mean = vec![0.0f64; f];
            for row in xv.chunks_exact(f) {
                mean.iter_mut().zip(row).for_each(|(m, &v)| *m += v as f64);
            }
            mean.iter_mut().for_each(|m| *m /= rows as f64);
            let mut var = vec![0.0f64; f];
            for row in xv.chunks_exact(f) {
                for c in 0..f {
                    let d = row[c] as f64 - mean[c];
                    var[c] += d * d;
                }
            }
            var.iter_mut().for_each(|v| *v /= rows as f64);

            let mut guard = stats.lock().expect("running stats lock poisoned");
            let running = guard.get_or_insert_with(|| RunningStats::identity(f));
            if running.mean.len() != f {
                return Err(Error::ShapeMismatch {
                    op: "batch_norm",
                    lhs: vec![running.mean.len()],
                    rhs: vec![f],
                });
            }
            let unbias = rows as f64 / (rows as f64 - 1.0);
            for c in 0..f {
                running.mean[c] = (1.0 - BN_MOMENTUM) * running.mean[c] + BN_MOMENTUM * mean[c] as f32;
                running.var[c] = (1.0 - BN_MOMENTUM) * running.var[c] + BN_MOMENTUM * (var[c] * unbias) as f32;
            }
            (
                mean.into_iter().map(|v| v as f32).collect::<Vec<_>>(),
                var.into_iter().map(|v| v as f32).collect::<Vec<_>>(),
            )
        }
        BnMode::Eval => {
            let guard = stats.lock().expect("running stats lock poisoned");
            let running = guard.as_ref().ok_or(Error::MissingRunningStats)?;
            if running.mean.len() != f {
                return Err(Error::ShapeMismatch {
                    op: "batch_norm",
                    lhs: vec![running.mean.len()],
                    rhs: vec![f],
                });
            }
            (running.mean.clone(), running.var.clone())
        }
    };

    let inv_std: Vec<f32> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
    let g = gamma.to_vec();
    let b = beta.to_vec();
    let mut xhat = vec![0.0f32; xv.len()];
    let mut out = vec![0.0f32; xv.len()];
    for (r, row) in xv.chunks_exact(f).enumerate() {
        for c in 0..f {
            let h = (row[c] - mean[c]) * inv_std[c];
            xhat[r * f + c] = h;
            out[r * f + c] = g[c] * h + b[c];
        }
    }

    Ok(Tensor::from_op(
        out,
        x.shape().to_vec(),
        vec![x.clone(), gamma.clone(), beta.clone()],
        move |dy| {
            let mut dgamma = vec![0.0f32; f];
            let mut dbeta = vec![0.0f32; f];
            for r in 0..rows {
                for c in 0..f {
                    dgamma[c] += dy[r * f + c] * xhat[r * f + c];
                    dbeta[c] += dy[r * f + c];
                }
            }
            let mut dx = vec![0.0f32; rows * f];
            match mode {
                BnMode::Eval => {
                    for r in 0..rows {
                        for c in 0..f {
                            dx[r * f + c] = dy[r * f + c] * g[c] * inv_std[c];
                        }
                    }
                }
                BnMode::Train => {
                    let n = rows as f32;
                    // dxhat sums: sum(dxhat) = gamma * dbeta, sum(dxhat * xhat) = gamma * dgamma
                    for r in 0..rows {
                        for c in 0..f {
                            let dxhat = dy[r * f + c] * g[c];
                            dx[r * f + c] = inv_std[c] / n
                                * (n * dxhat - g[c] * dbeta[c] - xhat[r * f + c] * g[c] * dgamma[c]);
                        }
                    }
                }
            }
            vec![Some(dx), Some(dgamma), Some(dbeta)]
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(data: &[f32], shape: &[usize]) -> Tensor {
        Tensor::new(data.to_vec(), shape).unwrap()
    }

    fn close(a: &[f32], b: &[f32], tol: f32) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn matmul_examples() {
        let m = t(&[1., 2., 3., 4.], &[2, 2]);
        let eye = t(&[1., 0., 0., 1.], &[2, 2]);
        assert_eq!(eye.matmul(&m).unwrap().to_vec(), vec![1., 2., 3., 4.]);
        assert_eq!(m.matmul(&Tensor::zeros(&[2, 2])).unwrap().to_vec(), vec![0.; 4]);
        let v = t(&[5., 6.], &[2, 1]);
        let p = m.matmul(&v).unwrap();
        assert_eq!(p.shape(), &[2, 1]);
        assert_eq!(p.to_vec(), vec![17., 39.]);
    }

    #[test]
    fn matmul_shape_error_names_both() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[2, 3]);
        let err = a.matmul(&b).unwrap_err().to_string();
        assert!(err.contains("[2, 3]"), "{err}");
    }

    #[test]
    fn softmax_examples() {
        let u = t(&[0., 0., 0.], &[3]).softmax(0).unwrap().to_vec();
        close(&u, &[1. / 3.; 3], 1e-7);
        let x = t(&[0., 3f32.ln()], &[2]).softmax(0).unwrap().to_vec();
        close(&x, &[0.25, 0.75], 1e-6);
        let a = t(&[0.3, -1.2, 2.0, 0.1], &[2, 2]);
        let shifted = a.add_scalar(7.5);
        close(&a.softmax(1).unwrap().to_vec(), &shifted.softmax(1).unwrap().to_vec(), 1e-6);
        assert!(matches!(a.softmax(2), Err(Error::AxisOutOfRange { .. })));
    }

    #[test]
    fn softmax_survives_large_logits() {
        let y = t(&[1000., 1000.], &[2]).softmax(0).unwrap().to_vec();
        close(&y, &[0.5, 0.5], 1e-7);
    }

    #[test]
    fn batch_norm_train_normalizes() {
        let x = t(&[1., 10., 2., 20., 3., 30., 6., 0.], &[4, 2]);
        let gamma = Tensor::param(vec![1., 1.], &[2]).unwrap();
        let beta = Tensor::param(vec![0., 0.], &[2]).unwrap();
        let stats = Mutex::new(None);
        let y = batch_norm(&x, &gamma, &beta, &stats, BnMode::Train).unwrap().to_vec();
        for c in 0..2 {
            let col: Vec<f32> = (0..4).map(|r| y[r * 2 + c]).collect();
            let mean: f32 = col.iter().sum::<f32>() / 4.0;
            let var: f32 = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f32>() / 4.0;
            assert!(mean.abs() < 1e-4);
            assert!((var - 1.0).abs() < 1e-4);
        }
        let s = stats.lock().unwrap().clone().unwrap();
        // running mean = 0.9 * 0 + 0.1 * 3
        assert!((s.mean[0] - 0.3).abs() < 1e-6);
    }

    #[test]
    fn batch_norm_constant_input() {
        let x = t(&[2.5; 6], &[3, 2]);
        let gamma = Tensor::param(vec![1., 1.], &[2]).unwrap();
        let beta = Tensor::param(vec![5., 5.], &[2]).unwrap();
        let y = batch_norm(&x, &gamma, &beta, &Mutex::new(None), BnMode::Train).unwrap();
        close(&y.to_vec(), &[5.0; 6], 0.0);
    }

    #[test]
    fn batch_norm_eval() {
        let x = t(&[4.0, 4.0], &[2, 1]);
        let gamma = Tensor::param(vec![1.], &[1]).unwrap();
        let beta = Tensor::param(vec![0.], &[1]).unwrap();
        let stats = Mutex::new(Some(RunningStats {
            mean: vec![2.0],
            var: vec![4.0],
        }));
        let y = batch_norm(&x, &gamma, &beta, &stats, BnMode::Eval).unwrap().to_vec();
        let expected = (4.0f32 - 2.0) / (4.0f32 + BN_EPS).sqrt();
        close(&y, &[expected, expected], 1e-7);
        assert!((y[0] - 1.0).abs() < 1e-5);

        let empty = Mutex::new(None);
        assert!(matches!(
            batch_norm(&x, &gamma, &beta, &empty, BnMode::Eval),
            Err(Error::MissingRunningStats)
        ));
    }

    #[test]
    fn batch_norm_rejects_single_row_training() {
        let x = t(&[1.0, 2.0], &[1, 2]);
        let gamma = Tensor::param(vec![1., 1.], &[2]).unwrap();
        let beta = Tensor::param(vec![0., 0.], &[2]).unwrap();
        assert!(batch_norm(&x, &gamma, &beta, &Mutex::new(None), BnMode::Train).is_err());
    }

    #[test]
    fn min_axis_routes_to_argmin() {
        let x = Tensor::param(vec![3., 1., 2., 0., 5., -1.], &[2, 3]).unwrap();
        let m = x.min_axis(1).unwrap();
        assert_eq!(m.to_vec(), vec![1., -1.]);
        m.sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![0., 1., 0., 0., 0., 1.]);
    }

    #[test]
    fn narrow_concat_roundtrip() {
        let x = t(&(0..12).map(|v| v as f32).collect::<Vec<_>>(), &[3, 4]);
        let a = x.narrow(1, 0, 1).unwrap();
        let b = x.narrow(1, 1, 3).unwrap();
        assert_eq!(a.to_vec(), vec![0., 4., 8.]);
        let back = Tensor::concat(&[a, b], 1).unwrap();
        assert_eq!(back.to_vec(), x.to_vec());
        assert!(x.narrow(0, 2, 2).is_err());
    }

    #[test]
    fn pairwise_distance_values() {
        let a = t(&[0., 0., 0.], &[1, 3]);
        let b = t(&[3., 4., 0., 0., 0., 0.], &[2, 3]);
        assert_eq!(a.pairwise_distance(&b).unwrap().to_vec(), vec![5., 0.]);
    }
}
