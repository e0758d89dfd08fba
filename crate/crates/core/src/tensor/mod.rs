//! Dense `f32` tensors with define-by-run reverse-mode differentiation.
//!
//! Every op builds a fresh node whose backward closure maps the output
//! gradient to one optional gradient per parent. Nodes hold their parents
//! through `Arc`, so the graph lives exactly as long as the tensors that
//! reference it. Leaf tensors created with [`Tensor::param`] accumulate
//! gradients across calls to [`Tensor::backward`] until [`Tensor::zero_grad`].

pub mod checkpoint;
pub mod gradcheck;
mod ops;
pub mod optim;

use std::cell::Cell;
use std::collections::HashMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock, RwLockReadGuard};

use crate::error::{Error, Result};

pub use ops::{batch_norm, BnMode, RunningStats, BN_EPS, BN_MOMENTUM};

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

/// Disables graph recording on the current thread while alive.
pub struct NoGradGuard {
    prev: bool,
}

pub fn no_grad() -> NoGradGuard {
    let prev = GRAD_ENABLED.with(|g| g.replace(false));
    NoGradGuard { prev }
}

impl Drop for NoGradGuard {
    fn drop(&mut self) {
        GRAD_ENABLED.with(|g| g.set(self.prev));
    }
}

pub fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|g| g.get())
}

type BackwardFn = Box<dyn Fn(&[f32]) -> Vec<Option<Vec<f32>>> + Send + Sync>;

struct GradFn {
    parents: Vec<Tensor>,
    backward: BackwardFn,
}

struct Node {
    id: u64,
    shape: Vec<usize>,
    data: RwLock<Vec<f32>>,
    requires_grad: bool,
    grad: Mutex<Option<Vec<f32>>>,
    grad_fn: Option<GradFn>,
}

#[derive(Clone)]
pub struct Tensor {
    node: Arc<Node>,
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let data = self.data();
        let preview: Vec<f32> = data.iter().take(8).copied().collect();
        f.debug_struct("Tensor")
            .field("shape", &self.node.shape)
            .field("requires_grad", &self.node.requires_grad)
            .field("data", &preview)
            .finish()
    }
}

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

impl Tensor {
    fn build(data: Vec<f32>, shape: Vec<usize>, requires_grad: bool, grad_fn: Option<GradFn>) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor {
            node: Arc::new(Node {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RwLock::new(data),
                requires_grad,
                grad: Mutex::new(None),
                grad_fn,
            }),
        }
    }

    /// Constant tensor that never receives gradients.
    pub fn new(data: Vec<f32>, shape: &[usize]) -> Result<Self> {
        Self::checked(data, shape, false)
    }

    /// Trainable leaf tensor.
    pub fn param(data: Vec<f32>, shape: &[usize]) -> Result<Self> {
        Self::checked(data, shape, true)
    }

    fn checked(data: Vec<f32>, shape: &[usize], requires_grad: bool) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::InvalidArgument(format!("tensor extents must be positive, got {shape:?}")));
        }
        if numel(shape) != data.len() {
            return Err(Error::ShapeMismatch {
                op: "tensor",
                lhs: shape.to_vec(),
                rhs: vec![data.len()],
            });
        }
        Ok(Self::build(data, shape.to_vec(), requires_grad, None))
    }

    pub fn scalar(value: f32) -> Self {
        Self::build(vec![value], vec![1], false, None)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::build(vec![0.0; numel(shape)], shape.to_vec(), false, None)
    }

    /// Result of an op: records the backward closure only when some parent
    /// participates in differentiation and recording is enabled.
    pub(crate) fn from_op(
        data: Vec<f32>,
        shape: Vec<usize>,
        parents: Vec<Tensor>,
        backward: impl Fn(&[f32]) -> Vec<Option<Vec<f32>>> + Send + Sync + 'static,
    ) -> Self {
        let track = grad_enabled() && parents.iter().any(|p| p.requires_grad());
        if track {
            let grad_fn = GradFn {
                parents,
                backward: Box::new(backward),
            };
            Self::build(data, shape, true, Some(grad_fn))
        } else {
            Self::build(data, shape, false, None)
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.node.shape
    }

    pub fn rank(&self) -> usize {
        self.node.shape.len()
    }

    pub fn numel(&self) -> usize {
        numel(&self.node.shape)
    }

    pub fn requires_grad(&self) -> bool {
        self.node.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.node.grad_fn.is_none()
    }

    pub fn data(&self) -> RwLockReadGuard<'_, Vec<f32>> {
        self.node.data.read().expect("tensor data lock poisoned")
    }

    pub fn to_vec(&self) -> Vec<f32> {
        self.data().clone()
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> f32 {
        let data = self.data();
        assert_eq!(data.len(), 1, "item() on tensor of shape {:?}", self.shape());
        data[0]
    }

    /// Overwrites the values in place. Only meaningful for leaves; graphs
    /// already built on top of this tensor see the new values on backward.
    pub fn update_data(&self, f: impl FnOnce(&mut [f32])) {
        let mut data = self.node.data.write().expect("tensor data lock poisoned");
        f(&mut data);
    }

    pub fn set_data(&self, values: &[f32]) -> Result<()> {
        if values.len() != self.numel() {
            return Err(Error::ShapeMismatch {
                op: "set_data",
                lhs: self.shape().to_vec(),
                rhs: vec![values.len()],
            });
        }
        self.update_data(|d| d.copy_from_slice(values));
        Ok(())
    }

    pub fn grad(&self) -> Option<Vec<f32>> {
        self.node.grad.lock().expect("grad lock poisoned").clone()
    }

    pub fn zero_grad(&self) {
        *self.node.grad.lock().expect("grad lock poisoned") = None;
    }

    /// Same values, detached from any graph.
    pub fn detach(&self) -> Tensor {
        Self::build(self.to_vec(), self.shape().to_vec(), false, None)
    }

    /// Accumulates d(self)/d(leaf) into every reachable leaf that requires
    /// gradients.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(Error::NonScalarLoss(self.shape().to_vec()));
        }
        if !self.requires_grad() {
            return Ok(());
        }

        // Iterative post-order DFS gives a topological order.
        let mut order: Vec<Tensor> = Vec::new();
        let mut visited: HashMap<u64, ()> = HashMap::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if visited.insert(t.node.id, ()).is_some() {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(gf) = &t.node.grad_fn {
                for p in &gf.parents {
                    if p.requires_grad() && !visited.contains_key(&p.node.id) {
                        stack.push((p.clone(), false));
                    }
                }
            }
        }

        let mut grads: HashMap<u64, Vec<f32>> = HashMap::new();
        grads.insert(self.node.id, vec![1.0]);
        for t in order.iter().rev() {
            let Some(g) = grads.remove(&t.node.id) else {
                continue;
            };
            match &t.node.grad_fn {
                Some(gf) => {
                    let parent_grads = (gf.backward)(&g);
                    debug_assert_eq!(parent_grads.len(), gf.parents.len());
                    for (p, pg) in gf.parents.iter().zip(parent_grads) {
                        let Some(pg) = pg else { continue };
                        if !p.requires_grad() {
                            continue;
                        }
                        debug_assert_eq!(pg.len(), p.numel());
                        match grads.get_mut(&p.node.id) {
                            Some(acc) => acc.iter_mut().zip(&pg).for_each(|(a, b)| *a += b),
                            None => {
                                grads.insert(p.node.id, pg);
                            }
                        }
                    }
                }
                None => {
                    let mut slot = t.node.grad.lock().expect("grad lock poisoned");
                    match slot.as_mut() {
                        Some(acc) => acc.iter_mut().zip(&g).for_each(|(a, b)| *a += b),
                        None => *slot = Some(g),
                    }
                }
            }
        }
        Ok(())
    }
}
