use std::cell::Cell;
use std::collections::HashSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard, RwLock, RwLockReadGuard};

use crate::scalar::Scalar;

static NEXT_ID: AtomicU64 = AtomicU64::new(0);

thread_local! {
    static RECORDING: Cell<bool> = const { Cell::new(true) };
}

/// Disables graph recording on the current thread while alive.
///
/// Forward passes made under the guard produce plain tensors with no
/// backward nodes, which is what evaluation and metric computation want.
pub struct NoGradGuard {
    prev: bool,
}

impl NoGradGuard {
    #[allow(clippy::new_without_default)]
    pub fn new() -> Self {
        let prev = RECORDING.with(|r| r.replace(false));
        NoGradGuard { prev }
    }
}

impl Drop for NoGradGuard {
    fn drop(&mut self) {
        let prev = self.prev;
        RECORDING.with(|r| r.set(prev));
    }
}

pub(crate) fn recording() -> bool {
    RECORDING.with(|r| r.get())
}

/// Backward step of one recorded operation. Receives the output gradient and
/// the operation's parents, and accumulates into each parent that wants grad.
pub type BackwardFn<S> = Box<dyn Fn(&[S], &[Tensor<S>]) + Send + Sync>;

pub(crate) struct Node<S: Scalar> {
    pub parents: Vec<Tensor<S>>,
    pub backward: BackwardFn<S>,
}

pub(crate) struct Inner<S: Scalar> {
    id: u64,
    shape: Vec<usize>,
    data: RwLock<Vec<S>>,
    grad: Mutex<Option<Vec<S>>>,
    requires_grad: bool,
    node: Option<Node<S>>,
}

/// Dense n-dimensional array participating in reverse-mode differentiation.
///
/// Cloning is cheap: clones share storage. Operations on tensors that
/// (transitively) require grad record a backward node while recording is
/// enabled; [`backward`] then walks the recorded graph.
pub struct Tensor<S: Scalar> {
    inner: Arc<Inner<S>>,
}

impl<S: Scalar> Clone for Tensor<S> {
    fn clone(&self) -> Self {
        Tensor {
            inner: Arc::clone(&self.inner),
        }
    }
}

impl<S: Scalar> std::fmt::Debug for Tensor<S> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.inner.id)
            .field("shape", &self.inner.shape)
            .field("requires_grad", &self.inner.requires_grad)
            .finish()
    }
}

fn check_len(shape: &[usize], len: usize) {
    let expect: usize = shape.iter().product();
    assert_eq!(
        expect, len,
        "tensor data length {len} does not match shape {shape:?}"
    );
}

impl<S: Scalar> Tensor<S> {
    fn alloc(shape: Vec<usize>, data: Vec<S>, requires_grad: bool, node: Option<Node<S>>) -> Self {
        check_len(&shape, data.len());
        Tensor {
            inner: Arc::new(Inner {
                id: NEXT_ID.fetch_add(1, Ordering::Relaxed),
                shape,
                data: RwLock::new(data),
                grad: Mutex::new(None),
                requires_grad,
                node,
            }),
        }
    }

    /// Non-differentiable tensor (network input, fixed constant).
    pub fn from_vec(shape: &[usize], data: Vec<S>) -> Self {
        Self::alloc(shape.to_vec(), data, false, None)
    }

    /// Leaf tensor that accumulates gradient (a learnable parameter).
    pub fn param(shape: &[usize], data: Vec<S>) -> Self {
        Self::alloc(shape.to_vec(), data, true, None)
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::from_vec(shape, vec![S::zero(); shape.iter().product()])
    }

    pub fn full(shape: &[usize], v: S) -> Self {
        Self::from_vec(shape, vec![v; shape.iter().product()])
    }

    pub fn scalar(v: S) -> Self {
        Self::from_vec(&[1], vec![v])
    }

    /// Output of a recorded operation. Records the node only while recording
    /// is enabled and some parent requires grad.
    pub(crate) fn from_op(
        shape: Vec<usize>,
        data: Vec<S>,
        parents: Vec<Tensor<S>>,
        backward: BackwardFn<S>,
    ) -> Self {
        let track = recording() && parents.iter().any(|p| p.requires_grad());
        if track {
            Self::alloc(shape, data, true, Some(Node { parents, backward }))
        } else {
            Self::alloc(shape, data, false, None)
        }
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn rank(&self) -> usize {
        self.inner.shape.len()
    }

    pub fn len(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    pub fn data(&self) -> RwLockReadGuard<'_, Vec<S>> {
        self.inner.data.read().expect("tensor data lock poisoned")
    }

    /// Mutable access to the raw values. Intended for leaf tensors
    /// (parameter updates, running statistics); mutating a recorded
    /// intermediate invalidates any graph that references it.
    pub fn data_mut(&self) -> std::sync::RwLockWriteGuard<'_, Vec<S>> {
        self.inner.data.write().expect("tensor data lock poisoned")
    }

    pub fn to_vec(&self) -> Vec<S> {
        self.data().clone()
    }

    pub fn item(&self) -> S {
        assert_eq!(self.len(), 1, "item() on non-scalar tensor");
        self.data()[0]
    }

    fn grad_lock(&self) -> MutexGuard<'_, Option<Vec<S>>> {
        self.inner.grad.lock().expect("tensor grad lock poisoned")
    }

    /// Clone of the accumulated gradient, if any pass reached this tensor.
    pub fn grad(&self) -> Option<Vec<S>> {
        self.grad_lock().clone()
    }

    /// Gradient with absent treated as zero (parameters unreachable from the
    /// loss get an all-zero gradient).
    pub fn grad_or_zeros(&self) -> Vec<S> {
        self.grad_lock()
            .clone()
            .unwrap_or_else(|| vec![S::zero(); self.len()])
    }

    pub fn zero_grad(&self) {
        *self.grad_lock() = None;
    }

    pub fn accumulate_grad(&self, g: &[S]) {
        assert_eq!(g.len(), self.len(), "gradient length mismatch");
        let mut guard = self.grad_lock();
        match guard.as_mut() {
            Some(acc) => {
                for (a, &v) in acc.iter_mut().zip(g) {
                    *a = *a + v;
                }
            }
            None => *guard = Some(g.to_vec()),
        }
    }

    /// Copy with the same values and no history; does not require grad.
    pub fn detach(&self) -> Tensor<S> {
        Tensor::from_vec(&self.inner.shape.clone(), self.to_vec())
    }
}

/// Runs reverse-mode differentiation from a scalar loss, accumulating
/// gradients into every tensor on a grad-requiring path.
///
/// Panics if `loss` is not a scalar. Tensors not reached keep their gradient
/// untouched (read back as zeros through [`Tensor::grad_or_zeros`]).
pub fn backward<S: Scalar>(loss: &Tensor<S>) {
    assert_eq!(loss.len(), 1, "backward requires a scalar loss");
    if !loss.inner.requires_grad {
        return;
    }

    // Post-order DFS; reversing it gives a valid topological order, so each
    // tensor's gradient is complete before its own backward step runs.
    let mut order: Vec<Tensor<S>> = Vec::new();
    let mut seen: HashSet<u64> = HashSet::new();
    let mut stack: Vec<(Tensor<S>, usize)> = vec![(loss.clone(), 0)];
    seen.insert(loss.id());
    while let Some((t, child)) = stack.pop() {
        let n_parents = t.inner.node.as_ref().map_or(0, |n| n.parents.len());
        if child < n_parents {
            stack.push((t.clone(), child + 1));
            let p = t.inner.node.as_ref().unwrap().parents[child].clone();
            if p.inner.requires_grad && seen.insert(p.id()) {
                stack.push((p, 0));
            }
        } else {
            order.push(t);
        }
    }

    loss.accumulate_grad(&[S::one()]);
    for t in order.iter().rev() {
        if let Some(node) = t.inner.node.as_ref() {
            let g = t
                .grad()
                .expect("internal: node reached in topo order without gradient");
            (node.backward)(&g, &node.parents);
        }
    }
}
