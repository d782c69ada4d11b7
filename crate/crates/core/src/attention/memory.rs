use std::ops::{Deref, DerefMut};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Default)]
struct Counters {
    current: AtomicUsize,
    peak: AtomicUsize,
    allocations: AtomicUsize,
}

/// Tracks live and peak bytes of the buffers registered with it. Clones
/// share the same counters.
#[derive(Debug, Clone, Default)]
pub struct MemoryAccountant {
    inner: Arc<Counters>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MemoryReport {
    pub peak_bytes: usize,
    pub current_bytes: usize,
    pub allocations: usize,
}

impl MemoryAccountant {
    pub fn new() -> Self {
        Self::default()
    }

    fn add(&self, bytes: usize) {
        let now = self.inner.current.fetch_add(bytes, Ordering::SeqCst) + bytes;
        self.inner.peak.fetch_max(now, Ordering::SeqCst);
        self.inner.allocations.fetch_add(1, Ordering::SeqCst);
    }

    fn sub(&self, bytes: usize) {
        self.inner.current.fetch_sub(bytes, Ordering::SeqCst);
    }

    pub fn current_bytes(&self) -> usize {
        self.inner.current.load(Ordering::SeqCst)
    }

    pub fn peak_bytes(&self) -> usize {
        self.inner.peak.load(Ordering::SeqCst)
    }

    /// Restart peak tracking from the current live size.
    pub fn reset_peak(&self) {
        self.inner.peak.store(self.current_bytes(), Ordering::SeqCst);
        self.inner.allocations.store(0, Ordering::SeqCst);
    }

    pub fn report(&self) -> MemoryReport {
        MemoryReport {
            peak_bytes: self.peak_bytes(),
            current_bytes: self.current_bytes(),
            allocations: self.inner.allocations.load(Ordering::SeqCst),
        }
    }
}

/// A zero-initialised vector whose size is charged to an accountant for
/// as long as it lives.
#[derive(Debug)]
pub struct TrackedBuf<T> {
    data: Vec<T>,
    owner: Option<MemoryAccountant>,
}

impl<T: Copy + Default> TrackedBuf<T> {
    pub fn zeros(len: usize, owner: Option<&MemoryAccountant>) -> Self {
        if let Some(a) = owner {
            a.add(len * std::mem::size_of::<T>());
        }
        Self {
            data: vec![T::default(); len],
            owner: owner.cloned(),
        }
    }

    pub fn bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<T>()
    }
}

impl<T> Drop for TrackedBuf<T> {
    fn drop(&mut self) {
        if let Some(a) = &self.owner {
            a.sub(self.data.len() * std::mem::size_of::<T>());
        }
    }
}

impl<T> Deref for TrackedBuf<T> {
    type Target = [T];
    fn deref(&self) -> &[T] {
        &self.data
    }
}

impl<T> DerefMut for TrackedBuf<T> {
    fn deref_mut(&mut self) -> &mut [T] {
        &mut self.data
    }
}

/// Dense row-major `f32` tensor.
#[derive(Debug)]
pub struct Tensor {
    shape: Vec<usize>,
    strides: Vec<usize>,
    buf: TrackedBuf<f32>,
}

impl Tensor {
    pub fn zeros(shape: &[usize], owner: Option<&MemoryAccountant>) -> Self {
        let mut strides = vec![1; shape.len()];
        for k in (0..shape.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * shape[k + 1];
        }
        Self {
            shape: shape.to_vec(),
            strides,
            buf: TrackedBuf::zeros(shape.iter().product(), owner),
        }
    }

    pub fn untracked(shape: &[usize]) -> Self {
        Self::zeros(shape, None)
    }

    pub fn from_vec(shape: &[usize], data: Vec<f32>) -> Result<Self> {
        let mut t = Self::untracked(shape);
        if data.len() != t.len() {
            return Err(Error::ShapeMismatch {
                expected: t.len(),
                got: data.len(),
            });
        }
        t.data_mut().copy_from_slice(&data);
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn strides(&self) -> &[usize] {
        &self.strides
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn data(&self) -> &[f32] {
        &self.buf
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.buf
    }

    pub fn offset(&self, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.shape.len());
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    pub fn at(&self, idx: &[usize]) -> f32 {
        self.buf[self.offset(idx)]
    }

    /// Contiguous innermost row starting at `idx` (all but the last axis).
    pub fn row(&self, idx: &[usize]) -> &[f32] {
        let d = *self.shape.last().unwrap_or(&1);
        let mut full = idx.to_vec();
        full.push(0);
        let o = self.offset(&full);
        &self.buf[o..o + d]
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f32 {
        assert_eq!(self.shape, other.shape);
        self.data()
            .iter()
            .zip(other.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f32::max)
    }
}

impl Clone for Tensor {
    fn clone(&self) -> Self {
        let mut t = Tensor::zeros(&self.shape, self.buf.owner.as_ref());
        t.data_mut().copy_from_slice(self.data());
        t
    }
}
