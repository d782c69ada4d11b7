//! CPU reference for biased triangular attention.
//!
//! Tensors are flat `f32` buffers with row-major shapes. Every buffer the
//! kernels allocate goes through a [`MemoryAccountant`], so the memory
//! behaviour of the naive and tiled paths can be compared directly.

mod biased;
mod memory;
mod window;

pub use biased::{
    naive_biased_attention, tiled_biased_attention, tiled_biased_attention_backward, AttentionGradients,
    AttentionOutput, BiasedAttentionProblem,
};
pub use memory::{MemoryAccountant, MemoryReport, Tensor, TrackedBuf};
pub use window::{sliding_window_attention, BandedPairBias, SlidingWindowAttention, SlidingWindowSpec, WindowOutput};
