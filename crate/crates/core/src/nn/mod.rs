//! A fixed-topology 1-D convolutional regressor with hand-written backprop.
//!
//! Input is an `M × N` block of raw microphone samples; output is a 3-D
//! position in meters. The network is a stack of conv blocks (conv → ReLU →
//! optional max-pool), a ReLU hidden layer with dropout and a linear output.

mod adam;
mod checkpoint;
pub mod gradcheck;
pub mod layers;
mod loss;
mod network;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{AdamState, Checkpoint, Lineage, CHECKPOINT_VERSION};
pub use loss::mse_loss;
pub use network::{
    ConvBlock, ForwardCache, Gradients, LayerShape, Mode, Network, NetworkSpec, REFERENCE_BLOCKS, REFERENCE_DROPOUT,
    REFERENCE_HIDDEN,
};
pub use tensor::Tensor;

use core::fmt::Debug;
use core::iter::Sum;
use core::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type of tensors: `f64` for verification, `f32`
/// for production runs.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + AddAssign + SubAssign + MulAssign + Default + Debug + Send + Sync + 'static
{
    fn lit(v: f64) -> Self {
        <Self as FromPrimitive>::from_f64(v).expect("representable")
    }

    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
