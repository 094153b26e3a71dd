use core::fmt::Debug;
use num_traits::Float;

/// Element type of tensors.
///
/// Networks run in `f32`. Everything is generic so that gradient checks can
/// instantiate the exact same code at `f64`, where central differences are
/// not swamped by rounding noise.
pub trait Real: Float + Debug + Default + Send + Sync + core::iter::Sum + 'static {
    /// Widen to the reduction accumulator type.
    fn widen(self) -> f64;
    fn narrow(v: f64) -> Self;
}

impl Real for f32 {
    #[inline(always)]
    fn widen(self) -> f64 {
        self as f64
    }
    #[inline(always)]
    fn narrow(v: f64) -> Self {
        v as f32
    }
}

impl Real for f64 {
    #[inline(always)]
    fn widen(self) -> f64 {
        self
    }
    #[inline(always)]
    fn narrow(v: f64) -> Self {
        v
    }
}
