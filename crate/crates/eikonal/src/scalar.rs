//! Floating-point scalar abstraction.
//!
//! Every solver in this crate is generic over [`Scalar`], which is any IEEE
//! float (`f32` or `f64`) plus an associated atomic storage type. The atomic
//! storage matters for the shared-memory solvers: gridpoint values are read
//! across worker threads without locks, so stores must be indivisible at the
//! word level (a torn 8-byte write could materialize a value that was never
//! written). Values are stored as raw bit patterns in `AtomicU32`/`AtomicU64`.

use std::fmt;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

/// Word-indivisible storage for a scalar, with explicit memory orderings.
pub trait AtomicScalar<S>: Send + Sync {
    fn new(value: S) -> Self;
    fn load(&self, order: Ordering) -> S;
    fn store(&self, value: S, order: Ordering);
}

/// An `f64` stored as its bit pattern in an `AtomicU64`.
pub struct AtomicF64(AtomicU64);

impl AtomicScalar<f64> for AtomicF64 {
    #[inline]
    fn new(value: f64) -> Self {
        AtomicF64(AtomicU64::new(value.to_bits()))
    }
    #[inline]
    fn load(&self, order: Ordering) -> f64 {
        f64::from_bits(self.0.load(order))
    }
    #[inline]
    fn store(&self, value: f64, order: Ordering) {
        self.0.store(value.to_bits(), order);
    }
}

/// An `f32` stored as its bit pattern in an `AtomicU32`.
pub struct AtomicF32(AtomicU32);

impl AtomicScalar<f32> for AtomicF32 {
    #[inline]
    fn new(value: f32) -> Self {
        AtomicF32(AtomicU32::new(value.to_bits()))
    }
    #[inline]
    fn load(&self, order: Ordering) -> f32 {
        f32::from_bits(self.0.load(order))
    }
    #[inline]
    fn store(&self, value: f32, order: Ordering) {
        self.0.store(value.to_bits(), order);
    }
}

/// Scalar type the solvers run on.
///
/// `+∞` is the type's own infinity (`Scalar::infinity()`), never a finite
/// sentinel: unknown gridpoint values start at `+∞` and only decrease.
pub trait Scalar:
    num_traits::Float
    + num_traits::FromPrimitive
    + fmt::Debug
    + fmt::Display
    + fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    type Atomic: AtomicScalar<Self>;
}

impl Scalar for f64 {
    type Atomic = AtomicF64;
}

impl Scalar for f32 {
    type Atomic = AtomicF32;
}

/// Converts an `f64` constant (grid spacing, speed parameters, …) into `S`.
#[inline]
pub(crate) fn cast<S: Scalar>(value: f64) -> S {
    S::from_f64(value).expect("constant is representable in the scalar type")
}
