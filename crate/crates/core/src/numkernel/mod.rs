//! Numerical kernel: dense linear algebra, a small feed-forward network with
//! analytic reverse-mode gradients, the Adam optimizer, and special functions.
//!
//! Everything is plain `f64`, single-threaded, and deterministic; all types are
//! value types that can be moved freely between threads.

pub mod linalg;
pub mod nn;
pub mod optim;
pub mod special;
