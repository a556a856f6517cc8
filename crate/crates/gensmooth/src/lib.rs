//! Simulation and measurement toolkit for AdaGrad-Norm and simple adaptive
//! methods on (L0,L1)-smooth objectives under affine-variance noise.

// Parameter checks are written `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod experiments;
pub mod instrumentation;
pub mod numerics;
pub mod objectives;
pub mod optimizers;
pub mod oracles;
