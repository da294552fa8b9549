//! Scale calculus with time delays.

pub mod expr;
pub mod numerics;
pub mod sampled;
pub mod scale;
pub mod zoo;
pub mod delay;
mod fields;
pub mod control;
pub mod problem;
