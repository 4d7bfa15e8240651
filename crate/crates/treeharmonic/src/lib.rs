//! Discrete nonlinear potential theory on the directed regular m-ary tree.
//!
//! A boundary function on [0, 1) is extended into the tree by repeatedly
//! applying a (generally nonlinear) averaging operator to successor values.
//! This crate provides the operator families, the tree/boundary coding
//! machinery, the Dirichlet-style solver, harmonic-measure style bounds for
//! perturbations supported on m-adic cells, a unique-continuation analysis
//! with explicit counterexamples, and the dimension-drop constant
//! τ(m, F) = min { Σ e^{x_j} : F(x) = 0 } with its closed forms.
//!
//! The solver and the bound/τ sweeps are data-parallel via rayon when the
//! default `parallel` feature is on; disabling default features yields a
//! dependency-light sequential build with identical results.

pub mod dirichlet;
pub mod error;
mod exec;
pub mod fatou;
pub mod measure;
pub mod operators;
pub mod rational;
pub mod tree;
pub mod ucp;

pub use error::{Error, Result};
