//! Numerical laboratory for function spaces on regular rooted trees.
//!
//! The crate works on the depth-`N` truncation of a `K`-ary tree with the
//! uniformizing metric `e^{-ε|x|} d|x|` and the weighted measure
//! `e^{-β|x|}(|x|+C)^λ d|x|`, together with its Cantor-type boundary. It
//! provides:
//!
//! * tree geometry and edge measures ([`tree`]),
//! * the dyadic cell structure of the boundary ([`boundary`]),
//! * Young functions `t^p log^λ(e+t)` and a Luxemburg gauge solver ([`young`]),
//! * dyadic Besov / Orlicz-Besov energies and the double-integral seminorm
//!   ([`boundary_norms`]),
//! * Orlicz-Sobolev norms of piecewise-linear tree functions ([`tree_norms`]),
//! * trace and extension operators ([`operators`]),
//! * the Hajłasz-Besov energy as a convex program ([`hajlasz`]),
//! * random generators and experiment drivers ([`harness`]).

pub mod boundary;
pub mod boundary_norms;
mod error;
pub mod hajlasz;
pub mod harness;
pub mod operators;
pub mod quadrature;
pub mod tree;
pub mod tree_norms;
pub mod young;

pub use boundary::{BoundaryMeasure, DyadicCell};
pub use boundary_norms::{BoundaryFunction, EnergyParams};
pub use error::{Error, Result};
pub use tree::{TreeParams, TreePoint, VertexAddress};
pub use tree_norms::TreeFunction;
pub use young::{luxemburg_gauge, Modular, YoungPhi};
