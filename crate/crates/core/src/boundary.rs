//! Dyadic cells of the Cantor-type boundary and its uniform measure.
//!
//! The cell `I_x` of a vertex `x` is the set of boundary rays through `x`.
//! Cells of level `n` partition the boundary into `K^n` pieces; the boundary
//! carries the uniform Bernoulli measure `ν(I_x) = K^{-|x|}`.

use crate::tree::{TreeParams, VertexAddress};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DyadicCell {
    address: VertexAddress,
}

impl DyadicCell {
    pub fn new(address: VertexAddress) -> Self {
        Self { address }
    }

    pub fn whole() -> Self {
        Self::new(VertexAddress::root())
    }

    pub fn from_index(k: usize, level: usize, index: usize) -> Self {
        Self::new(VertexAddress::from_index(k, level, index))
    }

    pub fn address(&self) -> &VertexAddress {
        &self.address
    }

    pub fn level(&self) -> usize {
        self.address.level()
    }

    pub fn index(&self, k: usize) -> usize {
        self.address.index(k)
    }

    /// The unique cell of the previous level containing this one.
    pub fn parent(&self) -> Result<Self> {
        self.address
            .parent()
            .map(Self::new)
            .ok_or_else(|| Error::InvalidAddress("the whole boundary has no parent cell".into()))
    }

    /// The `K` cells of the next level, in digit order.
    pub fn children(&self, k: usize, depth: usize) -> Result<Vec<Self>> {
        if self.level() >= depth {
            return Err(Error::LevelOutOfRange {
                level: self.level() + 1,
                depth,
            });
        }
        Ok((0..k as u32)
            .map(|d| Self::new(self.address.child(d)))
            .collect())
    }

    /// True when `self ⊇ other`.
    pub fn contains(&self, other: &Self) -> bool {
        self.address.is_ancestor_of(&other.address)
    }
}

/// Uniform measure on the boundary: every cell splits its mass equally
/// among its `K` children.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoundaryMeasure {
    k: usize,
}

impl BoundaryMeasure {
    pub fn new(k: usize) -> Self {
        Self { k }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn of_level(&self, level: usize) -> f64 {
        (self.k as f64).powi(-(level as i32))
    }

    pub fn measure(&self, cell: &DyadicCell) -> f64 {
        self.of_level(cell.level())
    }
}

/// Length of the common prefix of two distinct cells of the same level.
pub fn split_level(a: &DyadicCell, b: &DyadicCell) -> Result<usize> {
    if a.level() != b.level() {
        return Err(Error::InvalidParameter(format!(
            "cells of different levels {} and {}",
            a.level(),
            b.level()
        )));
    }
    if a == b {
        return Err(Error::EqualCells);
    }
    Ok(a.address.common_prefix_len(&b.address))
}

/// Boundary distance between two split-level-`k` rays, `(2/ε) e^{-εk}`.
pub fn distance_at_split(params: &TreeParams, split: usize) -> f64 {
    2.0 / params.epsilon() * (-params.epsilon() * split as f64).exp()
}

/// Distance between any two points of two distinct same-level cells.
pub fn boundary_distance(params: &TreeParams, a: &DyadicCell, b: &DyadicCell) -> Result<f64> {
    Ok(distance_at_split(params, split_level(a, b)?))
}

/// `ν(I) / r^Q` with `r = (2/ε) e^{-ε|I|}` the diameter of the cell.
pub fn ahlfors_ratio(params: &TreeParams, cell: &DyadicCell) -> f64 {
    let nu = BoundaryMeasure::new(params.k()).measure(cell);
    let r = distance_at_split(params, cell.level());
    nu / r.powf(params.dimension())
}
