//! Trace and extension operators between the boundary and the tree.

use crate::boundary::DyadicCell;
use crate::boundary_norms::BoundaryFunction;
use crate::tree_norms::TreeFunction;
use crate::{Error, Result};

/// Values at the depth-`N` vertices, read as the data on the leaf cells.
///
/// For resolution-`N` data every deeper average is constant, so this is
/// the geodesic limit of the piecewise-linear interpolant.
pub fn trace(f: &TreeFunction) -> BoundaryFunction {
    BoundaryFunction::new(f.k(), f.depth(), f.level(f.depth()).to_vec())
        .expect("a valid tree function has a valid bottom level")
}

/// Vertex value at `x` is the `ν`-average of `u` over the cell `I_x`.
pub fn extend(u: &BoundaryFunction) -> TreeFunction {
    TreeFunction::new(u.k(), u.averages().into_levels())
        .expect("cell averages of a valid boundary function have the tree's shape")
}

/// `|F(root)| + Σ |F(x_{j+1}) − F(x_j)|` along the ancestor chain of a leaf.
pub fn star_majorant(f: &TreeFunction, leaf: &DyadicCell) -> Result<f64> {
    if leaf.level() != f.depth() {
        return Err(Error::LevelOutOfRange {
            level: leaf.level(),
            depth: f.depth(),
        });
    }
    leaf.address().validate(f.k(), f.depth())?;
    let k = f.k();
    let chain: Vec<f64> = (0..=f.depth())
        .map(|n| f.level(n)[leaf.address().ancestor(n).index(k)])
        .collect();
    Ok(chain[0].abs() + chain.windows(2).map(|w| (w[1] - w[0]).abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example() -> BoundaryFunction {
        BoundaryFunction::new(2, 2, vec![1.0, 0.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn extension_by_hand() {
        let f = extend(&example());
        assert_eq!(f.level(0), &[0.25]);
        assert_eq!(f.level(1), &[0.5, 0.0]);
        assert_eq!(f.level(2), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn constant_roundtrip() {
        let u = BoundaryFunction::constant(3, 3, 2.5).unwrap();
        let f = extend(&u);
        assert!(f.levels().iter().flatten().all(|&v| v == 2.5));
        assert_eq!(trace(&f), u);
    }

    #[test]
    fn trace_of_extension() {
        let u = BoundaryFunction::new(3, 2, (0..9).map(|i| (i as f64).sin()).collect()).unwrap();
        assert_eq!(trace(&extend(&u)), u);
    }

    #[test]
    fn majorant() {
        let f = extend(&example());
        let leaf = DyadicCell::from_index(2, 2, 0);
        assert_eq!(star_majorant(&f, &leaf).unwrap(), 1.0);
        let c = TreeFunction::constant(2, 3, -1.5).unwrap();
        assert_eq!(
            star_majorant(&c, &DyadicCell::from_index(2, 3, 5)).unwrap(),
            1.5
        );
        assert!(star_majorant(&f, &DyadicCell::from_index(2, 1, 0)).is_err());
    }
}
