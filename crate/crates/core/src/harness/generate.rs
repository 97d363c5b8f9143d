//! Seeded random boundary and tree functions.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::boundary_norms::BoundaryFunction;
use crate::operators::extend;
use crate::tree_norms::TreeFunction;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Independent uniform `[0, 1]` leaf values.
    IidUniform,
    /// Indicator of one cell of a uniformly chosen level `1..=N`.
    CellIndicator,
    /// `Σ_n a_n r_n` with random signs `r_n` constant on level-`n` cells and
    /// `a_n = e^{-εθn}/n`.
    Lacunary,
    /// Extension of an iid-uniform boundary function.
    ExtensionOfBoundary,
    /// Independent uniform `[0, 1]` vertex values.
    RandomVertex,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::IidUniform,
        Family::CellIndicator,
        Family::Lacunary,
        Family::ExtensionOfBoundary,
        Family::RandomVertex,
    ];

    pub const BOUNDARY: [Family; 3] = [Family::IidUniform, Family::CellIndicator, Family::Lacunary];

    pub fn name(&self) -> &'static str {
        match self {
            Family::IidUniform => "iid-uniform",
            Family::CellIndicator => "cell-indicator",
            Family::Lacunary => "lacunary",
            Family::ExtensionOfBoundary => "extension-of-boundary",
            Family::RandomVertex => "random-vertex",
        }
    }

    pub fn is_boundary(&self) -> bool {
        Self::BOUNDARY.contains(self)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::UnknownFamily(s.to_string()))
    }
}

/// Shape and smoothness data a generator needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenParams {
    pub k: usize,
    pub depth: usize,
    pub epsilon: f64,
    /// Only used by the lacunary family.
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Generated {
    Boundary(BoundaryFunction),
    Tree(TreeFunction),
}

impl Generated {
    /// Boundary families are lifted by the extension operator.
    pub fn into_tree(self) -> TreeFunction {
        match self {
            Generated::Boundary(u) => extend(&u),
            Generated::Tree(f) => f,
        }
    }
}

/// Deterministic in `(family, params, seed)`.
pub fn generate(family: Family, params: &GenParams, seed: u64) -> Result<Generated> {
    if params.depth == 0 {
        return Err(Error::InvalidParameter("depth must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (k, n) = (params.k, params.depth);
    let leaves = k
        .checked_pow(n as u32)
        .ok_or_else(|| Error::InvalidParameter(format!("K^N overflows for K = {k}, N = {n}")))?;
    Ok(match family {
        Family::IidUniform => Generated::Boundary(BoundaryFunction::new(
            k,
            n,
            (0..leaves).map(|_| rng.gen()).collect(),
        )?),
        Family::CellIndicator => {
            let level = rng.gen_range(1..=n);
            let cell = rng.gen_range(0..k.pow(level as u32));
            let span = k.pow((n - level) as u32);
            let values = (0..leaves)
                .map(|i| if i / span == cell { 1.0 } else { 0.0 })
                .collect();
            Generated::Boundary(BoundaryFunction::new(k, n, values)?)
        }
        Family::Lacunary => {
            let mut values = vec![0.0; leaves];
            for level in 1..=n {
                let a = (-params.epsilon * params.theta * level as f64).exp() / level as f64;
                let span = k.pow((n - level) as u32);
                let signs: Vec<f64> = (0..k.pow(level as u32))
                    .map(|_| if rng.gen::<bool>() { a } else { -a })
                    .collect();
                for (i, v) in values.iter_mut().enumerate() {
                    *v += signs[i / span];
                }
            }
            Generated::Boundary(BoundaryFunction::new(k, n, values)?)
        }
        Family::ExtensionOfBoundary => {
            let u = BoundaryFunction::new(k, n, (0..leaves).map(|_| rng.gen()).collect())?;
            Generated::Tree(extend(&u))
        }
        Family::RandomVertex => Generated::Tree(TreeFunction::new(
            k,
            (0..=n)
                .map(|l| (0..k.pow(l as u32)).map(|_| rng.gen()).collect())
                .collect(),
        )?),
    })
}

/// A boundary function from a boundary family.
pub fn generate_boundary(
    family: Family,
    params: &GenParams,
    seed: u64,
) -> Result<BoundaryFunction> {
    match generate(family, params, seed)? {
        Generated::Boundary(u) => Ok(u),
        Generated::Tree(_) => Err(Error::InvalidParameter(format!(
            "family {family} produces tree functions"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gp(k: usize, depth: usize) -> GenParams {
        GenParams {
            k,
            depth,
            epsilon: std::f64::consts::LN_2,
            theta: 0.5,
        }
    }

    #[test]
    fn names_roundtrip() {
        for f in Family::ALL {
            assert_eq!(f.name().parse::<Family>().unwrap(), f);
        }
        assert!(matches!(
            "gaussian".parse::<Family>(),
            Err(Error::UnknownFamily(_))
        ));
    }

    #[test]
    fn deterministic() {
        for f in Family::ALL {
            assert_eq!(
                generate(f, &gp(3, 3), 7).unwrap(),
                generate(f, &gp(3, 3), 7).unwrap()
            );
        }
    }

    #[test]
    fn uniform_range() {
        let u = generate_boundary(Family::IidUniform, &gp(2, 6), 1).unwrap();
        assert!(u.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn indicator_of_first_cell() {
        let target = vec![1.0, 0.0, 0.0, 0.0];
        let seed = (0..1000)
            .find(|&s| {
                generate_boundary(Family::CellIndicator, &gp(2, 2), s)
                    .unwrap()
                    .values()
                    == target
            })
            .expect("some seed picks the first level-2 cell");
        let u = generate_boundary(Family::CellIndicator, &gp(2, 2), seed).unwrap();
        assert_eq!(u.values(), &target[..]);
    }

    #[test]
    fn lacunary_amplitude() {
        let p = gp(3, 5);
        let u = generate_boundary(Family::Lacunary, &p, 3).unwrap();
        let bound: f64 = (1..=5)
            .map(|n| (-p.epsilon * p.theta * n as f64).exp() / n as f64)
            .sum();
        assert!(u.values().iter().all(|v| v.abs() <= bound + 1e-15));
        assert!(!u.is_constant());
    }
}
