use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{Polytope, Vector};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormKind {
    /// ℓ∞
    MaxAbs,
    /// ℓ1
    SumAbs,
}

impl NormKind {
    pub fn dual(self) -> NormKind {
        match self {
            NormKind::MaxAbs => NormKind::SumAbs,
            NormKind::SumAbs => NormKind::MaxAbs,
        }
    }
}

/// A polyhedral norm on `R^dim`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NormSpec {
    kind: NormKind,
    dim: usize,
}

impl NormSpec {
    pub fn new(kind: NormKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(NormSpec { kind, dim })
    }

    pub fn max_abs(dim: usize) -> Result<Self> {
        NormSpec::new(NormKind::MaxAbs, dim)
    }

    pub fn sum_abs(dim: usize) -> Result<Self> {
        NormSpec::new(NormKind::SumAbs, dim)
    }

    pub fn kind(&self) -> NormKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dual(&self) -> NormSpec {
        NormSpec {
            kind: self.kind.dual(),
            dim: self.dim,
        }
    }

    pub fn norm(&self, v: &Vector) -> f64 {
        match self.kind {
            NormKind::MaxAbs => v.amax(),
            NormKind::SumAbs => v.iter().map(|c| c.abs()).sum(),
        }
    }

    /// Induced operator norm: max row sum for ℓ∞, max column sum for ℓ1.
    pub fn operator_norm(&self, matrix: &DMatrix<f64>) -> f64 {
        let abs = matrix.abs();
        match self.kind {
            NormKind::MaxAbs => abs.row_iter().map(|r| r.sum()).fold(0.0, f64::max),
            NormKind::SumAbs => abs.column_iter().map(|c| c.sum()).fold(0.0, f64::max),
        }
    }

    /// Unit ball in V-representation: the cube for ℓ∞, the cross-polytope for ℓ1.
    pub fn unit_ball(&self) -> Polytope {
        let ball = match self.kind {
            NormKind::MaxAbs => Polytope::cube(self.dim, -1.0, 1.0),
            NormKind::SumAbs => Polytope::new(
                (0..self.dim)
                    .flat_map(|i| {
                        [1.0, -1.0]
                            .map(|s| Vector::from_fn(self.dim, |j, _| if i == j { s } else { 0.0 }))
                    })
                    .collect(),
            ),
        };
        ball.expect("dimension checked at construction")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_swaps_kinds() {
        let n = NormSpec::max_abs(3).unwrap();
        assert_eq!(n.dual().kind(), NormKind::SumAbs);
        assert_eq!(n.dual().dual(), n);
    }

    #[test]
    fn unit_ball_vertex_counts_and_symmetry() {
        for dim in 1..=4 {
            let cube = NormSpec::max_abs(dim).unwrap().unit_ball();
            let cross = NormSpec::sum_abs(dim).unwrap().unit_ball();
            assert_eq!(cube.vertices().len(), 1 << dim);
            assert_eq!(cross.vertices().len(), 2 * dim);
            for ball in [&cube, &cross] {
                for v in ball.vertices() {
                    assert!(ball.has_vertex_near(&-v, 0.0));
                }
            }
        }
    }

    #[test]
    fn operator_norms() {
        let a = DMatrix::from_row_slice(2, 2, &[0.5, -0.25, 1.0, 0.0]);
        assert_eq!(NormSpec::max_abs(2).unwrap().operator_norm(&a), 1.0);
        assert_eq!(NormSpec::sum_abs(2).unwrap().operator_norm(&a), 1.5);
    }
}
