//! Vector-space plumbing: affine maps, V-polytopes, polyhedral norms and the
//! linear feasibility core everything else stands on.

mod affine;
pub mod lp;
mod norm;
mod polytope;
mod subspace;
pub mod vector_serde;

pub use affine::{
    affine_apply, affine_compose, cesaro_average, convex_combination, vector_of_dim, AffineMap,
    AffineMapRepr,
};
pub use norm::{NormKind, NormSpec};
pub use polytope::{Polytope, PolytopeRepr};
pub use subspace::{AffineSubspace, SliceProbe};

use lp::{LinearProgram, LpOutcome, Relation};

use crate::error::{Error, Result};

/// Points of `Rⁿ`. Finiteness is checked wherever vectors enter from outside.
pub type Vector = nalgebra::DVector<f64>;

/// Default membership tolerance.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Default tolerance for exact algebraic identities between maps.
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Allowed deviation of convex weights from summing to one.
pub const WEIGHT_SUM_TOL: f64 = 1e-9;

pub fn vector_from(coords: &[f64]) -> Result<Vector> {
    if coords.is_empty() {
        return Err(Error::ZeroDimension);
    }
    if coords.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("vector"));
    }
    Ok(Vector::from_column_slice(coords))
}

pub fn polytope_image(map: &AffineMap, k: &Polytope) -> Result<Polytope> {
    k.image(map)
}

pub fn contains(k: &Polytope, x: &Vector, tol: f64) -> Result<bool> {
    k.contains(x, tol)
}

pub fn diameter(k: &Polytope, norm: &NormSpec) -> Result<f64> {
    k.diameter(norm)
}

/// A point lying within `tol` of every polytope, or `None` when the sets are
/// (numerically) disjoint.
///
/// One program: convex weights per polytope, with each weighted point kept
/// within `tol/2` of the first polytope's point, which is returned.
pub fn feasible_point(sets: &[Polytope], tol: f64) -> Result<Option<Vector>> {
    let anchor = sets.first().ok_or(Error::EmptyPolytope)?;
    let dim = anchor.dim();
    for k in sets {
        Error::check_dim(dim, k.dim())?;
    }
    let mut lp = LinearProgram::new();
    let weights: Vec<usize> = sets.iter().map(|k| k.add_weights(&mut lp)).collect();
    let slack = tol / 2.0;
    for (k, &w) in sets.iter().zip(&weights).skip(1) {
        for i in 0..dim {
            let diff: Vec<(usize, f64)> = k
                .coordinate_row(w, i)
                .chain(anchor.coordinate_row(weights[0], i).map(|(v, c)| (v, -c)))
                .collect();
            lp.add_row(diff.iter().copied(), Relation::Le, slack);
            lp.add_row(diff, Relation::Ge, -slack);
        }
    }
    Ok(match lp.solve()? {
        LpOutcome::Optimal { x, .. } => {
            let lambda = &x[weights[0]..weights[0] + anchor.vertices().len()];
            Some(anchor.point_from_weights(lambda))
        }
        LpOutcome::Infeasible => None,
        LpOutcome::Unbounded => {
            return Err(Error::Numerical(
                "feasibility program reported unbounded".into(),
            ))
        }
    })
}
