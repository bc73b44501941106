//! Common fixed points of validated structure trees.
//!
//! Two independent routes: layered Cesàro averaging with a certified `1/n`
//! residual decay, and an exact route that intersects the generators' fixed
//! affine subspaces and then locates a point of that intersection inside `K`.

use indexmap::IndexMap;
use log::debug;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    cesaro_average, feasible_point, vector_serde, AffineMap, AffineSubspace, NormSpec, Polytope,
    Vector, MEMBERSHIP_TOL,
};
use crate::semigroup::{enumerate_elements, ConvexCombination, SemigroupNode};

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_N_MAX: u64 = 1 << 20;
/// Largest number of words mixed into one random element of `co(F)`.
const SAMPLE_SUPPORT: usize = 3;

pub type Residuals = IndexMap<String, f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Cesaro,
    Exact,
}

/// Residual trace of the averaging schedule against the `diam(K)/n` bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCertificate {
    pub n_final: u64,
    pub residual_history: Vec<(u64, f64)>,
    pub bound_history: Vec<(u64, f64)>,
}

/// Shape of the exact fixed set inside `K`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedSetSummary {
    /// Dimension of the common fixed affine subspace.
    pub dimension: usize,
    /// Largest coordinate extent of the fixed subspace within `K`; zero for a single point.
    pub width: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    #[serde(with = "vector_serde")]
    pub point: Vector,
    pub residuals: Residuals,
    pub method: Method,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub certificate: Option<ConvergenceCertificate>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fixed_set: Option<FixedSetSummary>,
}

impl FixedPointResult {
    pub fn max_residual(&self) -> f64 {
        max_residual(&self.residuals)
    }

    /// Whether the exact route found exactly one fixed point in `K`.
    pub fn is_unique(&self) -> bool {
        self.fixed_set
            .as_ref()
            .is_some_and(|s| s.width <= MEMBERSHIP_TOL)
    }
}

pub fn max_residual(residuals: &Residuals) -> f64 {
    residuals.values().copied().fold(0.0, f64::max)
}

/// `‖f(p) − p‖∞` for every generator of the flattened tree.
pub fn residual(point: &Vector, node: &SemigroupNode) -> Result<Residuals> {
    Error::check_dim(node.dim(), point.len())?;
    node.generators()
        .into_iter()
        .map(|(label, f)| Ok((label, (f.apply(point)? - point).amax())))
        .collect()
}

/// The depth-`n` averaging operator of a structure tree.
///
/// A leaf composes the Cesàro averages of its (commuting) generators. A
/// product averages the normal factor first and the quotient second: the
/// relation `h∘g = g∘h′` makes every quotient generator map `Fix(H)` into
/// itself, so quotient averaging keeps the point fixed by `H`.
pub fn averaging_operator(node: &SemigroupNode, n: u64) -> Result<AffineMap> {
    if n == 0 {
        return Err(Error::ZeroAveragingDepth);
    }
    match node {
        SemigroupNode::Leaf(gens) => {
            let mut op = AffineMap::identity(node.dim());
            for g in gens {
                op = cesaro_average(&g.map, n)?.compose(&op)?;
            }
            Ok(op)
        }
        SemigroupNode::Product { normal, quotient } => {
            averaging_operator(quotient, n)?.compose(&averaging_operator(normal, n)?)
        }
    }
}

/// Averages `x0` over a doubling schedule `n = 1, 2, 4, … ≤ n_max` until every
/// generator residual is at most `tol`.
pub fn solve_cesaro(
    node: &SemigroupNode,
    k: &Polytope,
    x0: &Vector,
    tol: f64,
    n_max: u64,
) -> Result<FixedPointResult> {
    Error::check_dim(node.dim(), k.dim())?;
    Error::check_dim(k.dim(), x0.len())?;
    if n_max == 0 {
        return Err(Error::ZeroAveragingDepth);
    }
    if !k.contains(x0, MEMBERSHIP_TOL)? {
        return Err(Error::StartOutsidePolytope {
            distance: k.distance(x0)?,
        });
    }
    let diameter = k.diameter(&NormSpec::max_abs(k.dim())?)?;
    let mut certificate = ConvergenceCertificate {
        n_final: 0,
        residual_history: Vec::new(),
        bound_history: Vec::new(),
    };
    let mut best: Option<(Vector, f64)> = None;
    let mut n: u64 = 1;
    loop {
        let point = averaging_operator(node, n)?.apply(x0)?;
        let residuals = residual(&point, node)?;
        let worst = max_residual(&residuals);
        certificate.n_final = n;
        certificate.residual_history.push((n, worst));
        certificate.bound_history.push((n, diameter / n as f64));
        debug!("cesaro n = {n}: residual {worst:e}");
        if worst <= tol {
            if !k.contains(&point, tol.max(MEMBERSHIP_TOL))? {
                return Err(Error::FixedSetMissesPolytope(format!(
                    "averaged point left K at n = {n}"
                )));
            }
            return Ok(FixedPointResult {
                point,
                residuals,
                method: Method::Cesaro,
                certificate: Some(certificate),
                fixed_set: None,
            });
        }
        if best.as_ref().is_none_or(|(_, r)| worst < *r) {
            best = Some((point, worst));
        }
        match n.checked_mul(2) {
            Some(next) if next <= n_max => n = next,
            _ => break,
        }
    }
    let (best_point, best_residual) = best.expect("schedule runs at least once");
    Err(Error::NotConverged {
        best_point,
        best_residual,
        certificate,
    })
}

/// Solutions of `f(x) = x`, or `None` when the map has no fixed point.
pub fn fixed_subspace(map: &AffineMap) -> Option<AffineSubspace> {
    common_fixed_subspace(std::slice::from_ref(map))
}

/// Solutions of `f(x) = x` for every map at once (stacked `(A − I)x = −b`).
pub fn common_fixed_subspace(maps: &[AffineMap]) -> Option<AffineSubspace> {
    let dim = maps.first()?.dim();
    let mut system = DMatrix::zeros(dim * maps.len(), dim);
    let mut rhs = Vector::zeros(dim * maps.len());
    for (i, f) in maps.iter().enumerate() {
        let block = f.matrix() - DMatrix::identity(dim, dim);
        system.view_mut((i * dim, 0), (dim, dim)).copy_from(&block);
        rhs.rows_mut(i * dim, dim).copy_from(&(-f.offset()));
    }
    AffineSubspace::solve(&system, &rhs)
}

/// Exact route: intersect the generators' fixed subspaces, then pick the
/// centroid of the coordinate-probe extremes of that intersection with `K`.
pub fn solve_exact(node: &SemigroupNode, k: &Polytope, tol: f64) -> Result<FixedPointResult> {
    Error::check_dim(node.dim(), k.dim())?;
    let maps: Vec<AffineMap> = node
        .generators()
        .into_iter()
        .map(|(_, m)| m.clone())
        .collect();
    let subspace = common_fixed_subspace(&maps).ok_or(Error::EmptyFixedSet)?;
    debug!(
        "exact: common fixed subspace of dimension {}",
        subspace.dim()
    );
    let probe = subspace.probe_polytope(k, tol)?.ok_or_else(|| {
        Error::FixedSetMissesPolytope(format!(
            "fixed subspace of dimension {} misses K",
            subspace.dim()
        ))
    })?;
    let residuals = residual(&probe.point, node)?;
    let worst = max_residual(&residuals);
    if worst > tol {
        return Err(Error::ToleranceNotMet {
            residual: worst,
            tol,
        });
    }
    Ok(FixedPointResult {
        point: probe.point,
        residuals,
        method: Method::Exact,
        certificate: None,
        fixed_set: Some(crate::solver::FixedSetSummary {
            dimension: subspace.dim(),
            width: probe.width,
        }),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FipFamily {
    /// Random elements of `co(F)`.
    CoF,
    /// `h∘g` with `h ∈ co(H)`, `g ∈ co(F/H)`.
    #[serde(rename = "CoH_CoQ")]
    CoHCoQ,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FipReport {
    pub family: FipFamily,
    pub sample_count: usize,
    pub seed: u64,
    pub feasible: bool,
    #[serde(with = "vector_serde::option")]
    pub witness: Option<Vector>,
}

/// Samples `sample_count` elements of the chosen family and tests whether
/// their images of `K` share a point.
pub fn fip_check(
    node: &SemigroupNode,
    k: &Polytope,
    sample_count: usize,
    family: FipFamily,
    seed: u64,
    max_word_length: usize,
) -> Result<FipReport> {
    if sample_count < 2 {
        return Err(Error::InvalidSampleCount {
            min: 2,
            got: sample_count,
        });
    }
    Error::check_dim(node.dim(), k.dim())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<AffineMap> = match (family, node) {
        (FipFamily::CoF, _) => {
            let words = enumerate_elements(node, max_word_length)?;
            (0..sample_count)
                .map(|_| ConvexCombination::random(&words, SAMPLE_SUPPORT, &mut rng).to_map())
                .collect()
        }
        (FipFamily::CoHCoQ, SemigroupNode::Product { normal, quotient }) => {
            let h_words = enumerate_elements(normal, max_word_length)?;
            let q_words = enumerate_elements(quotient, max_word_length)?;
            (0..sample_count)
                .map(|_| {
                    let h = ConvexCombination::random(&h_words, SAMPLE_SUPPORT, &mut rng).to_map();
                    let g = ConvexCombination::random(&q_words, SAMPLE_SUPPORT, &mut rng).to_map();
                    h.compose_unchecked(&g)
                })
                .collect()
        }
        (FipFamily::CoHCoQ, SemigroupNode::Leaf(_)) => {
            return Err(Error::FamilyNeedsProduct("CoH_CoQ"))
        }
    };
    let images = samples
        .iter()
        .map(|f| k.image(f))
        .collect::<Result<Vec<_>>>()?;
    let witness = feasible_point(&images, MEMBERSHIP_TOL)?;
    Ok(FipReport {
        family,
        sample_count,
        seed,
        feasible: witness.is_some(),
        witness,
    })
}
