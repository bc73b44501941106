use serde::{Deserialize, Serialize};

use super::lp::{LinearProgram, LpOutcome, Relation, VarKind};
use super::{AffineMap, NormSpec, Vector};
use crate::error::{Error, Result};

/// A compact convex set given as the hull of a nonempty vertex list.
///
/// Vertices need not be extreme points; redundant ones are harmless.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PolytopeRepr", into = "PolytopeRepr")]
pub struct Polytope {
    vertices: Vec<Vector>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolytopeRepr {
    pub vertices: Vec<Vec<f64>>,
}

impl TryFrom<PolytopeRepr> for Polytope {
    type Error = Error;

    fn try_from(repr: PolytopeRepr) -> Result<Self> {
        let vertices = repr
            .vertices
            .iter()
            .map(|v| super::vector_from(v))
            .collect::<Result<Vec<_>>>()?;
        Polytope::new(vertices)
    }
}

impl From<Polytope> for PolytopeRepr {
    fn from(p: Polytope) -> Self {
        PolytopeRepr {
            vertices: p
                .vertices
                .iter()
                .map(|v| v.iter().copied().collect())
                .collect(),
        }
    }
}

impl Polytope {
    pub fn new(vertices: Vec<Vector>) -> Result<Self> {
        let first = vertices.first().ok_or(Error::EmptyPolytope)?;
        let dim = first.len();
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        for v in &vertices {
            Error::check_dim(dim, v.len())?;
            if v.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("polytope vertex"));
            }
        }
        Ok(Polytope { vertices })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Polytope::try_from(PolytopeRepr {
            vertices: rows.to_vec(),
        })
    }

    /// Axis-aligned box `[lo, hi]ⁿ`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        let vertices = (0..1usize << dim)
            .map(|mask| Vector::from_fn(dim, |i, _| if mask >> i & 1 == 1 { hi } else { lo }))
            .collect();
        Polytope::new(vertices)
    }

    /// Probability simplex `conv{e₁, …, eₙ}`.
    pub fn simplex(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Polytope::new(
            (0..dim)
                .map(|i| Vector::from_fn(dim, |j, _| f64::from(i == j)))
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn vertices(&self) -> &[Vector] {
        &self.vertices
    }

    pub fn centroid(&self) -> Vector {
        let sum = self
            .vertices
            .iter()
            .fold(Vector::zeros(self.dim()), |acc, v| acc + v);
        sum / self.vertices.len() as f64
    }

    pub fn has_vertex_near(&self, x: &Vector, tol: f64) -> bool {
        self.vertices.iter().any(|v| (v - x).amax() <= tol)
    }

    /// Affine maps carry hulls to hulls, so the image is the hull of the vertex images.
    pub fn image(&self, map: &AffineMap) -> Result<Polytope> {
        Error::check_dim(self.dim(), map.dim())?;
        let vertices = self
            .vertices
            .iter()
            .map(|v| map.apply(v))
            .collect::<Result<Vec<_>>>()?;
        Polytope::new(vertices)
    }

    /// Whether some convex combination of vertices lies within `tol` of `x` in the max norm.
    pub fn contains(&self, x: &Vector, tol: f64) -> Result<bool> {
        Error::check_dim(self.dim(), x.len())?;
        if self.has_vertex_near(x, tol) {
            return Ok(true);
        }
        Ok(self.distance(x)? <= tol)
    }

    /// Max-norm distance from `x` to the polytope.
    pub fn distance(&self, x: &Vector) -> Result<f64> {
        Error::check_dim(self.dim(), x.len())?;
        let mut lp = LinearProgram::new();
        let lambda = self.add_weights(&mut lp);
        let t = lp.add_vars(1, VarKind::NonNegative);
        lp.set_objective(t, 1.0);
        for i in 0..self.dim() {
            let row = self.coordinate_row(lambda, i);
            lp.add_row(row.clone().chain([(t, -1.0)]), Relation::Le, x[i]);
            lp.add_row(row.chain([(t, 1.0)]), Relation::Ge, x[i]);
        }
        match lp.solve()? {
            LpOutcome::Optimal { value, .. } => Ok(value.max(0.0)),
            other => Err(Error::Numerical(format!(
                "distance program returned {other:?}"
            ))),
        }
    }

    /// Largest vertex-pair distance in the given norm.
    pub fn diameter(&self, norm: &NormSpec) -> Result<f64> {
        Error::check_dim(self.dim(), norm.dim())?;
        let mut best: f64 = 0.0;
        for (i, u) in self.vertices.iter().enumerate() {
            for v in &self.vertices[i + 1..] {
                best = best.max(norm.norm(&(u - v)));
            }
        }
        Ok(best)
    }

    /// Convex weights over the vertices: `λ ≥ 0`, `Σλ = 1`. Returns the first index.
    pub(crate) fn add_weights(&self, lp: &mut LinearProgram) -> usize {
        let first = lp.add_vars(self.vertices.len(), VarKind::NonNegative);
        lp.add_row(
            (0..self.vertices.len()).map(|k| (first + k, 1.0)),
            Relation::Eq,
            1.0,
        );
        first
    }

    /// Coefficients of the `i`-th coordinate of `Σ λ_v v`.
    pub(crate) fn coordinate_row(
        &self,
        lambda: usize,
        i: usize,
    ) -> impl Iterator<Item = (usize, f64)> + Clone + '_ {
        self.vertices
            .iter()
            .enumerate()
            .map(move |(k, v)| (lambda + k, v[i]))
    }

    pub(crate) fn point_from_weights(&self, weights: &[f64]) -> Vector {
        self.vertices
            .iter()
            .zip(weights)
            .fold(Vector::zeros(self.dim()), |acc, (v, &w)| acc + v * w)
    }
}
