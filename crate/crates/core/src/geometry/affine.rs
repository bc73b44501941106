//! Affine maps `x ↦ Ax + b` on `Rⁿ` and the averaging constructions built from them.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{vector_from, Vector, WEIGHT_SUM_TOL};
use crate::error::{Error, Result};

/// An affine self-map of `Rⁿ`: a square linear part plus a translation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "AffineMapRepr", into = "AffineMapRepr")]
pub struct AffineMap {
    matrix: DMatrix<f64>,
    offset: DVector<f64>,
}

/// Row-major wire form shared by every JSON surface.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineMapRepr {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

impl TryFrom<AffineMapRepr> for AffineMap {
    type Error = Error;

    fn try_from(repr: AffineMapRepr) -> Result<Self> {
        AffineMap::from_rows(&repr.matrix, &repr.offset)
    }
}

impl From<AffineMap> for AffineMapRepr {
    fn from(map: AffineMap) -> Self {
        AffineMapRepr {
            matrix: map.rows(),
            offset: map.offset.iter().copied().collect(),
        }
    }
}

impl AffineMap {
    pub fn new(matrix: DMatrix<f64>, offset: DVector<f64>) -> Result<Self> {
        let dim = offset.len();
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::Malformed {
                what: "affine map",
                detail: format!(
                    "matrix is {}x{} but offset has length {dim}",
                    matrix.nrows(),
                    matrix.ncols()
                ),
            });
        }
        if matrix.iter().chain(offset.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("affine map"));
        }
        Ok(AffineMap { matrix, offset })
    }

    /// Builds a map from a row-major matrix and an offset.
    pub fn from_rows(rows: &[Vec<f64>], offset: &[f64]) -> Result<Self> {
        let dim = offset.len();
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        if rows.len() != dim {
            return Err(Error::Malformed {
                what: "affine map",
                detail: format!("{} matrix rows for offset of length {dim}", rows.len()),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
            return Err(Error::Malformed {
                what: "affine map",
                detail: format!("matrix row of length {} in dimension {dim}", bad.len()),
            });
        }
        let matrix = DMatrix::from_fn(dim, dim, |i, j| rows[i][j]);
        AffineMap::new(matrix, DVector::from_column_slice(offset))
    }

    pub fn identity(dim: usize) -> Self {
        AffineMap {
            matrix: DMatrix::identity(dim, dim),
            offset: DVector::zeros(dim),
        }
    }

    /// The map sending every point to `value`.
    pub fn constant(value: Vector) -> Self {
        let dim = value.len();
        AffineMap {
            matrix: DMatrix::zeros(dim, dim),
            offset: value,
        }
    }

    pub fn linear(matrix: DMatrix<f64>) -> Result<Self> {
        let dim = matrix.nrows();
        AffineMap::new(matrix, DVector::zeros(dim))
    }

    pub fn dim(&self) -> usize {
        self.offset.len()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.matrix
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect()
    }

    pub fn is_linear(&self) -> bool {
        self.offset.iter().all(|&v| v == 0.0)
    }

    pub fn apply(&self, x: &Vector) -> Result<Vector> {
        Error::check_dim(self.dim(), x.len())?;
        Ok(&self.matrix * x + &self.offset)
    }

    /// `self ∘ inner`: apply `inner` first.
    pub fn compose(&self, inner: &AffineMap) -> Result<AffineMap> {
        Error::check_dim(self.dim(), inner.dim())?;
        Ok(self.compose_unchecked(inner))
    }

    pub(crate) fn compose_unchecked(&self, inner: &AffineMap) -> AffineMap {
        AffineMap {
            matrix: &self.matrix * &inner.matrix,
            offset: &self.matrix * &inner.offset + &self.offset,
        }
    }

    /// Largest entrywise deviation over both matrix and offset.
    pub fn max_deviation(&self, other: &AffineMap) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        self.matrix
            .iter()
            .zip(other.matrix.iter())
            .chain(self.offset.iter().zip(other.offset.iter()))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &AffineMap, tol: f64) -> bool {
        self.max_deviation(other) <= tol
    }

    /// Inverse map when the linear part is numerically invertible.
    pub fn inverse(&self) -> Option<AffineMap> {
        let lu = self.matrix.clone().lu();
        let scale = self.matrix.amax().max(1.0);
        if lu.determinant().abs() <= 1e-12 * scale.powi(self.dim() as i32) {
            return None;
        }
        let inv = lu.try_inverse()?;
        let offset = -(&inv * &self.offset);
        Some(AffineMap {
            matrix: inv,
            offset,
        })
    }

    /// `self^k` by repeated squaring; `self^0` is the identity.
    pub fn power(&self, mut k: u64) -> AffineMap {
        let mut result = AffineMap::identity(self.dim());
        let mut base = self.clone();
        while k > 0 {
            if k & 1 == 1 {
                result = base.compose_unchecked(&result);
            }
            k >>= 1;
            if k > 0 {
                base = base.compose_unchecked(&base);
            }
        }
        result
    }

    /// Entrywise `a·self + b·other`. Only meaningful as an affine combination when `a + b = 1`.
    pub(crate) fn blend(&self, a: f64, other: &AffineMap, b: f64) -> AffineMap {
        AffineMap {
            matrix: &self.matrix * a + &other.matrix * b,
            offset: &self.offset * a + &other.offset * b,
        }
    }

    /// The adjoint action `λ ↦ Aᵀλ` on dual coordinates. Undefined for maps with an offset.
    pub fn transpose_linear(&self) -> Option<AffineMap> {
        self.is_linear().then(|| AffineMap {
            matrix: self.matrix.transpose(),
            offset: DVector::zeros(self.dim()),
        })
    }
}

pub fn affine_apply(map: &AffineMap, x: &Vector) -> Result<Vector> {
    map.apply(x)
}

/// `f ∘ g`.
pub fn affine_compose(f: &AffineMap, g: &AffineMap) -> Result<AffineMap> {
    f.compose(g)
}

/// Entrywise convex combination `Σ wᵢ·mapᵢ`.
///
/// Weights must be nonnegative and sum to one within [`WEIGHT_SUM_TOL`].
pub fn convex_combination(maps: &[AffineMap], weights: &[f64]) -> Result<AffineMap> {
    let first = maps
        .first()
        .ok_or_else(|| Error::InvalidWeights("no maps given".into()))?;
    if maps.len() != weights.len() {
        return Err(Error::InvalidWeights(format!(
            "{} maps but {} weights",
            maps.len(),
            weights.len()
        )));
    }
    check_convex_weights(weights)?;
    let dim = first.dim();
    let mut matrix = DMatrix::zeros(dim, dim);
    let mut offset = DVector::zeros(dim);
    for (map, &w) in maps.iter().zip(weights) {
        Error::check_dim(dim, map.dim())?;
        matrix += &map.matrix * w;
        offset += &map.offset * w;
    }
    Ok(AffineMap { matrix, offset })
}

pub(crate) fn check_convex_weights(weights: &[f64]) -> Result<()> {
    if let Some(w) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::InvalidWeights(format!(
            "weight {w} is not a nonnegative number"
        )));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidWeights(format!(
            "weights sum to {total}, not 1"
        )));
    }
    Ok(())
}

/// The Cesàro average `(1/n)(I + h + … + h^{n-1})`.
///
/// Built from the binary expansion of `n` with
/// `C_{2m} = ½(C_m + h^m∘C_m)` and `C_{m+1} = (m·C_m + h^m)/(m+1)`,
/// so the cost is logarithmic in `n`.
pub fn cesaro_average(map: &AffineMap, n: u64) -> Result<AffineMap> {
    if n == 0 {
        return Err(Error::ZeroAveragingDepth);
    }
    let mut avg = AffineMap::identity(map.dim());
    // power == map^m throughout
    let mut power = map.clone();
    let mut m: u64 = 1;
    for bit in (0..63 - n.leading_zeros()).rev() {
        avg = avg.blend(0.5, &power.compose_unchecked(&avg), 0.5);
        power = power.compose_unchecked(&power);
        m *= 2;
        if (n >> bit) & 1 == 1 {
            let mf = m as f64;
            avg = avg.blend(mf / (mf + 1.0), &power, 1.0 / (mf + 1.0));
            power = map.compose_unchecked(&power);
            m += 1;
        }
    }
    debug_assert_eq!(m, n);
    Ok(avg)
}

/// Parses a coordinate list into a [`Vector`] of the expected dimension.
pub fn vector_of_dim(coords: &[f64], dim: usize) -> Result<Vector> {
    Error::check_dim(dim, coords.len())?;
    vector_from(coords)
}
