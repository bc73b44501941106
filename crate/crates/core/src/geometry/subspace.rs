use nalgebra::DMatrix;

use super::lp::{LinearProgram, LpOutcome, Relation, VarKind};
use super::{Polytope, Vector};
use crate::error::{Error, Result};

/// Relative singular-value cutoff for numerical rank.
const RANK_TOL: f64 = 1e-10;
/// Relative residual above which a linear system is declared inconsistent.
const CONSISTENCY_TOL: f64 = 1e-9;

/// `basepoint + span(basis)`, with an orthonormal basis.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineSubspace {
    pub basepoint: Vector,
    pub basis: Vec<Vector>,
}

/// Result of probing a polytope slice along every coordinate direction.
#[derive(Clone, Debug, PartialEq)]
pub struct SliceProbe {
    /// Centroid of the extreme points found by the probes.
    pub point: Vector,
    /// Largest coordinate extent of the slice; zero for a single point.
    pub width: f64,
}

impl AffineSubspace {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Solution set of `matrix · x = rhs`, or `None` when inconsistent.
    pub fn solve(matrix: &DMatrix<f64>, rhs: &Vector) -> Option<AffineSubspace> {
        let n = matrix.ncols();
        let rows = matrix.nrows().max(n);
        // zero padding keeps the SVD's V square so the full nullspace is visible
        let mut padded = DMatrix::zeros(rows, n);
        padded
            .view_mut((0, 0), (matrix.nrows(), n))
            .copy_from(matrix);
        let mut b = Vector::zeros(rows);
        b.rows_mut(0, rhs.len()).copy_from(rhs);

        let svd = padded.clone().svd(true, true);
        let u = svd.u.as_ref().expect("requested U");
        let v_t = svd.v_t.as_ref().expect("requested Vᵀ");
        let sigma_max = svd.singular_values.max();
        let cutoff = RANK_TOL * sigma_max.max(1.0);

        let mut basepoint = Vector::zeros(n);
        let mut basis = Vec::new();
        for (i, &s) in svd.singular_values.iter().enumerate() {
            let v = v_t.row(i).transpose();
            if s > cutoff {
                basepoint += v * (u.column(i).dot(&b) / s);
            } else {
                basis.push(v);
            }
        }
        let residual = (&padded * &basepoint - &b).amax();
        if residual > CONSISTENCY_TOL * (1.0 + b.amax()) {
            return None;
        }
        Some(AffineSubspace { basepoint, basis })
    }

    pub fn contains_point(&self, x: &Vector, tol: f64) -> bool {
        let mut r = x - &self.basepoint;
        for b in &self.basis {
            r -= b * b.dot(&r);
        }
        r.amax() <= tol
    }

    /// Finds points of `self ∩ K` by minimizing and maximizing each coordinate.
    ///
    /// Returned points lie exactly on the subspace and within `tol/2` of `K`.
    /// `None` when the slice is empty.
    pub fn probe_polytope(&self, k: &Polytope, tol: f64) -> Result<Option<SliceProbe>> {
        let dim = k.dim();
        Error::check_dim(dim, self.basepoint.len())?;
        if self.basis.is_empty() {
            return Ok(k.contains(&self.basepoint, tol)?.then(|| SliceProbe {
                point: self.basepoint.clone(),
                width: 0.0,
            }));
        }

        // smallest slack at which the subspace meets K, so the probes below do
        // not smear a single point into a `tol`-wide segment
        let Some(gap) = self.slice_gap(k)? else {
            return Ok(None);
        };
        if gap > tol / 2.0 {
            return Ok(None);
        }
        let slack = (gap + 1e-12).min(tol / 2.0);
        let (lp, t) = self.slice_program(k, |lp, row, rhs| {
            lp.add_row(row.iter().copied(), Relation::Le, rhs + slack);
            lp.add_row(row, Relation::Ge, rhs - slack);
        });

        let point_at = |x: &[f64]| -> Vector {
            self.basis
                .iter()
                .enumerate()
                .fold(self.basepoint.clone(), |acc, (j, b)| acc + b * x[t + j])
        };
        let mut points = Vec::with_capacity(2 * dim);
        let mut width: f64 = 0.0;
        for i in 0..dim {
            let mut extremes = [0.0; 2];
            for (slot, sign) in [1.0, -1.0].into_iter().enumerate() {
                let mut probe = lp.clone();
                for (j, b) in self.basis.iter().enumerate() {
                    probe.set_objective(t + j, sign * b[i]);
                }
                match probe.solve()? {
                    LpOutcome::Optimal { x, .. } => {
                        let p = point_at(&x);
                        extremes[slot] = p[i];
                        points.push(p);
                    }
                    other => {
                        return Err(Error::FixedSetMissesPolytope(format!(
                            "coordinate probe {i} returned {other:?} after a feasible start"
                        )))
                    }
                }
            }
            width = width.max(extremes[1] - extremes[0]);
        }
        let point = points.iter().fold(Vector::zeros(dim), |acc, p| acc + p) / points.len() as f64;
        Ok(Some(SliceProbe { point, width }))
    }
    /// Builds the weights-and-offsets program for `K ∩ self`, letting `constrain`
    /// add each coordinate row. Returns the program and the first offset variable.
    fn slice_program<F>(&self, k: &Polytope, mut constrain: F) -> (LinearProgram, usize)
    where
        F: FnMut(&mut LinearProgram, Vec<(usize, f64)>, f64),
    {
        let mut lp = LinearProgram::new();
        let lambda = k.add_weights(&mut lp);
        let t = lp.add_vars(self.basis.len(), VarKind::Free);
        for i in 0..k.dim() {
            // Σλ v_i − Σ t_j B_ji  vs  basepoint_i
            let row: Vec<(usize, f64)> = k
                .coordinate_row(lambda, i)
                .chain(self.basis.iter().enumerate().map(|(j, b)| (t + j, -b[i])))
                .collect();
            constrain(&mut lp, row, self.basepoint[i]);
        }
        (lp, t)
    }

    /// Max-norm distance between the subspace and `K`.
    fn slice_gap(&self, k: &Polytope) -> Result<Option<f64>> {
        let mut gap_var = None;
        let (lp, _) = self.slice_program(k, |lp, row, rhs| {
            let s = *gap_var.get_or_insert_with(|| {
                let s = lp.add_vars(1, VarKind::NonNegative);
                lp.set_objective(s, 1.0);
                s
            });
            lp.add_row(row.iter().copied().chain([(s, -1.0)]), Relation::Le, rhs);
            lp.add_row(row.into_iter().chain([(s, 1.0)]), Relation::Ge, rhs);
        });
        Ok(match lp.solve()? {
            LpOutcome::Optimal { value, .. } => Some(value.max(0.0)),
            _ => None,
        })
    }
}
