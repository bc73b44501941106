//! Invariant norm-preserving extension of a functional from a subspace `Y ⊂ Rⁿ`.
//!
//! The set of norm-one extensions is a polytope in dual coordinates when the
//! primal norm is ℓ1 or ℓ∞. Each operator `T` acts on it by `Λ ↦ Λ∘T`, and a
//! common fixed point of those actions is the invariant extension.

use log::{debug, warn};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::lp::{LinearProgram, LpOutcome, Relation, VarKind};
use crate::geometry::{
    vector_serde, AffineMap, AffineSubspace, NormKind, NormSpec, Polytope, Vector, MEMBERSHIP_TOL,
};
use crate::semigroup::{check_invariance, validate_structure, SemigroupNode, DEFAULT_WORD_BUDGET};
use crate::solver::{solve_cesaro, solve_exact, Residuals, DEFAULT_N_MAX};

/// Tolerance for the problem's hypotheses (`T(Y) ⊂ Y`, `‖T‖ ≤ 1`, `g∘T = g`).
pub const HYPOTHESIS_TOL: f64 = 1e-9;
/// Vertex enumeration is exponential in the dimension; refuse beyond this many probes.
const MAX_VERTEX_PROBES: u128 = 531_441; // 3^12
const VERTEX_DEDUP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExtensionProblemRepr", into = "ExtensionProblemRepr")]
pub struct ExtensionProblem {
    dim: usize,
    norm: NormKind,
    subspace_basis: Vec<Vector>,
    functional_on_subspace: Vec<f64>,
    operators: SemigroupNode,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExtensionProblemRepr {
    dim: usize,
    norm: NormKind,
    #[serde(with = "vector_serde::list")]
    subspace_basis: Vec<Vector>,
    functional_on_subspace: Vec<f64>,
    operators: SemigroupNode,
}

impl TryFrom<ExtensionProblemRepr> for ExtensionProblem {
    type Error = Error;

    fn try_from(r: ExtensionProblemRepr) -> Result<Self> {
        ExtensionProblem::new(
            r.dim,
            r.norm,
            r.subspace_basis,
            r.functional_on_subspace,
            r.operators,
        )
    }
}

impl From<ExtensionProblem> for ExtensionProblemRepr {
    fn from(p: ExtensionProblem) -> Self {
        ExtensionProblemRepr {
            dim: p.dim,
            norm: p.norm,
            subspace_basis: p.subspace_basis,
            functional_on_subspace: p.functional_on_subspace,
            operators: p.operators,
        }
    }
}

impl ExtensionProblem {
    pub fn new(
        dim: usize,
        norm: NormKind,
        subspace_basis: Vec<Vector>,
        functional_on_subspace: Vec<f64>,
        operators: SemigroupNode,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        for y in &subspace_basis {
            Error::check_dim(dim, y.len())?;
            if y.iter().any(|c| !c.is_finite()) {
                return Err(Error::NonFinite("subspace basis"));
            }
        }
        if functional_on_subspace.len() != subspace_basis.len() {
            return Err(Error::Malformed {
                what: "extension problem",
                detail: format!(
                    "{} functional values for {} basis vectors",
                    functional_on_subspace.len(),
                    subspace_basis.len()
                ),
            });
        }
        if functional_on_subspace.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("functional values"));
        }
        Error::check_dim(dim, operators.dim())?;
        Ok(ExtensionProblem {
            dim,
            norm,
            subspace_basis,
            functional_on_subspace,
            operators,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm(&self) -> NormSpec {
        NormSpec::new(self.norm, self.dim).expect("dimension checked at construction")
    }

    pub fn subspace_basis(&self) -> &[Vector] {
        &self.subspace_basis
    }

    pub fn functional_on_subspace(&self) -> &[f64] {
        &self.functional_on_subspace
    }

    pub fn operators(&self) -> &SemigroupNode {
        &self.operators
    }

    /// Rows are the basis vectors, so `E·λ` lists `Λ(yᵢ)`.
    fn evaluation_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.subspace_basis.len(), self.dim, |i, j| {
            self.subspace_basis[i][j]
        })
    }

    fn basis_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.subspace_basis.len(), |i, j| {
            self.subspace_basis[j][i]
        })
    }

    fn check_basis(&self) -> Result<()> {
        let m = self.subspace_basis.len();
        if m == 0 {
            return Ok(());
        }
        let rank = self.basis_matrix().rank(1e-10);
        if rank < m {
            return Err(Error::DegenerateBasis);
        }
        Ok(())
    }

    /// Coordinates of `x` in the subspace basis and the distance left over.
    fn subspace_coords(&self, x: &Vector) -> (Vector, f64) {
        let b = self.basis_matrix();
        if b.ncols() == 0 {
            return (Vector::zeros(0), x.amax());
        }
        let coords = b
            .clone()
            .svd(true, true)
            .solve(x, 1e-12)
            .expect("U and Vᵀ were computed");
        let miss = (&b * &coords - x).amax();
        (coords, miss)
    }

    /// Checks `T` linear, `T(Y) ⊂ Y`, `‖T‖ ≤ 1` and `g∘T = g` for every operator.
    pub fn check_hypotheses(&self) -> Result<()> {
        self.check_basis()?;
        let norm = self.norm();
        for (label, t) in self.operators.generators() {
            if !t.is_linear() {
                return Err(Error::NonLinearOperator(label));
            }
            let op_norm = norm.operator_norm(t.matrix());
            if op_norm > 1.0 + HYPOTHESIS_TOL {
                return Err(Error::InvariantViolation {
                    invariant: "operator norm at most 1",
                    operator: label,
                    residual: op_norm - 1.0,
                });
            }
            for (y, &gy) in self.subspace_basis.iter().zip(&self.functional_on_subspace) {
                let ty = t.matrix() * y;
                let (coords, miss) = self.subspace_coords(&ty);
                if miss > HYPOTHESIS_TOL {
                    return Err(Error::InvariantViolation {
                        invariant: "T(Y) inside Y",
                        operator: label,
                        residual: miss,
                    });
                }
                let g_ty: f64 = coords
                    .iter()
                    .zip(&self.functional_on_subspace)
                    .map(|(c, g)| c * g)
                    .sum();
                if (g_ty - gy).abs() > HYPOTHESIS_TOL {
                    return Err(Error::InvariantViolation {
                        invariant: "g∘T = g on Y",
                        operator: label,
                        residual: (g_ty - gy).abs(),
                    });
                }
            }
        }
        Ok(())
    }

    fn with_functional(&self, values: Vec<f64>) -> ExtensionProblem {
        ExtensionProblem {
            functional_on_subspace: values,
            ..self.clone()
        }
    }
}

/// `‖g‖ = max |g(y)|` over `y ∈ Y` with `‖y‖ ≤ 1`.
pub fn subspace_norm(problem: &ExtensionProblem) -> Result<f64> {
    problem.check_basis()?;
    let m = problem.subspace_basis.len();
    if m == 0 {
        return Ok(0.0);
    }
    let n = problem.dim;
    let mut lp = LinearProgram::new();
    let c = lp.add_vars(m, VarKind::Free);
    for (k, &g) in problem.functional_on_subspace.iter().enumerate() {
        lp.set_objective(c + k, -g);
    }
    let coord_row = |i: usize| (0..m).map(move |k| (c + k, problem.subspace_basis[k][i]));
    match problem.norm {
        NormKind::MaxAbs => {
            for i in 0..n {
                lp.add_row(coord_row(i), Relation::Le, 1.0);
                lp.add_row(coord_row(i), Relation::Ge, -1.0);
            }
        }
        NormKind::SumAbs => {
            let pos = lp.add_vars(n, VarKind::NonNegative);
            let neg = lp.add_vars(n, VarKind::NonNegative);
            for i in 0..n {
                lp.add_row(
                    coord_row(i).chain([(pos + i, -1.0), (neg + i, 1.0)]),
                    Relation::Eq,
                    0.0,
                );
            }
            lp.add_row(
                (0..n).flat_map(|i| [(pos + i, 1.0), (neg + i, 1.0)]),
                Relation::Le,
                1.0,
            );
        }
    }
    match lp.solve()? {
        LpOutcome::Optimal { value, .. } => Ok((-value).max(0.0)),
        other => Err(Error::Numerical(format!("norm program returned {other:?}"))),
    }
}

/// A problem rescaled so that `‖g‖ = 1`, with the factor to undo it.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedProblem {
    pub problem: ExtensionProblem,
    pub scale: f64,
}

pub fn normalize_problem(problem: &ExtensionProblem) -> Result<NormalizedProblem> {
    let scale = subspace_norm(problem)?;
    if scale <= f64::EPSILON {
        return Err(Error::ZeroFunctional);
    }
    let values = problem
        .functional_on_subspace
        .iter()
        .map(|g| g / scale)
        .collect();
    Ok(NormalizedProblem {
        problem: problem.with_functional(values),
        scale,
    })
}

/// Vertices of `{Λ : ‖Λ‖_dual ≤ 1, Λ(yᵢ) = gᵢ}`.
///
/// Probes every face of the dual ball that can carry a vertex of the slice:
/// for the cube, each assignment of coordinates to {−1, free, +1}; for the
/// cross-polytope, each signed support. Cost is `3ⁿ` small solves.
pub fn build_constraint_set(problem: &ExtensionProblem) -> Result<Polytope> {
    problem.check_basis()?;
    let n = problem.dim;
    let needed = 3u128.checked_pow(n as u32).unwrap_or(u128::MAX);
    if needed > MAX_VERTEX_PROBES {
        return Err(Error::EnumerationTooLarge {
            needed,
            limit: MAX_VERTEX_PROBES,
        });
    }
    let e = problem.evaluation_matrix();
    let g = Vector::from_column_slice(&problem.functional_on_subspace);
    let mut vertices: Vec<Vector> = Vec::new();
    let mut push = |v: Vector| {
        if !vertices.iter().any(|w| (w - &v).amax() <= VERTEX_DEDUP_TOL) {
            vertices.push(v);
        }
    };

    // pattern digit per coordinate: 0 = free/off, 1 = +1, 2 = −1
    let patterns = (0..needed as usize).map(|mut code| {
        (0..n)
            .map(|_| {
                let d = code % 3;
                code /= 3;
                d
            })
            .collect::<Vec<_>>()
    });

    match problem.norm.dual() {
        NormKind::MaxAbs => {
            for pattern in patterns {
                let free: Vec<usize> = (0..n).filter(|&j| pattern[j] == 0).collect();
                let sign = |j: usize| if pattern[j] == 1 { 1.0 } else { -1.0 };
                let mut rhs = g.clone();
                for j in (0..n).filter(|&j| pattern[j] != 0) {
                    rhs -= e.column(j) * sign(j);
                }
                let Some(sol) = unique_solution(&e.select_columns(&free), &rhs) else {
                    continue;
                };
                if sol.amax() > 1.0 + MEMBERSHIP_TOL {
                    continue;
                }
                let mut v = Vector::zeros(n);
                for j in 0..n {
                    v[j] = if pattern[j] == 0 { 0.0 } else { sign(j) };
                }
                for (k, &j) in free.iter().enumerate() {
                    v[j] = sol[k];
                }
                push(v);
            }
        }
        NormKind::SumAbs => {
            if let Some(v) = unique_solution(&e, &g) {
                if v.abs().sum() <= 1.0 + MEMBERSHIP_TOL {
                    push(v);
                }
            }
            for pattern in patterns {
                let support: Vec<usize> = (0..n).filter(|&j| pattern[j] != 0).collect();
                if support.is_empty() {
                    continue;
                }
                let signs: Vec<f64> = support
                    .iter()
                    .map(|&j| if pattern[j] == 1 { 1.0 } else { -1.0 })
                    .collect();
                let mut system = DMatrix::zeros(e.nrows() + 1, support.len());
                system
                    .view_mut((0, 0), (e.nrows(), support.len()))
                    .copy_from(&e.select_columns(&support));
                for (k, s) in signs.iter().enumerate() {
                    system[(e.nrows(), k)] = *s;
                }
                let rhs = Vector::from_iterator(e.nrows() + 1, g.iter().copied().chain([1.0]));
                let Some(sol) = unique_solution(&system, &rhs) else {
                    continue;
                };
                if sol.iter().zip(&signs).any(|(x, s)| x * s < -MEMBERSHIP_TOL) {
                    continue;
                }
                let mut v = Vector::zeros(n);
                for (k, &j) in support.iter().enumerate() {
                    v[j] = sol[k];
                }
                push(v);
            }
        }
    }
    debug!("constraint set: {} vertices", vertices.len());
    if vertices.is_empty() {
        return Err(Error::EmptyConstraintSet);
    }
    Polytope::new(vertices)
}

/// The unique solution of `a·x = b`, if the system is consistent and has full column rank.
fn unique_solution(a: &DMatrix<f64>, b: &Vector) -> Option<Vector> {
    if a.ncols() == 0 {
        return (b.amax() <= MEMBERSHIP_TOL).then(|| Vector::zeros(0));
    }
    let sol = AffineSubspace::solve(a, b)?;
    sol.basis.is_empty().then_some(sol.basepoint)
}

/// `Λ ↦ Λ∘T` in dual coordinates: `λ ↦ Aᵀλ`.
pub fn dual_action(t: &AffineMap) -> Result<AffineMap> {
    t.transpose_linear()
        .ok_or_else(|| Error::NonLinearOperator("operator".into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionResult {
    /// Coefficients of `G` in dual coordinates.
    #[serde(with = "vector_serde")]
    pub functional: Vector,
    pub dual_norm: f64,
    pub invariance_residuals: Residuals,
    pub restriction_residual: f64,
    /// `‖g‖`, the norm the extension must match.
    pub subspace_norm: f64,
    /// Max-norm distance between the exact and averaged fixed points, when the
    /// fixed point is unique and averaging converged.
    pub cesaro_gap: Option<f64>,
}

fn restriction_residual(functional: &Vector, problem: &ExtensionProblem) -> f64 {
    problem
        .subspace_basis
        .iter()
        .zip(&problem.functional_on_subspace)
        .map(|(y, g)| (functional.dot(y) - g).abs())
        .fold(0.0, f64::max)
}

fn invariance_residuals(functional: &Vector, problem: &ExtensionProblem) -> Residuals {
    problem
        .operators
        .generators()
        .into_iter()
        .map(|(label, t)| (label, (t.matrix().tr_mul(functional) - functional).amax()))
        .collect()
}

pub fn invariant_extension(problem: &ExtensionProblem, tol: f64) -> Result<ExtensionResult> {
    invariant_extension_with_budget(problem, tol, DEFAULT_WORD_BUDGET)
}

/// Finds `G` with `G = g` on `Y`, `‖G‖ = ‖g‖` and `G∘T = G` for every operator.
pub fn invariant_extension_with_budget(
    problem: &ExtensionProblem,
    tol: f64,
    word_budget: usize,
) -> Result<ExtensionResult> {
    problem.check_hypotheses()?;
    let norm = problem.norm();
    // ‖T‖ ≤ 1 means every operator preserves the primal unit ball.
    let report = validate_structure(
        &problem.operators,
        &norm.unit_ball(),
        word_budget,
        MEMBERSHIP_TOL,
    )?;
    if !report.ok {
        let first = &report.failures[0];
        return Err(Error::InvalidStructure(format!(
            "{:?} at {}",
            first.kind,
            first.witnesses.join(", ")
        )));
    }

    let normalized = match normalize_problem(problem) {
        Ok(p) => p,
        Err(Error::ZeroFunctional) => return Ok(zero_extension(problem)),
        Err(e) => return Err(e),
    };
    let k = build_constraint_set(&normalized.problem)?;
    let dual = problem.operators.map_generators(|_, t| dual_action(t))?;

    let dual_maps: Vec<AffineMap> = dual
        .generators()
        .into_iter()
        .map(|(_, m)| m.clone())
        .collect();
    let inv = check_invariance(&dual_maps, &k, MEMBERSHIP_TOL)?;
    if let Some(f) = inv.failures.first() {
        let idx: usize = f.witnesses[0].trim_start_matches('g').parse().unwrap_or(0);
        return Err(Error::InvariantViolation {
            invariant: "dual action maps K into K",
            operator: dual.generators()[idx].0.clone(),
            residual: f.residual,
        });
    }

    let exact = solve_exact(&dual, &k, tol)?;
    let cesaro_gap = if exact.is_unique() {
        match solve_cesaro(&dual, &k, &k.centroid(), tol, DEFAULT_N_MAX) {
            Ok(avg) => Some((avg.point - &exact.point).amax() * normalized.scale),
            Err(e) => {
                warn!("averaging cross-check did not converge: {e}");
                None
            }
        }
    } else {
        None
    };

    let functional = exact.point * normalized.scale;
    Ok(ExtensionResult {
        dual_norm: norm.dual().norm(&functional),
        invariance_residuals: invariance_residuals(&functional, problem),
        restriction_residual: restriction_residual(&functional, problem),
        subspace_norm: normalized.scale,
        cesaro_gap,
        functional,
    })
}

fn zero_extension(problem: &ExtensionProblem) -> ExtensionResult {
    let functional = Vector::zeros(problem.dim);
    ExtensionResult {
        dual_norm: 0.0,
        invariance_residuals: invariance_residuals(&functional, problem),
        restriction_residual: restriction_residual(&functional, problem),
        subspace_norm: 0.0,
        cesaro_gap: None,
        functional,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtensionVerification {
    pub pass: bool,
    pub restriction_residual: f64,
    pub dual_norm: f64,
    pub subspace_norm: f64,
    pub invariance_residuals: Residuals,
    pub failures: Vec<String>,
}

/// Recomputes every property of `result` from scratch.
pub fn verify_extension(
    result: &ExtensionResult,
    problem: &ExtensionProblem,
    tol: f64,
) -> Result<ExtensionVerification> {
    Error::check_dim(problem.dim, result.functional.len())?;
    let g = &result.functional;
    let restriction = restriction_residual(g, problem);
    let dual_norm = problem.norm().dual().norm(g);
    let target = subspace_norm(problem)?;
    let invariance = invariance_residuals(g, problem);

    let mut failures = Vec::new();
    if restriction > tol {
        failures.push(format!(
            "restriction residual {restriction:e} exceeds {tol:e}"
        ));
    }
    if dual_norm > target + tol {
        failures.push(format!(
            "dual norm {dual_norm} exceeds subspace norm {target}"
        ));
    }
    for (label, r) in &invariance {
        if *r > tol {
            failures.push(format!("invariance under `{label}` violated by {r:e}"));
        }
    }
    Ok(ExtensionVerification {
        pass: failures.is_empty(),
        restriction_residual: restriction,
        dual_norm,
        subspace_norm: target,
        invariance_residuals: invariance,
        failures,
    })
}
