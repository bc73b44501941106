//! Shared helpers for the integration tests: fixture loading and an
//! enumeration-based oracle for the minimal-norm invariant extension.

#![allow(dead_code)]

use std::path::PathBuf;

use fixmk::problem::FixedPointPayload;
use fixmk::{Payload, ProblemFile};
use fixmk_core::extension::ExtensionProblem;
use fixmk_core::geometry::{NormKind, Vector};
use nalgebra::DMatrix;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(format!("{name}.json"))
}

pub fn load(name: &str) -> ProblemFile {
    let text = std::fs::read_to_string(fixture_path(name)).unwrap();
    ProblemFile::parse(&text).unwrap()
}

pub fn load_fixed_point(name: &str) -> (FixedPointPayload, fixmk::Options) {
    let p = load(name);
    match p.payload {
        Payload::FixedPoint(fp) => (fp, p.options),
        other => panic!("{name} is a {:?} fixture", other.kind()),
    }
}

pub fn load_extension(name: &str) -> ExtensionProblem {
    match load(name).payload {
        Payload::Extension(e) => e,
        other => panic!("{name} is a {:?} fixture", other.kind()),
    }
}

/// Valid fixed-point fixtures: every one passes structural validation.
pub const VALID_FIXED_POINT: &[&str] = &[
    "rotation_square",
    "stochastic_2state",
    "interval_commuting",
    "identity_triangle",
    "circulant_walk_4",
    "birth_death_5",
    "dihedral_square",
    "nilpotent_projection",
    "s3_simplex",
    "permutation_cube_6",
    "signed_cube_depth3",
];

pub struct BruteOptimum {
    pub norm: f64,
    /// Distinct basic optimal solutions.
    pub minimizers: Vec<Vector>,
}

impl BruteOptimum {
    pub fn unique(&self) -> Option<&Vector> {
        (self.minimizers.len() == 1).then(|| &self.minimizers[0])
    }
}

/// Minimizes the dual norm of `Λ` subject to `Λ(yᵢ) = gᵢ` and `Tᵀλ = λ` by
/// enumerating basic solutions directly, without any simplex code.
pub fn brute_min_norm(problem: &ExtensionProblem) -> BruteOptimum {
    let n = problem.dim();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs = Vec::new();
    for (y, g) in problem
        .subspace_basis()
        .iter()
        .zip(problem.functional_on_subspace())
    {
        rows.push(y.iter().copied().collect());
        rhs.push(*g);
    }
    for (_, t) in problem.operators().generators() {
        let a = t.matrix();
        for i in 0..n {
            rows.push((0..n).map(|j| a[(j, i)] - f64::from(i == j)).collect());
            rhs.push(0.0);
        }
    }
    let c = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let d = Vector::from_vec(rhs);

    let mut candidates: Vec<(f64, Vector)> = Vec::new();
    if d.amax() == 0.0 {
        candidates.push((0.0, Vector::zeros(n)));
    }
    match problem.norm().dual().kind() {
        NormKind::SumAbs => {
            for mask in 1u32..(1 << n) {
                let support: Vec<usize> = (0..n).filter(|j| mask & (1 << j) != 0).collect();
                if let Some(sol) = unique_solve(&c.select_columns(&support), &d) {
                    let mut lambda = Vector::zeros(n);
                    for (k, &j) in support.iter().enumerate() {
                        lambda[j] = sol[k];
                    }
                    candidates.push((lambda.abs().sum(), lambda));
                }
            }
        }
        NormKind::MaxAbs => {
            // each coordinate is free, or pinned at +t or −t; unknowns (λ_free, t)
            for code in 0..3usize.pow(n as u32) {
                let pattern: Vec<usize> = (0..n).map(|j| code / 3usize.pow(j as u32) % 3).collect();
                let free: Vec<usize> = (0..n).filter(|&j| pattern[j] == 0).collect();
                if free.len() == n {
                    continue;
                }
                let mut system = DMatrix::zeros(c.nrows(), free.len() + 1);
                for (k, &j) in free.iter().enumerate() {
                    system.set_column(k, &c.column(j));
                }
                for j in (0..n).filter(|&j| pattern[j] != 0) {
                    let s = if pattern[j] == 1 { 1.0 } else { -1.0 };
                    let col = system.column(free.len()) + c.column(j) * s;
                    system.set_column(free.len(), &col);
                }
                let Some(sol) = unique_solve(&system, &d) else {
                    continue;
                };
                let t = sol[free.len()];
                if t < -1e-12
                    || free
                        .iter()
                        .enumerate()
                        .any(|(k, _)| sol[k].abs() > t + 1e-9)
                {
                    continue;
                }
                let mut lambda = Vector::zeros(n);
                for j in 0..n {
                    lambda[j] = match pattern[j] {
                        0 => sol[free.iter().position(|&f| f == j).unwrap()],
                        1 => t,
                        _ => -t,
                    };
                }
                candidates.push((t, lambda));
            }
        }
    }
    let norm = candidates
        .iter()
        .map(|(v, _)| *v)
        .fold(f64::INFINITY, f64::min);
    let mut minimizers: Vec<Vector> = Vec::new();
    for (v, lambda) in candidates {
        if v <= norm + 1e-9 && !minimizers.iter().any(|m| (m - &lambda).amax() < 1e-9) {
            minimizers.push(lambda);
        }
    }
    BruteOptimum { norm, minimizers }
}

/// The solution of `a·x = b` when it exists and `a` has full column rank.
fn unique_solve(a: &DMatrix<f64>, b: &Vector) -> Option<Vector> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    if svd
        .singular_values
        .iter()
        .any(|&s| s <= 1e-10 * smax.max(1.0))
        || a.ncols() > a.nrows()
    {
        return None;
    }
    let x = svd.solve(b, 1e-12).ok()?;
    ((a * &x - b).amax() <= 1e-9 * (1.0 + b.amax())).then_some(x)
}
