//! Structure trees for the semigroups the solver accepts.
//!
//! A tree is built from abelian leaves (commuting generator lists) and
//! products `H ⋊ F/H` whose normal factor `H` satisfies `h∘g = g∘h′` for some
//! word `h′` in the generators of `H`. Validation turns each of these
//! requirements into a numeric check with a witness on failure.

use std::collections::HashSet;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::lp::{LinearProgram, LpOutcome, Relation};
use crate::geometry::{convex_combination, AffineMap, AffineMapRepr, Polytope, ALGEBRA_TOL};

/// Two enumerated elements closer than this (entrywise) are the same element.
pub const DEDUP_TOL: f64 = 1e-10;
pub const DEFAULT_ELEMENT_CAP: usize = 10_000;
pub const DEFAULT_WORD_BUDGET: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeneratorRepr", into = "GeneratorRepr")]
pub struct Generator {
    pub label: Option<String>,
    pub map: AffineMap,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorRepr {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    matrix: Vec<Vec<f64>>,
    offset: Vec<f64>,
}

impl TryFrom<GeneratorRepr> for Generator {
    type Error = Error;

    fn try_from(repr: GeneratorRepr) -> Result<Self> {
        Ok(Generator {
            label: repr.label,
            map: AffineMap::from_rows(&repr.matrix, &repr.offset)?,
        })
    }
}

impl From<Generator> for GeneratorRepr {
    fn from(g: Generator) -> Self {
        let AffineMapRepr { matrix, offset } = g.map.into();
        GeneratorRepr {
            label: g.label,
            matrix,
            offset,
        }
    }
}

impl Generator {
    pub fn new(label: impl Into<String>, map: AffineMap) -> Self {
        Generator {
            label: Some(label.into()),
            map,
        }
    }

    pub fn unlabeled(map: AffineMap) -> Self {
        Generator { label: None, map }
    }
}

/// A finite structure tree: abelian leaves joined by normal-factor products.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NodeRepr", into = "NodeRepr")]
pub enum SemigroupNode {
    Leaf(Vec<Generator>),
    Product {
        normal: Box<SemigroupNode>,
        quotient: Box<SemigroupNode>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum NodeRepr {
    Leaf(Vec<Generator>),
    Product(ProductRepr),
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProductRepr {
    normal: Box<SemigroupNode>,
    quotient: Box<SemigroupNode>,
}

impl TryFrom<NodeRepr> for SemigroupNode {
    type Error = Error;

    fn try_from(repr: NodeRepr) -> Result<Self> {
        match repr {
            NodeRepr::Leaf(generators) => SemigroupNode::leaf(generators),
            NodeRepr::Product(p) => SemigroupNode::product(*p.normal, *p.quotient),
        }
    }
}

impl From<SemigroupNode> for NodeRepr {
    fn from(node: SemigroupNode) -> Self {
        match node {
            SemigroupNode::Leaf(g) => NodeRepr::Leaf(g),
            SemigroupNode::Product { normal, quotient } => {
                NodeRepr::Product(ProductRepr { normal, quotient })
            }
        }
    }
}

impl SemigroupNode {
    pub fn leaf(generators: Vec<Generator>) -> Result<Self> {
        let first = generators.first().ok_or_else(|| Error::Malformed {
            what: "semigroup leaf",
            detail: "no generators".into(),
        })?;
        let dim = first.map.dim();
        for g in &generators {
            Error::check_dim(dim, g.map.dim())?;
        }
        let node = SemigroupNode::Leaf(generators);
        node.check_labels()?;
        Ok(node)
    }

    /// Leaf with positional labels.
    pub fn leaf_of(maps: impl IntoIterator<Item = AffineMap>) -> Result<Self> {
        SemigroupNode::leaf(maps.into_iter().map(Generator::unlabeled).collect())
    }

    pub fn product(normal: SemigroupNode, quotient: SemigroupNode) -> Result<Self> {
        Error::check_dim(normal.dim(), quotient.dim())?;
        let node = SemigroupNode::Product {
            normal: Box::new(normal),
            quotient: Box::new(quotient),
        };
        node.check_labels()?;
        Ok(node)
    }

    fn check_labels(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for g in self.raw_generators() {
            if let Some(label) = &g.label {
                if !seen.insert(label.as_str()) {
                    return Err(Error::DuplicateLabel(label.clone()));
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            SemigroupNode::Leaf(g) => g[0].map.dim(),
            SemigroupNode::Product { normal, .. } => normal.dim(),
        }
    }

    /// Structural depth: 1 for a leaf, `1 + max(children)` for a product.
    pub fn depth(&self) -> usize {
        match self {
            SemigroupNode::Leaf(_) => 1,
            SemigroupNode::Product { normal, quotient } => 1 + normal.depth().max(quotient.depth()),
        }
    }

    fn raw_generators(&self) -> Vec<&Generator> {
        match self {
            SemigroupNode::Leaf(g) => g.iter().collect(),
            SemigroupNode::Product { normal, quotient } => {
                let mut all = normal.raw_generators();
                all.extend(quotient.raw_generators());
                all
            }
        }
    }

    /// Flattened generators (normal before quotient), unlabeled ones named `g{index}`.
    pub fn generators(&self) -> Vec<(String, &AffineMap)> {
        self.raw_generators()
            .into_iter()
            .enumerate()
            .map(|(i, g)| (g.label.clone().unwrap_or_else(|| format!("g{i}")), &g.map))
            .collect()
    }

    pub fn generator_count(&self) -> usize {
        match self {
            SemigroupNode::Leaf(g) => g.len(),
            SemigroupNode::Product { normal, quotient } => {
                normal.generator_count() + quotient.generator_count()
            }
        }
    }

    /// Same tree shape with every generator transformed; labels resolved and kept.
    pub fn map_generators<F>(&self, f: F) -> Result<SemigroupNode>
    where
        F: FnMut(&str, &AffineMap) -> Result<AffineMap>,
    {
        let labels: Vec<String> = self.generators().into_iter().map(|(l, _)| l).collect();
        let mut f = f;
        self.rebuild(&labels, &mut 0, &mut f)
    }

    fn rebuild<F>(&self, labels: &[String], next: &mut usize, f: &mut F) -> Result<SemigroupNode>
    where
        F: FnMut(&str, &AffineMap) -> Result<AffineMap>,
    {
        match self {
            SemigroupNode::Leaf(gens) => {
                let mut out = Vec::with_capacity(gens.len());
                for g in gens {
                    let label = &labels[*next];
                    *next += 1;
                    out.push(Generator::new(label.clone(), f(label, &g.map)?));
                }
                SemigroupNode::leaf(out)
            }
            SemigroupNode::Product { normal, quotient } => {
                let n = normal.rebuild(labels, next, f)?;
                let q = quotient.rebuild(labels, next, f)?;
                SemigroupNode::product(n, q)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureKind {
    NonCommuting,
    NotInvariant,
    NotNormal,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: FailureKind,
    pub witnesses: Vec<String>,
    pub residual: f64,
}

/// Outcome of a structural check. `depth` places the tree in the stratum `𝓕_depth`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub ok: bool,
    pub depth: usize,
    pub failures: Vec<Failure>,
}

impl ValidationReport {
    fn from_failures(depth: usize, failures: Vec<Failure>) -> Self {
        ValidationReport {
            ok: failures.is_empty(),
            depth,
            failures,
        }
    }
}

type Labeled<'a> = (String, &'a AffineMap);

fn labeled_list(maps: &[AffineMap]) -> Vec<Labeled<'_>> {
    maps.iter()
        .enumerate()
        .map(|(i, m)| (format!("g{i}"), m))
        .collect()
}

fn check_same_dim(gens: &[Labeled<'_>]) -> Result<usize> {
    let dim = gens
        .first()
        .map(|(_, m)| m.dim())
        .ok_or_else(|| Error::Malformed {
            what: "generator list",
            detail: "empty".into(),
        })?;
    for (_, m) in gens {
        Error::check_dim(dim, m.dim())?;
    }
    Ok(dim)
}

/// Pairwise commutation of generators, entrywise within [`ALGEBRA_TOL`].
pub fn check_abelian(generators: &[AffineMap]) -> Result<ValidationReport> {
    abelian_failures(&labeled_list(generators)).map(|f| ValidationReport::from_failures(1, f))
}

fn abelian_failures(gens: &[Labeled<'_>]) -> Result<Vec<Failure>> {
    check_same_dim(gens)?;
    let mut failures = Vec::new();
    for (i, (lf, f)) in gens.iter().enumerate() {
        for (lg, g) in &gens[i + 1..] {
            let dev = f
                .compose_unchecked(g)
                .max_deviation(&g.compose_unchecked(f));
            if dev > ALGEBRA_TOL {
                failures.push(Failure {
                    kind: FailureKind::NonCommuting,
                    witnesses: vec![lf.clone(), lg.clone()],
                    residual: dev,
                });
            }
        }
    }
    Ok(failures)
}

/// Whether every generator maps every vertex of `K` into `K` (within `tol`).
pub fn check_invariance(
    generators: &[AffineMap],
    k: &Polytope,
    tol: f64,
) -> Result<ValidationReport> {
    invariance_failures(&labeled_list(generators), k, tol)
        .map(|f| ValidationReport::from_failures(1, f))
}

fn invariance_failures(gens: &[Labeled<'_>], k: &Polytope, tol: f64) -> Result<Vec<Failure>> {
    let dim = check_same_dim(gens)?;
    Error::check_dim(k.dim(), dim)?;
    let mut failures = Vec::new();
    for (label, map) in gens {
        let mut worst: Option<(usize, f64)> = None;
        for (idx, v) in k.vertices().iter().enumerate() {
            let image = map.apply(v)?;
            if k.contains(&image, tol)? {
                continue;
            }
            let d = k.distance(&image)?;
            if worst.is_none_or(|(_, w)| d > w) {
                worst = Some((idx, d));
            }
        }
        if let Some((idx, residual)) = worst {
            failures.push(Failure {
                kind: FailureKind::NotInvariant,
                witnesses: vec![label.clone(), format!("vertex {idx}")],
                residual,
            });
        }
    }
    Ok(failures)
}

/// Checks the normal-factor relation `h∘g = g∘h′` for every normal generator `h`
/// and quotient generator `g`, searching `h′` among normal words of length ≤ `word_budget`.
pub fn check_normal_factor(
    normal: &SemigroupNode,
    quotient: &SemigroupNode,
    word_budget: usize,
    tol: f64,
) -> Result<ValidationReport> {
    let product = SemigroupNode::product(normal.clone(), quotient.clone())?;
    let all = product.generators();
    let (n_gens, q_gens) = all.split_at(normal.generator_count());
    let failures = normal_factor_failures(n_gens, q_gens, word_budget, tol)?;
    Ok(ValidationReport::from_failures(product.depth(), failures))
}

fn normal_factor_failures(
    normal: &[Labeled<'_>],
    quotient: &[Labeled<'_>],
    word_budget: usize,
    tol: f64,
) -> Result<Vec<Failure>> {
    if word_budget < 1 {
        return Err(Error::InvalidWordBudget);
    }
    let normal_maps: Vec<&AffineMap> = normal.iter().map(|(_, m)| *m).collect();
    let words = enumerate_words(&normal_maps, word_budget, DEFAULT_ELEMENT_CAP)?;
    let mut failures = Vec::new();
    for (lg, g) in quotient {
        let g_inv = g.inverse();
        for (lh, h) in normal {
            let target = h.compose_unchecked(g);
            let deviation = |w: &AffineMap| target.max_deviation(&g.compose_unchecked(w));
            // closed form g⁻¹∘h∘g first; fall back to exhaustive search
            let closed = g_inv.as_ref().and_then(|inv| {
                let candidate = inv.compose_unchecked(&target);
                words
                    .iter()
                    .filter(|w| w.max_deviation(&candidate) <= tol)
                    .map(deviation)
                    .find(|&d| d <= tol)
            });
            let best = match closed {
                Some(d) => d,
                None => words.iter().map(deviation).fold(f64::INFINITY, f64::min),
            };
            if best > tol {
                failures.push(Failure {
                    kind: FailureKind::NotNormal,
                    witnesses: vec![lh.clone(), lg.clone()],
                    residual: best,
                });
            }
        }
    }
    Ok(failures)
}

/// Recursive structural validation against the working polytope `K`.
pub fn validate_structure(
    node: &SemigroupNode,
    k: &Polytope,
    word_budget: usize,
    tol: f64,
) -> Result<ValidationReport> {
    if word_budget < 1 {
        return Err(Error::InvalidWordBudget);
    }
    Error::check_dim(k.dim(), node.dim())?;
    let labeled = node.generators();
    let (depth, failures) = validate_rec(node, &labeled, k, word_budget, tol)?;
    Ok(ValidationReport::from_failures(depth, failures))
}

fn validate_rec(
    node: &SemigroupNode,
    labeled: &[Labeled<'_>],
    k: &Polytope,
    word_budget: usize,
    tol: f64,
) -> Result<(usize, Vec<Failure>)> {
    match node {
        SemigroupNode::Leaf(_) => {
            let mut failures = abelian_failures(labeled)?;
            failures.extend(invariance_failures(labeled, k, tol)?);
            Ok((1, failures))
        }
        SemigroupNode::Product { normal, quotient } => {
            let (n_lab, q_lab) = labeled.split_at(normal.generator_count());
            let (dn, mut failures) = validate_rec(normal, n_lab, k, word_budget, tol)?;
            let (dq, fq) = validate_rec(quotient, q_lab, k, word_budget, tol)?;
            failures.extend(fq);
            failures.extend(normal_factor_failures(n_lab, q_lab, word_budget, tol)?);
            // The combined generator set is the union of the children's, whose
            // invariance has already been checked at the leaves.
            Ok((1 + dn.max(dq), failures))
        }
    }
}

/// Distinct products of generators of length ≤ `max_word_length`, identity first.
pub fn enumerate_elements(node: &SemigroupNode, max_word_length: usize) -> Result<Vec<AffineMap>> {
    enumerate_elements_capped(node, max_word_length, DEFAULT_ELEMENT_CAP)
}

pub fn enumerate_elements_capped(
    node: &SemigroupNode,
    max_word_length: usize,
    cap: usize,
) -> Result<Vec<AffineMap>> {
    if max_word_length < 1 {
        return Err(Error::InvalidWordBudget);
    }
    let gens: Vec<&AffineMap> = node.generators().into_iter().map(|(_, m)| m).collect();
    enumerate_words(&gens, max_word_length, cap)
}

fn enumerate_words(gens: &[&AffineMap], max_len: usize, cap: usize) -> Result<Vec<AffineMap>> {
    let dim = gens
        .first()
        .map(|g| g.dim())
        .ok_or_else(|| Error::Malformed {
            what: "generator list",
            detail: "empty".into(),
        })?;
    let mut all = vec![AffineMap::identity(dim)];
    let mut frontier = vec![0usize];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for &w in &frontier {
            for g in gens {
                let candidate = g.compose_unchecked(&all[w]);
                if all.iter().all(|e| e.max_deviation(&candidate) > DEDUP_TOL) {
                    if all.len() >= cap {
                        return Err(Error::ElementCapExceeded { cap });
                    }
                    next.push(all.len());
                    all.push(candidate);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    Ok(all)
}

/// A finite convex mixture `Σ wᵢ·eᵢ` of semigroup elements: an element of `co(F)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexCombination {
    pub weights: Vec<f64>,
    pub elements: Vec<AffineMap>,
}

impl ConvexCombination {
    pub fn new(weights: Vec<f64>, elements: Vec<AffineMap>) -> Result<Self> {
        convex_combination(&elements, &weights)?;
        Ok(ConvexCombination { weights, elements })
    }

    /// A random mixture of up to `max_support` distinct elements with random positive weights.
    pub fn random<R: Rng + ?Sized>(
        elements: &[AffineMap],
        max_support: usize,
        rng: &mut R,
    ) -> Self {
        assert!(
            !elements.is_empty(),
            "cannot sample from an empty element list"
        );
        let support = rng.random_range(1..=max_support.clamp(1, elements.len()));
        let picked = sample(rng, elements.len(), support);
        let raw: Vec<f64> = (0..support).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        ConvexCombination {
            weights: raw.iter().map(|w| w / total).collect(),
            elements: picked.iter().map(|i| elements[i].clone()).collect(),
        }
    }

    pub fn to_map(&self) -> AffineMap {
        convex_combination(&self.elements, &self.weights)
            .expect("weights validated at construction")
    }

    /// Term-by-term expansion of `self ∘ other` as a combination of products.
    pub fn compose(&self, other: &ConvexCombination) -> ConvexCombination {
        let mut weights = Vec::new();
        let mut elements = Vec::new();
        for (a, f) in self.weights.iter().zip(&self.elements) {
            for (b, g) in other.weights.iter().zip(&other.elements) {
                weights.push(a * b);
                elements.push(f.compose_unchecked(g));
            }
        }
        ConvexCombination { weights, elements }
    }
}

/// Looks for `h″ ∈ co(words)` with `h∘g = g∘h″` (entrywise within `tol`).
///
/// This is the normal-factor relation lifted to convex hulls; the weights
/// solve a linear feasibility problem.
pub fn conjugate_in_hull(
    h: &AffineMap,
    g: &AffineMap,
    words: &[AffineMap],
    tol: f64,
) -> Result<Option<ConvexCombination>> {
    Error::check_dim(h.dim(), g.dim())?;
    let target = h.compose(g)?;
    let images: Vec<AffineMap> = words.iter().map(|w| g.compose(w)).collect::<Result<_>>()?;
    let mut lp = LinearProgram::new();
    let w = lp.add_vars(words.len(), crate::geometry::lp::VarKind::NonNegative);
    lp.add_row((0..words.len()).map(|k| (w + k, 1.0)), Relation::Eq, 1.0);
    let entries = |m: &AffineMap| -> Vec<f64> {
        m.matrix()
            .iter()
            .chain(m.offset().iter())
            .copied()
            .collect()
    };
    let target_entries = entries(&target);
    let image_entries: Vec<Vec<f64>> = images.iter().map(entries).collect();
    // minimize the entrywise mismatch rather than accepting anything within tol
    let gap = lp.add_vars(1, crate::geometry::lp::VarKind::NonNegative);
    lp.set_objective(gap, 1.0);
    for (e, &t) in target_entries.iter().enumerate() {
        let row: Vec<(usize, f64)> = image_entries
            .iter()
            .enumerate()
            .map(|(k, ie)| (w + k, ie[e]))
            .collect();
        lp.add_row(row.iter().copied().chain([(gap, -1.0)]), Relation::Le, t);
        lp.add_row(row.into_iter().chain([(gap, 1.0)]), Relation::Ge, t);
    }
    Ok(match lp.solve()? {
        LpOutcome::Optimal { x, value } if value <= tol => {
            let raw: Vec<f64> = x[w..w + words.len()].iter().map(|v| v.max(0.0)).collect();
            let total: f64 = raw.iter().sum();
            Some(ConvexCombination {
                weights: raw.iter().map(|v| v / total).collect(),
                elements: words.to_vec(),
            })
        }
        _ => None,
    })
}
