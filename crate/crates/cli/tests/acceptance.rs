//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod support;

use std::collections::BTreeSet;
use std::process::Command as Process;
use std::time::Instant;

use fixmk::{run_problem, Command, Overrides, Status};
use fixmk_core::extension::{invariant_extension, subspace_norm};
use fixmk_core::geometry::{feasible_point, vector_from, NormSpec, Vector, MEMBERSHIP_TOL};
use fixmk_core::semigroup::{
    conjugate_in_hull, enumerate_elements, validate_structure, ConvexCombination, SemigroupNode,
};
use fixmk_core::solver::{
    averaging_operator, fip_check, max_residual, residual, solve_cesaro, solve_exact, FipFamily,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;
use support::{
    brute_min_norm, fixture_path, load, load_extension, load_fixed_point, VALID_FIXED_POINT,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn start_point(name: &str) -> Vector {
    let (fp, _) = load_fixed_point(name);
    match fp.x0 {
        Some(c) => vector_from(&c).unwrap(),
        None => fp.polytope.centroid(),
    }
}

fn is_leaf(node: &SemigroupNode) -> bool {
    matches!(node, SemigroupNode::Leaf(_))
}

/// Every `(normal, quotient)` pair in the tree.
fn product_nodes(node: &SemigroupNode) -> Vec<(&SemigroupNode, &SemigroupNode)> {
    match node {
        SemigroupNode::Leaf(_) => Vec::new(),
        SemigroupNode::Product { normal, quotient } => {
            let mut out = vec![(normal.as_ref(), quotient.as_ref())];
            out.extend(product_nodes(normal));
            out.extend(product_nodes(quotient));
            out
        }
    }
}

fn criterion_1() -> Outcome {
    let mut depths = BTreeSet::new();
    let mut dims = BTreeSet::new();
    let mut slowest: f64 = 0.0;
    for name in VALID_FIXED_POINT {
        let (fp, opts) = load_fixed_point(name);
        let t = Instant::now();
        let report = validate_structure(
            &fp.structure,
            &fp.polytope,
            opts.word_budget,
            MEMBERSHIP_TOL,
        )
        .unwrap();
        ensure(report.ok, || {
            format!("{name}: validation failed: {:?}", report.failures)
        })?;
        let exact = solve_exact(&fp.structure, &fp.polytope, 1e-8)
            .map_err(|e| format!("{name}: exact: {e}"))?;
        let avg = solve_cesaro(
            &fp.structure,
            &fp.polytope,
            &start_point(name),
            1e-8,
            opts.n_max,
        )
        .map_err(|e| format!("{name}: cesaro: {e}"))?;
        let elapsed = t.elapsed().as_secs_f64();
        slowest = slowest.max(elapsed);
        ensure(exact.max_residual() <= 1e-8, || {
            format!("{name}: exact residual {:e}", exact.max_residual())
        })?;
        ensure(avg.max_residual() <= 1e-8, || {
            format!("{name}: cesaro residual {:e}", avg.max_residual())
        })?;
        ensure(elapsed < 1.0, || format!("{name}: took {elapsed:.3} s"))?;
        depths.insert(report.depth);
        dims.insert(fp.polytope.dim());
    }
    ensure(VALID_FIXED_POINT.len() >= 8, || {
        "fewer than 8 fixtures".into()
    })?;
    ensure(depths == BTreeSet::from([1, 2, 3]), || {
        format!("depths {depths:?}")
    })?;
    ensure(dims == (1..=6).collect(), || format!("dims {dims:?}"))?;
    Ok(format!(
        "{} fixtures, depths {depths:?}, dims {dims:?}, slowest {:.1} ms",
        VALID_FIXED_POINT.len(),
        slowest * 1e3
    ))
}

fn criterion_2() -> Outcome {
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for name in VALID_FIXED_POINT {
        let (fp, opts) = load_fixed_point(name);
        let exact = solve_exact(&fp.structure, &fp.polytope, 1e-8).unwrap();
        if !exact.is_unique() {
            continue;
        }
        let avg = solve_cesaro(
            &fp.structure,
            &fp.polytope,
            &start_point(name),
            1e-8,
            opts.n_max,
        )
        .unwrap();
        let gap = (&exact.point - &avg.point).amax();
        ensure(gap <= 1e-6, || format!("{name}: points differ by {gap:e}"))?;
        worst = worst.max(gap);
        checked += 1;
    }
    ensure(checked >= 6, || {
        format!("only {checked} fixtures have a unique fixed point")
    })?;
    Ok(format!(
        "{checked} unique-point fixtures, max gap {worst:.2e}"
    ))
}

fn criterion_3() -> Outcome {
    let mut checked = Vec::new();
    for name in VALID_FIXED_POINT {
        let (fp, _) = load_fixed_point(name);
        if fp.structure.generator_count() != 1 {
            continue;
        }
        let k = &fp.polytope;
        let diameter = k.diameter(&NormSpec::max_abs(k.dim()).unwrap()).unwrap();
        let mut starts = k.vertices().to_vec();
        starts.push(start_point(name));
        for n in (0..=10).map(|e| 1u64 << e) {
            let op = averaging_operator(&fp.structure, n).unwrap();
            for x0 in &starts {
                let r = max_residual(&residual(&op.apply(x0).unwrap(), &fp.structure).unwrap());
                let bound = diameter / n as f64;
                ensure(r <= bound + 1e-9, || {
                    format!("{name}: n = {n}: residual {r:e} > {bound:e}")
                })?;
            }
        }
        checked.push(*name);
    }
    ensure(checked.len() >= 3, || format!("only {checked:?}"))?;
    Ok(format!("n = 1..1024 on {checked:?}"))
}

fn criterion_4() -> Outcome {
    let mut fixtures = 0;
    for name in VALID_FIXED_POINT {
        let (fp, _) = load_fixed_point(name);
        if !is_leaf(&fp.structure) {
            continue;
        }
        let words = enumerate_elements(&fp.structure, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 0..200 {
            let a = ConvexCombination::random(&words, 3, &mut rng).to_map();
            let b = ConvexCombination::random(&words, 3, &mut rng).to_map();
            let dev = a
                .compose(&b)
                .unwrap()
                .max_deviation(&b.compose(&a).unwrap());
            ensure(dev <= 1e-10, || {
                format!("{name}: pair {i} commutes only to {dev:e}")
            })?;
            let images = [
                fp.polytope.image(&a).unwrap(),
                fp.polytope.image(&b).unwrap(),
            ];
            ensure(
                feasible_point(&images, MEMBERSHIP_TOL).unwrap().is_some(),
                || format!("{name}: pair {i} images are disjoint"),
            )?;
        }
        fixtures += 1;
    }
    ensure(fixtures >= 4, || {
        format!("only {fixtures} abelian fixtures")
    })?;
    Ok(format!("200 pairs on each of {fixtures} abelian fixtures"))
}

fn criterion_5() -> Outcome {
    let mut fixtures = 0;
    let mut solved = 0;
    for name in VALID_FIXED_POINT {
        let (fp, opts) = load_fixed_point(name);
        let products = product_nodes(&fp.structure);
        if products.is_empty() {
            continue;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (normal, quotient) in products {
            let words = enumerate_elements(normal, opts.word_budget).unwrap();
            for i in 0..100 {
                let h = ConvexCombination::random(&words, 3, &mut rng).to_map();
                for (label, g) in quotient.generators() {
                    let found = conjugate_in_hull(&h, g, &words, 1e-8)
                        .unwrap()
                        .ok_or_else(|| format!("{name}: no h″ for sample {i} and `{label}`"))?;
                    let dev = h
                        .compose(g)
                        .unwrap()
                        .max_deviation(&g.compose(&found.to_map()).unwrap());
                    ensure(dev <= 1e-8, || {
                        format!("{name}: sample {i}, `{label}`: mismatch {dev:e}")
                    })?;
                    solved += 1;
                }
            }
        }
        fixtures += 1;
    }
    ensure(fixtures >= 4, || {
        format!("only {fixtures} product fixtures")
    })?;
    Ok(format!(
        "{solved} conjugate searches on {fixtures} product fixtures"
    ))
}

fn criterion_6() -> Outcome {
    let mut runs = 0;
    for name in VALID_FIXED_POINT {
        let (fp, opts) = load_fixed_point(name);
        let mut families = vec![FipFamily::CoF];
        if !is_leaf(&fp.structure) {
            families.push(FipFamily::CoHCoQ);
        }
        for family in families {
            for seed in 0..100 {
                let r = fip_check(
                    &fp.structure,
                    &fp.polytope,
                    5,
                    family,
                    seed,
                    opts.word_budget,
                )
                .unwrap();
                ensure(r.feasible, || {
                    format!("{name}: {family:?} seed {seed} infeasible")
                })?;
                runs += 1;
            }
        }
    }
    Ok(format!("{runs} seeded 5-element samples, all feasible"))
}

fn criterion_7() -> Outcome {
    // independent oracle: replace one row of (Pᵀ − I)π = 0 by Σπ = 1
    let p = DMatrix::from_row_slice(2, 2, &[0.9, 0.1, 0.2, 0.8]);
    let mut a = p.transpose() - DMatrix::identity(2, 2);
    a.row_mut(1).fill(1.0);
    let pi = a
        .lu()
        .solve(&Vector::from_column_slice(&[0.0, 1.0]))
        .unwrap();
    ensure(
        (&pi - Vector::from_column_slice(&[2.0 / 3.0, 1.0 / 3.0])).amax() < 1e-15,
        || format!("oracle gave {pi:?}"),
    )?;

    let report = run_problem(
        Command::Solve,
        &load("stochastic_2state"),
        &Overrides::default(),
    );
    ensure(report.status == Status::Ok, || {
        format!("status {:?}", report.status)
    })?;
    let point: Vec<f64> = serde_json::from_value(report.result["point"].clone()).unwrap();
    let gap = (vector_from(&point).unwrap() - &pi).amax();
    ensure(gap <= 1e-9, || format!("p = {point:?}, off by {gap:e}"))?;
    Ok(format!(
        "p = ({:.12}, {:.12}), gap {gap:.1e}",
        point[0], point[1]
    ))
}

fn criterion_8() -> Outcome {
    let expected: [(&str, Vec<f64>); 2] = [
        ("swap_extension", vec![0.5, 0.5]),
        ("s3_extension", vec![1.0 / 3.0; 3]),
    ];
    for (name, want) in &expected {
        let problem = load_extension(name);
        let result = invariant_extension(&problem, 1e-8).map_err(|e| format!("{name}: {e}"))?;
        let gap = (&result.functional - vector_from(want).unwrap()).amax();
        ensure(gap <= 1e-8, || {
            format!("{name}: G = {:?}", result.functional.as_slice())
        })?;
        let excess = result.dual_norm - subspace_norm(&problem).unwrap();
        ensure(excess.abs() <= 1e-8, || {
            format!("{name}: dual norm off by {excess:e}")
        })?;
        let inv = result
            .invariance_residuals
            .values()
            .copied()
            .fold(0.0, f64::max);
        ensure(inv <= 1e-8, || {
            format!("{name}: invariance residual {inv:e}")
        })?;
    }
    for name in [
        "swap_extension",
        "s3_extension",
        "identity_extension",
        "l1_extension",
    ] {
        let problem = load_extension(name);
        let result = invariant_extension(&problem, 1e-8).unwrap();
        let brute = brute_min_norm(&problem);
        ensure((brute.norm - result.dual_norm).abs() <= 1e-8, || {
            format!("{name}: oracle norm {} vs {}", brute.norm, result.dual_norm)
        })?;
        if let Some(unique) = brute.unique() {
            let gap = (unique - &result.functional).amax();
            ensure(gap <= 1e-6, || {
                format!("{name}: oracle functional differs by {gap:e}")
            })?;
        }
    }
    Ok("swap → (½, ½), S₃ → (⅓, ⅓, ⅓); oracle agrees on 4 problems".into())
}

fn run_binary(sub: &str, fixture: &str) -> (i32, Value) {
    let out = Process::new(env!("CARGO_BIN_EXE_fixmk"))
        .arg(sub)
        .arg(fixture_path(fixture))
        .output()
        .expect("binary runs");
    let report: Value = serde_json::from_slice(&out.stdout).expect("json report on stdout");
    (out.status.code().unwrap_or(-1), report)
}

fn criterion_9() -> Outcome {
    let cases = [
        ("solve", "noncommuting_leaf", "failed", "validation"),
        (
            "extend",
            "norm_violating_extension",
            "failed",
            "precondition",
        ),
        ("solve", "translation_square", "infeasible", "exact"),
    ];
    for (sub, fixture, status, stage) in cases {
        let (code, report) = run_binary(sub, fixture);
        ensure(code == 1, || format!("{fixture}: exit code {code}"))?;
        ensure(
            report["status"] == status && report["stage"] == stage,
            || format!("{fixture}: {} at {}", report["status"], report["stage"]),
        )?;
    }
    let (_, r) = run_binary("solve", "noncommuting_leaf");
    let failure = &r["result"]["validation"]["failures"][0];
    ensure(failure["kind"] == "non-commuting", || {
        format!("kind {}", failure["kind"])
    })?;
    ensure(
        failure["witnesses"] == serde_json::json!(["r90", "reflect"]),
        || format!("witnesses {}", failure["witnesses"]),
    )?;
    let (_, r) = run_binary("extend", "norm_violating_extension");
    ensure(
        r["result"]["invariant"] == "operator norm at most 1",
        || format!("{}", r["result"]),
    )?;
    let (_, r) = run_binary("solve", "translation_square");
    ensure(r["result"]["error"] == "empty-fixed-set", || {
        format!("{}", r["result"])
    })?;
    Ok("validation, precondition and empty fixed set, each exit 1".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("fixed points on every fixture", criterion_1),
        ("exact and averaged points agree", criterion_2),
        ("residual within diameter/n", criterion_3),
        ("convex hulls of abelian families", criterion_4),
        ("conjugates in the normal hull", criterion_5),
        ("finite intersection samples", criterion_6),
        ("stationary distribution", criterion_7),
        ("invariant extensions", criterion_8),
        ("negative controls", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match std::panic::catch_unwind(check) {
            Ok(Ok(detail)) => println!("criterion {} PASS  {name}: {detail}", i + 1),
            Ok(Err(why)) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: {why}", i + 1);
            }
            Err(_) => {
                failed += 1;
                println!("criterion {} FAIL  {name}: panicked", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
