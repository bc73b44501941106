use std::time::Instant;

use fixmk_core::extension::{
    invariant_extension_with_budget, normalize_problem, verify_extension, ExtensionProblem,
};
use fixmk_core::geometry::{vector_from, Polytope, MEMBERSHIP_TOL};
use fixmk_core::semigroup::{validate_structure, SemigroupNode, ValidationReport};
use fixmk_core::solver::{fip_check, solve_cesaro, solve_exact, FixedPointResult};
use fixmk_core::Error;
use log::info;
use serde_json::{json, Value};

use crate::problem::{FipSettings, Mode, Options, Payload, ProblemFile};
use crate::report::{Report, Stage, Status};

/// Largest allowed max-norm gap between the exact and averaged points.
pub const CROSS_CHECK_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Solve,
    Check,
    Extend,
    Fip,
}

/// Command-line values that take precedence over the file's options.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub tol: Option<f64>,
    pub n_max: Option<u64>,
    pub word_budget: Option<usize>,
    pub seed: Option<u64>,
    pub mode: Option<Mode>,
}

impl Overrides {
    pub fn apply(&self, options: &Options) -> Options {
        Options {
            tol: self.tol.unwrap_or(options.tol),
            n_max: self.n_max.unwrap_or(options.n_max),
            word_budget: self.word_budget.unwrap_or(options.word_budget),
            seed: self.seed.unwrap_or(options.seed),
            mode: self.mode.unwrap_or(options.mode),
            validate: options.validate,
        }
    }
}

/// Parses `source` and runs `command` on it. Never panics on bad input: every
/// failure becomes a report with the matching status and exit code.
pub fn run_source(command: Command, source: &str, overrides: &Overrides) -> Report {
    let start = Instant::now();
    let mut report = match ProblemFile::parse(source) {
        Ok(problem) => run_problem(command, &problem, overrides),
        Err(e) => Report::parse_error(&e),
    };
    report.timing_ms = start.elapsed().as_secs_f64() * 1e3;
    report
}

pub fn run_problem(command: Command, problem: &ProblemFile, overrides: &Overrides) -> Report {
    let options = overrides.apply(&problem.options);
    let outcome = match (command, &problem.payload) {
        (Command::Solve, Payload::FixedPoint(p)) => {
            run_solve(&p.structure, &p.polytope, p.x0.as_deref(), &options)
        }
        (Command::Extend, Payload::Extension(p)) => run_extend(p, &options),
        (Command::Check, Payload::StructureCheck(p)) => {
            run_check(&p.structure, &p.polytope, p.fip.as_ref(), &options)
        }
        (Command::Check, payload @ (Payload::FixedPoint(_) | Payload::FipCheck(_))) => {
            let (s, k) = payload.structure().expect("structured payload");
            run_check(s, k, None, &options)
        }
        (Command::Fip, Payload::FipCheck(p)) => {
            run_fip(&p.structure, &p.polytope, &p.settings(), &options)
        }
        (Command::Fip, payload @ (Payload::FixedPoint(_) | Payload::StructureCheck(_))) => {
            let (s, k) = payload.structure().expect("structured payload");
            run_fip(s, k, &FipSettings::default(), &options)
        }
        (command, payload) => Ok(Report::new(Status::Failed, Stage::Parse, Value::Null)
            .with_message(format!(
                "a {:?} problem cannot be run with `{}`",
                payload.kind(),
                command_name(command)
            ))),
    };
    outcome.unwrap_or_else(|(stage, e)| Report::from_error(stage, &e))
}

fn command_name(command: Command) -> &'static str {
    match command {
        Command::Solve => "solve",
        Command::Check => "check",
        Command::Extend => "extend",
        Command::Fip => "fip",
    }
}

type Staged<T> = Result<T, (Stage, Error)>;

fn at(stage: Stage) -> impl FnOnce(Error) -> (Stage, Error) {
    move |e| (stage, e)
}

/// Runs structural validation; `Some(report)` means the input failed it.
fn validation_gate(
    structure: &SemigroupNode,
    k: &Polytope,
    options: &Options,
) -> Staged<Option<Report>> {
    if !options.validate {
        return Ok(None);
    }
    let validation = validate_structure(structure, k, options.word_budget, MEMBERSHIP_TOL)
        .map_err(at(Stage::Validation))?;
    Ok((!validation.ok).then(|| validation_failure(&validation)))
}

fn validation_failure(validation: &ValidationReport) -> Report {
    let first = &validation.failures[0];
    Report::new(
        Status::Failed,
        Stage::Validation,
        json!({ "validation": validation }),
    )
    .with_message(format!(
        "{} failure(s); first: {:?} at {}",
        validation.failures.len(),
        first.kind,
        first.witnesses.join(", ")
    ))
}

pub fn run_solve(
    structure: &SemigroupNode,
    k: &Polytope,
    x0: Option<&[f64]>,
    options: &Options,
) -> Staged<Report> {
    if let Some(failed) = validation_gate(structure, k, options)? {
        return Ok(failed);
    }
    let exact = match options.mode {
        Mode::Exact | Mode::CrossCheck => {
            Some(solve_exact(structure, k, options.tol).map_err(at(Stage::Exact))?)
        }
        Mode::Cesaro => None,
    };
    let cesaro = match options.mode {
        Mode::Cesaro | Mode::CrossCheck => {
            let x0 = match x0 {
                Some(c) => vector_from(c).map_err(at(Stage::Cesaro))?,
                None => k.centroid(),
            };
            Some(
                solve_cesaro(structure, k, &x0, options.tol, options.n_max)
                    .map_err(at(Stage::Cesaro))?,
            )
        }
        Mode::Exact => None,
    };
    info!("solve finished in mode {:?}", options.mode);

    match (exact, cesaro) {
        (Some(e), Some(c)) => Ok(cross_check_report(&e, &c)),
        (Some(r), None) | (None, Some(r)) => Ok(Report::ok(
            json!({ "point": r.point.as_slice(), "solution": r }),
        )),
        (None, None) => unreachable!("every mode runs at least one solver"),
    }
}

fn cross_check_report(exact: &FixedPointResult, cesaro: &FixedPointResult) -> Report {
    let disagreement = exact
        .is_unique()
        .then(|| (&exact.point - &cesaro.point).amax());
    let result = json!({
        "point": exact.point.as_slice(),
        "unique": exact.is_unique(),
        "disagreement": disagreement,
        "exact": exact,
        "cesaro": cesaro,
    });
    match disagreement {
        Some(d) if d > CROSS_CHECK_TOL => Report::new(Status::Failed, Stage::CrossCheck, result)
            .with_message(format!("exact and averaged points differ by {d:e}")),
        _ => Report::ok(result),
    }
}

pub fn run_check(
    structure: &SemigroupNode,
    k: &Polytope,
    fip: Option<&FipSettings>,
    options: &Options,
) -> Staged<Report> {
    let validation = validate_structure(structure, k, options.word_budget, MEMBERSHIP_TOL)
        .map_err(at(Stage::Validation))?;
    if !validation.ok {
        return Ok(validation_failure(&validation));
    }
    let Some(settings) = fip else {
        return Ok(Report::ok(json!({ "validation": validation })));
    };
    let fip = fip_check(
        structure,
        k,
        settings.sample_count,
        settings.family,
        options.seed,
        options.word_budget,
    )
    .map_err(at(Stage::Fip))?;
    let status = if fip.feasible {
        Status::Ok
    } else {
        Status::Infeasible
    };
    let stage = if fip.feasible {
        Stage::Done
    } else {
        Stage::Fip
    };
    Ok(Report::new(
        status,
        stage,
        json!({ "validation": validation, "fip": fip }),
    ))
}

pub fn run_fip(
    structure: &SemigroupNode,
    k: &Polytope,
    settings: &FipSettings,
    options: &Options,
) -> Staged<Report> {
    if let Some(failed) = validation_gate(structure, k, options)? {
        return Ok(failed);
    }
    let fip = fip_check(
        structure,
        k,
        settings.sample_count,
        settings.family,
        options.seed,
        options.word_budget,
    )
    .map_err(at(Stage::Fip))?;
    Ok(if fip.feasible {
        Report::ok(json!({ "fip": fip }))
    } else {
        Report::new(Status::Infeasible, Stage::Fip, json!({ "fip": fip })).with_message(format!(
            "{} sampled images share no point",
            fip.sample_count
        ))
    })
}

pub fn run_extend(problem: &ExtensionProblem, options: &Options) -> Staged<Report> {
    let scale = match normalize_problem(problem) {
        Ok(n) => n.scale,
        Err(Error::ZeroFunctional) => 0.0,
        Err(e) => return Err((Stage::Precondition, e)),
    };
    let result = invariant_extension_with_budget(problem, options.tol, options.word_budget)
        .map_err(at(Stage::Extension))?;
    let verification =
        verify_extension(&result, problem, options.tol).map_err(at(Stage::Verification))?;
    let body = json!({
        "functional": result.functional.as_slice(),
        "scale": scale,
        "extension": result,
        "verification": verification,
    });
    Ok(if verification.pass {
        Report::ok(body)
    } else {
        Report::new(Status::Failed, Stage::Verification, body)
            .with_message(verification.failures.join("; "))
    })
}
