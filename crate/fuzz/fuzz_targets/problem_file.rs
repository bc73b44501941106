#![no_main]

use fixmk::{run_problem, Command, Overrides, ProblemFile};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(problem) = ProblemFile::parse(text) else {
        return;
    };
    let canonical = problem.to_canonical_json();
    let again = ProblemFile::parse(&canonical).expect("canonical output reparses");
    assert_eq!(again.to_canonical_json(), canonical);

    // keep the solver stages cheap
    let overrides = Overrides {
        n_max: Some(1 << 10),
        word_budget: Some(problem.options.word_budget.clamp(1, 3)),
        ..Overrides::default()
    };
    for command in [
        Command::Solve,
        Command::Check,
        Command::Extend,
        Command::Fip,
    ] {
        let report = run_problem(command, &problem, &overrides);
        assert!((0..=2).contains(&report.exit_code()));
    }
});
