//! Problem files, reports and command dispatch for the `fixmk` binary.

pub mod problem;
pub mod report;
pub mod run;

pub use problem::{Kind, Mode, Options, ParseError, Payload, ProblemFile};
pub use report::{Report, Stage, Status};
pub use run::{run_problem, run_source, Command, Overrides};
