use fixmk_core::extension::ExtensionProblem;
use fixmk_core::geometry::Polytope;
use fixmk_core::semigroup::{SemigroupNode, DEFAULT_WORD_BUDGET};
use fixmk_core::solver::{FipFamily, DEFAULT_N_MAX, DEFAULT_TOL};
use serde::de::DeserializeOwned;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize, Serializer};
use serde_json::value::RawValue;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kind {
    FixedPoint,
    Extension,
    StructureCheck,
    FipCheck,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    Cesaro,
    #[default]
    CrossCheck,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Options {
    pub tol: f64,
    pub n_max: u64,
    pub word_budget: usize,
    pub seed: u64,
    pub mode: Mode,
    /// Run structural validation before solving. Turning it off lets
    /// deliberately invalid inputs reach the solver stages.
    pub validate: bool,
}

impl Default for Options {
    fn default() -> Self {
        Options {
            tol: DEFAULT_TOL,
            n_max: DEFAULT_N_MAX,
            word_budget: DEFAULT_WORD_BUDGET,
            seed: 0,
            mode: Mode::CrossCheck,
            validate: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointPayload {
    pub structure: SemigroupNode,
    pub polytope: Polytope,
    /// Starting point for averaging; the vertex centroid when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FipSettings {
    pub sample_count: usize,
    #[serde(default = "default_family")]
    pub family: FipFamily,
}

fn default_family() -> FipFamily {
    FipFamily::CoF
}

impl Default for FipSettings {
    fn default() -> Self {
        FipSettings {
            sample_count: 5,
            family: FipFamily::CoF,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StructurePayload {
    pub structure: SemigroupNode,
    pub polytope: Polytope,
    /// Also sample the finite intersection property.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fip: Option<FipSettings>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FipPayload {
    pub structure: SemigroupNode,
    pub polytope: Polytope,
    pub sample_count: usize,
    #[serde(default = "default_family")]
    pub family: FipFamily,
}

impl FipPayload {
    pub fn settings(&self) -> FipSettings {
        FipSettings {
            sample_count: self.sample_count,
            family: self.family,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Payload {
    FixedPoint(FixedPointPayload),
    Extension(ExtensionProblem),
    StructureCheck(StructurePayload),
    FipCheck(FipPayload),
}

impl Payload {
    pub fn kind(&self) -> Kind {
        match self {
            Payload::FixedPoint(_) => Kind::FixedPoint,
            Payload::Extension(_) => Kind::Extension,
            Payload::StructureCheck(_) => Kind::StructureCheck,
            Payload::FipCheck(_) => Kind::FipCheck,
        }
    }

    /// The structure and polytope, for every kind that carries them.
    pub fn structure(&self) -> Option<(&SemigroupNode, &Polytope)> {
        match self {
            Payload::FixedPoint(p) => Some((&p.structure, &p.polytope)),
            Payload::StructureCheck(p) => Some((&p.structure, &p.polytope)),
            Payload::FipCheck(p) => Some((&p.structure, &p.polytope)),
            Payload::Extension(_) => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProblemFile {
    pub payload: Payload,
    pub options: Options,
}

impl Serialize for ProblemFile {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("ProblemFile", 3)?;
        s.serialize_field("kind", &self.payload.kind())?;
        s.serialize_field("payload", &self.payload)?;
        s.serialize_field("options", &self.options)?;
        s.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblemFile<'a> {
    kind: Kind,
    #[serde(borrow)]
    payload: &'a RawValue,
    #[serde(default)]
    options: Options,
}

/// A parse failure with a position in the original file (1-based).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message} at line {line} column {column}")]
pub struct ParseError {
    pub message: String,
    pub line: usize,
    pub column: usize,
}

impl ParseError {
    fn from_json(err: &serde_json::Error) -> Self {
        let full = err.to_string();
        // serde_json appends its own " at line L column C"
        let message = match full.rfind(" at line ") {
            Some(i) => full[..i].to_string(),
            None => full,
        };
        ParseError {
            message,
            line: err.line(),
            column: err.column(),
        }
    }
}

impl ProblemFile {
    pub fn parse(source: &str) -> Result<Self, ParseError> {
        let raw: RawProblemFile<'_> =
            serde_json::from_str(source).map_err(|e| ParseError::from_json(&e))?;
        let payload = match raw.kind {
            Kind::FixedPoint => Payload::FixedPoint(parse_payload(source, raw.payload)?),
            Kind::Extension => Payload::Extension(parse_payload(source, raw.payload)?),
            Kind::StructureCheck => Payload::StructureCheck(parse_payload(source, raw.payload)?),
            Kind::FipCheck => Payload::FipCheck(parse_payload(source, raw.payload)?),
        };
        Ok(ProblemFile {
            payload,
            options: raw.options,
        })
    }

    /// Canonical pretty-printed JSON, newline-terminated.
    pub fn to_canonical_json(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("problem files always serialize");
        out.push('\n');
        out
    }
}

/// Parses the payload on its own, shifting error positions back into `source`.
fn parse_payload<T: DeserializeOwned>(source: &str, raw: &RawValue) -> Result<T, ParseError> {
    serde_json::from_str(raw.get()).map_err(|e| {
        let mut err = ParseError::from_json(&e);
        let offset = raw.get().as_ptr() as usize - source.as_ptr() as usize;
        let before = &source[..offset];
        let base_line = before.matches('\n').count() + 1;
        let base_col = offset - before.rfind('\n').map_or(0, |i| i + 1) + 1;
        if err.line <= 1 {
            err.column += base_col - 1;
        }
        err.line += base_line - 1;
        err
    })
}
