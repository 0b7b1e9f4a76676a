//! Declarative scenario files for the command-line front end.

mod run;
mod validate;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::distributed::{KnitMode, TripartyScheme};
use crate::qmath::{gates, ComplexMatrix, C64};

pub use run::{execute, resolve, run_scenario, summary_csv, Execution, RunArtifacts, RunError, RunOptions};
pub use validate::{exit_code, parse_scenario, validate_scenario, Severity, Violation};

pub const SCENARIO_VERSION: u32 = 1;

/// A complex number as `[re, im]`.
pub type ComplexLiteral = [f64; 2];
pub type MatrixLiteral = Vec<Vec<ComplexLiteral>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub version: u32,
    #[serde(default)]
    pub name: String,
    pub seed: u64,
    pub shots: u64,
    #[serde(default)]
    pub backend: Backend,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    /// Largest state dimension a run may allocate.
    #[serde(default = "default_capacity")]
    pub capacity: usize,
    #[serde(default)]
    pub registers: Vec<RegisterSpec>,
    #[serde(default)]
    pub gates: BTreeMap<String, GateLiteral>,
    #[serde(default)]
    pub states: BTreeMap<String, StateLiteral>,
    #[serde(default)]
    pub channels: BTreeMap<String, ChannelLiteral>,
    #[serde(default)]
    pub observables: BTreeMap<String, GateLiteral>,
    #[serde(default)]
    pub parties: Vec<PartySpec>,
    #[serde(default)]
    pub ebits: Vec<EbitSpec>,
    pub protocol: ProtocolSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
}

fn default_tolerance() -> f64 {
    1e-10
}

fn default_capacity() -> usize {
    256
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Statevector,
    #[default]
    Densitymatrix,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterSpec {
    pub name: String,
    pub dim: usize,
}

/// A named gate (`"H"`, `"RY(0.3)"`) or an explicit matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GateLiteral {
    Named(String),
    Matrix { matrix: MatrixLiteral },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateLiteral {
    /// `[dim, index]`
    Basis { basis: [usize; 2] },
    Amplitudes { amplitudes: Vec<ComplexLiteral> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ChannelLiteral {
    Kraus { kraus: Vec<MatrixLiteral> },
    Named { named: NamedChannel, #[serde(default)] param: f64 },
    Unitary { unitary: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedChannel {
    AmplitudeDamping,
    Dephasing,
    Depolarizing,
    Identity,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartySpec {
    pub name: String,
    /// Gate names stored as programs.
    #[serde(default)]
    pub programs: Vec<String>,
    #[serde(default)]
    pub states: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measurement: Option<String>,
    #[serde(default)]
    pub capabilities: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EbitSpec {
    pub id: String,
    pub between: [String; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KnitOpSpec {
    pub gate: String,
    pub targets: Vec<String>,
    #[serde(default)]
    pub cut: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProtocolSpec {
    Dbqc { alice: String, bob: String, ebit: String },
    Triparty { scheme: TripartyScheme, a: String, b: String, c: String, ebits: Vec<String> },
    Knit { mode: KnitMode, input: String, observable: String, ops: Vec<KnitOpSpec> },
    Pingpong { programs: Vec<String>, input: String, observable: String },
    OqtSequence { programs: Vec<String>, input: String, observable: String },
    /// Composes two channels by teleporting one Choi state into the other.
    ChannelCompose { first: String, second: String },
}

impl ProtocolSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ProtocolSpec::Dbqc { .. } => "dbqc",
            ProtocolSpec::Triparty { .. } => "triparty",
            ProtocolSpec::Knit { .. } => "knit",
            ProtocolSpec::Pingpong { .. } => "pingpong",
            ProtocolSpec::OqtSequence { .. } => "oqt_sequence",
            ProtocolSpec::ChannelCompose { .. } => "channel_compose",
        }
    }
}

pub(crate) fn complex(v: &ComplexLiteral) -> C64 {
    C64::new(v[0], v[1])
}

pub(crate) fn matrix_of(m: &MatrixLiteral) -> Option<ComplexMatrix> {
    let cols = m.first()?.len();
    if cols == 0 || m.iter().any(|r| r.len() != cols) {
        return None;
    }
    Some(ComplexMatrix::from_rows(&m.iter().map(|r| r.iter().map(complex).collect()).collect::<Vec<_>>()))
}

pub(crate) fn gate_matrix(g: &GateLiteral) -> Option<ComplexMatrix> {
    match g {
        GateLiteral::Named(n) => gates::by_name(n),
        GateLiteral::Matrix { matrix } => matrix_of(matrix),
    }
}

/// Serializes a matrix as rows of `[re, im]`.
pub fn matrix_literal(m: &ComplexMatrix) -> MatrixLiteral {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| [m[(r, c)].re, m[(r, c)].im]).collect()).collect()
}
