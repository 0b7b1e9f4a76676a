//! Parse, schema and semantic checks for scenario files.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{gate_matrix, matrix_of, ChannelLiteral, ProtocolSpec, Scenario, StateLiteral, SCENARIO_VERSION};
use crate::distributed::TripartyScheme;
use crate::qmath::ComplexMatrix;
use crate::states::KrausChannel;

/// Ordered by precedence: the first kind present decides the exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Parse,
    Schema,
    Semantic,
}

impl Severity {
    pub fn exit_code(self) -> i32 {
        match self {
            Severity::Parse => 2,
            Severity::Schema => 3,
            Severity::Semantic => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub severity: Severity,
    /// Path into the scenario, e.g. `protocol.ops[2]`.
    pub location: String,
    pub message: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let kind = match self.severity {
            Severity::Parse => "parse",
            Severity::Schema => "schema",
            Severity::Semantic => "semantic",
        };
        write!(f, "{kind} error at {}: {}", self.location, self.message)
    }
}

/// Exit code for a report; 0 when empty.
pub fn exit_code(violations: &[Violation]) -> i32 {
    violations.iter().map(|v| v.severity).min().map_or(0, Severity::exit_code)
}

/// Syntax errors are parse failures; type and shape errors are schema failures.
pub fn parse_scenario(text: &str) -> Result<Scenario, Violation> {
    serde_json::from_str(text).map_err(|e| {
        let severity = match e.classify() {
            serde_json::error::Category::Data => Severity::Schema,
            _ => Severity::Parse,
        };
        Violation { severity, location: format!("line {} column {}", e.line(), e.column()), message: e.to_string() }
    })
}

const UNITARY_TOL: f64 = 1e-9;

struct Checker<'a> {
    s: &'a Scenario,
    out: Vec<Violation>,
    gates: BTreeMap<&'a str, ComplexMatrix>,
    state_dims: BTreeMap<&'a str, usize>,
    observable_dims: BTreeMap<&'a str, usize>,
    channel_dims: BTreeMap<&'a str, (usize, usize)>,
}

impl<'a> Checker<'a> {
    fn push(&mut self, severity: Severity, location: impl Into<String>, message: impl Into<String>) {
        self.out.push(Violation { severity, location: location.into(), message: message.into() });
    }

    fn schema(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Schema, location, message);
    }

    fn semantic(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.push(Severity::Semantic, location, message);
    }

    fn header(&mut self) {
        let s = self.s;
        if s.version != SCENARIO_VERSION {
            self.schema("version", format!("unsupported version {}, expected {SCENARIO_VERSION}", s.version));
        }
        if s.shots < 1 {
            self.schema("shots", "shots must be at least 1");
        }
        if !(s.tolerance.is_finite() && s.tolerance > 0.0) {
            self.schema("tolerance", "tolerance must be positive and finite");
        }
        if s.capacity == 0 {
            self.schema("capacity", "capacity must be positive");
        }
        for (k, r) in s.registers.iter().enumerate() {
            if r.dim < 2 {
                self.schema(format!("registers[{k}]"), format!("register `{}` has dimension {}", r.name, r.dim));
            }
        }
    }

    fn literals(&mut self) {
        let s = self.s;
        for (name, g) in &s.gates {
            let loc = format!("gates.{name}");
            match gate_matrix(g) {
                None => self.schema(loc, "unknown gate name or malformed matrix"),
                Some(m) if !m.is_square() => self.schema(loc, "gate matrix is not square"),
                Some(m) if !m.is_finite() => self.schema(loc, "gate matrix has non-finite entries"),
                Some(m) if m.unitarity_residual() > UNITARY_TOL => {
                    self.schema(loc, format!("gate is not unitary (residual {:.3e})", m.unitarity_residual()))
                }
                Some(m) => {
                    self.gates.insert(name, m);
                }
            }
        }
        for (name, g) in &s.observables {
            let loc = format!("observables.{name}");
            match gate_matrix(g) {
                None => self.schema(loc, "unknown observable name or malformed matrix"),
                Some(m) if !m.is_square() || m.hermiticity_residual() > UNITARY_TOL => {
                    self.schema(loc, "observable is not a Hermitian matrix")
                }
                Some(m) => {
                    self.observable_dims.insert(name, m.rows());
                }
            }
        }
        for (name, st) in &s.states {
            let loc = format!("states.{name}");
            match st {
                StateLiteral::Basis { basis: [d, i] } => {
                    if *d == 0 || i >= d {
                        self.schema(loc, format!("basis index {i} out of range for dimension {d}"));
                    } else {
                        self.state_dims.insert(name, *d);
                    }
                }
                StateLiteral::Amplitudes { amplitudes } => {
                    let norm: f64 = amplitudes.iter().map(|a| a[0] * a[0] + a[1] * a[1]).sum();
                    if amplitudes.is_empty() || !norm.is_finite() || (norm - 1.0).abs() > UNITARY_TOL {
                        self.schema(loc, format!("amplitudes must be normalized (norm^2 = {norm})"));
                    } else {
                        self.state_dims.insert(name, amplitudes.len());
                    }
                }
            }
        }
        for (name, ch) in &s.channels {
            let loc = format!("channels.{name}");
            match ch {
                ChannelLiteral::Kraus { kraus } => {
                    let ops: Option<Vec<ComplexMatrix>> = kraus.iter().map(matrix_of).collect();
                    match ops.map(KrausChannel::new) {
                        Some(Ok(k)) => {
                            self.channel_dims.insert(name, (k.in_dim(), k.out_dim()));
                        }
                        Some(Err(e)) => self.schema(loc, e.to_string()),
                        None => self.schema(loc, "malformed Kraus matrix"),
                    }
                }
                ChannelLiteral::Named { param, .. } => {
                    if !(0.0..=1.0).contains(param) {
                        self.schema(loc, format!("parameter {param} outside [0, 1]"));
                    } else {
                        self.channel_dims.insert(name, (2, 2));
                    }
                }
                ChannelLiteral::Unitary { unitary } => match gate_matrix(&super::GateLiteral::Named(unitary.clone())) {
                    Some(m) if m.unitarity_residual() <= UNITARY_TOL => {
                        self.channel_dims.insert(name, (m.rows(), m.rows()));
                    }
                    _ => self.schema(loc, format!("`{unitary}` is not a known unitary gate")),
                },
            }
        }
    }

    fn gate_dim(&mut self, loc: &str, name: &str) -> Option<usize> {
        if let Some(m) = self.gates.get(name) {
            return Some(m.rows());
        }
        if !self.s.gates.contains_key(name) {
            self.semantic(loc, format!("undefined gate `{name}`"));
        }
        None
    }

    fn state_dim(&mut self, loc: &str, name: &str) -> Option<usize> {
        if let Some(d) = self.state_dims.get(name) {
            return Some(*d);
        }
        if !self.s.states.contains_key(name) {
            self.semantic(loc, format!("undefined state `{name}`"));
        }
        None
    }

    fn observable_dim(&mut self, loc: &str, name: &str) -> Option<usize> {
        if let Some(d) = self.observable_dims.get(name) {
            return Some(*d);
        }
        if !self.s.observables.contains_key(name) {
            self.semantic(loc, format!("undefined observable `{name}`"));
        }
        None
    }

    fn parties(&mut self) {
        let s = self.s;
        let mut seen = BTreeSet::new();
        for (k, p) in s.parties.iter().enumerate() {
            let loc = format!("parties[{k}]");
            if !seen.insert(p.name.as_str()) {
                self.semantic(&loc, format!("duplicate party `{}`", p.name));
            }
            for (j, g) in p.programs.iter().enumerate() {
                self.gate_dim(&format!("{loc}.programs[{j}]"), g);
            }
            for (j, st) in p.states.iter().enumerate() {
                self.state_dim(&format!("{loc}.states[{j}]"), st);
            }
            if let Some(m) = &p.measurement {
                self.state_dim(&format!("{loc}.measurement"), m);
            }
        }
        let mut ids = BTreeSet::new();
        for (k, e) in s.ebits.iter().enumerate() {
            let loc = format!("ebits[{k}]");
            if !ids.insert(e.id.as_str()) {
                self.semantic(&loc, format!("duplicate ebit `{}`", e.id));
            }
            for end in &e.between {
                if !seen.contains(end.as_str()) {
                    self.semantic(&loc, format!("ebit `{}` names undeclared party `{end}`", e.id));
                }
            }
            if e.between[0] == e.between[1] {
                self.semantic(&loc, format!("ebit `{}` joins `{}` to itself", e.id, e.between[0]));
            }
        }
        let mut regs = BTreeSet::new();
        for (k, r) in s.registers.iter().enumerate() {
            if !regs.insert(r.name.as_str()) {
                self.semantic(format!("registers[{k}]"), format!("duplicate register `{}`", r.name));
            }
        }
    }

    fn party(&mut self, loc: &str, name: &str) -> Option<&'a super::PartySpec> {
        let found = self.s.parties.iter().find(|p| p.name == name);
        if found.is_none() {
            self.semantic(loc, format!("undeclared party `{name}`"));
        }
        found
    }

    /// The declared ebit must join exactly `x` and `y`.
    fn ebit(&mut self, loc: &str, id: &str, x: &str, y: &str) {
        match self.s.ebits.iter().find(|e| e.id == id) {
            None => self.semantic(loc, format!("undeclared ebit `{id}`")),
            Some(e) => {
                let ends: BTreeSet<&str> = e.between.iter().map(String::as_str).collect();
                if ends != BTreeSet::from([x, y]) {
                    self.semantic(loc, format!("ebit `{id}` joins {:?}, but this link needs `{x}` and `{y}`", e.between));
                }
            }
        }
    }

    fn holds(&mut self, loc: &str, p: &super::PartySpec, programs: usize, state: bool, measurement: bool) {
        if p.programs.len() < programs {
            self.semantic(loc, format!("`{}` must hold at least {programs} program(s)", p.name));
        }
        if state && p.states.is_empty() {
            self.semantic(loc, format!("`{}` holds no input state", p.name));
        }
        if measurement && p.measurement.is_none() {
            self.semantic(loc, format!("`{}` holds no measurement basis", p.name));
        }
    }

    fn same_dims(&mut self, loc: &str, dims: &[Option<usize>], what: &str) {
        let known: BTreeSet<usize> = dims.iter().flatten().copied().collect();
        if known.len() > 1 {
            self.semantic(loc, format!("{what} have mismatched dimensions {known:?}"));
        }
    }

    fn protocol(&mut self) {
        let s = self.s;
        if s.backend == super::Backend::Statevector && !matches!(s.protocol, ProtocolSpec::Knit { .. }) {
            self.semantic("backend", "teleportation branches are mixed; this protocol needs the densitymatrix backend");
        }
        match &s.protocol {
            ProtocolSpec::Dbqc { alice, bob, ebit } => {
                let (a, b) = (self.party("protocol.alice", alice), self.party("protocol.bob", bob));
                self.ebit("protocol.ebit", ebit, alice, bob);
                if let (Some(a), Some(b)) = (a, b) {
                    self.holds("protocol.alice", a, 1, true, false);
                    self.holds("protocol.bob", b, 1, false, true);
                    let mut dims = Vec::new();
                    for g in a.programs.iter().chain(&b.programs) {
                        dims.push(self.gates.get(g.as_str()).map(|m| m.rows()));
                    }
                    dims.extend(a.states.first().map(|n| self.state_dims.get(n.as_str()).copied()));
                    dims.extend(b.measurement.as_ref().map(|n| self.state_dims.get(n.as_str()).copied()));
                    self.same_dims("protocol", &dims, "programs, input and readout");
                }
            }
            ProtocolSpec::Triparty { scheme, a, b, c, ebits } => {
                let pa = self.party("protocol.a", a);
                let pb = self.party("protocol.b", b);
                let pc = self.party("protocol.c", c);
                if ebits.len() != 2 {
                    self.semantic("protocol.ebits", format!("both schemes use 2 ebits, {} declared", ebits.len()));
                }
                let links: Vec<(&str, &str)> = match scheme {
                    TripartyScheme::I => vec![(c.as_str(), a.as_str()), (c.as_str(), b.as_str())],
                    TripartyScheme::II => vec![(a.as_str(), b.as_str()); 2],
                };
                for (k, (id, (x, y))) in ebits.iter().zip(links).enumerate() {
                    self.ebit(&format!("protocol.ebits[{k}]"), id, x, y);
                }
                if let (Some(pa), Some(pb), Some(pc)) = (pa, pb, pc) {
                    let dim_of = |ch: &Self, p: &super::PartySpec| {
                        p.programs.first().and_then(|g| ch.gates.get(g.as_str())).map(|m| m.rows())
                    };
                    match scheme {
                        TripartyScheme::I => {
                            self.holds("protocol.a", pa, 1, true, false);
                            self.holds("protocol.b", pb, 1, true, false);
                            self.holds("protocol.c", pc, 1, false, true);
                            if let (Some(da), Some(db), Some(dc)) = (dim_of(self, pa), dim_of(self, pb), dim_of(self, pc)) {
                                if da * db != dc {
                                    self.semantic("protocol.c", format!("joint program has dimension {dc}, expected {}", da * db));
                                }
                            }
                        }
                        TripartyScheme::II => {
                            self.holds("protocol.a", pa, 1, true, true);
                            self.holds("protocol.b", pb, 2, true, true);
                            for (loc, p) in [("protocol.a", pa), ("protocol.b", pb)] {
                                let dims: Vec<Option<usize>> =
                                    p.programs.iter().map(|g| self.gates.get(g.as_str()).map(|m| m.rows())).collect();
                                if dims.iter().flatten().any(|&d| d != 2) {
                                    self.semantic(loc, "the controlled-gate scheme uses one qubit per party");
                                }
                            }
                        }
                    }
                }
            }
            ProtocolSpec::Knit { input, observable, ops, .. } => {
                let dims: BTreeMap<&str, usize> = s.registers.iter().map(|r| (r.name.as_str(), r.dim)).collect();
                let total: usize = s.registers.iter().map(|r| r.dim).product();
                if s.registers.is_empty() {
                    self.semantic("registers", "knitting needs declared registers");
                }
                for (k, op) in ops.iter().enumerate() {
                    let loc = format!("protocol.ops[{k}]");
                    let mut want = 1;
                    for t in &op.targets {
                        match dims.get(t.as_str()) {
                            Some(d) => want *= d,
                            None => self.semantic(&loc, format!("undeclared register `{t}`")),
                        }
                    }
                    let unique: BTreeSet<&String> = op.targets.iter().collect();
                    if unique.len() != op.targets.len() {
                        self.semantic(&loc, "repeated target register");
                    }
                    if let Some(d) = self.gate_dim(&loc, &op.gate) {
                        if d != want {
                            self.semantic(&loc, format!("gate of dimension {d} on targets of dimension {want}"));
                        }
                    }
                    if op.cut && (op.targets.len() != 2 || dims.get(op.targets[0].as_str()) != dims.get(op.targets[1].as_str())) {
                        self.semantic(&loc, "a cut gate acts on exactly two registers of equal dimension");
                    }
                }
                if let Some(d) = self.state_dim("protocol.input", input) {
                    if d != total {
                        self.semantic("protocol.input", format!("input of dimension {d} for registers of {total}"));
                    }
                }
                if let Some(d) = self.observable_dim("protocol.observable", observable) {
                    if d != total {
                        self.semantic("protocol.observable", format!("observable of dimension {d} for registers of {total}"));
                    }
                }
            }
            ProtocolSpec::Pingpong { programs, input, observable } | ProtocolSpec::OqtSequence { programs, input, observable } => {
                if programs.is_empty() {
                    self.semantic("protocol.programs", "no programs");
                }
                let mut dims = Vec::new();
                for (k, g) in programs.iter().enumerate() {
                    dims.push(self.gate_dim(&format!("protocol.programs[{k}]"), g));
                }
                dims.push(self.state_dim("protocol.input", input));
                dims.push(self.observable_dim("protocol.observable", observable));
                self.same_dims("protocol", &dims, "programs, input and observable");
            }
            ProtocolSpec::ChannelCompose { first, second } => {
                let mut get = |loc: &str, n: &str| {
                    let d = self.channel_dims.get(n).copied();
                    if d.is_none() && !s.channels.contains_key(n) {
                        self.semantic(loc, format!("undefined channel `{n}`"));
                    }
                    d
                };
                let (f, g) = (get("protocol.first", first), get("protocol.second", second));
                if let (Some((_, fo)), Some((gi, _))) = (f, g) {
                    if fo != gi {
                        self.semantic("protocol", format!("first channel outputs dimension {fo}, second takes {gi}"));
                    }
                }
            }
        }
    }
}

/// Every schema and semantic violation, in document order within each kind.
pub fn validate_scenario(s: &Scenario) -> Vec<Violation> {
    let mut c = Checker {
        s,
        out: Vec::new(),
        gates: BTreeMap::new(),
        state_dims: BTreeMap::new(),
        observable_dims: BTreeMap::new(),
        channel_dims: BTreeMap::new(),
    };
    c.header();
    c.literals();
    c.parties();
    c.protocol();
    c.out
}
