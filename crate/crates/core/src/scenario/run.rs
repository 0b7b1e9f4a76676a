//! Executes a validated scenario and writes its artifacts.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::validate::{exit_code, validate_scenario, Violation};
use super::{complex, gate_matrix, matrix_of, ChannelLiteral, NamedChannel, ProtocolSpec, Scenario, StateLiteral};
use crate::distributed::{
    knit_estimate, pingpong_run, run_dbqc, run_triparty, HeldState, KnitCircuit, KnitMode, KnitOp, OutcomeRecord, Party,
    ResourceLedger, TripartyScheme,
};
use crate::error::QError;
use crate::oblivious::{oqt_estimate_observable, oqt_sequence, OqtRecord, Parities};
use crate::qmath::{embed_at, gates, ComplexMatrix};
use crate::states::{channel_of_choi, choi_of_channel, choi_of_unitary, ChoiProgram, KrausChannel, PureState};
use crate::superchannel::oqt_compose_choi;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub out: Option<PathBuf>,
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunArtifacts {
    pub records: PathBuf,
    pub summary: PathBuf,
    pub resolved: PathBuf,
    pub summary_rows: Vec<(String, String)>,
}

/// In-memory result of a run.
#[derive(Clone, Debug, PartialEq)]
pub struct Execution {
    pub records: Vec<OutcomeRecord>,
    pub summary: Vec<(String, String)>,
}

#[derive(Debug)]
pub enum RunError {
    Invalid(Vec<Violation>),
    Capacity(String),
    Runtime(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(v) => exit_code(v),
            RunError::Capacity(_) => 5,
            RunError::Runtime(_) => 6,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Invalid(vs) => {
                for v in vs {
                    writeln!(f, "{v}")?;
                }
                Ok(())
            }
            RunError::Capacity(m) => write!(f, "capacity error: {m}"),
            RunError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<QError> for RunError {
    fn from(e: QError) -> Self {
        match e {
            QError::Capacity { .. } => RunError::Capacity(e.to_string()),
            QError::Locality(_) | QError::Resource(_) | QError::UnknownLabel(_) | QError::DuplicateLabel(_) | QError::DimensionMismatch(_) => {
                RunError::Invalid(vec![Violation {
                    severity: super::Severity::Semantic,
                    location: "protocol".into(),
                    message: e.to_string(),
                }])
            }
            other => RunError::Runtime(other.to_string()),
        }
    }
}

/// The scenario with command-line overrides applied.
pub fn resolve(s: &Scenario, opts: &RunOptions) -> Scenario {
    let mut r = s.clone();
    if let Some(seed) = opts.seed {
        r.seed = seed;
    }
    if let Some(shots) = opts.shots {
        r.shots = shots;
    }
    if let Some(t) = opts.tolerance {
        r.tolerance = t;
    }
    if let Some(out) = &opts.out {
        r.output = Some(out.to_string_lossy().into_owned());
    }
    r
}

/// Validates, executes and writes `records.jsonl`, `summary.csv` and
/// `resolved-scenario.json` under the output directory.
pub fn run_scenario(s: &Scenario, opts: &RunOptions) -> Result<RunArtifacts, RunError> {
    let resolved = resolve(s, opts);
    let exec = execute(&resolved)?;
    let dir = PathBuf::from(resolved.output.clone().unwrap_or_else(|| "oblivq-out".into()));
    write_artifacts(&dir, &resolved, &exec).map_err(|e| RunError::Runtime(format!("writing {}: {e}", dir.display())))
}

fn write_artifacts(dir: &Path, resolved: &Scenario, exec: &Execution) -> std::io::Result<RunArtifacts> {
    fs::create_dir_all(dir)?;
    let records = dir.join("records.jsonl");
    let mut w = BufWriter::new(fs::File::create(&records)?);
    for r in &exec.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    let summary = dir.join("summary.csv");
    fs::write(&summary, summary_csv(&exec.summary))?;
    let resolved_path = dir.join("resolved-scenario.json");
    let mut text = serde_json::to_string_pretty(resolved)?;
    text.push('\n');
    fs::write(&resolved_path, text)?;
    Ok(RunArtifacts { records, summary, resolved: resolved_path, summary_rows: exec.summary.clone() })
}

pub fn summary_csv(rows: &[(String, String)]) -> String {
    let mut out = String::from("key,value\n");
    for (k, v) in rows {
        let _ = writeln!(out, "{k},{v}");
    }
    out
}

struct Summary(Vec<(String, String)>);

impl Summary {
    fn put(&mut self, k: &str, v: impl ToString) {
        self.0.push((k.to_string(), v.to_string()));
    }

    fn estimate(&mut self, estimate: f64, stderr: f64, oracle: f64) {
        self.put("estimate", estimate);
        self.put("stderr", stderr);
        self.put("oracle", oracle);
        self.put("abs_error", (estimate - oracle).abs());
        if stderr > 0.0 {
            self.put("sigma_distance", (estimate - oracle).abs() / stderr);
        }
    }

    fn ledger(&mut self, l: &ResourceLedger) {
        self.put("ebits_distributed", l.ebits_distributed);
        self.put("ebits_consumed", l.ebits_consumed);
        self.put("classical_bits_sent", l.classical_bits_sent);
        self.put("oqt_ops", l.oqt_ops);
        self.put("qt_corrections", l.qt_corrections);
        self.put("knit_overhead", l.knit_overhead);
        self.put("max_live_registers", l.max_live_registers);
        self.put("depth", l.depth);
    }
}

fn gate(s: &Scenario, name: &str) -> Result<ComplexMatrix, RunError> {
    s.gates.get(name).and_then(gate_matrix).ok_or_else(|| RunError::Runtime(format!("gate `{name}` unavailable")))
}

fn state(s: &Scenario, name: &str) -> Result<PureState, RunError> {
    match s.states.get(name) {
        Some(StateLiteral::Basis { basis: [d, i] }) => Ok(PureState::basis(*d, *i)),
        Some(StateLiteral::Amplitudes { amplitudes }) => {
            Ok(PureState::from_amplitudes(&amplitudes.iter().map(complex).collect::<Vec<_>>())?)
        }
        None => Err(RunError::Runtime(format!("state `{name}` unavailable"))),
    }
}

fn observable(s: &Scenario, name: &str) -> Result<ComplexMatrix, RunError> {
    s.observables.get(name).and_then(gate_matrix).ok_or_else(|| RunError::Runtime(format!("observable `{name}` unavailable")))
}

fn channel(s: &Scenario, name: &str) -> Result<KrausChannel, RunError> {
    let lit = s.channels.get(name).ok_or_else(|| RunError::Runtime(format!("channel `{name}` unavailable")))?;
    Ok(match lit {
        ChannelLiteral::Kraus { kraus } => KrausChannel::new(
            kraus.iter().map(|m| matrix_of(m).ok_or_else(|| RunError::Runtime("malformed Kraus matrix".into()))).collect::<Result<_, _>>()?,
        )?,
        ChannelLiteral::Named { named, param } => match named {
            NamedChannel::AmplitudeDamping => KrausChannel::amplitude_damping(*param)?,
            NamedChannel::Dephasing => KrausChannel::dephasing(*param)?,
            NamedChannel::Identity => KrausChannel::identity(2),
            NamedChannel::Depolarizing => {
                // (1 - p) rho + p I/2
                let mut ops = vec![ComplexMatrix::identity(2).scale_re((1.0 - param).sqrt())];
                ops.extend(KrausChannel::completely_depolarizing(2).kraus_ops().iter().map(|k| k.scale_re(param.sqrt())));
                KrausChannel::new(ops)?
            }
        },
        ChannelLiteral::Unitary { unitary } => KrausChannel::unitary(
            &gates::by_name(unitary).ok_or_else(|| RunError::Runtime(format!("unknown gate `{unitary}`")))?,
        )?,
    })
}

fn party(s: &Scenario, name: &str) -> Result<Party, RunError> {
    let spec = s.parties.iter().find(|p| p.name == name).ok_or_else(|| RunError::Runtime(format!("party `{name}` unavailable")))?;
    let mut p = Party::new(name);
    for g in &spec.programs {
        p = p.with_program(choi_of_unitary(&gate(s, g)?)?);
    }
    for st in &spec.states {
        p = p.with_state(HeldState::Pure(state(s, st)?));
    }
    if let Some(m) = &spec.measurement {
        p = p.with_measurement(state(s, m)?);
    }
    for c in &spec.capabilities {
        p = p.with_capability(c.clone());
    }
    Ok(p)
}

fn check_capacity(s: &Scenario, needed: usize) -> Result<(), RunError> {
    if needed > s.capacity {
        Err(RunError::Capacity(format!("protocol needs dimension {needed}, capacity is {}", s.capacity)))
    } else {
        Ok(())
    }
}

fn overlap(psi_o: &ComplexMatrix, w: &ComplexMatrix, psi: &ComplexMatrix) -> f64 {
    psi_o.inner_product(&(w * psi)).norm_sqr()
}

/// Runs a scenario in memory after validating it.
pub fn execute(s: &Scenario) -> Result<Execution, RunError> {
    let violations = validate_scenario(s);
    if !violations.is_empty() {
        return Err(RunError::Invalid(violations));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let shots = usize::try_from(s.shots).map_err(|_| RunError::Capacity("shot count does not fit in memory".into()))?;
    let mut sum = Summary(Vec::new());
    sum.put("scenario", if s.name.is_empty() { "unnamed" } else { s.name.as_str() });
    sum.put("protocol", s.protocol.kind());
    sum.put("seed", s.seed);
    sum.put("shots", s.shots);
    sum.put("backend", format!("{:?}", s.backend).to_lowercase());
    sum.put("ebits_declared", s.ebits.len());
    let records = match &s.protocol {
        ProtocolSpec::Dbqc { alice, bob, .. } => {
            let (a, b) = (party(s, alice)?, party(s, bob)?);
            let d = a.pure_input()?.dim();
            check_capacity(s, d * d)?;
            let spec = |n: &str| s.parties.iter().find(|p| p.name == n).expect("validated party");
            let mut w = ComplexMatrix::identity(d);
            for g in spec(alice).programs.iter().chain(&spec(bob).programs) {
                w = &gate(s, g)? * &w;
            }
            let oracle = overlap(b.measurement()?.vector(), &w, a.pure_input()?.vector());
            let out = run_dbqc(&a, &b, shots, &mut rng)?;
            sum.estimate(out.estimate, out.stderr, oracle);
            sum.ledger(&out.ledger);
            out.records
        }
        ProtocolSpec::Triparty { scheme, a, b, c, .. } => {
            let (pa, pb, pc) = (party(s, a)?, party(s, b)?, party(s, c)?);
            let spec = |n: &str| s.parties.iter().find(|p| p.name == n).expect("validated party");
            let (ua, ub) = (gate(s, &spec(a).programs[0])?, gate(s, &spec(b).programs[0])?);
            let psi = pa.pure_input()?.vector().kron(pb.pure_input()?.vector());
            let (w, readout, needed) = match scheme {
                TripartyScheme::I => {
                    let uc = gate(s, &spec(c).programs[0])?;
                    let n = uc.rows();
                    (&uc * &ua.kron(&ub), pc.measurement()?.vector().clone(), n * n)
                }
                TripartyScheme::II => {
                    let v = channel_of_choi(&pb.holdings.programs[1])?.kraus_ops()[0].clone();
                    let r = pa.measurement()?.vector().kron(pb.measurement()?.vector());
                    (&gates::controlled(&v) * &ua.kron(&ub), r, 16)
                }
            };
            check_capacity(s, needed)?;
            let oracle = overlap(&readout, &w, &psi);
            let out = run_triparty(*scheme, &pa, &pb, &pc, shots, &mut rng)?;
            sum.put("scheme", format!("{scheme:?}"));
            sum.estimate(out.estimate, out.stderr, oracle);
            sum.ledger(&out.ledger);
            out.records
        }
        ProtocolSpec::Knit { mode, input, observable: obs, ops } => {
            let dims: Vec<usize> = s.registers.iter().map(|r| r.dim).collect();
            let total: usize = dims.iter().product();
            check_capacity(s, total)?;
            let pos = |n: &str| s.registers.iter().position(|r| r.name == n).expect("validated register");
            let circuit = KnitCircuit {
                dims: dims.clone(),
                ops: ops
                    .iter()
                    .map(|o| Ok(KnitOp { gate: gate(s, &o.gate)?, targets: o.targets.iter().map(|t| pos(t)).collect(), cut: o.cut }))
                    .collect::<Result<_, RunError>>()?,
            };
            let psi = state(s, input)?;
            let o = observable(s, obs)?;
            let direct = match s.backend {
                super::Backend::Statevector => statevector_expectation(&circuit, psi.vector(), &o)?,
                super::Backend::Densitymatrix => {
                    let rho = circuit.simulate(psi.density().matrix())?;
                    (&o * &rho).trace().re
                }
            };
            let out = knit_estimate(&circuit, &psi.density(), &o, *mode, shots, &mut rng)?;
            sum.put("mode", format!("{mode:?}"));
            sum.put("cuts", circuit.cut_count());
            sum.put("overhead", out.overhead);
            sum.estimate(out.estimate, out.stderr, direct);
            sum.put("within_tolerance", *mode == KnitMode::Sampled || (out.estimate - direct).abs() <= s.tolerance);
            let ledger = ResourceLedger { knit_overhead: out.overhead, depth: 1, max_live_registers: dims.len(), ..Default::default() };
            sum.ledger(&ledger);
            match mode {
                KnitMode::Sampled => out.records,
                // The expansion is exact, so every shot carries the same value.
                KnitMode::ExactSum => (0..shots).map(|k| OutcomeRecord::new(k, Vec::new(), vec![out.estimate])).collect(),
            }
        }
        ProtocolSpec::Pingpong { programs, input, observable: obs } | ProtocolSpec::OqtSequence { programs, input, observable: obs } => {
            let us: Vec<ComplexMatrix> = programs.iter().map(|g| gate(s, g)).collect::<Result<_, _>>()?;
            let d = us[0].rows();
            check_capacity(s, d * d)?;
            let progs: Vec<ChoiProgram> = us.iter().map(choi_of_unitary).collect::<Result<_, _>>()?;
            let input = state(s, input)?.density();
            let o = observable(s, obs)?;
            let w = us.iter().fold(ComplexMatrix::identity(d), |acc, u| u * &acc);
            let oracle = (&o * &w.conjugate(input.matrix())).trace().re;
            let pingpong = matches!(s.protocol, ProtocolSpec::Pingpong { .. });
            let mut recs: Vec<OqtRecord> = Vec::with_capacity(shots);
            let mut ledger = ResourceLedger::default();
            for _ in 0..shots {
                let rec = if pingpong {
                    let (rec, l) = pingpong_run(&progs, &input, 2, Parities::Sampled(&mut rng))?;
                    ledger = l;
                    rec
                } else {
                    oqt_sequence(&progs, &input, Parities::Sampled(&mut rng))?
                };
                recs.push(rec.measure(&o, &mut rng)?);
            }
            if !pingpong {
                ledger.oqt_ops = progs.len();
                ledger.classical_bits_sent = progs.len();
                ledger.depth = 1;
                ledger.max_live_registers = 1 + 2 * progs.len();
            }
            let (est, se) = oqt_estimate_observable(&recs, &o)?;
            sum.estimate(est, se, oracle);
            sum.ledger(&ledger);
            recs.into_iter()
                .enumerate()
                .map(|(k, r)| OutcomeRecord::new(k, r.parity_bits, vec![r.readout.unwrap_or(f64::NAN)]))
                .collect()
        }
        ProtocolSpec::ChannelCompose { first, second } => {
            let (e1, e2) = (channel(s, first)?, channel(s, second)?);
            check_capacity(s, e1.in_dim() * e1.out_dim() * e2.in_dim() * e2.out_dim())?;
            let (b0, _) = oqt_compose_choi(&choi_of_channel(&e1), &choi_of_channel(&e2))?;
            let direct = choi_of_channel(&e2.after(&e1)?);
            let deviation = b0.post_state.matrix().max_abs_diff(&direct.density());
            let mut zeros = 0usize;
            let records: Vec<OutcomeRecord> = (0..shots)
                .map(|k| {
                    let bit = u8::from(rng.random::<f64>() >= b0.probability);
                    zeros += usize::from(bit == 0);
                    OutcomeRecord::new(k, vec![bit], Vec::new())
                })
                .collect();
            let f = zeros as f64 / shots as f64;
            sum.estimate(f, (f * (1.0 - f) / shots as f64).sqrt(), b0.probability);
            sum.put("choi_deviation", deviation);
            sum.put("within_tolerance", deviation <= s.tolerance.max(1e-9));
            let ledger = ResourceLedger { oqt_ops: 1, classical_bits_sent: 1, depth: 1, max_live_registers: 4, ..Default::default() };
            sum.ledger(&ledger);
            records
        }
    };
    debug_assert_eq!(records.len(), shots);
    Ok(Execution { records, summary: sum.0 })
}

fn statevector_expectation(circuit: &KnitCircuit, psi: &ComplexMatrix, o: &ComplexMatrix) -> Result<f64, RunError> {
    let mut v = psi.clone();
    for op in &circuit.ops {
        v = &embed_at(&op.gate, &op.targets, &circuit.dims)? * &v;
    }
    Ok(v.inner_product(&(o * &v)).re)
}
