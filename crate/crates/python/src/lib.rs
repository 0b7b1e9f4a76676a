use std::collections::BTreeMap;
use std::path::PathBuf;

use ::oblivq::algorithms::{self, MeasurementAxis};
use ::oblivq::distributed::{self, HeldState, Party, TripartyScheme};
use ::oblivq::oblivious::{self, FlagState, Parities};
use ::oblivq::qmath::{self, ComplexMatrix};
use ::oblivq::scenario;
use ::oblivq::states::{self, ChoiProgram, MixedState, PureState};
use ::oblivq::{QError, C64};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Rows = Vec<Vec<C64>>;

fn err(e: QError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &Rows) -> PyResult<ComplexMatrix> {
    let cols = rows.first().map_or(0, Vec::len);
    if cols == 0 || rows.iter().any(|r| r.len() != cols) {
        return Err(PyValueError::new_err("expected a non-empty rectangular list of rows"));
    }
    Ok(ComplexMatrix::from_rows(rows))
}

fn rows(m: &ComplexMatrix) -> Rows {
    (0..m.rows()).map(|r| (0..m.cols()).map(|c| m[(r, c)]).collect()).collect()
}

fn density(rows_in: &Rows) -> PyResult<MixedState> {
    MixedState::from_matrix(matrix(rows_in)?).map_err(err)
}

fn pure(amplitudes: &[C64]) -> PyResult<PureState> {
    PureState::from_amplitudes(amplitudes).map_err(err)
}

fn axis(name: &str) -> PyResult<MeasurementAxis> {
    match name.to_ascii_lowercase().as_str() {
        "x" => Ok(MeasurementAxis::X),
        "y" => Ok(MeasurementAxis::Y),
        other => Err(PyValueError::new_err(format!("axis must be 'x' or 'y', got {other:?}"))),
    }
}

/// A gate or channel stored as a normalized Choi state with ports (out, in).
#[pyclass(name = "ChoiProgram", module = "oblivq", frozen, from_py_object)]
#[derive(Clone)]
struct PyChoiProgram {
    inner: ChoiProgram,
}

#[pymethods]
impl PyChoiProgram {
    #[staticmethod]
    fn from_unitary(u: Rows) -> PyResult<Self> {
        Ok(PyChoiProgram { inner: states::choi_of_unitary(&matrix(&u)?).map_err(err)? })
    }

    /// Builds the program of the channel with the given Kraus operators.
    #[staticmethod]
    fn from_kraus(kraus: Vec<Rows>) -> PyResult<Self> {
        let ops = kraus.iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
        let ch = states::KrausChannel::new(ops).map_err(err)?;
        Ok(PyChoiProgram { inner: states::choi_of_channel(&ch) })
    }

    #[getter]
    fn out_dim(&self) -> usize {
        self.inner.out_dim()
    }

    #[getter]
    fn in_dim(&self) -> usize {
        self.inner.in_dim()
    }

    fn density(&self) -> Rows {
        rows(&self.inner.density())
    }

    /// Kraus operators recovered from the Choi state.
    fn kraus(&self) -> PyResult<Vec<Rows>> {
        Ok(states::channel_of_choi(&self.inner).map_err(err)?.kraus_ops().iter().map(rows).collect())
    }

    fn __repr__(&self) -> String {
        format!("ChoiProgram(out_dim={}, in_dim={})", self.inner.out_dim(), self.inner.in_dim())
    }
}

#[pyfunction]
#[pyo3(signature = (d, seed))]
fn random_unitary(d: usize, seed: u64) -> Rows {
    rows(&qmath::random_unitary(d, &mut ChaCha8Rng::seed_from_u64(seed)))
}

/// Named gate lookup, e.g. `"H"` or `"RY(0.3)"`.
#[pyfunction]
fn gate(name: &str) -> PyResult<Rows> {
    qmath::gates::by_name(name).map(|m| rows(&m)).ok_or_else(|| PyValueError::new_err(format!("unknown gate {name:?}")))
}

/// Returns `((p0, rho0), (p1, rho1))` for one teleportation step.
#[pyfunction]
fn oqt_step(program: &PyChoiProgram, rho: Rows) -> PyResult<((f64, Rows), (f64, Rows))> {
    let (b0, b1) = oblivious::oqt_step(&program.inner, &density(&rho)?).map_err(err)?;
    Ok(((b0.probability, rows(b0.post_state.matrix())), (b1.probability, rows(b1.post_state.matrix()))))
}

/// Runs a teleportation chain. Parities are forced when `parities` is given,
/// otherwise sampled from `seed`.
#[pyfunction]
#[pyo3(signature = (programs, rho, parities = None, seed = 0))]
fn oqt_sequence(
    programs: Vec<PyChoiProgram>,
    rho: Rows,
    parities: Option<Vec<u8>>,
    seed: u64,
) -> PyResult<(Vec<u32>, f64, Rows)> {
    let progs: Vec<ChoiProgram> = programs.into_iter().map(|p| p.inner).collect();
    let input = density(&rho)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rec = match &parities {
        Some(bits) => oblivious::oqt_sequence(&progs, &input, Parities::Forced(bits)),
        None => oblivious::oqt_sequence(&progs, &input, Parities::Sampled(&mut rng)),
    }
    .map_err(err)?;
    Ok((rec.parity_bits.iter().map(|&b| u32::from(b)).collect(), rec.path_probability, rows(rec.final_state.matrix())))
}

/// Estimates `tr(O W rho W†)` from `shots` sampled chains.
#[pyfunction]
fn oqt_estimate(programs: Vec<PyChoiProgram>, rho: Rows, observable: Rows, shots: usize, seed: u64) -> PyResult<(f64, f64)> {
    let progs: Vec<ChoiProgram> = programs.into_iter().map(|p| p.inner).collect();
    let (input, o) = (density(&rho)?, matrix(&observable)?);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(shots);
    for _ in 0..shots {
        let rec = oblivious::oqt_sequence(&progs, &input, Parities::Sampled(&mut rng)).map_err(err)?;
        records.push(rec.measure(&o, &mut rng).map_err(err)?);
    }
    oblivious::oqt_estimate_observable(&records, &o).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (u, rho, axis = "x"))]
fn dqc1(u: Rows, rho: Rows, axis: &str) -> PyResult<f64> {
    algorithms::dqc1(&matrix(&u)?, &density(&rho)?, self::axis(axis)?).map_err(err)
}

/// Outcome-0 probability of the one-clean-qubit circuit built from a
/// program pair through the flag construction.
#[pyfunction]
#[pyo3(signature = (program, conj_program, rho, eta, axis = "x"))]
fn odqc1(program: &PyChoiProgram, conj_program: &PyChoiProgram, rho: Rows, eta: Rows, axis: &str) -> PyResult<f64> {
    let rho = density(&rho)?;
    let flag = FlagState::omega(rho.dim());
    let out = algorithms::odqc1(&program.inner, &conj_program.inner, &rho, &density(&eta)?, self::axis(axis)?, flag)
        .map_err(err)?;
    Ok(out.p0)
}

/// Success probability of `n` amplification rounds on a block encoding.
#[pyfunction]
fn oaa_success(g: Rows, control_dim: usize, data_dim: usize, n: usize, psi: Vec<C64>) -> PyResult<f64> {
    let be = algorithms::block_encoding_check(&matrix(&g)?, control_dim, data_dim).map_err(err)?;
    Ok(algorithms::oaa_amplify(&be, n, &pure(&psi)?).map_err(err)?.success_probability)
}

/// Returns `(success_probability, post_selected_state)`.
#[pyfunction]
fn lcu_apply(coefficients: Vec<f64>, unitaries: Vec<Rows>, psi: Vec<C64>) -> PyResult<(f64, Vec<C64>)> {
    let us = unitaries.iter().map(matrix).collect::<PyResult<Vec<_>>>()?;
    let plan = algorithms::LcuPlan::new(&coefficients, us).map_err(err)?;
    let (p, state) = algorithms::lcu_apply(&plan, &pure(&psi)?).map_err(err)?;
    Ok((p, state.amplitudes()))
}

/// Real orthogonal embedding `Q` of a unitary on one extra qubit.
#[pyfunction]
fn rebit_embed(u: Rows) -> PyResult<Rows> {
    Ok(rows(states::rebit_embed(&matrix(&u)?).map_err(err)?.matrix()))
}

/// Composes two channel programs by teleportation; returns the branch-0
/// probability and program density.
#[pyfunction]
fn oqt_compose_choi(first: &PyChoiProgram, second: &PyChoiProgram) -> PyResult<(f64, Rows)> {
    let (b0, _) = ::oblivq::superchannel::oqt_compose_choi(&first.inner, &second.inner).map_err(err)?;
    Ok((b0.probability, rows(b0.post_state.matrix())))
}

/// Local-operator expansion of a two-register gate.
#[pyfunction]
fn knit_decompose(py: Python<'_>, u: Rows) -> PyResult<Py<PyAny>> {
    let dec = distributed::knit_decompose(&matrix(&u)?).map_err(err)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("local_dim", dec.local_dim)?;
    out.set_item("one_norm", dec.one_norm)?;
    out.set_item("overhead", dec.overhead)?;
    out.set_item("terms", dec.terms())?;
    Ok(out.into_any().unbind())
}

fn protocol_dict(py: Python<'_>, out: &distributed::ProtocolOutcome) -> PyResult<Py<PyAny>> {
    let d = pyo3::types::PyDict::new(py);
    d.set_item("estimate", out.estimate)?;
    d.set_item("stderr", out.stderr)?;
    let ledger = serde_json::to_value(&out.ledger).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let counters: BTreeMap<String, f64> = ledger
        .as_object()
        .map(|m| m.iter().filter_map(|(k, v)| v.as_f64().map(|x| (k.clone(), x))).collect())
        .unwrap_or_default();
    d.set_item("ledger", counters)?;
    d.set_item("records", out.records.len())?;
    Ok(d.into_any().unbind())
}

/// Bipartite protocol: Alice holds `psi` and programs `alice`, Bob holds
/// programs `bob` and measures onto `psi_o`.
#[pyfunction]
fn run_dbqc(
    py: Python<'_>,
    alice: Vec<Rows>,
    bob: Vec<Rows>,
    psi: Vec<C64>,
    psi_o: Vec<C64>,
    shots: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let mut a = Party::new("alice").with_state(HeldState::Pure(pure(&psi)?));
    for u in &alice {
        a = a.with_program(states::choi_of_unitary(&matrix(u)?).map_err(err)?);
    }
    let mut b = Party::new("bob").with_measurement(pure(&psi_o)?);
    for u in &bob {
        b = b.with_program(states::choi_of_unitary(&matrix(u)?).map_err(err)?);
    }
    let out = distributed::run_dbqc(&a, &b, shots, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(err)?;
    protocol_dict(py, &out)
}

/// Tri-party protocol. `joint` is C's two-qubit gate (scheme I); `v` is the
/// controlled target gate held by B (scheme II).
#[pyfunction]
#[allow(clippy::too_many_arguments)]
fn run_triparty(
    py: Python<'_>,
    scheme: &str,
    ua: Rows,
    ub: Rows,
    joint: Rows,
    v: Rows,
    psi: (Vec<C64>, Vec<C64>),
    psi_o: (Vec<C64>, Vec<C64>),
    shots: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let scheme = match scheme {
        "I" | "1" => TripartyScheme::I,
        "II" | "2" => TripartyScheme::II,
        other => return Err(PyValueError::new_err(format!("scheme must be 'I' or 'II', got {other:?}"))),
    };
    let prog = |m: &Rows| -> PyResult<ChoiProgram> { states::choi_of_unitary(&matrix(m)?).map_err(err) };
    let (oa, ob) = (pure(&psi_o.0)?, pure(&psi_o.1)?);
    let joint_o = pure(&oa.vector().kron(ob.vector()).to_vec())?;
    let a = Party::new("a").with_state(HeldState::Pure(pure(&psi.0)?)).with_program(prog(&ua)?).with_measurement(oa);
    let b = Party::new("b")
        .with_state(HeldState::Pure(pure(&psi.1)?))
        .with_program(prog(&ub)?)
        .with_program(prog(&v)?)
        .with_measurement(ob);
    let c = Party::new("c").with_program(prog(&joint)?).with_measurement(joint_o);
    let out = distributed::run_triparty(scheme, &a, &b, &c, shots, &mut ChaCha8Rng::seed_from_u64(seed)).map_err(err)?;
    protocol_dict(py, &out)
}

/// Returns `(exit_code, messages)` for a scenario document.
#[pyfunction]
fn validate_scenario(text: &str) -> (i32, Vec<String>) {
    match scenario::parse_scenario(text) {
        Err(v) => (scenario::exit_code(std::slice::from_ref(&v)), vec![v.to_string()]),
        Ok(s) => {
            let vs = scenario::validate_scenario(&s);
            (scenario::exit_code(&vs), vs.iter().map(ToString::to_string).collect())
        }
    }
}

/// Runs a scenario document, writes its artifacts under `out` and returns
/// the summary rows.
#[pyfunction]
#[pyo3(signature = (text, out, seed = None, shots = None))]
fn run_scenario(text: &str, out: PathBuf, seed: Option<u64>, shots: Option<u64>) -> PyResult<Vec<(String, String)>> {
    let s = scenario::parse_scenario(text).map_err(|v| PyValueError::new_err(v.to_string()))?;
    let opts = scenario::RunOptions { seed, shots, out: Some(out), tolerance: None };
    let artifacts = scenario::run_scenario(&s, &opts).map_err(|e| match e.exit_code() {
        2..=4 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    })?;
    Ok(artifacts.summary_rows)
}

#[pymodule]
fn oblivq(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChoiProgram>()?;
    m.add_function(wrap_pyfunction!(random_unitary, m)?)?;
    m.add_function(wrap_pyfunction!(gate, m)?)?;
    m.add_function(wrap_pyfunction!(oqt_step, m)?)?;
    m.add_function(wrap_pyfunction!(oqt_sequence, m)?)?;
    m.add_function(wrap_pyfunction!(oqt_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(dqc1, m)?)?;
    m.add_function(wrap_pyfunction!(odqc1, m)?)?;
    m.add_function(wrap_pyfunction!(oaa_success, m)?)?;
    m.add_function(wrap_pyfunction!(lcu_apply, m)?)?;
    m.add_function(wrap_pyfunction!(rebit_embed, m)?)?;
    m.add_function(wrap_pyfunction!(oqt_compose_choi, m)?)?;
    m.add_function(wrap_pyfunction!(knit_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(run_dbqc, m)?)?;
    m.add_function(wrap_pyfunction!(run_triparty, m)?)?;
    m.add_function(wrap_pyfunction!(validate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
