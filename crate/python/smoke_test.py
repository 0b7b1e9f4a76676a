"""Smoke test for the oblivq extension module.

Build with `cargo build -p oblivq-py` and copy `target/debug/liboblivq.so`
to `python/oblivq.so` (or install with maturin) before running.
"""
import cmath
import json
import math
import pathlib
import sys
import tempfile

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parent))

import oblivq  # noqa: E402

ROOT = pathlib.Path(__file__).resolve().parent.parent


def close(a, b, tol=1e-9):
    assert abs(a - b) <= tol, f"{a} != {b}"


def main():
    h = oblivq.gate("H")
    prog = oblivq.ChoiProgram.from_unitary(h)
    assert (prog.out_dim, prog.in_dim) == (2, 2)

    rho = [[1, 0], [0, 0]]
    (p0, rho0), (p1, _) = oblivq.oqt_step(prog, rho)
    close(p0 + p1, 1.0)
    # Even branch applies H.
    close(rho0[0][1].real, 0.5)

    bits, prob, final = oblivq.oqt_sequence([prog, prog], rho, parities=[0, 0])
    assert bits == [0, 0]
    close(final[0][0].real, 1.0)

    u = oblivq.random_unitary(4, seed=3)
    trace = sum(u[i][i] for i in range(4))
    maximally_mixed = [[0.25 if i == j else 0 for j in range(4)] for i in range(4)]
    close(oblivq.dqc1(u, maximally_mixed, "x"), 0.5 + trace.real / 8)

    dec = oblivq.knit_decompose(oblivq.gate("CZ"))
    close(dec["overhead"], 4.0)

    a = math.sqrt(0.5)
    out = oblivq.run_dbqc([oblivq.gate("RY(0.7)")], [h], [1, 0], [a, a], 4000, 7)
    oracle = abs(a * (math.cos(0.35) - math.sin(0.35)) + a * (math.cos(0.35) + math.sin(0.35))) ** 2 / 2
    assert abs(out["estimate"] - oracle) <= 4 * out["stderr"], (out, oracle)
    assert out["records"] == 4000

    text = (ROOT / "crates/core/scenarios/dbqc.json").read_text()
    assert oblivq.validate_scenario(text) == (0, [])
    bad = json.loads(text)
    bad["protocol"]["ebit"] = "missing"
    code, messages = oblivq.validate_scenario(json.dumps(bad))
    assert code == 4 and messages

    with tempfile.TemporaryDirectory() as tmp:
        rows = dict(oblivq.run_scenario(text, tmp, seed=7, shots=200))
        assert rows["shots"] == "200"
        assert sum(1 for _ in open(pathlib.Path(tmp) / "records.jsonl")) == 200

    p, psi = oblivq.lcu_apply([0.5, 0.5], [oblivq.gate("X"), oblivq.gate("Z")], [1, 0])
    assert 0 < p <= 1
    close(sum(abs(x) ** 2 for x in psi), 1.0)
    assert cmath.isclose(sum(x for x in oblivq.rebit_embed(h)[0]).imag, 0.0)

    print("oblivq smoke test passed")


if __name__ == "__main__":
    main()
