import json
import subprocess
import sys

import pytest

from msle import acceptance
from msle import combinatorics as cb
from msle.cli import main, to_json


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    manifest = json.loads(err.strip().splitlines()[-1])
    return code, out, manifest


def test_probs_example(capsys):
    code, out, man = run(capsys, "probs", "--points", "0,1,2,3")
    assert code == 0
    assert json.loads(out) == {"1-2,3-4": 0.75, "1-4,2-3": 0.25}
    assert man["exit_code"] == 0 and man["schema"] == "msle/1"
    assert man["command"] == ["msle", "probs", "--points", "0,1,2,3"]


def test_probs_csv(capsys):
    code, out, _ = run(capsys, "probs", "--points", "0,1,2,3", "--csv")
    assert out.splitlines() == ["pattern,probability", '"1-2,3-4",0.75', '"1-4,2-3",0.25']


def test_patterns_round_trip(capsys):
    code, out, _ = run(capsys, "patterns", "--n", "3")
    ps = [cb.LinkPattern.from_json(o) for o in json.loads(out)]
    assert ps == list(cb.enumerate_link_patterns(3))


def test_patterns_empty(capsys):
    assert run(capsys, "patterns", "--n", "0")[1].strip() == '[{"n":0,"links":[]}]'


@pytest.mark.parametrize("inverse", [False, True])
def test_matrix_round_trip(capsys, inverse):
    args = ["matrix", "--n", "3"] + (["--inverse"] if inverse else [])
    code, out, _ = run(capsys, *args)
    got = cb.SignedIntMatrix.from_json(out)
    assert got == (cb.inverse_matrix(3) if inverse else cb.incidence_matrix(3))


def test_zalpha_and_symmetric(capsys):
    code, out, _ = run(capsys, "zalpha", "--pattern", "1-4,2-3", "--points", "0,1,2,3")
    assert code == 0
    assert json.loads(out)["value"] == pytest.approx(12 ** -0.5)
    code, out, _ = run(capsys, "zalpha", "--pattern", "(())", "--points", "0,1,2,3", "--kappa", "3")
    assert code == 0
    code, out, _ = run(capsys, "symmetric", "--points", "0,1,2,3", "--kappa", "3")
    assert json.loads(out)["value"] == pytest.approx(1 - 1 / 4 + 1 / 3)


def test_marginal(capsys):
    code, out, _ = run(capsys, "marginal", "--points", "0,1,2,3,4,5")
    probs = json.loads(out)["probabilities"]
    assert probs == pytest.approx({"2": 45 / 64, "4": 10 / 64, "6": 9 / 64})


@pytest.mark.parametrize("argv", [
    ["probs", "--points", "0,2,1,3"],
    ["probs", "--points", "0,1,2"],
    ["probs", "--points", "a,b"],
    ["zalpha", "--pattern", "1-3,2-4", "--points", "0,1,2,3"],
    ["marginal", "--points", "0,1,2,3", "--from", "2"],
    ["symmetric", "--points", "0,1,2,3", "--kappa", "5"],
    ["mc", "drive", "--points", "0,1,2,3"],
    ["mc", "marginal", "--dt", "-1"],
    ["frobnicate"],
    [],
])
def test_usage_errors_exit_2(capsys, argv):
    code, _, man = run(capsys, *argv)
    assert code == 2 and man["exit_code"] == 2


def test_capacity_exit_3(capsys):
    assert run(capsys, "patterns", "--n", "11")[0] == 3
    assert run(capsys, "matrix", "--n", "5", "--max-n", "4")[0] == 3


def test_output_is_byte_identical(capsys):
    outs = {run(capsys, "mc", "marginal", "--samples", "50", "--seed", "3", "--dt", "1e-2")[1]
            for _ in range(2)}
    assert len(outs) == 1


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("MSLE_SEED", "17")
    _, out_env, man = run(capsys, "mc", "marginal", "--samples", "30", "--dt", "1e-2")
    assert man["seed"] == 17
    monkeypatch.delenv("MSLE_SEED")
    _, out_arg, _ = run(capsys, "mc", "marginal", "--samples", "30", "--dt", "1e-2",
                        "--seed", "17")
    assert out_env == out_arg


def test_mc_drive(capsys):
    code, out, man = run(capsys, "mc", "drive", "--pattern", "1-4,2-3", "--samples", "50",
                         "--dt", "1e-2")
    res = json.loads(out)
    assert res["paired_endpoint"] == 4
    assert code == (0 if res["hit_fraction"] >= 0.99 else 1)
    assert man["tolerances"] == {"hit_fraction": 0.99}


def test_out_file(capsys, tmp_path):
    target = tmp_path / "p.json"
    code, out, _ = run(capsys, "--out", str(target), "probs", "--points", "0,1,2,3")
    assert out == ""
    assert json.loads(target.read_text())["1-4,2-3"] == 0.25


def test_verify_passes(capsys):
    code, out, man = run(capsys, "verify", "decay")
    assert code == 0 and json.loads(out)["passed"] is True
    assert man["checks"] == {"decay": True}
    assert run(capsys, "verify", "dual", "--n", "2")[0] == 0


def test_to_json_floats():
    assert to_json({"a": 0.1, "b": [1, 2.5e-300], "c": None, "d": True}) == \
        '{"a":0.10000000000000001,"b":[1,2.5e-300],"c":null,"d":true}'
    assert json.loads(to_json(0.1)) == 0.1


def test_suite_flags_a_perturbed_inverse(capsys, monkeypatch):
    real = cb.inverse_matrix

    def broken(n, **kw):
        m = real(n, **kw)
        rows = [list(r) for r in m.entries]
        rows[0][-1] += 1
        return cb.SignedIntMatrix(m.n, m.order, tuple(tuple(r) for r in rows))

    monkeypatch.setattr(cb, "inverse_matrix", broken)
    res = acceptance.run_criterion(1)
    assert not res.passed
    monkeypatch.setattr(acceptance, "FAST", (1, 2, 3))
    code, out, man = run(capsys, "suite", "fast")
    assert code == 1
    failed = [k for k, v in man["checks"].items() if not v]
    assert failed[0] == "1 matrix fixtures"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "msle", "probs", "--points=-3,-1,1,3"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["1-4,2-3"] == pytest.approx(0.25)
    assert json.loads(proc.stderr)["backend"] in ("cython", "python")
