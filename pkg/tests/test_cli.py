import json
import subprocess
import sys

import numpy as np
import pytest

from loewner_jets import Spectrum
from loewner_jets.chains import ChainJets
from loewner_jets.cli import EXIT_CONVERGENCE, EXIT_DIVISOR, EXIT_FAIL, EXIT_INPUT, EXIT_OK, dumps, main
from loewner_jets.continuous import HerglotzSpec, SchedulePiece
from loewner_jets.corpus import random_family
from loewner_jets.families import DiscreteFamily, TriangularFamily
from loewner_jets.jets import JetMap, coefficient_norm
from loewner_jets.scenarios import scenario_family


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def files(tmp_path):
    spec = Spectrum.discrete([0.5, 0.2])
    lin = TriangularFamily.linear(spec, 4, 10)
    f = {
        "spec": write(tmp_path / "spec.json", {"values": [np.exp(-2), np.exp(-1)]}),
        "spec1": write(tmp_path / "spec1.json", {"values": [0.5]}),
        "linear": write(tmp_path / "linear.json", DiscreteFamily(spec, lin.steps, "linear", 4).to_dict()),
        "random": write(tmp_path / "random.json", random_family(np.random.default_rng(11), horizon=24).to_dict()),
        "semigroup": write(tmp_path / "semi.json", scenario_family("complex_resonance_semigroup", degree=4, horizon=24).to_dict()),
        "bad": str(tmp_path / "missing.json"),
        "junk": write(tmp_path / "junk.json", {"values": "nope"}),
    }
    near = Spectrum.discrete([0.6, 0.36 + 1e-5])
    step = JetMap.from_terms(2, 4, {(0, (1, 0)): 0.6, (1, (0, 1)): near.lambdas[1], (1, (2, 0)): 0.01})
    f["near"] = write(tmp_path / "near.json", DiscreteFamily(near, [step] * 10, "linear", 4).to_dict())
    sd = Spectrum.discrete([0.6, 0.36 * (1 + 3e-9)])
    step = JetMap.from_terms(2, 4, {(0, (1, 0)): 0.6, (1, (0, 1)): sd.lambdas[1], (1, (2, 0)): 1e4})
    f["divisor"] = write(tmp_path / "divisor.json", DiscreteFamily(sd, [step], "periodic", 4).to_dict())
    H = HerglotzSpec(Spectrum.continuous([-0.5, -0.8]), (), 10.0, 4)
    f["herglotz"] = write(tmp_path / "herglotz.json", H.to_dict())
    return f


def test_resonances_examples(capsys, files):
    code, out, _ = run(capsys, "resonances", files["spec"])
    rep = json.loads(out)
    assert code == EXIT_OK
    assert rep["header"]["sorted"] and rep["header"]["permutation"] == [1, 0]
    assert [(e["component"], e["index"], e["kind"]) for e in rep["report"]["entries"]] == [(1, [2, 0], "complex")]
    code, out, _ = run(capsys, "resonances", files["spec1"])
    assert code == EXIT_OK and json.loads(out)["report"]["entries"] == []


@pytest.mark.parametrize("key", ["bad", "junk"])
def test_malformed_input(capsys, files, key):
    code, out, err = run(capsys, "resonances", files[key])
    assert code == EXIT_INPUT and not out
    assert json.loads(err)["error"] == "invalid_input"


def test_usage_errors(capsys, files):
    assert run(capsys, "resonances", files["spec"], "--degree", "1")[0] == EXIT_INPUT
    assert run(capsys, "resonances", files["spec"], "--tol-res", "-1")[0] == EXIT_INPUT
    assert run(capsys, "frobnicate")[0] == EXIT_INPUT


def test_normalize_linear_and_semigroup(capsys, files):
    code, out, _ = run(capsys, "normalize", files["linear"])
    assert code == EXIT_OK
    steps = [JetMap.from_dict(t) for t in json.loads(out)["triangular_steps"]]
    assert all(t == JetMap.diagonal([0.5, 0.2], 4) for t in steps)
    code, out, _ = run(capsys, "normalize", files["semigroup"])
    assert code == EXIT_OK
    kept = JetMap.from_dict(json.loads(out)["triangular_steps"][0])
    assert abs(kept.coefficient(1, (2, 0))) > 0


def test_normalize_near_resonance_warns(capsys, files):
    code, out, _ = run(capsys, "normalize", files["near"])
    assert code == EXIT_OK
    assert any(w["kind"] == "near_resonance" for w in json.loads(out)["warnings"])


def test_small_divisor_exit(capsys, files):
    code, _, err = run(capsys, "normalize", files["divisor"])
    payload = json.loads(err)
    assert code == EXIT_DIVISOR
    assert payload["error"] == "small_divisor" and payload["component"] == 1 and payload["index"] == [2, 0]


def test_non_convergence_exit(capsys, files):
    code, _, err = run(capsys, "chain", files["random"], "--m-max", "3")
    payload = json.loads(err)
    assert code == EXIT_CONVERGENCE and payload["error"] == "non_convergence" and payload["history"]


def test_chain_verdicts(capsys, files, tmp_path):
    code, out, _ = run(capsys, "chain", files["random"], "--plot-data", tmp_path / "plots")
    assert code == EXIT_OK and json.loads(out)["normality"]["verdict"] == "bounded"
    assert (tmp_path / "plots" / "weights.csv").read_text().startswith("n,w_n\n0,")
    code, out, _ = run(capsys, "chain", files["semigroup"])
    chain = json.loads(out)
    assert chain["normality"]["verdict"] == "growing"
    h = ChainJets.from_dict(chain)
    a = np.array([e.coefficient(1, (2, 0)) for e in h.normalized])
    assert np.abs(a - (a[0] - 0.05 * np.arange(a.size))).max() < 1e-10


def test_chain_herglotz(capsys, files, tmp_path):
    code, out, _ = run(capsys, "chain", files["herglotz"], "--times", 0, 0.5, 1, "--plot-data", tmp_path / "p")
    res = json.loads(out)
    assert code == EXIT_OK and res["times"] == [0.0, 0.5, 1.0]
    for s, lin in zip(res["times"], res["linear_parts"]):
        assert [complex(v["re"], v["im"]) for v in lin] == pytest.approx(list(np.exp(np.array([0.5, 0.8]) * s)))
    ident = JetMap.identity(2, 4)
    assert all(coefficient_norm(JetMap.from_dict(e) - ident) < 1e-15 for e in res["entries"])
    assert res["pde_residuals"][1]["residual"] < 1e-6
    assert (tmp_path / "p" / "steps.csv").exists()


def test_verify(capsys, files, tmp_path):
    run(capsys, "chain", files["random"], "--out", tmp_path / "c.json")
    code, out, _ = run(capsys, "verify", tmp_path / "c.json", files["random"])
    assert code == EXIT_OK and json.loads(out)["passed"]
    code, out, _ = run(capsys, "verify", tmp_path / "c.json", files["linear"])
    assert code in (EXIT_FAIL, EXIT_INPUT)


def test_scenarios(capsys):
    code, out, _ = run(capsys, "scenario", "two_normal_chains")
    assert code == EXIT_OK and json.loads(out)["passed"]
    code, out, _ = run(capsys, "scenario", "complex_resonance_semigroup")
    rep = json.loads(out)
    assert code == EXIT_OK and any("verdict growing" in a["claim"] for a in rep["assertions"])
    code, out, _ = run(capsys, "scenario", "pure_real_resonance_adversary", "--horizon", "16")
    assert code == EXIT_OK and json.loads(out)["warnings"]
    assert run(capsys, "scenario", "nope")[0] == EXIT_INPUT


def test_determinism_and_round_trip(capsys, files, tmp_path):
    outs = []
    for k in range(2):
        target = tmp_path / f"run{k}.json"
        assert run(capsys, "chain", files["random"], "--seed", "5", "--out", target)[0] == EXIT_OK
        outs.append(target.read_bytes())
    assert outs[0] == outs[1]
    data = json.loads(outs[0])
    assert dumps(data).encode() == outs[0]
    back = ChainJets.from_dict(data)
    assert dumps(back.to_dict()) == dumps({k: data[k] for k in back.to_dict()})


def test_non_finite_floats_survive():
    assert json.loads(dumps({"x": float("inf"), "y": np.float64(0.1), "z": 1 + 2j})) == {
        "x": "inf", "y": 0.1, "z": {"re": 1.0, "im": 2.0}
    }


def test_console_entry_point(files):
    proc = subprocess.run([sys.executable, "-m", "loewner_jets", "resonances", files["spec1"]], capture_output=True, text=True)
    assert proc.returncode == 0 and json.loads(proc.stdout)["report"]["entries"] == []
