import csv
import json
import shutil
import subprocess

import pytest

from monoplan.cli import EXIT_DOMAIN, EXIT_OK, EXIT_USAGE, ExperimentConfig, format_csv, parse_n_range, run
from monoplan.errors import DomainError
from monoplan.measures import discrete
from monoplan.plans import FiberPlan, MapFiber
from monoplan.measures import ScalarMeasure, dirac


@pytest.fixture
def files(tmp_path, antitone):
    paths = {}
    docs = {
        "a": discrete([0.0, 1.0]).to_dict(),
        "b": discrete([0.0, 2.0]).to_dict(),
        "anti": antitone.to_dict(),
        "mixed": FiberPlan(
            ScalarMeasure(((2.0, 0.5),), ((0.0, 1.0, 0.5),)), (discrete([0.0, 0.5]),), (MapFiber(3.0, -7.0),)
        ).to_dict(),
    }
    for name, doc in docs.items():
        paths[name] = tmp_path / f"{name}.json"
        paths[name].write_text(json.dumps(doc))
    return {k: str(v) for k, v in paths.items()}


def call(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_w2(capsys, files):
    code, out, _ = call(capsys, "w2", files["a"], files["b"])
    assert code == EXIT_OK
    assert out.strip() == '{"w2": 0.7071067811865476}'
    assert json.loads(call(capsys, "w2", files["a"], files["b"], "--oracle")[1]) == {"w2": pytest.approx(0.7071067811865476)}


def test_monotone(capsys, files):
    code, out, _ = call(capsys, "monotone", files["anti"])
    assert code == EXIT_OK
    assert json.loads(out) == {"monotone": False, "witness": [[0.0, 1.0], [1.0, 0.0]]}


def test_lambda_and_project(capsys, files):
    assert json.loads(call(capsys, "lambda-max", files["anti"])[1]) == {"sup_tau": 1.0, "finite": True, "attained": True}
    assert json.loads(call(capsys, "lambda-max", files["anti"], "--bisect")[1])["sup_tau"] == pytest.approx(1.0)
    for extra in ([], ["--oracle"], ["--sweep", "right"]):
        doc = json.loads(call(capsys, "project", files["anti"], *extra)[1])
        assert doc["distance"] == pytest.approx(0.5, abs=1e-10)


def test_project_diffuse_base_bins(capsys, files):
    code, out, err = call(capsys, "project", files["mixed"], "--bins", "16")
    assert code == EXIT_OK and "16" in err
    assert FiberPlan.from_dict(json.loads(out)["plan"]).base.is_atomic


def test_tangent_and_witness(capsys, files, tmp_path):
    doc = json.loads(call(capsys, "tangent", files["mixed"])[1])
    assert doc["tangent"] is True
    assert doc["decomposition"]["map_part"] == [{"piece": 0, "a": 3.0, "b": -7.0}]
    out = tmp_path / "w.csv"
    assert call(capsys, "witness", files["mixed"], "--n", "1,2,4", "--out", str(out))[0] == EXIT_OK
    rows = list(csv.DictReader(out.open()))
    assert [r["n"] for r in rows] == ["1", "2", "4"]
    assert all(r["monotone_ok"] == "true" for r in rows)


def test_algebra(capsys, files):
    doc = json.loads(call(capsys, "algebra", "scale", files["anti"], "--factor", "2")[1])
    assert FiberPlan.from_dict(doc).atom_fibers == (dirac(2.0), dirac(0.0))
    doc = json.loads(call(capsys, "algebra", "add", files["anti"], "--other", files["anti"])[1])
    assert FiberPlan.from_dict(doc).atom_fibers == (dirac(2.0), dirac(0.0))
    doc = json.loads(call(capsys, "algebra", "push", files["anti"], "--c1", "1", "--c2", "0.5")[1])
    assert FiberPlan.from_dict(doc).atom_fibers == (dirac(0.5), dirac(1.0))
    assert call(capsys, "algebra", "add", files["anti"])[0] == EXIT_USAGE


def test_dist(capsys, files, tmp_path):
    other = tmp_path / "o.json"
    other.write_text(json.dumps(FiberPlan(discrete([0.0, 1.0]), (dirac(0.0), dirac(0.0))).to_dict()))
    assert json.loads(call(capsys, "dist", files["anti"], str(other))[1]) == {"w_rho": pytest.approx(0.7071067811865476)}
    assert json.loads(call(capsys, "dist", files["anti"], str(other), "--oracle")[1])["w_rho"] == pytest.approx(0.7071067811865476)
    assert call(capsys, "dist", files["anti"], files["mixed"])[0] == EXIT_DOMAIN


def test_round_trip_validation(capsys, files, tmp_path):
    commands = [
        ("w2", files["a"], files["b"]),
        ("monotone", files["anti"]),
        ("lambda-max", files["anti"]),
        ("project", files["anti"]),
        ("tangent", files["mixed"]),
        ("algebra", "scale", files["mixed"], "--factor", "3"),
        ("validate", files["mixed"]),
    ]
    for k, argv in enumerate(commands):
        code, out, _ = call(capsys, *argv)
        assert code == EXIT_OK
        path = tmp_path / f"out{k}.json"
        path.write_text(out)
        code, out, _ = call(capsys, "validate", str(path))
        assert code == EXIT_OK, argv
        assert json.loads(out)["valid"] is True


def test_experiment_deterministic(capsys, tmp_path, monkeypatch):
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    argv = ["experiment", "--lemma", "atom-witness", "--n", "1:16", "--seed", "7"]
    assert run(argv + ["--out", str(out1)]) == EXIT_OK
    assert run(argv + ["--out", str(out2)]) == EXIT_OK
    data = out1.read_bytes()
    assert data == out2.read_bytes()
    assert b"\r" not in data
    rows = list(csv.DictReader(out1.open()))
    assert list(rows[0]) == ["n", "tau_n", "wrho_to_target", "monotone_ok"]
    errs = [float(r["wrho_to_target"]) for r in rows]
    assert all(b <= a for a, b in zip(errs, errs[1:]))
    assert all(r["monotone_ok"] == "true" for r in rows)
    # env seed is used when the flag is absent, and the flag wins over it
    monkeypatch.setenv("MONOPLAN_SEED", "7")
    assert call(capsys, "experiment", "--lemma", "atom-witness", "--n", "1:16")[1].encode() == data
    assert call(capsys, *argv[:-1], "8")[1].encode() != data


@pytest.mark.parametrize("lemma", ["trunc-supp", "trunc-atoms", "fn-witness", "atom-witness", "convexity"])
def test_every_lemma_runs(capsys, lemma):
    code, out, _ = call(capsys, "experiment", "--lemma", lemma, "--n", "1,2,4,8", "--seed", "3")
    assert code == EXIT_OK
    rows = list(csv.DictReader(out.splitlines()))
    assert len(rows) == 4
    assert all(r["monotone_ok"] == "true" for r in rows)


@pytest.mark.parametrize(
    "argv",
    [
        ["bogus"],
        ["w2", "x.json", "--zzz"],
        ["experiment", "--lemma", "nope"],
        ["experiment", "--lemma", "convexity", "--n", "5:2"],
        [],
    ],
)
def test_usage_errors(capsys, argv):
    code, _, err = call(capsys, *argv)
    assert code == EXIT_USAGE
    assert "usage" in err


def test_bad_env_seed_is_usage_error(capsys, monkeypatch):
    monkeypatch.setenv("MONOPLAN_SEED", "seven")
    assert call(capsys, "experiment", "--lemma", "convexity")[0] == EXIT_USAGE


def test_domain_errors(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"atoms": [{"x": 0, "m": -1}]}')
    assert call(capsys, "validate", str(bad))[0] == EXIT_DOMAIN
    bad.write_text("{not json")
    assert call(capsys, "validate", str(bad))[0] == EXIT_DOMAIN
    assert call(capsys, "w2", str(tmp_path / "missing.json"), str(bad))[0] == EXIT_DOMAIN


def test_helpers():
    assert parse_n_range("3") == [3]
    assert parse_n_range("1:4") == [1, 2, 3, 4]
    assert parse_n_range("1,2,8") == [1, 2, 8]
    assert format_csv([(1, 0.1, 1 / 3, True)]) == "n,tau_n,wrho_to_target,monotone_ok\n1,0.1,0.3333333333333333,true\n"
    with pytest.raises(DomainError):
        ExperimentConfig("convexity", (2, 1), 0)


@pytest.mark.skipif(shutil.which("monoplan") is None, reason="console script not installed")
def test_console_script(files):
    res = subprocess.run(["monoplan", "w2", files["a"], files["b"]], capture_output=True, text=True)
    assert res.returncode == 0 and json.loads(res.stdout) == {"w2": 0.7071067811865476}
    res = subprocess.run(["monoplan", "--nope"], capture_output=True, text=True)
    assert res.returncode == 3 and "usage" in res.stderr
