import csv
import json
import subprocess
import sys

import pytest

from mdlab.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, SEED_ENV, git_blob_sha1, main
from mdlab.region.catalog import sum_source_stage2_spec, sum_source_target

SMALL_SIM = {"n": 64, "trials": 4, "seed": 1}
SMALL_COVER = {"n": 64, "trials": 4, "k": 20, "l": 4, "l_prime": 4}
SMALL_PACK = {"n": 256, "trials": 3, "k": 141, "l": 64, "l_prime": 64, "rho1": 0.332, "rho2": 0.332}


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(SEED_ENV, raising=False)
    return tmp_path


def write(path, doc):
    path.write_text(json.dumps(doc), encoding="utf-8")
    return str(path)


def run(argv, capsys):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestSperner:
    @pytest.mark.parametrize(("l", "count"), [(1, 0), (2, 3), (3, 17)])
    def test_stdout_counts(self, l, count, capsys):
        code, out, _ = run(["sperner", "--l", str(l)], capsys)
        doc = json.loads(out)
        assert code == EXIT_OK
        assert doc["count"] == count == len(doc["families"])

    def test_out_writes_manifest(self, workdir, capsys):
        code, out, _ = run(["sperner", "--l", "3", "--out", "s"], capsys)
        assert code == EXIT_OK and json.loads(out)["count"] == 17
        manifest = json.loads((workdir / "s" / "manifest.json").read_text())
        assert manifest["command"] == "sperner"
        assert manifest["outputs"] == ["s/sperner.json"]

    def test_out_of_range(self, capsys):
        assert run(["sperner", "--l", "6"], capsys)[0] == EXIT_USAGE


class TestUsage:
    def test_no_command(self, capsys):
        assert run([], capsys)[0] == EXIT_USAGE

    def test_malformed_json(self, workdir, capsys):
        (workdir / "bad.json").write_text("{not json", encoding="utf-8")
        code, _, err = run(["simulate", "vecsource", "--config", "bad.json", "--out", "o"], capsys)
        assert code == EXIT_USAGE and "bad.json" in err

    @pytest.mark.parametrize(
        "doc",
        [{"n": -4}, {"trials": "many"}, {"unknown_field": 1}, {"p": 0.1}, {"delta": 0.7}, {"sweep_n": []}],
    )
    def test_schema_violations(self, workdir, capsys, doc):
        cfg = write(workdir / "c.json", doc)
        code, _, err = run(["simulate", "vecsource", "--config", cfg, "--out", "o"], capsys)
        assert code == EXIT_USAGE
        assert err.startswith("mdlab: error:")
        assert not (workdir / "o").exists()

    def test_missing_config_file(self, workdir, capsys):
        assert run(["covering-mc", "--config", "absent.json", "--out", "o"], capsys)[0] == EXIT_USAGE

    def test_both_pmf_sources_rejected(self, workdir, capsys):
        doc = {**SMALL_COVER, "erasure": 0.5, "pattern_weights": {"free": 1.0}, "pmf": {"variables": [], "probs": []}}
        cfg = write(workdir / "c.json", doc)
        assert run(["covering-mc", "--config", cfg, "--out", "o"], capsys)[0] == EXIT_USAGE

    def test_bad_seed_env(self, workdir, capsys, monkeypatch):
        cfg = write(workdir / "c.json", SMALL_SIM)
        monkeypatch.setenv(SEED_ENV, "abc")
        assert run(["simulate", "vecsource", "--config", cfg, "--out", "o"], capsys)[0] == EXIT_USAGE


class TestSimulate:
    def test_report_manifest_and_refusal(self, workdir, capsys):
        cfg = write(workdir / "c.json", SMALL_SIM)
        code, out, _ = run(["simulate", "vecsource", "--config", cfg, "--out", "o", "--seed", "5"], capsys)
        assert code == EXIT_OK and json.loads(out)["experiment"] == "vecsource"
        report = json.loads((workdir / "o" / "report.json").read_text())
        manifest = json.loads((workdir / "o" / "manifest.json").read_text())
        assert report["config"]["seed"] == manifest["seed"] == 5
        assert "workers" not in report["config"]
        assert manifest["config_sha1"] == git_blob_sha1((workdir / "c.json").read_bytes())
        assert sorted(manifest["outputs"]) == ["o/report.json", "o/trials.csv"]
        with open(workdir / "o" / "trials.csv", newline="", encoding="utf-8") as fh:
            assert len(list(csv.DictReader(fh))) == SMALL_SIM["trials"]
        assert b"\r\n" in (workdir / "o" / "trials.csv").read_bytes()
        before = (workdir / "o" / "report.json").read_bytes()
        code, _, err = run(["simulate", "vecsource", "--config", cfg, "--out", "o", "--seed", "5"], capsys)
        assert code == EXIT_USAGE and "--force" in err
        assert (workdir / "o" / "report.json").read_bytes() == before

    def test_rerun_is_byte_identical(self, workdir, capsys):
        cfg = write(workdir / "c.json", SMALL_SIM)
        for out_dir, workers in (("a", "1"), ("b", "2")):
            assert run(["simulate", "vecsource", "--config", cfg, "--out", out_dir, "--seed", "3", "--workers", workers], capsys)[0] == EXIT_OK
        for name in ("report.json", "trials.csv"):
            assert (workdir / "a" / name).read_bytes() == (workdir / "b" / name).read_bytes()

    def test_seed_precedence(self, workdir, capsys, monkeypatch):
        cfg = write(workdir / "c.json", SMALL_SIM)
        monkeypatch.setenv(SEED_ENV, "9")
        run(["simulate", "vecsource", "--config", cfg, "--out", "env"], capsys)
        run(["simulate", "vecsource", "--config", cfg, "--out", "flag", "--seed", "4"], capsys)
        monkeypatch.delenv(SEED_ENV)
        run(["simulate", "vecsource", "--config", cfg, "--out", "file"], capsys)
        seeds = {d: json.loads((workdir / d / "manifest.json").read_text())["seed"] for d in ("env", "flag", "file")}
        assert seeds == {"env": 9, "flag": 4, "file": SMALL_SIM["seed"]}

    def test_replaying_manifest_argv_reproduces(self, workdir, capsys):
        cfg = write(workdir / "c.json", SMALL_SIM)
        assert run(["simulate", "vecsource", "--config", cfg, "--out", "o"], capsys)[0] == EXIT_OK
        before = (workdir / "o" / "report.json").read_bytes()
        argv = json.loads((workdir / "o" / "manifest.json").read_text())["argv"]
        assert run([*argv, "--force"], capsys)[0] == EXIT_OK
        assert (workdir / "o" / "report.json").read_bytes() == before

    def test_sweep_csv(self, workdir, capsys):
        cfg = write(workdir / "c.json", {**SMALL_SIM, "sweep_n": [32, 64]})
        assert run(["simulate", "vecsource", "--config", cfg, "--out", "o"], capsys)[0] == EXIT_OK
        with open(workdir / "o" / "sweep.csv", newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        assert {r["n"] for r in rows} == {"32", "64"}

    def test_experiment_failure_exit_code(self, workdir, capsys):
        cfg = write(workdir / "c.json", {"n": 64, "trials": 2, "seed": 1})
        code, _, err = run(["simulate", "scalar", "--config", cfg, "--out", "o"], capsys)
        assert code == EXIT_FAILURE and "n is too small" in err


class TestRegion:
    def _vector(self, workdir, d3_shift=0.0):
        target = sum_source_target(0.1)
        doc = target.to_dict()
        doc["distortions"]["3"] += d3_shift
        return write(workdir / "v.json", doc)

    def test_catalog_check_feasible_and_infeasible(self, workdir, capsys):
        spec = write(workdir / "s.json", {"catalog": "sum_source_stage2", "delta": 0.1})
        code, out, _ = run(["region", "check", "--spec", spec, "--vector", self._vector(workdir)], capsys)
        doc = json.loads(out)
        assert code == EXIT_OK and doc["feasible"] and doc["witness"]
        code, out, _ = run(["region", "check", "--spec", spec, "--vector", self._vector(workdir, -0.1)], capsys)
        assert code == EXIT_OK and not json.loads(out)["feasible"]

    def test_full_spec_matches_catalog(self, workdir, capsys):
        spec = write(workdir / "s.json", sum_source_stage2_spec(0.1).to_dict())
        vec = self._vector(workdir)
        code, out, _ = run(["region", "check", "--spec", spec, "--vector", vec, "--exact", "--out", "r"], capsys)
        assert code == EXIT_OK and json.loads(out)["feasible"]
        assert (workdir / "r" / "check.json").exists() and (workdir / "r" / "manifest.json").exists()

    def test_check_needs_vector(self, workdir, capsys):
        spec = write(workdir / "s.json", {"catalog": "sum_source_stage2"})
        assert run(["region", "check", "--spec", spec], capsys)[0] == EXIT_USAGE

    def test_vector_length_mismatch(self, workdir, capsys):
        spec = write(workdir / "s.json", {"catalog": "sum_source_stage2"})
        vec = write(workdir / "v.json", {"rates": [1.0, 1.0]})
        assert run(["region", "check", "--spec", spec, "--vector", vec], capsys)[0] == EXIT_USAGE


class TestFigd:
    def test_coarse_csv_and_refine(self, workdir, capsys):
        code, out, _ = run(["figd", "--step", "0.1", "--out", "g"], capsys)
        assert code == EXIT_OK
        coarse = json.loads(out)
        raw = (workdir / "g" / "figd.csv").read_bytes()
        lines = raw.decode().split("\r\n")
        assert lines[0] == "alpha0,beta0,max_value"
        assert len([ln for ln in lines[1:] if ln]) == 121
        code, out, _ = run(["figd", "--step", "0.1", "--refine", "--out", "g", "--force"], capsys)
        refined = json.loads(out)
        assert code == EXIT_OK
        assert coarse["max_value"] <= refined["max_value"] <= coarse["max_value"] + 0.05
        assert refined["max_value"] < refined["bound"]

    def test_bad_step(self, workdir, capsys):
        assert run(["figd", "--step", "0.03", "--out", "g"], capsys)[0] == EXIT_USAGE


class TestLemmaCommands:
    def test_covering_mc(self, workdir, capsys):
        cfg = write(workdir / "c.json", SMALL_COVER)
        code, out, _ = run(["covering-mc", "--config", cfg, "--out", "o"], capsys)
        doc = json.loads(out)
        assert code == EXIT_OK and 0 <= doc["stats"]["success_frequency"] <= 1

    def test_packing_mc(self, workdir, capsys):
        cfg = write(workdir / "c.json", SMALL_PACK)
        code, out, _ = run(["packing-mc", "--config", cfg, "--out", "o"], capsys)
        doc = json.loads(out)
        assert code == EXIT_OK
        assert doc["rates"]["rho1"] == pytest.approx(85 / 256)
        assert doc["stats"]["min_bound_slack"] > 0

    def test_packing_without_cover_fails_cleanly(self, workdir, capsys):
        cfg = write(workdir / "c.json", SMALL_COVER)
        code, _, err = run(["packing-mc", "--config", cfg, "--out", "o"], capsys)
        assert code == EXIT_FAILURE and "undefined" in err

    def test_too_many_bin_rows(self, workdir, capsys):
        cfg = write(workdir / "c.json", {**SMALL_COVER, "rho1": 0.9})
        assert run(["packing-mc", "--config", cfg, "--out", "o"], capsys)[0] == EXIT_USAGE


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "mdlab", "sperner", "--l", "2"], capture_output=True, text=True, check=False)
    assert proc.returncode == EXIT_OK
    assert json.loads(proc.stdout)["count"] == 3
