from __future__ import annotations

import json

import pytest

from ccagen import fixture_path
from ccagen.cli import (EXIT_OK, EXIT_RESOURCE, EXIT_UNSAT, EXIT_USAGE, EXIT_VERIFY, csv_to_array,
                        main)
from ccagen.model import parse_native, serialize_native

from .conftest import DRUPAL_SUITE_LABELS, grid_model

DRUPAL = str(fixture_path("drupal.json"))
CASE = str(fixture_path("case_study.json"))


def write_model(path, model):
    path.write_text(serialize_native(model))
    return str(path)


class TestGenerate:
    def test_drupal(self, tmp_path, drupal, capsys):
        out = tmp_path / "a.csv"
        assert main(["generate", "--model", DRUPAL, "--t", "2", "--seed", "7", "--out", str(out)]) == EXIT_OK
        lines = out.read_text().splitlines()
        assert lines[0] == "OS,Browser,Database,Server"
        assert 9 <= len(lines) - 1 <= 12
        report = json.loads((tmp_path / "a.report.json").read_text())
        assert report["schema_version"] == 1
        assert report["verification"]["verdict"] == "pass"
        assert report["final_size"] == len(lines) - 1
        assert "verdict=pass" in capsys.readouterr().err

    def test_numeric(self, tmp_path, drupal):
        out = tmp_path / "n.csv"
        assert main(["generate", "--model", DRUPAL, "--numeric", "--out", str(out)]) == EXIT_OK
        rows = csv_to_array(drupal, out.read_text(), numeric=True)
        assert all(0 <= v < 3 for r in rows for v in r)

    def test_stdout(self, capsys):
        assert main(["generate", "--model", DRUPAL, "--seed", "1"]) == EXIT_OK
        assert capsys.readouterr().out.startswith("OS,Browser,Database,Server\n")

    def test_strength_one_rejected(self, capsys):
        assert main(["generate", "--model", DRUPAL, "--t", "1"]) == EXIT_USAGE
        assert "strength below 2" in capsys.readouterr().err

    def test_missing_model(self):
        with pytest.raises(SystemExit) as info:
            main(["generate"])
        assert info.value.code == EXIT_USAGE

    def test_bad_flag_value(self):
        assert main(["generate", "--model", DRUPAL, "--n1-probability", "2"]) == EXIT_USAGE

    def test_unsat(self, tmp_path, capsys):
        path = write_model(tmp_path / "u.json", grid_model([2, 2], [{(0, 0)}, {(0, 1)}]))
        assert main(["generate", "--model", path]) == EXIT_UNSAT
        assert "empty tuple" in capsys.readouterr().err

    def test_row_budget(self, tmp_path):
        code = main(["generate", "--model", CASE, "--max-rows", "20", "--stagnation-limit", "2",
                     "--iterations", "3", "--out", str(tmp_path / "x.csv")])
        assert code == EXIT_RESOURCE

    def test_env_seed(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CCAGEN_SEED", "5")
        main(["generate", "--model", CASE, "--out", str(tmp_path / "a.csv")])
        main(["generate", "--model", CASE, "--seed", "5", "--out", str(tmp_path / "b.csv")])
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
        assert json.loads((tmp_path / "a.report.json").read_text())["seed"] == 5

    def test_model_syntax_error(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{\n oops\n}")
        assert main(["generate", "--model", str(bad)]) == EXIT_USAGE
        assert "line 2" in capsys.readouterr().err


class TestVerify:
    def _csv(self, tmp_path, rows):
        path = tmp_path / "suite.csv"
        path.write_text("OS,Browser,Database,Server\n" + "".join(",".join(r) + "\n" for r in rows))
        return str(path)

    def test_pass(self, tmp_path, capsys):
        path = self._csv(tmp_path, DRUPAL_SUITE_LABELS)
        assert main(["verify", "--model", DRUPAL, "--array", path]) == EXIT_OK
        report = json.loads(capsys.readouterr().out)
        assert report["verdict"] == "pass" and report["covered"] == 42

    def test_fail(self, tmp_path, capsys):
        path = self._csv(tmp_path, DRUPAL_SUITE_LABELS[:4] + DRUPAL_SUITE_LABELS[5:])
        assert main(["verify", "--model", DRUPAL, "--array", path]) == EXIT_VERIFY
        assert len(json.loads(capsys.readouterr().out)["missing"]) == 4

    def test_initial_mode(self, tmp_path, capsys):
        path = self._csv(tmp_path, DRUPAL_SUITE_LABELS)
        assert main(["verify", "--model", DRUPAL, "--array", path, "--mode", "initial"]) == EXIT_OK

    def test_header_mismatch(self, tmp_path):
        path = tmp_path / "x.csv"
        path.write_text("A,B,C,D\n")
        assert main(["verify", "--model", DRUPAL, "--array", str(path)]) == EXIT_USAGE


class TestBft:
    def test_five_tuple(self, tmp_path, capsys, five_tuple_model):
        path = write_model(tmp_path / "m.json", five_tuple_model)
        assert main(["bft", "--model", path]) == EXIT_OK
        got = json.loads(capsys.readouterr().out)
        assert got == [[{"parameter": "P4", "value": "0"}],
                       [{"parameter": "P1", "value": "0"}, {"parameter": "P2", "value": "0"}],
                       [{"parameter": "P1", "value": "0"}, {"parameter": "P2", "value": "2"}]]

    def test_unsat(self, tmp_path, capsys):
        path = write_model(tmp_path / "u.json", grid_model([3, 2], [{(0, 0)}, {(0, 1)}, {(0, 2)}]))
        assert main(["bft", "--model", path]) == EXIT_UNSAT
        assert "empty tuple" in capsys.readouterr().err


class TestConvert:
    def test_round_trip(self, tmp_path, drupal):
        stem = str(tmp_path / "d")
        assert main(["convert", "--model", DRUPAL, "--from", "native", "--to", "casa", "--out", stem]) == 0
        cons = (tmp_path / "d.constraints").read_text().split()
        assert cons[0] == "3" and cons.count("-") == 6
        out = tmp_path / "back.json"
        assert main(["convert", "--model", stem + ".model", "--from", "casa", "--to", "native",
                     "--out", str(out)]) == 0
        back = parse_native(out.read_text())
        assert back.cardinalities == drupal.cardinalities
        assert set(back.constraints) == set(drupal.constraints)
        again = tmp_path / "again"
        main(["convert", "--model", str(out), "--from", "native", "--to", "casa", "--out", str(again)])
        assert (tmp_path / "again.constraints").read_text() == (tmp_path / "d.constraints").read_text()

    def test_malformed(self, tmp_path, capsys):
        (tmp_path / "m.model").write_text("2\n3\n2 x 2\n")
        assert main(["convert", "--model", str(tmp_path / "m.model"), "--from", "casa", "--to", "native"]) \
            == EXIT_USAGE
        assert "line 3" in capsys.readouterr().err

    def test_generate_from_casa(self, tmp_path):
        (tmp_path / "m.model").write_text("3\n4\n2 2 3 2\n")
        (tmp_path / "m.constraints").write_text("1\n2\n- 0 - 2\n")
        out = tmp_path / "a.csv"
        assert main(["generate", "--model", str(tmp_path / "m.model"), "--out", str(out)]) == EXIT_OK
        report = json.loads((tmp_path / "a.report.json").read_text())
        assert report["t"] == 3


class TestBench:
    def test_summary(self, tmp_path):
        models = tmp_path / "models"
        models.mkdir()
        (models / "drupal.json").write_text(open(DRUPAL).read())
        out = tmp_path / "out"
        assert main(["bench", "--models", str(models), "--t", "2", "--runs", "3", "--seed-base", "4",
                     "--out", str(out)]) == EXIT_OK
        summary = json.loads((out / "summary.json").read_text())["drupal"]
        assert summary["seeds"] == [4, 5, 6]
        assert summary["min"] <= summary["median"] <= summary["max"]
        assert summary["all_verified"] is True
        assert (out / "summary.csv").read_text().startswith("model,runs,min,median,max")

    def test_single_run(self, tmp_path):
        models = tmp_path / "models"
        models.mkdir()
        (models / "drupal.json").write_text(open(DRUPAL).read())
        main(["bench", "--models", str(models), "--runs", "1", "--out", str(tmp_path / "o")])
        s = json.loads((tmp_path / "o" / "summary.json").read_text())["drupal"]
        assert s["min"] == s["median"] == s["max"]

    def test_failures_recorded(self, tmp_path):
        models = tmp_path / "models"
        models.mkdir()
        write_model(models / "unsat.json", grid_model([2, 2], [{(0, 0)}, {(0, 1)}], name="unsat"))
        assert main(["bench", "--models", str(models), "--runs", "2", "--out", str(tmp_path / "o")]) == 1
        s = json.loads((tmp_path / "o" / "summary.json").read_text())["unsat"]
        assert len(s["failures"]) == 2 and s["all_verified"] is False

    def test_empty_dir(self, tmp_path):
        assert main(["bench", "--models", str(tmp_path), "--out", str(tmp_path / "o")]) == EXIT_USAGE
