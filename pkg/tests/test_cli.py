import csv
import json
import math
from pathlib import Path

import pytest

from nifldp.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return str(p)


def custom(parts, neighbor=None, **extra):
    doc = {"schema_version": 1, "scenario": {"kind": "custom", "initial_model": [0], "partitions": parts}}
    if neighbor is not None:
        doc["scenario"]["neighbor_partitions"] = neighbor
    doc.update(extra)
    return doc


A = [{"id": "a1", "value": 1}, {"id": "a2", "value": 3}]
B = [{"id": "b1", "value": 2}, {"id": "b2", "value": 4}]


class TestEnumerate:
    def test_noiseless_single_outcome(self, tmp_path):
        cfg = write(tmp_path, custom({"c": [{"id": "p", "value": 3}]}))
        assert main(["enumerate", cfg, "--out", str(tmp_path)]) == 0
        dist = json.loads((tmp_path / "distribution.json").read_text())
        assert dist["outcomes"] == {"3": "1/1"}
        stats = json.loads((tmp_path / "model_stats.json").read_text())
        assert stats["states"] == 4 and stats["traces"] == 1 and stats["max_depth"] == 3

    def test_acceptance_scenario_state_count(self, tmp_path):
        assert main(["enumerate", str(CONFIGS / "two_clients.json"), "--out", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "model_stats.json").read_text())["states"] == 23

    def test_malformed(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text("{")
        assert main(["enumerate", str(p)]) == 2
        assert "config" in capsys.readouterr().err

    def test_state_ceiling(self, tmp_path):
        doc = json.loads((CONFIGS / "two_clients.json").read_text())
        doc["mode"] = {"kind": "exact", "state_ceiling": 3}
        assert main(["enumerate", write(tmp_path, doc), "--out", str(tmp_path)]) == 3

    def test_montecarlo_mode(self, tmp_path):
        doc = json.loads((CONFIGS / "two_clients.json").read_text())
        doc["mode"] = {"kind": "montecarlo", "samples": 500, "seed": 1}
        assert main(["enumerate", write(tmp_path, doc), "--out", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "model_stats.json").read_text())["mode"] == "montecarlo"


class TestEpsilon:
    def test_degenerate_pair_zero(self, tmp_path):
        # b's mean moves from 3 to 4, but both clamp to the grid's upper bound
        grid = {"loss": "mean_estimation", "eta": 1, "grid": {"q": 1, "lo": -1, "hi": 1}}
        doc = custom({"a": A, "b": B}, {"a": A, "b": [B[0], {"id": "b2", "value": 6}]}, learning=grid)
        assert main(["epsilon", write(tmp_path, doc), "--out", str(tmp_path)]) == 0
        rep = json.loads((tmp_path / "epsilon_report.json").read_text())
        assert rep["epsilon"] == 0 and rep["holds"]

    def test_noiseless_infinite(self, tmp_path):
        doc = custom({"a": A, "b": B}, {"a": [A[0], {"id": "a2", "value": 5}], "b": B})
        assert main(["epsilon", write(tmp_path, doc), "--out", str(tmp_path)]) == 1
        assert json.loads((tmp_path / "epsilon_report.json").read_text())["epsilon"] == "inf"

    def test_tight_pair_stub(self, tmp_path):
        doc = {"schema_version": 1, "scenario": {"kind": "distributions", "tight_pair": 3}, "epsilon_budget": 2}
        assert main(["epsilon", write(tmp_path, doc), "--out", str(tmp_path)]) == 0
        rep = json.loads((tmp_path / "epsilon_report.json").read_text())
        assert abs(rep["epsilon"] - math.log(3)) < 1e-12

    def test_not_neighbors(self, tmp_path):
        doc = custom({"a": A, "b": B}, {"a": A, "b": B})
        assert main(["epsilon", write(tmp_path, doc)]) == 2


class TestAdvantage:
    def test_tight_pair(self, tmp_path):
        doc = {"schema_version": 1, "scenario": {"kind": "distributions", "tight_pair": 3}, "challenge": {"trials": 2000, "seed": 5}}
        cfg = write(tmp_path, doc)
        assert main(["advantage", cfg, "--out", str(tmp_path / "one")]) == 0
        rep = json.loads((tmp_path / "one" / "advantage_report.json").read_text())
        assert rep["tv"] == "1/2"
        assert abs(rep["tight_bound"] - 0.5) < 1e-12
        assert abs(rep["exp_bound"] - 2 / 3) < 1e-12
        assert main(["advantage", cfg, "--out", str(tmp_path / "two")]) == 0
        one = (tmp_path / "one" / "challenge.csv").read_text()
        assert one == (tmp_path / "two" / "challenge.csv").read_text()
        rows = list(csv.reader(one.splitlines()))
        assert rows[0] == ["trial_block", "successes", "trials", "advantage_estimate"]

    def test_zero_epsilon_pair(self, tmp_path):
        grid = {"loss": "mean_estimation", "eta": 1, "grid": {"q": 1, "lo": -1, "hi": 1}}
        doc = custom(
            {"a": A, "b": B},
            {"a": A, "b": [B[0], {"id": "b2", "value": 6}]},
            learning=grid,
            challenge={"trials": 500, "seed": 0},
        )
        assert main(["advantage", write(tmp_path, doc), "--out", str(tmp_path)]) == 0
        assert json.loads((tmp_path / "advantage_report.json").read_text())["advantage"] == "0/1"


class TestDecompose:
    def test_one_client(self, tmp_path):
        assert main(["decompose", str(CONFIGS / "decompose.json"), "--out", str(tmp_path)]) == 0
        rep = json.loads((tmp_path / "decomposition_report.json").read_text())
        assert rep["per_client"]["c2"]["epsilon"] == 0
        assert rep["global"]["epsilon"] <= rep["per_client"]["c1"]["epsilon"] + 1e-9

    def test_all_clients_mode_on_one_client_input(self, tmp_path, capsys):
        doc = json.loads((CONFIGS / "decompose.json").read_text())
        doc["decomposition_mode"] = "all_clients_differ"
        assert main(["decompose", write(tmp_path, doc), "--out", str(tmp_path)]) == 2
        assert "c2" in capsys.readouterr().err


class TestValidate:
    def test_passes_and_is_stable(self, capsys):
        assert main(["validate"]) == 0
        first = capsys.readouterr().out
        assert "FAIL" not in first
        assert main(["validate"]) == 0
        assert capsys.readouterr().out == first

    def test_fault_injection(self, capsys):
        assert main(["validate", "--fault", "perturb-pmf"]) == 1
        out = capsys.readouterr().out
        assert out.splitlines()[-1] == "failed: mediant_event_dp"


def test_moniteo(tmp_path, capsys):
    assert main(["moniteo", str(CONFIGS / "moniteo.json"), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "moniteo_report.json").read_text())
    assert rep["mode"] == "exact" and rep["budget_ok"]
    assert capsys.readouterr().out.startswith("moniteo target=sat0")


def test_moniteo_rejects_other_scenarios(tmp_path):
    assert main(["moniteo", str(CONFIGS / "tight_pair.json"), "--out", str(tmp_path)]) == 2
