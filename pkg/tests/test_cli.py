import json

import numpy as np
import pytest

from polarfec.cli import main
from polarfec.ldpc import read_alist
from polarfec.polar import read_spec


@pytest.fixture()
def polar_spec(tmp_path):
    out = tmp_path / "spec.json"
    assert main(["construct", "--kind", "polar", "-n", "5", "--rate", "0.5",
                 "--channel", "bec", "--param", "0.5", "-o", str(out)]) == 0
    return out


class TestConstruct:
    def test_polar_spec_file(self, polar_spec):
        spec, meta = read_spec(polar_spec)
        assert spec.n == 5 and spec.K == 16
        assert meta["rule"] == "standard"

    def test_polar_new_rule(self, tmp_path, capsys):
        out = tmp_path / "new.json"
        rc = main(["construct", "--kind", "polar", "-n", "8", "--rate", "0.5",
                   "--rule", "new", "--leaf-threshold", "8", "-o", str(out)])
        assert rc == 0
        spec, meta = read_spec(out)
        assert meta["rule"] == "new"

    def test_ldpc_alist(self, tmp_path):
        out = tmp_path / "h.alist"
        rc = main(["construct", "--kind", "ldpc", "--length", "200", "--rate", "0.5",
                   "--regular", "3,6", "--seed", "1", "-o", str(out)])
        assert rc == 0
        H = read_alist(out)
        assert H.n_cols == 200 and H.m == 100

    def test_missing_flags_is_config_error(self, tmp_path):
        assert main(["construct", "--kind", "polar", "-o", str(tmp_path / "x")]) == 1


class TestAnalyze:
    def test_depth_report(self, capsys):
        assert main(["analyze", "-n", "3", "--json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["girth"] == 12
        assert report["leaf_size_histogram"] == {"1": 1, "2": 3, "4": 3, "8": 1}

    def test_spec_report_includes_stopping_distance(self, polar_spec, capsys):
        assert main(["analyze", "--spec", str(polar_spec), "--json"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["stopping_distance"] >= 1

    def test_enumeration_report(self, tmp_path, capsys):
        out = tmp_path / "s3.json"
        main(["construct", "--kind", "polar", "-n", "3", "--rate", "0.5", "-o", str(out)])
        capsys.readouterr()  # drop the construct chatter
        assert main(["analyze", "--spec", str(out), "--enumerate", "--json"]) == 0
        report = json.loads(capsys.readouterr().out)
        enum = report["enumeration"]
        assert enum["min_vss_size"] == enum["min_leaf_size"]

    def test_enumeration_depth_guard(self, capsys):
        assert main(["analyze", "-n", "6", "--enumerate"]) == 1

    def test_graph_export(self, tmp_path, capsys):
        target = tmp_path / "graph.txt"
        assert main(["analyze", "-n", "2", "--export-graph", str(target)]) == 0
        lines = [l for l in target.read_text().splitlines() if not l.startswith("#")]
        assert len(lines) == 8

    def test_low_weight_table_present(self, capsys):
        main(["analyze", "-n", "10", "--json"])
        report = json.loads(capsys.readouterr().out)
        entry = next(r for r in report["low_weight_table"] if r["eps"] == 0.3)
        assert entry["count"] == 56


class TestDecode:
    @pytest.mark.parametrize("decoder,channel,param", [
        ("sc", "bec", "0.2"), ("bp", "bec", "0.2"), ("bp", "awgn", "0.5"),
    ])
    def test_single_frame_dump(self, polar_spec, capsys, decoder, channel, param):
        rc = main(["decode", "--spec", str(polar_spec), "--decoder", decoder,
                   "--channel", channel, "--param", param, "--seed", "3"])
        assert rc == 0
        out = json.loads(capsys.readouterr().out)
        assert out["decoder"] == decoder
        assert out["iterations"] >= 1

    def test_missing_spec_is_config_error(self, tmp_path):
        assert main(["decode", "--spec", str(tmp_path / "nope.json"),
                     "--channel", "bec", "--param", "0.3"]) == 1


class TestSweep:
    def test_bec_sweep_writes_outputs(self, polar_spec, tmp_path, capsys):
        out = tmp_path / "run"
        rc = main(["sweep", "--scheme", "polar-bp", "--channel", "bec",
                   "--grid", "0.1,0.3", "--spec", str(polar_spec),
                   "--min-error-blocks", "5", "--max-frames", "600",
                   "--out", str(out)])
        assert rc == 0
        assert (tmp_path / "run.csv").exists()
        assert (tmp_path / "run.jsonl").exists()
        assert "BER" in capsys.readouterr().out

    def test_bad_grid_is_config_error(self, polar_spec):
        assert main(["sweep", "--scheme", "polar-bp", "--channel", "bec",
                     "--grid", "", "--spec", str(polar_spec)]) == 1


class TestExitCodes:
    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as e:
            main(["frobnicate"])
        assert e.value.code == 1

    def test_bad_choice_value(self):
        with pytest.raises(SystemExit) as e:
            main(["sweep", "--scheme", "nope", "--channel", "bec", "--grid", "0.1"])
        assert e.value.code == 1
