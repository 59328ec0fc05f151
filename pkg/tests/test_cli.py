import csv
import io
import json

import numpy as np
import pytest
from scipy.integrate import trapezoid

from dispfilter.cli import main
from dispfilter.dispersion import get_platform
from dispfilter.report import PROFILE_COLUMNS, SWEEP_COLUMNS
from dispfilter.temporal import click_probability


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


@pytest.fixture
def extra_platform(tmp_path):
    doc = get_platform("TFLN").to_dict()
    doc["name"] = "my-tfln"
    path = tmp_path / "extra.json"
    path.write_text(json.dumps(doc))
    return path


class TestPlatforms:
    def test_builtins(self, capsys):
        code, out, _ = run(capsys, "platforms", "list")
        assert code == 0
        table = rows(out)
        assert [r["name"] for r in table] == ["SoI", "SiN", "Ti:LN", "TFLN"]
        assert table[2]["signal_polarization"] == "TM"

    def test_with_file(self, capsys, extra_platform):
        code, out, _ = run(capsys, "platforms", "list", "--file", str(extra_platform))
        assert code == 0 and len(rows(out)) == 5

    def test_malformed_file(self, capsys, tmp_path):
        bad = tmp_path / "bad.json"
        bad.write_text('{\n  "name": "x",\n  oops\n}\n')
        code, _, err = run(capsys, "platforms", "list", "--file", str(bad))
        assert code == 2
        assert "line 3" in err

    def test_json(self, capsys):
        code, out, _ = run(capsys, "platforms", "list", "--json")
        assert code == 0 and len(json.loads(out)) == 4

    def test_schema(self, capsys):
        code, out, _ = run(capsys, "platforms", "schema")
        assert code == 0 and "group_index" in out


class TestSeparation:
    def test_tiln_text(self, capsys):
        code, out, _ = run(capsys, "separation", "--platform", "Ti:LN", "--jitter", "20ps")
        assert code == 0
        assert "distance" in out and "suppression" in out

    def test_csv_single_row(self, capsys):
        code, out, _ = run(capsys, "separation", "--platform", "Ti:LN", "--jitter", "20ps", "--csv")
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 2
        (row,) = rows(out)
        assert float(row["distance_m"]) == pytest.approx(0.09008, rel=0.15)

    def test_tfln_loss(self, capsys):
        code, out, _ = run(capsys, "separation", "--platform", "TFLN", "--jitter", "20ps", "--csv")
        (row,) = rows(out)
        assert code == 0
        assert float(row["signal_loss_db"]) == pytest.approx(8.08, rel=0.15)

    def test_json(self, capsys):
        code, out, _ = run(capsys, "separation", "--platform", "TFLN", "--json")
        assert code == 0
        assert json.loads(out)["platform"] == "TFLN"

    def test_negative_jitter(self, capsys):
        code, _, err = run(capsys, "separation", "--platform", "Ti:LN", "--jitter", "-1ps")
        assert code == 2
        assert "jitter must be ≥ 0" in err

    def test_unitless_jitter(self, capsys):
        code, _, err = run(capsys, "separation", "--platform", "Ti:LN", "--jitter", "20")
        assert code == 2 and "20" in err

    def test_unknown_platform(self, capsys):
        code, _, err = run(capsys, "separation", "--platform", "GaAs")
        assert code == 2 and "unknown platform" in err

    def test_solver_error_exit_3(self, capsys, tmp_path):
        doc = get_platform("TFLN").to_dict()
        doc.update(name="lossy")
        doc["pump"]["loss_db_per_cm"] = doc["signal"]["loss_db_per_cm"] = 500.0
        doc["pump"]["group_index"] = doc["signal"]["group_index"] + 1e-4
        f = tmp_path / "lossy.json"
        f.write_text(json.dumps(doc))
        code, _, err = run(capsys, "separation", "--platform", "lossy", "--file", str(f))
        assert code == 3
        assert "separation unreachable" in err

    def test_env_search_path(self, capsys, extra_platform, monkeypatch):
        monkeypatch.setenv("DISPFILTER_PLATFORM_PATH", str(extra_platform.parent))
        code, out, _ = run(capsys, "separation", "--platform", "my-tfln", "--csv")
        assert code == 0 and rows(out)[0]["platform"] == "my-tfln"

    def test_config_file(self, capsys, tmp_path):
        cfg = tmp_path / "run.yaml"
        out_file = tmp_path / "sep.json"
        cfg.write_text(
            "scenario:\n  platform: TFLN\n"
            "detector:\n  jitter_fwhm: 8 ps\n"
            f"output:\n  path: {out_file}\n  format: JSON\n"
        )
        code, _, _ = run(capsys, "separation", "--config", str(cfg))
        assert code == 0
        assert json.loads(out_file.read_text())["jitter_ps"] == pytest.approx(8.0)


class TestSweep:
    def test_tiln_monotone(self, capsys):
        code, out, _ = run(capsys, "sweep", "--platform", "Ti:LN", "--from", "4ps", "--to", "20ps", "--step", "4ps")
        assert code == 0
        assert out.splitlines()[0].split(",") == SWEEP_COLUMNS
        table = rows(out)
        assert [float(r["jitter_ps"]) for r in table] == [4, 8, 12, 16, 20]
        d = [float(r["distance_m"]) for r in table]
        assert all(a < b for a, b in zip(d, d[1:]))

    def test_empty_range(self, capsys):
        code, _, err = run(capsys, "sweep", "--platform", "Ti:LN", "--from", "20ps", "--to", "4ps")
        assert code == 2 and "empty" in err

    def test_all_platforms_to_directory(self, capsys, tmp_path):
        code, _, _ = run(capsys, "sweep", "--platform", "all", "--from", "20ps", "--to", "20ps",
                         "--output-dir", str(tmp_path))
        assert code == 0
        files = sorted(p.name for p in tmp_path.iterdir())
        assert files == ["SiN.csv", "SoI.csv", "TFLN.csv", "Ti_LN.csv"]

    def test_all_rows_fail_exit_3(self, capsys, tmp_path):
        doc = get_platform("TFLN").to_dict()
        doc.update(name="lossy")
        doc["pump"]["loss_db_per_cm"] = doc["signal"]["loss_db_per_cm"] = 10.0
        f = tmp_path / "lossy.json"
        f.write_text(json.dumps(doc))
        code, out, _ = run(capsys, "sweep", "--platform", "lossy", "--file", str(f),
                           "--from", "1000ps", "--to", "1000ps")
        assert code == 3
        assert out.splitlines()[0].endswith(",error")

    def test_partial_failure_exit_0(self, capsys, tmp_path):
        doc = get_platform("TFLN").to_dict()
        doc.update(name="lossy")
        doc["pump"]["loss_db_per_cm"] = doc["signal"]["loss_db_per_cm"] = 10.0
        f = tmp_path / "lossy.json"
        f.write_text(json.dumps(doc))
        code, out, _ = run(capsys, "sweep", "--platform", "lossy", "--file", str(f),
                           "--from", "4ps", "--to", "1000ps", "--step", "996ps")
        assert code == 0
        table = rows(out)
        assert table[0]["error"] == "" and "unreachable" in table[1]["error"]


class TestProfile:
    def test_columns_and_areas(self, capsys):
        code, out, _ = run(capsys, "profile", "--platform", "Ti:LN", "--propagation-time", "200ps",
                           "--jitter", "8ps")
        assert code == 0
        assert out.splitlines()[0].split(",") == PROFILE_COLUMNS
        data = np.loadtxt(io.StringIO(out), delimiter=",", skiprows=1)
        t = data[:, 0]
        cum_s, cum_p = data[:, 3], data[:, 4]
        js, jp = data[:, 5], data[:, 6]
        # densities are per ps, so integrating over t_ps gives probabilities
        assert trapezoid(js, t) == pytest.approx(cum_s[-1], rel=1e-4)
        assert trapezoid(jp, t) == pytest.approx(cum_p[-1], rel=1e-4)
        # the signal leads the pump
        assert t[np.argmax(data[:, 1])] < t[np.argmax(data[:, 2])]

    def test_zero_length_coincident(self, capsys):
        code, out, _ = run(capsys, "profile", "--platform", "Ti:LN", "--length", "0mm")
        assert code == 0
        data = np.loadtxt(io.StringIO(out), delimiter=",", skiprows=1)
        assert data[np.argmax(data[:, 1]), 0] == data[np.argmax(data[:, 2]), 0]
        assert data[-1, 3] == pytest.approx(click_probability(0.1), rel=1e-6)

    def test_needs_exactly_one_length(self, capsys):
        code, _, _ = run(capsys, "profile", "--platform", "Ti:LN")
        assert code == 2

    def test_negative_length(self, capsys):
        code, _, _ = run(capsys, "profile", "--platform", "Ti:LN", "--length", "-1mm")
        assert code == 2


class TestLoopSim:
    def test_csv_layout(self, capsys):
        code, out, _ = run(capsys, "loop-sim", "--trials", "20000", "--seed", "1")
        assert code == 0
        hist, centroids = out.split("\n\n")
        assert hist.splitlines()[0] == "bin_start_ns,counts_signal,counts_pump"
        assert centroids.splitlines()[0] == "round_trip,t_signal_ns,t_pump_ns,separation_ns"

    def test_repeatable(self, capsys, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        run(capsys, "loop-sim", "--trials", "20000", "--seed", "9", "-o", str(a))
        run(capsys, "loop-sim", "--trials", "20000", "--seed", "9", "-o", str(b))
        assert a.read_bytes() == b.read_bytes()

    def test_zero_trials(self, capsys):
        code, _, err = run(capsys, "loop-sim", "--trials", "0")
        assert code == 2 and "trials" in err

    def test_config_errors_exit_2(self, capsys, tmp_path):
        cfg = tmp_path / "loop.yaml"
        cfg.write_text("loop:\n  bins: 60\n")
        code, _, err = run(capsys, "loop-sim", "--config", str(cfg), "--trials", "10")
        assert code == 2 and "overrun" in err

    def test_json(self, capsys):
        code, out, _ = run(capsys, "loop-sim", "--trials", "20000", "--json")
        assert code == 0
        assert json.loads(out)["trials"] == 20000
