import csv
import io
import json
import math
import os
import subprocess
import sys

import numpy as np
import pytest

from qwork.analysis import ThermoSummary
from qwork.cli import parse_range, run, UsageError

SMALL = ["--nc", "0.1", "--nm", "1.0"]


def _json(capsys, argv):
    code = run(argv)
    out = capsys.readouterr().out
    assert code == 0
    return json.loads(out), out


def test_zero_coupling_distribution(capsys):
    doc, _ = _json(capsys, ["dist", "--kind", "linear", "--g", "0"])
    assert doc["atoms"] == [[0.0, 1.0]]
    assert doc["deficit"] == 0.0
    assert set(doc) >= {"params", "truncation", "deficit", "units"}
    assert doc["units"]["work"] == "hbar*omega_m"


def test_dist_schema_and_normalization(capsys):
    doc, _ = _json(capsys, ["dist", *SMALL, "--g", "0.3"])
    atoms = np.array(doc["atoms"])
    assert atoms.shape[1] == 2
    assert np.all(np.diff(atoms[:, 0]) > 0)
    assert atoms[:, 1].sum() == pytest.approx(1 - doc["deficit"], abs=1e-14)
    assert doc["params"]["kind"] == "linear"
    assert doc["truncation"]["tail_tol"] == 1e-12


def test_chi_payload(capsys):
    doc, _ = _json(capsys, ["chi", *SMALL, "--kind", "quadratic", "--kappa", "0.3", "--u-count", "9"])
    chi = np.array(doc["chi"])
    assert chi.shape == (9, 3)
    assert chi[0].tolist() == [0.0, 1.0, 0.0]
    assert chi[-1, 0] == pytest.approx(4 * math.pi)


def test_moments_and_free_energy(capsys):
    doc, _ = _json(capsys, ["moments", *SMALL, "--kind", "quadratic", "--kappa", "0.3"])
    assert doc["moments"]["mean"] > 0
    doc, _ = _json(capsys, ["free-energy", *SMALL, "--kind", "quadratic", "--kappa", "0.3"])
    assert doc["free_energy"]["delta_f"] == pytest.approx(0.04734925077129707, rel=1e-10)


def test_check_summary(capsys):
    doc, _ = _json(capsys, ["check", *SMALL, "--kind", "quadratic", "--kappa", "0.3"])
    s = doc["summary"]
    assert s["jarzynski_residual"] <= 1e-6
    assert s["w_irr"] == pytest.approx(s["mean"] - s["delta_f"])


def test_round_trip_summary(capsys):
    doc, _ = _json(capsys, ["check", *SMALL, "--g", "0.3"])
    summary = ThermoSummary(**doc["summary"])
    again = json.loads(json.dumps(summary.to_dict()))
    assert ThermoSummary(**again) == summary


def test_nan_is_serialized_as_null(capsys):
    doc, out = _json(capsys, ["moments", "--omega-c", "1000", "--beta", "1", "--g", "0.3"])
    assert doc["moments"]["skewness"] is None
    assert "NaN" not in out


def test_deterministic_output(capsys):
    argv = ["coarse-grain", *SMALL, "--g", "0.3", "--width", "0.5"]
    _, first = _json(capsys, argv)
    _, second = _json(capsys, argv)
    assert first == second


def test_coarse_grain_methods(capsys):
    doc, _ = _json(capsys, ["coarse-grain", *SMALL, "--g", "0.3", "--method", "cdf"])
    assert doc["density_info"]["kernel"] == "cdf-moving-average"
    doc, _ = _json(capsys, ["coarse-grain", *SMALL, "--g", "0.3", "--kernel", "lorentzian"])
    assert doc["density_info"]["lorentzian_cutoff_widths"] == 40.0


def test_csv_output(capsys):
    assert run(["dist", *SMALL, "--g", "0.3", "--format", "csv"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0] == ["work", "probability"]
    assert all("," not in c and float(c) == float(c) for r in rows[1:] for c in r)
    assert run(["check", *SMALL, "--g", "0.3", "--format", "csv"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0][:2] == ["mean", "variance"] and len(rows) == 2


def test_output_file(tmp_path, capsys):
    path = tmp_path / "atoms.json"
    assert run(["dist", *SMALL, "--g", "0.2", "-o", str(path)]) == 0
    assert capsys.readouterr().out == ""
    assert json.loads(path.read_text())["atoms"]
    assert [p.name for p in tmp_path.iterdir()] == ["atoms.json"]


def test_guard_leaves_no_file(tmp_path, capsys):
    path = tmp_path / "df.json"
    code = run(["free-energy", "--g", "1.2", "--omega-c", "100", "-o", str(path)])
    assert code == 1
    assert "unbounded-spectrum" in capsys.readouterr().err
    assert list(tmp_path.iterdir()) == []


@pytest.mark.parametrize("argv", [
    ["nonsense"],
    ["dist", "--g", "abc"],
    ["dist", "--nm", "-1"],
    ["dist", "--g", "0:1:3"],
    ["sweep", "--g", "0:1:3", "--beta", "log:1e-3:1e-1:3"],
    ["sweep", "--g", "0.1"],
    ["sweep", "--g", "0:1:0"],
    ["coarse-grain", "--g", "0.1", "--width", "0"],
    ["chi", "--g", "0.1", "--u-count", "0"],
])
def test_usage_errors(argv, capsys):
    assert run(argv) == 2


def test_parse_range():
    np.testing.assert_allclose(parse_range("0:1:5"), [0, 0.25, 0.5, 0.75, 1])
    np.testing.assert_allclose(parse_range("log:1:100:3"), [1, 10, 100])
    with pytest.raises(UsageError):
        parse_range("log:0:1:3")


def test_sweep_single_point_matches_check(capsys):
    sweep, _ = _json(capsys, ["sweep", *SMALL, "--g", "0.3:0.3:1"])
    check, _ = _json(capsys, ["check", *SMALL, "--g", "0.3"])
    assert len(sweep["rows"]) == 1
    assert sweep["rows"][0]["summary"] == check["summary"]
    assert sweep["rows"][0]["truncation"] == check["truncation"]


def test_sweep_temperature_and_workers(capsys):
    argv = ["sweep", "--g", "0.5", "--beta", "log:1e-3:1e-2:3"]
    serial, _ = _json(capsys, argv)
    parallel, _ = _json(capsys, [*argv, "--workers", "2"])
    assert serial == parallel
    w = [r["summary"]["w_irr"] for r in serial["rows"]]
    assert w[0] > w[1] > w[2] > 0
    df = [r["summary"]["delta_f"] for r in serial["rows"]]
    assert all(d < 0 for d in df)


def test_sweep_displacement_trend(capsys):
    doc, _ = _json(capsys, ["sweep", *SMALL, "--g", "0.2", "--E", "0:0.6:4"])
    w = [r["summary"]["w_irr"] for r in doc["rows"]]
    assert min(w) > 0 and w[-1] > w[0]
    csv_code = run(["sweep", *SMALL, "--g", "0.2", "--E", "0:0.6:4", "--format", "csv"])
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert csv_code == 0 and rows[0][0] == "displacement" and len(rows) == 5


def test_oracle_subcommand(capsys):
    doc, _ = _json(capsys, ["oracle", *SMALL, "--g", "0.3", "--n-max", "3", "--k-max", "40",
                            "--u-count", "5"])
    assert doc["chi"][0][1] == pytest.approx(1.0, abs=1e-14)
    assert len(doc["atoms"]) > 1


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "qwork", "dist", "--g", "0"],
                         capture_output=True, text=True, env={**os.environ, "LC_ALL": "de_DE.UTF-8"})
    assert res.returncode == 0
    assert json.loads(res.stdout)["atoms"] == [[0.0, 1.0]]
