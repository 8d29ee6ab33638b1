"""Command-line surface: exit codes, reports, reproducibility."""
import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from nltdyn import make_gaussian_packet
from nltdyn.cli import main


def run_cli(args):
    try:
        return main(list(args))
    except SystemExit as exc:  # argparse paths
        return int(exc.code or 0)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_version_flag(capsys):
    assert run_cli(["--version"]) == 0
    assert "nltdyn" in capsys.readouterr().out


def test_amplitude_table(tmp_path):
    csv_path = tmp_path / "amp.csv"
    json_path = tmp_path / "amp.json"
    rc = run_cli(["amplitude", "--alpha", "0.25", "--b2", "0.1",
                  "--z", "-1,0", "--z", "-2,0.5",
                  "--csv", str(csv_path), "--json", str(json_path)])
    assert rc == 0
    rows = read_csv(csv_path)
    assert list(rows[0].keys()) == ["re_z", "im_z", "re_t", "im_t"]
    assert len(rows) == 2
    assert float(rows[1]["im_z"]) == 0.5
    report = json.loads(json_path.read_text())
    assert report["config"]["alpha"] == 0.25
    assert report["b1"] == pytest.approx(-0.03582244801567227)


@pytest.mark.parametrize("args", [
    ["amplitude", "--alpha", "0.5", "--a", "-1", "--ga", "1", "--z", "-2"],
    ["amplitude", "--alpha", "1", "--b2", "0.1", "--z", "-2"],  # wrong boundary kind
    ["check", "continuity", "--tol", "notafloat"],
])
def test_invalid_configuration_exits_2(args, tmp_path, capsys):
    assert run_cli(args) == 2


def test_failing_check_exits_1(tmp_path, capsys):
    rc = run_cli(["check", "unitarity", "--pairs", "5", "--tol", "1e-30",
                  "--json", str(tmp_path / "u.json")])
    assert rc == 1
    report = json.loads((tmp_path / "u.json").read_text())
    assert report["passed"] is False


def test_check_report_structure(tmp_path):
    json_path = tmp_path / "c.json"
    rc = run_cli(["check", "continuity", "--json", str(json_path),
                  "--csv", str(tmp_path / "c.csv")])
    assert rc == 0
    report = json.loads(json_path.read_text())
    assert report["check"] == "continuity"
    assert report["passed"] is True
    assert report["version"]
    for entry in report["residuals"]:
        assert set(entry) >= {"name", "value", "tolerance", "passed"}
        assert entry["passed"]


def test_reruns_are_byte_identical(tmp_path, capsys):
    out = []
    for tag in ("a", "b"):
        path = tmp_path / f"ev_{tag}.json"
        rc = run_cli(["evolve", "--alpha", "1", "--a", "-1", "--ga", "1",
                      "--t", "0.5", "--nk", "300", "--csv",
                      str(tmp_path / f"ev_{tag}.csv"), "--json", str(path)])
        assert rc == 0
        out.append(path.read_bytes())
    assert out[0] == out[1]
    assert (tmp_path / "ev_a.csv").read_bytes() == (tmp_path / "ev_b.csv").read_bytes()


def test_config_file_defaults_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("alpha = 1\na = -1\nga = 1\nk0 = 1.1\nnk = 300\n")
    json_path = tmp_path / "ev.json"
    rc = run_cli(["evolve", "--config", str(cfg), "--k0", "1.3", "--t", "0.5",
                  "--csv", str(tmp_path / "ev.csv"), "--json", str(json_path)])
    assert rc == 0
    config = json.loads(json_path.read_text())["config"]
    assert config["alpha"] == 1.0  # from the file
    assert config["k0"] == 1.3     # flag wins over the file


def test_evolve_zero_time_returns_packet(tmp_path):
    csv_path = tmp_path / "ev.csv"
    rc = run_cli(["evolve", "--alpha", "0.25", "--b2", "0.1", "--k0", "1.1",
                  "--sigma", "0.25", "--kmin", "1e-3", "--kmax", "5",
                  "--nk", "400", "--t", "0", "--csv", str(csv_path),
                  "--json", str(tmp_path / "ev.json")])
    assert rc == 0
    rows = read_csv(csv_path)
    psi = make_gaussian_packet(1.1, 0.25, (1e-3, 5.0, 400))
    assert len(rows) == 400
    got = np.array([float(r["re_psi"]) for r in rows])
    np.testing.assert_allclose(got, psi.values.real, atol=1e-13)
    norms = json.loads((tmp_path / "ev.json").read_text())["norms"]
    assert norms[0]["norm"] == pytest.approx(1.0, abs=1e-12)


def test_free_coupling_density_is_static(tmp_path):
    csv_path = tmp_path / "free.csv"
    rc = run_cli(["evolve", "--alpha", "0.25", "--b2", "0", "--c1", "0",
                  "--picture", "schroedinger", "--t", "0.5,1.5", "--nk", "300",
                  "--csv", str(csv_path), "--json", str(tmp_path / "free.json")])
    assert rc == 0
    rows = read_csv(csv_path)
    by_t = {}
    for r in rows:
        by_t.setdefault(r["t"], []).append(float(r["density"]))
    d1, d2 = (np.array(v) for v in by_t.values())
    np.testing.assert_allclose(d1, d2, atol=1e-14)


def test_probe_appendix_d_zero_row(tmp_path):
    csv_path = tmp_path / "probe.csv"
    rc = run_cli(["probe-appendix-d", "--alpha", "0.25", "--b2", "0.1",
                  "--nu", "10", "--t", "0,0.01", "--csv", str(csv_path),
                  "--json", str(tmp_path / "probe.json")])
    assert rc == 0
    rows = read_csv(csv_path)
    assert list(rows[0].keys()) == ["nu", "t", "re", "im", "abs"]
    zero = [r for r in rows if float(r["t"]) == 0.0]
    assert zero and all(float(r["abs"]) == 0.0 for r in zero)


def test_volterra_subcommand(tmp_path):
    csv_path = tmp_path / "vol.csv"
    rc = run_cli(["volterra", "--alpha", "0.25", "--b2", "0.02",
                  "--tau-max", "0.3", "--nodes", "64",
                  "--csv", str(csv_path), "--json", str(tmp_path / "vol.json")])
    assert rc == 0
    rows = read_csv(csv_path)
    assert list(rows[0].keys()) == ["tau", "re_f", "im_f"]
    assert len(rows) == 64


def test_series_subcommand(tmp_path):
    csv_path = tmp_path / "ser.csv"
    rc = run_cli(["series", "--alpha", "0.25", "--b2", "0.01",
                  "--tau", "0.2,0.5,4", "--terms", "20",
                  "--csv", str(csv_path), "--json", str(tmp_path / "ser.json")])
    assert rc == 0
    rows = read_csv(csv_path)
    assert list(rows[0].keys()) == ["tau", "re_series", "im_series", "re_twoterm", "im_twoterm"]
    assert len(rows) == 4


def test_pinned_composition_invocation():
    """End-to-end process run of the documented composition check."""
    proc = subprocess.run(
        [sys.executable, "-m", "nltdyn.cli", "check", "composition",
         "--alpha", "1", "--a", "-1", "--ga", "1", "--times", "2,1,0",
         "--json", "-"],
        capture_output=True, text=True, timeout=300)
    assert proc.returncode == 0, proc.stderr
    report = json.loads(proc.stdout)
    assert report["passed"] is True
