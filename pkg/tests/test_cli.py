import csv
import io
import json
import subprocess
import sys

import pytest

from cfqnet import cli
from cfqnet.cli import REPEATER_COLUMNS, UsageError, emit_json, main, parse_range


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_range():
    assert parse_range("0..3", integer=True) == [0, 1, 2, 3]
    assert parse_range("0.8..1.0:0.05") == [0.8, 0.85, 0.9, 0.95, 1.0]
    assert parse_range("2e8") == [2e8]
    for bad in ("1..0", "a..b", "0..1:0", "0..1:-1"):
        with pytest.raises(UsageError):
            parse_range(bad)
    with pytest.raises(UsageError):
        parse_range("0.5..2", integer=True)


def test_verify_hh_statistics(capsys):
    code, out, _ = run(["verify", "--pol", "HH", "--trials", "100000", "--seed", "42", "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert set(doc) == {"command", "parameters", "results", "checks"}
    freqs = doc["results"]["statistics"]["frequencies"]
    assert abs(freqs["psi_plus"] - 0.5) < 3 * (0.25 / 1e5) ** 0.5
    assert freqs["phi_plus"] == freqs["phi_minus"] == 0.0
    for branch in doc["results"]["branches"].values():
        assert branch["photon_concurrence"] == pytest.approx(1.0, abs=1e-10)
    assert all(c["pass"] for c in doc["checks"])
    for c in doc["checks"]:
        assert set(c) == {"name", "pass", "expected", "actual", "tolerance"}


def test_verify_vv_prints_cross_polarized_state(capsys):
    code, out, _ = run(["verify", "--pol", "VV", "--seed", "1", "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    assert set(doc["results"]["checkpoints"]["T2"]) == {"0011", "1100"}
    assert all(b["photon_concurrence"] == pytest.approx(1.0) for b in doc["results"]["branches"].values())


def test_verify_rejects_bad_polarization(capsys):
    code, _, err = run(["verify", "--pol", "HX"], capsys)
    assert code == 2
    assert "polarization" in err


def test_verify_requires_seed_for_statistics(capsys):
    code, _, err = run(["verify", "--trials", "10"], capsys)
    assert code == 2
    assert "--seed" in err


def test_verify_lossy_gates(capsys):
    code, out, _ = run(["verify", "--trials", "3000", "--seed", "5", "--gate-p", "0.9", "--format", "json"], capsys)
    assert code == 0
    doc = json.loads(out)
    abort = next(c for c in doc["checks"] if c["name"] == "abort_frequency")
    assert abort["expected"] == pytest.approx(0.19)


def test_repeater_point(capsys):
    code, out, _ = run(["repeater", "--n", "1", "--gate-p", "1", "--eta", "1", "--L0", "1000", "--c", "2e8", "--format", "json"], capsys)
    assert code == 0
    (row,) = json.loads(out)["results"]
    assert row["p_eff"] == 0.5
    assert row["t_tot_eff"] == pytest.approx(3.375e-5, rel=1e-12)


def test_repeater_csv_rows(capsys):
    code, out, _ = run(["repeater", "--n", "0..3", "--gate-p", "0.9", "--eta", "0.9", "--format", "csv"], capsys)
    assert code == 0
    assert out.endswith("\n")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert out.splitlines()[0].split(",") == REPEATER_COLUMNS
    assert [int(r["n"]) for r in rows] == [0, 1, 2, 3]
    assert float(rows[2]["p_eff"]) == pytest.approx(0.13286025)
    assert float(rows[1]["t_tot_eff"]) == pytest.approx(23.899766589937002)


def test_repeater_divergence_is_flagged(capsys):
    code, out, _ = run(["repeater", "--eta", "0", "--format", "csv"], capsys)
    assert code == 0
    (row,) = csv.DictReader(io.StringIO(out))
    assert row["t_tot_eff"] == "divergent"
    assert row["consistency_residual"] == "divergent"
    code, out, _ = run(["repeater", "--node-p", "0", "--format", "json"], capsys)
    assert json.loads(out)["results"][0]["t_tot_nodes"] == "divergent"


def test_repeater_per_gate_list(capsys):
    code, out, _ = run(["repeater", "--n", "1", "--gate-p", "1,0.5,1,0.5", "--format", "json"], capsys)
    assert code == 0
    assert json.loads(out)["results"][0]["p_eff"] == pytest.approx(0.125)
    code, _, err = run(["repeater", "--n", "1", "--gate-p", "1,0.5", "--format", "json"], capsys)
    assert code == 2


def test_montecarlo_n1(capsys):
    code, out, _ = run(["montecarlo", "--n", "1", "--gate-p", "1", "--trials", "100000", "--seed", "7", "--format", "json"], capsys)
    assert code == 0
    res = json.loads(out)["results"]
    assert abs(res["z_score"]) <= 3
    assert res["p_eff"] == 0.5
    assert set(res) >= {"success_rate", "stderr", "p_eff", "z_score", "stage_breakdown", "mean_fidelity_given_success"}


def test_montecarlo_cap(capsys):
    code, _, err = run(["montecarlo", "--n", "4", "--seed", "1"], capsys)
    assert code == 2
    assert "statevector cap" in err


def test_failed_check_exits_one(capsys, monkeypatch):
    # a wrong analytic value makes the z check fail
    monkeypatch.setattr(cli.repeater, "p_eff", lambda n, probs: 0.1)
    code, out, _ = run(["montecarlo", "--n", "1", "--trials", "2000", "--seed", "3"], capsys)
    assert code == 1
    assert "[FAIL] success_rate_z" in out


def test_montecarlo_requires_seed(capsys):
    code, _, _ = run(["montecarlo", "--n", "1"], capsys)
    assert code == 2


def test_sweep_counts(capsys):
    code, out, _ = run(["sweep", "--n", "0..3", "--etaD", "0.8..1.0:0.05", "--format", "json"], capsys)
    assert code == 0
    assert len(json.loads(out)["results"]) == 20


def test_sweep_p_eff_increasing(capsys):
    code, out, _ = run(["sweep", "--n", "1", "--gate-p", "0.5..1.0:0.1", "--format", "csv"], capsys)
    assert code == 0
    values = [float(r["p_eff"]) for r in csv.DictReader(io.StringIO(out))]
    assert len(values) == 6
    assert all(a < b for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("argv", [["sweep", "--n", "1..0"], ["sweep", "--n", "1"], ["sweep", "--etaD", "0.8..x"]])
def test_sweep_usage_errors(argv, capsys):
    code, _, _ = run(argv, capsys)
    assert code == 2


@pytest.mark.parametrize("argv", [
    ["verify", "--trials", "500", "--seed", "3", "--format", "json"],
    ["repeater", "--n", "0..3", "--gate-p", "0.9", "--eta", "0.9", "--format", "json"],
    ["montecarlo", "--n", "2", "--gate-p", "0.9", "--trials", "500", "--seed", "7", "--format", "json"],
    ["sweep", "--n", "0..2", "--eta", "0.9..1.0:0.05", "--format", "json"],
])
def test_json_round_trip(argv, capsys):
    _, out, _ = run(argv, capsys)
    assert emit_json(json.loads(out)) == out


def test_out_file(tmp_path, capsys):
    target = tmp_path / "r.csv"
    code, out, _ = run(["repeater", "--format", "csv", "--out", str(target)], capsys)
    assert code == 0 and out == ""
    assert target.read_text().startswith("n,gate_p")


def test_text_format(capsys):
    code, out, _ = run(["montecarlo", "--n", "1", "--trials", "200", "--seed", "2", "--format", "text"], capsys)
    assert code == 0
    assert "[PASS] success_rate_z" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cfqnet", "repeater", "--format", "csv"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0].startswith("n,gate_p")
