import json
import subprocess
import sys

import numpy as np
import pytest

from committee_sortition import bounds
from committee_sortition.cli import EXIT_INFEASIBLE, EXIT_OK, EXIT_REJECTED, EXIT_USAGE, main
from committee_sortition.simulator import ScenarioConfig, run_scenario


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


class TestBound:
    def test_headline_numbers(self, capsys):
        code, out, _ = run(capsys, "bound", "--t", "0.7", "--ve", "4000", "--F", "1e-12", "--exact",
                           "--format", "json")
        data = json.loads(out)
        assert code == EXIT_OK
        assert data["c_approx"] == pytest.approx(0.8054, abs=1e-3)
        assert data["c_exact"] == pytest.approx(0.797, abs=5e-3)
        assert data["c_combined_closed"] is None

    def test_table_lists_every_field(self, capsys):
        code, out, _ = run(capsys, "bound", "--t", "0.7", "--ve", "4000", "--F", "1e-12")
        assert code == EXIT_OK
        names = [line.split()[0] for line in out.splitlines()]
        for field in ("c_honest_closed", "c_combined_closed", "c_combined_numeric", "c_approx", "c_exact"):
            assert field in names

    def test_f_one_degenerates_to_t(self, capsys):
        code, out, _ = run(capsys, "bound", "--t", "0.7", "--ve", "4000", "--F", "1", "--format", "json")
        assert code == EXIT_OK
        assert json.loads(out)["c_approx"] == pytest.approx(0.7)

    def test_infeasible(self, capsys):
        code, out, _ = run(capsys, "bound", "--t", "0.99", "--ve", "100", "--F", "1e-18", "--format", "json")
        assert code == EXIT_INFEASIBLE
        assert json.loads(out)["c_approx"] > 1

    @pytest.mark.parametrize("argv", [
        ["bound", "--t", "0.7", "--ve", "4000"],
        ["bound", "--t", "x", "--ve", "4000", "--F", "1e-12"],
        ["bound", "--t", "1.5", "--ve", "4000", "--F", "1e-12"],
        ["bound", "--t", "0.7", "--ve", "4000", "--F", "0"],
        ["nonsense"],
        [],
    ])
    def test_usage_errors(self, capsys, argv):
        with pytest.raises(SystemExit) as info:
            code = main(argv)
            raise SystemExit(code)
        assert info.value.code == EXIT_USAGE


class TestSweep:
    def test_figure_one(self, capsys, tmp_path):
        path = tmp_path / "fig1.csv"
        code, out, _ = run(capsys, "sweep", "--kind", "t", "--from", "0.55", "--to", "0.9", "--step", "0.01",
                           "--ve", "4000", "--F", "1e-12", "--out", str(path))
        assert code == EXIT_OK
        assert "36 rows" in out
        table = bounds.SweepTable.from_csv(path.read_text())
        assert len(table.rows) == 36
        i = int(np.argmin(abs(table.column("t") - 0.7)))
        assert table.column("c_approx")[i] == pytest.approx(0.8054, abs=1e-3)

    def test_figure_two(self, capsys):
        code, out, err = run(capsys, "sweep", "--kind", "failure", "--t", "0.7", "--ve", "4000",
                             "--from", "0.6", "--to", "0.95")
        assert code == EXIT_OK and "36 rows" in err
        table = bounds.SweepTable.from_csv(out)
        x, y = table.column("malicious_fraction"), table.column("log10_failure")
        assert y[np.argmin(abs(x - 0.20))] == pytest.approx(-12, abs=1)

    def test_empty_grid(self, capsys):
        code, _, err = run(capsys, "sweep", "--kind", "t", "--from", "0.9", "--to", "0.5",
                           "--ve", "4000", "--F", "1e-12")
        assert code == EXIT_USAGE and "error" in err

    def test_missing_fixed_params(self, capsys):
        code, _, _ = run(capsys, "sweep", "--kind", "failure", "--from", "0.6", "--to", "0.9", "--ve", "4000")
        assert code == EXIT_USAGE

    def test_unwritable_path(self, capsys, tmp_path):
        code, _, _ = run(capsys, "sweep", "--kind", "t", "--from", "0.6", "--to", "0.7", "--ve", "4000",
                         "--F", "1e-12", "--no-exact", "--out", str(tmp_path / "missing" / "x.csv"))
        assert code == EXIT_USAGE

    def test_csv_round_trip_ten_digits(self, capsys):
        code, out, _ = run(capsys, "sweep", "--kind", "t", "--from", "0.55", "--to", "0.9", "--ve", "4000",
                           "--F", "1e-12")
        memory = bounds.sweep_t(bounds.grid(0.55, 0.9, 0.01), 4000, 1e-12)
        parsed = bounds.SweepTable.from_csv(out)
        for a, b in zip(parsed.rows, memory.rows):
            for x, y in zip(a, b):
                assert float(f"{x:.10g}") == float(f"{y:.10g}")

    def test_json_format(self, capsys):
        code, out, _ = run(capsys, "sweep", "--kind", "t", "--from", "0.6", "--to", "0.62", "--ve", "4000",
                           "--F", "1e-12", "--format", "json")
        assert code == EXIT_OK
        assert len(bounds.SweepTable.from_json(out).rows) == 3

    def test_deterministic(self, capsys):
        argv = ["sweep", "--kind", "failure", "--t", "0.7", "--ve", "400", "--from", "0.6", "--to", "0.9"]
        assert run(capsys, *argv)[1] == run(capsys, *argv)[1]


class TestSimulate:
    def test_bundled(self, capsys, tmp_path):
        out_path = tmp_path / "report.json"
        code, _, _ = run(capsys, "simulate", "bundled", "--out", str(out_path))
        data = json.loads(out_path.read_text())
        assert code == EXIT_OK
        assert data["chernoff_ok_p1"] and data["chernoff_ok_p2"]
        assert data["ci_contains_exact_p1"] and data["ci_contains_exact_p2"]
        assert data["scenario"]["trials"] == 1_000_000

    def test_table_format_and_seed(self, capsys):
        a = run(capsys, "simulate", "bundled", "--trials", "20000", "--seed", "5", "--format", "table")
        b = run(capsys, "simulate", "bundled", "--trials", "20000", "--seed", "5", "--workers", "3",
                "--format", "table")
        assert a[0] == EXIT_OK and a[1] == b[1]
        assert "p1_hat" in a[1]

    def test_refuses_unestimable(self, capsys):
        code, _, err = run(capsys, "simulate", "bundled", "--trials", "1000")
        assert code == EXIT_USAGE
        assert "10000 trials" in err

    def test_single_trial(self, capsys):
        # estimability needs F >= 10 / trials, so the CLI refuses one trial outright
        code, _, err = run(capsys, "simulate", "bundled", "--trials", "1")
        assert code == EXIT_USAGE and "refused" in err
        from committee_sortition.cli import bundled_scenario_path
        config = ScenarioConfig.load(bundled_scenario_path())
        config.trials = 1
        est = run_scenario(config)
        for hat, (lo, hi) in ((est.p1_hat, est.p1_interval), (est.p2_hat, est.p2_interval)):
            assert 0 <= lo <= hat <= hi <= 1 and hi - lo > 0.8

    def test_malformed_scenario(self, capsys, tmp_path):
        path = tmp_path / "s.json"
        path.write_text('{"population": {"aggregate": {"R": 10}}, "params": {}, "trials": 5}')
        code, _, err = run(capsys, "simulate", str(path))
        assert code == EXIT_USAGE
        assert "scenario.population.aggregate: missing field 'c'" in err

    def test_missing_file(self, capsys, tmp_path):
        code, _, err = run(capsys, "simulate", str(tmp_path / "nope.json"))
        assert code == EXIT_USAGE and "cannot read" in err


class TestSortition:
    def select(self, capsys, path, resource="100", key="alice"):
        return run(capsys, "sortition", "select", "--key", key, "--seed", "round-7", "--role", "committee",
                   "--resource", resource, "--p", "0.05", "--out", str(path))

    def test_round_trip(self, capsys, tmp_path):
        path = tmp_path / "proof.bin"
        code, out, _ = self.select(capsys, path)
        assert code == EXIT_OK and 0 <= int(out) <= 100
        code, out, _ = run(capsys, "sortition", "verify", "--proof", str(path), "--resource", "100", "--p", "0.05")
        assert code == EXIT_OK and out.strip() == "true"

    def test_deterministic(self, capsys, tmp_path):
        self.select(capsys, tmp_path / "a")
        self.select(capsys, tmp_path / "b")
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    def test_flipped_bytes_reject(self, capsys, tmp_path):
        path = tmp_path / "proof.bin"
        self.select(capsys, path)
        raw = path.read_bytes()
        codes = set()
        for i in range(0, len(raw), 5):
            bad = bytearray(raw)
            bad[i] ^= 0x01
            path.write_bytes(bytes(bad))
            code, _, _ = run(capsys, "sortition", "verify", "--proof", str(path), "--resource", "100", "--p", "0.05")
            codes.add(code)
        # flips in length prefixes break parsing (exit 1); the rest fail verification (exit 3)
        assert EXIT_OK not in codes and EXIT_REJECTED in codes

    def test_wrong_resource_rejects(self, capsys, tmp_path):
        path = tmp_path / "proof.bin"
        self.select(capsys, path)
        code, out, _ = run(capsys, "sortition", "verify", "--proof", str(path), "--resource", "5000", "--p", "0.05")
        assert code in (EXIT_OK, EXIT_REJECTED)
        assert out.strip() == ("true" if code == EXIT_OK else "false")

    def test_zero_resource(self, capsys, tmp_path):
        path = tmp_path / "proof.bin"
        code, out, _ = self.select(capsys, path, resource="0")
        assert code == EXIT_OK and out.strip() == "0"
        code, _, _ = run(capsys, "sortition", "verify", "--proof", str(path), "--resource", "0", "--p", "0.05")
        assert code == EXIT_OK

    def test_malformed_file(self, capsys, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"\x00\x01garbage")
        code, _, err = run(capsys, "sortition", "verify", "--proof", str(path), "--resource", "1", "--p", "0.5")
        assert code == EXIT_USAGE and "malformed" in err


def test_repro(capsys, tmp_path):
    code, out, _ = run(capsys, "repro", "--out-dir", str(tmp_path))
    assert code == EXIT_OK
    for name in ("bound.json", "fig1_t_vs_c.csv", "fig2_malicious_vs_failure.csv", "summary.txt"):
        assert (tmp_path / name).exists()
    assert json.loads((tmp_path / "bound.json").read_text())["c_exact"] == pytest.approx(0.797, abs=5e-3)
    assert "c_approx" in out


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "committee_sortition", "bound", "--t", "0.7", "--ve", "4000",
                           "--F", "1e-12", "--format", "json"], capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["c_approx"] == pytest.approx(0.8054, abs=1e-3)
