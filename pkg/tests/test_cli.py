import math
import subprocess
import sys

import numpy as np
import pytest

from csdlab import io
from csdlab.cli import build_parser, main
from csdlab.config import SCHEMA, keys_for

SMALL = ["--N", "16", "--T", "0.05", "--dt", "0.01", "--stride", "2"]


def files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


class TestHelp:
    @pytest.mark.parametrize("command", ["simulate", "probe", "convergence", "selftest"])
    def test_every_flag_documented(self, command, capsys):
        with pytest.raises(SystemExit) as exc:
            main([command, "--help"])
        assert exc.value.code == 0
        text = capsys.readouterr().out
        for key in keys_for(command):
            if key.name != "probe":
                assert f"--{key.name}" in text
        assert "exit codes" in text and "CSD_THREADS" in text

    def test_probe_flags_from_interface(self):
        sub = build_parser()._subparsers._group_actions[0].choices["probe"]
        flags = {o for a in sub._actions for o in a.option_strings}
        for name in ("s", "a", "q", "r", "alpha", "trials", "scales", "seed", "interval"):
            assert f"--{name}" in flags

    def test_console_script(self):
        out = subprocess.run([sys.executable, "-m", "csdlab.cli", "--version"], capture_output=True, text=True)
        assert out.returncode == 0 and out.stdout.startswith("csdlab ")


class TestExitCodes:
    def test_config_errors_exit_2(self, tmp_path, capsys):
        assert main(["simulate", "--outdir", str(tmp_path), "--s", "0.1"]) == 2
        assert "'s'" in capsys.readouterr().err
        assert main(["simulate"]) == 2
        assert "outdir" in capsys.readouterr().err
        (tmp_path / "bad.cfg").write_text("outdir = x\nfrobnicate = 1\n")
        assert main(["simulate", "--config", str(tmp_path / "bad.cfg")]) == 2
        assert "frobnicate" in capsys.readouterr().err
        assert main(["simulate", "--outdir", str(tmp_path), "--N", "sixteen"]) == 2

    def test_argparse_errors_exit_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["probe", "no_such_probe", "--outdir", "x"])
        assert exc.value.code == 2

    def test_bad_probe_exponents_exit_2(self, tmp_path):
        assert main(["probe", "N_estimate", "--outdir", str(tmp_path), "--s", "0.1"]) == 2
        assert main(["probe", "homogeneous_product", "--outdir", str(tmp_path), "--s1", "0.5"]) == 2

    def test_duplicate_key_warns(self, tmp_path, capsys):
        (tmp_path / "c.cfg").write_text(f"outdir = {tmp_path / 'o'}\nN = 8\nN = 16\nT = 0.02\ndt = 0.01\n")
        assert main(["simulate", "--config", str(tmp_path / "c.cfg")]) == 0
        assert "duplicate key 'N'" in capsys.readouterr().err
        assert "N = 16" in (tmp_path / "o" / "config.resolved").read_text()

    def test_blowup_exit_3_with_partial_report(self, tmp_path):
        code = main(["simulate", "--outdir", str(tmp_path), "--N", "16", "--norm", "100", "--dt", "0.05",
                     "--T", "2", "--snapshots", "false"])
        assert code == 3
        summary = (tmp_path / "summary.txt").read_text()
        assert "status = blowup" in summary and "blowup_t" in summary
        assert len(io.read_csv(tmp_path / "report.csv")) >= 1

    def test_selftest_fault_exit_1(self, capsys):
        assert main(["selftest", "--inject-fault", "gamma"]) == 1
        assert "FAIL  gamma_algebra" in capsys.readouterr().out


class TestSimulate:
    def test_outputs(self, tmp_path):
        assert main(["simulate", "--outdir", str(tmp_path)] + SMALL) == 0
        names = set(files(tmp_path))
        assert {"config.resolved", "report.csv", "summary.txt"} <= names
        snaps = sorted(n for n in names if n.endswith(".csdf"))
        assert snaps == ["snap_00000.csdf", "snap_00001.csdf", "snap_00002.csdf", "snap_00003.csdf"]
        psi, grid, t = io.read_snapshot(tmp_path / snaps[-1])
        assert psi.shape == (2, 16, 16) and t == pytest.approx(0.05)
        rows = io.read_csv(tmp_path / "report.csv")
        assert list(rows[0]) == ["t", "charge", "hs_norm", "res_coulomb", "res_curl", "res_dynamic", "source_hs"]
        assert [float(r["t"]) for r in rows] == pytest.approx([0, 0.02, 0.04, 0.05])
        assert float(rows[0]["hs_norm"]) == pytest.approx(1.0)
        assert max(float(r["res_curl"]) for r in rows) < 1e-10

    def test_no_gauge_input(self):
        assert not any(k.name.startswith("A") for k in SCHEMA.values())

    def test_bit_reproducible(self, tmp_path):
        args = ["simulate", "--outdir", str(tmp_path), "--data", "random", "--seed", "9"] + SMALL
        assert main(args) == 0
        first = files(tmp_path)
        assert main(args) == 0
        assert files(tmp_path) == first

    def test_seed_changes_random_data(self, tmp_path):
        for seed in ("1", "2"):
            main(["simulate", "--outdir", str(tmp_path / seed), "--data", "random", "--seed", seed] + SMALL)
        a = io.read_snapshot(tmp_path / "1" / "snap_00000.csdf")[0]
        b = io.read_snapshot(tmp_path / "2" / "snap_00000.csdf")[0]
        assert not np.array_equal(a, b)


class TestProbe:
    ARGS = ["--N", "32", "--trials", "3", "--scales", "1,2,4", "--nt", "9"]

    def test_outputs_and_reproducible(self, tmp_path):
        args = ["probe", "bilinear_strichartz", "--outdir", str(tmp_path)] + self.ARGS
        assert main(args) in (0, 1)
        first = files(tmp_path)
        rows = io.read_csv(tmp_path / "records.csv")
        assert len(rows) == 3 * 3 * 2
        assert {"probe", "series", "scale", "seed", "lhs", "rhs", "ratio"} <= set(rows[0])
        summary = (tmp_path / "summary.txt").read_text()
        for key in ("+.max_ratio", "+.mean_ratio", "+.slope", "sanity_gates = true", "status"):
            assert key in summary
        main(args)
        assert files(tmp_path) == first


class TestConvergence:
    def test_linear_is_exact_in_time(self, tmp_path):
        # massless: the mass term lives in the source and is integrated by RK4
        code = main(["convergence", "--outdir", str(tmp_path), "--N", "16", "--T", "0.2", "--dt", "0.05",
                     "--nonlinear", "false"])
        assert code == 0
        kv = dict(line.split(" = ") for line in (tmp_path / "summary.txt").read_text().splitlines())
        assert float(kv["temporal_error_dt"]) < 1e-13
        assert {r["kind"] for r in io.read_csv(tmp_path / "convergence.csv")} == {"time", "space"}

    def test_smooth_small_data_order_four(self, tmp_path):
        code = main(["convergence", "--outdir", str(tmp_path), "--N", "32", "--T", "0.5", "--dt", "0.05",
                     "--norm", "3", "--m", "1"])
        assert code == 0
        kv = dict(line.split(" = ") for line in (tmp_path / "summary.txt").read_text().splitlines())
        assert abs(float(kv["temporal_order"]) - 4) <= 0.3

    def test_spectral_accuracy(self, tmp_path):
        errs = []
        for n in ("32", "64"):
            main(["convergence", "--outdir", str(tmp_path / n), "--N", n, "--T", "0.2", "--dt", "0.05",
                  "--norm", "3", "--m", "1"])
            kv = dict(line.split(" = ") for line in (tmp_path / n / "summary.txt").read_text().splitlines())
            errs.append(float(kv["spatial_error"]))
        assert errs[1] < 1e-3 * errs[0]

    def test_blowup_partial_report(self, tmp_path):
        code = main(["convergence", "--outdir", str(tmp_path), "--N", "16", "--T", "2", "--dt", "0.05",
                     "--norm", "100"])
        assert code == 3
        assert "status = blowup" in (tmp_path / "summary.txt").read_text()
        assert not math.isnan(float(dict(l.split(" = ") for l in
                                         (tmp_path / "summary.txt").read_text().splitlines())["blowup_t"]))
