"""
Tests for the command-line entry point.
"""

import argparse
import json

import pytest

from main import build_parser, command_params, main, parse_point, parse_truncation, parse_zeta
from scatterer.export import read_csv


class TestParsing:
    """Argument types."""

    def test_zeta(self):
        assert parse_zeta("1,-2") == (1, -2)

    def test_bad_zeta(self):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_zeta("1;2")

    def test_truncation(self):
        assert parse_truncation("full") == "full"
        assert parse_truncation("2.5") == 2.5

    def test_point(self):
        assert parse_point("0.5,2") == (0.5, 2.0)
        with pytest.raises(argparse.ArgumentTypeError):
            parse_point("0.5")

    def test_equidist_defaults_to_full(self):
        assert build_parser().parse_args(["equidist"]).L == "full"

    def test_command_params(self):
        args = build_parser().parse_args(["sieve", "--zeta", "1,0", "--zeta", "0,1", "--J", "2", "--X", "50"])
        params = command_params(args)
        assert params == {"command": "sieve", "J": 2.0, "verify": False, "zeta": "1,0;0,1"}

    def test_repeated_zeta(self):
        args = build_parser().parse_args(["sieve", "--zeta", "1,0", "--zeta", "0,1", "--J", "2"])
        assert args.zeta == [(1, 0), (0, 1)]
        assert args.J == 2.0


class TestCommands:
    """End-to-end runs into a temporary directory."""

    def test_norms(self, tmp_path, capsys):
        assert main(["norms", "--X", "10", "--out", str(tmp_path)]) == 0
        assert "distinct norms <= 10: 8 (37 lattice vectors)" in capsys.readouterr().out
        norms = read_csv(tmp_path / "norms.csv")
        assert norms["multiplicity"].tolist() == [1, 4, 4, 4, 8, 4, 4, 8]
        summary = json.loads((tmp_path / "norms_summary.json").read_text(encoding="utf-8"))
        assert list(summary)[0] == "header"
        assert summary["distinct_norms"] == 8

    def test_rankone_demo(self, tmp_path, capsys):
        assert main(["rankone", "--demo", "--count", "5", "--out", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "0.381966011250105" in out
        assert "2.618033988749895" in out
        assert (tmp_path / "rankone.csv").exists()

    def test_spectrum(self, tmp_path):
        args = ["spectrum", "--X", "50", "--tail-tol", "1e-4", "--out", str(tmp_path)]
        assert main(args) == 0
        frame = read_csv(tmp_path / "spectrum.csv")
        assert list(frame.columns) == ["k", "n_k", "lambda_k", "n_k1", "residual", "converged"]
        assert ((frame["n_k"] < frame["lambda_k"]) & (frame["lambda_k"] < frame["n_k1"])).all()

    def test_same_config_same_bytes(self, tmp_path):
        for name in ("a", "b"):
            main(["norms", "--X", "30", "--out", str(tmp_path / name)])
        first = (tmp_path / "a" / "norms.csv").read_bytes()
        second = (tmp_path / "b" / "norms.csv").read_bytes()
        assert first == second


class TestExitCodes:
    """Errors map to exit codes 2 (input), 3 (numerics) and 4 (I/O)."""

    def test_phi_at_pi(self, tmp_path, capsys):
        code = main(["spectrum", "--phi", "3.1415926535", "--out", str(tmp_path)])
        assert code == 2
        assert capsys.readouterr().err.startswith("error: domain:")

    def test_bad_lattice(self, tmp_path, capsys):
        assert main(["norms", "--lattice", "0/1", "--out", str(tmp_path)]) == 2

    def test_capacity(self, tmp_path, capsys):
        assert main(["norms", "--X", "1e9", "--out", str(tmp_path)]) == 3
        assert "error: capacity:" in capsys.readouterr().err

    def test_unwritable_output(self, tmp_path, capsys):
        blocker = tmp_path / "file.txt"
        blocker.write_text("x", encoding="utf-8")
        assert main(["norms", "--X", "10", "--out", str(blocker)]) == 4
        assert "error: io:" in capsys.readouterr().err


class TestCommandHeaders:
    """Sub-command options travel into headers and the config hash."""

    def _header(self, path):
        return path.read_text(encoding="utf-8").splitlines()[0]

    def test_samples_in_header(self, tmp_path):
        for samples in ("100", "200"):
            out = str(tmp_path / samples)
            args = ["specfun", "--hi", "10", "--samples", samples, "--tail-tol", "1e-4", "--out", out]
            assert main(args) == 0
        first = self._header(tmp_path / "100" / "specfun.csv")
        second = self._header(tmp_path / "200" / "specfun.csv")
        assert "samples=100" in first
        assert "command=specfun" in first
        assert first.split()[2] != second.split()[2]

    def test_zeta_in_header(self, tmp_path):
        main(["szeta", "--zeta", "1,0", "--X", "64", "--out", str(tmp_path / "a")])
        main(["szeta", "--zeta", "1,1", "--X", "64", "--out", str(tmp_path / "b")])
        first = self._header(tmp_path / "a" / "szeta.csv")
        assert "zeta=1,0" in first
        assert first != self._header(tmp_path / "b" / "szeta.csv")

    def test_json_header_params(self, tmp_path):
        main(["truncation", "--X", "100", "--exponent", "0.5", "--tail-tol", "1e-4", "--out", str(tmp_path)])
        summary = json.loads((tmp_path / "truncation.json").read_text(encoding="utf-8"))
        assert summary["header"]["params"]["exponent"] == 0.5
        assert summary["header"]["params"]["command"] == "truncation"


class TestAnalysisCommands:
    """Density, truncation, norm floor and S_zeta outputs."""

    def test_density(self, tmp_path):
        assert main(["density", "--lam", "50.5", "--L", "8", "--size", "64", "--out", str(tmp_path)]) == 0
        frame = read_csv(tmp_path / "density.csv")
        assert list(frame.columns) == ["x", "y", "density"]
        assert len(frame) == 64 * 64
        assert frame["density"].mean() == pytest.approx(1.0, rel=1e-9)
        summary = json.loads((tmp_path / "density.json").read_text(encoding="utf-8"))
        assert summary["L"] == 8.0

    def test_density_on_a_norm(self, tmp_path, capsys):
        assert main(["density", "--lam", "50", "--out", str(tmp_path)]) == 3
        assert "error: pole:" in capsys.readouterr().err

    def test_truncation(self, tmp_path):
        assert main(["truncation", "--X", "200", "--tail-tol", "1e-4", "--out", str(tmp_path)]) == 0
        frame = read_csv(tmp_path / "truncation.csv")
        assert list(frame.columns) == ["lambda", "L", "defect", "bound"]
        assert ((frame["defect"] >= 0) & (frame["defect"] <= 1)).all()

    def test_normbound(self, tmp_path):
        assert main(["normbound", "--X", "200", "--tail-tol", "1e-4", "--out", str(tmp_path)]) == 0
        frame = read_csv(tmp_path / "normbound.csv")
        assert frame["passes"].all()
        summary = json.loads((tmp_path / "normbound.json").read_text(encoding="utf-8"))
        assert summary["passes"] == summary["count"] == len(frame)

    def test_szeta(self, tmp_path):
        assert main(["szeta", "--zeta", "1,0", "--X", "256", "--out", str(tmp_path)]) == 0
        frame = read_csv(tmp_path / "szeta.csv")
        assert frame["X"].tolist() == [16.0, 32.0, 64.0, 128.0, 256.0]
        assert frame["count"].is_monotonic_increasing

    def test_equidist_full_by_default(self, tmp_path):
        args = ["equidist", "--X", "200", "--tail-tol", "1e-4", "--zeta", "1,1", "--out", str(tmp_path)]
        assert main(args) == 0
        rows = read_csv(tmp_path / "equidist_1_1.csv")
        assert (rows["abs"] > 0).all()
        assert "L=full" in (tmp_path / "equidist_1_1.csv").read_text(encoding="utf-8").splitlines()[0]
