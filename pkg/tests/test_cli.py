import json
import subprocess
import sys

import pytest

from fracsym import diffusion as d
from fracsym.cli import main


@pytest.fixture
def eq_file(tmp_path):
    path = tmp_path / "diffusion.json"
    path.write_text(json.dumps(d.equation_json(d.DiffusionSpec.single())))
    return str(path)


@pytest.fixture
def eq2_file(tmp_path):
    path = tmp_path / "diffusion2.json"
    path.write_text(json.dumps(d.equation_json(d.DiffusionSpec((1, 1), (1, 2), (0.5, 1.5)))))
    return str(path)


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == 0, err
    return json.loads(out)


class TestEvalRl:
    def test_quadrature(self, capsys):
        r = report(capsys, "eval-rl", "--expr", "x", "--order", "0.5", "--a", "0", "--at", "1", "--method", "quadrature")
        assert r["value"] == pytest.approx(1.1283791671, rel=1e-10)
        assert r["method"] == "quadrature" and r["nodes"] == 64

    def test_plain_integral(self, capsys):
        assert report(capsys, "eval-rl", "--expr", "1", "--order", "-1", "--a", "0", "--at", "2")["value"] == pytest.approx(2.0)

    def test_series_fields(self, capsys):
        r = report(capsys, "eval-rl", "--expr", "exp(x)", "--order", "0.5", "--at", "1", "--method", "series")
        assert r["converged"] and r["tail_estimate"] >= 0 and r["terms"] > 0

    def test_parse_error(self, capsys):
        code, _, err = run(capsys, "eval-rl", "--expr", "x^(", "--order", "0.5", "--at", "1")
        assert code == 2 and "column 3" in err and "^" in err

    def test_domain_error(self, capsys):
        assert run(capsys, "eval-rl", "--expr", "x", "--order", "0.5", "--a", "1", "--at", "0.5")[0] == 3

    def test_strict(self, capsys):
        argv = ["eval-rl", "--expr", "exp(x)", "--order", "0.5", "--at", "1", "--method", "series", "--max-terms", "4"]
        assert run(capsys, *argv)[0] == 0
        assert run(capsys, *argv, "--strict")[0] == 4

    def test_bind_extra_variables(self, capsys):
        r = report(capsys, "eval-rl", "--expr", "k*x", "--bind", "k=3", "--order", "0.5", "--at", "1")
        assert r["value"] == pytest.approx(3 * 1.1283791671, rel=1e-10)


class TestProlong:
    def test_fractional(self, capsys):
        r = report(capsys, "prolong", "--axes", "x", "--xi", "x=x", "--section", "exp(x/2)", "--at", "x=0.8", "--order", "0.5")
        assert r["value"] == pytest.approx(r["corollary_value"], rel=1e-10)

    def test_classical(self, capsys):
        r = report(capsys, "prolong", "--axes", "x", "--phi", "u", "--section", "sin(x)", "--at", "x=0.5", "--sigma", "x,x")
        assert r["coefficient"] == "u_xx" and r["target"] == "u_xx"

    def test_truncation_env(self, capsys, monkeypatch):
        monkeypatch.setenv("FRACSYM_TRUNCATION", "5")
        r = report(capsys, "prolong", "--axes", "x", "--phi", "u", "--section", "x", "--at", "x=1")
        assert r["truncation"] == 5


class TestCheckSymmetry:
    def test_v2_passes(self, capsys, eq_file):
        r = report(capsys, "check-symmetry", "--equation", eq_file, "--generator", "v2", "--sample", "builtin")
        assert r["pass"] and r["max_residual"] <= 1e-6 and len(r["residuals"]) == 32

    def test_perturbed_fails(self, capsys, eq_file):
        field = json.dumps({"axes": ["t", "x"], "xi": {"t": "t", "x": "2.2*x"}, "phi": "0"})
        code, out, _ = run(capsys, "check-symmetry", "--equation", eq_file, "--field", field, "--sample", "builtin")
        assert code == 1
        r = json.loads(out)
        assert not r["pass"] and r["max_residual"] >= 1e-4

    def test_missing_sample(self, capsys, eq_file):
        code, _, err = run(capsys, "check-symmetry", "--equation", eq_file, "--generator", "v2")
        assert code == 5 and "certification" in err

    def test_bad_sample(self, capsys, eq_file):
        code, _, err = run(capsys, "check-symmetry", "--equation", eq_file, "--generator", "v2", "--sample", "x*t", "--box", "t=0.1:2,x=0:2")
        assert code == 5

    def test_csv(self, capsys, eq_file):
        code, out, _ = run(capsys, "check-symmetry", "--equation", eq_file, "--generator", "v1", "--sample", "builtin", "--points", "4", "--format", "csv")
        lines = out.strip().splitlines()
        assert code == 0 and lines[0] == "t,x,residual" and len(lines) == 5

    def test_output_file(self, capsys, eq_file, tmp_path):
        out = tmp_path / "r.json"
        code, stdout, _ = run(capsys, "check-symmetry", "--equation", eq_file, "--generator", "v3", "--sample", "builtin", "--points", "4", "-o", str(out))
        assert code == 0 and stdout == ""
        assert json.loads(out.read_text())["generator"] == "v3"


class TestReduce:
    def test_v2(self, capsys, eq_file):
        r = report(capsys, "reduce", "--equation", eq_file, "--generator", "v2")
        assert r["variables"] == {"z": "x/t^2"}
        assert r["reduced_residual"] == "2*v_z*z + v*RL[1/2, z](v) = 0"
        assert r["verification"]["max_residual"] <= 1e-4

    def test_v1(self, capsys, eq_file):
        r = report(capsys, "reduce", "--equation", eq_file, "--generator", "v1")
        assert r["ansatz"] == "u = v(x)"

    def test_v3_needs_two_axes(self, capsys, eq_file):
        assert run(capsys, "reduce", "--equation", eq_file, "--generator", "v3")[0] == 6

    def test_v3(self, capsys, eq2_file):
        r = report(capsys, "reduce", "--equation", eq2_file, "--generator", "v3")
        assert r["slot_kinds"] == ["EK", "EULER", "RL"]

    def test_vertical_field(self, capsys, eq_file):
        field = json.dumps({"axes": ["t", "x"], "xi": {}, "phi": "u"})
        assert run(capsys, "reduce", "--equation", eq_file, "--field", field)[0] == 6


class TestEk:
    def test_constant(self, capsys):
        r = report(capsys, "ek", "--expr", "1", "--mu", "0.5")
        assert r["value"] == pytest.approx(0.7522527781, rel=1e-9)

    def test_identity(self, capsys):
        r = report(capsys, "ek", "--expr", "exp(-z)", "--mu", "-0.5", "--alpha", "z=0.5", "--at", "z=1", "--identity", "0.5", "1.3", "0.7")
        assert r["scaling_identity"]["abs_diff"] <= 1e-5

    def test_divergent(self, capsys):
        assert run(capsys, "ek", "--expr", "exp(z)", "--mu", "0.5", "--alpha", "z=2", "--at", "z=1")[0] == 3


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit):
        main(["--help"])
    out = capsys.readouterr().out
    for name in ("eval-rl", "prolong", "check-symmetry", "reduce", "ek"):
        assert name in out


def test_byte_identical_runs(eq_file):
    argv = [sys.executable, "-m", "fracsym.cli", "check-symmetry", "--equation", eq_file, "--generator", "v2", "--sample", "builtin", "--seed", "7"]
    a = subprocess.run(argv, capture_output=True, check=True).stdout
    b = subprocess.run(argv, capture_output=True, check=True).stdout
    assert a == b and b"max_residual" in a
