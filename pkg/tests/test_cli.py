import csv
import json
import math
import subprocess
import sys

import pytest

from rootexpand.cli import RunConfig, build_parser, main, parse_config, read_config, run
from rootexpand.errors import UsageError
from rootexpand.expansion import ExpansionResult


def capture(argv):
    lines = []
    config = parse_config(argv)
    code = run(config, out=lines.append)
    return code, lines


# --- expand-symbolic ---------------------------------------------------------

def test_symbolic_upflat_table():
    code, lines = capture(["expand-symbolic", "--profile", "upflat", "--p", "5"])
    assert code == 0
    assert lines[0] == "α₁ = δ̂₀"
    assert lines[1] == "α₂ = δ̂₂δ̂₀²"
    payload = json.loads(lines[-1])
    assert payload["profile"] == "upflat" and payload["p"] == 5
    assert [a["k"] for a in payload["alpha"]] == [1, 2, 3, 4, 5]


def test_symbolic_zigzag_table():
    code, lines = capture(["expand-symbolic", "--profile", "zigzag", "--p", "5"])
    assert code == 0
    assert lines[1] == "α₂ = 0"
    assert lines[4] == "α₅ = (δ̂₅+3δ̂₃²)δ̂₀⁵+(δ̂₄+5δ̂₂δ̂₃)δ̂₀⁴+2δ̂₂²δ̂₀³"


def test_symbolic_json_file(tmp_path):
    target = tmp_path / "table.json"
    code, lines = capture(["expand-symbolic", "--p", "3", "--json", str(target)])
    assert code == 0
    payload = json.loads(target.read_text())
    assert payload["variables"] == ["δ̂₀", "δ̂₁", "δ̂₂", "δ̂₃"]
    assert len(lines) == 3


# --- expand ------------------------------------------------------------------

def test_expand_exponential_and_json_round_trip(tmp_path):
    code = main(["expand", "--theta0", "2", "--n", "100", "--t-bar", "0.6", "--p", "3",
                 "--out-dir", str(tmp_path)])
    assert code == 0
    data = json.loads((tmp_path / "expansion.json").read_text())
    assert math.isclose(data["theta_p_s"], 1.664, rel_tol=1e-13)
    res = ExpansionResult.from_dict(data)
    assert res.recompute_theta_p() == data["theta_p_s"]
    with open(tmp_path / "expansion.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["k", "coef", "delta", "alpha_s", "alpha_lim"]
    assert len(rows) == 5
    assert float(rows[2][2]) == -1.0


def test_expand_remainder_and_limits(tmp_path):
    code = main(["expand", "--theta0", "2", "--n", "100", "--g", "2", "--p", "3",
                 "--alpha-lim", "0,-4,8,-16", "--u", "1.5,2.5", "--c", "0.1",
                 "--out-dir", str(tmp_path)])
    assert code == 0
    data = json.loads((tmp_path / "expansion.json").read_text())
    assert math.isclose(data["theta_p_inf"], 1.664, rel_tol=1e-13)
    assert data["remainder"] > abs(data["theta_p_s"] - 2 / 1.2)


def test_expand_custom_model(tmp_path):
    code = main(["expand", "--model", "custom", "--score", "n*(1/theta - 0.6)", "--theta0", "2",
                 "--n", "100", "--p", "3", "--out-dir", str(tmp_path)])
    assert code == 0
    data = json.loads((tmp_path / "expansion.json").read_text())
    assert math.isclose(data["theta_p_s"], 1.664, rel_tol=1e-12)


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# exponential example\ntheta0 = 2\nn = 100\nt-bar = 0.6\np = 1\n")
    assert read_config(str(cfg))["t_bar"] == "0.6"
    code = main(["expand", "--config", str(cfg), "--p", "3", "--out-dir", str(tmp_path)])
    assert code == 0
    data = json.loads((tmp_path / "expansion.json").read_text())
    assert data["p"] == 3
    assert math.isclose(data["theta_p_s"], 1.664, rel_tol=1e-13)


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("no equals sign\n")
    with pytest.raises(UsageError):
        read_config(str(bad))
    assert main(["expand", "--config", str(tmp_path / "missing.cfg")]) == 2


# --- exit codes --------------------------------------------------------------

def test_missing_seed_is_usage_error():
    assert main(["ks-figure", "--m", "100"]) == 2


def test_order_out_of_range_is_usage_error():
    assert main(["expand-symbolic", "--p", "9"]) == 2
    with pytest.raises(UsageError):
        RunConfig("expand", {"p": 0})


def test_unknown_command():
    with pytest.raises(UsageError):
        RunConfig("plot", {})
    with pytest.raises(SystemExit) as exc:
        main(["plot"])
    assert exc.value.code == 2


def test_domain_error_exit_code(tmp_path):
    assert main(["binomial-demo", "--theta", "1.5", "--seed", "1", "--out-dir", str(tmp_path)]) == 3
    assert main(["expand", "--theta0", "-1", "--g", "0.5", "--out-dir", str(tmp_path)]) == 3


def test_missing_statistic_is_usage_error(tmp_path):
    assert main(["expand", "--theta0", "1", "--out-dir", str(tmp_path)]) == 2


def test_unwritable_output_is_usage_error(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["ks-figure", "--m", "100", "--seed", "1", "--out-dir", str(blocker / "sub")]) == 2


# --- stochastic commands -----------------------------------------------------

def test_ks_figure_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["ks-figure", "--theta", "1", "--m", "1000", "--seed", "7", "--out-dir", str(d)]) == 0
    text = (a / "ks_table.csv").read_bytes()
    assert text == (b / "ks_table.csv").read_bytes()
    assert text.decode().splitlines()[0] == "n,delta1,delta2,delta3,mc_error"
    assert len(text.decode().splitlines()) == 6


@pytest.mark.parametrize("command,filename,extra", [
    ("exponential-demo", "exponential_demo.csv", []),
    ("binomial-demo", "binomial_demo.csv", ["--N", "2"]),
    ("ou-demo", "ou_demo.csv", ["--n", "2000", "--paths", "3"]),
])
def test_demos_are_deterministic(tmp_path, command, filename, extra):
    outputs = []
    for d in ("x", "y"):
        assert main([command, "--seed", "5", "--out-dir", str(tmp_path / d)] + extra) == 0
        outputs.append((tmp_path / d / filename).read_bytes())
    assert outputs[0] == outputs[1]
    assert len(outputs[0].decode().splitlines()) > 1


def test_exponential_demo_errors_track_geometric_tail(tmp_path):
    assert main(["exponential-demo", "--seed", "3", "--n", "400", "--out-dir", str(tmp_path)]) == 0
    with open(tmp_path / "exponential_demo.csv") as fh:
        rows = list(csv.DictReader(fh))
    for r in rows:
        assert math.isclose(float(r["abs_error"]), float(r["geometric_tail"]), rel_tol=1e-6, abs_tol=1e-15)


def test_ou_demo_engine_matches_ratio(tmp_path):
    assert main(["ou-demo", "--seed", "2", "--n", "3000", "--paths", "2", "--out-dir", str(tmp_path)]) == 0
    with open(tmp_path / "ou_demo.csv") as fh:
        for r in csv.DictReader(fh):
            assert abs(float(r["eta_engine"]) - float(r["eta_hat"])) <= 1e-12


# --- entry points ------------------------------------------------------------

def test_help_lists_defaults():
    text = build_parser().format_help()
    for cmd in ("expand-symbolic", "expand", "exponential-demo", "binomial-demo", "ou-demo", "ks-figure"):
        assert cmd in text
    sub = subprocess.run([sys.executable, "-m", "rootexpand.cli", "ks-figure", "--help"],
                         capture_output=True, text=True, check=True)
    assert "default: 100000" in sub.stdout


def test_module_entry_point_exit_code():
    proc = subprocess.run([sys.executable, "-m", "rootexpand.cli", "ks-figure", "--m", "10"],
                          capture_output=True, text=True)
    assert proc.returncode == 2
    assert proc.stderr.strip().startswith("error:")
    assert len(proc.stderr.strip().splitlines()) == 1
