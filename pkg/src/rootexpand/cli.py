"""Command-line interface.

Exit codes: 0 on success, 2 for usage errors (bad flags, inconsistent
parameters, unwritable output), 3 for model or domain errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .errors import ExpansionError, UsageError
from .expansion import ExpansionResult, ScoreModel, expand_estimator, remainder_bound, reparametrize
from .models import (
    ExpFamilyModel,
    OUSpec,
    SampleSummary,
    binomial_expansions,
    binomial_limit_coefficients,
    expfam_score_model,
    exponential_closed_forms,
    natural_scale_expansion,
    ou_estimate,
    ou_eta_score_model,
    ou_psi_derivs,
    ou_simulate,
)
from .montecarlo import analytic_nonlinearity_ks, exponential_ks_experiment
from .rng import stream
from .sequences import BetaProfile, symbol_names, upflat_symbolic, zigzag_symbolic
from .series import subscript

COMMANDS = ("expand-symbolic", "expand", "exponential-demo", "binomial-demo", "ou-demo", "ks-figure")
STOCHASTIC = {"exponential-demo", "binomial-demo", "ou-demo", "ks-figure"}
EXIT_USAGE = 2
EXIT_MODEL = 3


def fmt(x: float) -> str:
    """Float with 17 significant digits."""
    return f"{float(x):.17g}"


def dumps(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """JSON text whose floats carry 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            return "null"
        return fmt(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    return json.dumps(str(obj))


@dataclass
class RunConfig:
    """A validated command with its parameters."""

    command: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        p = self.params.get("p")
        if p is not None and not 1 <= int(p) <= 8:
            raise UsageError(f"p must lie in [1, 8], got {p}")
        if self.command in STOCHASTIC and self.params.get("seed") is None:
            raise UsageError(f"{self.command} requires --seed")

    def get(self, key: str, default: Any = None) -> Any:
        v = self.params.get(key)
        return default if v is None else v


def read_config(path: str) -> dict[str, str]:
    """``key = value`` lines; blank lines and ``#`` comments are ignored."""
    out: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _out_dir(cfg: RunConfig) -> Path:
    d = Path(cfg.get("out_dir", "."))
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {d}: {exc}") from exc
    return d


def _write(path: Path, text: str) -> None:
    try:
        path.write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    lines = [",".join(header)]
    for r in rows:
        cells = []
        for v in r:
            if isinstance(v, bool):
                cells.append(str(int(v)))
            elif isinstance(v, (float, np.floating)):
                cells.append(fmt(v))
            elif v is None:
                cells.append("")
            else:
                cells.append(str(v))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


# --- expand-symbolic ---------------------------------------------------------

def _alpha_name(k: int) -> str:
    return "α" + subscript(k)


def cmd_expand_symbolic(cfg: RunConfig, out: Callable[[str], None]) -> None:
    profile = cfg.get("profile", "upflat")
    p = int(cfg.get("p", 5))
    table = upflat_symbolic(p) if profile == "upflat" else zigzag_symbolic(p) if profile == "zigzag" else None
    if table is None:
        raise UsageError(f"unknown profile {profile!r}")
    names = symbol_names(p)
    for k in range(1, p + 1):
        out(f"{_alpha_name(k)} = {table[k].format_grouped(0, names)}")
    payload = {
        "profile": profile,
        "p": p,
        "variables": names,
        "alpha": [{"k": k, "text": table[k].format_grouped(0, names), "terms": table[k].to_json()}
                  for k in range(1, p + 1)],
    }
    if cfg.get("json"):
        target = Path(cfg.get("json"))
        _write(target, json.dumps(payload, ensure_ascii=False, indent=2) + "\n")
    else:
        out(json.dumps(payload, ensure_ascii=False))


# --- expand ------------------------------------------------------------------

def _floats(text: Optional[str]) -> Optional[list[float]]:
    if text is None:
        return None
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def _expfamily_model(cfg: RunConfig) -> tuple[ScoreModel, int]:
    family = cfg.get("family", "exponential")
    if family == "exponential":
        fam = ExpFamilyModel.exponential()
    elif family == "binomial":
        fam = ExpFamilyModel.binomial(int(cfg.get("N", 1)))
    else:
        raise UsageError(f"unknown family {family!r}; expected exponential or binomial")
    theta0 = float(cfg.get("theta0", cfg.get("theta", 1.0)))
    n = int(cfg.get("n", 100))
    if cfg.get("t_bar") is not None:
        summary = SampleSummary.at(fam, n, float(cfg.get("t_bar")), theta0)
    elif cfg.get("g") is not None:
        summary = SampleSummary.from_g(fam, n, float(cfg.get("g")), theta0)
    else:
        raise UsageError("expfamily model needs t_bar or g")
    return expfam_score_model(fam, theta0, summary, profile=cfg.get("profile", "upflat")), n


def _custom_model(cfg: RunConfig) -> tuple[ScoreModel, int]:
    import sympy

    expr_text = cfg.get("score")
    if expr_text is None:
        raise UsageError("custom model needs score=<expression in theta and n>")
    theta, n_sym = sympy.symbols("theta n")
    try:
        expr = sympy.sympify(expr_text, locals={"theta": theta, "n": n_sym})
        rate = sympy.sympify(cfg.get("rate", "1/sqrt(n)"), locals={"n": n_sym})
    except (sympy.SympifyError, TypeError) as exc:
        raise UsageError(f"cannot parse expression: {exc}") from exc
    extra = (expr.free_symbols | rate.free_symbols) - {theta, n_sym}
    if extra:
        raise UsageError(f"unknown symbols in custom model: {sorted(map(str, extra))}")
    p = int(cfg.get("p", 3))
    derivs = [sympy.lambdify((n_sym, theta), sympy.diff(expr, theta, k), "math") for k in range(p + 2)]
    rate_fn = sympy.lambdify(n_sym, rate, "math")
    lo = float(cfg.get("domain_lo", -math.inf))
    hi = float(cfg.get("domain_hi", math.inf))
    model = ScoreModel(
        theta0=float(cfg.get("theta0", 0.0)),
        eval=lambda s, t: float(derivs[0](s, t)),
        deriv=lambda s, t, k: float(derivs[k](s, t)),
        rate=lambda s: float(rate_fn(s)),
        profile=cfg.get("profile", "upflat"),
        domain=(lo, hi),
    )
    return model, int(cfg.get("n", 100))


def _expansion_rows(res: ExpansionResult) -> list[list[Any]]:
    rows = []
    for k in range(res.p + 1):
        lim = None if res.alpha_lim is None else float(res.alpha_lim[k])
        rows.append([k, float(res.coef[k]), float(res.delta[k]), float(res.alpha_s[k]), lim])
    return rows


def cmd_expand(cfg: RunConfig, out: Callable[[str], None]) -> None:
    kind = cfg.get("model", "expfamily")
    BetaProfile.named(cfg.get("profile", "upflat"), 1)
    if kind == "expfamily":
        model, n = _expfamily_model(cfg)
    elif kind == "custom":
        model, n = _custom_model(cfg)
    else:
        raise UsageError(f"unknown model {kind!r}")
    p = int(cfg.get("p", 3))
    res = expand_estimator(model, n, p, alpha_lim=_floats(cfg.get("alpha_lim")))
    u = _floats(cfg.get("u"))
    if u is not None:
        if len(u) != 2:
            raise UsageError("u must be 'lo,hi'")
        c = cfg.get("c")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = res.with_remainder(
                remainder_bound(model, n, res, (u[0], u[1]), None if c is None else float(c))
            )
    d = _out_dir(cfg)
    _write(d / "expansion.csv", _csv_text(("k", "coef", "delta", "alpha_s", "alpha_lim"), _expansion_rows(res)))
    text = dumps(res.to_dict())
    _write(d / "expansion.json", text + "\n")
    out(text)


# --- demos -------------------------------------------------------------------

def cmd_exponential_demo(cfg: RunConfig, out: Callable[[str], None]) -> None:
    theta = float(cfg.get("theta", 1.0))
    n = int(cfg.get("n", 100))
    p_max = int(cfg.get("p", 6))
    if not theta > 0:
        raise UsageError("theta must be positive")
    sample = stream(int(cfg.get("seed")), 0).exponential(1.0 / theta, size=n)
    fam = ExpFamilyModel.exponential()
    summary = SampleSummary.from_data(fam, sample, theta)
    score = expfam_score_model(fam, theta, summary)
    mle = 1.0 / summary.t_bar
    closed = exponential_closed_forms(theta, summary.g_n, n)
    x = summary.g_n / math.sqrt(n)
    rows = []
    for p in range(1, p_max + 1):
        res = expand_estimator(score, n, p)
        tail = theta * abs(x) ** (p + 1) / abs(1 + x)
        rows.append([p, res.theta_p_s, mle, abs(res.theta_p_s - mle), tail])
    d = _out_dir(cfg)
    _write(d / "exponential_demo.csv",
           _csv_text(("p", "theta_p", "mle", "abs_error", "geometric_tail"), rows))
    out(f"n={n} t_bar={fmt(summary.t_bar)} g_n={fmt(summary.g_n)} mle={fmt(mle)} "
        f"theta_inf={fmt(closed.theta_inf)}")
    for r in rows:
        out(f"p={r[0]} theta_p={fmt(r[1])} abs_error={fmt(r[3])} geometric_tail={fmt(r[4])}")


def cmd_binomial_demo(cfg: RunConfig, out: Callable[[str], None]) -> None:
    theta = float(cfg.get("theta", 0.3))
    n = int(cfg.get("n", 100))
    N = int(cfg.get("N", 1))
    p_max = int(cfg.get("p", 3))
    fam = ExpFamilyModel.binomial(N)
    fam.check(theta)
    sample = stream(int(cfg.get("seed")), 0).binomial(N, theta, size=n)
    summary = SampleSummary.from_data(fam, sample, theta)
    mle = summary.t_bar / N
    omega = natural_scale_expansion(fam, theta, p_max)
    x = summary.g_n / math.sqrt(n)
    limit = binomial_limit_coefficients(theta, N, summary.g_n)
    rows = []
    for p in range(1, p_max + 1):
        try:
            lim = limit[: p + 1] if p <= 3 else None
            res = expand_estimator(expfam_score_model(fam, theta, summary), n, p, alpha_lim=lim)
            theta_p, layer = res.theta_p_s, res.boundary_layer
        except ExpansionError:
            theta_p, layer = float("nan"), True
        natural = theta + sum(omega[k] * x**k for k in range(1, p + 1))
        rows.append([p, theta_p, natural, mle, abs(theta_p - mle), layer])
    lim = binomial_expansions(theta, N, n, summary.g_n)
    d = _out_dir(cfg)
    _write(d / "binomial_demo.csv",
           _csv_text(("p", "theta_p", "theta_p_natural", "mle", "abs_error", "boundary_layer"), rows))
    out(f"n={n} N={N} t_bar={fmt(summary.t_bar)} g_n={fmt(summary.g_n)} mle={fmt(mle)}")
    out(f"theta2_inf={fmt(lim.theta2_inf)} theta3_inf={fmt(lim.theta3_inf)}")
    for r in rows:
        out(f"p={r[0]} theta_p={fmt(r[1])} natural={fmt(r[2])} boundary_layer={r[5]}")


def cmd_ou_demo(cfg: RunConfig, out: Callable[[str], None]) -> None:
    spec = OUSpec(float(cfg.get("theta", 1.0)), float(cfg.get("sigma", 1.0)),
                  float(cfg.get("dt", 0.5)), int(cfg.get("n", 10_000)))
    p = int(cfg.get("p", 3))
    paths = int(cfg.get("paths", 1))
    seed = int(cfg.get("seed"))
    eta0 = math.exp(-spec.dt * spec.theta)
    psi = ou_psi_derivs(eta0, spec.dt, p)
    rows = []
    for j in range(paths):
        path = ou_simulate(spec, seed, j)
        est = ou_estimate(path, spec.dt)
        res = expand_estimator(ou_eta_score_model(path, spec.sigma, eta0), spec.n, p)
        alpha = reparametrize(res.sequence(), psi, p).alpha
        theta_p = spec.theta + sum(alpha[k] * res.phi**k for k in range(1, p + 1))
        rows.append([j, est.eta_hat, est.theta_hat, res.theta_p_s, theta_p])
    d = _out_dir(cfg)
    _write(d / "ou_demo.csv", _csv_text(("path", "eta_hat", "theta_hat", "eta_engine", "theta_p"), rows))
    mean = float(np.mean([r[2] for r in rows]))
    out(f"paths={paths} n={spec.n} dt={fmt(spec.dt)} mean_theta_hat={fmt(mean)}")


def cmd_ks_figure(cfg: RunConfig, out: Callable[[str], None]) -> None:
    theta = float(cfg.get("theta", 1.0))
    m = int(cfg.get("m", 100_000))
    n_list = [int(v) for v in str(cfg.get("n_list", "5,10,20,50,100")).split(",") if v.strip()]
    table = exponential_ks_experiment(theta, n_list, m, int(cfg.get("seed")))
    d = _out_dir(cfg)
    _write(d / "ks_table.csv", table.to_csv())
    for r in table.rows:
        out(f"n={r.n} delta1={fmt(r.delta1)} delta2={fmt(r.delta2)} delta3={fmt(r.delta3)} "
            f"delta3_exact={fmt(analytic_nonlinearity_ks(theta, r.n))} mc_error={fmt(r.mc_error)}")


HANDLERS = {
    "expand-symbolic": cmd_expand_symbolic,
    "expand": cmd_expand,
    "exponential-demo": cmd_exponential_demo,
    "binomial-demo": cmd_binomial_demo,
    "ou-demo": cmd_ou_demo,
    "ks-figure": cmd_ks_figure,
}


def run(config: RunConfig, out: Callable[[str], None] = print) -> int:
    """Execute a command; returns the process exit status."""
    try:
        HANDLERS[config.command](config, out)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ExpansionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except (ValueError, TypeError) as exc:
        print(f"error: invalid parameter: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return 0


# --- argument parsing --------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rootexpand",
        description="Higher-order expansions of estimators defined as roots of score functions.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt_cls = argparse.ArgumentDefaultsHelpFormatter

    sp = sub.add_parser("expand-symbolic", help="print exact coefficient tables", formatter_class=fmt_cls)
    sp.add_argument("--profile", choices=("upflat", "zigzag"), default="upflat")
    sp.add_argument("--p", type=int, default=5, help="order, 1..8")
    sp.add_argument("--json", default=None, help="write the JSON table here instead of stdout")

    sp = sub.add_parser("expand", help="expand the root of a score model", formatter_class=fmt_cls)
    sp.add_argument("--model", choices=("expfamily", "custom"), default=None,
                    help="model kind (default expfamily)")
    sp.add_argument("--config", default=None, help="key=value file; flags override its entries")
    sp.add_argument("--p", type=int, default=None, help="order, 1..8 (default 3)")
    sp.add_argument("--profile", choices=("upflat", "zigzag"), default=None, help="default upflat")
    sp.add_argument("--family", choices=("exponential", "binomial"), default=None,
                    help="expfamily member (default exponential)")
    sp.add_argument("--theta0", type=float, default=None, help="anchor parameter")
    sp.add_argument("--n", type=int, default=None, help="sample size (default 100)")
    sp.add_argument("--N", type=int, default=None, help="binomial trials (default 1)")
    sp.add_argument("--t-bar", dest="t_bar", type=float, default=None, help="mean statistic")
    sp.add_argument("--g", type=float, default=None, help="standardized statistic")
    sp.add_argument("--score", default=None, help="custom score expression in theta and n")
    sp.add_argument("--rate", default=None, help="custom rate expression in n (default 1/sqrt(n))")
    sp.add_argument("--alpha-lim", dest="alpha_lim", default=None, help="limit coefficients a0,...,ap")
    sp.add_argument("--u", default=None, help="interval lo,hi for the remainder bound")
    sp.add_argument("--c", type=float, default=None, help="lower bound for the remainder bound")
    sp.add_argument("--out-dir", dest="out_dir", default=None, help="output directory (default .)")

    def demo(name: str, help_text: str, theta: float, n: int, p: int) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help_text, formatter_class=fmt_cls)
        sp.add_argument("--theta", type=float, default=theta, help="true parameter")
        sp.add_argument("--n", type=int, default=n, help="sample size")
        sp.add_argument("--p", type=int, default=p, help="highest order, 1..8")
        sp.add_argument("--seed", type=int, default=None, help="required")
        sp.add_argument("--out-dir", dest="out_dir", default=".", help="output directory")
        return sp

    demo("exponential-demo", "exponential MLE versus its expansions", 1.0, 100, 6)
    sp = demo("binomial-demo", "binomial MLE versus its expansions", 0.3, 100, 3)
    sp.add_argument("--N", type=int, default=1, help="trials per observation")
    sp = demo("ou-demo", "Ornstein-Uhlenbeck drift estimation", 1.0, 10_000, 3)
    sp.add_argument("--sigma", type=float, default=1.0, help="diffusion coefficient")
    sp.add_argument("--dt", type=float, default=0.5, help="observation step")
    sp.add_argument("--paths", type=int, default=1, help="number of simulated paths")

    sp = sub.add_parser("ks-figure", help="Kolmogorov-Smirnov distances table", formatter_class=fmt_cls)
    sp.add_argument("--theta", type=float, default=1.0, help="exponential rate")
    sp.add_argument("--m", type=int, default=100_000, help="Monte Carlo draws per sample size")
    sp.add_argument("--seed", type=int, default=None, help="required")
    sp.add_argument("--n", dest="n_list", default="5,10,20,50,100", help="comma-separated sample sizes")
    sp.add_argument("--out-dir", dest="out_dir", default=".", help="output directory")
    return parser


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    args = vars(build_parser().parse_args(argv))
    command = args.pop("command")
    params: dict[str, Any] = {}
    config_path = args.pop("config", None)
    if config_path:
        params.update(read_config(config_path))
    params.update({k: v for k, v in args.items() if v is not None})
    return RunConfig(command, params)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        config = parse_config(argv)
    except (UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
