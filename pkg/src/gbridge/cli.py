"""Command-line interface: ``gbridge {fit, bounds, simulate, table1}``.

Exit codes: 0 ok, 1 usage or configuration error, 2 data or rank error,
3 regime or domain error, 4 failed ``--assert-minimax`` check.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .canonical import least_squares, read_design_csv, to_canonical, from_canonical
from .errors import ConfigError, DataError, GBRidgeError
from .minimax import (
    DEFAULT_CP_RATIO,
    auto_design,
    check_gb_minimax,
    gb_hyper_for,
    geometric_spectrum,
    minimax_phi_bound,
    regime,
    regime_indicator,
)
from .shrinkage import GBHyper, GeneralizedBayes, ShrinkageSpec, SimpleBayes, ZeroShrinkage, ridge_hk, shrink
from .simulate import (
    CSV_COLUMNS,
    DEFAULT_REPS,
    DEFAULT_SEED,
    PROTOCOLS,
    TABLE1_MUS,
    TABLE1_THETAS,
    Normal,
    ScaleMixture,
    SimConfig,
    StudentT,
    result_row,
    risk_and_ecn,
    table1,
    table1_cell_id,
    table1_csv,
    table1_design,
)
from .stability import kappa_estimator, kappa_ls, verify_stable

EXIT_ASSERT = 4


def fmt(x) -> str:
    """Six significant digits for human-readable output."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return f"{float(x):.6g}"


def fmt_vec(v) -> str:
    return ",".join(fmt(x) for x in np.atleast_1d(v))


def parse_floats(text: str) -> np.ndarray:
    try:
        return np.array([float(t) for t in text.split(",") if t.strip()], dtype=float)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------------------
# fit


def _design_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--eta", type=float, default=None,
                   help="exponent for the nondecreasing-c construction (default: midpoint)")
    p.add_argument("--nu", type=float, default=None,
                   help="exponent for the other construction (default: half its root)")
    p.add_argument("--cp-ratio", type=float, default=DEFAULT_CP_RATIO,
                   help="c_p / c_1 in the other construction (default: %(default)s)")


def _report(lines: list[tuple[str, str]], out) -> None:
    width = max(len(k) for k, _ in lines)
    for key, value in lines:
        out.write(f"{key:<{width}}  {value}\n")


def cmd_fit(args) -> int:
    data = read_design_csv(args.data, header=args.header)
    est = args.estimator
    lines: list[tuple[str, str]] = [("estimator", est)]
    canon = to_canonical(data)
    d = canon.d
    k_ls = kappa_ls(d)
    if est == "ls":
        beta = least_squares(data)
        lines += [("kappa_ls", fmt(k_ls)), ("kappa_est", fmt(k_ls))]
    elif est.startswith("ridge:"):
        try:
            k = float(est.split(":", 1)[1])
        except ValueError:
            raise ConfigError(f"ridge needs a numeric k, got {est!r}") from None
        beta = ridge_hk(data, k)
        eig = 1.0 / d + k
        lines += [("kappa_ls", fmt(k_ls)), ("kappa_est", fmt(eig.max() / eig.min()))]
    elif est in ("sb", "gb"):
        design = auto_design(d, args.loss, canon.n, eta_pick=args.eta, nu_pick=args.nu,
                             cp_ratio=args.cp_ratio)
        if est == "sb":
            alpha = design.alpha if args.alpha is None else args.alpha
            gamma = design.gamma if args.gamma is None else args.gamma
            phi = SimpleBayes(alpha, gamma)
            minimax = alpha <= minimax_phi_bound(d, design.c, args.loss, canon.n)
        else:
            base = gb_hyper_for(design, canon.p)
            hyper = GBHyper(
                a=base.a if args.a is None else args.a,
                b=base.b if args.b is None else args.b,
                e=base.e if args.e is None else args.e,
                gamma=base.gamma if args.gamma is None else args.gamma,
            )
            phi = GeneralizedBayes(hyper, canon.p, canon.n)
            minimax = check_gb_minimax(hyper, d, design.c, args.loss, canon.n, canon.p)
            lines += [("a", fmt(hyper.a)), ("b", fmt(hyper.b)), ("e", fmt(hyper.e))]
        theta, t = shrink(canon.x, canon.s, design.c, d, phi)
        beta = from_canonical(theta, canon.rotation)
        stab = verify_stable(phi, d, design.c, design.ordering)
        lines += [
            ("regime", design.branch),
            ("loss_j", fmt(args.loss)),
            ("c", fmt_vec(design.c)),
            ("u", fmt(design.u)),
            ("v", fmt(design.v)),
            ("alpha", fmt(design.alpha)),
            ("gamma", fmt(phi.gamma if est == "sb" else phi.hyper.gamma)),
            ("minimax", "yes" if minimax else "no"),
            ("t", fmt(t)),
            ("kappa_ls", fmt(k_ls)),
            ("kappa_est", fmt(kappa_estimator(d, design.c, t))),
            ("kappa_worst_case", fmt(stab.kappa_est)),
            ("stable_guaranteed", "yes" if stab.guaranteed else "no"),
        ]
    else:
        raise ConfigError(f"unknown estimator {est!r}; use ls, ridge:K, sb or gb")

    lines.append(("beta", fmt_vec(beta)))
    _report(lines, sys.stdout)
    if args.out:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "beta"])
        for i, b in enumerate(beta, start=1):
            writer.writerow([i, repr(float(b))])
        Path(args.out).write_text(buf.getvalue())
    return 0


# ---------------------------------------------------------------------------
# bounds


def _spectrum(args) -> np.ndarray:
    if args.mu is not None:
        return geometric_spectrum(args.mu, args.p)
    d = args.d
    if d.size < 1 or np.any(d <= 0) or np.any(np.diff(d) > 0):
        raise DataError(f"d must be positive and nonincreasing, got {fmt_vec(d)}")
    return d


def cmd_bounds(args) -> int:
    d = _spectrum(args)
    j, n = args.j, args.n
    c_unit = np.ones(d.size) if args.c is None else args.c
    if c_unit.shape != d.shape:
        raise DataError(f"c has {c_unit.size} entries, d has {d.size}")
    bound = minimax_phi_bound(d, c_unit, j, n)
    design = auto_design(d, j, n, eta_pick=args.eta, nu_pick=args.nu, cp_ratio=args.cp_ratio,
                         gamma_floor=not args.no_gamma_floor)
    star = design.eta_or_nu_star
    fields = [
        ("p", d.size),
        ("n", n),
        ("j", j),
        ("kappa_ls", kappa_ls(d)),
        ("bound", bound),
        ("regime_indicator", regime_indicator(d, j)),
        ("regime", design.branch),
        ("root_star", math.nan if star is None else star),
        ("root_used", design.eta_or_nu_used),
        ("u", design.u),
        ("v", design.v),
        ("alpha", design.alpha),
        ("gamma", design.gamma),
        ("design_bound", minimax_phi_bound(d, design.c, j, n)),
    ]
    if args.format == "csv":
        writer = csv.writer(sys.stdout, lineterminator="\n")
        writer.writerow(["key", "value"])
        for key, value in fields:
            writer.writerow([key, value if isinstance(value, str) else
                             str(value) if isinstance(value, int) else repr(float(value))])
        for i, (di, ci) in enumerate(zip(d, design.c), start=1):
            writer.writerow([f"d{i}", repr(float(di))])
            writer.writerow([f"c{i}", repr(float(ci))])
    else:
        lines = [(k, v if isinstance(v, str) else fmt(v)) for k, v in fields]
        lines += [("d", fmt_vec(d)), ("c", fmt_vec(design.c))]
        _report(lines, sys.stdout)
    return 0


# ---------------------------------------------------------------------------
# simulate

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": {"type": "number"}, "minItems": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["n", "j", "estimator"],
    "properties": {
        "p": {"type": "integer", "minimum": 3},
        "n": {"type": "integer", "minimum": 1},
        "d": _VEC,
        "mu": {"type": "number", "exclusiveMinimum": 1},
        "theta_value": _NUM,
        "sigma": {"type": "number", "exclusiveMinimum": 0},
        "j": _NUM,
        "reps": {"type": "integer", "minimum": 10},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "cell_id": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "output": {"type": "string"},
        "error_model": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["normal", "student_t", "scale_mixture"]},
                "df": {"type": "number"},
                "scales": _VEC,
                "weights": _VEC,
            },
        },
        "estimator": {
            "type": "object",
            "additionalProperties": False,
            "required": ["type"],
            "properties": {
                "type": {"enum": ["design", "table1", "custom"]},
                "protocol": {"enum": list(PROTOCOLS)},
                "eta": _NUM,
                "nu": _NUM,
                "cp_ratio": _NUM,
                "gamma_floor": {"type": "boolean"},
                "c": _VEC,
                "phi": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["type"],
                    "properties": {
                        "type": {"enum": ["zero", "sb", "gb"]},
                        "alpha": _NUM,
                        "gamma": _NUM,
                        "a": _NUM,
                        "b": _NUM,
                        "e": _NUM,
                    },
                },
            },
        },
    },
    "oneOf": [{"required": ["d"]}, {"required": ["mu"]}],
}


def _path_of(err: jsonschema.ValidationError) -> str:
    return ".".join(str(x) for x in err.absolute_path) or "<root>"


def validate_config(cfg) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        msgs = []
        for err in errors:
            if err.validator == "additionalProperties":
                allowed = set(err.schema.get("properties", {}))
                bad = sorted(set(err.instance) - allowed)
                msgs.append(f"{_path_of(err)}: unknown key(s) {', '.join(map(repr, bad))}")
            elif err.validator == "oneOf" and not err.absolute_path:
                msgs.append("<root>: give exactly one of 'd' and 'mu'")
            else:
                msgs.append(f"{_path_of(err)}: {err.message}")
        raise ConfigError("invalid configuration: " + "; ".join(msgs))


def load_config(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    validate_config(cfg)
    return cfg


def _error_model(spec: dict | None):
    if spec is None or spec["type"] == "normal":
        return Normal()
    if spec["type"] == "student_t":
        if "df" not in spec:
            raise ConfigError("error_model.df is required for student_t")
        return StudentT(spec["df"])
    if "scales" not in spec or "weights" not in spec:
        raise ConfigError("error_model.scales and error_model.weights are required for scale_mixture")
    return ScaleMixture(tuple(spec["scales"]), tuple(spec["weights"]))


def _estimator(cfg: dict, d: np.ndarray):
    """Return ``(estimator, regime, alpha, gamma)`` for a validated config."""
    est = cfg["estimator"]
    kind = est["type"]
    j, n, p = cfg["j"], cfg["n"], d.size
    if kind == "table1":
        if cfg.get("mu") is None:
            raise ConfigError("estimator.type 'table1' needs 'mu'")
        design = table1_design(cfg["mu"], j, est.get("protocol", "stated"))
        return design, design.branch, design.alpha, design.gamma
    if kind == "design":
        design = auto_design(d, j, n, eta_pick=est.get("eta"), nu_pick=est.get("nu"),
                             cp_ratio=est.get("cp_ratio", DEFAULT_CP_RATIO),
                             gamma_floor=est.get("gamma_floor", True))
        return design, design.branch, design.alpha, design.gamma
    if "c" not in est or "phi" not in est:
        raise ConfigError("estimator.type 'custom' needs 'c' and 'phi'")
    c = np.asarray(est["c"], dtype=float)
    phi_cfg = est["phi"]
    if phi_cfg["type"] == "zero":
        phi, alpha, gamma = ZeroShrinkage(), 0.0, math.nan
    elif phi_cfg["type"] == "sb":
        if "alpha" not in phi_cfg:
            raise ConfigError("estimator.phi.alpha is required for sb")
        phi = SimpleBayes(phi_cfg["alpha"], phi_cfg.get("gamma", 1.0))
        alpha, gamma = phi.alpha, phi.gamma
    else:
        missing = [k for k in ("a", "b", "e") if k not in phi_cfg]
        if missing:
            raise ConfigError(f"estimator.phi needs {', '.join(missing)} for gb")
        hyper = GBHyper(phi_cfg["a"], phi_cfg["b"], phi_cfg["e"], phi_cfg.get("gamma", 1.0))
        phi = GeneralizedBayes(hyper, p, n)
        alpha, gamma = phi.limit(), hyper.gamma
    return ShrinkageSpec(c, phi), regime(d, j), alpha, gamma


def build_sim(cfg: dict) -> tuple[SimConfig, str, float, float]:
    if cfg.get("mu") is not None:
        d = geometric_spectrum(cfg["mu"], cfg.get("p", 9))
    else:
        d = np.asarray(cfg["d"], dtype=float)
    estimator, reg, alpha, gamma = _estimator(cfg, d)
    theta = cfg.get("theta_value", 0.0)
    cell_id = cfg.get("cell_id")
    if cell_id is None:
        in_grid = (cfg["estimator"]["type"] == "table1" and cfg["mu"] in TABLE1_MUS
                   and theta in TABLE1_THETAS and cfg["j"] in (0, 1, 2))
        cell_id = table1_cell_id(cfg["mu"], theta, cfg["j"]) if in_grid else 0
    sim = SimConfig(
        n=cfg["n"], j=cfg["j"], estimator=estimator, theta_value=theta,
        d=None if cfg.get("mu") is not None else d, mu=cfg.get("mu"), p=cfg.get("p"),
        sigma=cfg.get("sigma", 1.0), reps=cfg.get("reps", DEFAULT_REPS),
        seed=cfg.get("seed", DEFAULT_SEED), cell_id=cell_id,
        error_model=_error_model(cfg.get("error_model")),
    )
    return sim, reg, alpha, gamma


def _dominance_ok(result) -> bool:
    return result.risk_ratio <= 1.0 + 3.0 * result.risk_ratio_se


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    for key in ("reps", "seed", "threads"):
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
    validate_config(cfg)
    sim, reg, alpha, gamma = build_sim(cfg)
    result = risk_and_ecn(sim, threads=cfg.get("threads", 1))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    writer.writerow(result_row(cfg.get("mu"), sim.theta_value, sim.j, result, reg, alpha, gamma))
    _emit(buf.getvalue(), args.out or cfg.get("output"))
    if args.assert_minimax and not _dominance_ok(result):
        sys.stderr.write(
            f"dominance check failed: risk ratio {fmt(result.risk_ratio)} > "
            f"1 + 3 * {fmt(result.risk_ratio_se)}\n"
        )
        return EXIT_ASSERT
    return 0


# ---------------------------------------------------------------------------
# table1


def cmd_table1(args) -> int:
    if args.reps < 10:
        raise ConfigError(f"--reps must be at least 10, got {args.reps}")
    rows = table1(reps=args.reps, seed=args.seed, protocol=args.protocol, threads=args.threads)
    _emit(table1_csv(rows), args.out)
    failed = [r for r in rows if not _dominance_ok(r.result)]
    if args.assert_minimax and failed:
        for r in failed:
            sys.stderr.write(
                f"dominance check failed at mu={fmt(r.mu)} theta={fmt(r.theta)} j={r.j}: "
                f"risk ratio {fmt(r.result.risk_ratio)}\n"
            )
        return EXIT_ASSERT
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gbridge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    fit = sub.add_parser("fit", help="fit a regression from a CSV design")
    fit.add_argument("data", help="CSV file: design columns followed by the response")
    fit.add_argument("--header", action="store_true", help="skip the first row")
    fit.add_argument("--estimator", default="ls", help="ls, ridge:K, sb or gb (default: ls)")
    fit.add_argument("--loss", type=float, default=0.0, help="loss order j (default: 0)")
    fit.add_argument("--alpha", type=float, default=None, help="override alpha (sb)")
    fit.add_argument("--gamma", type=float, default=None, help="override gamma (sb, gb)")
    fit.add_argument("--a", type=float, default=None, help="override prior a (gb)")
    fit.add_argument("--b", type=float, default=None, help="override prior b (gb)")
    fit.add_argument("--e", type=float, default=None, help="override prior e (gb)")
    _design_flags(fit)
    fit.add_argument("--out", default=None, help="write coefficients as CSV to this path")
    fit.set_defaults(func=cmd_fit)

    bounds = sub.add_parser("bounds", help="minimax bound, regime and design for a spectrum")
    spec = bounds.add_mutually_exclusive_group(required=True)
    spec.add_argument("--mu", type=float, help="geometric spectrum mu^((p-1)/2), ..., mu^(-(p-1)/2)")
    spec.add_argument("--d", type=parse_floats, help="comma-separated nonincreasing eigenvalues")
    bounds.add_argument("--p", type=int, default=9, help="dimension for --mu (default: 9)")
    bounds.add_argument("--j", type=float, required=True, help="loss order")
    bounds.add_argument("--n", type=int, required=True, help="residual degrees of freedom")
    bounds.add_argument("--c", type=parse_floats, default=None,
                        help="shrinkage factors for the reported bound (default: all ones)")
    _design_flags(bounds)
    bounds.add_argument("--no-gamma-floor", action="store_true",
                        help="do not raise gamma to 1 in the design")
    bounds.add_argument("--format", choices=("table", "csv"), default="table",
                        help="output format (default: table)")
    bounds.set_defaults(func=cmd_bounds)

    sim = sub.add_parser("simulate", help="Monte Carlo risk and condition number for one config")
    sim.add_argument("config", help="JSON configuration file")
    sim.add_argument("--reps", type=int, default=None, help="override replications")
    sim.add_argument("--seed", type=int, default=None, help="override seed")
    sim.add_argument("--threads", type=int, default=None, help="worker threads")
    sim.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    sim.add_argument("--assert-minimax", action="store_true",
                     help="exit 4 if the risk ratio exceeds 1 + 3 standard errors")
    sim.set_defaults(func=cmd_simulate)

    tab = sub.add_parser("table1", help="risk and condition-number grid for p=9, n=10")
    tab.add_argument("--reps", type=int, default=DEFAULT_REPS, help="replications per cell")
    tab.add_argument("--seed", type=int, default=DEFAULT_SEED, help="base seed")
    tab.add_argument("--threads", type=int, default=1, help="worker threads")
    tab.add_argument("--protocol", choices=PROTOCOLS, default="published",
                     help="exponent rule for loss order 2 (default: %(default)s)")
    tab.add_argument("--out", default=None, help="output CSV path (default: stdout)")
    tab.add_argument("--assert-minimax", action="store_true",
                     help="exit 4 if any cell's risk ratio exceeds 1 + 3 standard errors")
    tab.set_defaults(func=cmd_table1)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "threads", None) is not None and args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.func(args)
    except GBRidgeError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return exc.exit_code
    except OSError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return DataError.exit_code


if __name__ == "__main__":
    sys.exit(main())
