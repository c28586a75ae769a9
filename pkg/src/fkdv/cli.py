"""Command-line front end.

Subcommands: kernel, solve, continue, solitary, verify.  Settings come from
an optional flat ``key = value`` file, overridden by flags.  Reports are
JSON (with ``"schema": 1``); profiles are two-column CSV.  Exit codes:
0 all checks pass, 1 configuration error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    check_bounds,
    check_mean_identity,
    check_monotonicity,
    check_speed_windows,
    fit_decay,
)
from .errors import FKdVError
from .kernel import (
    KernelMethod,
    SymbolSpec,
    check_regular_second_derivative_bound,
    kernel_mass,
    kernel_split,
    kernel_values,
    periodized_kernel_values,
    regular_bound_bracket,
)
from .operators import GridFunction, Parity, PeriodicGrid, apply_lambda, convolve_direct
from .solitary import construct_solitary, default_schedule
from .solver import SolverOptions, continue_branch, jacobian_apply, residual

log = logging.getLogger(__name__)

SCHEMA = 1
EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
OUT_ENV = "FKDV_OUT_DIR"


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    s: float = 1.0
    lambda_list: list[float] = field(default_factory=list)
    P0: float = 2.0 * math.pi
    N: int = 1024
    escalation_cap: float = 256.0 * math.pi
    newton_tol: float = 1e-12
    limit_tol: float = 1e-8
    constraint_tol: float = 1e-12
    output_dir: str = "fkdv_out"
    seed: int = 0

    def validate(self, need_lambda: bool = False) -> "RunConfig":
        if not (math.isfinite(self.s) and self.s > 0):
            raise ConfigError(f"s must be a positive real, got {self.s}")
        if not (math.isfinite(self.P0) and self.P0 > 0):
            raise ConfigError(f"period must be positive, got {self.P0}")
        if self.N < 8 or self.N % 2:
            raise ConfigError(f"n-points must be an even integer >= 8, got {self.N}")
        if not self.escalation_cap >= self.P0:
            raise ConfigError("escalation cap must be at least the starting period")
        for name in ("newton_tol", "limit_tol", "constraint_tol"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if need_lambda and not self.lambda_list:
            raise ConfigError("at least one lambda is required")
        if any(not (0.0 < lam <= 1.0) for lam in self.lambda_list):
            raise ConfigError("every lambda must lie in (0, 1]")
        return self

    @property
    def spec(self) -> SymbolSpec:
        return SymbolSpec(self.s)

    @property
    def solver_options(self) -> SolverOptions:
        return SolverOptions(
            newton_tol=self.newton_tol, constraint_tol=self.constraint_tol, N=self.N
        )


# key in config file / flag dest -> (RunConfig field, parser)
_KEYS = {
    "s": ("s", float),
    "lambda": ("lambda_list", lambda v: _parse_lambdas(v)),
    "period": ("P0", float),
    "n_points": ("N", int),
    "escalation_cap": ("escalation_cap", float),
    "newton_tol": ("newton_tol", float),
    "limit_tol": ("limit_tol", float),
    "constraint_tol": ("constraint_tol", float),
    "out": ("output_dir", str),
    "seed": ("seed", int),
}


def _parse_lambdas(text) -> list[float]:
    if isinstance(text, list):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def read_config_file(path) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def build_config(args: argparse.Namespace) -> RunConfig:
    raw: dict = {}
    if getattr(args, "config", None):
        try:
            raw.update(read_config_file(args.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
    for key in _KEYS:
        value = getattr(args, key, None)
        if value is not None:
            raw[key] = value
    cfg = RunConfig(output_dir=os.environ.get(OUT_ENV, RunConfig.output_dir))
    for key, value in raw.items():
        name, conv = _KEYS[key]
        try:
            setattr(cfg, name, conv(value))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {value!r}") from exc
    return cfg


# --------------------------------------------------------------------------
# output


def _clean(obj):
    """Make an object JSON-safe: floats stay floats, non-finite become null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if hasattr(obj, "value") and isinstance(getattr(obj, "value"), str):
        return obj.value
    return obj


def dumps(obj) -> str:
    # json emits floats via repr, i.e. shortest round-trip decimals
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def atomic_write(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def csv_text(x, value) -> str:
    lines = ["x,value"]
    lines += [f"{float(a)!r},{float(b)!r}" for a, b in zip(x, value)]
    return "\n".join(lines) + "\n"


def read_csv(path) -> tuple[np.ndarray, np.ndarray]:
    rows = Path(path).read_text().splitlines()[1:]
    data = np.array([[float(v) for v in r.split(",")] for r in rows if r])
    return data[:, 0], data[:, 1]


def _timestamp() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat()


@dataclass
class ProfileRecord:
    x: np.ndarray
    value: np.ndarray
    metadata: dict

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.value = np.asarray(self.value, dtype=float)
        if self.x.shape != self.value.shape:
            raise ValueError("x and value must have equal length")
        if self.x.size > 1 and np.any(np.diff(self.x) <= 0):
            raise ValueError("x must be strictly increasing")

    def metadata_json(self, csv_name: str) -> str:
        return dumps({"schema": SCHEMA, "profile_csv": csv_name, **self.metadata})

    def write(self, out_dir: Path, stem: str) -> tuple[Path, Path]:
        csv_path = atomic_write(Path(out_dir) / f"{stem}.csv", csv_text(self.x, self.value))
        json_path = atomic_write(Path(out_dir) / f"{stem}.json", self.metadata_json(csv_path.name))
        return csv_path, json_path

    @classmethod
    def read(cls, json_path) -> "ProfileRecord":
        json_path = Path(json_path)
        meta = json.loads(json_path.read_text())
        meta.pop("schema", None)
        csv_name = meta.pop("profile_csv")
        x, v = read_csv(json_path.parent / csv_name)
        return cls(x, v, meta)


def _profile_record(x, values, *, s, lam, P, mu, kind, residual_norm, converged=True):
    # periodic grids start at -P/2; the last node P/2 - dx keeps x increasing
    return ProfileRecord(
        x, values,
        {
            "s": s, "lambda": lam, "P": P, "mu": mu, "kind": kind,
            "residual_norm": residual_norm, "converged": converged,
            "timestamp": _timestamp(), "tool_version": __version__,
        },
    )


def _fmt(v: float) -> str:
    return repr(float(v))


def _report(out_dir: Path, name: str, body: dict) -> Path:
    payload = {"schema": SCHEMA, "timestamp": _timestamp(), "tool_version": __version__}
    payload.update(body)
    return atomic_write(Path(out_dir) / name, dumps(payload))


# --------------------------------------------------------------------------
# commands


def cmd_kernel(cfg: RunConfig) -> int:
    spec = cfg.spec
    out = Path(cfg.output_dir)
    s = spec.s
    x = np.linspace(0.25, 10.0, 40)
    k = kernel_values(spec, x)
    atomic_write(out / f"kernel_s{_fmt(s)}.csv", csv_text(x, k))
    checks = {}

    mass = kernel_mass(spec)
    checks["mass"] = abs(mass.value - 1.0) <= 1e-6

    # near-origin singular model and large-x exponential envelope
    split = kernel_split(spec, cfg.P0)
    rows = []
    # for s > 1 the singular term sits below the finite value K(0)
    k0 = float(kernel_values(spec, [0.0])[0]) if s > 1.0 else 0.0
    for xv in (1e-4, 1e-3, 1e-2):
        kv = float(kernel_values(spec, [xv])[0])
        row = {"x": xv, "K": kv, "model": float(split.singular_part(np.array([xv]))[0]),
               "regime": "origin"}
        if s > 1.0:
            row["K_minus_K0"] = kv - k0
        rows.append(row)
    big = np.array([10.0, 20.0, 30.0])
    kb = kernel_values(spec, big)
    env = big ** (0.5 * s - 1.0) * np.exp(-big) / (2.0 ** (0.5 * s) * math.gamma(0.5 * s))
    for xv, kv, ev in zip(big, kb, env):
        rows.append({"x": xv, "K": kv, "model": ev, "regime": "tail"})
    rate = -np.polyfit(big, np.log(kb / big ** (0.5 * s - 1.0)), 1)[0]
    checks["tail_rate"] = abs(rate - 1.0) < 1e-2

    body = {
        "command": "kernel", "s": s, "P": cfg.P0,
        "mass": mass.value, "mass_error": mass.error,
        "singular_form": split.singular_form, "singular_exponent": split.singular_exponent,
        "singular_coefficient": split.coefficient,
        "asymptotic_table": rows, "tail_rate_fit": rate,
    }
    if s == 2.0:
        err = float(np.max(np.abs(k - 0.5 * np.exp(-x)) / (0.5 * np.exp(-x))))
        body["closed_form_relerr"] = err
        checks["closed_form"] = err <= 1e-8
    if s == 1.0:
        r2 = check_regular_second_derivative_bound(cfg.P0)
        bracket = regular_bound_bracket()
        body["r2_bound"] = r2
        body["r2_bound_limit"] = 4.0 / math.pi
        body["bracket"] = bracket
        checks["r2_bound"] = r2 <= 4.0 / math.pi + 1e-3
        checks["bracket"] = abs(bracket - 2.0) <= 1e-6
    body["checks"] = checks
    body["passed"] = all(checks.values())
    _report(out, f"kernel_s{_fmt(s)}.json", body)
    return EXIT_OK if body["passed"] else EXIT_NUMERIC


def _wave_diagnostics(w) -> dict:
    return {
        "mean_identity_relerr": check_mean_identity(w),
        "bound_violation": check_bounds(w),
        "monotonicity_violation": check_monotonicity(w),
        "speed_window_ok": check_speed_windows(w),
    }


def _solve_branch(cfg: RunConfig, command: str) -> int:
    spec, out = cfg.spec, Path(cfg.output_dir)
    targets = sorted(set(cfg.lambda_list))
    entries, status = [], EXIT_OK
    solutions = []
    try:
        solutions = continue_branch(spec, cfg.P0, targets, cfg.solver_options, N=cfg.N)
    except FKdVError as exc:
        status = EXIT_NUMERIC
        log.error("%s", exc)
        entries.append({"converged": False, "error": f"{type(exc).__name__}: {exc}"})

    solved = {sol.lam: sol for sol in solutions}
    for lam in targets:
        sol = solved.get(lam)
        if sol is None:
            entries.append({"lambda": lam, "converged": False})
            continue
        stem = f"{command}_s{_fmt(cfg.s)}_P{_fmt(cfg.P0)}_lam{_fmt(lam)}"
        if command == "solve":
            rec = _profile_record(
                sol.grid.nodes, sol.phi.values, s=cfg.s, lam=lam, P=cfg.P0, mu=sol.mu,
                kind="periodic", residual_norm=sol.residual_norm,
            )
            rec.write(out, stem)
        diag = _wave_diagnostics(sol)
        ok = (diag["mean_identity_relerr"] <= 1e-6 and diag["bound_violation"] <= 1e-8
              and diag["speed_window_ok"])
        if not ok:
            status = EXIT_NUMERIC
        bp = sol.branch_point
        entries.append({
            "lambda": lam, "converged": True, "mu": sol.mu, "amplitude": sol.amplitude,
            "residual_norm": sol.residual_norm, "newton_iterations": sol.newton_iterations,
            "from_lambda": bp.from_lambda if bp else None,
            "profile": f"{stem}.csv" if command == "solve" else None,
            "diagnostics": diag, "checks_passed": ok,
        })
    _report(out, f"{command}_s{_fmt(cfg.s)}_P{_fmt(cfg.P0)}.json", {
        "command": command, "s": cfg.s, "P": cfg.P0, "N": cfg.N, "seed": cfg.seed,
        "newton_tol": cfg.newton_tol, "constraint_tol": cfg.constraint_tol,
        "results": entries, "passed": status == EXIT_OK,
    })
    return status


def cmd_solve(cfg: RunConfig) -> int:
    return _solve_branch(cfg, "solve")


def cmd_continue(cfg: RunConfig) -> int:
    return _solve_branch(cfg, "continue")


def cmd_solitary(cfg: RunConfig) -> int:
    spec, out = cfg.spec, Path(cfg.output_dir)
    schedule = default_schedule(cfg.P0, cfg.escalation_cap)
    status, results = EXIT_OK, []
    for lam in sorted(set(cfg.lambda_list)):
        stem = f"solitary_s{_fmt(cfg.s)}_lam{_fmt(lam)}"
        try:
            sw, esc = construct_solitary(
                spec, lam, schedule, limit_tol=cfg.limit_tol,
                options=cfg.solver_options, N0=cfg.N,
            )
            fit = fit_decay(sw)
        except FKdVError as exc:
            log.error("lambda=%s: %s", lam, exc)
            status = EXIT_NUMERIC
            results.append({"lambda": lam, "converged": False,
                            "error": f"{type(exc).__name__}: {exc}"})
            continue
        rec = _profile_record(
            sw.x, sw.Phi.values, s=cfg.s, lam=lam, P=sw.P_final, mu=sw.mu_lambda,
            kind="solitary", residual_norm=sw.residual_norm,
        )
        rec.write(out, stem)
        speed_ok = check_speed_windows(sw)
        checks = {
            "speed_window": speed_ok,
            "decay_rate": 0.3 * fit.predicted <= fit.rate <= 1.15 * fit.predicted,
            "positivity": float(sw.Phi.values.min()) >= -1e-8,
            "height_bound": float(sw.Phi.values.max()) <= sw.height_bound + 1e-8,
        }
        if not all(checks.values()):
            status = EXIT_NUMERIC
        results.append({
            "lambda": lam, "converged": True, "mu_lambda": sw.mu_lambda,
            "tail_level": sw.tail_level, "P_final": sw.P_final,
            "residual_norm": sw.residual_norm, "source_residual_norm": sw.source_residual_norm,
            "escalation_history": [{"P": p, "window_difference": d} for p, d in esc.history],
            "decay_rate_fit": fit.rate, "decay_rate_predicted": fit.predicted,
            "decay_fit_window": list(fit.window), "profile": f"{stem}.csv",
            "checks": checks,
        })
    _report(out, f"solitary_s{_fmt(cfg.s)}.json", {
        "command": "solitary", "s": cfg.s, "P0": cfg.P0, "escalation_cap": cfg.escalation_cap,
        "limit_tol": cfg.limit_tol, "results": results, "passed": status == EXIT_OK,
    })
    return status


def cmd_verify(cfg: RunConfig) -> int:
    """Fast self-checks of kernel, operator and solver at the configured s."""
    spec, out = cfg.spec, Path(cfg.output_dir)
    rng = np.random.default_rng(cfg.seed)
    checks, values = {}, {}

    values["kernel_mass"] = kernel_mass(spec).value
    checks["kernel_mass"] = abs(values["kernel_mass"] - 1.0) <= 1e-6

    xs = np.linspace(-0.5 * cfg.P0, 0.5 * cfg.P0, 64)
    xs = xs[np.abs(xs) > 1e-3]
    a = periodized_kernel_values(spec, cfg.P0, xs, KernelMethod.SERIES_TRANSLATES)
    b = periodized_kernel_values(spec, cfg.P0, xs, KernelMethod.FOURIER_SERIES)
    values["periodisation_gap"] = float(np.max(np.abs(a - b)))
    checks["periodisation"] = values["periodisation_gap"] <= 1e-8

    grid = PeriodicGrid(cfg.P0, 16)
    f = GridFunction(grid, rng.standard_normal(16), Parity.EVEN)
    values["operator_gap"] = float(np.max(np.abs(apply_lambda(spec, f).values
                                                 - convolve_direct(spec, f).values)))
    checks["operator"] = values["operator_gap"] <= 1e-6

    grid = PeriodicGrid(cfg.P0, 64)
    phi = GridFunction(grid, 0.1 * rng.standard_normal(64), Parity.EVEN)
    v = GridFunction(grid, rng.standard_normal(64), Parity.EVEN)
    mu = 0.8
    errs = []
    for h in (1e-4, 1e-5):
        plus = residual(spec, GridFunction(grid, phi.values + h * v.values), mu).values
        minus = residual(spec, GridFunction(grid, phi.values - h * v.values), mu).values
        fd = (plus - minus) / (2 * h)
        errs.append(float(np.max(np.abs(fd - jacobian_apply(spec, phi, mu, v).values))))
    values["jacobian_fd_errors"] = errs
    checks["jacobian"] = max(errs) <= 1e-8

    opts = replace(cfg.solver_options, N=256)
    sol = continue_branch(spec, cfg.P0, [0.5], opts, N=256)[-1]
    values["mean_identity_relerr"] = check_mean_identity(sol)
    values["bound_violation"] = check_bounds(sol)
    checks["mean_identity"] = values["mean_identity_relerr"] <= 1e-6
    checks["bounds"] = values["bound_violation"] <= 1e-8
    checks["speed_window"] = check_speed_windows(sol)

    passed = all(checks.values())
    _report(out, f"verify_s{_fmt(cfg.s)}.json", {
        "command": "verify", "s": cfg.s, "P": cfg.P0, "seed": cfg.seed,
        "values": values, "checks": checks, "passed": passed,
    })
    return EXIT_OK if passed else EXIT_NUMERIC


COMMANDS = {
    "kernel": (cmd_kernel, False),
    "solve": (cmd_solve, True),
    "continue": (cmd_continue, True),
    "solitary": (cmd_solitary, True),
    "verify": (cmd_verify, False),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value settings file")
    common.add_argument("--s", type=float)
    common.add_argument("--lambda", dest="lambda", type=_parse_lambdas,
                        help="comma-separated relative wave heights")
    common.add_argument("--period", type=float)
    common.add_argument("--n-points", dest="n_points", type=int)
    common.add_argument("--escalation-cap", dest="escalation_cap", type=float)
    common.add_argument("--newton-tol", dest="newton_tol", type=float)
    common.add_argument("--limit-tol", dest="limit_tol", type=float)
    common.add_argument("--constraint-tol", dest="constraint_tol", type=float)
    common.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./fkdv_out)")
    common.add_argument("--seed", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="fkdv", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    helps = {
        "kernel": "kernel samples, mass and asymptotic checks",
        "solve": "periodic waves at the given heights, with diagnostics",
        "continue": "branch table from the zero state through the given heights",
        "solitary": "solitary waves by period escalation and Galilean shift",
        "verify": "quick self-checks of kernel, operator and solver",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        fn, need_lambda = COMMANDS[args.command]
        cfg = build_config(args).validate(need_lambda)
    except ConfigError as exc:
        print(f"fkdv: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return fn(cfg)
    except FKdVError as exc:
        print(f"fkdv: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
