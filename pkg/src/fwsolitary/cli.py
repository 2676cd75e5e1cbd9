"""
Command-line front end: ``fw <command> [options]``.

Every run resolves its parameters (built-in defaults, then ``--config``,
then explicit flags, then ``--set key=value``), validates them all at once,
and writes ``manifest.json`` with the resolved values next to the command's
CSV/JSON outputs in ``--out``.

Exit status: 0 success, 2 configuration or domain error, 3 non-convergence,
4 blow-up, 5 I/O error.
"""
from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    ScanConfig,
    classify_sequence,
    stability_experiment,
    subadditivity_scan,
)
from .dynamics import EvolveConfig, evolve, export_trajectory
from .errors import BlowUpError, FWError
from .spectral_core import make_grid, read_field_csv, write_field_csv
from .traveling_wave import decay_rate, fit_decay, kernel_smooth, petviashvili_solve
from .variational_solver import MinimizeConfig, PenaltySpec, minimize_periodic

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3
EXIT_BLOWUP = 4
EXIT_IO = 5


def _pos(x):
    return x > 0


def _even_n(x):
    return x >= 8 and x % 2 == 0


# name -> (type, default, check, message); default None means required
_GRID = {
    "P": (float, 40.0, _pos, "half-period P must be positive"),
    "N": (int, 512, _even_n, "N must be an even integer >= 8"),
}
SCHEMAS = {
    "solve-wave": {
        "c": (float, None, lambda c: c > 1, "wave speed requires c > 1"),
        **_GRID,
        "tol": (float, 1e-10, _pos, "tol must be positive"),
        "max_iters": (int, 50000, _pos, "max_iters must be positive"),
    },
    "solve-variational": {
        "q": (float, None, _pos, "constraint Q(u) = q > 0 requires q > 0"),
        **_GRID,
        "r": (float, 0.0, lambda r: r >= 0, "r must be nonnegative (0 means r = R)"),
        "max_iters": (int, 20000, _pos, "max_iters must be positive"),
        "grad_tol": (float, 1e-8, _pos, "grad_tol must be positive"),
        "step0": (float, 1.0, _pos, "step0 must be positive"),
        "penalty.R": (float, 0.0, lambda r: r >= 0, "penalty.R must be nonnegative (0 means default)"),
        "penalty.scale": (float, 1.0, _pos, "penalty.scale must be positive"),
    },
    "evolve": {
        "init": (str, None, lambda s: bool(s), "init must name a profile CSV"),
        "t_end": (float, None, _pos, "t_end must be positive"),
        "dt": (float, 0.0, lambda d: d >= 0, "dt must be positive (0 means auto)"),
        "dealias": (bool, True, lambda b: True, ""),
        "record_every": (int, 100, _pos, "record_every must be positive"),
    },
    "stability": {
        "c": (float, None, lambda c: c > 1, "wave speed requires c > 1"),
        **_GRID,
        "tol": (float, 1e-10, _pos, "tol must be positive"),
        "delta": (float, 1e-3, lambda d: d >= 0, "delta must be nonnegative"),
        "seeds": (int, 10, _pos, "seeds must be positive"),
        "t_end": (float, 20.0, _pos, "t_end must be positive"),
        "s": (float, 0.75, lambda s: 0 <= s <= 1, "Sobolev index s must lie in [0, 1]"),
        "sample_dt": (float, 1.0, _pos, "sample_dt must be positive"),
        "workers": (int, 1, _pos, "workers must be positive"),
    },
    "subadditivity": {
        "q_list": (str, "0.5,1,1.5,2,3", lambda s: bool(s), "q_list must be a comma-separated list"),
        **_GRID,
        "restarts": (int, 3, _pos, "restarts must be positive"),
        "max_iters": (int, 20000, _pos, "max_iters must be positive"),
        "grad_tol": (float, 1e-8, _pos, "grad_tol must be positive"),
        "workers": (int, 1, _pos, "workers must be positive"),
    },
    "kernel": {
        "c": (float, None, lambda c: c > 1, "wave speed requires c > 1"),
        "y_max": (float, 20.0, _pos, "y_max must be positive"),
        "n_points": (int, 401, lambda n: n >= 2, "n_points must be >= 2"),
    },
    "decay": {
        "profile": (str, None, lambda s: bool(s), "profile must name a CSV"),
        "c": (float, 0.0, lambda c: c == 0 or c > 1, "c must exceed 1 (0 means unknown)"),
        "amp_lo": (float, 1e-8, _pos, "amp_lo must be positive"),
        "amp_hi": (float, 1e-3, _pos, "amp_hi must be positive"),
    },
    "classify": {
        "densities": (str, None, lambda s: bool(s), "densities must name a directory"),
        "q": (float, 0.0, lambda q: q >= 0, "q must be nonnegative (0 means inferred)"),
        "eps": (float, 0.0, lambda e: e >= 0, "eps must be nonnegative (0 means 0.05 q)"),
        "r": (float, 5.0, _pos, "r must be positive"),
    },
}
COMMANDS = tuple(SCHEMAS)


def _coerce(kind, value):
    if kind is bool:
        if isinstance(value, bool):
            return value
        s = str(value).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise ValueError(f"not an integer: {value!r}")
        if isinstance(value, str):
            f = float(value)
            if not f.is_integer():
                raise ValueError(f"not an integer: {value!r}")
            return int(f)
        return int(value)
    if kind is float:
        v = float(value)
        if not math.isfinite(v):
            raise ValueError(f"not finite: {value!r}")
        return v
    return str(value)


@dataclass
class RunConfig:
    command: str
    params: dict = dc_field(default_factory=dict)
    out_dir: Path = Path("fw_run")
    seed: int = 0

    def resolved(self) -> dict:
        """Parameters with defaults filled in and values coerced (invalid ones left raw)."""
        schema = SCHEMAS.get(self.command, {})
        out = {}
        for name, (kind, default, _, _) in schema.items():
            if name in self.params:
                try:
                    out[name] = _coerce(kind, self.params[name])
                except (TypeError, ValueError):
                    out[name] = self.params[name]
            elif default is not None:
                out[name] = default
        return out


def validate(config: RunConfig) -> list:
    """Every problem with ``config``; an empty list means it can run."""
    diags = []
    if config.command not in SCHEMAS:
        return [f"command: unknown command {config.command!r}; expected one of {', '.join(COMMANDS)}"]
    schema = SCHEMAS[config.command]
    for name in config.params:
        if name not in schema:
            diags.append(f"{name}: unknown parameter for {config.command}")
    for name, (kind, default, check, msg) in schema.items():
        if name not in config.params:
            if default is None:
                diags.append(f"{name}: required parameter missing")
            continue
        raw = config.params[name]
        try:
            v = _coerce(kind, raw)
        except (TypeError, ValueError):
            diags.append(f"{name}: expected {kind.__name__}, got {raw!r}")
            continue
        if not check(v):
            diags.append(f"{name}: {msg} (got {v!r})")
    try:
        int(config.seed)
    except (TypeError, ValueError):
        diags.append(f"seed: expected integer, got {config.seed!r}")
    if config.command == "subadditivity" and "q_list" in config.params:
        try:
            qs = _parse_list(config.params["q_list"])
            if not qs or any(q <= 0 for q in qs):
                diags.append("q_list: constraint Q(u) = q > 0 requires every q > 0")
        except ValueError:
            diags.append(f"q_list: not a comma-separated list of numbers: {config.params['q_list']!r}")
    if config.command == "decay":
        p = config.resolved()
        if isinstance(p.get("amp_lo"), float) and isinstance(p.get("amp_hi"), float) \
                and not p["amp_lo"] < p["amp_hi"]:
            diags.append("amp_lo: must be below amp_hi")
    return diags


def _parse_list(s):
    if isinstance(s, (list, tuple)):
        return [float(x) for x in s]
    return [float(x) for x in str(s).split(",") if x.strip()]


def _dump(path: Path, doc):
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=True) + "\n")


# ---------------------------------------------------------------------------
# commands; each returns (exit status, summary dict)

def _cmd_solve_wave(p, out, seed):
    grid = make_grid(p["P"], p["N"])
    w = petviashvili_solve(p["c"], grid, tol=p["tol"], max_iters=p["max_iters"])
    write_field_csv(w.field, out / "profile.csv")
    doc = {"c": w.speed_c, "mass_q": w.mass_q, "residual_l2": w.residual_l2,
           "converged": w.converged, "iterations": w.iterations, "status": w.status,
           "stabilizer": w.stabilizer, "amplitude": float(np.max(w.field.values)),
           "sigma_theory": decay_rate(w.speed_c), "sigma_fit": None, "r_squared": None}
    if w.converged:
        try:
            fit = fit_decay(w)
            doc.update(sigma_fit=fit.sigma_fit, r_squared=fit.r_squared,
                       fit_window=list(fit.window))
        except FWError as exc:
            doc["fit_error"] = str(exc)
    _dump(out / "wave.json", doc)
    return (EXIT_OK if w.converged else EXIT_NONCONVERGED), doc


def _cmd_solve_variational(p, out, seed):
    grid = make_grid(p["P"], p["N"])
    default = PenaltySpec.default_for(p["q"])
    spec = PenaltySpec(R=p["penalty.R"] or default.R, scale=p["penalty.scale"])
    cfg = MinimizeConfig(q=p["q"], grid=grid, r=p["r"] or None, max_iters=p["max_iters"],
                         grad_tol=p["grad_tol"], step0=p["step0"])
    res = minimize_periodic(cfg, spec)
    write_field_csv(res.minimizer, out / "minimizer.csv")
    doc = res.to_dict()
    doc["penalty"] = {"R": spec.R, "scale": spec.scale}
    _dump(out / "result.json", doc)
    return (EXIT_OK if res.success else EXIT_NONCONVERGED), doc


def _cmd_evolve(p, out, seed):
    u0 = read_field_csv(p["init"])
    cfg = EvolveConfig(t_end=p["t_end"], dt=p["dt"] or "auto", dealias=p["dealias"],
                       record_every=p["record_every"])
    try:
        states, trace = evolve(u0, cfg)
    except BlowUpError as exc:
        export_trajectory(out / "trajectory", exc.states, exc.trace, blowup_time=exc.time)
        return EXIT_BLOWUP, {"blowup_time": exc.time}
    export_trajectory(out / "trajectory", states, trace)
    dm, dq = trace.relative_drift()
    return EXIT_OK, {"n_states": len(states), "mass_drift": dm, "q_drift": dq}


def _cmd_stability(p, out, seed):
    grid = make_grid(p["P"], p["N"])
    w = petviashvili_solve(p["c"], grid, tol=p["tol"])
    if not w.converged:
        return EXIT_NONCONVERGED, {"status": w.status}
    rep = stability_experiment(w, p["delta"], p["t_end"], p["s"], n_seeds=p["seeds"], seed=seed,
                               sample_dt=p["sample_dt"], workers=p["workers"],
                               out_dir=out / "seeds")
    doc = rep.to_dict()
    doc["per_seed"] = {str(k): v for k, v in doc["per_seed"].items()}
    doc["blowups"] = {str(k): v for k, v in doc["blowups"].items()}
    _dump(out / "stability.json", doc)
    return (EXIT_BLOWUP if rep.blowups else EXIT_OK), {"max_metric": rep.max_metric,
                                                      "ratio": rep.ratio}


def _cmd_subadditivity(p, out, seed):
    cfg = ScanConfig(grid=make_grid(p["P"], p["N"]), restarts=p["restarts"],
                     max_iters=p["max_iters"], grad_tol=p["grad_tol"], seed=seed,
                     workers=p["workers"])
    rep = subadditivity_scan(sorted(_parse_list(p["q_list"])), cfg)
    doc = rep.to_dict()
    _dump(out / "subadditivity.json", doc)
    return (EXIT_OK if all(rep.converged) else EXIT_NONCONVERGED), {"all_strict": rep.all_strict}


def _cmd_kernel(p, out, seed):
    y = np.linspace(-p["y_max"], p["y_max"], p["n_points"])
    g = kernel_smooth(y, p["c"])
    with (out / "kernel.csv").open("w") as fh:
        fh.write("y,g\n")
        for a, b in zip(y, g):
            fh.write(f"{a:.17g},{b:.17g}\n")
    doc = {"c": p["c"], "sigma": decay_rate(p["c"]), "g0": kernel_smooth(0.0, p["c"]),
           "local_coefficient": 1.0 / p["c"]}
    _dump(out / "kernel.json", doc)
    return EXIT_OK, doc


def _cmd_decay(p, out, seed):
    f = read_field_csv(p["profile"])
    fit = fit_decay(f, amp_band=(p["amp_lo"], p["amp_hi"]))
    sigma_th = decay_rate(p["c"]) if p["c"] > 1 else None
    doc = {"sigma_fit": fit.sigma_fit, "sigma_theory": sigma_th, "r_squared": fit.r_squared,
           "window": list(fit.window), "tail_sigmas": list(fit.tail_sigmas),
           "n_points": fit.n_points, "accepted": fit.accepted}
    if sigma_th:
        doc["relative_error"] = abs(fit.sigma_fit - sigma_th) / sigma_th
    _dump(out / "decay.json", doc)
    return EXIT_OK, doc


def _cmd_classify(p, out, seed):
    d = Path(p["densities"])
    files = sorted(d.glob("*.csv"))
    if not files:
        raise FileNotFoundError(f"no CSV files in {d}")
    dens = [read_field_csv(f) for f in files]
    q = p["q"] or float(dens[0].grid.spacing * np.sum(dens[0].values))
    eps = p["eps"] or 0.05 * q
    v = classify_sequence(dens, q, eps, r=p["r"])
    doc = v.to_dict()
    doc.update(q=q, eps=eps, files=[f.name for f in files])
    _dump(out / "classification.json", doc)
    return EXIT_OK, {"case_label": v.case_label}


HANDLERS = {
    "solve-wave": _cmd_solve_wave,
    "solve-variational": _cmd_solve_variational,
    "evolve": _cmd_evolve,
    "stability": _cmd_stability,
    "subadditivity": _cmd_subadditivity,
    "kernel": _cmd_kernel,
    "decay": _cmd_decay,
    "classify": _cmd_classify,
}


def run(config: RunConfig) -> int:
    """Validate, execute and write ``manifest.json``; returns the exit status."""
    diags = validate(config)
    if diags:
        for d in diags:
            print(f"config error: {d}", file=sys.stderr)
        return EXIT_CONFIG
    params = config.resolved()
    out = Path(config.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    t0 = time.perf_counter()
    summary = {}
    try:
        status, summary = HANDLERS[config.command](params, out, int(config.seed))
    except FWError as exc:
        print(f"error: {exc}", file=sys.stderr)
        status, summary = EXIT_CONFIG, {"error": str(exc)}
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        status, summary = EXIT_IO, {"error": str(exc)}
    manifest = {
        "command": config.command,
        "params": params,
        "seed": int(config.seed),
        "exit_status": status,
        "summary": summary,
        "versions": {"fwsolitary": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "wall_time_s": time.perf_counter() - t0,
    }
    try:
        _dump(out / "manifest.json", manifest)
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return status


# ---------------------------------------------------------------------------
# argument parsing

def _flag(name):
    return "--" + name.replace("_", "-").replace(".", "-")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fw", description="Solitary waves of u_t + u u_x + L u_x = 0.")
    sub = parser.add_subparsers(dest="command", required=True)
    for cmd, schema in SCHEMAS.items():
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", help="JSON file with parameters")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a parameter (repeatable)")
        sp.add_argument("--out", default=None, help="output directory (default fw_run)")
        sp.add_argument("--seed", default=None, help="random seed (default 0)")
        for name in schema:
            sp.add_argument(_flag(name), dest=name, default=None)
    return parser


def config_from_args(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    params = {}
    out_dir, seed = "fw_run", 0
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise _ArgError(f"config: malformed JSON in {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise _ArgError("config: top level must be a JSON object")
        inner = doc.get("params", {k: v for k, v in doc.items()
                                   if k not in ("command", "seed", "out_dir")})
        for k, v in dict(inner).items():
            if isinstance(v, dict):
                for kk, vv in v.items():
                    params[f"{k}.{kk}"] = vv
            else:
                params[k] = v
        out_dir = doc.get("out_dir", out_dir)
        seed = doc.get("seed", seed)
    for name in SCHEMAS[args.command]:
        v = getattr(args, name)
        if v is not None:
            params[name] = v
    for item in args.set:
        if "=" not in item:
            raise _ArgError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        params[k.strip().replace("-", "_")] = v
    if args.out is not None:
        out_dir = args.out
    if args.seed is not None:
        seed = args.seed
    return RunConfig(command=args.command, params=params, out_dir=Path(out_dir), seed=seed)


class _ArgError(Exception):
    pass


def main(argv=None) -> int:
    try:
        cfg = config_from_args(sys.argv[1:] if argv is None else argv)
    except _ArgError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
