"""Command-line front end.

    hybridbell schmidt  --config run.json
    hybridbell bell     --config run.json --settings optimize
    hybridbell protocol --config run.json
    hybridbell mc       --config run.json --events 1000000 --seed 42 --out mc.json
    hybridbell sweep    --config run.json --param z --start 0 --stop 1 --num 41 --out sweep.csv
    hybridbell spdc-gen --config source.json --out state.json

Exit codes: 0 success, 2 config error, 3 degenerate input, 4 numerical
validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import spdc
from .chsh import AngleSettings, bell_value, bell_value_closed, canonical_settings, optimize_settings
from .continuum import save_tabulated
from .errors import DegenerateInputError, InvalidArgumentError, NumericalValidationError
from .hybrid import (
    VIOLATION_THRESHOLD,
    HybridState,
    grid_from_config,
    overlap_z,
    schmidt_decompose,
    state_from_config,
    state_with_overlap,
    validate_schmidt,
)
from .montecarlo import run_bell_experiment, write_counts_csv
from .protocol import run_protocol

EXIT_OK, EXIT_CONFIG, EXIT_DEGENERATE, EXIT_NUMERICAL = 0, 2, 3, 4


class ConfigError(InvalidArgumentError):
    pass


# ------------------------------------------------------------------ helpers

def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def load_run_config(path: str | None) -> tuple[dict, Path]:
    if path is None:
        raise ConfigError("--config is required")
    p = Path(path)
    try:
        cfg = json.loads(p.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg, p.resolve().parent


def state_from_run_config(cfg: dict, base_dir: Path) -> HybridState:
    sources = [k for k in ("state", "spdc") if k in cfg]
    if len(sources) != 1:
        raise ConfigError("config needs exactly one state source: 'state' or 'spdc'")
    if sources[0] == "spdc":
        src = cfg["spdc"]
        if src == "default":
            src = spdc.default_config()
        state, _ = spdc.state_from_source(src)
        return state
    record = dict(cfg["state"])
    record.setdefault("grid", cfg.get("grid"))
    return state_from_config(record, base_dir)


def _analyse(state: HybridState):
    s = schmidt_decompose(state)
    validate_schmidt(state, s)
    return s


def parse_settings(spec, kappa1: float, kappa2: float, workers: int = 1) -> AngleSettings:
    if spec is None or spec == "canonical":
        return canonical_settings()
    if spec == "optimize":
        return optimize_settings(kappa1, kappa2, workers=workers)[0]
    if isinstance(spec, dict):
        try:
            return AngleSettings(spec["alpha"], spec["alpha_prime"], spec["beta"], spec["beta_prime"])
        except KeyError as exc:
            raise ConfigError(f"explicit settings are missing {exc}") from exc
    if isinstance(spec, str):
        body = spec.split(":", 1)[1] if spec.startswith("explicit:") else spec
        try:
            values = [float(x) for x in body.split(",")]
        except ValueError as exc:
            raise ConfigError(f"cannot parse settings {spec!r}") from exc
        if len(values) == 4:
            return AngleSettings(*values)
    raise ConfigError(f"settings must be canonical, optimize, or four angles; got {spec!r}")


def _seed(args, cfg) -> int:
    seed = args.seed if args.seed is not None else cfg.get("monte_carlo", {}).get("seed")
    if seed is None:
        raise ConfigError("Monte Carlo runs need an explicit --seed")
    return int(seed)


def _events(args, cfg) -> int:
    n = args.events if args.events is not None else cfg.get("monte_carlo", {}).get("n_events")
    if n is None:
        raise ConfigError("Monte Carlo runs need --events (or monte_carlo.n_events)")
    return int(n)


# ----------------------------------------------------------------- commands

def cmd_schmidt(args, cfg, base) -> dict:
    state = state_from_run_config(cfg, base)
    s = _analyse(state)
    z = overlap_z(state)
    return {
        "theta": state.theta,
        "z": z.real,
        "z_imag": z.imag,
        "kappa1": s.kappa1,
        "kappa2": s.kappa2,
        "kappa_product": s.kappa_product,
        "violation_possible": bool(s.kappa_product > VIOLATION_THRESHOLD),
        "degenerate": bool(s.degenerate),
        "linear_polarizer_realizable": bool(s.linear_polarizer_realizable),
    }


def cmd_bell(args, cfg, base) -> dict:
    state = state_from_run_config(cfg, base)
    s = _analyse(state)
    settings = parse_settings(args.settings or cfg.get("settings"), s.kappa1, s.kappa2, args.workers)
    report = bell_value(state, s, settings)
    out = report.to_dict()
    if s.linear_polarizer_realizable:
        out["closed_form"] = bell_value_closed(s.kappa1, s.kappa2, settings)
    return out


def cmd_protocol(args, cfg, base) -> dict:
    state = state_from_run_config(cfg, base)
    s = _analyse(state)
    settings = parse_settings(args.settings or cfg.get("settings"), s.kappa1, s.kappa2, args.workers)
    return run_protocol(state, s, settings).to_dict()


def cmd_mc(args, cfg, base) -> dict:
    state = state_from_run_config(cfg, base)
    s = _analyse(state)
    settings = parse_settings(args.settings or cfg.get("settings"), s.kappa1, s.kappa2, args.workers)
    if args.exact:
        report = run_protocol(state, s, settings)
        return {"mode": "exact", "estimate": {"value": report.bell_value, "std_error": 0.0,
                                              "n_events": 0, "seed": None},
                "protocol": report.to_dict()}
    seed, n = _seed(args, cfg), _events(args, cfg)
    exp = run_bell_experiment(state, s, settings, n, seed, workers=args.workers,
                              use_true_kappa=bool(cfg.get("monte_carlo", {}).get("use_true_kappa", False)))
    counts = args.counts or (str(Path(args.out).with_suffix(".counts.csv")) if args.out else None)
    if counts:
        write_counts_csv(exp.records, counts)
    out = exp.to_dict()
    out["mode"] = "sampled"
    return out


SWEEP_COLUMNS = ["parameter", "value", "kappa_product", "B_canonical", "B_mc", "B_mc_std"]


def _sweep_values(args, cfg) -> tuple[str, np.ndarray, dict]:
    spec = dict(cfg.get("sweep", {}))
    for key in ("param", "start", "stop", "num"):
        if getattr(args, key) is not None:
            spec["parameter" if key == "param" else key] = getattr(args, key)
    param = spec.get("parameter")
    if param not in ("z", "theta"):
        raise ConfigError("sweep parameter must be 'z' or 'theta'")
    if "values" in spec:
        values = np.asarray(spec["values"], dtype=float)
    else:
        try:
            start, stop, num = float(spec["start"]), float(spec["stop"]), int(spec.get("num", 21))
        except KeyError as exc:
            raise ConfigError(f"sweep is missing {exc}") from exc
        if num < 1 or stop < start:
            raise ConfigError("empty sweep range")
        values = np.linspace(start, stop, num)
    if values.size == 0:
        raise ConfigError("empty sweep range")
    return param, values, spec


def cmd_sweep(args, cfg, base) -> str:
    param, values, spec = _sweep_values(args, cfg)
    grid = grid_from_config(cfg.get("grid"))
    fixed_theta = float(spec.get("theta", math.pi / 4))
    fixed_z = float(spec.get("z", 0.0))
    mc = args.events is not None or "monte_carlo" in cfg
    seed, n = (_seed(args, cfg), _events(args, cfg)) if mc else (None, None)
    settings = canonical_settings()

    def point(value: float) -> list:
        theta, z = (fixed_theta, value) if param == "z" else (value, fixed_z)
        state = state_with_overlap(theta, z, grid)
        s = _analyse(state)
        row = [param, float(value), s.kappa_product, bell_value(state, s, settings).bell_value, "", ""]
        if mc and not s.degenerate:
            est = run_bell_experiment(state, s, settings, n, seed).estimate
            row[4:] = [est.value, est.std_error]
        return row

    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as pool:
            rows = list(pool.map(point, values))
    else:
        rows = [point(v) for v in values]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def cmd_spdc_gen(args, cfg, base) -> dict:
    src = cfg.get("spdc", cfg)
    if src == "default" or src == {}:
        src = spdc.default_config()
    state, filtered = spdc.state_from_source(src)
    s = _analyse(state)
    z = overlap_z(state)
    summary = {"theta": state.theta, "z": z.real, "z_imag": z.imag,
               "kappa1": s.kappa1, "kappa2": s.kappa2, "kappa_product": s.kappa_product,
               "violation_possible": bool(s.kappa_product > VIOLATION_THRESHOLD),
               "heralding_probability": filtered.heralding_probability}
    if args.out:
        out = Path(args.out)
        h_path, v_path = out.with_suffix(".h.csv"), out.with_suffix(".v.csv")
        save_tabulated(state.h, h_path)
        save_tabulated(state.v, v_path)
        summary["state"] = {"theta": state.theta, "grid": state.grid.to_dict(),
                            "h": h_path.name, "v": v_path.name}
    return summary


COMMANDS = {
    "schmidt": cmd_schmidt,
    "bell": cmd_bell,
    "protocol": cmd_protocol,
    "mc": cmd_mc,
    "sweep": cmd_sweep,
    "spdc-gen": cmd_spdc_gen,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="hybridbell",
                                description="CHSH tests on polarization-continuum entangled pairs")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON run configuration")
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--workers", type=int, default=1)
        if name in ("bell", "protocol", "mc"):
            sp.add_argument("--settings", help="canonical | optimize | a,a',b,b' (radians)")
        if name in ("mc", "sweep"):
            sp.add_argument("--seed", type=int)
            sp.add_argument("--events", type=int)
        if name == "mc":
            sp.add_argument("--exact", action="store_true",
                            help="feed exact probabilities through the estimators instead of sampling")
            sp.add_argument("--counts", help="counts CSV path (default: next to --out)")
        if name == "sweep":
            sp.add_argument("--param", choices=["z", "theta"])
            sp.add_argument("--start", type=float)
            sp.add_argument("--stop", type=float)
            sp.add_argument("--num", type=int)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        if args.command == "spdc-gen" and args.config is None:
            cfg, base = {}, Path.cwd()
        else:
            cfg, base = load_run_config(args.config)
        result = COMMANDS[args.command](args, cfg, base)
        _emit(result if isinstance(result, str) else dumps(result), args.out)
    except DegenerateInputError as exc:
        print(f"hybridbell: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except NumericalValidationError as exc:
        print(f"hybridbell: numerical validation failed: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (InvalidArgumentError, ValueError, TypeError, KeyError) as exc:
        print(f"hybridbell: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
