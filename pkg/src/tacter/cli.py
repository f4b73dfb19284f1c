"""Command-line interface: ``tacter {params,solve,protocol,workspace,run}``.

Exit codes: 0 success, 2 bad configuration or arguments, 3 a solve did not
converge (outputs are still written, flagged), 4 measurements do not line up
with the protocol results.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .config import (
    ActuationInput, ConfigError, ConfigurationLabel, bundled_params, load_params,
    params_to_dict, parse_quantity, protocol_labels,
)
from .shooting import ShootingResult, SolverSettings, solve, sweep
from .validation import (
    AlignmentError, MeasurementFormatError, TensionSchedule, compute_errors, read_measurements,
    run_protocol,
)

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED, EXIT_UNMATCHED = 0, 2, 3, 4
SCHEDULE_SCHEMA = "tacter-schedule/1"
MANIFEST_SCHEMA = "tacter-manifest/1"

log = logging.getLogger("tacter")


class UsageError(Exception):
    """Bad command-line or manifest input (exit code 2)."""


def fmt(x) -> str:
    """Nine significant digits, locale independent; ``-0`` prints as ``0``."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return f"{x + 0.0:.9g}"


def _num(x):
    x = float(x)
    return None if not math.isfinite(x) else float(fmt(x))


def _rows_csv(columns, rows) -> str:
    out = [",".join(columns)]
    out.extend(",".join(v if isinstance(v, str) else fmt(v) for v in row) for row in rows)
    return "\n".join(out) + "\n"


def _comment_block(doc: dict) -> str:
    text = yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100)
    return "".join(f"# {line}\n" for line in text.splitlines())


# ----------------------------------------------------------------------------- inputs

def _load_params(path):
    if path is None:
        return bundled_params()
    try:
        return load_params(path)
    except FileNotFoundError:
        raise UsageError(f"parameter file not found: {path}") from None
    except IsADirectoryError:
        raise UsageError(f"parameter path is a directory: {path}") from None


def _settings(args) -> SolverSettings:
    if not args.tol > 0:
        raise UsageError("--tol must be positive")
    return SolverSettings(tol=args.tol, max_iter=args.max_iter)


def _discretization(args):
    if args.n_overlap < 1 or args.n_distal < 1:
        raise UsageError("--n-overlap and --n-distal must be at least 1")
    return args.n_overlap, args.n_distal


def _provenance(command: str, params, extra: dict) -> dict:
    doc = {"tacter": __version__, "command": command, "params": params_to_dict(params)}
    doc.update(extra)
    return doc


# ----------------------------------------------------------------------------- backbone export

BACKBONE_COLUMNS = (
    ["s_mm", "segment", "x_mm", "y_mm", "z_mm", "theta_rad", "beta"]
    + [f"R1_{i}{j}" for i in range(3) for j in range(3)]
    + [f"R2_{i}{j}" for i in range(3) for j in range(3)]
)


def _backbone_rows(result: ShootingResult):
    b = result.backbone
    if b is None:
        return []
    rows = []
    for k in range(len(b.s)):
        overlap = b.segment[k] == 0
        theta = b.theta[k] if overlap else float("nan")
        beta = b.beta[k] if overlap else float("nan")
        rows.append([b.s[k], "overlap" if overlap else "distal", *b.P[k], theta, beta,
                     *b.R1[k].ravel(), *b.R2[k].ravel()])
    return rows


def _result_summary(result: ShootingResult) -> dict:
    tip = result.tip_position
    out = {
        "converged": bool(result.converged),
        "iterations": int(result.iterations),
        "residual_norm": _num(result.residual_norm),
        "tip_position_mm": [_num(x) for x in tip],
        # exact binary value, for bit-level comparison with library calls
        "tip_position_hex": [float(x).hex() for x in tip],
    }
    if result.backbone is not None:
        out["tip_rotation"] = [[_num(x) for x in row] for row in result.backbone.tip_rotation]
    if result.message:
        out["message"] = result.message
    return out


def render_backbone(result: ShootingResult, provenance: dict, fmt_name: str) -> str:
    summary = _result_summary(result)
    if fmt_name == "json":
        rows = [[r if isinstance(r, str) else _num(r) for r in row] for row in _backbone_rows(result)]
        doc = {"provenance": provenance, "result": summary,
               "backbone": {"columns": BACKBONE_COLUMNS, "rows": rows}}
        return json.dumps(doc, indent=1) + "\n"
    return (_comment_block({"provenance": provenance, "result": summary})
            + _rows_csv(BACKBONE_COLUMNS, _backbone_rows(result)))


def _write(path, text: str):
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


# ----------------------------------------------------------------------------- commands

def cmd_params(args) -> int:
    params = _load_params(args.params)
    _write(args.output, yaml.safe_dump(params_to_dict(params), sort_keys=False))
    return EXIT_OK


def _actuation_from_args(args, params) -> ActuationInput:
    translation = params.translation_range if (args.inner_only and args.translation is None) else (
        args.translation or 0.0)
    if translation > params.translation_range + 1e-12 or translation < 0:
        raise UsageError(f"--translation {translation} mm outside [0, {params.translation_range}] mm")
    try:
        return ActuationInput(
            outer_tension=0.0 if args.inner_only else args.outer_tension,
            inner_left_tension=args.left_tension, inner_right_tension=args.right_tension,
            inner_translation=translation, theta0=math.radians(args.theta0),
            include_outer=not args.inner_only,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_solve(args) -> int:
    params = _load_params(args.params)
    actuation = _actuation_from_args(args, params)
    settings = _settings(args)
    n_overlap, n_distal = _discretization(args)
    result = solve(actuation, params, settings, n_overlap=n_overlap, n_distal=n_distal)
    act = actuation.as_dict()
    act["theta0"] = _num(act["theta0"])
    prov = _provenance("solve", params, {
        "actuation": act,
        "discretization": {"n_overlap": n_overlap, "n_distal": n_distal},
        "solver": {"tol": settings.tol, "max_iter": settings.max_iter},
    })
    _write(args.output, render_backbone(result, prov, args.format))
    if not result.converged:
        log.error("solve did not converge: %s", result.message)
        return EXIT_DIVERGED
    return EXIT_OK


def load_schedule(path, default_max: float, default_steps: int) -> list[TensionSchedule]:
    """Schedules from a YAML document, or the 13-configuration ramp when ``path`` is None."""
    if path is None:
        return [TensionSchedule.ramp(label, default_max, default_steps) for label in protocol_labels()]
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except FileNotFoundError:
        raise UsageError(f"schedule file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("<schedule>", f"YAML parse error: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema") != SCHEDULE_SCHEMA:
        raise ConfigError("schema", f"schedule must declare schema {SCHEDULE_SCHEMA!r}")
    unknown = set(doc) - {"schema", "max_tension", "steps", "configurations"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    if "max_tension" in doc:
        default_max = parse_quantity(doc["max_tension"], "force", "max_tension")
    default_steps = int(doc.get("steps", default_steps))
    configs = doc.get("configurations")
    if configs is None:
        return [TensionSchedule.ramp(label, default_max, default_steps) for label in protocol_labels()]
    if not isinstance(configs, dict):
        raise ConfigError("configurations", "expected a mapping of label to ramp")
    schedules = []
    for key, spec in configs.items():
        where = f"configurations.{key}"
        try:
            label = ConfigurationLabel.parse(str(key))
        except ValueError as exc:
            raise ConfigError(where, str(exc)) from None
        spec = spec or {}
        if not isinstance(spec, dict):
            raise ConfigError(where, "expected a mapping")
        if "tensions" in spec:
            tensions = tuple(parse_quantity(t, "force", f"{where}.tensions") for t in spec["tensions"])
            schedules.append(TensionSchedule(label, tensions))
            continue
        top = parse_quantity(spec["max_tension"], "force", f"{where}.max_tension") \
            if "max_tension" in spec else default_max
        schedules.append(TensionSchedule.ramp(label, top, int(spec.get("steps", default_steps))))
    return schedules


SWEEP_COLUMNS = ["step_index", "tension_N", "converged", "iterations", "residual_norm", "x_mm", "y_mm", "z_mm"]


def cmd_protocol(args) -> int:
    params = _load_params(args.params)
    settings = _settings(args)
    n_overlap, n_distal = _discretization(args)
    if not args.max_tension >= 0:
        raise UsageError("--max-tension must be non-negative")
    schedules = load_schedule(args.schedule, args.max_tension, args.steps)
    measurements = None
    if args.measurements is not None:
        try:
            measurements = read_measurements(args.measurements)
        except FileNotFoundError:
            raise UsageError(f"measurement file not found: {args.measurements}") from None
        except MeasurementFormatError as exc:
            raise UsageError(f"{args.measurements}: {exc}") from None

    results = run_protocol(params, schedules, settings, n_overlap, n_distal, workers=args.workers)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    prov_base = {"discretization": {"n_overlap": n_overlap, "n_distal": n_distal},
                 "solver": {"tol": settings.tol, "max_iter": settings.max_iter}}
    failures = []
    for schedule in schedules:
        label = str(schedule.label)
        mine = [r for r in results if r.label == label]
        rows = []
        for r in mine:
            rows.append([r.step_index, r.tension, "true" if r.converged else "false", r.iterations,
                         r.residual_norm, *r.tip_position])
            if not r.converged:
                failures.append(f"{label}#{r.step_index}")
            if args.backbones:
                prov = _provenance("protocol", params, {**prov_base, "configuration": label,
                                                        "step_index": r.step_index, "tension_N": r.tension})
                ext = "json" if args.format == "json" else "csv"
                _write(out / f"{label}_step{r.step_index:02d}.{ext}", render_backbone(r, prov, args.format))
        prov = _provenance("protocol", params, {**prov_base, "configuration": label,
                                                "tensions_N": [float(t) for t in schedule.tensions]})
        _write(out / f"{label}.csv", _comment_block({"provenance": prov}) + _rows_csv(SWEEP_COLUMNS, rows))

    status = EXIT_OK
    if measurements is not None:
        try:
            report = compute_errors(measurements, results, strict=False)
        except AlignmentError as exc:
            print("tacter: unmatched measurements: " + ", ".join(f"{c}#{k}" for c, k in exc.missing_results),
                  file=sys.stderr)
            return EXIT_UNMATCHED
        prov = _provenance("protocol", params, {**prov_base, "measurements": str(args.measurements)})
        _write(out / "errors.txt", _comment_block({"provenance": prov}) + report.to_table())
        _write(out / "errors.json", json.dumps({"provenance": prov, **report.to_dict()}, indent=2) + "\n")
        sys.stdout.write(report.to_table())
    if failures:
        log.error("%d pose(s) did not converge: %s", len(failures), ", ".join(failures))
        status = EXIT_DIVERGED
    return status


@dataclass(frozen=True)
class Axis:
    start: float
    stop: float
    count: int

    @classmethod
    def parse(cls, text: str, name: str) -> "Axis":
        """``"a:b:n"`` (``n`` evenly spaced values) or a single value ``"a"``."""
        parts = str(text).split(":")
        try:
            if len(parts) == 1:
                v = float(parts[0])
                return cls(v, v, 1)
            if len(parts) == 3:
                return cls(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError:
            pass
        raise UsageError(f"{name}: expected START:STOP:COUNT or a single value, got {text!r}")

    def values(self) -> np.ndarray:
        if self.count < 1:
            raise UsageError("grid axis count must be at least 1")
        if self.count == 1:
            return np.array([self.start])
        return np.linspace(self.start, self.stop, self.count)


def _workspace_inputs(outer_values, inner_values, translation):
    inputs = []
    for lo in outer_values:
        for li in inner_values:
            inputs.append(ActuationInput(float(lo), max(float(li), 0.0), max(-float(li), 0.0), float(translation)))
    return inputs


WORKSPACE_COLUMNS = ["translation_mm", "outer_tension_N", "inner_tension_N", "converged", "residual_norm",
                     "x_mm", "y_mm", "z_mm"]


def cmd_workspace(args) -> int:
    params = _load_params(args.params)
    settings = _settings(args)
    n_overlap, n_distal = _discretization(args)
    outer = Axis.parse(args.outer_tension, "--outer-tension").values()
    inner = Axis.parse(args.inner_tension, "--inner-tension").values()
    trans = Axis.parse(args.translation, "--translation").values()
    if np.any(outer < 0):
        raise UsageError("--outer-tension values must be non-negative")
    if np.any(trans < 0) or np.any(trans > params.translation_range + 1e-12):
        raise UsageError(f"--translation values must lie in [0, {params.translation_range}] mm")

    jobs = []
    for t in trans:
        inputs = _workspace_inputs(outer, inner, t)
        # snake through the inner axis so consecutive warm starts stay close
        snake = []
        for i in range(len(outer)):
            idx = list(range(i * len(inner), (i + 1) * len(inner)))
            snake.extend(idx if i % 2 == 0 else idx[::-1])
        jobs.append((params, [inputs[k] for k in snake], settings, n_overlap, n_distal, snake, inputs))

    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            slices = list(pool.map(_workspace_job, jobs))
    else:
        slices = [_workspace_job(job) for job in jobs]

    rows, failures = [], 0
    for t, results in zip(trans, slices):
        for k, r in enumerate(results):
            lo, li = outer[k // len(inner)], inner[k % len(inner)]
            failures += not r.converged
            rows.append([t, lo, li, "true" if r.converged else "false", r.residual_norm, *r.tip_position])
    prov = _provenance("workspace", params, {
        "grid": {"outer_tension_N": args.outer_tension, "inner_tension_N": args.inner_tension,
                 "translation_mm": args.translation, "inner_sign": "positive = left tendon, negative = right"},
        "discretization": {"n_overlap": n_overlap, "n_distal": n_distal},
        "solver": {"tol": settings.tol, "max_iter": settings.max_iter},
    })
    if args.format == "json":
        doc = {"provenance": prov, "columns": WORKSPACE_COLUMNS,
               "rows": [[v if isinstance(v, str) else _num(v) for v in row] for row in rows]}
        text = json.dumps(doc, indent=1) + "\n"
    else:
        text = _comment_block({"provenance": prov}) + _rows_csv(WORKSPACE_COLUMNS, rows)
    _write(args.output, text)
    if failures:
        log.error("%d workspace cell(s) did not converge", failures)
        return EXIT_DIVERGED
    return EXIT_OK


def _workspace_job(job):
    """Warm-started sweep over one translation slice, returned in grid order."""
    p, ordered, s, no, nd, snake, inputs = job
    res = sweep(ordered, p, s, no, nd)
    out = [None] * len(inputs)
    for k, r in zip(snake, res):
        out[k] = r
    return out


_PATH_OPTIONS = {"params", "output", "output_dir", "schedule", "measurements"}


def manifest_argv(path) -> list[str]:
    """Translate a run manifest into an argument list. Relative paths resolve against the manifest."""
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise UsageError(f"manifest not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError("<manifest>", f"YAML parse error: {exc}") from None
    if not isinstance(doc, dict) or doc.get("schema") != MANIFEST_SCHEMA:
        raise ConfigError("schema", f"manifest must declare schema {MANIFEST_SCHEMA!r}")
    unknown = set(doc) - {"schema", "command", "options"}
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown key")
    command = doc.get("command")
    if command not in ("params", "solve", "protocol", "workspace"):
        raise ConfigError("command", f"expected params, solve, protocol or workspace, got {command!r}")
    argv = [command]
    options = doc.get("options") or {}
    if not isinstance(options, dict):
        raise ConfigError("options", "expected a mapping")
    for key, value in options.items():
        dest = str(key).replace("-", "_")
        flag = "--" + dest.replace("_", "-")
        if value is True:
            argv.append(flag)
        elif value is False or value is None:
            continue
        else:
            if dest in _PATH_OPTIONS and str(value) != "-":
                value = path.parent / str(value)
            argv += [flag, str(value)]
    return argv


def cmd_run(args) -> int:
    return main(["-v"] * args.verbose + manifest_argv(args.manifest))


# ----------------------------------------------------------------------------- parser

def _common(p, output_default="-", fmt=True):
    p.add_argument("--params", help="robot parameter document (default: bundled Table-1 values)")
    p.add_argument("--tol", type=float, default=1e-9, help="residual tolerance (default 1e-9)")
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--n-overlap", type=int, default=200, help="integration steps on the overlap")
    p.add_argument("--n-distal", type=int, default=200, help="integration steps beyond the outer tube")
    if fmt:
        p.add_argument("--format", choices=("csv", "json"), default="csv")
    if output_default is not None:
        p.add_argument("-o", "--output", default=output_default, help="output file ('-' for stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tacter", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"tacter {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("params", help="print the resolved parameter document")
    p.add_argument("--params")
    p.add_argument("-o", "--output", default="-")
    p.set_defaults(func=cmd_params)

    p = sub.add_parser("solve", help="solve one pose and export the backbone")
    _common(p)
    p.add_argument("--outer-tension", type=float, default=0.0, help="outer tendon tension (N)")
    p.add_argument("--left-tension", type=float, default=0.0, help="inner left tendon tension (N)")
    p.add_argument("--right-tension", type=float, default=0.0, help="inner right tendon tension (N)")
    p.add_argument("--translation", type=float, default=None, help="inner tube translation (mm)")
    p.add_argument("--theta0", type=float, default=0.0, help="relative base rotation (deg)")
    p.add_argument("--inner-only", action="store_true", help="inner robot alone, full length")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("protocol", help="run the 13-configuration tension ramps")
    _common(p, output_default=None)
    p.add_argument("--schedule", help="schedule document (default: all 13 labels)")
    p.add_argument("--max-tension", type=float, default=1.0, help="ramp end tension (N) when no schedule")
    p.add_argument("--steps", type=int, default=15, help="ramp steps when no schedule")
    p.add_argument("--measurements", help="measured tip positions to compare against")
    p.add_argument("--output-dir", default="protocol_out")
    p.add_argument("--backbones", action="store_true", help="also write one backbone file per pose")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_protocol)

    p = sub.add_parser("workspace", help="tip positions over a tension/translation grid")
    _common(p)
    p.add_argument("--outer-tension", default="0", help="START:STOP:COUNT (N)")
    p.add_argument("--inner-tension", default="0", help="START:STOP:COUNT (N); negative pulls the right tendon")
    p.add_argument("--translation", default="0", help="START:STOP:COUNT (mm)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_workspace)

    p = sub.add_parser("run", help="execute a run manifest")
    p.add_argument("manifest")
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="tacter: %(levelname)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        print(f"tacter: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
