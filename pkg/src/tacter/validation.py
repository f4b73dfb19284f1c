"""Protocol sweeps, measurement files and tip-error statistics."""

from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigurationLabel, RobotParams, configuration_to_input, protocol_labels
from .shooting import ShootingResult, SolverSettings, sweep, with_tags

MEASUREMENT_HEADER = "# tacter-measurements v1"
MEASUREMENT_COLUMNS = ("configuration", "step_index", "tension_N", "x_mm", "y_mm", "z_mm")
CELL_ORDER = ("OS-IN", "OS-IH", "OS-IF", "OB-IN", "OB-IH", "OB-IF", "INNER")


class MeasurementFormatError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class AlignmentError(ValueError):
    """Measurements and model results do not pair up one-to-one."""

    def __init__(self, missing_results, missing_measurements):
        self.missing_results = sorted(missing_results)
        self.missing_measurements = sorted(missing_measurements)
        parts = []
        if self.missing_results:
            parts.append("no model result for " + ", ".join(f"{c}#{k}" for c, k in self.missing_results))
        if self.missing_measurements:
            parts.append("no measurement for " + ", ".join(f"{c}#{k}" for c, k in self.missing_measurements))
        super().__init__("; ".join(parts))


@dataclass(frozen=True)
class MeasuredPose:
    configuration: ConfigurationLabel
    step_index: int
    tip_position: np.ndarray
    tendon_tension: float

    def __post_init__(self):
        if isinstance(self.configuration, str):
            object.__setattr__(self, "configuration", ConfigurationLabel.parse(self.configuration))
        p = np.asarray(self.tip_position, dtype=float).reshape(3)
        if not np.all(np.isfinite(p)):
            raise ValueError("tip position must be finite")
        object.__setattr__(self, "tip_position", p)
        if int(self.step_index) != self.step_index or self.step_index < 0:
            raise ValueError(f"step index must be a non-negative integer, got {self.step_index!r}")
        object.__setattr__(self, "step_index", int(self.step_index))
        if not (math.isfinite(self.tendon_tension) and self.tendon_tension >= 0):
            raise ValueError("tendon tension must be finite and non-negative")

    @property
    def key(self) -> tuple[str, int]:
        return str(self.configuration), self.step_index


@dataclass(frozen=True)
class TensionSchedule:
    """Tensions applied to one labelled configuration, one per step."""

    label: ConfigurationLabel
    tensions: tuple[float, ...]

    @classmethod
    def ramp(cls, label: ConfigurationLabel, max_tension: float, steps: int = 15) -> "TensionSchedule":
        """``steps`` equal increments up to ``max_tension`` (the unloaded pose is not included)."""
        if steps < 1:
            raise ValueError("steps must be at least 1")
        return cls(label, tuple(max_tension * k / steps for k in range(1, steps + 1)))


def default_schedules(max_tension: float = 1.0, steps: int = 15) -> list[TensionSchedule]:
    return [TensionSchedule.ramp(label, max_tension, steps) for label in protocol_labels()]


def _run_schedule(job):
    params, schedule, settings, n_overlap, n_distal = job
    inputs = [configuration_to_input(schedule.label, params, t) for t in schedule.tensions]
    results = sweep(inputs, params, settings, n_overlap, n_distal)
    return [with_tags(r, label=str(schedule.label), step_index=k, tension=t)
            for k, (r, t) in enumerate(zip(results, schedule.tensions))]


def run_protocol(params: RobotParams, schedules, settings: SolverSettings | None = None,
                 n_overlap: int = 200, n_distal: int = 200, workers: int = 1) -> list[ShootingResult]:
    """Warm-started sweep per schedule; results tagged with label, step index and tension.

    Order follows ``schedules`` then step. A pose that fails is returned with
    ``converged=False`` and the sweep carries on from the last good pose.
    Configurations run in parallel when ``workers > 1``.
    """
    jobs = [(params, s, settings, n_overlap, n_distal) for s in schedules]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_schedule, jobs))
    else:
        chunks = [_run_schedule(job) for job in jobs]
    return [r for chunk in chunks for r in chunk]


def cell_name(label: ConfigurationLabel) -> str:
    return "INNER" if label.inner_only else f"{label.outer_state}-{label.translation_state}"


@dataclass(frozen=True)
class CellStats:
    average: float
    maximum: float
    count: int


@dataclass
class ErrorReport:
    cells: dict[str, CellStats]
    pose_errors: dict[tuple[str, int], float]
    steps_per_configuration: dict[str, int]
    unconverged: list[tuple[str, int]] = field(default_factory=list)

    def to_dict(self) -> dict:
        def num(x):
            return float(f"{x:.9g}")
        cells = {}
        for name in CELL_ORDER:
            if name in self.cells:
                c = self.cells[name]
                cells[name] = {"avg_mm": num(c.average), "max_mm": num(c.maximum), "poses": c.count}
        return {
            "cells": cells,
            "steps_per_configuration": dict(sorted(self.steps_per_configuration.items())),
            "unconverged": [f"{c}#{k}" for c, k in self.unconverged],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_table(self) -> str:
        lines = [f"{'cell':<8}{'avg (mm)':>14}{'max (mm)':>14}{'poses':>7}"]
        for name in CELL_ORDER:
            if name in self.cells:
                c = self.cells[name]
                lines.append(f"{name:<8}{c.average:>14.9g}{c.maximum:>14.9g}{c.count:>7d}")
        if self.unconverged:
            lines.append("unconverged: " + ", ".join(f"{c}#{k}" for c, k in self.unconverged))
        return "\n".join(lines) + "\n"


def compute_errors(measurements, model_results, strict: bool = True) -> ErrorReport:
    """Tip-position errors pooled per cell (L and R together).

    Pairs are matched on ``(configuration, step_index)``. Every measurement
    needs a result; with ``strict`` every result also needs a measurement.
    Unconverged results are listed and left out of the statistics.
    """
    measured = {}
    for m in measurements:
        if m.key in measured:
            raise ValueError(f"duplicate measurement for {m.key[0]}#{m.key[1]}")
        measured[m.key] = m
    predicted = {}
    for r in model_results:
        if r.label is None or r.step_index is None:
            raise ValueError("model results must be tagged with label and step_index")
        key = (str(ConfigurationLabel.parse(r.label)), int(r.step_index))
        if key in predicted:
            raise ValueError(f"duplicate model result for {key[0]}#{key[1]}")
        predicted[key] = r
    missing_results = set(measured) - set(predicted)
    missing_measurements = set(predicted) - set(measured) if strict else set()
    if missing_results or missing_measurements:
        raise AlignmentError(missing_results, missing_measurements)

    pose_errors = {}
    unconverged = []
    by_cell = defaultdict(list)
    steps = defaultdict(int)
    for key in sorted(measured):
        m, r = measured[key], predicted[key]
        steps[key[0]] += 1
        if not r.converged:
            unconverged.append(key)
            continue
        d = float(np.linalg.norm(r.tip_position - m.tip_position))
        pose_errors[key] = d
        by_cell[cell_name(m.configuration)].append(d)
    cells = {name: CellStats(float(np.mean(ds)), float(np.max(ds)), len(ds))
             for name, ds in by_cell.items()}
    return ErrorReport(cells, pose_errors, dict(steps), unconverged)


def measurements_from_results(results, offset=(0.0, 0.0, 0.0)) -> list[MeasuredPose]:
    """Treat converged model tips (shifted by ``offset``) as measurements."""
    offset = np.asarray(offset, dtype=float)
    return [MeasuredPose(ConfigurationLabel.parse(r.label), r.step_index,
                         r.tip_position + offset, r.tension or 0.0)
            for r in results if r.converged]


def write_measurements(poses, path=None) -> str:
    buf = io.StringIO()
    buf.write(MEASUREMENT_HEADER + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(MEASUREMENT_COLUMNS)
    for p in poses:
        writer.writerow([str(p.configuration), p.step_index, f"{p.tendon_tension:.9g}",
                         *(f"{x:.9g}" for x in p.tip_position)])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


def read_measurements(path) -> list[MeasuredPose]:
    return parse_measurements(Path(path).read_text())


def parse_measurements(text: str) -> list[MeasuredPose]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MEASUREMENT_HEADER:
        raise MeasurementFormatError(1, f"expected header {MEASUREMENT_HEADER!r}")
    reader = csv.reader(lines[1:])
    try:
        columns = next(reader)
    except StopIteration:
        raise MeasurementFormatError(2, "missing column row") from None
    if tuple(c.strip() for c in columns) != MEASUREMENT_COLUMNS:
        raise MeasurementFormatError(2, f"columns must be {','.join(MEASUREMENT_COLUMNS)}")
    poses = []
    for lineno, row in enumerate(reader, start=3):
        if not row or not "".join(row).strip():
            continue
        if len(row) != len(MEASUREMENT_COLUMNS):
            raise MeasurementFormatError(lineno, f"expected {len(MEASUREMENT_COLUMNS)} fields, got {len(row)}")
        try:
            label = ConfigurationLabel.parse(row[0])
            pose = MeasuredPose(label, int(row[1]), [float(x) for x in row[3:6]], float(row[2]))
        except ValueError as exc:
            raise MeasurementFormatError(lineno, str(exc)) from None
        poses.append(pose)
    return poses


def tip_bending_angle(result: ShootingResult) -> float:
    """Angle (rad) of the tip tangent from the world z axis within the y-z plane, positive toward +y."""
    if result.backbone is None:
        return float("nan")
    t = result.backbone.tip_rotation[:, 2]
    return float(math.atan2(t[1], t[2]))
