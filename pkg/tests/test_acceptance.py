"""Acceptance criteria 1-10; each test prints one PASS/FAIL line."""

import math
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest
import yaml

from equilibrium_oracle import backbone_residuals
from geometry_oracle import notched_properties
from rod_oracle import solve_tendon_rod
from tacter.config import ActuationInput, ConfigurationLabel, configuration_to_input, tension_from_sensor
from tacter.geometry import outer_neutral_axis, outer_second_moment, outer_segment_areas
from tacter.model import RobotModel
from tacter.rod import FramedState, integrate_step, orthonormality_drift, rot_d3
from tacter.shooting import solve, solve_model
from tacter.validation import (
    MeasuredPose, compute_errors, default_schedules, measurements_from_results, run_protocol,
    tip_bending_angle,
)


def verdict(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def protocol(params):
    schedules = default_schedules(max_tension=1.0, steps=15)
    start = time.perf_counter()
    results = run_protocol(params, schedules)
    elapsed = time.perf_counter() - start
    return schedules, results, elapsed


def test_c01_geometry_oracle(params, capsys):
    start = time.perf_counter()
    spec = params.outer
    A_ref, dna_ref, I_ref = notched_properties(spec.notch_depth, spec.outer_radius, spec.inner_radius)
    got = (outer_segment_areas(spec)[2], outer_neutral_axis(spec), outer_second_moment(spec)[1])
    errors = [abs(g - r) / abs(r) for g, r in zip(got, (A_ref, dna_ref, I_ref))]
    elapsed = time.perf_counter() - start
    verdict(capsys, 1, max(errors) < 1e-4 and elapsed < 10.0,
            f"max relative error {max(errors):.2e} (A1, d_na, I1), {elapsed:.2f} s")


def test_c02_trivial_equilibrium(params, capsys):
    worst, most_iters = 0.0, 0
    cases = [ActuationInput(inner_translation=t) for t in (0.0, 15.9, params.translation_range)]
    cases.append(ActuationInput(inner_translation=params.translation_range, include_outer=False))
    for a in cases:
        r = solve(a, params)
        l2 = params.l2(a.inner_translation) if a.include_outer else params.l2_max
        worst = max(worst, float(np.linalg.norm(r.tip_position - [0.0, 0.0, l2])))
        most_iters = max(most_iters, r.iterations if r.converged else 99)
    verdict(capsys, 2, worst < 1e-9 and most_iters <= 2,
            f"tip error {worst:.1e} mm, at most {most_iters} iterations")


def test_c03_protocol_resubstitution(params, protocol, capsys):
    schedules, results, elapsed = protocol
    worst = 0.0
    converged = 0
    for r in results:
        if not r.converged:
            continue
        converged += 1
        a = configuration_to_input(ConfigurationLabel.parse(r.label), params, r.tension)
        worst = max(worst, float(np.abs(backbone_residuals(RobotModel.build(params, a), r.backbone)).max()))
    ok = len(results) == 195 and converged == 195 and worst < 1e-8 and elapsed < 60.0
    verdict(capsys, 3, ok, f"{converged}/{len(results)} converged, pointwise residual {worst:.1e}, "
                           f"protocol {elapsed:.1f} s")


def test_c04_mirror_symmetry(params, capsys):
    worst = 0.0
    cases = [(0.0, True), (15.9, True), (30.22, True), (params.translation_range, False)]
    for translation, outer in cases:
        for tension in (0.3, 1.0):
            left = solve(ActuationInput(0.0, tension, 0.0, translation, include_outer=outer), params)
            right = solve(ActuationInput(0.0, 0.0, tension, translation, include_outer=outer), params)
            mirrored = right.tip_position * [1.0, -1.0, 1.0]
            worst = max(worst, float(np.linalg.norm(left.tip_position - mirrored)))
    verdict(capsys, 4, worst < 1e-9, f"max mirrored tip mismatch {worst:.1e} mm")


def test_c05_single_tube_oracle(params, capsys):
    worst = 0.0
    cases = [(0.0, 0.0, 1.0, 0.0), (15.0, 0.0, 1.0, 0.0), (params.translation_range, 0.0, 1.0, 0.3),
             (20.0, 0.6, 0.7, 0.2)]
    for translation, theta0, left, right in cases:
        model = RobotModel.build(params, ActuationInput(0.0, left, right, translation, theta0=theta0),
                                 outer_stiffness_scale=1e6)
        result = solve_model(model)
        assert result.converged
        _, _, kse, kbt, _, tendons = model.kernel_args()
        _, P, _ = solve_tendon_rod(model.l2 - model.l1, kse, kbt, [tuple(t) for t in tendons],
                                   (0.0, 0.0, model.l1), rot_d3(theta0))
        worst = max(worst, float(np.linalg.norm(result.tip_position - P[-1])))
    verdict(capsys, 5, worst < 1e-3, f"max tip discrepancy vs collocation oracle {worst:.1e} mm")


def test_c06_integrator(params, capsys):
    kappa, length = 0.08, 40.0
    exact = np.array([0.0, (math.cos(kappa * length) - 1.0) / kappa, math.sin(kappa * length) / kappa])

    def arc(n, twist=0.0):
        def rates(state):
            return np.array([kappa, 0.0, twist * state.y[0]]), np.array([0.0, 0.0, 1.0]), np.array([1.0])
        state = FramedState(np.eye(3), np.zeros(3), np.zeros(1))
        for _ in range(n):
            state = integrate_step(state, rates, length / n)
        return state

    errors = [np.linalg.norm(arc(n).P - exact) for n in (4, 8, 16, 32)]
    order = float(np.min(np.log2(np.array(errors[:-1]) / np.array(errors[1:]))))
    full = solve(ActuationInput(30.0, 0.8, 0.0, params.translation_range, theta0=0.7), params)
    drift = max(orthonormality_drift(full.backbone.R1), orthonormality_drift(full.backbone.R2),
                orthonormality_drift(arc(400, twist=0.05).R))
    verdict(capsys, 6, order >= 3.8 and drift < 1e-9, f"empirical order {order:.2f}, frame drift {drift:.1e}")


def test_c07_monotone_continuation(protocol, capsys):
    schedules, results, _ = protocol
    failures, reversals = [], []
    for schedule in schedules:
        label = str(schedule.label)
        mine = [r for r in results if r.label == label]
        failures += [f"{label}#{r.step_index}" for r in mine if not r.converged]
        sign = 1.0 if schedule.label.side == "L" else -1.0
        angles = np.array([sign * tip_bending_angle(r) for r in mine])
        if np.any(np.diff(angles) < 0):
            reversals.append(label)
    verdict(capsys, 7, not failures and not reversals,
            f"{len(schedules)} ramps, missed steps {failures or 'none'}, non-monotone {reversals or 'none'}")


def test_c08_sensor_conversion(capsys):
    gamma = math.radians(52.0)
    expected = 1.0 / (2.0 * math.sin(math.radians(104.0)))
    rel = abs(tension_from_sensor(1.0, gamma) - expected) / expected
    linear = all(tension_from_sensor(f, gamma) == f * tension_from_sensor(1.0, gamma)
                 for f in (0.0, 2.0, 0.5, 4.0, 1024.0))
    verdict(capsys, 8, rel < 1e-12 and linear, f"relative error {rel:.1e}, linear in force: {linear}")


def test_c09_error_metric(protocol, capsys):
    class Tip:
        def __init__(self, p):
            self.tip_position = np.asarray(p, float)

    _, results, _ = protocol
    tips = [[1.0, 2.0, 50.0], [-3.0, 0.5, 48.0], [0.0, -6.0, 44.0], [2.0, 2.0, 40.0]]
    offsets = [[1, 0, 0], [0, -2, 0], [1, 2, 2], [0, 0, -4]]
    keys = [("OB-IF-L", 0), ("OB-IF-L", 1), ("OB-IF-R", 0), ("OB-IF-R", 1)]
    model, meas = [], []
    for (label, k), tip, off in zip(keys, tips, offsets):
        r = type(results[0])(results[0].unknowns, 0.0, 0, Tip(tip), True, label=label, step_index=k)
        model.append(r)
        meas.append(MeasuredPose(label, k, np.add(tip, off), 0.5))
    cell = compute_errors(meas, model).cells["OB-IF"]
    fixture_ok = cell.average == 2.5 and cell.maximum == 4.0
    self_report = compute_errors(measurements_from_results(results), results)
    self_zero = all(c.average == 0.0 and c.maximum == 0.0 for c in self_report.cells.values())
    verdict(capsys, 9, fixture_ok and self_zero and len(self_report.cells) == 7,
            f"fixture avg {cell.average} max {cell.maximum}; self-fed errors zero in "
            f"{len(self_report.cells)} cells: {self_zero}")


def test_c10_cli_determinism(tmp_path, capsys):
    manifest = tmp_path / "run.yaml"
    manifest.write_text(yaml.safe_dump({"schema": "tacter-manifest/1", "command": "protocol", "options": {
        "max-tension": 0.8, "steps": 3, "output-dir": "out", "backbones": True,
        "n-overlap": 60, "n-distal": 60}}))
    snapshots = []
    for run in range(2):
        proc = subprocess.run([sys.executable, "-m", "tacter.cli", "run", str(manifest)],
                              capture_output=True, timeout=600)
        assert proc.returncode == 0, proc.stderr.decode()
        snapshots.append({p.name: p.read_bytes() for p in sorted((tmp_path / "out").iterdir())})
        shutil.rmtree(tmp_path / "out")
    same = snapshots[0] == snapshots[1]
    verdict(capsys, 10, same and len(snapshots[0]) == 13 * 4,
            f"{len(snapshots[0])} files, byte-identical across runs: {same}")
