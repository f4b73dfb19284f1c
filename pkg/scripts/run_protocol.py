"""Run the 13-configuration tension ramps and summarise tip deflection per configuration.

    python scripts/run_protocol.py --max-tension 1.0 --steps 15 --json protocol.json
"""

import argparse
import json
import logging
import time

import numpy as np

from tacter.config import bundled_params, load_params
from tacter.validation import default_schedules, run_protocol, tip_bending_angle


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--params", help="parameter document (default: bundled)")
    ap.add_argument("--max-tension", type=float, default=1.0)
    ap.add_argument("--steps", type=int, default=15)
    ap.add_argument("--n", type=int, default=200, help="integration steps per segment")
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--json", help="write per-pose tips here")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    params = load_params(args.params) if args.params else bundled_params()
    schedules = default_schedules(args.max_tension, args.steps)
    start = time.perf_counter()
    results = run_protocol(params, schedules, n_overlap=args.n, n_distal=args.n, workers=args.workers)
    elapsed = time.perf_counter() - start

    print(f"{'configuration':<14}{'converged':>10}{'iters':>7}{'tip y (mm)':>12}{'tip z (mm)':>12}{'angle (deg)':>13}")
    for s in schedules:
        mine = [r for r in results if r.label == str(s.label)]
        last = mine[-1]
        print(f"{str(s.label):<14}{sum(r.converged for r in mine):>7}/{len(mine):<2}"
              f"{sum(r.iterations for r in mine):>7}{last.tip_position[1]:>12.4f}{last.tip_position[2]:>12.4f}"
              f"{np.degrees(tip_bending_angle(last)):>13.3f}")
    print(f"{len(results)} solves in {elapsed:.2f} s")

    if args.json:
        rows = [{"configuration": r.label, "step_index": r.step_index, "tension_N": r.tension,
                 "converged": r.converged, "tip_mm": r.tip_position.tolist()} for r in results]
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=1)


if __name__ == "__main__":
    main()
