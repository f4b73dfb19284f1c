"""Sample tip positions over outer tension x signed inner tension x translation.

Inner tension is signed: positive pulls the left tendon, negative the right.
Each translation slice is swept with warm starts. Output is an ``.npz`` with
the grid axes and a ``(n_trans, n_outer, n_inner, 3)`` tip array.

    python scripts/workspace_scan.py --outer 0 30 7 --inner -1 1 11 --translation 0 30.36 4 -o ws.npz
"""

import argparse
import logging
import time

import numpy as np

from tacter.config import ActuationInput, bundled_params, load_params
from tacter.shooting import sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--params")
    ap.add_argument("--outer", nargs=3, type=float, default=[0.0, 30.0, 7], metavar=("START", "STOP", "N"))
    ap.add_argument("--inner", nargs=3, type=float, default=[-1.0, 1.0, 11], metavar=("START", "STOP", "N"))
    ap.add_argument("--translation", nargs=3, type=float, default=[0.0, 30.36, 4], metavar=("START", "STOP", "N"))
    ap.add_argument("--n", type=int, default=100, help="integration steps per segment")
    ap.add_argument("-o", "--output", default="workspace.npz")
    args = ap.parse_args()
    logging.basicConfig(level=logging.WARNING)

    params = load_params(args.params) if args.params else bundled_params()
    outer = np.linspace(args.outer[0], args.outer[1], int(args.outer[2]))
    inner = np.linspace(args.inner[0], args.inner[1], int(args.inner[2]))
    trans = np.linspace(args.translation[0], args.translation[1], int(args.translation[2]))

    tips = np.full((len(trans), len(outer), len(inner), 3), np.nan)
    converged = np.zeros(tips.shape[:3], bool)
    start = time.perf_counter()
    for a, t in enumerate(trans):
        order = [(i, j if i % 2 == 0 else len(inner) - 1 - j) for i in range(len(outer)) for j in range(len(inner))]
        inputs = [ActuationInput(outer[i], max(inner[j], 0.0), max(-inner[j], 0.0), t) for i, j in order]
        for (i, j), r in zip(order, sweep(inputs, params, n_overlap=args.n, n_distal=args.n)):
            tips[a, i, j] = r.tip_position
            converged[a, i, j] = r.converged
    elapsed = time.perf_counter() - start

    np.savez(args.output, outer_tension=outer, inner_tension=inner, translation=trans, tips=tips,
             converged=converged)
    ok = tips[converged]
    print(f"{converged.sum()}/{converged.size} cells converged in {elapsed:.1f} s -> {args.output}")
    print(f"tip y range [{ok[:, 1].min():.3f}, {ok[:, 1].max():.3f}] mm, "
          f"z range [{ok[:, 2].min():.3f}, {ok[:, 2].max():.3f}] mm")


if __name__ == "__main__":
    main()
