"""How far from the solution does undamped-fallback Newton still converge?

For each protocol configuration at its top tension, perturb the converged
unknowns randomly and re-solve with ``fallback=False`` (plain damped Newton),
then with the full solver. Two perturbation scalings are compared:

* ``strain``: 10 % of each unknown's magnitude (a 10 % change of the axial
  strain v3 ~ 1 is a 10 % axial strain, far beyond buckling).
* ``load``: 10 % of each base load component, i.e. of ``K (x - x_unloaded)``.

    python scripts/solver_basin.py --trials 3 --labels OS-IN-L OB-IF-R INNER-L
"""

import argparse
import logging

import numpy as np

from tacter.config import ConfigurationLabel, bundled_params, configuration_to_input, protocol_labels
from tacter.model import RobotModel
from tacter.shooting import ShootingUnknowns, SolverSettings, solve_model


def load_scale(model):
    k1se, k1bt, k2se, k2bt, _, _ = model.kernel_args()
    if not model.has_outer:
        return np.r_[k2bt, k2se]
    return np.r_[k1bt + k2bt, k1se + k2se, k2bt[2], k2se[2]]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--labels", nargs="*", default=[str(lab) for lab in protocol_labels()])
    ap.add_argument("--tension", type=float, default=1.0)
    ap.add_argument("--trials", type=int, default=5)
    ap.add_argument("--scale", type=float, default=0.1)
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.ERROR)

    params = bundled_params()
    rng = np.random.default_rng(args.seed)
    quick = SolverSettings(max_iter=40)
    print(f"{'configuration':<12}{'scaling':>9}{'direct':>8}{'full':>6}{'max |dx|':>11}")
    for text in args.labels:
        label = ConfigurationLabel.parse(text)
        model = RobotModel.build(params, configuration_to_input(label, params, args.tension))
        ref = solve_model(model)
        n = model.n_unknowns
        x = ref.unknowns.as_vector(n)
        k = load_scale(model)
        load = np.abs(k * (x - ShootingUnknowns.unloaded().as_vector(n)))
        load = np.maximum(load, 1e-3 * load.max())
        widths = {"strain": np.maximum(np.abs(x), 1e-3), "load": load / k}
        for name, width in widths.items():
            direct = full = 0
            spread = 0.0
            for _ in range(args.trials):
                guess = ShootingUnknowns.from_vector(x + args.scale * rng.uniform(-1, 1, n) * width)
                a = solve_model(model, guess, quick, fallback=False)
                b = solve_model(model, guess)
                direct += a.converged
                full += b.converged
                if b.converged:
                    spread = max(spread, float(np.abs(b.unknowns.as_vector(n) - x).max()))
            print(f"{text:<12}{name:>9}{direct:>5}/{args.trials:<2}{full:>3}/{args.trials:<2}{spread:>11.1e}")


if __name__ == "__main__":
    main()
