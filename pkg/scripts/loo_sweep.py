"""Leave-one-well-out error of the velocity interpolant across kernels and shape parameters.

The field is a smooth closed form sampled at random well locations; each well
is predicted from the others.  Fits the solver refuses are reported as such.
"""
import argparse

import numpy as np

from seiscurate.geometry import GridGeometry
from seiscurate.velocity_model import RbfError, checkshot_samples, fit_rbf, qc_compare_at_wells, survey_scaler
from seiscurate.well_io import CheckshotSeries, WellDataset


def field(x, y, t):
    return 1800.0 + 350.0 * t + 0.08 * x - 0.05 * y + 40.0 * np.sin(t)


def make_wells(rng, geom, n_wells, n_times):
    times = np.linspace(0.1, 2.0, n_times)
    wells = []
    for k in range(n_wells):
        x, y = geom.index_to_xy(rng.uniform(0.1, 0.9, 2) * [geom.n_inline - 1, geom.n_crossline - 1])
        v = field(x, y, times)
        wells.append(WellDataset(f"W{k}", (x, y), checkshots=CheckshotSeries(v * times / 2, times)))
    return wells


def loo(wells, geom, kernel, epsilon):
    errs, conds = [], []
    for k in range(len(wells)):
        pos, vals, _ = checkshot_samples(wells[:k] + wells[k + 1:])
        model = fit_rbf(pos, vals, kernel, epsilon=epsilon, scaler=survey_scaler(geom, 2.0))
        conds.append(model.condition)
        errs += [r[5] for r in qc_compare_at_wells(model, [wells[k]], geom).rows]
    return float(np.mean(errs)), float(np.max(errs)), max(conds)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--wells", type=int, default=8)
    ap.add_argument("--times", type=int, default=12)
    ap.add_argument("--seeds", type=int, nargs="+", default=[3, 11, 29])
    args = ap.parse_args()
    geom = GridGeometry((0.0, 0.0), (25.0, 0.0), (0.0, 25.0), 200, 160)
    grid = [("thin_plate", e) for e in (0.01, 0.03, 0.1, 0.3, 0.5, 1.0, 3.0)]
    grid += [("multiquadric", e) for e in (0.3, 1.0, 3.0)] + [("gaussian", e) for e in (1.0, 3.0, 10.0)]
    print(f"{'kernel':<13}{'eps':>6}  " + "  ".join(f"seed {s:>3} mean/max (cond)" for s in args.seeds))
    for kernel, eps in grid:
        cells = []
        for seed in args.seeds:
            wells = make_wells(np.random.default_rng(seed), geom, args.wells, args.times)
            try:
                mean, worst, cond = loo(wells, geom, kernel, eps)
                cells.append(f"{100 * mean:6.2f}%/{100 * worst:6.2f}% ({cond:7.1e})")
            except RbfError:
                cells.append(f"{'refused':>30}")
        print(f"{kernel:<13}{eps:>6}  " + "  ".join(cells))


if __name__ == "__main__":
    main()
