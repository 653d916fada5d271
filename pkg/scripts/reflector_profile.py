"""Per-column reflector depth error along each curated section of a pipeline run.

Usage: python3 scripts/reflector_profile.py SURVEY_DIR OUT_DIR [--csv FILE]
where SURVEY_DIR holds truth.json from ``seiscurate make-synthetic``.
"""
import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np
from scipy.signal import find_peaks

from seiscurate.curated_store import read_hdf5
from seiscurate.synthetic import SyntheticSurveySpec


def picks(trace, dz):
    peaks, _ = find_peaks(trace, height=0.3 * np.abs(trace).max())
    out = []
    for p in peaks:
        a, b, c = trace[p - 1], trace[p], trace[p + 1]
        den = a - 2 * b + c
        out.append(p + (0.5 * (a - c) / den if den else 0.0))
    return np.array(out) * dz


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("survey", type=Path)
    ap.add_argument("out", type=Path)
    ap.add_argument("--csv", type=Path, default=None)
    args = ap.parse_args()
    spec = SyntheticSurveySpec.from_dict(json.loads((args.survey / "truth.json").read_text())["spec"])
    sections, _ = read_hdf5(args.out / "curated.h5")
    rows = []
    for sec in sections:
        path = np.load(args.out / "cache" / "sections" / f"{sec.section_id}.npz")["positions"]
        ticks = {t.lateral_index: t.well_id for t in sec.well_ties}
        start = sec.provenance["window_start"]
        for k in range(sec.seismic.shape[0]):
            if start + 2 * k >= len(path):
                break
            truth = spec.interface_depths(*path[start + 2 * k])
            got = picks(sec.seismic[k].astype(float), sec.dz)
            errs = got - truth if len(got) == len(truth) else np.full(len(truth), np.nan)
            rows.append([sec.section_id, k, ticks.get(k, "")] + [f"{e:.2f}" for e in errs])
    n_iface = len(spec.layers)
    header = ["section", "column", "well"] + [f"err_{i}_m" for i in range(n_iface)]
    w = csv.writer(open(args.csv, "w", newline="") if args.csv else sys.stdout)
    w.writerow(header)
    w.writerows(rows)


if __name__ == "__main__":
    main()
