"""Write the three-layer synthetic survey and optionally run the pipeline on it."""
import argparse
import json
import time
from pathlib import Path

from seiscurate.pipeline import run_pipeline
from seiscurate.synthetic import make_synthetic_survey, three_layer_spec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("out", type=Path)
    ap.add_argument("--run", action="store_true", help="also run every pipeline stage")
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    survey = make_synthetic_survey(three_layer_spec(), args.out)
    print(f"config: {survey.config}")
    if args.run:
        t0 = time.perf_counter()
        result = run_pipeline(survey.config, args.out / "out", args.threads)
        print(json.dumps(result, indent=1, sort_keys=True, default=str))
        print(f"pipeline: {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
