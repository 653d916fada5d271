"""``seiscurate`` command line."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .pipeline import STAGES, Pipeline, PipelineError


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seiscurate", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in STAGES + ("run-pipeline",):
        s = sub.add_parser(name, help="run the whole pipeline" if name == "run-pipeline" else f"run the {name} stage")
        s.add_argument("--config", required=True, type=Path)
        s.add_argument("--out", type=Path, default=None, help="output directory (default: config out_dir)")
        s.add_argument("--threads", type=int, default=1)
    s = sub.add_parser("make-synthetic", help="write the layered synthetic survey fixture")
    s.add_argument("--out", type=Path, required=True)
    s.add_argument("--spec", type=Path, default=None, help="JSON survey spec (default: three-layer fixture)")
    s = sub.add_parser("hash", help="content hash of a curated HDF5 file")
    s.add_argument("path", type=Path)
    return p


def _fail(payload: dict, code: int = 1) -> int:
    sys.stderr.write(json.dumps(payload, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "make-synthetic":
            from .synthetic import SyntheticSurveySpec, make_synthetic_survey, three_layer_spec

            spec = (SyntheticSurveySpec.from_dict(json.loads(args.spec.read_text()))
                    if args.spec else three_layer_spec())
            made = make_synthetic_survey(spec, args.out)
            print(json.dumps({"config": str(made.config), "segy": str(made.segy),
                              "manifest": str(made.manifest), "truth": str(made.truth)}))
            return 0
        if args.command == "hash":
            from .curated_store import content_hash

            print(content_hash(args.path))
            return 0
        pipe = Pipeline.from_file(args.config, args.out, args.threads)
        stages = STAGES if args.command == "run-pipeline" else (args.command,)
        result = pipe.run(stages)
        print(json.dumps(result, sort_keys=True, default=str))
        return 0
    except PipelineError as exc:
        return _fail(exc.to_dict())
    except Exception as exc:  # noqa: BLE001 - every failure becomes a JSON error line
        return _fail({"stage": None, "error": type(exc).__name__, "message": str(exc)})


if __name__ == "__main__":
    raise SystemExit(main())
