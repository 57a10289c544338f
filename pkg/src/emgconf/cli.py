"""Command line entry point: ``emgconf run | diagram | synth``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .calibration import CalibrationReport, report_from_csv, reliability_svg
from .harness import ClassifierSpec, ExperimentConfig, emit_report, run_experiment
from .harness.report import metrics_csv
from .synth import SyntheticSpec, write_feature_dataset


def _cmd_run(args) -> int:
    config = ExperimentConfig.load(args.config)
    if args.seed is not None:
        config.seed = args.seed
    if args.bins is not None:
        if args.bins < 1:
            raise SystemExit("--bins must be >= 1")
        config.bins = args.bins
    if args.classifiers:
        wanted = [c.strip() for c in args.classifiers.split(",") if c.strip()]
        by_label = {c.label: c for c in config.classifiers}
        config.classifiers = [by_label.get(w) or ClassifierSpec(w) for w in wanted]
    if args.workers is not None:
        config.workers = args.workers
    out = Path(args.out) if args.out else config.output_dir
    if out is None:
        raise SystemExit("no output directory: pass --out or set output_dir in the config")
    result = run_experiment(config)
    emit_report(result, out)
    sys.stdout.write(metrics_csv(result.rows))
    failed = sum(not c.ok for c in result.cells)
    if failed:
        logging.getLogger("emgconf").warning("%d of %d cells failed; see participants.csv", failed, len(result.cells))
    return 0


def _cmd_diagram(args) -> int:
    path = Path(args.report)
    text = path.read_text()
    if path.suffix == ".json":
        report = CalibrationReport.from_dict(json.loads(text))
    else:
        report = report_from_csv(text)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(reliability_svg(report, args.title or ""))
    return 0


def _cmd_synth(args) -> int:
    spec = SyntheticSpec.load(args.spec)
    if args.seed is not None:
        spec.seed = args.seed
    root = write_feature_dataset(spec, args.n, args.out, name=args.name or Path(args.out).name)
    print(root)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emgconf", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train and evaluate classifiers per participant")
    run.add_argument("--config", required=True, help="experiment config JSON")
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.add_argument("--seed", type=int)
    run.add_argument("--classifiers", help="comma-separated subset, e.g. lda,qda,smmc")
    run.add_argument("--bins", type=int)
    run.add_argument("--workers", type=int)
    run.set_defaults(func=_cmd_run)

    diagram = sub.add_parser("diagram", help="render a reliability diagram SVG")
    diagram.add_argument("--report", required=True, help="reliability CSV or report JSON")
    diagram.add_argument("--out", required=True, help="SVG path")
    diagram.add_argument("--title")
    diagram.set_defaults(func=_cmd_diagram)

    synth = sub.add_parser("synth", help="write a synthetic dataset in the canonical layout")
    synth.add_argument("--spec", required=True, help="synthetic spec JSON")
    synth.add_argument("--n", type=int, required=True, help="samples per participant and trial")
    synth.add_argument("--out", required=True)
    synth.add_argument("--seed", type=int)
    synth.add_argument("--name")
    synth.set_defaults(func=_cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
