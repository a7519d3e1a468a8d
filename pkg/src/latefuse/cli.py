"""Command-line entry point.

Exit codes: 0 success, 2 input/validation error, 3 fitting error,
4 internal error. Errors go to stderr as a JSON document with an
``errors`` list.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .decision import decision_curve, dominance_summary, strict_dominance, write_curve
from .errors import FitError, ValidationError
from .pipeline import RunConfig, dumps, load_config_file, read_predictions, run_evaluation
from .reliability import reliability_curve, summarize_calibration, write_bins
from .scorelog import load_dataset, write_chunk_scores, write_labels, write_splits
from .svgplot import dca_svg, reliability_svg
from .synthgen import SynthConfig, complementary_scenario, generate_cohort

EXIT_OK, EXIT_INPUT, EXIT_FIT, EXIT_INTERNAL = 0, 2, 3, 4


def _color(text: str, code: str) -> str:
    if os.environ.get("NO_COLOR") or not sys.stdout.isatty():
        return text
    return f"\033[{code}m{text}\033[0m"


def _fail(code: int, errors: list[str]) -> int:
    kind = {EXIT_INPUT: "validation", EXIT_FIT: "fitting", EXIT_INTERNAL: "internal"}[code]
    print(json.dumps({"status": "error", "kind": kind, "errors": errors}, indent=2), file=sys.stderr)
    return code


def _add_inputs(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--chunks", required=required, help="chunk score CSV")
    p.add_argument("--labels", required=required, help="label CSV (patient_id,phq8)")
    p.add_argument("--splits", required=required, help="split CSV (patient_id,split)")
    p.add_argument("--phq8-threshold", type=int, default=None, help="label = phq8 > threshold (default 10)")
    p.add_argument("--strict-labels", action="store_true", default=None,
                   help="treat labeled patients without chunks as an error")


def cmd_validate(args) -> int:
    ds = load_dataset(args.chunks, args.labels, args.splits,
                      phq8_threshold=args.phq8_threshold if args.phq8_threshold is not None else 10,
                      strict_labels=bool(args.strict_labels))
    summary = ds.summary()
    if args.json:
        print(json.dumps(summary, indent=2, sort_keys=True))
        return EXIT_OK
    print(_color("dataset OK", "32"))
    print(f"patients:   {summary['patients']} ({summary['depressed']} depressed, {summary['control']} control)")
    print(f"prevalence: {summary['prevalence']:.2f}")
    for m, n in summary["chunks_per_modality"].items():
        print(f"chunks[{m}]: {n}")
    for s, v in summary["splits"].items():
        print(f"split {s}: {v['patients']} patients ({v['depressed']} depressed)")
    for w in summary["warnings"]:
        print(_color(f"warning: {w}", "33"))
    return EXIT_OK


def _parse_map(items, what: str) -> dict[str, float]:
    out = {}
    for item in items or []:
        name, sep, value = item.partition("=")
        if not sep:
            raise ValidationError(f"{what}: expected NAME=VALUE, got {item!r}")
        try:
            out[name] = float(value)
        except ValueError:
            raise ValidationError(f"{what}: {value!r} is not a number") from None
    return out


def cmd_synth(args) -> int:
    modalities = tuple(m for m in args.modalities.split(",") if m)
    if args.scenario == "complementary":
        config = complementary_scenario(args.seed, args.n, modalities, args.prevalence)
    else:
        config = SynthConfig(
            n_patients=args.n,
            prevalence=args.prevalence,
            modality_signal={m: args.signal_default for m in modalities},
            modality_noise={m: args.noise_default for m in modalities},
            modality_patient_noise={m: args.patient_noise_default for m in modalities},
            chunks_per_patient=(args.chunks_min, args.chunks_max),
            seed=args.seed,
        )
    overrides = {
        "modality_signal": _parse_map(args.signal, "--signal"),
        "modality_noise": _parse_map(args.noise, "--noise"),
        "modality_patient_noise": _parse_map(args.patient_noise, "--patient-noise"),
    }
    for fld, values in overrides.items():
        unknown = sorted(set(values) - set(modalities))
        if unknown:
            raise ValidationError(f"{fld}: unknown modalities {unknown}")
        if values:
            config = SynthConfig(**{**config.__dict__, fld: {**getattr(config, fld), **values}})
    cohort = generate_cohort(config)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    files = {"chunks": out / "chunk_scores.csv", "labels": out / "labels.csv", "splits": out / "splits.csv"}
    for key, writer, rows in (
        ("chunks", write_chunk_scores, cohort.chunks),
        ("labels", write_labels, cohort.labels),
        ("splits", write_splits, cohort.splits),
    ):
        with open(files[key], "w", encoding="utf-8", newline="") as fh:
            writer(rows, fh)
    manifest = {
        "patients": config.n_patients,
        "depressed": sum(r.label for r in cohort.labels),
        "chunks": len(cohort.chunks),
        "modalities": list(config.modalities),
        "seed": config.seed,
        "files": {k: str(v) for k, v in files.items()},
    }
    print(json.dumps(manifest, indent=2))
    return EXIT_OK


EVAL_FLAGS = {
    "classification_threshold": float,
    "grid_step": float,
    "ridge_lambda": float,
    "epsilon": float,
    "n_resamples": int,
    "level": float,
    "seed": int,
    "n_bins": int,
    "binning": str,
    "dca_t_min": float,
    "dca_t_max": float,
    "dca_step": float,
    "configurations": str,
    "n_jobs": int,
}


def cmd_evaluate(args) -> int:
    values = load_config_file(args.config) if args.config else {}
    cli_values = {
        "chunks": args.chunks, "labels": args.labels, "splits": args.splits, "out_dir": args.out,
        "phq8_threshold": args.phq8_threshold, "strict_labels": args.strict_labels,
    }
    cli_values.update({k: getattr(args, k) for k in EVAL_FLAGS})
    values.update({k: v for k, v in cli_values.items() if v is not None})
    cfg = RunConfig.from_mapping(values)
    doc = run_evaluation(cfg)
    cols = doc["columns"]
    print("  ".join(f"{c:>12}" if i else f"{c:<24}" for i, c in enumerate(cols)))
    for row in doc["rows"]:
        print("  ".join(f"{row[c]:>12.2f}" if i else f"{row[c]:<24}" for i, c in enumerate(cols)))
    print(f"report written to {cfg.out_dir}")
    return EXIT_OK


def cmd_dca(args) -> int:
    probs, labels = read_predictions(args.predictions)
    curve = decision_curve(probs, labels, args.t_min, args.t_max, args.step)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "dca.csv", "w", encoding="utf-8", newline="") as fh:
        write_curve(curve, fh)
    (out / "dca.svg").write_text(dca_svg(curve, "model"), encoding="utf-8")
    print(f"prevalence {curve.prevalence:.3f}")
    for d in dominance_summary(curve):
        print(f"model >= both references on [{d.t_start:.2f}, {d.t_end:.2f}]" + (" (strict)" if d.strict else ""))
    if not strict_dominance(curve):
        print("model never strictly beats both references on this grid")
    return EXIT_OK


def cmd_calibration(args) -> int:
    probs, labels = read_predictions(args.predictions)
    report = reliability_curve(probs, labels, args.n_bins, args.binning)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "calibration.csv", "w", encoding="utf-8", newline="") as fh:
        write_bins(report, fh)
    (out / "reliability.svg").write_text(reliability_svg(report, "model"), encoding="utf-8")
    (out / "calibration.json").write_text(dumps(report.as_dict()), encoding="utf-8")
    print(summarize_calibration(report, args.tolerance))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latefuse", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"latefuse {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check score, label and split files")
    _add_inputs(p)
    p.add_argument("--json", action="store_true", help="print the summary as JSON")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("synth", help="write a synthetic cohort")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=189, help="number of patients")
    p.add_argument("--prevalence", type=float, default=0.30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--modalities", default="audio,text,tabular")
    p.add_argument("--scenario", choices=("default", "complementary"), default="default")
    p.add_argument("--signal-default", type=float, default=0.6, help="signal strength for every modality")
    p.add_argument("--noise-default", type=float, default=1.0, help="chunk noise for every modality")
    p.add_argument("--patient-noise-default", type=float, default=1.0, help="patient noise for every modality")
    p.add_argument("--signal", action="append", metavar="MOD=VALUE", help="per-modality signal strength")
    p.add_argument("--noise", action="append", metavar="MOD=VALUE", help="per-modality chunk noise")
    p.add_argument("--patient-noise", action="append", metavar="MOD=VALUE", help="per-modality patient noise")
    p.add_argument("--chunks-min", type=int, default=4)
    p.add_argument("--chunks-max", type=int, default=12)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("evaluate", help="fit every configuration and write the report")
    _add_inputs(p, required=False)
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="TOML or JSON run configuration; flags override it")
    p.add_argument("--classification-threshold", type=float)
    p.add_argument("--grid-step", type=float)
    p.add_argument("--ridge-lambda", type=float)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--n-resamples", type=int)
    p.add_argument("--level", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--n-bins", type=int)
    p.add_argument("--binning", choices=("uniform", "quantile"))
    p.add_argument("--dca-t-min", type=float)
    p.add_argument("--dca-t-max", type=float)
    p.add_argument("--dca-step", type=float)
    p.add_argument("--configurations", help='"all" or comma list such as audio,audio+text')
    p.add_argument("--n-jobs", type=int)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("dca", help="decision curve from a predictions CSV")
    p.add_argument("--predictions", required=True, help="CSV with probability,label columns")
    p.add_argument("--out", required=True)
    p.add_argument("--t-min", type=float, default=0.05)
    p.add_argument("--t-max", type=float, default=0.60)
    p.add_argument("--step", type=float, default=0.01)
    p.set_defaults(func=cmd_dca)

    p = sub.add_parser("calibration", help="reliability curve and ECE from a predictions CSV")
    p.add_argument("--predictions", required=True, help="CSV with probability,label columns")
    p.add_argument("--out", required=True)
    p.add_argument("--n-bins", type=int, default=10)
    p.add_argument("--binning", choices=("uniform", "quantile"), default="uniform")
    p.add_argument("--tolerance", type=float, default=0.02)
    p.set_defaults(func=cmd_calibration)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        return _fail(EXIT_INPUT, exc.errors)
    except FitError as exc:
        return _fail(EXIT_FIT, [str(exc)])
    except (OSError, json.JSONDecodeError) as exc:
        return _fail(EXIT_INPUT, [str(exc)])
    except Exception as exc:  # noqa: BLE001
        logging.getLogger(__name__).debug("internal error", exc_info=True)
        return _fail(EXIT_INTERNAL, [f"{type(exc).__name__}: {exc}"])


if __name__ == "__main__":
    sys.exit(main())
