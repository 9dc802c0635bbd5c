"""Command-line entry point.

Subcommands: ``run <config>`` executes the full pipeline, ``report <dir>``
prints a human-readable summary of a finished run, ``attribute <config>
<method>`` runs stages 1-2 only and writes an attribution dump, ``synth
<spec> <out>`` generates the synthetic spike dataset with its ground truth.

Failures exit nonzero after printing a single machine-readable JSON error
record to standard output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_run_config
from .dataset import generate_spike_dataset, save_ucr_tsv
from .errors import ConfigError, TsabenchError
from .runner import attribute_only, execute_run, format_report, load_run


def _error_record(exc: TsabenchError) -> str:
    return json.dumps({
        "error": {
            "stage": getattr(exc, "stage", "config"),
            "type": type(exc).__name__,
            "message": str(exc),
        }
    }, sort_keys=True)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config's master seed")
    parser.add_argument("--out", default=None,
                        help="override the output location")
    parser.add_argument("--jobs", type=int, default=1,
                        help="parallelism width; outputs are identical for "
                             "any value (execution is currently serial)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsabench",
        description="Perturbation-based benchmark for time-series attribution "
                    "methods",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a full benchmark run")
    p_run.add_argument("config", help="path to a JSON run config")
    _add_common(p_run)

    p_rep = sub.add_parser("report", help="summarize a finished run directory")
    p_rep.add_argument("run_dir", help="run directory written by `tsabench run`")

    p_att = sub.add_parser("attribute",
                           help="compute one method's attributions and dump them")
    p_att.add_argument("config", help="path to a JSON run config")
    p_att.add_argument("method", help="attribution method id")
    _add_common(p_att)

    p_syn = sub.add_parser("synth", help="generate the synthetic spike dataset")
    p_syn.add_argument("spec", help="JSON file with n_samples, series_len, seed")
    p_syn.add_argument("out_path", help="output TSV path; ground truth goes to "
                                        "<out>.truth.json")
    p_syn.add_argument("--seed", type=int, default=None,
                       help="override the generator file's seed")
    return parser


def _cmd_run(args) -> int:
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
    config = load_run_config(args.config, seed=args.seed, out_dir=args.out)
    result = execute_run(config)
    print(result.run_dir)
    return 0


def _cmd_report(args) -> int:
    manifest, report = load_run(args.run_dir)
    sys.stdout.write(format_report(manifest, report))
    return 0


def _cmd_attribute(args) -> int:
    if args.jobs < 1:
        raise ConfigError(f"--jobs must be >= 1, got {args.jobs}")
    config = load_run_config(args.config, seed=args.seed)
    default_name = f"attributions_{args.method.replace(':', '_')}.csv"
    out_path = Path(args.out) if args.out else Path(default_name)
    written = attribute_only(config, args.method, out_path)
    print(written)
    return 0


def _cmd_synth(args) -> int:
    try:
        spec = json.loads(Path(args.spec).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read spec {args.spec}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.spec} is not valid JSON: {exc}") from exc
    if not isinstance(spec, dict):
        raise ConfigError("synth spec must be a JSON object")
    unknown = set(spec) - {"n_samples", "series_len", "seed"}
    if unknown:
        raise ConfigError(f"synth spec has unknown keys {sorted(unknown)}")
    n_samples = spec.get("n_samples", 200)
    series_len = spec.get("series_len", 100)
    seed = args.seed if args.seed is not None else spec.get("seed", 13)
    dataset, truth = generate_spike_dataset(n_samples, series_len, seed)
    out = Path(args.out_path)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    save_ucr_tsv(dataset, out)
    truth_path = Path(str(out) + ".truth.json")
    truth_path.write_text(
        json.dumps([[int(i) for i in row] for row in truth]) + "\n"
    )
    print(out)
    print(truth_path)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "report": _cmd_report,
    "attribute": _cmd_attribute,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except TsabenchError as exc:
        print(_error_record(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
