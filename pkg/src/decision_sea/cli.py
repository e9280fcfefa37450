"""Command-line workflow: simulate -> fit -> evaluate / optimize -> report.

All subcommands share ``--config`` (an experiment config document), ``--out``
(the run directory) and ``--seed`` (overrides the config's first seed).
Run layout::

    <out>/data/calibration.jsonl, <out>/data/test.jsonl
    <out>/models/<method>.json
    <out>/report.json, <out>/summary.csv
    <out>/optimize.json

Exit codes: 0 success, 1 I/O error, 2 config/validation error, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import data_io
from .errors import SeaError
from .scenarios import (
    ExperimentConfig,
    evaluate_method,
    fit_method,
    model_key,
    run_optimize,
    simulate_splits,
)

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_INTERNAL = 0, 1, 2, 3


class UsageError(SeaError):
    """Input the user must fix (missing run artifacts, bad flags)."""


def _seed(config: ExperimentConfig, override):
    return int(override) if override is not None else config.seeds[0]


def _paths(out: Path):
    return {
        "calibration": out / "data" / "calibration.jsonl",
        "test": out / "data" / "test.jsonl",
        "models": out / "models",
        "report": out / "report.json",
        "optimize": out / "optimize.json",
    }


def _load_splits(paths):
    missing = [str(paths[s]) for s in ("calibration", "test") if not paths[s].exists()]
    if missing:
        raise UsageError(f"dataset file(s) not found: {missing}; run 'simulate' first")
    return data_io.load_dataset(paths["calibration"]), data_io.load_dataset(paths["test"])


def cmd_simulate(config, seed, out):
    paths = _paths(out)
    cal, test = simulate_splits(config, seed)
    data_io.save_dataset(cal, paths["calibration"])
    data_io.save_dataset(test, paths["test"])
    print(f"scenario={config.scenario} seed={seed} calibration={len(cal)} test={len(test)}")


def cmd_fit(config, seed, out):
    paths = _paths(out)
    cal, _ = _load_splits(paths)
    written = set()
    for method in config.methods:
        for policy in config.policies:
            key = model_key(method, policy)
            if key in written:
                continue
            data_io.save_model(fit_method(method, config, cal, policy), paths["models"] / f"{key}.json")
            written.add(key)
            print(f"fitted {key}")


def cmd_evaluate(config, seed, out):
    paths = _paths(out)
    cal, test = _load_splits(paths)
    models = {}
    for method in config.methods:
        for policy in config.policies:
            key = model_key(method, policy)
            path = paths["models"] / f"{key}.json"
            if not path.exists():
                raise UsageError(f"no fitted model at {path}; run 'fit' with this config first")
            models[key] = data_io.load_model(path)
    results = [
        evaluate_method(method, policy, models[model_key(method, policy)], config, cal, test, seed)
        for method in config.methods
        for policy in config.policies
    ]
    data_io.write_report(results, paths["report"], seed=seed)
    print(f"wrote {len(results)} result(s) to {paths['report']}")


def cmd_optimize(config, seed, out):
    paths = _paths(out)
    result = run_optimize(config, seed)
    data_io._write_document(paths["optimize"], "sea-optimize-report", {"master_seed": seed, "result": result})
    print(
        f"{result['target']}={result['value']!r} objective={result['objective']!r} "
        f"baseline({result['baseline_value']!r})={result['baseline_objective']!r}"
    )


def format_table(results) -> str:
    rows = sorted(results, key=lambda r: r.expected_cost)
    head = ("method", "policy", "seed", "expected_cost", "ece")
    body = [
        (r.method, r.policy, str(r.seed), f"{r.expected_cost:.4f}",
         "-" if r.calibration is None else f"{r.calibration.ece:.4f}")
        for r in rows
    ]
    widths = [max(len(x) for x in col) for col in zip(head, *body)]
    lines = ["  ".join(x.ljust(w) for x, w in zip(line, widths)).rstrip() for line in (head, *body)]
    return "\n".join(lines)


def cmd_report(config, seed, out):
    path = _paths(out)["report"]
    if not path.exists():
        raise UsageError(f"no report at {path}; run 'evaluate' first")
    print(format_table(data_io.load_report(path)))


COMMANDS = {
    "simulate": (cmd_simulate, "generate calibration and test datasets"),
    "fit": (cmd_fit, "fit every configured self-assessment method"),
    "evaluate": (cmd_evaluate, "evaluate fitted models and write the report"),
    "optimize": (cmd_optimize, "tune temperature or conformal alpha against decision cost"),
    "report": (cmd_report, "print the report sorted by expected cost"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="decision-sea", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", required=True, type=Path, help="experiment config document")
        p.add_argument("--out", required=True, type=Path, help="run output directory")
        p.add_argument("--seed", type=_uint64, default=None,
                       help="master seed (64-bit unsigned); defaults to the config's first seed")
    return parser


def _uint64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return value


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = data_io.load_config(args.config)
        seed = _seed(config, args.seed)
        COMMANDS[args.command][0](config, seed, args.out)
    except SeaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
