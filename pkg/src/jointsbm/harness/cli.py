"""Command-line entry point.

Subcommands: generate, fit, sweep, select, score. Exit codes are 0 on
success, 1 on usage errors, 2 on data or configuration errors and 3 on
numerical failures.
"""

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from ..exponfam import DomainError
from ..generator import sample
from ..inference import DegenerateRowError, run
from ..selection import modularity, nmi, select_model
from ..validation import InvalidConfiguration, check_multilayer
from . import io
from .config import ExperimentSpec, InputLayer, SweepSpec, load_spec
from .sweep import REPLICATE_COLUMNS, SUMMARY_COLUMNS, run_sweep

__all__ = ["main", "build_parser", "spec_from_manifest"]

logger = logging.getLogger("jointsbm")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
MANIFEST = "manifest.json"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment file, or a manifest.json from an earlier run")
    common.add_argument("--seed", type=int, help="override the seed recorded in the experiment")
    common.add_argument("--out", help="output directory (default: the experiment's output)")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--verbose", "-v", action="count", default=0)

    p = _Parser(prog="jointsbm", description="Joint community detection in multilayer graphs.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.add_parser("generate", parents=[common], help="write synthetic layers and ground truth")
    sub.add_parser("fit", parents=[common], help="joint variational fit on input layers")
    sub.add_parser("sweep", parents=[common], help="NMI sweep over q'")
    sub.add_parser("select", parents=[common], help="two-stage choice of community counts")
    sc = sub.add_parser("score", parents=[common], help="NMI and modularity of label files")
    sc.add_argument("--truth", required=True)
    sc.add_argument("--pred", required=True)
    sc.add_argument("--adjacency", help="dense CSV; also report the modularity of --pred")
    return p


def spec_from_manifest(payload):
    d = dict(payload["spec"])
    inf = d.pop("inference")
    inf.pop("seed", None)
    d["sweep"] = SweepSpec(**d["sweep"]) if d.get("sweep") else None
    d["inputs"] = [InputLayer(**x) for x in d.get("inputs", [])]
    return ExperimentSpec(inference=inf, **d)


def _load(args, mode):
    if not args.config:
        raise UsageError(f"{args.command} needs --config")
    path = Path(args.config)
    seed = None
    if path.suffix == ".json":
        if not path.exists():
            raise InvalidConfiguration(f"{path}: no such manifest")
        payload = json.loads(path.read_text())
        spec = spec_from_manifest(payload)
        seed = payload.get("seed")
    else:
        spec = load_spec(path)
    if mode is not None and spec.mode not in mode:
        raise InvalidConfiguration(f"{args.command} cannot run an experiment of mode {spec.mode!r}")
    if args.seed is not None:
        seed = args.seed
    if seed is None:
        seed = spec.sweep.base_seed if spec.sweep is not None else spec.inference.get("seed", 0)
    out = Path(args.out or spec.output)
    out.mkdir(parents=True, exist_ok=True)
    return spec, int(seed), out


def _manifest(out, command, spec, seed, outputs):
    io.write_json(out / MANIFEST, {
        "command": command,
        "seed": seed,
        "spec": spec.resolved(),
        "outputs": sorted(outputs),
    })


def _fmt(v):
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def _load_inputs(spec):
    layers, families = [], []
    for layer in spec.inputs:
        mats = [io.load_adjacency(p, layer.format) for p in layer.paths]
        if layer.preprocess == "correlation":
            A = io.preprocess_correlation(mats[0], layer.threshold)
        elif layer.preprocess == "counts":
            A = io.preprocess_counts(mats)
        else:
            A = mats[0]
        layers.append(A)
        families.append(layer.family)
    return layers, families


def cmd_generate(args):
    spec, seed, out = _load(args, None)
    if spec.generator is None:
        raise InvalidConfiguration("generate needs a [generator] section")
    cfg = spec.generator_config()
    graph, truth, theta = sample(cfg, np.random.default_rng(seed))
    outputs = []
    for l, (A, g) in enumerate(zip(graph.layers, truth.labels), 1):
        io.save_dense(out / f"layer{l}.csv", A)
        io.write_labels(out / f"truth_layer{l}.labels", g)
        outputs += [f"layer{l}.csv", f"truth_layer{l}.labels"]
    io.write_json(out / "theta.json", [np.asarray(t).tolist() for t in theta])
    outputs.append("theta.json")
    _manifest(out, "generate", spec, seed, outputs)
    return EXIT_OK


def cmd_fit(args):
    spec, seed, out = _load(args, ("real_fit",))
    layers, families = _load_inputs(spec)
    K_total = spec.fit["K_total"]
    K_total = list(K_total) if isinstance(K_total, (list, tuple)) else [K_total] * len(layers)
    res = run(check_multilayer(layers, families), int(spec.fit["K"]), K_total,
              spec.inference_options(seed))
    io.write_json(out / "fit.json", res.to_dict())
    outputs = ["fit.json"]
    for l, g in enumerate(res.labels.labels, 1):
        io.write_labels(out / f"labels_layer{l}.labels", g)
        outputs.append(f"labels_layer{l}.labels")
    _manifest(out, "fit", spec, seed, outputs)
    return EXIT_OK


def cmd_sweep(args):
    spec, seed, out = _load(args, ("synthetic_sweep",))
    spec.sweep.base_seed = seed
    summary, rows = run_sweep(spec, threads=max(1, args.threads))
    _write_csv(out / "sweep.csv", SUMMARY_COLUMNS, summary)
    _write_csv(out / "replicates.csv", REPLICATE_COLUMNS, rows)
    _manifest(out, "sweep", spec, seed, ["sweep.csv", "replicates.csv"])
    return EXIT_OK


def cmd_select(args):
    spec, seed, out = _load(args, ("select",))
    layers, families = _load_inputs(spec)
    rng_K = spec.select["K_total_range"]
    rng_K = list(rng_K) if isinstance(rng_K, (list, tuple)) else [rng_K]
    report = select_model(check_multilayer(layers, families), rng_K, spec.inference_options(seed))
    io.write_json(out / "selection.json", report.to_dict())
    _manifest(out, "select", spec, seed, ["selection.json"])
    return EXIT_OK


def cmd_score(args):
    truth = io.read_labels(args.truth)
    pred = io.read_labels(args.pred)
    lines = [f"nmi={nmi(truth, pred)!r}"]
    if args.adjacency:
        A = io.load_adjacency(args.adjacency)
        lines.append(f"modularity={modularity(A, pred)!r}")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "score.txt").write_text(text)
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "fit": cmd_fit, "sweep": cmd_sweep,
            "select": cmd_select, "score": cmd_score}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DegenerateRowError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InvalidConfiguration, DomainError, io.DataError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, OSError, KeyError, TypeError) as exc:
        print(f"data error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
