"""Command-line entry point: ``osrpc {simulate,fit,summarize,compare}``.

Seeding scheme (all streams derive from one root seed ``S``):

* replicate ``k`` of ``simulate`` draws from ``SeedSequence(S, spawn_key=(k,))``;
* chain ``c`` of ``fit`` uses the two sampler streams
  ``SeedSequence(S, spawn_key=(c, 0))`` and ``(c, 1)``.

Settings resolve as command-line flags > ``--config`` JSON > built-in defaults.
The JSON file may hold ``"simulation"``, ``"sampler"`` and ``"hyper"``
sections whose keys are the dataclass field names.
"""
import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from .data import CsvSchema, SimulationConfig, SimulationTruth, load_csv, simulate, write_csv
from .errors import DataParseError, DegenerateFitError, NumericalError, OsrpcError
from .gibbs import FitSession, Hyperparameters, SamplerConfig
from .postprocess import evaluate, summarize, write_summary
from .stats import rng_stream
from .trace import ChainTrace

log = logging.getLogger("osrpc")

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_NUMERIC, EXIT_DEGENERATE = 0, 2, 3, 4, 5

COMPARE_COLUMNS = ("osLCM-A", "osRPC-A", "osLCM-B", "osRPC-B")
MODEL_NAMES = {"oslcm": "osLCM", "osrpc": "osRPC"}

# flag -> (section, field)
FLAG_FIELDS = {
    "case": ("simulation", "case"),
    "replicates": ("simulation", "n_replicates"),
    "n_per_subpop": ("simulation", "n_per_subpop"),
    "mode": ("sampler", "mode"),
    "adaptive_iters": ("sampler", "adaptive_iters"),
    "adaptive_burnin": ("sampler", "adaptive_burnin"),
    "fixed_iters": ("sampler", "fixed_iters"),
    "burnin": ("sampler", "fixed_burnin"),
    "thin": ("sampler", "thin"),
    "threshold": ("sampler", "nonempty_threshold"),
    "k0": ("hyper", "K0"),
    "ks": ("hyper", "Ks"),
}


def _build_parser():
    ap = argparse.ArgumentParser(prog="osrpc", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="JSON settings file")
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")

    p = sub.add_parser("simulate", help="generate replicate datasets and truth files")
    common(p)
    p.add_argument("--case", choices=("A", "B"))
    p.add_argument("--replicates", type=int)
    p.add_argument("--n-per-subpop", type=int)
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("fit", help="run the adaptive and fixed sampler phases")
    common(p)
    p.add_argument("--input", type=Path, nargs="+", required=True, help="dataset CSV(s)")
    p.add_argument("--mode", choices=("osrpc", "oslcm"))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--n-chains", type=int, default=1)
    p.add_argument("--adaptive-iters", type=int)
    p.add_argument("--adaptive-burnin", type=int)
    p.add_argument("--fixed-iters", type=int)
    p.add_argument("--burnin", type=int, help="fixed-phase burn-in")
    p.add_argument("--thin", type=int)
    p.add_argument("--threshold", type=float, help="non-empty cluster occupancy threshold")
    p.add_argument("--k0", type=int)
    p.add_argument("--ks", type=int)
    p.add_argument("--n-outcomes", type=int, help="outcome categories (default: inferred)")
    p.add_argument("--levels", type=int, help="levels per exposure (default: inferred)")
    p.add_argument("--checkpoint-every", type=int, default=1000)
    p.add_argument("--resume", action="store_true", help="continue from an existing checkpoint")

    p = sub.add_parser("summarize", help="posterior summary (and metrics given truth)")
    common(p)
    p.add_argument("--trace", type=Path, nargs="+", required=True)
    p.add_argument("--input", type=Path, help="dataset CSV (default: recorded in the trace)")
    p.add_argument("--truth", type=Path, help="truth JSON (default: <dataset>.truth.json if present)")

    p = sub.add_parser("compare", help="aggregate replicate metrics into a comparison table")
    common(p)
    p.add_argument("--summaries", type=Path, nargs="+", required=True,
                   help="summary JSON files or directories containing them")
    return ap


# ---------------------------------------------------------------------------
# settings
# ---------------------------------------------------------------------------

def resolve_settings(args):
    """Merge defaults, the JSON config file and explicit flags into dataclasses."""
    sections = {"simulation": {}, "sampler": {}, "hyper": {}}
    if getattr(args, "config", None) is not None:
        with open(args.config) as fh:
            cfg = json.load(fh)
        unknown = set(cfg) - set(sections)
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        for k in sections:
            sections[k].update(cfg.get(k, {}))
    for flag, (sec, name) in FLAG_FIELDS.items():
        val = getattr(args, flag, None)
        if val is not None:
            sections[sec][name] = val
    seed = getattr(args, "seed", None)
    if seed is not None:
        sections["simulation"]["seed"] = seed
        sections["sampler"]["seed"] = seed
    out = {}
    for sec, cls in (("simulation", SimulationConfig), ("sampler", SamplerConfig),
                     ("hyper", Hyperparameters)):
        allowed = {f.name for f in fields(cls)}
        bad = set(sections[sec]) - allowed
        if bad:
            raise ValueError(f"unknown {sec} settings: {sorted(bad)}")
        out[sec] = cls(**sections[sec])
    return out


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args):
    st = resolve_settings(args)
    cfg = st["simulation"]
    args.out.mkdir(parents=True, exist_ok=True)
    written = []
    for k in range(1, cfg.n_replicates + 1):
        ds, truth = simulate(cfg, rng_stream(cfg.seed, k))
        stem = args.out / f"rep{k}_{cfg.case}"
        write_csv(ds, stem.with_suffix(".csv"))
        truth.save(stem.with_suffix(".truth.json"))
        written.append(stem)
    log.info("wrote %d %s replicates to %s", len(written), cfg.case, args.out)
    return written


def _schema(args):
    return CsvSchema(n_outcomes=args.n_outcomes,
                     levels=_LevelDefault(args.levels) if args.levels else {})


class _LevelDefault(dict):
    """Mapping that gives every exposure column the same level count."""

    def __init__(self, d):
        super().__init__()
        self.d = int(d)

    def get(self, key, default=None):
        return self.d


def _fit_one(task):
    path, chain, out, st, schema, resume, ckpt_every = task
    dataset = load_csv(path, schema)
    mode = st["sampler"].mode
    stem = out / f"{path.stem}_{mode}" if chain is None else out / f"{path.stem}_{mode}_chain{chain}"
    ckpt = stem.with_name(stem.name + ".ckpt.npz")
    if resume and ckpt.exists():
        sess = FitSession.from_checkpoint(ckpt, dataset)
        log.info("resuming %s at %s iteration %d", ckpt.name, sess.phase, sess.it)
    else:
        sess = FitSession(dataset, st["sampler"], st["hyper"], stream=(chain or 0,))
    sess.run(checkpoint=ckpt, checkpoint_every=ckpt_every)
    trace = sess.trace()
    trace.meta["dataset"] = str(Path(path).resolve())
    trace.meta["levels"] = dataset.d.tolist()
    trace.meta["n_outcomes"] = int(dataset.n_outcomes)
    trace.meta["subpop_labels"] = list(dataset.subpop_labels)
    trace_path = stem.with_name(stem.name + ".trace.npz")
    trace.save(trace_path)
    log_path = stem.with_name(stem.name + ".log.csv")
    with log_path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["phase", "iteration", "loglik", "k_occupied",
                                           "k_over_threshold"], lineterminator="\n")
        w.writeheader()
        w.writerows(sess.log_rows)
    log.info("%s: K_active=%d, local %s", trace_path.name, sess.K_active,
             [int(k) for k in sess.Ks_active])
    return str(trace_path)


def _map(fn, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(fn, tasks))
    return [fn(t) for t in tasks]


def cmd_fit(args):
    st = resolve_settings(args)
    args.out.mkdir(parents=True, exist_ok=True)
    schema = _schema(args)
    chains = [None] if args.n_chains == 1 else list(range(args.n_chains))
    tasks = [(Path(p), c, args.out, st, schema, args.resume, args.checkpoint_every)
             for p in args.input for c in chains]
    return _map(_fit_one, tasks, args.jobs)


def _default_truth(dataset_path):
    cand = Path(dataset_path).with_suffix(".truth.json")
    return cand if cand.exists() else None


def _load_for_trace(data_path, meta):
    """Reload a dataset with the level/outcome/subpopulation coding used by the fit."""
    schema = CsvSchema(n_outcomes=meta.get("n_outcomes"), subpop_labels=meta.get("subpop_labels"))
    dataset = load_csv(data_path, schema)
    if meta.get("levels") is not None and dataset.d.tolist() != meta["levels"]:
        dataset = replace(dataset, d=np.asarray(meta["levels"]))
    return dataset


def _summarize_one(task):
    trace_path, input_path, truth_path, out = task
    trace = ChainTrace.load(trace_path)
    data_path = input_path or trace.meta.get("dataset")
    if data_path is None:
        raise FileNotFoundError(f"{trace_path}: no dataset recorded; pass --input")
    truth = None
    if truth_path is None:
        truth_path = _default_truth(data_path)
    if truth_path is not None:
        truth = SimulationTruth.load(truth_path)
    dataset = _load_for_trace(data_path, trace.meta)
    summary = summarize(trace, dataset, K_active=trace.meta.get("K_active"))
    metrics = evaluate(summary, truth, dataset) if truth is not None else None
    prefix = Path(trace_path).name.removesuffix(".npz").removesuffix(".trace")
    paths = write_summary(summary, out, prefix=f"{prefix}.summary", metrics=metrics)
    # annotate for the compare step
    with paths["json"].open() as fh:
        obj = json.load(fh)
    obj["dataset"] = str(data_path)
    obj["case"] = truth.case if truth is not None else None
    with paths["json"].open("w") as fh:
        json.dump(obj, fh, indent=1)
    return str(paths["json"])


def cmd_summarize(args):
    for t in args.trace:
        if not Path(t).exists():
            raise FileNotFoundError(f"trace not found: {t}")
    args.out.mkdir(parents=True, exist_ok=True)
    tasks = [(Path(t), args.input, args.truth, args.out) for t in args.trace]
    return _map(_summarize_one, tasks, args.jobs)


METRIC_ROWS = ("k_pred", "dic", "p_y_mse", "y_ord", "pattern1", "pattern2", "pattern3", "nu_mse")


def _metric_values(m):
    vals = {k: m.get(k) for k in ("k_pred", "dic", "p_y_mse", "y_ord", "nu_mse")}
    for t, r in enumerate(m.get("pattern_classification") or []):
        vals[f"pattern{t + 1}"] = r
    return vals


def cmd_compare(args):
    files = []
    for p in args.summaries:
        p = Path(p)
        files.extend(sorted(p.glob("*.summary.json")) if p.is_dir() else [p])
    if not files:
        raise FileNotFoundError("no summary files found")
    detail = []
    for f in files:
        with open(f) as fh:
            obj = json.load(fh)
        if "metrics" not in obj or obj.get("case") is None:
            raise ValueError(f"{f}: summary has no simulation metrics")
        col = f"{MODEL_NAMES[obj['mode']]}-{obj['case']}"
        row = {"file": f.name, "column": col}
        row.update(_metric_values(obj["metrics"]))
        detail.append(row)
    args.out.mkdir(parents=True, exist_ok=True)
    with (args.out / "compare_detail.csv").open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["file", "column", *METRIC_ROWS], lineterminator="\n")
        w.writeheader()
        w.writerows(detail)
    table = {}
    for col in COMPARE_COLUMNS:
        rows = [r for r in detail if r["column"] == col]
        table[col] = {}
        for m in METRIC_ROWS:
            vals = [r[m] for r in rows if r.get(m) is not None]
            table[col][m] = float(np.mean(vals)) if vals else None
        table[col]["n_replicates"] = len(rows)
    with (args.out / "compare_table.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", *COMPARE_COLUMNS])
        for m in (*METRIC_ROWS, "n_replicates"):
            w.writerow([m] + ["" if table[c][m] is None else f"{table[c][m]:.6g}"
                              for c in COMPARE_COLUMNS])
    return table


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "summarize": cmd_summarize,
            "compare": cmd_compare}


def main(argv=None):
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        COMMANDS[args.command](args)
    except DataParseError as e:
        print(f"osrpc: parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except DegenerateFitError as e:
        print(f"osrpc: degenerate fit: {e}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (NumericalError, FloatingPointError) as e:
        print(f"osrpc: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OsrpcError, ValueError, OSError, json.JSONDecodeError) as e:
        print(f"osrpc: {e}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
