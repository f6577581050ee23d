"""Command line front-end: ``valleyforge <subcommand> ...``.

Failures print one line ``ERROR <code>: <message>`` to stderr and exit 1
(2 for argument errors, as argparse does).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import metrics as M
from .dataio import load_table, synth_generate, write_table
from .errors import ConfigInvalid, ValleyForgeError
from .pipeline import load_artifact, load_config, run_bench, run_eval, run_predict, run_train


def _cmd_train(args) -> None:
    cfg = load_config(args.config, seed=args.seed)
    out = args.out or cfg.output_dir or "valleyforge_run"
    artifact = run_train(cfg, out_dir=out)
    print(M.format_report(artifact.metrics["test"]))
    print(f"selected: {', '.join(artifact.metrics['selected_features'])}")
    print(f"wrote {out}/model.json")


def _cmd_eval(args) -> None:
    artifact = load_artifact(args.model)
    table = load_table(args.data, artifact.schema_id)
    report = run_eval(artifact, table, out_dir=args.out)
    print(M.format_report(report))


def _cmd_predict(args) -> None:
    artifact = load_artifact(args.model)
    table = load_table(args.data, artifact.schema_id, require_labels=False)
    P = run_predict(artifact, table, out_path=args.out)
    print(f"wrote {P.shape[0]} rows to {args.out}")


def _cmd_bench(args) -> None:
    cfg = None
    if args.config:
        try:
            cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"{args.config}: {exc}") from exc
    rows = run_bench(cfg, out_path=args.out, history_dir=args.history)
    by = {}
    for r in rows:
        by.setdefault((r["function"], r["dimension"], r["method"]), []).append(r["best_fitness"])
    for (fn, dim, method), vals in by.items():
        vals = sorted(vals)
        print(f"{fn:<11} d={dim:<3} {method:<7} median best {vals[len(vals) // 2]:.3e}")
    print(f"wrote {args.out}")


def _cmd_gen_synth(args) -> None:
    table = synth_generate(args.n, args.informative, args.noise, args.delta, args.seed)
    write_table(table, args.out)
    print(f"wrote {table.n_rows} rows x {table.n_features} features to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="valleyforge", description="Multi-disease risk pipeline.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run the full training pipeline")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--out", default=None, help="output directory")
    t.set_defaults(func=_cmd_train)

    e = sub.add_parser("eval", help="score a labeled CSV with a saved model")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--out", default=None, help="directory for metrics.json and ROC files")
    e.set_defaults(func=_cmd_eval)

    pr = sub.add_parser("predict", help="write per-record risk probabilities")
    pr.add_argument("--model", required=True)
    pr.add_argument("--data", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=_cmd_predict)

    b = sub.add_parser("bench", help="optimizer versus random search on test functions")
    b.add_argument("--config", default=None)
    b.add_argument("--out", default="bench.csv")
    b.add_argument("--history", default=None, help="directory for per-run convergence CSVs")
    b.set_defaults(func=_cmd_bench)

    g = sub.add_parser("gen-synth", help="write a synthetic labeled CSV")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--informative", type=int, required=True)
    g.add_argument("--noise", type=int, required=True)
    g.add_argument("--delta", type=float, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_gen_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ValleyForgeError as exc:
        print(f"ERROR {exc.code}: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"ERROR FileNotFound: {exc.filename or exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"ERROR {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
