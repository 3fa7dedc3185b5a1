"""fmlfs command line: run, rank, partition, and report subcommands.

run       full pipeline: load, split, partition, federated ranking, ML-kNN
          evaluation over a top-k sweep; writes all artifacts to --out.
rank      same minus the classifier: partition plan + feature ranking only.
partition write the Non-IID partition plan for a dataset.
report    aggregate per-top_k metrics files into a CSV/JSON table and render
          one figure per metric.

Exit codes: 0 success, 1 configuration/usage error, 2 runtime error. Errors
are reported as a JSON object on stderr. Every artifact embeds the resolved
configuration; all randomness flows from --seed. FMLFS_LOG sets the log level.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

from .client import apply_ranking, compute_local_report
from .dataset import (
    MultiLabelDataset,
    discretize,
    load_arff,
    load_csv,
    partition_noniid,
    split_train_test,
)
from .federation import RunConfig, run_round
from .mlknn import MetricsReport, evaluate, fit, predict
from .pareto import FeatureRanking

log = logging.getLogger("fmlfs")

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


class ConfigError(Exception):
    """A problem with flags or settings, reported with exit code 1."""


@dataclass
class ExperimentSpec:
    """Resolved settings for one experiment: round config plus sweep/output."""

    run: RunConfig
    sweep: list[int] = field(default_factory=list)
    outdir: Path = Path("fmlfs_out")
    report_format: str = "csv"
    test_fraction: float = 0.3
    labels: int | None = None
    labels_xml: str | None = None
    dump_reports: bool = False

    def validate_against(self, ds: MultiLabelDataset) -> None:
        if any(k > ds.num_features for k in self.sweep):
            raise ConfigError(
                f"top-k values must be <= D={ds.num_features}, got {self.sweep}"
            )
        if self.sweep != sorted(self.sweep) or len(set(self.sweep)) != len(self.sweep):
            raise ConfigError(f"top-k sweep must be strictly ascending, got {self.sweep}")

    def to_json(self) -> dict:
        return {
            **self.run.to_json(),
            "sweep": list(self.sweep),
            "outdir": str(self.outdir),
            "report_format": self.report_format,
            "test_fraction": self.test_fraction,
            "labels": self.labels,
            "labels_xml": self.labels_xml,
        }


def parse_top_k(text: str) -> list[int]:
    """Parse a sweep list; '10,20,...,100' continues the arithmetic progression."""
    tokens = [t.strip() for t in text.split(",") if t.strip()]
    if not tokens:
        raise ConfigError("empty top-k list")
    if "..." in tokens:
        cut = tokens.index("...")
        head, tail = tokens[:cut], tokens[cut + 1:]
        if len(head) < 2 or len(tail) != 1 or "..." in tail:
            raise ConfigError(f"bad top-k range {text!r}: expected 'a,b,...,z'")
        try:
            head_values = [int(t) for t in head]
            stop = int(tail[0])
        except ValueError:
            raise ConfigError(f"non-integer top-k value in {text!r}") from None
        step = head_values[1] - head_values[0]
        if step <= 0 or any(b - a != step for a, b in zip(head_values, head_values[1:])):
            raise ConfigError(f"bad top-k range {text!r}: prefix must be an ascending progression")
        if (stop - head_values[-1]) % step != 0 or stop <= head_values[-1]:
            raise ConfigError(f"bad top-k range {text!r}: {stop} is not on the progression")
        values = list(range(head_values[0], stop + 1, step))
    else:
        try:
            values = [int(t) for t in tokens]
        except ValueError:
            raise ConfigError(f"non-integer top-k value in {text!r}") from None
    if any(v < 1 for v in values):
        raise ConfigError("top-k values must be >= 1")
    return values


def _error_json(kind: str, message: str) -> str:
    return json.dumps({"error": {"kind": kind, "message": message}})


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the spec wants config errors to exit 1."""

    def error(self, message):
        print(_error_json("config", message), file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fmlfs", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_input_flags(p):
        p.add_argument("--data", required=True, help="dataset path (.arff or .csv)")
        p.add_argument("--labels", type=int, help="number of label columns (last L attributes)")
        p.add_argument("--labels-xml", help="XML label manifest (ARFF only)")
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--out", default="fmlfs_out", help="output directory")

    def add_round_flags(p):
        p.add_argument("--clients", type=int, default=10)
        p.add_argument("--alpha", type=float, default=0.5)
        p.add_argument("--bins", type=int, default=10)
        p.add_argument("--test-fraction", type=float, default=0.3)
        p.add_argument("--transport", default="in-process",
                       help="'in-process' or 'tcp host:port' (port 0 picks a free port)")
        p.add_argument("--timeout", type=float, default=60.0, help="report-collection timeout (s)")
        p.add_argument("--weighted", action="store_true",
                       help="weight the aggregation by client instance counts")
        p.add_argument("--dump-reports", action="store_true",
                       help="also write each client's MI/CD report (debug)")

    p_run = sub.add_parser("run", help="rank features and evaluate ML-kNN over a top-k sweep")
    add_input_flags(p_run)
    add_round_flags(p_run)
    p_run.add_argument("--k", type=int, default=10, help="ML-kNN neighbor count")
    p_run.add_argument("--top-k", default="", help="sweep list, e.g. 10,20,...,100 (default: up to 100 by 10)")

    p_rank = sub.add_parser("rank", help="rank features only (no classifier)")
    add_input_flags(p_rank)
    add_round_flags(p_rank)

    p_part = sub.add_parser("partition", help="write the Non-IID partition plan")
    add_input_flags(p_part)
    p_part.add_argument("--clients", type=int, default=10)
    p_part.add_argument("--alpha", type=float, default=0.5)

    p_report = sub.add_parser("report", help="tabulate metrics files and render figures")
    p_report.add_argument("dir", help="directory containing metrics_*.json files")
    p_report.add_argument("--format", choices=("csv", "json"), default="csv")
    p_report.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    p_report.add_argument("--out", default=None, help="output directory (default: the input dir)")
    return parser


def _load_dataset(args) -> MultiLabelDataset:
    path = Path(args.data)
    if not path.is_file():
        raise ConfigError(f"dataset not readable: {path}")
    if path.suffix.lower() == ".arff":
        if args.labels_xml:
            return load_arff(path, args.labels_xml)
        if args.labels is None:
            raise ConfigError("ARFF input needs --labels or --labels-xml")
        return load_arff(path, args.labels)
    if args.labels is None:
        raise ConfigError("CSV input needs --labels")
    return load_csv(path, args.labels)


def _spec_from_args(args, ds: MultiLabelDataset) -> ExperimentSpec:
    sweep = []
    if getattr(args, "top_k", ""):
        sweep = parse_top_k(args.top_k)
    elif args.command == "run":
        sweep = [k for k in range(10, 101, 10) if k <= ds.num_features] or [ds.num_features]
    try:
        run = RunConfig(
            num_clients=args.clients,
            bins=getattr(args, "bins", 10),
            alpha=args.alpha,
            seed=args.seed,
            top_k=sweep,
            data_path=args.data,
            knn_k=getattr(args, "k", 10),
            transport=getattr(args, "transport", "in-process"),
            timeout_s=getattr(args, "timeout", 60.0),
            weighted=getattr(args, "weighted", False),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    spec = ExperimentSpec(
        run=run,
        sweep=sweep,
        outdir=Path(args.out),
        test_fraction=getattr(args, "test_fraction", 0.3),
        labels=args.labels,
        labels_xml=args.labels_xml,
        dump_reports=getattr(args, "dump_reports", False),
    )
    spec.validate_against(ds)
    if not 0.0 < spec.test_fraction < 1.0:
        raise ConfigError("test fraction must lie strictly between 0 and 1")
    return spec


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _open_run_log(outdir: Path):
    fh = open(outdir / "run_log.jsonl", "w", encoding="utf-8")

    def emit(event: dict) -> None:
        record = {"event": event["event"], "timestamp": time.time()}
        if "client_id" in event:
            record["client_id"] = event["client_id"]
        fh.write(json.dumps(record) + "\n")

    return fh, emit


def _rank_pipeline(args) -> tuple[ExperimentSpec, MultiLabelDataset, MultiLabelDataset, FeatureRanking]:
    """Shared load/split/partition/round steps for run and rank."""
    ds = _load_dataset(args)
    spec = _spec_from_args(args, ds)
    train, test = split_train_test(ds, spec.test_fraction, spec.run.seed)
    if spec.run.num_clients > train.num_instances:
        raise ConfigError(
            f"--clients {spec.run.num_clients} exceeds the {train.num_instances} training instances"
        )
    plan = partition_noniid(train, spec.run.num_clients, spec.run.alpha, spec.run.seed)
    spec.outdir.mkdir(parents=True, exist_ok=True)
    _write_json(spec.outdir / "partition.json", {**plan.to_json(), "scope": "train", "config": spec.to_json()})

    shards = [train.subset(plan.client_rows(cid)) for cid in range(spec.run.num_clients)]
    log.info("running one federated round over %d clients", spec.run.num_clients)
    fh, emit = _open_run_log(spec.outdir)
    try:
        ranking = run_round(spec.run, shards, events=emit)
    finally:
        fh.close()
    _write_json(spec.outdir / "ranking.json", {**ranking.to_json(), "config": spec.to_json()})

    if spec.dump_reports:
        for cid, shard in enumerate(shards):
            report = compute_local_report(discretize(shard, spec.run.bins), cid)
            _write_json(spec.outdir / f"client_report_{cid:02d}.json",
                        {**report.to_json(), "config": spec.to_json()})
    return spec, train, test, ranking


def cmd_rank(args) -> int:
    _rank_pipeline(args)
    return EXIT_OK


def cmd_run(args) -> int:
    spec, train, test, ranking = _rank_pipeline(args)
    for top_k in spec.sweep:
        reduced_train = apply_ranking(train, ranking, top_k)
        reduced_test = apply_ranking(test, ranking, top_k)
        model = fit(reduced_train, k=spec.run.knn_k)
        metrics = evaluate(test.labels, predict(model, reduced_test))
        log.info("top_k=%d accuracy=%.4f", top_k, metrics.accuracy)
        _write_json(spec.outdir / f"metrics_top{top_k:03d}.json",
                    {**metrics.to_json(), "top_k": top_k, "config": spec.to_json()})
    return EXIT_OK


def cmd_partition(args) -> int:
    ds = _load_dataset(args)
    try:
        plan = partition_noniid(ds, args.clients, args.alpha, args.seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    config = {"data_path": args.data, "num_clients": args.clients, "alpha": args.alpha,
              "seed": args.seed, "labels": args.labels, "labels_xml": args.labels_xml}
    _write_json(outdir / "partition.json", {**plan.to_json(), "scope": "full", "config": config})
    return EXIT_OK


def _collect_report_rows(directory: Path) -> list[dict]:
    files = sorted(directory.glob("metrics_top*.json"))
    if not files:
        raise ValueError(f"no metrics_top*.json files found in {directory}")
    rows = []
    for path in files:
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValueError(f"corrupt metrics file {path.name}: {exc}") from None
        missing = [k for k in (*MetricsReport.METRIC_NAMES, "top_k", "config") if k not in payload]
        if missing:
            raise ValueError(f"metrics file {path.name} is missing keys {missing}")
        dataset = Path(payload["config"].get("data_path") or "unknown").stem
        for metric in MetricsReport.METRIC_NAMES:
            rows.append({
                "dataset": dataset,
                "top_k": int(payload["top_k"]),
                "metric": metric,
                "value": float(payload[metric]),
            })
    rows.sort(key=lambda r: (r["dataset"], r["top_k"], r["metric"]))
    return rows


def cmd_report(args) -> int:
    directory = Path(args.dir)
    if not directory.is_dir():
        raise ConfigError(f"not a directory: {directory}")
    rows = _collect_report_rows(directory)
    outdir = Path(args.out) if args.out else directory
    outdir.mkdir(parents=True, exist_ok=True)
    config = {"dir": str(directory), "format": args.format, "plots": not args.no_plots}

    if args.format == "csv":
        lines = ["# config: " + json.dumps(config), "dataset,top_k,metric,value"]
        lines += [f"{r['dataset']},{r['top_k']},{r['metric']},{format(r['value'], '.6g')}" for r in rows]
        (outdir / "report.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    else:
        _write_json(outdir / "report.json", {"config": config, "rows": rows})

    if not args.no_plots:
        from .plots import render_metric_curves

        written = render_metric_curves(rows, outdir)
        log.info("rendered %d figures", len(written))
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("FMLFS_LOG", "WARNING").upper())
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"run": cmd_run, "rank": cmd_rank, "partition": cmd_partition, "report": cmd_report}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(_error_json("config", str(exc)), file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        print(_error_json("runtime", f"{type(exc).__name__}: {exc}"), file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
