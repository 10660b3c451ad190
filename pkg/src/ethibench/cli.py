"""Command-line orchestration for the evaluation harness.

Exit codes are a stable contract: 0 success, 1 usage error, 2 data error,
3 judge/backend error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

from . import __version__
from .campaign import cumulate
from .config import HarnessConfig, load_config
from .errors import DataError, EthibenchError, JudgeBackendError
from .evaluation import (
    evaluate_run,
    latest_run_reports,
    render_report,
    write_campaign_report,
    write_index_report,
    write_run_report,
)
from .gt_store import GroundTruthStore
from .ingest import Finding, RunRegistry
from .judge import JudgeCache, LabeledFinding, calibrate
from .stats import RunCounts, compare_setups, format_comparison_table
from .suite import (
    EvalHistory,
    HistoryRow,
    TargetCost,
    load_history_csv,
    select_suite,
)
from .timefmt import parse_instant

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_JUDGE = 3


class UsageError(EthibenchError):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse exits with code 2 on usage errors; the harness contract is 1."""

    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ethibench", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--config", type=Path, default=None, help="INI config file")
    parser.add_argument("--data-dir", type=str, default=None, help="data directory override")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("init-target", help="import a ground-truth JSONL file as version 1")
    p.add_argument("--file", type=Path, required=True)
    p.add_argument("--target", type=str, default=None, help="target id (default: file stem)")

    p = sub.add_parser("register-run", help="register an agent run and its findings file")
    p.add_argument("--setup", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--replicate", type=int, required=True)
    p.add_argument("--findings", type=Path, required=True)
    p.add_argument("--run-id", default=None)
    p.add_argument("--started", default=None, help="RFC 3339 start instant")
    p.add_argument("--ended", default=None, help="RFC 3339 end instant")
    p.add_argument("--duration", type=float, default=None, help="seconds")
    p.add_argument("--cost", type=float, default=0.0)
    p.add_argument("--notes", default="")

    p = sub.add_parser("evaluate", help="evaluate registered runs against ground truth")
    p.add_argument("--target", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--run", default=None, help="run id")
    group.add_argument("--all", action="store_true", help="evaluate every run of the target")

    p = sub.add_parser("cumulate", help="score all replicates of a setup as one campaign")
    p.add_argument("--target", required=True)
    p.add_argument("--setup", required=True)

    p = sub.add_parser("compare", help="pairwise A/B statistics between two setups")
    p.add_argument("--a", dest="setup_a", required=True)
    p.add_argument("--b", dest="setup_b", required=True)
    p.add_argument("--metrics", default="f1,f0.5,recall,precision")
    p.add_argument("--aggregation", choices=("micro", "macro"), default=None)

    p = sub.add_parser("select-suite", help="pick a budget-constrained reduced target suite")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--budget", default=None, help="fraction of full-suite cost, e.g. 0.4x")
    group.add_argument("--budget-abs", type=float, default=None, help="absolute cost budget")
    p.add_argument("--metric", default="f1")
    p.add_argument("--history", type=Path, default=None, help="history CSV (default: own reports)")
    p.add_argument("--cost-basis", choices=("cost", "duration"), default="cost")

    p = sub.add_parser("calibrate-judge", help="compare the pipeline against expert labels")
    p.add_argument("--labels", type=Path, required=True)
    p.add_argument("--target", required=True)

    p = sub.add_parser("serve", help="run the review API")
    p.add_argument("--listen", default="127.0.0.1:8337")
    p.add_argument("--ui-dir", type=Path, default=None, help="static frontend directory")

    p = sub.add_parser("report", help="consolidated export of all evaluation results")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--out", type=Path, default=None)

    return parser


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

def _collect_run_rows(config: HarnessConfig) -> list[dict]:
    """Latest per-run report payload rows across all targets."""
    store = GroundTruthStore(config.ground_truth_dir)
    rows = []
    for target_id in store.targets():
        for run_id, doc in latest_run_reports(config.data_dir, target_id).items():
            rows.append(doc["payload"])
    return rows


def _history_from_reports(config: HarnessConfig, cost_basis: str) -> EvalHistory:
    payloads = _collect_run_rows(config)
    if not payloads:
        raise DataError("no evaluation reports found; run `ethibench evaluate` first")
    per_target_costs: dict[str, list[float]] = {}
    counts: dict[tuple[str, int], dict[str, tuple[int, int, int]]] = {}
    for payload in payloads:
        target = payload["target_id"]
        key = (payload["setup"], int(payload["replicate"]))
        c = payload["counts"]
        counts.setdefault(key, {})[target] = (c["tp"], c["fp"], c["fn"])
        basis = payload["metrics"].get(cost_basis)
        per_target_costs.setdefault(target, []).append(float(basis or 0.0))
    targets = []
    for target, values in sorted(per_target_costs.items()):
        mean_cost = sum(values) / len(values)
        if mean_cost <= 0:
            raise DataError(
                f"target {target!r} has no recorded {cost_basis}; "
                f"try --cost-basis {'duration' if cost_basis == 'cost' else 'cost'} "
                "or provide --history"
            )
        targets.append(TargetCost(target, mean_cost))
    rows = [
        HistoryRow(setup=k[0], replicate=k[1], counts=v) for k, v in sorted(counts.items())
    ]
    return EvalHistory(targets=tuple(targets), rows=tuple(rows))


def _counts_rows(config: HarnessConfig) -> list[RunCounts]:
    rows = []
    for payload in _collect_run_rows(config):
        c = payload["counts"]
        rows.append(
            RunCounts(
                setup=payload["setup"],
                target_id=payload["target_id"],
                replicate=int(payload["replicate"]),
                tp=c["tp"],
                fp=c["fp"],
                fn=c["fn"],
            )
        )
    return rows


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_init_target(args, config: HarnessConfig) -> int:
    store = GroundTruthStore(config.ground_truth_dir)
    gts = store.init_target(args.file, target_id=args.target)
    print(f"initialized target {gts.target_id!r} with {len(gts.entries)} entries (version 1)")
    return EXIT_OK


def cmd_register_run(args, config: HarnessConfig) -> int:
    registry = RunRegistry(config.data_dir)
    record = registry.register_run(
        setup=args.setup,
        target_id=args.target,
        replicate=args.replicate,
        findings_path=args.findings,
        run_id=args.run_id,
        started_at=parse_instant(args.started) if args.started else None,
        ended_at=parse_instant(args.ended) if args.ended else None,
        duration=args.duration,
        cost=args.cost,
        notes=args.notes,
    )
    print(f"registered run {record.run_id!r} ({len(record.findings)} findings)")
    return EXIT_OK


def cmd_evaluate(args, config: HarnessConfig) -> int:
    store = GroundTruthStore(config.ground_truth_dir)
    if not store.has_target(args.target):
        raise DataError(
            f"no ground truth for target {args.target!r} "
            f"(expected {store._current_path(args.target)})"
        )
    gts = store.load(args.target)
    registry = RunRegistry(config.data_dir)
    if args.all:
        runs = registry.list_runs(target_id=args.target)
        if not runs:
            raise DataError(f"no registered runs for target {args.target!r}")
    else:
        runs = [registry.get_run(args.run)]
        if runs[0].target_id != args.target:
            raise DataError(
                f"run {args.run!r} belongs to target {runs[0].target_id!r}, not {args.target!r}"
            )

    cache = JudgeCache(config.judge.cache_dir if config.judge.cache_enabled else None)
    results = []
    judge_error_total = 0
    for run in runs:
        result = evaluate_run(
            run, gts, config.judge, cache=cache, bands=config.severity_bands
        )
        path = write_run_report(config.data_dir, result, config.judge)
        results.append(result)
        judge_error_total += len(result.match.errors)
        m = result.metrics
        print(
            f"{run.run_id}: tp={m.tp} fp={m.fp} fn={m.fn} dup={m.dup} "
            f"severity={m.severity_score} cwe={m.cwe_coverage} -> {path}"
        )
        for failure in result.match.errors:
            print(
                f"  judge error: finding {failure.finding_index} x {failure.gt_id}: "
                f"{failure.reason}",
                file=sys.stderr,
            )
    if args.all and results:
        index_path = write_index_report(config.data_dir, args.target, gts.version, results)
        print(f"index -> {index_path}")
    if judge_error_total:
        print(
            f"{judge_error_total} judge errors; affected metrics are contaminated",
            file=sys.stderr,
        )
        return EXIT_JUDGE
    return EXIT_OK


def cmd_cumulate(args, config: HarnessConfig) -> int:
    store = GroundTruthStore(config.ground_truth_dir)
    gts = store.load(args.target)
    registry = RunRegistry(config.data_dir)
    runs = registry.list_runs(setup=args.setup, target_id=args.target)
    if not runs:
        raise DataError(f"no runs for setup {args.setup!r} on target {args.target!r}")
    cache = JudgeCache(config.judge.cache_dir if config.judge.cache_enabled else None)
    result = cumulate(runs, gts, config.judge, cache=cache, bands=config.severity_bands)
    path = write_campaign_report(config.data_dir, result, config.judge, gts.version)
    m = result.metrics
    print(
        f"campaign {args.setup} on {args.target} (k={result.k}): "
        f"tp={m.tp} fp={m.fp} fn={m.fn} dup={m.dup} -> {path}"
    )
    for metric, delta in result.delta_pct.items():
        shown = "undefined" if delta is None else f"{delta:+.2f} pts"
        print(f"  delta {metric}: {shown}")
    return EXIT_OK


def cmd_compare(args, config: HarnessConfig) -> int:
    rows = _counts_rows(config)
    metrics = [m.strip() for m in args.metrics.split(",") if m.strip()]
    comparison = compare_setups(
        rows,
        args.setup_a,
        args.setup_b,
        metrics=metrics,
        aggregation=args.aggregation or config.aggregation,
    )
    print(format_comparison_table(comparison))
    out_dir = config.data_dir / "reports" / "comparisons"
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{args.setup_a}__vs__{args.setup_b}.json"
    path.write_text(render_report(comparison.to_obj()), encoding="utf-8")
    print(f"-> {path}")
    return EXIT_OK


def cmd_select_suite(args, config: HarnessConfig) -> int:
    budget_abs = args.budget_abs
    budget_fraction = None
    if args.budget is not None:
        raw = args.budget.strip().lower()
        if not raw.endswith("x"):
            raise UsageError("--budget must look like '0.4x' (fraction of full-suite cost)")
        budget_fraction = float(raw[:-1])
    if args.history:
        history = load_history_csv(args.history)
    else:
        history = _history_from_reports(config, args.cost_basis)
    selection = select_suite(
        history,
        budget_abs=budget_abs,
        budget_fraction=budget_fraction,
        metric=args.metric,
        aggregation=config.aggregation,
    )
    print(
        f"selected {len(selection.subset)}/{len(history.targets)} targets "
        f"({selection.search} search): {', '.join(selection.subset)}"
    )
    print(
        f"pearson={selection.pearson:.6f} spearman={selection.spearman:.6f} "
        f"cost={selection.total_cost:g} budget={selection.budget:g}"
    )
    out_dir = config.data_dir / "reports"
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "suite_selection.json"
    path.write_text(render_report(selection.to_obj()), encoding="utf-8")
    print(f"-> {path}")
    return EXIT_OK


def cmd_calibrate_judge(args, config: HarnessConfig) -> int:
    store = GroundTruthStore(config.ground_truth_dir)
    gts = store.load(args.target)
    if not args.labels.exists():
        raise DataError(f"labels file not found: {args.labels}")
    labeled = []
    with args.labels.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"{args.labels}:{lineno}: malformed JSON ({exc.msg})")
            ts = obj.get("timestamp")
            finding = Finding(
                index=len(labeled),
                title=str(obj.get("title", "") or ""),
                description=str(obj.get("description", "") or ""),
                steps_to_reproduce=str(obj.get("steps_to_reproduce", "") or ""),
                timestamp=parse_instant(ts) if ts else None,
            )
            labeled.append(
                LabeledFinding(
                    finding=finding,
                    label=str(obj.get("label", "")),
                    gt_id=obj.get("gt_id"),
                )
            )
    cache = JudgeCache(config.judge.cache_dir if config.judge.cache_enabled else None)
    report = calibrate(config.judge, labeled, gts, cache=cache)
    print(json.dumps(report.to_obj(), indent=2))
    agree = report.tp_agree + report.fp_agree
    print(
        f"agreement: {agree}/{report.total} "
        f"(tp_agree={report.tp_agree}, fp_agree={report.fp_agree}, "
        f"dup={report.dup_label_count}, disagreements={len(report.disagreements)})"
    )
    return EXIT_OK


def cmd_serve(args, config: HarnessConfig) -> int:
    import uvicorn

    from .review_api import create_app

    host, _, port = args.listen.rpartition(":")
    app = create_app(config, ui_dir=args.ui_dir)
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return EXIT_OK


REPORT_COLUMNS = (
    "setup", "target_id", "replicate", "run_id", "ground_truth_version",
    "tp", "fp", "fn", "dup", "precision", "recall", "f1", "f0.5",
    "severity_score", "cwe_coverage", "duration", "cost", "judge_errors",
)


def cmd_report(args, config: HarnessConfig) -> int:
    payloads = _collect_run_rows(config)
    payloads.sort(key=lambda p: (p["setup"], p["target_id"], p["replicate"]))
    rows = []
    for payload in payloads:
        m = payload["metrics"]
        rows.append(
            {
                "setup": payload["setup"],
                "target_id": payload["target_id"],
                "replicate": payload["replicate"],
                "run_id": payload["run_id"],
                "ground_truth_version": payload["ground_truth_version"],
                "tp": m["tp"], "fp": m["fp"], "fn": m["fn"], "dup": m["dup"],
                "precision": m["precision"], "recall": m["recall"],
                "f1": m["f1"], "f0.5": m["f0.5"],
                "severity_score": m["severity_score"],
                "cwe_coverage": m["cwe_coverage"],
                "duration": m["duration"], "cost": m["cost"],
                "judge_errors": len(payload.get("judge_errors", [])),
            }
        )
    if args.format == "json":
        text = json.dumps(rows, indent=2, sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
        text = buf.getvalue()
    if args.out:
        args.out.write_text(text, encoding="utf-8")
        print(f"-> {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


_COMMANDS = {
    "init-target": cmd_init_target,
    "register-run": cmd_register_run,
    "evaluate": cmd_evaluate,
    "cumulate": cmd_cumulate,
    "compare": cmd_compare,
    "select-suite": cmd_select_suite,
    "calibrate-judge": cmd_calibrate_judge,
    "serve": cmd_serve,
    "report": cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        config = load_config(args.config, data_dir=args.data_dir)
        return _COMMANDS[args.command](args, config)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except JudgeBackendError as exc:
        print(f"judge error: {exc}", file=sys.stderr)
        return EXIT_JUDGE
    except EthibenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
