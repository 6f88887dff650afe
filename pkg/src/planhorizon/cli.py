"""Command-line entry point: run experiments, summarize traces, inspect runs,
and validate fixture files.

Exit codes: 0 success, 1 runtime failure, 2 config error.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import sys
from pathlib import Path

from . import grounding, harness, kb, mocktools, plans, policies, stats, tasks
from .atomic import load_graph


EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


@dataclasses.dataclass(frozen=True)
class RunManifest:
    config_hash: str
    seed: int
    dataset: str
    planner: str
    policy: str
    robustness: str
    trials: int
    out_dir: str

    def to_json(self) -> dict:
        return dataclasses.asdict(self)


def _config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def _load_config(path: Path, overrides: argparse.Namespace) -> dict:
    config = json.loads(path.read_text(encoding="utf-8"))
    for key in ("seed", "planner", "robustness", "trials"):
        value = getattr(overrides, key, None)
        if value is not None:
            config[key] = value
    config.setdefault("seed", 0)
    config.setdefault("planner", "both")
    config.setdefault("robustness", "high")
    config.setdefault("trials", 3)
    config.setdefault("policy", {"kind": "oracle"})
    if config["planner"] not in ("sh", "fh", "both"):
        raise tasks.DatasetError(f"unknown planner {config['planner']!r}")
    if config["robustness"] not in ("high", "low"):
        raise tasks.DatasetError(f"unknown robustness {config['robustness']!r}")
    if "dataset" not in config:
        raise tasks.DatasetError("config is missing a dataset path")
    return config


def _run_one(dataset, task, planner, policy_spec, robustness, trial, seed, budget):
    env = dataset.make_env(robustness=robustness)
    spec = dict(policy_spec)
    if spec.get("kind") == "noisy":
        spec.setdefault("seed", seed + trial)
    policy = policies.build_policy(spec, task=task, catalog=env.catalog)
    trace = harness.run_task(task, policy, env, planner, budget=budget)
    trace.trial = trial
    trace.run_id = f"{task.id}-{planner}-t{trial}"
    return trace


def _outcome_from_trace(trace, task, planner) -> stats.Outcome:
    graph = plans.build_dag(task.gold_plan)
    label = stats.match_answer(trace.answer or "", task.gold_answer,
                               mode=task.controls.get("match_mode", "exact-set"))
    token_stats = harness.account_tokens(trace)
    return stats.Outcome(
        question_id=task.id,
        trial=trace.trial,
        planner=planner,
        success=1 if label == "correct" else 0,
        depth=plans.depth(graph),
        breadth=float(plans.breadth(graph)),
        dataset=task.dataset,
        last_tool=task.gold_plan.steps[-1].tool,
        has_bridge=bool(task.controls.get("has_bridge", False)),
        has_comparison=bool(task.controls.get("has_comparison", False)),
        tokens_in=token_stats.prompt_tokens,
        tokens_out=token_stats.completion_tokens,
        repeated=plans.detect_repetition(trace)["repeated"],
        label=label,
    )


def cmd_run(args: argparse.Namespace) -> int:
    config_path = Path(args.config)
    try:
        config = _load_config(config_path, args)
        dataset = tasks.load_dataset(config_path.parent / config["dataset"])
    except (OSError, json.JSONDecodeError, tasks.DatasetError, kb.KBError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out_dir = Path(args.out or config.get("out", "runs/latest"))
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(
        config_hash=_config_hash(config),
        seed=config["seed"],
        dataset=str(config["dataset"]),
        planner=config["planner"],
        policy=config["policy"].get("kind", "oracle"),
        robustness=config["robustness"],
        trials=config["trials"],
        out_dir=str(out_dir),
    )
    # manifest goes to disk before any task executes
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest.to_json(), indent=2) + "\n", encoding="utf-8")

    planners = ["sh", "fh"] if config["planner"] == "both" else [config["planner"]]
    budget = harness.Budget()
    jobs = []
    for task in dataset.tasks:
        for planner in planners:
            for trial in range(config["trials"]):
                jobs.append((task, planner, trial))

    part_dir = out_dir / "parts"
    part_dir.mkdir(exist_ok=True)

    def worker(job):
        task, planner, trial = job
        trace = _run_one(dataset, task, planner, config["policy"],
                         config["robustness"], trial, config["seed"], budget)
        part = part_dir / f"{task.id}-{planner}-t{trial}.jsonl"
        with part.open("w", encoding="utf-8") as handle:
            for line in trace.log_lines():
                handle.write(line + "\n")
        return job, trace

    try:
        if args.jobs and args.jobs > 1:
            with concurrent.futures.ThreadPoolExecutor(max_workers=args.jobs) as pool:
                results = list(pool.map(worker, jobs))
        else:
            results = [worker(job) for job in jobs]
    except Exception as exc:  # noqa: BLE001 - surfaced as a runtime failure
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    # merge per-task parts into one deterministic trace log
    results.sort(key=lambda item: (item[0][0].id, item[0][1], item[0][2]))
    with (out_dir / "traces.jsonl").open("w", encoding="utf-8") as handle:
        for (task, planner, trial), _trace in results:
            part = part_dir / f"{task.id}-{planner}-t{trial}.jsonl"
            handle.write(part.read_text(encoding="utf-8"))

    outcomes = [_outcome_from_trace(trace, task, planner)
                for (task, planner, _t), trace in results]
    with (out_dir / "outcomes.jsonl").open("w", encoding="utf-8") as handle:
        for outcome in outcomes:
            handle.write(json.dumps(dataclasses.asdict(outcome), sort_keys=True) + "\n")

    report = stats.summarize_run(outcomes)
    print(report.to_text())
    return EXIT_OK


def cmd_stats(args: argparse.Namespace) -> int:
    run_dir = Path(args.run_dir)
    outcome_path = run_dir / "outcomes.jsonl"
    if not outcome_path.exists():
        print(f"config error: no outcomes.jsonl under {run_dir}", file=sys.stderr)
        return EXIT_CONFIG
    records = [json.loads(line)
               for line in outcome_path.read_text(encoding="utf-8").splitlines()
               if line.strip()]
    if not records:
        print("config error: outcomes.jsonl is empty", file=sys.stderr)
        return EXIT_CONFIG
    outcomes = [stats.Outcome(**record) for record in records]

    report = stats.summarize_run(outcomes)
    out_dir = Path(args.out or run_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.json").write_text(
        json.dumps(report.to_json(), indent=2) + "\n", encoding="utf-8")
    print(report.to_text())

    planners = {o.planner for o in outcomes}
    if planners != {"sh", "fh"}:
        print("GEE skipped: need traces from both planners")
        return EXIT_OK
    controls = tuple(args.controls.split(",")) if args.controls else ()
    try:
        X, y, clusters, names = stats.build_design(outcomes, controls=controls)
        fit = stats.fit_clustered_logit(X, y, clusters, names=names)
    except stats.StatsError as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    rows = fit.table()
    (out_dir / "coefficients.json").write_text(
        json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    print(f"\n{'term':<18}{'coefficient':>12}{'std_err':>10}{'p':>10}")
    for row in rows:
        print(f"{row['name']:<18}{row['coefficient']:>12.4f}"
              f"{row['std_err']:>10.4f}{row['p']:>10.4f} {row['stars']}")
    return EXIT_OK


def cmd_inspect(args: argparse.Namespace) -> int:
    trace_path = Path(args.trace)
    if not trace_path.exists():
        print(f"config error: {trace_path} not found", file=sys.stderr)
        return EXIT_CONFIG
    lines = [json.loads(line)
             for line in trace_path.read_text(encoding="utf-8").splitlines()
             if line.strip()]
    wanted = args.run_id
    shown = 0
    for line in lines:
        if wanted and line.get("run_id") != wanted:
            continue
        print(f"[{line['run_id']}] step {line['step']}: "
              f"{line['tool']}({json.dumps(line['args'], sort_keys=True)}) "
              f"-> {line['outcome_kind']} "
              f"(in={line['tokens_in']}, out={line['tokens_out']})")
        shown += 1
    if shown == 0:
        print("no matching trace lines", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    path = Path(args.path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if "concepts" in raw or "entities" in raw:
            base = kb.load_kb(path)
            print(f"ok: knowledge base with {len(base.entities)} entities, "
                  f"{len(base.concepts)} concepts")
        elif "nodes" in raw:
            graph = load_graph(path)
            print(f"ok: graph with {len(graph.nodes)} nodes, "
                  f"{len(graph.triples)} triples")
        elif "documents" in raw:
            corpus = mocktools.load_corpus(path)
            print(f"ok: corpus with {len(corpus.documents)} documents")
        elif "tasks" in raw:
            dataset = tasks.load_dataset(path)
            print(f"ok: {dataset.engine} dataset with {len(dataset.tasks)} tasks")
        else:
            print("config error: unrecognized fixture shape", file=sys.stderr)
            return EXIT_CONFIG
    except (kb.KBError, tasks.DatasetError, grounding.GroundingError,
            ValueError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="planhorizon",
        description="Run planning-horizon experiments and analyze their traces.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a configured experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--out", default=None)
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--planner", choices=("sh", "fh", "both"), default=None)
    run.add_argument("--robustness", choices=("high", "low"), default=None)
    run.add_argument("--trials", type=int, default=None)
    run.add_argument("--jobs", type=int, default=1)
    run.set_defaults(func=cmd_run)

    st = sub.add_parser("stats", help="summarize a finished run")
    st.add_argument("run_dir")
    st.add_argument("--out", default=None)
    st.add_argument("--controls", default="",
                    help="comma-separated control columns (dataset, last_tool, "
                         "has_bridge, has_comparison)")
    st.set_defaults(func=cmd_stats)

    insp = sub.add_parser("inspect", help="pretty-print one trace")
    insp.add_argument("trace")
    insp.add_argument("--run-id", dest="run_id", default=None)
    insp.set_defaults(func=cmd_inspect)

    val = sub.add_parser("validate", help="lint a KB/graph/corpus/dataset file")
    val.add_argument("path")
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
