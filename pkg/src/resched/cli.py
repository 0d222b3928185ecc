"""Command-line harness: instance generation, training runs, greedy repair.

Exit codes: 0 success, 1 usage or configuration error, 2 data or
infeasibility error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .episodes import (
    RepairGoal,
    aggregate_curves_csv,
    curve_to_csv,
    repair,
    sample_scenario,
    train,
)
from .learning import LearnerConfig, RuleTable
from .model import (
    StructuralError,
    compute_metrics,
    schedule_from_dict,
    save_schedule,
)
from .operators import save_trace
from .plant import (
    ConfigError,
    InfeasibleOrderError,
    Order,
    PRESETS,
    config_from_dict,
    config_to_dict,
    generate_plant,
    inject_new_order,
    order_from_dict,
    orders_to_dict,
    plant_to_dict,
    preset,
    save_json,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2

GOAL_ALIASES = {
    "tardiness": "tardiness_improvement",
    "tardiness_improvement": "tardiness_improvement",
    "stability": "stability",
    "balancing": "balancing",
}


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors by default; the contract here is 1.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _load_json_file(path: str) -> dict:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_DATA) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(
            f"parse error in {path} at line {exc.lineno} column {exc.colno}: {exc.msg}",
            EXIT_DATA,
        ) from exc


def _plant_config(args):
    if args.config:
        doc = _load_json_file(args.config)
        try:
            cfg = config_from_dict(doc)
        except (TypeError, ConfigError, ValueError) as exc:
            raise CliError(f"invalid plant config {args.config}: {exc}", EXIT_USAGE) from exc
    else:
        try:
            cfg = preset(args.preset)
        except ConfigError as exc:
            raise CliError(str(exc), EXIT_USAGE) from exc
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise CliError(f"output directory {path} is not writable: {exc}", EXIT_USAGE) from exc
    return out


def _goal(args, abs_tard_limit: float | None = None) -> RepairGoal:
    kind = GOAL_ALIASES[args.goal]
    return RepairGoal.named(kind, abs_tard_limit=abs_tard_limit)


def cmd_gen(args) -> int:
    cfg = _plant_config(args)
    out = _out_dir(args.out)
    scenario = sample_scenario(cfg, cfg.seed)
    plant = generate_plant(cfg)
    save_json(plant_to_dict(plant), out / "plant.json")
    save_json(config_to_dict(cfg), out / "plant_config.json")
    orders = [
        _task_as_order(scenario.baseline, tid)
        for tid in sorted(scenario.baseline.tasks)
    ]
    save_json(orders_to_dict(orders), out / "orders.json")
    save_schedule(scenario.baseline, out / "schedule.json")
    new_id = next(iter(set(scenario.disrupted.tasks) - set(scenario.baseline.tasks)))
    save_json(_order_dict_for_task(scenario.disrupted, new_id), out / "new_order.json")
    metrics = compute_metrics(scenario.baseline)
    print(f"wrote plant/orders/schedule/new_order to {out}")
    print(f"initial schedule: {metrics.task_count} tasks on {metrics.resource_count} "
          f"resources, total tardiness {metrics.total_tardiness:.2f} h, "
          f"{metrics.exceeded_tasks} exceeded, total WIP {metrics.total_wip:.2f} h")
    return EXIT_OK


def _task_as_order(schedule, tid) -> Order:
    t = schedule.tasks[tid]
    return Order(id=t.id, product=t.product, quantity=t.quantity,
                 due_date=t.due_date, arrival_index=t.id - 1)


def _order_dict_for_task(schedule, tid) -> dict:
    t = schedule.tasks[tid]
    return {"id": t.id, "product": t.product, "quantity": t.quantity,
            "due": t.due_date, "arrival_index": tid - 1}


def _learner_config(args) -> LearnerConfig:
    try:
        return LearnerConfig(
            alpha=args.alpha, gamma=args.gamma, lambda_=args.lambda_,
            epsilon=args.epsilon, n_buckets=args.buckets,
        ).validated()
    except ValueError as exc:
        raise CliError(f"invalid learner config: {exc}", EXIT_USAGE) from exc


def cmd_train(args) -> int:
    cfg = _plant_config(args)
    learner = _learner_config(args)
    goal = _goal(args)
    out = _out_dir(args.out)
    try:
        seeds = [int(s) for s in args.seeds.split(",") if s != ""]
    except ValueError:
        raise CliError(f"bad --seeds value {args.seeds!r}; expected a,b,c", EXIT_USAGE)
    if not seeds:
        raise CliError("--seeds must name at least one seed", EXIT_USAGE)
    if args.episodes < 1:
        raise CliError("--episodes must be >= 1", EXIT_USAGE)

    curves = []
    try:
        for seed in seeds:
            table, curve = train(
                cfg, goal, args.episodes, learner_config=learner,
                max_steps=args.max_steps, seed=seed,
            )
            curves.append(curve)
            (out / f"curve_seed{seed}.csv").write_text(curve_to_csv(curve))
            table.save(out / f"policy_seed{seed}.json", learner)
            if seed == seeds[0]:
                table.save(out / "policy.json", learner)
    except (InfeasibleOrderError, StructuralError) as exc:
        raise CliError(str(exc), EXIT_DATA) from exc
    (out / "aggregate.csv").write_text(aggregate_curves_csv(curves))
    last = curves[-1]
    print(f"trained {len(seeds)} seed(s) x {args.episodes} episodes "
          f"(goal {goal.kind}); policy written to {out / 'policy.json'}")
    tail = last[-min(50, len(last)):]
    print(f"seed {seeds[-1]}: mean steps last {len(tail)} episodes "
          f"{sum(r.steps for r in tail) / len(tail):.1f}, "
          f"rules total {last[-1].rules_total}")
    return EXIT_OK


def cmd_repair(args) -> int:
    out = _out_dir(args.out)
    try:
        schedule = load_schedule(args.schedule)
    except StructuralError as exc:
        raise CliError(f"invalid schedule {args.schedule}: {exc}", EXIT_DATA)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CliError):
            raise
        raise CliError(f"invalid schedule {args.schedule}: {exc}", EXIT_DATA)
    order_doc = _load_json_file(args.order)
    try:
        order = order_from_dict(order_doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"invalid order {args.order}: {exc}", EXIT_DATA)
    policy_doc = _load_json_file(args.policy)
    try:
        table, learner = RuleTable.from_dict(policy_doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"invalid policy {args.policy}: {exc}", EXIT_DATA)
    if args.buckets is not None and args.buckets != learner.n_buckets:
        raise CliError(
            f"config mismatch: policy was trained with {learner.n_buckets} buckets, "
            f"--buckets asks for {args.buckets}",
            EXIT_USAGE,
        )

    initial = compute_metrics(schedule)
    try:
        disrupted, post = inject_new_order(schedule, order)
    except InfeasibleOrderError as exc:
        raise CliError(str(exc), EXIT_DATA) from exc
    goal = _goal(args, abs_tard_limit=initial.total_tardiness)
    result = repair(disrupted, schedule, goal, table,
                    max_steps=args.max_steps, config=learner)
    repaired = result.final_metrics

    save_schedule(result.final_schedule, out / "repaired_schedule.json")
    save_trace(result.operator_trace, out / "repair_trace.jsonl")
    report = _report(initial, post, repaired, result.steps, result.reached_goal)
    save_json(report, out / "repair_report.json")
    _print_report(report)
    return EXIT_OK


def _report(initial, post, repaired, steps: int, reached: bool) -> dict:
    def reduction(from_value: float, to_value: float) -> float:
        return (from_value - to_value) / from_value if from_value > 0 else 0.0

    return {
        "columns": ["initial", "post_insertion", "repaired"],
        "total_tardiness_h": [initial.total_tardiness, post.total_tardiness,
                              repaired.total_tardiness],
        "exceeded_tasks": [initial.exceeded_tasks, post.exceeded_tasks,
                           repaired.exceeded_tasks],
        "avg_tardiness_h_per_task": [initial.avg_tardiness, post.avg_tardiness,
                                     repaired.avg_tardiness],
        "total_wip_h": [initial.total_wip, post.total_wip, repaired.total_wip],
        "reduction_vs_post_insertion": reduction(post.total_tardiness,
                                                 repaired.total_tardiness),
        "reduction_vs_initial": reduction(initial.total_tardiness,
                                          repaired.total_tardiness),
        "steps": steps,
        "reached_goal": reached,
    }


def _print_report(report: dict) -> None:
    rows = [
        ("total tardiness (h)", "total_tardiness_h", "{:.2f}"),
        ("exceeded tasks (#)", "exceeded_tasks", "{:d}"),
        ("avg tardiness (h/t)", "avg_tardiness_h_per_task", "{:.2f}"),
        ("total WIP (h)", "total_wip_h", "{:.2f}"),
    ]
    header = f"{'metric':<22}{'initial':>12}{'post-insert':>14}{'repaired':>12}"
    print(header)
    for label, key, fmt in rows:
        a, b, c = report[key]
        print(f"{label:<22}{fmt.format(a):>12}{fmt.format(b):>14}{fmt.format(c):>12}")
    print(f"reduction vs post-insertion: {100 * report['reduction_vs_post_insertion']:.1f}%")
    print(f"reduction vs initial:        {100 * report['reduction_vs_initial']:.1f}%")
    print(f"operators applied: {report['steps']} (goal reached: {report['reached_goal']})")


def build_parser() -> _Parser:
    parser = _Parser(prog="resched",
                     description="Schedule-repair learning engine")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a plant, order set, and FIFO schedule")
    gen.add_argument("--preset", default="desk",
                     help=f"instance preset ({', '.join(sorted(PRESETS))})")
    gen.add_argument("--config", default=None, help="plant config JSON (overrides --preset)")
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen)

    tr = sub.add_parser("train", help="train a repair policy")
    tr.add_argument("--preset", default="desk")
    tr.add_argument("--config", default=None)
    tr.add_argument("--goal", choices=sorted(GOAL_ALIASES), default="tardiness")
    tr.add_argument("--episodes", type=int, default=300)
    tr.add_argument("--alpha", type=float, default=0.1)
    tr.add_argument("--gamma", type=float, default=0.9)
    tr.add_argument("--lambda", dest="lambda_", type=float, default=0.1)
    tr.add_argument("--epsilon", type=float, default=0.1)
    tr.add_argument("--buckets", type=int, default=5)
    tr.add_argument("--max-steps", type=int, default=200)
    tr.add_argument("--seeds", default="0")
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=cmd_train)

    rp = sub.add_parser("repair", help="repair a disrupted schedule with a trained policy")
    rp.add_argument("--schedule", required=True)
    rp.add_argument("--order", required=True)
    rp.add_argument("--policy", required=True)
    rp.add_argument("--goal", choices=sorted(GOAL_ALIASES), default="tardiness")
    rp.add_argument("--buckets", type=int, default=None)
    rp.add_argument("--max-steps", type=int, default=200)
    rp.add_argument("--out", required=True)
    rp.set_defaults(func=cmd_repair)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"resched: error: {exc}", file=sys.stderr)
        return exc.code
    except ConfigError as exc:
        print(f"resched: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
