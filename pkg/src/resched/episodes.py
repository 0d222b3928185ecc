"""The phased repair decision cycle.

Each step runs four phases: Input (adopt the current schedule), Elaboration
(recompute metrics and derived ratios), Proposal-Evaluation (enumerate
applicable operators and pick one epsilon-greedily), and Application (apply
the operator, observe the reward, and chain the temporal-difference update
into the next selection). An episode ends when the repair goal is reached,
no operator can be proposed (the schedule is accepted as irreparable), or
the step cap is hit.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .learning import (
    FeatureVector,
    LearnerConfig,
    RuleTable,
    TraceSet,
    abstract_features,
    select_operator,
    td_update,
)
from .model import (
    Schedule,
    ScheduleMetrics,
    compute_metrics,
    tardiness_by_task,
)
from .operators import OperatorInstance, apply, propose
from .plant import (
    Plant,
    PlantConfig,
    disruption_order,
    fifo_schedule,
    generate_orders,
    generate_plant,
    inject_new_order,
)

GOAL_KINDS = ("tardiness_improvement", "stability", "balancing")

#: Per-goal default (tardiness threshold, stability threshold).
GOAL_DEFAULTS = {
    "tardiness_improvement": (0.95, 1.0),
    "stability": (1.0, 0.2),
    "balancing": (0.975, 0.5),
}


@dataclass
class RepairGoal:
    """Terminal predicate of a repair episode.

    ``tard_threshold`` is a fraction of the disruption baseline tardiness;
    ``stability_threshold`` bounds the fraction of tasks whose (resource,
    position) differs from the pre-disruption schedule; ``abs_tard_limit``
    optionally adds an absolute tardiness bound in hours. All bindings are
    conjunctive.
    """

    kind: str = "tardiness_improvement"
    tard_threshold: float = 0.95
    stability_threshold: float = 1.0
    abs_tard_limit: float | None = None

    @classmethod
    def named(cls, kind: str, abs_tard_limit: float | None = None) -> "RepairGoal":
        if kind not in GOAL_DEFAULTS:
            raise ValueError(f"unknown goal kind {kind!r}; one of {GOAL_KINDS}")
        tard, stab = GOAL_DEFAULTS[kind]
        return cls(kind=kind, tard_threshold=tard, stability_threshold=stab,
                   abs_tard_limit=abs_tard_limit)

    def validated(self) -> "RepairGoal":
        if not 0.0 <= self.tard_threshold <= 1.0:
            raise ValueError("tard_threshold must be in [0, 1]")
        if not 0.0 <= self.stability_threshold <= 1.0:
            raise ValueError("stability_threshold must be in [0, 1]")
        return self


def placements(schedule: Schedule) -> dict[int, tuple[int, int]]:
    """(resource, position) of every task, for displacement comparisons."""
    out: dict[int, tuple[int, int]] = {}
    for resource in schedule.resources:
        for idx, tid in enumerate(resource.sequence):
            out[tid] = (resource.id, idx)
    return out


def displaced_fraction(baseline: Schedule, current: Schedule) -> float:
    """Fraction of current tasks sitting elsewhere than in the baseline.

    Tasks absent from the baseline (the injected order) never count as
    displaced; the denominator is the current task count.
    """
    if not current.tasks:
        return 0.0
    base = placements(baseline)
    cur = placements(current)
    moved = sum(
        1 for tid, where in cur.items()
        if tid in base and base[tid] != where
    )
    return moved / len(current.tasks)


def goal_reached(goal: RepairGoal, metrics: ScheduleMetrics,
                 baseline: Schedule, current: Schedule) -> bool:
    if metrics.total_tardiness > goal.tard_threshold * metrics.init_tardiness:
        return False
    if goal.abs_tard_limit is not None and metrics.total_tardiness > goal.abs_tard_limit:
        return False
    return displaced_fraction(baseline, current) <= goal.stability_threshold


def reward(metrics_before: ScheduleMetrics, metrics_after: ScheduleMetrics,
           init_tardiness: float, raw: bool = False) -> float:
    """Tardiness decrease of one operator application.

    Normalized by the disruption baseline so reward magnitudes are comparable
    across instances; falls back to raw hours when the baseline is zero (or
    when raw-hours mode is requested).
    """
    diff = metrics_before.total_tardiness - metrics_after.total_tardiness
    if raw or init_tardiness <= 0.0:
        return diff
    return diff / init_tardiness


@dataclass
class EpisodeResult:
    steps: int
    reached_goal: bool
    final_metrics: ScheduleMetrics
    rules_created_total: int
    operator_trace: list[tuple[OperatorInstance, float]]
    total_reward: float
    final_schedule: Schedule


def run_episode(schedule_post_disruption: Schedule, baseline: Schedule,
                goal: RepairGoal, table: RuleTable, config: LearnerConfig,
                max_steps: int, rng: random.Random, *, learn: bool = True,
                epsilon: float | None = None, k_focal: int = 5,
                k_aux: int = 3) -> EpisodeResult:
    """Run one repair episode; the baseline tardiness is captured at entry.

    With ``learn`` disabled no rule is created or updated (greedy execution
    of a frozen policy). The SARSA update for each transition fires when the
    next operator is selected; the terminal update bootstraps from zero.
    """
    eps = epsilon if epsilon is not None else (config.epsilon if learn else 0.0)
    schedule = schedule_post_disruption
    init = compute_metrics(schedule).total_tardiness
    metrics = compute_metrics(schedule, init)
    traces = TraceSet(config.trace_floor)
    pending: tuple[float, float] | None = None  # (q of fired op, its reward)
    trace_records: list[tuple[OperatorInstance, float]] = []
    total_reward = 0.0
    steps = 0
    reached = False

    while True:
        if goal_reached(goal, metrics, baseline, schedule):
            reached = True
            break
        if steps >= max_steps:
            break
        proposals = propose(schedule, k_focal=k_focal, k_aux=k_aux)
        if not proposals:
            break
        tardiness = tardiness_by_task(schedule)
        pairs: list[tuple[OperatorInstance, FeatureVector]] = [
            (
                op,
                abstract_features(metrics, tardiness[op.focal],
                                  tardiness[op.auxiliary], config.n_buckets),
            )
            for op in proposals
        ]
        chosen = select_operator(table, pairs, eps, rng, create=learn)
        if learn and pending is not None:
            td_update(table, traces, pending[0], pending[1], chosen.q, config)
        schedule = apply(schedule, chosen.op)
        after = compute_metrics(schedule, init)
        r = reward(metrics, after, init, raw=config.raw_reward)
        total_reward += r
        if learn:
            traces.mark_fired(chosen.features, chosen.op.kind)
        pending = (chosen.q, r)
        trace_records.append((chosen.op, after.total_tardiness))
        metrics = after
        steps += 1

    if learn and pending is not None:
        td_update(table, traces, pending[0], pending[1], 0.0, config)

    return EpisodeResult(
        steps=steps,
        reached_goal=reached,
        final_metrics=metrics,
        rules_created_total=table.created_count,
        operator_trace=trace_records,
        total_reward=total_reward,
        final_schedule=schedule,
    )


@dataclass
class Scenario:
    """A disrupted instance: the pre-disruption schedule, the schedule with
    the new order inserted, and the metrics captured at disruption time."""

    baseline: Schedule
    disrupted: Schedule
    metrics: ScheduleMetrics


def sample_scenario(plant_config: PlantConfig, seed: int,
                    plant: Plant | None = None) -> Scenario:
    """Generate a seeded disrupted instance for the given plant config."""
    plant = plant if plant is not None else generate_plant(plant_config)
    rng = random.Random(seed)
    orders = generate_orders(
        plant, plant_config.n_orders, seed=rng.getrandbits(64),
        tightness=plant_config.due_date_tightness, qty_range=plant_config.qty_range,
    )
    base = fifo_schedule(plant, orders)
    order = disruption_order(plant, base, random.Random(rng.getrandbits(64)), plant_config)
    disrupted, metrics = inject_new_order(base, order)
    return Scenario(baseline=base, disrupted=disrupted, metrics=metrics)


@dataclass
class EpisodeRecord:
    episode: int
    steps: int
    reached_goal: bool
    rules_total: int
    final_tottard: float
    total_reward: float
    init_tardiness: float


TrainingCurve = list[EpisodeRecord]

CURVE_CSV_HEADER = "episode,steps,reached_goal,rules_total,final_tottard"


def train(plant_config: PlantConfig, goal: RepairGoal, n_episodes: int,
          learner_config: LearnerConfig | None = None, max_steps: int = 200,
          seed: int = 0, *, k_focal: int = 5, k_aux: int = 3,
          fixed_disruption: bool = False) -> tuple[RuleTable, TrainingCurve]:
    """Train a rule table over seeded disruption episodes.

    The plant and base schedule are fixed for the run; every episode injects
    a freshly sampled new order (unless ``fixed_disruption`` is set, which
    replays one disruption for debugging). Fully deterministic per seed.
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    config = (learner_config or LearnerConfig()).validated()
    goal.validated()
    plant = generate_plant(plant_config)
    master = random.Random(seed)
    orders = generate_orders(
        plant, plant_config.n_orders, seed=master.getrandbits(64),
        tightness=plant_config.due_date_tightness, qty_range=plant_config.qty_range,
    )
    base = fifo_schedule(plant, orders)
    table = RuleTable()
    curve: TrainingCurve = []
    fixed_order = None
    if fixed_disruption:
        fixed_order = disruption_order(
            plant, base, random.Random(master.getrandbits(64)), plant_config
        )
    for ep in range(n_episodes):
        order_seed = master.getrandbits(64)
        policy_seed = master.getrandbits(64)
        order = fixed_order if fixed_order is not None else disruption_order(
            plant, base, random.Random(order_seed), plant_config
        )
        disrupted, _ = inject_new_order(base, order)
        result = run_episode(
            disrupted, base, goal, table, config, max_steps,
            random.Random(policy_seed), k_focal=k_focal, k_aux=k_aux,
        )
        curve.append(EpisodeRecord(
            episode=ep,
            steps=result.steps,
            reached_goal=result.reached_goal,
            rules_total=table.created_count,
            final_tottard=result.final_metrics.total_tardiness,
            total_reward=result.total_reward,
            init_tardiness=result.final_metrics.init_tardiness,
        ))
    return table, curve


def repair(schedule_post_disruption: Schedule, baseline: Schedule,
           goal: RepairGoal, table: RuleTable, max_steps: int = 200, *,
           config: LearnerConfig | None = None, k_focal: int = 5,
           k_aux: int = 3) -> EpisodeResult:
    """Greedy policy-driven repair: epsilon = 0, learning disabled.

    The rule table is read-only here; ties in the argmax are broken by a
    fixed-seed generator so repeated repairs are byte-identical.
    """
    cfg = (config or LearnerConfig()).validated()
    return run_episode(
        schedule_post_disruption, baseline, goal, table, cfg, max_steps,
        random.Random(0), learn=False, epsilon=0.0, k_focal=k_focal, k_aux=k_aux,
    )


def curve_to_csv(curve: TrainingCurve) -> str:
    lines = [CURVE_CSV_HEADER]
    for rec in curve:
        lines.append(
            f"{rec.episode},{rec.steps},{int(rec.reached_goal)},"
            f"{rec.rules_total},{rec.final_tottard!r}"
        )
    return "\n".join(lines) + "\n"


def aggregate_curves_csv(curves: list[TrainingCurve]) -> str:
    """Mean per-episode steps across seeds plus the accumulated average
    (running mean over episodes), mean rule counts, and goal rate."""
    if not curves:
        return "episode,mean_steps,acc_avg_steps,mean_rules_total,goal_rate\n"
    n_episodes = min(len(c) for c in curves)
    lines = ["episode,mean_steps,acc_avg_steps,mean_rules_total,goal_rate"]
    running = 0.0
    for ep in range(n_episodes):
        mean_steps = sum(c[ep].steps for c in curves) / len(curves)
        running += mean_steps
        acc = running / (ep + 1)
        mean_rules = sum(c[ep].rules_total for c in curves) / len(curves)
        goal_rate = sum(c[ep].reached_goal for c in curves) / len(curves)
        lines.append(f"{ep},{mean_steps!r},{acc!r},{mean_rules!r},{goal_rate!r}")
    return "\n".join(lines) + "\n"
