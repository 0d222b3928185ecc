"""State abstraction and tabular preference learning.

A schedule state is abstracted into five discretized ratio features. Each
(feature, bucket, operator kind) triple is a *rule* holding one scalar
preference; the value of applying an operator kind in a state is the sum of
the five matching rule values. Rules are created lazily at zero the first
time they are read. Credit assignment is SARSA(lambda) with replacing
eligibility traces; the per-decision value is split equally across the five
contributing rules by setting each fired trace to 1/5, so a single update
moves the combined value by exactly alpha * delta.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, asdict
from pathlib import Path
from typing import NamedTuple, Sequence

from .model import ScheduleMetrics
from .operators import OperatorInstance, OperatorKind

log = logging.getLogger(__name__)

#: The five state features, in canonical order.
FEATURES = (
    "tard_vs_init",   # total tardiness relative to the disruption baseline
    "avg_vs_max",     # average tardiness relative to the worst task
    "tard_vs_wip",    # total tardiness relative to total work content
    "focal_share",    # focal task's share of total tardiness
    "aux_share",      # auxiliary task's share of total tardiness
)


class FeatureVector(NamedTuple):
    tard_vs_init: int
    avg_vs_max: int
    tard_vs_wip: int
    focal_share: int
    aux_share: int


#: (feature name, bucket, operator kind name)
RuleKey = tuple[str, int, str]


@dataclass
class LearnerConfig:
    alpha: float = 0.1
    gamma: float = 0.9
    lambda_: float = 0.1
    epsilon: float = 0.1
    n_buckets: int = 5
    trace_floor: float = 1e-4
    # Reward in raw hours instead of the default init-tardiness-normalized form.
    raw_reward: bool = False

    def validated(self) -> "LearnerConfig":
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must be in [0, 1]")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ValueError("lambda must be in [0, 1]")
        if self.n_buckets < 1:
            raise ValueError("n_buckets must be >= 1")
        if self.trace_floor < 0:
            raise ValueError("trace_floor must be >= 0")
        return self


def bucket(ratio: float, n_buckets: int = 5) -> int:
    """Discretize a ratio into an integer scale 1..n_buckets.

    The ratio is clamped to [0, 1] first; bucket = floor(ratio * n) + 1,
    capped at n. A non-finite ratio is treated as the worst case (bucket n).
    """
    if not math.isfinite(ratio):
        log.warning("non-finite ratio %r mapped to worst bucket %d", ratio, n_buckets)
        return n_buckets
    clamped = min(1.0, max(0.0, ratio))
    return min(n_buckets, int(clamped * n_buckets) + 1)


def abstract_features(metrics: ScheduleMetrics, focal_tardiness: float,
                      aux_tardiness: float, n_buckets: int = 5) -> FeatureVector:
    """Abstract a schedule state (plus one candidate operator's task pair).

    Ratios with a zero denominator are taken as 0, so an all-slack state maps
    to the lowest bucket everywhere.
    """
    def ratio(num: float, den: float) -> float:
        return num / den if den > 0.0 else 0.0

    return FeatureVector(
        tard_vs_init=bucket(ratio(metrics.total_tardiness, metrics.init_tardiness), n_buckets),
        avg_vs_max=bucket(ratio(metrics.avg_tardiness, metrics.max_tardiness), n_buckets),
        tard_vs_wip=bucket(ratio(metrics.total_tardiness, metrics.total_wip), n_buckets),
        focal_share=bucket(ratio(focal_tardiness, metrics.total_tardiness), n_buckets),
        aux_share=bucket(ratio(aux_tardiness, metrics.total_tardiness), n_buckets),
    )


def rule_keys(features: FeatureVector, kind: OperatorKind) -> tuple[RuleKey, ...]:
    """The five rule keys contributing to one (state, operator kind) value."""
    name = kind.name
    return tuple((feat, b, name) for feat, b in zip(FEATURES, features))


class RuleTable:
    """Lazily instantiated preference rules: RuleKey -> value."""

    def __init__(self) -> None:
        self.values: dict[RuleKey, float] = {}
        self.created_count = 0

    def ensure(self, key: RuleKey) -> float:
        if key not in self.values:
            self.values[key] = 0.0
            self.created_count += 1
        return self.values[key]

    def q_value(self, features: FeatureVector, kind: OperatorKind,
                create: bool = True) -> float:
        """Sum of the five per-feature rule values for this operator kind.

        With ``create`` set, missing rules are instantiated at 0 and counted;
        a read-only policy (greedy repair) passes ``create=False``.
        """
        if create:
            return sum(self.ensure(k) for k in rule_keys(features, kind))
        return sum(self.values.get(k, 0.0) for k in rule_keys(features, kind))

    def to_dict(self, config: LearnerConfig) -> dict:
        cfg = asdict(config)
        cfg["lambda"] = cfg.pop("lambda_")
        return {
            "config": cfg,
            "created_count": self.created_count,
            "values": {
                f"{feat}:{b}:{kind}": v
                for (feat, b, kind), v in sorted(self.values.items())
            },
        }

    @classmethod
    def from_dict(cls, doc: dict) -> tuple["RuleTable", LearnerConfig]:
        table = cls()
        for key, value in doc["values"].items():
            feat, b, kind = key.split(":")
            table.values[(feat, int(b), kind)] = float(value)
        table.created_count = int(doc.get("created_count", len(table.values)))
        cfg = dict(doc["config"])
        if "lambda" in cfg:
            cfg["lambda_"] = cfg.pop("lambda")
        config = LearnerConfig(**cfg).validated()
        return table, config

    def save(self, path: str | Path, config: LearnerConfig) -> None:
        Path(path).write_text(json.dumps(self.to_dict(config), indent=2, sort_keys=True))

    @classmethod
    def load(cls, path: str | Path) -> tuple["RuleTable", LearnerConfig]:
        return cls.from_dict(json.loads(Path(path).read_text()))


class TraceSet:
    """Eligibility traces per rule, with replacing semantics and floor pruning."""

    def __init__(self, trace_floor: float = 1e-4) -> None:
        self.traces: dict[RuleKey, float] = {}
        self.trace_floor = trace_floor

    def mark_fired(self, features: FeatureVector, kind: OperatorKind) -> None:
        """Set each contributing rule's trace to 1/5 (replace, never accumulate).

        The equal split over the five contributing rules is folded into the
        trace value, so the freshly fired group's traces sum to 1.
        """
        keys = rule_keys(features, kind)
        share = 1.0 / len(keys)
        for key in keys:
            self.traces[key] = share

    def decay(self, factor: float) -> None:
        decayed = {}
        for key, e in self.traces.items():
            e *= factor
            if e >= self.trace_floor:
                decayed[key] = e
        self.traces = decayed


def td_update(table: RuleTable, traces: TraceSet, q_sa: float, reward: float,
              q_s2a2: float, config: LearnerConfig) -> float:
    """One on-policy temporal-difference update over all traced rules.

    delta = reward + gamma * q(s', a') - q(s, a); every traced rule moves by
    alpha * delta * trace. Returns alpha * delta, the total change applied to
    a freshly fired rule group (whose traces sum to 1). Afterwards all traces
    decay by gamma * lambda and sub-floor entries are pruned. Pass
    ``q_s2a2=0`` on the terminal step.
    """
    delta = reward + config.gamma * q_s2a2 - q_sa
    step = config.alpha * delta
    for key, e in traces.traces.items():
        table.values[key] = table.values.get(key, 0.0) + step * e
    traces.decay(config.gamma * config.lambda_)
    return step


class ScoredProposal(NamedTuple):
    op: OperatorInstance
    features: FeatureVector
    q: float


def select_operator(table: RuleTable, proposals: Sequence[tuple[OperatorInstance, FeatureVector]],
                    epsilon: float, rng: random.Random,
                    create: bool = True) -> ScoredProposal:
    """Epsilon-greedy choice over proposals, ties broken uniformly at random.

    Every proposal is evaluated (instantiating rules when ``create``), so rule
    growth tracks the operators considered, not only the ones applied.
    """
    if not proposals:
        raise ValueError("cannot select from an empty proposal list")
    scored = [
        ScoredProposal(op, features, table.q_value(features, op.kind, create=create))
        for op, features in proposals
    ]
    if epsilon > 0.0 and rng.random() < epsilon:
        return scored[rng.randrange(len(scored))]
    best = max(s.q for s in scored)
    ties = [s for s in scored if s.q == best]
    if len(ties) == 1:
        return ties[0]
    return ties[rng.randrange(len(ties))]
