"""Relational schedule data model: resources holding ordered task sequences,
derived timing, tardiness metrics, and structural validation.

Times are real hours from a zero origin. Timing (start/finish/placement) is
always derived by :func:`recompute_timing`; it is never trusted from files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable


class ProductKind(str, Enum):
    LATEX = "latex"
    ALKYD = "alkyd"


@dataclass(frozen=True)
class ProductClass:
    """A product type; resources declare which product ids they can process."""

    id: int
    kind: ProductKind


@dataclass
class Task:
    id: int
    name: str
    product: int
    quantity: float
    due_date: float
    # Derived placement/timing, filled in by recompute_timing.
    start: float | None = None
    finish: float | None = None
    resource: int | None = None
    seq_index: int | None = None

    @property
    def duration(self) -> float:
        if self.start is None or self.finish is None:
            raise ValueError(f"task {self.id} has no derived timing")
        return self.finish - self.start


@dataclass
class Resource:
    """A single processing unit with a total-ordered id and an ordered task sequence."""

    id: int
    name: str
    capabilities: set[int]
    processing_rate: float
    sequence: list[int] = field(default_factory=list)

    def can_process(self, product: int) -> bool:
        return product in self.capabilities

    def availability(self, tasks: dict[int, Task]) -> float:
        """Finish time of the last task in the sequence (0 for an empty resource)."""
        if not self.sequence:
            return 0.0
        last = tasks[self.sequence[-1]]
        if last.finish is None:
            raise ValueError(f"resource {self.id} has stale timing")
        return last.finish


@dataclass
class Schedule:
    resources: list[Resource]
    tasks: dict[int, Task]
    horizon_origin: float = 0.0

    def resource_by_id(self, rid: int) -> Resource:
        for r in self.resources:
            if r.id == rid:
                return r
        raise KeyError(f"unknown resource id {rid}")

    def clone(self) -> "Schedule":
        """Independent copy: mutating the copy never affects the original."""
        return Schedule(
            resources=[
                Resource(r.id, r.name, set(r.capabilities), r.processing_rate, list(r.sequence))
                for r in self.resources
            ],
            tasks={tid: replace(t) for tid, t in self.tasks.items()},
            horizon_origin=self.horizon_origin,
        )


@dataclass
class ScheduleMetrics:
    """Global schedule attributes driving features, rewards, and repair goals."""

    total_tardiness: float
    avg_tardiness: float
    max_tardiness: float
    total_wip: float
    task_count: int
    resource_count: int
    init_tardiness: float
    exceeded_tasks: int
    per_resource_tardiness: dict[int, float]


@dataclass(frozen=True)
class Violation:
    rule: str
    entities: tuple
    message: str

    def __str__(self) -> str:
        return f"{self.rule}{self.entities}: {self.message}"


class StructuralError(ValueError):
    """A schedule breaks a structural invariant (placement or capability)."""


def recompute_timing(schedule: Schedule) -> Schedule:
    """Left-compact every resource sequence and refresh derived task fields.

    The first task on a resource starts at the horizon origin; each following
    task starts when its predecessor finishes. Idempotent. Mutates and returns
    the given schedule.
    """
    placed: set[int] = set()
    for resource in schedule.resources:
        clock = schedule.horizon_origin
        for idx, tid in enumerate(resource.sequence):
            task = schedule.tasks.get(tid)
            if task is None:
                raise StructuralError(
                    f"resource {resource.id} references unknown task {tid}"
                )
            if not resource.can_process(task.product):
                raise StructuralError(
                    f"task {task.id} (product {task.product}) placed on resource "
                    f"{resource.id} which cannot process it"
                )
            task.start = clock
            task.finish = clock + task.quantity / resource.processing_rate
            task.resource = resource.id
            task.seq_index = idx
            clock = task.finish
            placed.add(tid)
    unplaced = set(schedule.tasks) - placed
    if unplaced:
        raise StructuralError(f"tasks not placed on any resource: {sorted(unplaced)}")
    return schedule


def task_tardiness(task: Task) -> float:
    """Lateness of one task: max(0, finish - due date)."""
    if task.finish is None:
        raise ValueError(f"task {task.id} has no derived timing")
    return max(0.0, task.finish - task.due_date)


def compute_metrics(schedule: Schedule, init_tardiness: float = 0.0) -> ScheduleMetrics:
    """Aggregate tardiness and work-content metrics over a timed schedule.

    ``init_tardiness`` is passed through unchanged: it is the baseline captured
    when the disruption occurred, not a property of the current state.
    """
    total = 0.0
    worst = 0.0
    wip = 0.0
    exceeded = 0
    per_resource: dict[int, float] = {}
    for resource in schedule.resources:
        acc = 0.0
        for tid in resource.sequence:
            task = schedule.tasks[tid]
            tard = task_tardiness(task)
            total += tard
            acc += tard
            wip += task.duration
            if tard > 0.0:
                exceeded += 1
            if tard > worst:
                worst = tard
        per_resource[resource.id] = acc
    n = len(schedule.tasks)
    return ScheduleMetrics(
        total_tardiness=total,
        avg_tardiness=total / n if n else 0.0,
        max_tardiness=worst,
        total_wip=wip,
        task_count=n,
        resource_count=len(schedule.resources),
        init_tardiness=init_tardiness,
        exceeded_tasks=exceeded,
        per_resource_tardiness=per_resource,
    )


def validate(schedule: Schedule) -> list[Violation]:
    """Check every structural invariant; violations are returned, never raised."""
    violations: list[Violation] = []
    seen: dict[int, int] = {}
    rids = [r.id for r in schedule.resources]
    if sorted(rids) != list(range(1, len(rids) + 1)):
        violations.append(
            Violation("resource-ids", tuple(rids), "resource ids must be dense ordinals 1..n")
        )
    for resource in schedule.resources:
        if resource.processing_rate <= 0:
            violations.append(
                Violation("resource-rate", (resource.id,), "processing rate must be > 0")
            )
        counts: dict[int, int] = {}
        for tid in resource.sequence:
            counts[tid] = counts.get(tid, 0) + 1
        for tid, c in counts.items():
            if c > 1:
                violations.append(
                    Violation("duplicate-in-sequence", (tid, resource.id),
                              f"task {tid} appears {c} times on resource {resource.id}")
                )
        for idx, tid in enumerate(resource.sequence):
            task = schedule.tasks.get(tid)
            if task is None:
                violations.append(
                    Violation("dangling-task", (tid, resource.id),
                              f"sequence of resource {resource.id} references unknown task {tid}")
                )
                continue
            if tid in seen and seen[tid] != resource.id:
                violations.append(
                    Violation("duplicate-placement", (tid, seen[tid], resource.id),
                              f"task {tid} placed on resources {seen[tid]} and {resource.id}")
                )
            seen[tid] = resource.id
            if not resource.can_process(task.product):
                violations.append(
                    Violation("capability", (tid, resource.id),
                              f"resource {resource.id} cannot process product {task.product} "
                              f"of task {tid}")
                )
            if task.start is not None:
                if task.resource != resource.id or task.seq_index != idx:
                    violations.append(
                        Violation("stale-placement", (tid, resource.id),
                                  f"task {tid} derived placement disagrees with sequence")
                    )
    for tid, task in schedule.tasks.items():
        if tid not in seen:
            violations.append(
                Violation("unplaced-task", (tid,), f"task {tid} is not on any resource")
            )
        if task.quantity <= 0:
            violations.append(
                Violation("task-quantity", (tid,), "quantity must be > 0")
            )
        if task.due_date < 0:
            violations.append(
                Violation("task-due", (tid,), "due date must be >= 0")
            )
    # Timing coherence, only when derived values are present.
    for resource in schedule.resources:
        clock = schedule.horizon_origin
        for tid in resource.sequence:
            task = schedule.tasks.get(tid)
            if task is None or task.start is None or task.finish is None:
                continue
            if task.start != clock:
                violations.append(
                    Violation("timing-gap", (tid, resource.id),
                              f"task {tid} starts at {task.start}, expected {clock}")
                )
            expected = task.start + task.quantity / resource.processing_rate
            if task.finish != expected:
                violations.append(
                    Violation("timing-duration", (tid, resource.id),
                              f"task {tid} finishes at {task.finish}, expected {expected}")
                )
            clock = task.finish
    return violations


def ensure_valid(schedule: Schedule) -> Schedule:
    """Raise StructuralError listing all violations; used as an input guard."""
    violations = validate(schedule)
    if violations:
        raise StructuralError("; ".join(str(v) for v in violations))
    return schedule


def schedule_to_dict(schedule: Schedule) -> dict:
    return {
        "resources": [
            {
                "id": r.id,
                "name": r.name,
                "rate": r.processing_rate,
                "capabilities": sorted(r.capabilities),
                "sequence": list(r.sequence),
            }
            for r in schedule.resources
        ],
        "tasks": [
            {
                "id": t.id,
                "name": t.name,
                "product": t.product,
                "quantity": t.quantity,
                "due": t.due_date,
            }
            for t in sorted(schedule.tasks.values(), key=lambda t: t.id)
        ],
    }


def schedule_from_dict(doc: dict) -> Schedule:
    """Build a schedule from its JSON form. Timing is recomputed, never loaded."""
    resources = [
        Resource(
            id=int(r["id"]),
            name=str(r["name"]),
            capabilities={int(c) for c in r["capabilities"]},
            processing_rate=float(r["rate"]),
            sequence=[int(t) for t in r["sequence"]],
        )
        for r in doc["resources"]
    ]
    tasks = {
        int(t["id"]): Task(
            id=int(t["id"]),
            name=str(t["name"]),
            product=int(t["product"]),
            quantity=float(t["quantity"]),
            due_date=float(t["due"]),
        )
        for t in doc["tasks"]
    }
    return recompute_timing(Schedule(resources=resources, tasks=tasks))


def save_schedule(schedule: Schedule, path: str | Path) -> None:
    Path(path).write_text(json.dumps(schedule_to_dict(schedule), indent=2, sort_keys=True))


def load_schedule(path: str | Path) -> Schedule:
    return schedule_from_dict(json.loads(Path(path).read_text()))


def tardiness_by_task(schedule: Schedule) -> dict[int, float]:
    """Tardiness of every task, keyed by id."""
    return {tid: task_tardiness(t) for tid, t in schedule.tasks.items()}


def iter_tasks_in_order(schedule: Schedule) -> Iterable[Task]:
    """Tasks in resource order then sequence order (the canonical walk)."""
    for resource in schedule.resources:
        for tid in resource.sequence:
            yield schedule.tasks[tid]
