"""Catalog of local repair operators.

An operator is identified by a direction triple (vertical, horizontal, mode)
and takes two task arguments: the *focal* task being repositioned and an
*auxiliary* task marking the target position. The canonical name is the
hyphenated triple, e.g. ``down-right-jump``:

  vertical    up    = auxiliary starts earlier than the focal task
              down  = auxiliary starts later
  horizontal  left  = auxiliary's resource id is lower than the focal's
              same  = equal
              right = higher
  mode        jump  = focal leaves its slot and is inserted next to the
                      auxiliary (before it for up, after it for down)
              swap  = focal and auxiliary exchange (resource, position)

All twelve combinations are valid operator kinds.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import NamedTuple

from .model import Schedule, recompute_timing, tardiness_by_task

VERTICALS = ("up", "down")
HORIZONTALS = ("left", "same", "right")
MODES = ("jump", "swap")


class OperatorKind(NamedTuple):
    vertical: str
    horizontal: str
    mode: str

    @property
    def name(self) -> str:
        return f"{self.vertical}-{self.horizontal}-{self.mode}"

    @classmethod
    def parse(cls, name: str) -> "OperatorKind":
        parts = tuple(name.split("-"))
        if len(parts) != 3 or parts[0] not in VERTICALS \
                or parts[1] not in HORIZONTALS or parts[2] not in MODES:
            raise ValueError(f"not an operator kind name: {name!r}")
        return cls(*parts)


ALL_KINDS: tuple[OperatorKind, ...] = tuple(
    OperatorKind(v, h, m) for v in VERTICALS for h in HORIZONTALS for m in MODES
)


class OperatorInstance(NamedTuple):
    kind: OperatorKind
    focal: int
    auxiliary: int


class PreconditionError(ValueError):
    """apply() was called with an operator whose preconditions do not hold."""


def _failed_predicate(schedule: Schedule, op: OperatorInstance) -> str | None:
    """Name of the first violated precondition, or None when applicable."""
    if op.focal == op.auxiliary:
        return "distinct-tasks"
    try:
        focal = schedule.tasks[op.focal]
    except KeyError:
        raise KeyError(f"operator references unknown focal task {op.focal}") from None
    try:
        aux = schedule.tasks[op.auxiliary]
    except KeyError:
        raise KeyError(f"operator references unknown auxiliary task {op.auxiliary}") from None
    if focal.start is None or aux.start is None:
        return "derived-timing-missing"

    if op.kind.vertical == "up":
        if not aux.start < focal.start:
            return "vertical-up"
    else:
        if not aux.start > focal.start:
            return "vertical-down"

    assert focal.resource is not None and aux.resource is not None
    if op.kind.horizontal == "left":
        if not aux.resource < focal.resource:
            return "horizontal-left"
    elif op.kind.horizontal == "same":
        if aux.resource != focal.resource:
            return "horizontal-same"
    else:
        if not aux.resource > focal.resource:
            return "horizontal-right"

    aux_res = schedule.resource_by_id(aux.resource)
    if not aux_res.can_process(focal.product):
        return "capability-aux-resource"
    if op.kind.mode == "swap":
        focal_res = schedule.resource_by_id(focal.resource)
        if not focal_res.can_process(aux.product):
            return "capability-focal-resource"
    return None


def applicable(schedule: Schedule, op: OperatorInstance) -> bool:
    """True iff the operator's direction and capability preconditions all hold."""
    return _failed_predicate(schedule, op) is None


def apply(schedule: Schedule, op: OperatorInstance) -> Schedule:
    """Apply a repair operator, producing a new left-compacted schedule.

    The input schedule is never mutated. Raises PreconditionError naming the
    failed predicate if the operator is not applicable.
    """
    failed = _failed_predicate(schedule, op)
    if failed is not None:
        raise PreconditionError(f"operator {op.kind.name}({op.focal},{op.auxiliary}) "
                                f"failed precondition: {failed}")
    updated = schedule.clone()
    focal = updated.tasks[op.focal]
    aux = updated.tasks[op.auxiliary]
    focal_seq = updated.resource_by_id(focal.resource).sequence
    aux_seq = updated.resource_by_id(aux.resource).sequence

    if op.kind.mode == "swap":
        fi = focal_seq.index(op.focal)
        ai = aux_seq.index(op.auxiliary)
        focal_seq[fi] = op.auxiliary
        aux_seq[ai] = op.focal
    else:
        focal_seq.remove(op.focal)
        ai = aux_seq.index(op.auxiliary)
        if op.kind.vertical == "up":
            aux_seq.insert(ai, op.focal)
        else:
            aux_seq.insert(ai + 1, op.focal)
    return recompute_timing(updated)


def propose(schedule: Schedule, k_focal: int = 5, k_aux: int = 3) -> list[OperatorInstance]:
    """Enumerate applicable operator instances for the current state.

    Focal candidates are the ``k_focal`` tardiest tasks (ties to the lower
    id); when nothing is tardy the latest-finishing tasks anchor instead, so
    repair can still act on an on-time schedule. For each focal task and each
    operator kind, the ``k_aux`` qualifying tasks nearest in start time serve
    as auxiliaries. The result is deduplicated and deterministically ordered.
    """
    if k_focal < 1 or k_aux < 1:
        raise ValueError("k_focal and k_aux must be >= 1")
    if not schedule.tasks:
        return []
    tardiness = tardiness_by_task(schedule)
    tardy = [tid for tid, tard in tardiness.items() if tard > 0.0]
    if tardy:
        focals = sorted(tardy, key=lambda tid: (-tardiness[tid], tid))[:k_focal]
    else:
        focals = sorted(schedule.tasks,
                        key=lambda tid: (-schedule.tasks[tid].finish, tid))[:k_focal]

    res_by_id = {r.id: r for r in schedule.resources}
    instances: set[OperatorInstance] = set()
    all_tasks = list(schedule.tasks.values())
    for focal_id in focals:
        focal = schedule.tasks[focal_id]
        focal_res = res_by_id[focal.resource]
        # One pass over tasks: each auxiliary qualifies for exactly one
        # (vertical, horizontal) pair, then jump/swap capability filters.
        buckets: dict[OperatorKind, list[tuple[float, int]]] = {}
        for aux in all_tasks:
            if aux.id == focal_id or aux.start == focal.start:
                continue
            vertical = "up" if aux.start < focal.start else "down"
            if aux.resource < focal.resource:
                horizontal = "left"
            elif aux.resource > focal.resource:
                horizontal = "right"
            else:
                horizontal = "same"
            if not res_by_id[aux.resource].can_process(focal.product):
                continue
            entry = (abs(aux.start - focal.start), aux.id)
            buckets.setdefault(OperatorKind(vertical, horizontal, "jump"), []).append(entry)
            if focal_res.can_process(aux.product):
                buckets.setdefault(OperatorKind(vertical, horizontal, "swap"), []).append(entry)
        for kind, candidates in buckets.items():
            candidates.sort()
            for _, aux_id in candidates[:k_aux]:
                instances.add(OperatorInstance(kind, focal_id, aux_id))
    return sorted(instances, key=lambda op: (op.kind.name, op.focal, op.auxiliary))


def trace_to_jsonl(trace: list[tuple[OperatorInstance, float]]) -> str:
    """Serialize an applied-operator trace, one JSON object per line."""
    lines = [
        json.dumps(
            {
                "kind": op.kind.name,
                "focal": op.focal,
                "auxiliary": op.auxiliary,
                "total_tardiness_after": tard_after,
            },
            sort_keys=True,
        )
        for op, tard_after in trace
    ]
    return "\n".join(lines) + ("\n" if lines else "")


def save_trace(trace: list[tuple[OperatorInstance, float]], path: str | Path) -> None:
    Path(path).write_text(trace_to_jsonl(trace))
