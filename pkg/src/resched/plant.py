"""Paint-plant instance generation: plants, order sets, the FIFO initial
schedule, and the new-order disruption.

Everything is deterministic per seed. Two named presets are exposed:
``desk`` (a small 4-resource instance sized for fast experiments and tests)
and ``paper-full`` (11 latex + 40 alkyd formulation units plus fill-out
trains, 100 products).
"""

from __future__ import annotations

import json
import random
from dataclasses import asdict, dataclass
from pathlib import Path

from .model import (
    ProductClass,
    ProductKind,
    Resource,
    Schedule,
    ScheduleMetrics,
    Task,
    compute_metrics,
    recompute_timing,
)


class ConfigError(ValueError):
    """A plant configuration field is out of range."""


class InfeasibleOrderError(ValueError):
    """An order has no capable resource (or collides with an existing task)."""


@dataclass
class PlantConfig:
    n_latex_units: int = 11
    n_alkyd_units: int = 40
    n_fillout_trains: int = 30
    rate_range: tuple[float, float] = (8.0, 16.0)
    n_products: int = 12
    due_date_tightness: float = 0.8
    seed: int = 0
    # Order-set shape (the source material never fixes these; presets do).
    n_orders: int = 40
    qty_range: tuple[float, float] = (20.0, 60.0)
    # Due-date factor range for the disruption order, relative to its
    # projected FIFO finish: lower = tighter = larger tardiness jump.
    disruption_due_factor: tuple[float, float] = (0.5, 0.9)
    # Disperser counts, recorded for documentation; sharing is not modeled.
    n_latex_dispersers: int = 4
    n_alkyd_dispersers: int = 13

    def validated(self) -> "PlantConfig":
        if self.n_latex_units < 0 or self.n_alkyd_units < 0 or self.n_fillout_trains < 0:
            raise ConfigError("unit counts must be >= 0")
        if self.n_latex_units + self.n_alkyd_units + self.n_fillout_trains < 1:
            raise ConfigError("plant needs at least one resource")
        if self.rate_range[0] <= 0 or self.rate_range[1] < self.rate_range[0]:
            raise ConfigError("rate_range must satisfy 0 < min <= max")
        if self.n_products < 1:
            raise ConfigError("n_products must be >= 1")
        if self.due_date_tightness <= 0:
            raise ConfigError("due_date_tightness must be > 0")
        if self.n_orders < 0:
            raise ConfigError("n_orders must be >= 0")
        if self.qty_range[0] <= 0 or self.qty_range[1] < self.qty_range[0]:
            raise ConfigError("qty_range must satisfy 0 < min <= max")
        return self


PRESETS: dict[str, PlantConfig] = {
    "desk": PlantConfig(
        n_latex_units=2,
        n_alkyd_units=2,
        n_fillout_trains=0,
        rate_range=(8.0, 16.0),
        n_products=6,
        due_date_tightness=0.8,
        seed=0,
        n_orders=18,
        qty_range=(20.0, 60.0),
    ),
    "paper-full": PlantConfig(
        n_latex_units=11,
        n_alkyd_units=40,
        n_fillout_trains=30,
        rate_range=(8.0, 16.0),
        n_products=100,
        due_date_tightness=0.8,
        seed=0,
        n_orders=105,
        qty_range=(20.0, 60.0),
    ),
}


def preset(name: str) -> PlantConfig:
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(sorted(PRESETS))}"
        ) from None


@dataclass
class Plant:
    products: list[ProductClass]
    resources: list[Resource]

    def product_ids(self, kind: ProductKind | None = None) -> list[int]:
        return [p.id for p in self.products if kind is None or p.kind == kind]


@dataclass
class Order:
    id: int
    product: int
    quantity: float
    due_date: float
    arrival_index: int


def generate_plant(config: PlantConfig) -> Plant:
    """Sample a plant from the config; deterministic per ``config.seed``.

    Latex units process only latex products, alkyd units only alkyds, and
    fill-out trains (when configured) process everything. Resource ids are
    dense ordinals starting at 1.
    """
    config.validated()
    rng = random.Random(config.seed)
    products: list[ProductClass] = []
    n_latex_products = max(1, config.n_products // 2) if config.n_latex_units else 0
    if config.n_alkyd_units == 0 and config.n_fillout_trains == 0:
        n_latex_products = config.n_products
    for pid in range(1, config.n_products + 1):
        kind = ProductKind.LATEX if pid <= n_latex_products else ProductKind.ALKYD
        products.append(ProductClass(id=pid, kind=kind))
    latex_ids = {p.id for p in products if p.kind == ProductKind.LATEX}
    alkyd_ids = {p.id for p in products if p.kind == ProductKind.ALKYD}

    resources: list[Resource] = []
    rid = 1
    lo, hi = config.rate_range
    for i in range(config.n_latex_units):
        resources.append(
            Resource(rid, f"latex-unit-{i + 1}", set(latex_ids), rng.uniform(lo, hi))
        )
        rid += 1
    for i in range(config.n_alkyd_units):
        resources.append(
            Resource(rid, f"alkyd-unit-{i + 1}", set(alkyd_ids), rng.uniform(lo, hi))
        )
        rid += 1
    for i in range(config.n_fillout_trains):
        resources.append(
            Resource(rid, f"fillout-train-{i + 1}", latex_ids | alkyd_ids, rng.uniform(lo, hi))
        )
        rid += 1
    return Plant(products=products, resources=resources)


def _earliest_capable(resources: list[Resource], availability: dict[int, float],
                      product: int) -> Resource | None:
    """FIFO dispatch target: the capable resource free soonest, ties to lowest id."""
    best: Resource | None = None
    for r in resources:
        if not r.can_process(product):
            continue
        if best is None or (availability[r.id], r.id) < (availability[best.id], best.id):
            best = r
    return best


def generate_orders(plant: Plant, n: int, seed: int,
                    tightness: float = 0.8,
                    qty_range: tuple[float, float] = (20.0, 60.0)) -> list[Order]:
    """Sample ``n`` orders whose due dates sit around their projected FIFO finish.

    Each due date is the finish time the order would get under FIFO dispatch,
    scaled by tightness * U(0.7, 1.5). With the default tightness of 0.8 most
    factors fall below 1, so the FIFO schedule starts out tardy while a
    minority of orders keep slack for repair moves to exploit.
    """
    rng = random.Random(seed)
    availability = {r.id: 0.0 for r in plant.resources}
    orders: list[Order] = []
    product_ids = [p.id for p in plant.products]
    processable = [
        pid for pid in product_ids
        if any(r.can_process(pid) for r in plant.resources)
    ]
    for i in range(n):
        pid = rng.choice(processable)
        qty = rng.uniform(*qty_range)
        target = _earliest_capable(plant.resources, availability, pid)
        assert target is not None  # guaranteed: pid drawn from processable
        finish = availability[target.id] + qty / target.processing_rate
        availability[target.id] = finish
        due = max(0.0, finish * tightness * rng.uniform(0.7, 1.5))
        orders.append(Order(id=i + 1, product=pid, quantity=qty,
                            due_date=due, arrival_index=i))
    return orders


def fifo_schedule(plant: Plant, orders: list[Order]) -> Schedule:
    """Dispatch orders in arrival order to the earliest-available capable resource."""
    resources = [
        Resource(r.id, r.name, set(r.capabilities), r.processing_rate, [])
        for r in plant.resources
    ]
    schedule = Schedule(resources=resources, tasks={})
    availability = {r.id: 0.0 for r in resources}
    for order in sorted(orders, key=lambda o: o.arrival_index):
        target = _earliest_capable(resources, availability, order.product)
        if target is None:
            raise InfeasibleOrderError(
                f"order {order.id}: no resource can process product {order.product}"
            )
        if order.id in schedule.tasks:
            raise InfeasibleOrderError(f"order {order.id}: task id already in use")
        schedule.tasks[order.id] = Task(
            id=order.id,
            name=f"order-{order.id}",
            product=order.product,
            quantity=order.quantity,
            due_date=order.due_date,
        )
        target.sequence.append(order.id)
        availability[target.id] += order.quantity / target.processing_rate
    return recompute_timing(schedule)


def inject_new_order(schedule: Schedule, order: Order) -> tuple[Schedule, ScheduleMetrics]:
    """Append a newly arrived order via the FIFO rule and capture the repair baseline.

    Returns a fresh schedule (the input is untouched) together with metrics
    whose ``init_tardiness`` equals the post-insertion total tardiness.
    """
    updated = schedule.clone()
    availability = {r.id: r.availability(updated.tasks) for r in updated.resources}
    target = _earliest_capable(updated.resources, availability, order.product)
    if target is None:
        raise InfeasibleOrderError(
            f"order {order.id}: no resource can process product {order.product}"
        )
    if order.id in updated.tasks:
        raise InfeasibleOrderError(f"order {order.id}: task id already in use")
    updated.tasks[order.id] = Task(
        id=order.id,
        name=f"order-{order.id}",
        product=order.product,
        quantity=order.quantity,
        due_date=order.due_date,
    )
    target.sequence.append(order.id)
    recompute_timing(updated)
    metrics = compute_metrics(updated)
    metrics.init_tardiness = metrics.total_tardiness
    return updated, metrics


def disruption_order(plant: Plant, schedule: Schedule, rng: random.Random,
                     config: PlantConfig) -> Order:
    """Sample the disruptive new order: a batch with a due date already tight
    relative to the finish it would get, so inserting it raises tardiness."""
    pid = rng.choice([
        p.id for p in plant.products
        if any(r.can_process(p.id) for r in plant.resources)
    ])
    qty = rng.uniform(*config.qty_range)
    availability = {r.id: r.availability(schedule.tasks) for r in schedule.resources}
    target = _earliest_capable(schedule.resources, availability, pid)
    if target is None:
        raise InfeasibleOrderError(f"no resource can process product {pid}")
    finish = availability[target.id] + qty / target.processing_rate
    lo, hi = config.disruption_due_factor
    due = max(0.0, finish * rng.uniform(lo, hi))
    new_id = max(schedule.tasks, default=0) + 1
    return Order(id=new_id, product=pid, quantity=qty, due_date=due,
                 arrival_index=len(schedule.tasks))


def plant_to_dict(plant: Plant) -> dict:
    return {
        "products": [{"id": p.id, "kind": p.kind.value} for p in plant.products],
        "resources": [
            {
                "id": r.id,
                "name": r.name,
                "rate": r.processing_rate,
                "capabilities": sorted(r.capabilities),
                "sequence": list(r.sequence),
            }
            for r in plant.resources
        ],
    }


def plant_from_dict(doc: dict) -> Plant:
    products = [ProductClass(int(p["id"]), ProductKind(p["kind"])) for p in doc["products"]]
    resources = [
        Resource(
            id=int(r["id"]),
            name=str(r["name"]),
            capabilities={int(c) for c in r["capabilities"]},
            processing_rate=float(r["rate"]),
            sequence=[int(t) for t in r.get("sequence", [])],
        )
        for r in doc["resources"]
    ]
    return Plant(products=products, resources=resources)


def orders_to_dict(orders: list[Order]) -> dict:
    return {
        "orders": [
            {
                "id": o.id,
                "product": o.product,
                "quantity": o.quantity,
                "due": o.due_date,
                "arrival_index": o.arrival_index,
            }
            for o in orders
        ]
    }


def order_from_dict(doc: dict) -> Order:
    return Order(
        id=int(doc["id"]),
        product=int(doc["product"]),
        quantity=float(doc["quantity"]),
        due_date=float(doc.get("due", doc.get("due_date", 0.0))),
        arrival_index=int(doc.get("arrival_index", 0)),
    )


def orders_from_dict(doc: dict) -> list[Order]:
    return [order_from_dict(o) for o in doc["orders"]]


def config_to_dict(config: PlantConfig) -> dict:
    doc = asdict(config)
    doc["rate_range"] = list(config.rate_range)
    doc["qty_range"] = list(config.qty_range)
    doc["disruption_due_factor"] = list(config.disruption_due_factor)
    return doc


def config_from_dict(doc: dict) -> PlantConfig:
    kwargs = dict(doc)
    for key in ("rate_range", "qty_range", "disruption_due_factor"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    return PlantConfig(**kwargs).validated()


def save_json(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True))


def load_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())
