"""Placement of control modules onto edge servers.

The problem is a small generalized assignment: each module may run on at
most one server, servers have finite capacity headroom, and the objective
is the summed affinity of the chosen placements. Instances stay tiny (a
handful of servers and modules), so an exact enumerator with feasibility
pruning is affordable; a greedy heuristic covers anything larger.

A plan is the binary placement matrix itself (rows are resources, columns
are modules, both in instance order) so that constraint checks and JSON
round-trips are direct.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

EXACT_SEARCH_LIMIT = 10**7
CAPACITY_SLACK = 1e-9  # float-tolerant feasibility comparisons


class AllocationError(ValueError):
    """Malformed instance or plan."""


class InstanceTooLargeError(AllocationError):
    """Search space exceeds the exact solver's enumeration guard."""


@dataclass(frozen=True)
class EdgeResource:
    id: str
    capacity: float
    current_load: float = 0.0
    bandwidth_mbps: float = 100.0
    compute_rating: float = 1.0

    def __post_init__(self):
        if self.capacity < 0:
            raise AllocationError(f"resource {self.id}: capacity must be >= 0")
        if self.current_load < 0:
            raise AllocationError(f"resource {self.id}: current_load must be >= 0")
        if self.bandwidth_mbps <= 0:
            raise AllocationError(f"resource {self.id}: bandwidth must be positive")
        if not (0.0 < self.compute_rating <= 1.0):
            raise AllocationError(f"resource {self.id}: compute_rating must be in (0,1]")

    @property
    def headroom(self) -> float:
        return self.capacity - self.current_load


@dataclass(frozen=True)
class ControlModule:
    id: str
    load: float
    intensity: float = 0.5

    def __post_init__(self):
        if self.load <= 0:
            raise AllocationError(f"module {self.id}: load must be positive")
        if not (0.0 < self.intensity <= 1.0):
            raise AllocationError(f"module {self.id}: intensity must be in (0,1]")


@dataclass(frozen=True)
class AffinityWeights:
    bandwidth: float = 0.5
    cpu: float = 0.5

    def __post_init__(self):
        if self.bandwidth < 0 or self.cpu < 0:
            raise AllocationError("affinity weights must be >= 0")
        if self.bandwidth + self.cpu <= 0:
            raise AllocationError("at least one affinity weight must be positive")


def affinity(
    module: ControlModule,
    resource: EdgeResource,
    weights: AffinityWeights,
    max_bandwidth: float,
) -> float:
    """Placement score: weighted bandwidth and compute quality, scaled by intensity.

    Bandwidth is normalized by the instance-wide maximum so the score is
    unit-free; more intense modules amplify the gap between servers.
    """
    if max_bandwidth <= 0:
        raise AllocationError("max_bandwidth must be positive")
    quality = (
        weights.bandwidth * resource.bandwidth_mbps / max_bandwidth
        + weights.cpu * resource.compute_rating
    )
    return quality * (1.0 + module.intensity)


@dataclass(frozen=True)
class AssignmentPlan:
    """Binary placement matrix with its objective value.

    x[i][j] = 1 places module j on resource i; a zero column leaves that
    module unassigned (it runs at the cloud).
    """

    resource_ids: tuple[str, ...]
    module_ids: tuple[str, ...]
    x: tuple[tuple[int, ...], ...]
    objective: float

    def __post_init__(self):
        if len(self.x) != len(self.resource_ids):
            raise AllocationError("plan matrix row count != resource count")
        for row in self.x:
            if len(row) != len(self.module_ids):
                raise AllocationError("plan matrix column count != module count")
            if any(v not in (0, 1) for v in row):
                raise AllocationError("plan matrix entries must be 0 or 1")

    def assignment(self) -> dict[str, str]:
        """module id -> resource id for every placed module."""
        placed = {}
        for i, row in enumerate(self.x):
            for j, v in enumerate(row):
                if v:
                    placed[self.module_ids[j]] = self.resource_ids[i]
        return placed

    def unassigned(self) -> list[str]:
        return [
            self.module_ids[j]
            for j in range(len(self.module_ids))
            if all(row[j] == 0 for row in self.x)
        ]

    def loads(self, modules: list[ControlModule]) -> dict[str, float]:
        """Resulting total load per resource id, including pre-existing load."""
        by_id = {m.id: m for m in modules}
        totals = {}
        for i, rid in enumerate(self.resource_ids):
            totals[rid] = sum(
                by_id[self.module_ids[j]].load for j, v in enumerate(self.x[i]) if v
            )
        return totals


def validate(
    plan: AssignmentPlan,
    modules: list[ControlModule],
    resources: list[EdgeResource],
) -> list[str]:
    """Constraint violations in the plan; empty iff the plan is feasible."""
    violations = []
    if plan.resource_ids != tuple(r.id for r in resources):
        violations.append("plan resource ids do not match the instance")
        return violations
    if plan.module_ids != tuple(m.id for m in modules):
        violations.append("plan module ids do not match the instance")
        return violations
    for j, mod in enumerate(modules):
        copies = sum(row[j] for row in plan.x)
        if copies > 1:
            violations.append(f"module {mod.id} assigned to {copies} resources")
    for i, res in enumerate(resources):
        assigned = sum(modules[j].load for j, v in enumerate(plan.x[i]) if v)
        total = res.current_load + assigned
        if total > res.capacity + CAPACITY_SLACK:
            violations.append(
                f"resource {res.id} over capacity: {total:.6f} > {res.capacity:.6f}"
            )
    return violations


def _affinity_matrix(
    modules: list[ControlModule],
    resources: list[EdgeResource],
    weights: AffinityWeights,
) -> list[list[float]]:
    max_bw = max(r.bandwidth_mbps for r in resources)
    return [[affinity(m, r, weights, max_bw) for m in modules] for r in resources]


def _check_instance(modules: list[ControlModule], resources: list[EdgeResource]) -> None:
    if not resources:
        raise AllocationError("instance has no resources")
    if len({r.id for r in resources}) != len(resources):
        raise AllocationError("duplicate resource ids")
    if len({m.id for m in modules}) != len(modules):
        raise AllocationError("duplicate module ids")


def _plan_from_choice(
    choice: list[int],
    modules: list[ControlModule],
    resources: list[EdgeResource],
    objective: float,
) -> AssignmentPlan:
    x = tuple(
        tuple(1 if choice[j] == i else 0 for j in range(len(modules)))
        for i in range(len(resources))
    )
    return AssignmentPlan(
        tuple(r.id for r in resources), tuple(m.id for m in modules), x, objective
    )


def solve_exact(
    modules: list[ControlModule],
    resources: list[EdgeResource],
    weights: AffinityWeights = AffinityWeights(),
) -> AssignmentPlan:
    """Enumerate all placements, prune on capacity, return the best plan.

    Ties on the objective resolve to the lexicographically smallest
    row-major placement matrix, which keeps the result unique.
    """
    _check_instance(modules, resources)
    n, m = len(resources), len(modules)
    if (n + 1) ** m > EXACT_SEARCH_LIMIT:
        raise InstanceTooLargeError(
            f"(n+1)^m = {(n + 1) ** m} exceeds {EXACT_SEARCH_LIMIT}; use solve_greedy"
        )
    if m == 0:
        return _plan_from_choice([], modules, resources, 0.0)

    score = _affinity_matrix(modules, resources, weights)
    headroom = [r.headroom for r in resources]

    # choice[j] = resource index for module j, or -1 for unassigned
    best_score = float("-inf")
    best_choice: list[int] | None = None
    best_key: tuple[int, ...] | None = None
    choice = [-1] * m

    def flat_key(ch: list[int]) -> tuple[int, ...]:
        return tuple(1 if ch[j] == i else 0 for i in range(n) for j in range(m))

    def descend(j: int, used: list[float], total: float) -> None:
        nonlocal best_score, best_choice, best_key
        if j == m:
            key = flat_key(choice)
            if total > best_score or (
                total == best_score and (best_key is None or key < best_key)
            ):
                best_score = total
                best_choice = choice.copy()
                best_key = key
            return
        choice[j] = -1
        descend(j + 1, used, total)
        for i in range(n):
            if used[i] + modules[j].load <= headroom[i] + CAPACITY_SLACK:
                choice[j] = i
                used[i] += modules[j].load
                descend(j + 1, used, total + score[i][j])
                used[i] -= modules[j].load
        choice[j] = -1

    descend(0, [0.0] * n, 0.0)
    assert best_choice is not None
    return _plan_from_choice(best_choice, modules, resources, best_score)


def solve_greedy(
    modules: list[ControlModule],
    resources: list[EdgeResource],
    weights: AffinityWeights = AffinityWeights(),
) -> AssignmentPlan:
    """Place heaviest modules first, each on its best feasible server.

    Load ties fall back to module id; among feasible servers the highest
    affinity wins, earliest in instance order on ties.
    """
    _check_instance(modules, resources)
    if not modules:
        return _plan_from_choice([], modules, resources, 0.0)
    score = _affinity_matrix(modules, resources, weights)
    headroom = [r.headroom for r in resources]
    order = sorted(range(len(modules)), key=lambda j: (-modules[j].load, modules[j].id))

    choice = [-1] * len(modules)
    used = [0.0] * len(resources)
    total = 0.0
    for j in order:
        best_i = -1
        for i in range(len(resources)):
            if used[i] + modules[j].load > headroom[i] + CAPACITY_SLACK:
                continue
            if best_i < 0 or score[i][j] > score[best_i][j]:
                best_i = i
        if best_i >= 0:
            choice[j] = best_i
            used[best_i] += modules[j].load
            total += score[best_i][j]
    return _plan_from_choice(choice, modules, resources, total)


def solve(
    modules: list[ControlModule],
    resources: list[EdgeResource],
    weights: AffinityWeights = AffinityWeights(),
) -> AssignmentPlan:
    """Exact when the enumeration guard allows it, greedy otherwise."""
    try:
        return solve_exact(modules, resources, weights)
    except InstanceTooLargeError:
        return solve_greedy(modules, resources, weights)


def rebalance(
    plan: AssignmentPlan,
    modules: list[ControlModule],
    updated_resources: list[EdgeResource],
    weights: AffinityWeights = AffinityWeights(),
) -> AssignmentPlan:
    """Re-solve against updated loads and capacities.

    A withdrawn server shows up as capacity 0, which forces its modules
    elsewhere or leaves them unassigned.
    """
    if not set(plan.resource_ids) <= {r.id for r in updated_resources}:
        raise AllocationError("updated resources do not cover the plan's resource ids")
    if set(plan.module_ids) != {m.id for m in modules}:
        raise AllocationError("module list does not match the plan's module ids")
    return solve(modules, updated_resources, weights)


def instance_to_dict(
    modules: list[ControlModule],
    resources: list[EdgeResource],
    weights: AffinityWeights = AffinityWeights(),
) -> dict:
    return {
        "resources": [
            {
                "id": r.id,
                "capacity": r.capacity,
                "current_load": r.current_load,
                "bandwidth_mbps": r.bandwidth_mbps,
                "compute_rating": r.compute_rating,
            }
            for r in resources
        ],
        "modules": [
            {"id": m.id, "load": m.load, "intensity": m.intensity} for m in modules
        ],
        "weights": {"bandwidth": weights.bandwidth, "cpu": weights.cpu},
    }


def instance_from_dict(data: dict) -> tuple[list[ControlModule], list[EdgeResource], AffinityWeights]:
    try:
        resources = [EdgeResource(**r) for r in data["resources"]]
        modules = [ControlModule(**m) for m in data["modules"]]
    except (KeyError, TypeError) as exc:
        raise AllocationError(f"malformed instance: {exc}") from exc
    weights = AffinityWeights(**data.get("weights", {}))
    return modules, resources, weights


def plan_to_dict(plan: AssignmentPlan) -> dict:
    return {
        "resource_ids": list(plan.resource_ids),
        "module_ids": list(plan.module_ids),
        "x": [list(row) for row in plan.x],
        "objective": plan.objective,
        "assignment": plan.assignment(),
        "unassigned": plan.unassigned(),
    }


def plan_from_dict(data: dict) -> AssignmentPlan:
    return AssignmentPlan(
        tuple(data["resource_ids"]),
        tuple(data["module_ids"]),
        tuple(tuple(int(v) for v in row) for row in data["x"]),
        float(data["objective"]),
    )


def load_instance(path) -> tuple[list[ControlModule], list[EdgeResource], AffinityWeights]:
    with open(path) as f:
        return instance_from_dict(json.load(f))
