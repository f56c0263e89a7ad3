"""Greedy mass transfer that builds the TV-optimal watermarked law.

Cells above the threshold (heavy) give mass to cells at or below it (light).
The total moved is ``min(d, S, E)`` where ``E`` is the total heavy surplus
and ``S`` the total light deficit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from wmlimits.errors import ConfigError
from wmlimits.process_models import SequencePmf

PLAN_TOLERANCE = 1e-12


def surplus_and_deficit(probs: np.ndarray, threshold: float) -> tuple[float, float]:
    """Exact ``(E, S)`` = (sum of (p - t)_+, sum of (t - p)_+)."""
    probs = np.asarray(probs, dtype=float)
    surplus = math.fsum(np.maximum(probs - threshold, 0.0).tolist())
    deficit = math.fsum(np.maximum(threshold - probs, 0.0).tolist())
    return surplus, deficit


def _visit_order(amounts: np.ndarray) -> np.ndarray:
    # descending amount, ascending index on ties
    return np.lexsort((np.arange(len(amounts)), -amounts))


def greedy_transfers(
    supply: np.ndarray, demand: np.ndarray, amount: float
) -> list[tuple[int, int, float]]:
    """Move ``amount`` from ``supply`` cells to ``demand`` cells.

    Both sides are visited largest first. Returns ``(from, to, mass)`` triples
    with positive mass, in the order they were made. ``amount`` must not exceed
    either side's total by more than rounding.
    """
    supply = np.asarray(supply, dtype=float)
    demand = np.asarray(demand, dtype=float)
    givers = [int(i) for i in _visit_order(supply) if supply[i] > 0]
    takers = [int(i) for i in _visit_order(demand) if demand[i] > 0]
    left_give = {i: float(supply[i]) for i in givers}
    left_take = {i: float(demand[i]) for i in takers}
    remaining = float(amount)
    moves: list[tuple[int, int, float]] = []
    gi = ti = 0
    while remaining > 0 and gi < len(givers) and ti < len(takers):
        g, r = givers[gi], takers[ti]
        give, take = left_give[g], left_take[r]
        mass = min(give, take, remaining)
        if mass > 0:
            moves.append((g, r, mass))
        # exhausted sides are zeroed exactly rather than left with rounding dust
        left_give[g] = 0.0 if mass == give else give - mass
        left_take[r] = 0.0 if mass == take else take - mass
        remaining = 0.0 if mass == remaining else remaining - mass
        if left_give[g] <= 0:
            gi += 1
        if left_take[r] <= 0:
            ti += 1
    return moves


@dataclass(frozen=True)
class TransportPlan:
    """Sparse transfers ``tau(from_index, to_index) = mass`` and their total."""

    transfers: tuple[tuple[int, int, float], ...]
    delta: float
    threshold: float = field(default=float("nan"))

    @property
    def total(self) -> float:
        return math.fsum(mass for _, _, mass in self.transfers)

    def to_csv(self, path: Union[str, Path]) -> None:
        rows = sorted(self.transfers)
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["from_index", "to_index", "mass"])
            for source, target, mass in rows:
                writer.writerow([source, target, repr(float(mass))])

    @classmethod
    def from_csv(
        cls, path: Union[str, Path], delta: Optional[float] = None, threshold: float = float("nan")
    ) -> "TransportPlan":
        """Read triples back; ``delta`` defaults to the total transferred mass."""
        with open(path, newline="") as handle:
            rows = [
                (int(r["from_index"]), int(r["to_index"]), float(r["mass"]))
                for r in csv.DictReader(handle)
            ]
        if delta is None:
            delta = math.fsum(mass for *_, mass in rows)
        return cls(tuple(rows), delta, threshold)


def build_optimal_pmf(
    q: SequencePmf, threshold: float, budget: float
) -> tuple[SequencePmf, TransportPlan]:
    """Move ``min(budget, S, E)`` of heavy surplus onto light deficits.

    Heavy cells are those with ``q > threshold``. A cell drained or filled
    completely lands exactly on the threshold.
    """
    if not 0.0 < threshold <= 1.0:
        raise ConfigError(f"threshold must lie in (0, 1], got {threshold}")
    if budget < 0 or not math.isfinite(budget):
        raise ConfigError(f"distortion budget must be finite and nonnegative, got {budget}")
    probs = q.probs
    surplus_total, deficit_total = surplus_and_deficit(probs, threshold)
    delta = min(float(budget), surplus_total, deficit_total)
    surplus = np.maximum(probs - threshold, 0.0)
    deficit = np.where(probs <= threshold, threshold - probs, 0.0)
    moves = greedy_transfers(surplus, deficit, delta)
    sent = np.zeros(len(probs))
    received = np.zeros(len(probs))
    for source, target, mass in moves:
        sent[source] += mass
        received[target] += mass
    p_star = probs - sent + received
    # snap cells whose capacity was used up so they sit on the threshold exactly
    drained = (sent > 0) & (sent >= surplus)
    filled = (received > 0) & (received >= deficit)
    p_star[drained | filled] = threshold
    return q.with_probs(p_star), TransportPlan(tuple(moves), delta, threshold)


@dataclass(frozen=True)
class PlanCheck:
    ok: bool
    violations: tuple[str, ...]
    p_star: np.ndarray

    def __bool__(self) -> bool:
        return self.ok


def verify_plan(
    q: SequencePmf, threshold: float, plan: TransportPlan, budget: float | None = None
) -> PlanCheck:
    """Recheck every plan invariant and rebuild the transported law from scratch.

    ``plan.delta`` is compared with ``min(budget, S, E)`` when ``budget`` is
    given; otherwise the transfers must add up to ``plan.delta``.
    """
    probs = q.probs
    n = len(probs)
    violations: list[str] = []
    out_mass = np.zeros(n)
    in_mass = np.zeros(n)
    for source, target, mass in plan.transfers:
        if not (0 <= source < n and 0 <= target < n):
            violations.append(f"index out of range in transfer ({source}, {target})")
            continue
        if mass < 0:
            violations.append(f"negative transfer ({source}, {target}) = {mass}")
        if not probs[source] > threshold:
            violations.append(f"transfer source {source} is not heavy")
        if probs[target] > threshold:
            violations.append(f"transfer target {target} is not light")
        out_mass[source] += mass
        in_mass[target] += mass
    for cell in np.flatnonzero(out_mass):
        cap = probs[cell] - threshold
        if out_mass[cell] > cap + PLAN_TOLERANCE:
            violations.append(
                f"row capacity exceeded at {cell}: sends {out_mass[cell]:.12g} > surplus {cap:.12g}"
            )
    for cell in np.flatnonzero(in_mass):
        cap = threshold - probs[cell]
        if in_mass[cell] > cap + PLAN_TOLERANCE:
            violations.append(
                f"column capacity exceeded at {cell}: receives {in_mass[cell]:.12g} > deficit {cap:.12g}"
            )
    total = plan.total
    if budget is not None:
        surplus_total, deficit_total = surplus_and_deficit(probs, threshold)
        expected = min(float(budget), surplus_total, deficit_total)
        if abs(plan.delta - expected) > PLAN_TOLERANCE:
            violations.append(f"delta mismatch: plan says {plan.delta!r}, expected {expected!r}")
    if abs(total - plan.delta) > PLAN_TOLERANCE:
        violations.append(f"delta mismatch: transfers total {total!r}, plan says {plan.delta!r}")
    return PlanCheck(not violations, tuple(violations), probs - out_mass + in_mass)
