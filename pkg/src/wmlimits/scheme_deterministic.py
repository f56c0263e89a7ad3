"""Scheme with a deterministic decoder: grouping search, embedding, residual error.

Sequences are partitioned into groups. Sequences with ``P*(x) >= t`` (``t =
alpha/m``) stay alone, and the grouping minimizes the overflow ``sum_k (P_G(k)
- t)_+`` subject to at least ``m`` groups reaching ``t``.

The embedding places every decodable group ``k`` in a cyclic Latin square of
order ``n``. Under message ``j`` a group sends ``min(P_G(k), t)`` to the
column symbol ``zeta`` with ``h(k, zeta) = j``. Groups lighter than ``t`` are
topped up to exactly ``t`` in their column. The top-up uses overflow from
heavier groups, routed by a message-independent greedy transfer. Every
column of the square therefore carries mass ``t`` whatever the message, so
the side information is message-independent. Each decodable sequence fires on
``m`` columns, which gives a false alarm of exactly ``alpha``. If the overflow
cannot fill every light group, the smallest light groups are dropped from the
square. Their mass is lost to the error and recycled as top-up supply.

The exact error is ``benchmark + residual``. The residual is the overflow of
merged heavy groups plus the mass of dropped groups.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from wmlimits.bounds import deterministic_feasible, excess_mass
from wmlimits.errors import CapacityError, ConfigError, InfeasibleError
from wmlimits.process_models import Alphabet, SequencePmf
from wmlimits.scheme_randomized import LatinSquare
from wmlimits.scheme_tables import ExactEvaluation, SchemeTables, evaluate_exact, fsum, sparse_rows
from wmlimits.tv_transport import greedy_transfers

EXHAUSTIVE_LIGHT_CAP = 12
# cost differences below this are ties, resolved toward the smaller partition
TIE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class FillPlan:
    excluded: tuple[int, ...]
    transfers: tuple[tuple[int, int, float], ...]
    overflow: float
    excluded_mass: float

    @property
    def cost(self) -> float:
        return self.overflow + self.excluded_mass


def _exclusions(group_pmf: np.ndarray, threshold: float) -> tuple[list[int], float, float]:
    heavy = group_pmf >= threshold
    overflow = fsum(np.where(heavy, group_pmf - threshold, 0.0))
    light = np.flatnonzero(~heavy)
    deficit = fsum(threshold - group_pmf[light])
    gap = deficit - overflow
    if gap <= TIE_TOLERANCE:
        return [], overflow, 0.0
    # dropping a light group closes the gap by exactly t, so drop the lightest
    count = min(len(light), math.ceil(gap / threshold - TIE_TOLERANCE))
    order = light[np.lexsort((light, group_pmf[light]))]
    dropped = sorted(int(k) for k in order[:count])
    return dropped, overflow, fsum(group_pmf[dropped])


def fill_plan(group_pmf: np.ndarray, threshold: float) -> FillPlan:
    """Which light groups are dropped, and how overflow tops up the others."""
    group_pmf = np.asarray(group_pmf, dtype=float)
    dropped, overflow, dropped_mass = _exclusions(group_pmf, threshold)
    heavy = group_pmf >= threshold
    is_dropped = np.zeros(len(group_pmf), dtype=bool)
    is_dropped[dropped] = True
    supply = np.where(heavy, group_pmf - threshold, 0.0)
    supply[is_dropped] = group_pmf[is_dropped]
    demand = np.where(~heavy & ~is_dropped, threshold - group_pmf, 0.0)
    need = fsum(demand)
    moves = greedy_transfers(supply, demand, min(need, fsum(supply)))
    return FillPlan(tuple(dropped), tuple(moves), overflow, dropped_mass)


def _canonical_labels(blocks: list[list[int]], size: int) -> np.ndarray:
    blocks = sorted((sorted(b) for b in blocks if b), key=lambda b: b[0])
    assignment = np.empty(size, dtype=np.int64)
    for label, block in enumerate(blocks):
        assignment[block] = label
    return assignment


@dataclass(frozen=True, eq=False)
class DeterministicGrouping:
    """Partition of sequences into groups, labelled by smallest member."""

    assignment: np.ndarray
    group_pmf: np.ndarray
    threshold: float
    mode: str
    plan: FillPlan

    @classmethod
    def from_assignment(
        cls, assignment, p_star: np.ndarray, threshold: float, mode: str = "given"
    ) -> "DeterministicGrouping":
        assignment = np.asarray(assignment, dtype=np.int64)
        blocks: dict[int, list[int]] = {}
        for x, label in enumerate(assignment):
            blocks.setdefault(int(label), []).append(x)
        canonical = _canonical_labels(list(blocks.values()), len(assignment))
        count = int(canonical.max()) + 1
        group_pmf = np.array(
            [fsum(p_star[canonical == k]) for k in range(count)], dtype=float
        )
        return cls(canonical, group_pmf, threshold, mode, fill_plan(group_pmf, threshold))

    @property
    def group_count(self) -> int:
        return len(self.group_pmf)

    @property
    def heavy_groups(self) -> tuple[int, ...]:
        return tuple(int(k) for k in np.flatnonzero(self.group_pmf >= self.threshold))

    def members(self, group: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == group)

    def singleton_heavy(self, p_star: np.ndarray) -> tuple[int, ...]:
        """Labels of the groups holding a sequence with ``P*(x) >= t``."""
        heavy_x = np.flatnonzero(p_star >= self.threshold)
        return tuple(sorted({int(self.assignment[x]) for x in heavy_x}))

    def overflow(self) -> float:
        return excess_mass(self.group_pmf, self.threshold)

    def validate(self, p_star: np.ndarray, m: int) -> None:
        for x in np.flatnonzero(p_star >= self.threshold):
            if len(self.members(int(self.assignment[x]))) != 1:
                raise ConfigError(f"sequence {x} has P* >= alpha/m but is not alone in its group")
        if len(self.heavy_groups) < m:
            raise ConfigError(
                f"grouping has {len(self.heavy_groups)} groups of mass >= alpha/m, needs {m}"
            )
        if abs(fsum(self.group_pmf) - 1.0) > 1e-12:
            raise ConfigError("group masses do not sum to 1")


def _partition_cost(sums: list[float], base: float, threshold: float) -> float:
    """Same value as ``_exclusions`` on the full group law, in plain floats for speed."""
    overflow = base
    deficit = 0.0
    light = []
    for value in sums:
        if value >= threshold:
            overflow += value - threshold
        else:
            deficit += threshold - value
            light.append(value)
    gap = deficit - overflow
    if gap <= TIE_TOLERANCE:
        return overflow
    count = min(len(light), math.ceil(gap / threshold - TIE_TOLERANCE))
    light.sort()
    return overflow + sum(light[:count])


def _exhaustive_light_partition(
    light_masses: np.ndarray, heavy_masses: np.ndarray, threshold: float, m: int
) -> list[int] | None:
    """Restricted-growth-string search over partitions of the light sequences.

    Visits partitions in lexicographic order and keeps the first one whose
    cost is lower than every earlier one by more than the tie tolerance.
    Overflow never decreases as sequences are added, so it prunes.
    """
    masses = [float(v) for v in light_masses]
    n = len(masses)
    heavy_count = len(heavy_masses)
    base = fsum(np.maximum(np.asarray(heavy_masses) - threshold, 0.0))
    best_cost = math.inf
    best: list[int] | None = None
    labels = [0] * n
    sums: list[float] = []

    def descend(i: int, overflow: float) -> None:
        nonlocal best_cost, best
        if base + overflow >= best_cost - TIE_TOLERANCE:
            return
        if i == n:
            if heavy_count + sum(v >= threshold for v in sums) < m:
                return
            cost = _partition_cost(sums, base, threshold)
            if cost < best_cost - TIE_TOLERANCE:
                best_cost, best = cost, labels.copy()
            return
        mass = masses[i]
        for label in range(len(sums)):
            labels[i] = label
            before = sums[label]
            after = before + mass
            sums[label] = after
            descend(i + 1, overflow + max(after - threshold, 0.0) - max(before - threshold, 0.0))
            sums[label] = before
        labels[i] = len(sums)
        sums.append(mass)
        descend(i + 1, overflow)
        sums.pop()

    descend(0, 0.0)
    return best


def _greedy_light_partition(
    light_masses: np.ndarray, heavy_count: int, threshold: float, m: int
) -> list[int] | None:
    """First-fit decreasing into bins of capacity ``t``, then merge the lightest bins."""
    order = np.lexsort((np.arange(len(light_masses)), -light_masses))
    bins: list[list[int]] = []
    loads: list[float] = []
    for i in order:
        mass = float(light_masses[i])
        for b, load in enumerate(loads):
            if load + mass <= threshold:
                bins[b].append(int(i))
                loads[b] += mass
                break
        else:
            bins.append([int(i)])
            loads.append(mass)

    def heavy_bins() -> int:
        return sum(load >= threshold for load in loads)

    while heavy_count + heavy_bins() < m:
        light_bins = sorted(
            (load, min(bins[b]), b) for b, load in enumerate(loads) if load < threshold
        )
        if len(light_bins) < 2:
            return None
        (_, _, first), (_, _, second) = light_bins[0], light_bins[1]
        keep, gone = min(first, second), max(first, second)
        bins[keep].extend(bins[gone])
        loads[keep] += loads[gone]
        del bins[gone], loads[gone]
    labels = [0] * len(light_masses)
    for b, members in enumerate(bins):
        for i in members:
            labels[i] = b
    return labels


def optimize_grouping(
    p_star: SequencePmf, alpha: float, m: int, mode: str = "exhaustive"
) -> DeterministicGrouping:
    """Choose the grouping: exact search (at most 12 light sequences) or greedy packing."""
    if mode not in ("exhaustive", "greedy"):
        raise ConfigError(f"grouping mode must be 'exhaustive' or 'greedy', got {mode!r}")
    if int(m) != m or not 1 <= m <= p_star.size:
        raise ConfigError(f"message count must be an integer in [1, {p_star.size}], got {m}")
    check = deterministic_feasible(p_star, alpha, m)
    if not check:
        raise InfeasibleError(
            f"m = {m} violates the light-mass condition: mass below alpha/m is "
            f"{check.light_mass:.6g} < (1 - |S|/m) alpha = {check.required_light_mass:.6g}"
        )
    t = alpha / m
    probs = p_star.probs
    heavy_x = np.flatnonzero(probs >= t)
    light_x = np.flatnonzero(probs < t)
    if mode == "exhaustive":
        if len(light_x) > EXHAUSTIVE_LIGHT_CAP:
            raise CapacityError(
                f"{len(light_x)} light sequences exceed the exhaustive cap of {EXHAUSTIVE_LIGHT_CAP}"
            )
        labels = _exhaustive_light_partition(probs[light_x], probs[heavy_x], t, m)
    else:
        labels = _greedy_light_partition(probs[light_x], len(heavy_x), t, m)
    if labels is None:
        raise InfeasibleError(f"no grouping yields {m} groups of mass >= alpha/m")
    blocks: dict[int, list[int]] = {}
    for x, label in zip(light_x, labels):
        blocks.setdefault(label, []).append(int(x))
    all_blocks = [[int(x)] for x in heavy_x] + list(blocks.values())
    assignment = _canonical_labels(all_blocks, p_star.size)
    return DeterministicGrouping.from_assignment(assignment, probs, t, mode)


@dataclass(frozen=True)
class AuxiliaryAlphabet:
    """Symbols ``0..n-1`` index square columns, then one symbol per dropped group, then ``zeta~``."""

    heavy_size: int
    light_groups: tuple[int, ...]

    @property
    def light_size(self) -> int:
        return len(self.light_groups)

    @property
    def tilde(self) -> int:
        return self.heavy_size + self.light_size

    @property
    def size(self) -> int:
        return self.tilde + 1

    def light_symbol(self, group: int) -> int:
        return self.heavy_size + self.light_groups.index(group)


@dataclass(eq=False)
class DeterministicScheme(SchemeTables):
    alpha: float
    m: int
    p_star: SequencePmf
    grouping: DeterministicGrouping
    aux: AuxiliaryAlphabet
    pairing: LatinSquare
    square_groups: tuple[int, ...]
    group_embedding: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = field(repr=False)
    residual_error: float = 0.0
    decoder_kind: str = "deterministic"
    _rank: np.ndarray = field(init=False, repr=False)
    _cache: dict = field(init=False, repr=False, default_factory=dict)

    def __post_init__(self) -> None:
        rank = np.full(self.grouping.group_count, -1, dtype=np.int64)
        rank[list(self.square_groups)] = np.arange(len(self.square_groups))
        self._rank = rank

    @property
    def threshold(self) -> float:
        return self.alpha / self.m

    @property
    def aux_size(self) -> int:
        return self.aux.size

    @property
    def benchmark(self) -> float:
        return excess_mass(self.p_star.probs, self.threshold)

    def embedding_entries(self, message: int):
        if message not in self._cache:
            groups, zetas, probs = self.group_embedding[message]
            xs, zs, ps = [], [], []
            for k in np.unique(groups):
                rows = groups == k
                for x in self.grouping.members(int(k)):
                    xs.append(np.full(int(rows.sum()), x))
                    zs.append(zetas[rows])
                    ps.append(probs[rows])
            self._cache[message] = sparse_rows(
                np.concatenate(xs), np.concatenate(zs), np.concatenate(ps)
            )
        return self._cache[message]

    def decode_many(self, x, zeta, draws=None) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        zeta = np.asarray(zeta, dtype=np.int64)
        rank = self._rank[self.grouping.assignment[x]]
        n = self.aux.heavy_size
        fires = (rank >= 0) & (zeta < n)
        value = np.zeros(len(x), dtype=np.int64)
        value[fires] = self.pairing.table[rank[fires], zeta[fires]]
        return np.where(fires & (value <= self.m), value, 0)

    def to_dict(self) -> dict:
        return {
            "decoder_kind": self.decoder_kind,
            "alpha": self.alpha,
            "m": self.m,
            "p_star": self.p_star.probs.tolist(),
            "alphabet_size": self.p_star.alphabet.size,
            "length": self.p_star.length,
            "phi": _one_hot(self.grouping.assignment, self.grouping.group_count).tolist(),
            "assignment": self.grouping.assignment.tolist(),
            "group_pmf": self.grouping.group_pmf.tolist(),
            "latin_square": self.pairing.table.tolist(),
            "square_groups": list(self.square_groups),
            "aux_sizes": {
                "heavy": self.aux.heavy_size,
                "light": self.aux.light_size,
                "tilde": 1,
            },
            "light_groups": list(self.aux.light_groups),
            "embedding": {
                str(j): [[int(a), int(b), float(c)] for a, b, c in zip(*self.group_embedding[j])]
                for j in self.messages()
            },
            "residual_error": self.residual_error,
            "grouping_mode": self.grouping.mode,
        }

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1))


def _one_hot(assignment: np.ndarray, groups: int) -> np.ndarray:
    table = np.zeros((groups, len(assignment)))
    table[assignment, np.arange(len(assignment))] = 1.0
    return table


def _group_embedding(
    grouping: DeterministicGrouping,
    aux: AuxiliaryAlphabet,
    square_groups: tuple[int, ...],
    square: LatinSquare,
    message: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    t = grouping.threshold
    rank = {k: r for r, k in enumerate(square_groups)}
    pmf = grouping.group_pmf
    sent: dict[int, list[tuple[int, float]]] = {}
    for source, target, mass in grouping.plan.transfers:
        sent.setdefault(source, []).append((target, mass))

    def column(group: int) -> int:
        # the column where the group's row of the square shows this message
        return square.column_for(rank[group], message)

    gs, zs, ps = [], [], []
    for k in range(grouping.group_count):
        mass = pmf[k]
        leftover_symbol = aux.tilde if k in rank else aux.light_symbol(k)
        if mass <= 0:
            gs.append(k), zs.append(leftover_symbol), ps.append(1.0)
            continue
        row_total = []
        if k in rank:
            gs.append(k), zs.append(column(k)), ps.append(min(mass, t) / mass)
            row_total.append(min(mass, t) / mass)
        for target, amount in sent.get(k, []):
            gs.append(k), zs.append(column(target)), ps.append(amount / mass)
            row_total.append(amount / mass)
        gs.append(k), zs.append(leftover_symbol), ps.append(max(0.0, 1.0 - fsum(row_total)))
    return sparse_rows(gs, zs, ps)


def build_deterministic_scheme(
    grouping: DeterministicGrouping, p_star: SequencePmf, alpha: float, m: int
) -> DeterministicScheme:
    """Assemble the square, auxiliary alphabet and embedding for a grouping."""
    t = alpha / m
    if abs(grouping.threshold - t) > 1e-15:
        raise ConfigError("grouping was built for a different alpha/m")
    if len(grouping.assignment) != p_star.size:
        raise ConfigError("grouping does not cover the sequence space")
    grouping.validate(p_star.probs, m)
    dropped = set(grouping.plan.excluded)
    square_groups = tuple(k for k in range(grouping.group_count) if k not in dropped)
    aux = AuxiliaryAlphabet(len(square_groups), tuple(sorted(dropped)))
    square = LatinSquare.cyclic(len(square_groups))
    embedding = {
        j: _group_embedding(grouping, aux, square_groups, square, j) for j in range(1, m + 1)
    }
    singles = set(grouping.singleton_heavy(p_star.probs))
    merged_overflow = fsum(
        [grouping.group_pmf[k] - t for k in grouping.heavy_groups if k not in singles]
    )
    residual = merged_overflow + grouping.plan.excluded_mass
    return DeterministicScheme(
        alpha,
        m,
        p_star,
        grouping,
        aux,
        square,
        square_groups,
        embedding,
        residual,
    )


def evaluate_deterministic_exact(scheme: DeterministicScheme) -> ExactEvaluation:
    return evaluate_exact(scheme)


def decode_deterministic(scheme: DeterministicScheme, x: int, zeta: int) -> int:
    if not 0 <= x < scheme.p_star.size:
        raise ConfigError(f"sequence index {x} out of range")
    if not 0 <= zeta < scheme.aux_size:
        raise ConfigError(f"auxiliary symbol {zeta} out of range")
    return int(scheme.decode_many(np.array([x]), np.array([zeta]))[0])


def residual_error(scheme: DeterministicScheme) -> float:
    """Overflow of merged heavy groups plus the mass of groups left out of the square."""
    return scheme.residual_error


def load_deterministic_scheme(data: dict) -> DeterministicScheme:
    if data.get("decoder_kind") != "deterministic":
        raise ConfigError("scheme file is not a deterministic scheme")
    probs = np.asarray(data["p_star"], dtype=float)
    p_star = SequencePmf(Alphabet(int(data["alphabet_size"])), int(data["length"]), probs)
    alpha, m = float(data["alpha"]), int(data["m"])
    grouping = DeterministicGrouping.from_assignment(
        data["assignment"], probs, alpha / m, data.get("grouping_mode", "given")
    )
    table = np.asarray(data["latin_square"], dtype=np.int64).reshape(
        len(data["square_groups"]), -1
    )
    embedding = {}
    for key, rows in data["embedding"].items():
        arr = np.asarray(rows, dtype=float).reshape(-1, 3)
        embedding[int(key)] = sparse_rows(arr[:, 0], arr[:, 1], arr[:, 2])
    return DeterministicScheme(
        alpha,
        m,
        p_star,
        grouping,
        AuxiliaryAlphabet(len(data["square_groups"]), tuple(data["light_groups"])),
        LatinSquare(len(data["square_groups"]), table),
        tuple(data["square_groups"]),
        embedding,
        float(data["residual_error"]),
    )
