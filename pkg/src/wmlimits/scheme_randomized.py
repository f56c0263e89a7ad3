"""Scheme with a randomized-decoder interface that attains the converse benchmark.

Construction ("cyclic arcs"), for a watermarked law ``P*``, ``t = alpha/m``:

* each sequence ``x`` owns an arc of length ``c(x) = min(P*(x), t)``; arcs are
  laid end to end on a circle of circumference ``A = sum c = 1 - LB`` where
  ``LB = sum (P* - t)_+`` is the benchmark;
* under message ``j`` the side information ``zeta`` is a uniform point of the
  arc of ``x`` rotated by ``(j-1) t`` with probability ``c(x)/P*(x)``, and the
  overflow symbol ``zeta~`` otherwise;
* the decoder answers ``j`` when ``zeta`` lies in the window
  ``[s_x + (j-1) t, s_x + j t)`` (mod ``A``) for some ``j <= m``, else 0.

Rotating a tiling of the circle is still a tiling, so the law of ``zeta`` is
the same (arc length) for every message. Each ``x`` sees ``m`` windows of
length ``t``, so its false-alarm probability is exactly ``m t = alpha``; the
windows do not overlap because ``m <= m*`` means ``A >= alpha``. A message is
missed only through ``zeta~``, giving an error of exactly ``LB``.

The circle is discretized into atoms cut at every window endpoint, which makes
``zeta`` a finite symbol. When every arc is empty or full (length ``t``) the
windows line up with the arcs and the decoder table is a cyclic Latin square;
:meth:`ArcPairing.as_latin_square` exposes that case.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

from wmlimits.bounds import COMPARISON_SLACK, excess_mass, message_count_admissible
from wmlimits.errors import AuditError, ConfigError, InfeasibleError
from wmlimits.process_models import Alphabet, SequencePmf
from wmlimits.scheme_tables import (
    ExactEvaluation,
    SchemeTables,
    evaluate_exact,
    fsum,
    sparse_rows,
)

# breakpoints closer than this (relative to the circumference) are merged
BREAKPOINT_MERGE = 1e-14


@dataclass(frozen=True, eq=False)
class LatinSquare:
    """``table[k, z]`` in ``1..order``; every row and column is a permutation."""

    order: int
    table: np.ndarray

    @classmethod
    def cyclic(cls, order: int) -> "LatinSquare":
        ranks = np.arange(order)
        return cls(order, (ranks[:, None] + ranks[None, :]) % order + 1)

    def __call__(self, row: int, column: int) -> int:
        return int(self.table[row, column])

    def is_latin(self) -> bool:
        table = np.asarray(self.table)
        if table.shape != (self.order, self.order):
            return False
        target = np.arange(1, self.order + 1)
        rows_ok = all(np.array_equal(np.sort(row), target) for row in table)
        cols_ok = all(np.array_equal(np.sort(col), target) for col in table.T)
        return rows_ok and cols_ok

    def column_for(self, row: int, value: int) -> int:
        """The unique column where ``row`` shows ``value``."""
        return int(np.flatnonzero(self.table[row] == value)[0])


@dataclass(frozen=True, eq=False)
class ArcPairing:
    """Arc layout on the circle and the atoms it induces."""

    circumference: float
    step: float
    m: int
    starts: np.ndarray
    lengths: np.ndarray
    breakpoints: np.ndarray

    @property
    def atom_count(self) -> int:
        return len(self.breakpoints)

    @property
    def atom_lengths(self) -> np.ndarray:
        ends = np.append(self.breakpoints[1:], self.circumference)
        return ends - self.breakpoints

    @property
    def atom_midpoints(self) -> np.ndarray:
        return self.breakpoints + 0.5 * self.atom_lengths

    def window_message(self, x: np.ndarray, atom: np.ndarray) -> np.ndarray:
        """Message whose decode window for ``x`` contains ``atom``; 0 if none."""
        rel = np.mod(self.atom_midpoints[atom] - self.starts[x], self.circumference)
        slot = np.floor(rel / self.step).astype(np.int64)
        return np.where(slot < self.m, slot + 1, 0)

    def as_latin_square(self) -> LatinSquare | None:
        """Latin-square form of the decoder when every arc is empty or exactly ``t`` long."""
        full = np.flatnonzero(self.lengths > 0)
        if not np.allclose(self.lengths[full], self.step, rtol=0, atol=1e-15):
            return None
        order = len(full)
        if self.atom_count != order:
            return None
        table = np.zeros((order, order), dtype=np.int64)
        for row, x in enumerate(full):
            for atom in range(order):
                rel = (self.atom_midpoints[atom] - self.starts[x]) % self.circumference
                table[row, atom] = int(rel // self.step) + 1
        return LatinSquare(order, table)

    def to_dict(self) -> dict:
        square = self.as_latin_square()
        return {
            "circumference": self.circumference,
            "step": self.step,
            "m": self.m,
            "starts": self.starts.tolist(),
            "lengths": self.lengths.tolist(),
            "breakpoints": self.breakpoints.tolist(),
            "table": None if square is None else square.table.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ArcPairing":
        return cls(
            float(data["circumference"]),
            float(data["step"]),
            int(data["m"]),
            np.asarray(data["starts"], dtype=float),
            np.asarray(data["lengths"], dtype=float),
            np.asarray(data["breakpoints"], dtype=float),
        )


def _layout(p_star: np.ndarray, step: float, m: int) -> ArcPairing:
    lengths = np.minimum(p_star, step)
    starts = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    circumference = fsum(lengths)
    points = (starts[:, None] + step * np.arange(m + 1)[None, :]).ravel()
    points = np.mod(points, circumference)
    points = np.sort(np.append(points, 0.0))
    tol = BREAKPOINT_MERGE * circumference
    kept = [0.0]
    for point in points[1:]:
        if point - kept[-1] > tol and circumference - point > tol:
            kept.append(float(point))
    return ArcPairing(circumference, step, m, starts, lengths, np.array(kept))


@dataclass(frozen=True, eq=False)
class StochasticGrouping:
    """Grouping kernel ``phi(k | x)`` stored sparsely, with the induced group law."""

    kernel_x: np.ndarray
    kernel_group: np.ndarray
    kernel_prob: np.ndarray
    group_pmf: np.ndarray

    @classmethod
    def identity(cls, p_star: np.ndarray) -> "StochasticGrouping":
        n = len(p_star)
        idx = np.arange(n)
        return cls(idx, idx.copy(), np.ones(n), np.asarray(p_star, dtype=float).copy())

    @property
    def group_count(self) -> int:
        return len(self.group_pmf)

    def dense_kernel(self, sequence_count: int) -> np.ndarray:
        table = np.zeros((self.group_count, sequence_count))
        table[self.kernel_group, self.kernel_x] = self.kernel_prob
        return table

    def row(self, x: int) -> tuple[np.ndarray, np.ndarray]:
        mask = self.kernel_x == x
        return self.kernel_group[mask], self.kernel_prob[mask]


@dataclass(eq=False)
class RandomizedScheme(SchemeTables):
    alpha: float
    m: int
    p_star: SequencePmf
    grouping: StochasticGrouping
    pairing: ArcPairing
    embedding: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = field(repr=False)
    decoder_kind: str = "randomized"

    @property
    def threshold(self) -> float:
        return self.alpha / self.m

    @property
    def aux_size(self) -> int:
        return self.pairing.atom_count + 1

    @property
    def tilde(self) -> int:
        return self.pairing.atom_count

    @property
    def benchmark(self) -> float:
        return excess_mass(self.p_star.probs, self.threshold)

    def embedding_entries(self, message: int):
        return self.embedding[message]

    def decode_many(self, x, zeta, draws=None) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        zeta = np.asarray(zeta, dtype=np.int64)
        # the kernel is one-hot, so the sampled group is the sequence itself
        group = x
        out = np.zeros(len(x), dtype=np.int64)
        on_circle = zeta != self.tilde
        out[on_circle] = self.pairing.window_message(group[on_circle], zeta[on_circle])
        return out

    def to_dict(self) -> dict:
        n = self.p_star.size
        return {
            "decoder_kind": self.decoder_kind,
            "alpha": self.alpha,
            "m": self.m,
            "p_star": self.p_star.probs.tolist(),
            "alphabet_size": self.p_star.alphabet.size,
            "length": self.p_star.length,
            "phi": self.grouping.dense_kernel(n).tolist(),
            "group_pmf": self.grouping.group_pmf.tolist(),
            "latin_square": self.pairing.to_dict(),
            "embedding": {
                str(j): [[int(a), int(b), float(c)] for a, b, c in zip(*self.embedding[j])]
                for j in self.messages()
            },
        }

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=1))


def _embedding_for_message(
    p_star: np.ndarray, pairing: ArcPairing, message: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mids = pairing.atom_midpoints
    rel = np.mod(mids - (message - 1) * pairing.step, pairing.circumference)
    owner = np.searchsorted(pairing.starts, rel, side="right") - 1
    clamped = np.maximum(owner, 0)
    inside = (owner >= 0) & (rel - pairing.starts[clamped] < pairing.lengths[clamped])
    if not np.all(inside):
        raise AuditError("arc rotation left part of the circle uncovered")
    atoms = np.arange(pairing.atom_count)
    safe = np.where(p_star[owner] > 0, p_star[owner], 1.0)
    circle_prob = pairing.atom_lengths / safe
    n = len(p_star)
    tilde = pairing.atom_count
    overflow = np.where(p_star > 0, 1.0 - pairing.lengths / np.where(p_star > 0, p_star, 1.0), 1.0)
    overflow = np.maximum(overflow, 0.0)
    xs = np.concatenate([owner, np.arange(n)])
    zs = np.concatenate([atoms, np.full(n, tilde)])
    ps = np.concatenate([circle_prob, overflow])
    return sparse_rows(xs, zs, ps)


def build_randomized_scheme(p_star: SequencePmf, alpha: float, m: int) -> RandomizedScheme:
    """Build the cyclic-arc scheme for ``P* = p_star`` and ``m`` messages.

    Raises :class:`InfeasibleError` when ``m`` exceeds the largest admissible
    message count of ``p_star`` (the benchmark would exceed ``1 - alpha``).
    """
    if not (0.0 < alpha <= 1.0):
        raise ConfigError(f"alpha must lie in (0, 1], got {alpha}")
    if int(m) != m or not 1 <= m <= p_star.size:
        raise ConfigError(f"message count must be an integer in [1, {p_star.size}], got {m}")
    if not message_count_admissible(p_star, alpha, 0.0, m):
        point_mass = int(np.count_nonzero(p_star.probs)) == 1
        detail = " (a point-mass law supports only m = 1)" if point_mass else ""
        raise InfeasibleError(
            f"m = {m} exceeds the maximum admissible message count for alpha = {alpha}{detail}"
        )
    step = alpha / m
    probs = p_star.probs
    pairing = _layout(probs, step, m)
    if pairing.circumference < alpha - COMPARISON_SLACK:
        raise InfeasibleError("decode windows would overlap: 1 - benchmark < alpha")
    embedding = {j: _embedding_for_message(probs, pairing, j) for j in range(1, m + 1)}
    grouping = StochasticGrouping.identity(probs)
    return RandomizedScheme(alpha, m, p_star, grouping, pairing, embedding)


def evaluate_randomized_exact(scheme: RandomizedScheme) -> ExactEvaluation:
    """Per-message error, its average, and worst-case false alarm, all from the tables."""
    return evaluate_exact(scheme)


def decode_randomized(scheme: RandomizedScheme, x: int, zeta: int, randomness: float) -> int:
    """Two-stage decode: draw a group from ``phi(. | x)``, then read the window table."""
    if not 0 <= x < scheme.p_star.size:
        raise ConfigError(f"sequence index {x} out of range")
    if not 0 <= zeta < scheme.aux_size:
        raise ConfigError(f"auxiliary symbol {zeta} out of range")
    if not 0.0 <= randomness < 1.0:
        raise ConfigError(f"randomness must lie in [0, 1), got {randomness}")
    groups, probs = scheme.grouping.row(x)
    cumulative = np.cumsum(probs)
    pick = min(int(np.searchsorted(cumulative, randomness, side="right")), len(groups) - 1)
    group = int(groups[pick])
    if zeta == scheme.tilde:
        return 0
    return int(scheme.pairing.window_message(np.array([group]), np.array([zeta]))[0])


def load_randomized_scheme(data: dict) -> RandomizedScheme:
    if data.get("decoder_kind") != "randomized":
        raise ConfigError("scheme file is not a randomized scheme")
    probs = np.asarray(data["p_star"], dtype=float)
    p_star = SequencePmf(Alphabet(int(data["alphabet_size"])), int(data["length"]), probs)
    phi = np.asarray(data["phi"], dtype=float)
    groups, xs = np.nonzero(phi)
    grouping = StochasticGrouping(xs, groups, phi[groups, xs], np.asarray(data["group_pmf"]))
    embedding = {}
    for key, rows in data["embedding"].items():
        arr = np.asarray(rows, dtype=float).reshape(-1, 3)
        embedding[int(key)] = sparse_rows(arr[:, 0], arr[:, 1], arr[:, 2])
    return RandomizedScheme(
        float(data["alpha"]),
        int(data["m"]),
        p_star,
        grouping,
        ArcPairing.from_dict(data["latin_square"]),
        embedding,
    )
