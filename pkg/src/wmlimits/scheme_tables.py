"""Table view shared by every scheme family, plus exact evaluators over it.

A scheme exposes, for each message ``j``, the sparse embedding kernel
``P(zeta | x, j)`` as parallel arrays ``(x, zeta, prob)`` and a vectorized
decoder ``(x, zeta) -> message`` (0 means "no watermark"). Everything the
evaluation layer needs (error per message, laws of ``zeta`` and ``x`` given
the message, false alarm per sequence) is computed from those two views.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from wmlimits.process_models import SequencePmf


class SchemeTables:
    """Mixin contract. Subclasses set ``alpha``, ``m``, ``p_star``, ``aux_size``."""

    alpha: float
    m: int
    p_star: SequencePmf
    aux_size: int
    decoder_kind: str = "deterministic"

    def embedding_entries(self, message: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        raise NotImplementedError

    def decode_many(self, x: np.ndarray, zeta: np.ndarray, draws=None) -> np.ndarray:
        raise NotImplementedError

    def messages(self) -> range:
        return range(1, self.m + 1)

    def false_alarm_by_sequence(self) -> np.ndarray:
        return false_alarm_by_sequence(self)


def fsum(values) -> float:
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def zeta_law(scheme: SchemeTables, message: int) -> np.ndarray:
    x, zeta, prob = scheme.embedding_entries(message)
    return np.bincount(zeta, weights=scheme.p_star.probs[x] * prob, minlength=scheme.aux_size)


def sequence_law(scheme: SchemeTables, message: int) -> np.ndarray:
    """Law of ``x`` under ``message``: ``P*(x)`` times the embedding row total."""
    x, _, prob = scheme.embedding_entries(message)
    row_total = np.bincount(x, weights=prob, minlength=scheme.p_star.size)
    return scheme.p_star.probs * row_total


def null_zeta_law(scheme: SchemeTables) -> np.ndarray:
    """Law of ``zeta`` with the message averaged out; the H0 law of the side information."""
    laws = np.array([zeta_law(scheme, j) for j in scheme.messages()])
    return laws.mean(axis=0)


def message_error(scheme: SchemeTables, message: int) -> float:
    """``1 - P(decode = message | message)`` summed from the tables."""
    x, zeta, prob = scheme.embedding_entries(message)
    hit = scheme.decode_many(x, zeta) == message
    return max(0.0, 1.0 - fsum(scheme.p_star.probs[x[hit]] * prob[hit]))


def false_alarm_by_sequence(scheme: SchemeTables, zeta_marginal=None) -> np.ndarray:
    """``sum_zeta P(zeta) 1{decode(x, zeta) != 0}`` for every sequence ``x``."""
    marginal = null_zeta_law(scheme) if zeta_marginal is None else np.asarray(zeta_marginal)
    support = np.flatnonzero(marginal > 0)
    weights = marginal[support]
    out = np.empty(scheme.p_star.size)
    for x in range(scheme.p_star.size):
        fires = scheme.decode_many(np.full(len(support), x), support) != 0
        out[x] = fsum(weights[fires])
    return out


@dataclass(frozen=True)
class ExactEvaluation:
    beta_per_message: tuple[float, ...]
    avg_beta: float
    worst_case_false_alarm: float

    def as_dict(self) -> dict:
        return {
            "beta_per_message": list(self.beta_per_message),
            "avg_beta": self.avg_beta,
            "worst_case_false_alarm": self.worst_case_false_alarm,
        }


def evaluate_exact(scheme: SchemeTables) -> ExactEvaluation:
    betas = tuple(message_error(scheme, j) for j in scheme.messages())
    worst = float(np.max(scheme.false_alarm_by_sequence()))
    return ExactEvaluation(betas, fsum(betas) / len(betas), worst)


def sparse_rows(
    x: list | np.ndarray, zeta: list | np.ndarray, prob: list | np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pack entries sorted by ``(x, zeta)`` with zero-probability entries dropped."""
    x = np.asarray(x, dtype=np.int64)
    zeta = np.asarray(zeta, dtype=np.int64)
    prob = np.asarray(prob, dtype=float)
    keep = prob > 0
    x, zeta, prob = x[keep], zeta[keep], prob[keep]
    order = np.lexsort((zeta, x))
    return x[order], zeta[order], prob[order]
