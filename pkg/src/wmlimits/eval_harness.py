"""Independent checks: Monte Carlo simulation, exact false alarm, secrecy audit, grid oracle.

Randomness contract: a 64-bit seed feeds ``numpy.random.SeedSequence``.
The sequence spawns one child per message plus one for the no-watermark
run, and each child drives a ``Philox`` counter-based generator. Each trial
consumes three uniforms, in this order: the sequence draw, the auxiliary
draw, and the decoder draw.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import stats

from wmlimits.bounds import DistortionKind, excess_mass
from wmlimits.errors import ConfigError
from wmlimits.process_models import SequencePmf, kl_divergence
from wmlimits.scheme_tables import (
    SchemeTables,
    evaluate_exact,
    fsum,
    null_zeta_law,
    sequence_law,
    zeta_law,
)

SECRECY_TOLERANCE = 1e-12
CI_CONTAINMENT_SLACK = 1e-12


def _inverse_cdf(probs: np.ndarray, draws: np.ndarray) -> np.ndarray:
    cumulative = np.cumsum(probs)
    index = np.searchsorted(cumulative, draws * cumulative[-1], side="right")
    return np.minimum(index, len(probs) - 1)


def sample_watermarked(
    scheme: SchemeTables,
    message: int,
    rng: np.random.Generator,
    size: Optional[int] = None,
):
    """Draw ``(x, zeta)`` under ``message``: ``x ~ P*``, then ``zeta ~ P(. | x, message)``."""
    if message not in scheme.messages():
        raise ConfigError(f"message must lie in [1, {scheme.m}], got {message}")
    count = 1 if size is None else int(size)
    draws = rng.random((2, count))
    x, zeta = _sample_pairs(scheme, message, draws[0], draws[1])
    if size is None:
        return int(x[0]), int(zeta[0])
    return x, zeta


def _sample_pairs(scheme: SchemeTables, message: int, u_x: np.ndarray, u_zeta: np.ndarray):
    x = _inverse_cdf(scheme.p_star.probs, u_x)
    ex, ez, ep = scheme.embedding_entries(message)
    cumulative = np.cumsum(ep)
    start = np.searchsorted(ex, x, side="left")
    stop = np.searchsorted(ex, x, side="right")
    if np.any(stop <= start):
        raise ConfigError("a sampled sequence has an empty embedding row")
    base = np.where(start > 0, cumulative[np.maximum(start - 1, 0)], 0.0)
    top = cumulative[stop - 1]
    target = base + u_zeta * (top - base)
    index = np.searchsorted(cumulative, target, side="right")
    index = np.clip(index, start, stop - 1)
    return x, ez[index]


@dataclass(frozen=True)
class Estimate:
    estimate: float
    half_width: float
    lower: float
    upper: float
    analytic: float

    @property
    def contains_analytic(self) -> bool:
        return self.lower - CI_CONTAINMENT_SLACK <= self.analytic <= self.upper + CI_CONTAINMENT_SLACK


def binomial_interval(
    successes: int, trials: int, confidence: float, method: str
) -> tuple[float, float, float]:
    """``(half_width, lower, upper)`` for a binomial proportion."""
    p_hat = successes / trials
    if method == "normal":
        z = stats.norm.ppf(0.5 + confidence / 2)
        half = float(z * math.sqrt(p_hat * (1 - p_hat) / trials))
        return half, max(0.0, p_hat - half), min(1.0, p_hat + half)
    if method == "clopper-pearson":
        ci = stats.binomtest(successes, trials).proportion_ci(confidence, method="exact")
        lower, upper = float(ci.low), float(ci.high)
        return max(p_hat - lower, upper - p_hat), lower, upper
    raise ConfigError(f"unknown interval method {method!r}; use 'normal' or 'clopper-pearson'")


@dataclass(frozen=True)
class SimulationReport:
    trials: int
    seed: int
    confidence: float
    interval_method: str
    beta_per_message: tuple[Estimate, ...]
    false_alarm_under_q: Estimate
    discrepancies: tuple[str, ...]

    @property
    def beta_hat_per_message(self) -> list[float]:
        return [e.estimate for e in self.beta_per_message]

    @property
    def analytic_beta(self) -> list[float]:
        return [e.analytic for e in self.beta_per_message]

    @property
    def consistent(self) -> bool:
        return not self.discrepancies

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "confidence": self.confidence,
            "interval_method": self.interval_method,
            "beta_per_message": [asdict(e) for e in self.beta_per_message],
            "fa_under_q": asdict(self.false_alarm_under_q),
            "discrepancies": list(self.discrepancies),
            "consistent": self.consistent,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1) + "\n"

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_json())


def monte_carlo_errors(
    scheme: SchemeTables,
    trials: int,
    seed: int,
    confidence: float = 0.95,
    interval_method: str = "normal",
    q: Optional[SequencePmf] = None,
) -> SimulationReport:
    """Estimate every message error and the false alarm under ``q`` (default ``P*``)."""
    if int(trials) != trials or trials < 1:
        raise ConfigError(f"trials must be a positive integer, got {trials!r}")
    if int(seed) != seed or not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed!r}")
    if not 0 < confidence < 1:
        raise ConfigError(f"confidence must lie in (0, 1), got {confidence}")
    children = np.random.SeedSequence(int(seed)).spawn(scheme.m + 1)
    exact = evaluate_exact(scheme)
    estimates = []
    discrepancies = []
    for j in scheme.messages():
        rng = np.random.Generator(np.random.Philox(children[j - 1]))
        draws = rng.random((3, trials))
        x, zeta = _sample_pairs(scheme, j, draws[0], draws[1])
        errors = int(np.count_nonzero(scheme.decode_many(x, zeta, draws[2]) != j))
        half, lower, upper = binomial_interval(errors, trials, confidence, interval_method)
        est = Estimate(errors / trials, half, lower, upper, exact.beta_per_message[j - 1])
        estimates.append(est)
        if not est.contains_analytic:
            discrepancies.append(
                f"message {j}: analytic error {est.analytic:.6f} outside [{lower:.6f}, {upper:.6f}]"
            )
    null_law = q if q is not None else scheme.p_star
    rng = np.random.Generator(np.random.Philox(children[scheme.m]))
    draws = rng.random((3, trials))
    x = _inverse_cdf(null_law.probs, draws[0])
    marginal = null_zeta_law(scheme)
    zeta = _inverse_cdf(marginal, draws[1])
    alarms = int(np.count_nonzero(scheme.decode_many(x, zeta, draws[2]) != 0))
    analytic_fa = fsum(null_law.probs * scheme.false_alarm_by_sequence())
    half, lower, upper = binomial_interval(alarms, trials, confidence, interval_method)
    fa = Estimate(alarms / trials, half, lower, upper, analytic_fa)
    if not fa.contains_analytic:
        discrepancies.append(
            f"false alarm: analytic {analytic_fa:.6f} outside [{lower:.6f}, {upper:.6f}]"
        )
    return SimulationReport(
        int(trials), int(seed), confidence, interval_method, tuple(estimates), fa,
        tuple(discrepancies),
    )


def worst_case_false_alarm_exact(scheme: SchemeTables) -> float:
    """Largest false alarm over point-mass sources; every source is a mixture of these."""
    return float(np.max(scheme.false_alarm_by_sequence()))


@dataclass(frozen=True)
class SecrecyAudit:
    max_zeta_gap: float
    max_x_gap: float
    tolerance: float = SECRECY_TOLERANCE

    @property
    def passed(self) -> bool:
        return self.max_zeta_gap <= self.tolerance and self.max_x_gap <= self.tolerance

    def __bool__(self) -> bool:
        return self.passed


def secrecy_audit(scheme: SchemeTables, tolerance: float = SECRECY_TOLERANCE) -> SecrecyAudit:
    """Sup-norm distance of each message's ``zeta`` law from message 1's, and of ``x`` laws from ``P*``."""
    reference = zeta_law(scheme, 1)
    zeta_gap = 0.0
    x_gap = 0.0
    for j in scheme.messages():
        zeta_gap = max(zeta_gap, float(np.max(np.abs(zeta_law(scheme, j) - reference))))
        x_gap = max(x_gap, float(np.max(np.abs(sequence_law(scheme, j) - scheme.p_star.probs))))
    return SecrecyAudit(zeta_gap, x_gap, tolerance)


@dataclass(eq=False)
class PerturbedScheme(SchemeTables):
    """Wraps a scheme and moves ``amount`` of one embedding row to a different symbol."""

    base: SchemeTables
    message: int
    sequence: int
    amount: float
    decoder_kind: str = field(init=False, default="perturbed")

    def __post_init__(self) -> None:
        self.alpha, self.m, self.p_star = self.base.alpha, self.base.m, self.base.p_star
        self.aux_size = self.base.aux_size

    def embedding_entries(self, message: int):
        x, zeta, prob = self.base.embedding_entries(message)
        if message != self.message:
            return x, zeta, prob
        rows = np.flatnonzero(x == self.sequence)
        donor = rows[np.argmax(prob[rows])]
        moved = min(self.amount, prob[donor])
        target = (zeta[donor] + 1) % self.aux_size
        prob = prob.copy()
        prob[donor] -= moved
        x = np.append(x, self.sequence)
        zeta = np.append(zeta, target)
        prob = np.append(prob, moved)
        order = np.lexsort((zeta, x))
        return x[order], zeta[order], prob[order]

    def decode_many(self, x, zeta, draws=None):
        return self.base.decode_many(x, zeta, draws)


def perturb_embedding(
    scheme: SchemeTables, message: int, sequence: int, amount: float = 0.01
) -> PerturbedScheme:
    return PerturbedScheme(scheme, message, sequence, amount)


@dataclass(eq=False)
class ConstantDecoderScheme(SchemeTables):
    """Keeps a scheme's embedding but answers the same message for every input."""

    base: SchemeTables
    answer: int
    decoder_kind: str = field(init=False, default="constant")

    def __post_init__(self) -> None:
        self.alpha, self.m, self.p_star = self.base.alpha, self.base.m, self.base.p_star
        self.aux_size = self.base.aux_size

    def embedding_entries(self, message: int):
        return self.base.embedding_entries(message)

    def decode_many(self, x, zeta, draws=None):
        return np.full(len(np.asarray(x)), self.answer, dtype=np.int64)


def with_constant_decoder(scheme: SchemeTables, answer: int) -> ConstantDecoderScheme:
    return ConstantDecoderScheme(scheme, answer)


GRID_SUPPORT_CAP = 6
_GRID_STEPS = (0.1, 0.02, 0.004)
_GRID_WINDOW = 5
_GRID_KEEP = 4


def _lattice_offsets(dims: int, radius: int) -> np.ndarray:
    """Integer vectors in ``[-radius, radius]^dims`` with zero sum."""
    free = np.array(list(itertools.product(range(-radius, radius + 1), repeat=dims - 1)))
    if dims == 1:
        return np.zeros((1, 1), dtype=np.int64)
    last = -free.sum(axis=1, keepdims=True)
    return np.hstack([free, last])


def brute_force_bound_oracle(
    q: SequencePmf,
    threshold: float,
    budget: float,
    kind=DistortionKind.TV,
    resolution: float = 0.001,
) -> float:
    """Grid minimum of ``sum (P - t)_+`` over the distortion ball.

    The grid is the lattice ``Q + h Z^n`` restricted to the simplex (so it
    always contains ``Q``). It is searched coarse to fine: steps 0.1, 0.02
    and 0.004, then ``resolution``, each level scanning a window of five steps
    around the best few points of the level above. The objective is convex,
    which is what makes the refinement reliable, but the search is not a proof
    of grid optimality. The return value is an upper bound on the true minimum.
    """
    kind = DistortionKind.parse(kind)
    support = np.flatnonzero(q.probs > 0) if kind is DistortionKind.KL else np.arange(q.size)
    if len(support) > GRID_SUPPORT_CAP:
        raise ConfigError(f"grid oracle supports at most {GRID_SUPPORT_CAP} cells, got {len(support)}")
    base = q.probs[support]
    dims = len(support)
    if dims == 1:
        return excess_mass(base, threshold)

    def distortion(points: np.ndarray) -> np.ndarray:
        if kind is DistortionKind.TV:
            return 0.5 * np.abs(points - base).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(points > 0, points * np.log(points / base), 0.0)
        return terms.sum(axis=1)

    def objective(points: np.ndarray) -> np.ndarray:
        return np.maximum(points - threshold, 0.0).sum(axis=1)

    steps = [s for s in _GRID_STEPS if s > resolution] + [resolution]
    centers = base[None, :]
    best_value = excess_mass(base, threshold)
    for step in steps:
        radius = _GRID_WINDOW if step != steps[0] else int(math.ceil(1.0 / step))
        offsets = _lattice_offsets(dims, radius) * step
        found = []
        for center in centers:
            points = center + offsets
            feasible = np.all(points >= -1e-15, axis=1) & (distortion(np.maximum(points, 0)) <= budget + 1e-12)
            points = np.maximum(points[feasible], 0.0)
            if len(points):
                values = objective(points)
                order = np.argsort(values, kind="stable")[:_GRID_KEEP]
                found.extend((float(values[i]), tuple(points[i])) for i in order)
        found.sort()
        if found:
            best_value = min(best_value, found[0][0])
            centers = np.array([p for _, p in found[:_GRID_KEEP]])
    return best_value
