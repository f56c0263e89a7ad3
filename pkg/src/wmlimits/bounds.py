"""Converse benchmark for the average detection error.

The benchmark is ``min over P with D(P, Q) <= d of sum_x (P(x) - alpha/m)_+``.
Under total variation it has a closed form and an explicit minimizer built by
:mod:`wmlimits.tv_transport`. Under KL it is solved numerically along the
exact optimality path described in :func:`solve_kl_ball`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from wmlimits.errors import ConfigError, SolverError
from wmlimits.process_models import SequencePmf, kl_divergence, tv_distance
from wmlimits.tv_transport import build_optimal_pmf, surplus_and_deficit

# Slack applied when comparing a bound against 1 - alpha, and in the
# light-mass predicate, so that exact ties survive floating-point rounding.
COMPARISON_SLACK = 1e-12
KL_TOLERANCE = 1e-8
KL_MAX_ITERATIONS = 10_000


class DistortionKind(str, enum.Enum):
    TV = "tv"
    KL = "kl"

    @classmethod
    def parse(cls, value) -> "DistortionKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError as exc:
            raise ConfigError(f"unsupported distortion kind {value!r}; use 'tv' or 'kl'") from exc


def _check_alpha(alpha: float, allow_one: bool) -> None:
    upper_ok = alpha <= 1.0 if allow_one else alpha < 1.0
    if not (0.0 < alpha and upper_ok):
        interval = "(0, 1]" if allow_one else "(0, 1)"
        raise ConfigError(f"alpha must lie in {interval}, got {alpha}")


def _check_budget(budget: float) -> None:
    if not (budget >= 0 and math.isfinite(budget)):
        raise ConfigError(f"distortion budget must be finite and nonnegative, got {budget}")


@dataclass(frozen=True)
class BoundQuery:
    q: SequencePmf
    alpha: float
    distortion_budget: float
    message_count: int
    distortion_kind: DistortionKind = DistortionKind.TV

    def __post_init__(self) -> None:
        _check_alpha(self.alpha, allow_one=False)
        _check_budget(self.distortion_budget)
        if int(self.message_count) != self.message_count or not (
            1 <= self.message_count <= self.q.size
        ):
            raise ConfigError(
                f"message count must be an integer in [1, {self.q.size}], got {self.message_count}"
            )
        object.__setattr__(self, "distortion_kind", DistortionKind.parse(self.distortion_kind))

    @property
    def threshold(self) -> float:
        return self.alpha / self.message_count


@dataclass(frozen=True)
class BoundResult:
    value: float
    optimizer: SequencePmf
    threshold: float
    distortion_achieved: float
    solver_iterations: int = 0

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "threshold": self.threshold,
            "distortion_achieved": self.distortion_achieved,
            "solver_iterations": self.solver_iterations,
        }


def excess_mass(probs, threshold: float) -> float:
    """``sum (p - threshold)_+`` summed exactly; cells equal to the threshold add 0."""
    return surplus_and_deficit(np.asarray(probs, dtype=float), threshold)[0]


def tv_closed_form(q: SequencePmf, threshold: float, budget: float) -> float:
    """``(E - min(d, S))_+`` with ``E``, ``S`` the surplus and deficit at ``threshold``."""
    _check_budget(budget)
    surplus, deficit = surplus_and_deficit(q.probs, threshold)
    return max(surplus - min(float(budget), deficit), 0.0)


def _clip_law(q: np.ndarray, threshold: float, ratio: float, scale: float) -> np.ndarray:
    return np.minimum(np.maximum(threshold, q * scale), q * scale * ratio)


def _normalizing_scale(q: np.ndarray, threshold: float, ratio: float) -> float:
    """Solve ``sum clip(t, q*b, q*ratio*b) = 1`` for ``b`` exactly.

    The left side is continuous, nondecreasing and piecewise linear in ``b``
    with kinks at ``t/q`` and ``t/(ratio q)``, so the root is found by
    scanning kinks and interpolating on the bracketing segment.
    """
    support = q[q > 0]
    kinks = np.unique(np.concatenate([threshold / support, threshold / (ratio * support)]))

    grid = np.outer(kinks, support)
    values = np.minimum(np.maximum(threshold, grid), grid * ratio).sum(axis=1)
    pos = int(np.searchsorted(values, 1.0))
    if pos < len(kinks) and values[pos] == 1.0:
        return float(kinks[pos])
    if pos == 0:
        # below the first kink every cell is q*ratio*b
        return 1.0 / (ratio * math.fsum(support.tolist()))
    if pos == len(kinks):
        # beyond the last kink every cell is q*b
        return 1.0 / math.fsum(support.tolist())
    lo, hi = kinks[pos - 1], kinks[pos]
    f_lo, f_hi = values[pos - 1], values[pos]
    return float(lo + (1.0 - f_lo) * (hi - lo) / (f_hi - f_lo))


@dataclass(frozen=True)
class KlSolution:
    probs: np.ndarray
    iterations: int
    divergence: float


def solve_kl_ball(q: np.ndarray, threshold: float, budget: float) -> KlSolution:
    """Minimize ``sum (P - t)_+`` over ``KL(P || q) <= budget``.

    Stationarity of the Lagrangian forces every minimizer onto the one-parameter
    family ``P_r = clip(t, q b, q r b)`` with ``r >= 1`` and ``b`` fixed by
    normalization. ``r = 1`` gives ``q``; growing ``r`` pins more cells to the
    threshold. The solver bisects on ``log r`` until the divergence meets the
    budget (to ``KL_TOLERANCE``), always returning the feasible endpoint.
    """
    q = np.asarray(q, dtype=float)
    if budget == 0:
        return KlSolution(q.copy(), 0, 0.0)

    def law(log_ratio: float) -> np.ndarray:
        ratio = math.exp(log_ratio)
        return _clip_law(q, threshold, ratio, _normalizing_scale(q, threshold, ratio))

    support_size = int(np.count_nonzero(q))
    floor = max(1.0 - support_size * threshold, 0.0)
    iterations = 0
    hi = 1.0
    p_hi = law(hi)
    while excess_mass(p_hi, threshold) > floor + 1e-15 and hi < 700:
        hi *= 2.0
        p_hi = law(hi)
        iterations += 1
    if kl_divergence(p_hi, q) <= budget:
        return KlSolution(p_hi, iterations, kl_divergence(p_hi, q))
    lo = 0.0
    p_lo = q.copy()
    kl_lo = 0.0
    while iterations < KL_MAX_ITERATIONS:
        iterations += 1
        mid = 0.5 * (lo + hi)
        p_mid = law(mid)
        kl_mid = kl_divergence(p_mid, q)
        if kl_mid <= budget:
            lo, p_lo, kl_lo = mid, p_mid, kl_mid
        else:
            hi = mid
        if budget - kl_lo <= KL_TOLERANCE * max(1.0, budget) or hi - lo < 1e-15:
            return KlSolution(p_lo, iterations, kl_lo)
    raise SolverError(
        f"KL-ball solver stopped after {iterations} iterations with divergence gap {budget - kl_lo:.3e}"
    )


def detection_error_lower_bound(query: BoundQuery) -> BoundResult:
    """Smallest achievable average detection error for the query's budget."""
    t = query.threshold
    if query.distortion_kind is DistortionKind.TV:
        p_star, plan = build_optimal_pmf(query.q, t, query.distortion_budget)
        value = tv_closed_form(query.q, t, query.distortion_budget)
        return BoundResult(value, p_star, t, tv_distance(p_star, query.q), 0)
    solution = solve_kl_ball(query.q.probs, t, query.distortion_budget)
    p_star = query.q.with_probs(solution.probs)
    return BoundResult(
        excess_mass(p_star.probs, t), p_star, t, solution.divergence, solution.iterations
    )


def bound_value(
    q: SequencePmf, alpha: float, budget: float, m: int, kind=DistortionKind.TV
) -> float:
    """Benchmark value only; accepts ``alpha = 1`` unlike :class:`BoundQuery`."""
    _check_alpha(alpha, allow_one=True)
    _check_budget(budget)
    kind = DistortionKind.parse(kind)
    t = alpha / m
    if kind is DistortionKind.TV:
        return tv_closed_form(q, t, budget)
    return excess_mass(solve_kl_ball(q.probs, t, budget).probs, t)


def message_count_admissible(
    q: SequencePmf, alpha: float, budget: float, m: int, kind=DistortionKind.TV
) -> bool:
    """True when the benchmark at ``m`` leaves room for the false-alarm budget."""
    return bound_value(q, alpha, budget, m, kind) <= 1.0 - alpha + COMPARISON_SLACK


def max_message_count(q: SequencePmf, alpha: float, budget: float, kind=DistortionKind.TV) -> int:
    """Largest ``m <= |X^T|`` whose benchmark is at most ``1 - alpha``.

    The benchmark is nondecreasing in ``m``, so the scan runs downward from
    ``|X^T|`` and stops at the first admissible count. ``m = 1`` is always
    admissible because ``sum (P - alpha)_+ <= 1 - alpha``.
    """
    for m in range(q.size, 0, -1):
        if message_count_admissible(q, alpha, budget, m, kind):
            return m
    return 1


@dataclass(frozen=True)
class Feasibility:
    feasible: bool
    heavy_count: int
    light_mass: float
    required_light_mass: float

    def __bool__(self) -> bool:
        return self.feasible


def deterministic_feasible(q_star: SequencePmf, alpha: float, m: int) -> Feasibility:
    """Light-mass predicate for deterministic decoding.

    With ``S`` the cells of mass at least ``alpha/m``, feasibility asks for the
    mass outside ``S`` to be at least ``(1 - |S|/m) alpha``.
    """
    _check_alpha(alpha, allow_one=True)
    t = alpha / m
    probs = q_star.probs
    heavy = probs >= t
    light_mass = math.fsum(probs[~heavy].tolist())
    required = (1.0 - int(heavy.sum()) / m) * alpha
    return Feasibility(
        light_mass >= required - COMPARISON_SLACK, int(heavy.sum()), light_mass, required
    )
