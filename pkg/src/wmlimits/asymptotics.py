"""Long-sequence behaviour: rate limits, typical sets, and the typical-set scheme.

The typical-set scheme pairs typical source sequences with typical auxiliary
sequences through the cyclic index map ``g(x, z) = (rank(x) + rank(z)) mod L
+ 1``. Here ``L`` is the larger typical-set size, so ``g`` is injective in
each argument. The decoder answers ``g(x, z)`` when both are typical and
``g <= m``, and 0 otherwise. Atypical source sequences embed into a sink
symbol that never decodes.

At finite length the typical sequences are not equiprobable. As a result the
law of ``zeta`` still depends slightly on the message, and the false alarm can
exceed ``alpha``. Both effects are reported, not asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import entr

from wmlimits.bounds import DistortionKind, bound_value, max_message_count
from wmlimits.curves import TradeoffCurve, is_nonincreasing
from wmlimits.errors import ConfigError, InfeasibleError, WatermarkError
from wmlimits.process_models import (
    DEFAULT_ENUMERATION_CAP,
    MarkovSource,
    SequencePmf,
    entropy,
    entropy_rate,
    enumerate_sequence_pmf,
    kl_divergence,
)
from wmlimits.scheme_tables import SchemeTables, fsum, message_error, null_zeta_law, zeta_law

ENTROPY_MATCH_TOLERANCE = 1e-9
SWEEP_COLUMNS = ("T", "rate_or_beta", "bound_value", "fa_excess", "typical_mass", "eta")


class UnsupportedCaseError(WatermarkError, ValueError):
    """A request outside what the rate bound supports (d > 0 with memory)."""


def default_eta(length: int) -> float:
    return float(length) ** -0.25


def default_message_count(length: int, alpha: float, rate: float, typical_size: int) -> int:
    """``floor(alpha exp(T H))`` clipped to ``[1, |typical set|]``."""
    raw = math.floor(alpha * math.exp(length * rate) + 1e-12)
    return int(min(max(raw, 1), typical_size))


@dataclass(frozen=True, eq=False)
class TypicalSet:
    length: int
    eta: float
    members: np.ndarray
    entropy_reference: float
    mass: float

    @property
    def size(self) -> int:
        return len(self.members)


def typical_set(pmf: SequencePmf, entropy_reference: float, eta: Optional[float] = None) -> TypicalSet:
    """Sequences whose per-symbol surprisal is within ``eta`` of the reference entropy."""
    T = pmf.length
    eta = default_eta(T) if eta is None else float(eta)
    probs = pmf.probs
    positive = probs > 0
    surprisal = np.full(len(probs), np.inf)
    surprisal[positive] = -np.log(probs[positive]) / T
    members = np.flatnonzero(np.abs(surprisal - entropy_reference) <= eta)
    return TypicalSet(T, eta, members, entropy_reference, fsum(probs[members]))


def binary_entropy(p: float) -> float:
    return float(entr(p) + entr(1.0 - p))


def matched_binary_flip(target_rate: float) -> float:
    """Flip probability in ``[0, 1/2]`` of a symmetric binary chain with the given entropy rate."""
    if not 0.0 <= target_rate <= math.log(2) + ENTROPY_MATCH_TOLERANCE:
        raise ConfigError(
            f"a binary auxiliary chain cannot reach entropy rate {target_rate:.6g} nats"
        )
    if target_rate >= math.log(2):
        return 0.5
    if target_rate <= 0.0:
        return 0.0
    flip = brentq(lambda p: binary_entropy(p) - target_rate, 0.0, 0.5, xtol=1e-15, rtol=1e-15)
    if abs(binary_entropy(flip) - target_rate) > ENTROPY_MATCH_TOLERANCE:
        raise ConfigError("entropy matching for the auxiliary chain did not converge")
    return flip


def converse_rate_bound(source: MarkovSource, budget: float) -> float:
    """Largest rate compatible with a KL budget per symbol.

    For ``budget = 0`` this is the entropy rate. For i.i.d. sources it solves
    ``max H(p)`` over ``KL(p || q) <= budget``. The maximizer lies on the
    path ``p_lam ∝ q^lam``, and bisection on ``lam`` meets the budget.
    """
    if budget < 0 or not math.isfinite(budget):
        raise ConfigError(f"distortion budget must be finite and nonnegative, got {budget}")
    if budget == 0:
        return entropy_rate(source)
    if not source.is_iid:
        raise UnsupportedCaseError(
            "the rate bound with a positive budget is implemented only for i.i.d. sources"
        )
    q = source.initial[source.initial > 0]

    def tilted(lam: float) -> np.ndarray:
        logits = lam * np.log(q)
        weights = np.exp(logits - logits.max())
        return weights / weights.sum()

    uniform = tilted(0.0)
    if kl_divergence(uniform, q) <= budget:
        return math.log(len(q))
    lam = brentq(lambda s: kl_divergence(tilted(s), q) - budget, 0.0, 1.0, xtol=1e-14)
    return entropy(tilted(lam))


def achievable_rate_finite(
    source: MarkovSource,
    length: int,
    alpha: float,
    budget: float = 0.0,
    kind=DistortionKind.TV,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> float:
    """``log(m*) / T`` for the length-``T`` law of ``source``."""
    pmf = enumerate_sequence_pmf(source, length, cap)
    return math.log(max_message_count(pmf, alpha, budget, kind)) / length


@dataclass(eq=False)
class AsymptoticScheme(SchemeTables):
    length: int
    m: int
    alpha: float
    p_star: SequencePmf
    aux_law: SequencePmf
    typical_x: TypicalSet
    typical_zeta: TypicalSet
    modulus: int
    decoder_kind: str = "deterministic"
    x_rank: np.ndarray = field(init=False, repr=False)
    zeta_rank: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.x_rank = np.full(self.p_star.size, -1, dtype=np.int64)
        self.x_rank[self.typical_x.members] = np.arange(self.typical_x.size)
        self.zeta_rank = np.full(self.aux_law.size + 1, -1, dtype=np.int64)
        self.zeta_rank[self.typical_zeta.members] = np.arange(self.typical_zeta.size)

    @property
    def aux_size(self) -> int:
        return self.aux_law.size + 1

    @property
    def sink(self) -> int:
        return self.aux_law.size

    def pairing(self, x: np.ndarray, zeta: np.ndarray) -> np.ndarray:
        """``g(x, zeta)`` in ``1..L`` for typical pairs, 0 elsewhere."""
        rx = self.x_rank[np.asarray(x)]
        rz = self.zeta_rank[np.asarray(zeta)]
        both = (rx >= 0) & (rz >= 0)
        return np.where(both, (rx + rz) % self.modulus + 1, 0)

    def partner(self, message: int, x_ranks: np.ndarray) -> np.ndarray:
        """Auxiliary symbol paired with each typical rank under ``message`` (sink if none)."""
        slot = (message - 1 - x_ranks) % self.modulus
        ok = slot < self.typical_zeta.size
        out = np.full(len(x_ranks), self.sink, dtype=np.int64)
        out[ok] = self.typical_zeta.members[slot[ok]]
        return out

    def embedding_entries(self, message: int):
        n = self.p_star.size
        zeta = np.full(n, self.sink, dtype=np.int64)
        members = self.typical_x.members
        zeta[members] = self.partner(message, np.arange(len(members)))
        return np.arange(n), zeta, np.ones(n)

    def decode_many(self, x, zeta, draws=None) -> np.ndarray:
        value = self.pairing(x, zeta)
        return np.where((value >= 1) & (value <= self.m), value, 0)

    def false_alarm_by_sequence(self) -> np.ndarray:
        """Exact false alarm for every sequence using the message-averaged law of ``zeta``."""
        marginal = null_zeta_law(self)
        out = np.zeros(self.p_star.size)
        ranks = np.arange(self.typical_x.size)
        total = np.zeros(len(ranks))
        for i in range(1, self.m + 1):
            zeta = self.partner(i, ranks)
            total += np.where(zeta != self.sink, marginal[zeta], 0.0)
        out[self.typical_x.members] = total
        return out


@dataclass(frozen=True)
class TypicalEvaluation:
    beta_per_message: tuple[float, ...]
    max_beta: float
    worst_case_false_alarm: float
    fa_excess: float
    typical_mass: float
    zeta_secrecy_gap: float
    asymptotic_capacity: float
    typical_capacity: float


def build_typical_scheme(
    source: MarkovSource,
    length: int,
    m: int,
    alpha: float,
    eta_override: Optional[float] = None,
    distinct_alphabet: bool = False,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> AsymptoticScheme:
    """Typical-set scheme for the length-``T`` law of ``source`` (no distortion).

    By default the auxiliary source is ``source`` itself. With
    ``distinct_alphabet`` it is a symmetric binary chain tuned to the same
    entropy rate.
    """
    if not 0 < alpha <= 1:
        raise ConfigError(f"alpha must lie in (0, 1], got {alpha}")
    rate = entropy_rate(source)
    q = enumerate_sequence_pmf(source, length, cap)
    if distinct_alphabet:
        aux_source = MarkovSource.symmetric_binary(matched_binary_flip(rate))
        if abs(entropy_rate(aux_source) - rate) > ENTROPY_MATCH_TOLERANCE:
            raise ConfigError("auxiliary chain entropy rate does not match the source")
        aux_law = enumerate_sequence_pmf(aux_source, length, cap)
    else:
        aux_law = q
    typical_x = typical_set(q, rate, eta_override)
    typical_zeta = typical_set(aux_law, rate, eta_override)
    if int(m) != m or not 1 <= m <= typical_x.size:
        raise InfeasibleError(
            f"m = {m} must lie in [1, {typical_x.size}] (the typical-set size at T = {length})"
        )
    modulus = max(typical_x.size, typical_zeta.size)
    return AsymptoticScheme(length, int(m), alpha, q, aux_law, typical_x, typical_zeta, modulus)


def evaluate_typical_exact(scheme: AsymptoticScheme) -> TypicalEvaluation:
    betas = tuple(message_error(scheme, j) for j in scheme.messages())
    worst = float(scheme.false_alarm_by_sequence().max())
    reference = zeta_law(scheme, 1)
    gap = max(
        (float(np.max(np.abs(zeta_law(scheme, j) - reference))) for j in scheme.messages()),
        default=0.0,
    )
    rate = scheme.typical_x.entropy_reference
    return TypicalEvaluation(
        betas,
        max(betas),
        worst,
        worst - scheme.alpha,
        scheme.typical_x.mass,
        gap,
        scheme.alpha * math.exp(scheme.length * rate),
        scheme.alpha * scheme.typical_x.size,
    )


MessageRule = Callable[[int, float, float, int], int]


def error_decay_sweep(
    source: MarkovSource,
    m_rule: Optional[MessageRule],
    alpha: float,
    lengths: Iterable[int],
    eta_rule: Optional[Callable[[int], float]] = None,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> TradeoffCurve:
    """Worst message error and false-alarm excess of the typical scheme for each ``T``.

    ``m_rule(T, alpha, rate, typical_size)`` picks the message count and
    defaults to :func:`default_message_count`. ``bound_value`` holds the
    converse benchmark at the same ``(T, alpha, m)``.
    """
    rule = m_rule or default_message_count
    rate = entropy_rate(source)
    curve = TradeoffCurve("decay", "T", "rate_or_beta", SWEEP_COLUMNS + ("m",))
    for length in sorted(set(lengths)):
        eta = eta_rule(length) if eta_rule else None
        q = enumerate_sequence_pmf(source, length, cap)
        size = typical_set(q, rate, eta).size
        m = rule(length, alpha, rate, size)
        scheme = build_typical_scheme(source, length, m, alpha, eta, cap=cap)
        result = evaluate_typical_exact(scheme)
        benchmark = bound_value(q, alpha, 0.0, m)
        curve.rows.append(
            (length, result.max_beta, benchmark, result.fa_excess, result.typical_mass,
             scheme.typical_x.eta, m)
        )
    return curve


def rate_sweep(
    source: MarkovSource,
    alpha: float,
    lengths: Iterable[int],
    budget: float = 0.0,
    kind=DistortionKind.TV,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> TradeoffCurve:
    """Finite-length rate ``log(m*)/T`` next to the converse rate and finite-T entropy terms.

    Extra columns: ``m_star``, ``block_entropy_rate`` (``H(Q_T)/T``) and
    ``fano_ceiling`` (``(H(Q_T) + log alpha)/T``).
    """
    limit = converse_rate_bound(source, budget) if budget == 0 or source.is_iid else math.nan
    rate = entropy_rate(source)
    columns = SWEEP_COLUMNS + ("m_star", "block_entropy_rate", "fano_ceiling")
    curve = TradeoffCurve("e", "T", "rate_or_beta", columns)
    for length in sorted(set(lengths)):
        q = enumerate_sequence_pmf(source, length, cap)
        m_star = max_message_count(q, alpha, budget, kind)
        block = entropy(q)
        typical = typical_set(q, rate)
        m = default_message_count(length, alpha, rate, typical.size)
        scheme = build_typical_scheme(source, length, m, alpha, cap=cap)
        excess = float(scheme.false_alarm_by_sequence().max()) - alpha
        curve.rows.append(
            (length, math.log(m_star) / length, limit, excess, typical.mass, typical.eta,
             m_star, block / length, (block + math.log(alpha)) / length)
        )
    return curve


def tail(values: list, fraction: float = 0.5) -> list:
    """Last ``ceil(fraction * n)`` entries, at least two when available."""
    count = max(2, math.ceil(fraction * len(values)))
    return values[-count:]


def decay_trend(curve: TradeoffCurve, fraction: float = 0.5) -> dict:
    """Least-squares slope of ``log beta`` against ``sqrt(T)`` on the sweep tail.

    A slope at most 0 is the nonincreasing trend; all-zero errors count as
    nonincreasing.
    """
    ts = tail(curve.column("T"), fraction)
    betas = tail(curve.column("rate_or_beta"), fraction)
    if all(b == 0 for b in betas):
        return {"slope": 0.0, "nonincreasing_trend": True, "monotone": True}
    if any(b <= 0 for b in betas):
        return {"slope": math.nan, "nonincreasing_trend": False, "monotone": is_nonincreasing(betas)}
    slope = float(np.polyfit(np.sqrt(ts), np.log(betas), 1)[0])
    return {"slope": slope, "nonincreasing_trend": slope <= 0, "monotone": is_nonincreasing(betas)}
