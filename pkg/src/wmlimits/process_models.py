"""Finite-alphabet probability primitives.

Sequences of length ``T`` over an alphabet of size ``k`` are indexed in
mixed radix with the first symbol most significant, so sequence ``(1, 0, 1)``
over a binary alphabet has index ``0b101 = 5``. All logarithms are natural.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.sparse.csgraph import connected_components
from scipy.special import entr, rel_entr

from wmlimits.errors import CapacityError, ConfigError

DEFAULT_ENUMERATION_CAP = 2**20
SUM_TOLERANCE = 1e-12
STATIONARITY_TOLERANCE = 1e-10


def _fsum(values: Iterable[float]) -> float:
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def _readonly(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Alphabet:
    """Symbols ``0 .. size-1``."""

    size: int

    def __post_init__(self) -> None:
        if int(self.size) != self.size or self.size < 1:
            raise ConfigError(f"alphabet size must be a positive integer, got {self.size!r}")


@dataclass(frozen=True, eq=False)
class SequencePmf:
    """Explicit probability table over every length-``length`` sequence."""

    alphabet: Alphabet
    length: int
    probs: np.ndarray
    cap: int = field(default=DEFAULT_ENUMERATION_CAP, repr=False)

    def __post_init__(self) -> None:
        if int(self.length) != self.length or self.length < 1:
            raise ConfigError(f"sequence length must be a positive integer, got {self.length!r}")
        expected = _checked_size(self.alphabet.size, self.length, self.cap)
        probs = _readonly(self.probs)
        if probs.shape != (expected,):
            raise ConfigError(f"expected {expected} probabilities, got shape {probs.shape}")
        if not np.all(np.isfinite(probs)) or np.any(probs < 0):
            raise ConfigError("probabilities must be finite and nonnegative")
        total = _fsum(probs)
        if abs(total - 1.0) > SUM_TOLERANCE:
            raise ConfigError(f"probabilities sum to {total!r}, not 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_vector(cls, probs: Sequence[float]) -> "SequencePmf":
        """Wrap a plain probability vector as a length-1 sequence law."""
        probs = np.asarray(probs, dtype=float)
        return cls(Alphabet(len(probs)), 1, probs)

    @property
    def size(self) -> int:
        return len(self.probs)

    def symbols(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.size:
            raise ConfigError(f"sequence index {index} out of range [0, {self.size})")
        digits = []
        for _ in range(self.length):
            index, digit = divmod(index, self.alphabet.size)
            digits.append(digit)
        return tuple(reversed(digits))

    def index_of(self, symbols: Sequence[int]) -> int:
        if len(symbols) != self.length:
            raise ConfigError(f"expected {self.length} symbols, got {len(symbols)}")
        index = 0
        for symbol in symbols:
            if not 0 <= symbol < self.alphabet.size:
                raise ConfigError(f"symbol {symbol} outside alphabet of size {self.alphabet.size}")
            index = index * self.alphabet.size + int(symbol)
        return index

    def same_shape(self, other: "SequencePmf") -> bool:
        return self.alphabet == other.alphabet and self.length == other.length

    def with_probs(self, probs) -> "SequencePmf":
        return SequencePmf(self.alphabet, self.length, probs, self.cap)

    def to_csv(self, path: Union[str, Path]) -> None:
        """Columns ``sequence_index, sequence_symbols, probability`` ordered by index."""
        with open(path, "w", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["sequence_index", "sequence_symbols", "probability"])
            for index, prob in enumerate(self.probs):
                symbols = " ".join(str(s) for s in self.symbols(index))
                writer.writerow([index, symbols, repr(float(prob))])

    @classmethod
    def from_csv(cls, path: Union[str, Path], alphabet_size: int) -> "SequencePmf":
        with open(path, newline="") as handle:
            rows = list(csv.DictReader(handle))
        if not rows:
            raise ConfigError(f"{path}: no rows")
        length = len(rows[0]["sequence_symbols"].split())
        probs = np.zeros(len(rows))
        for row in rows:
            probs[int(row["sequence_index"])] = float(row["probability"])
        return cls(Alphabet(alphabet_size), length, probs)


def _checked_size(alphabet_size: int, length: int, cap: int) -> int:
    size = alphabet_size**length
    if size > cap:
        raise CapacityError(
            f"|X|^T = {alphabet_size}^{length} = {size} exceeds the enumeration cap {cap}"
        )
    return size


def is_irreducible(transition: np.ndarray) -> bool:
    graph = (np.asarray(transition) > 0).astype(int)
    count, _ = connected_components(graph, directed=True, connection="strong")
    return count == 1


def period(transition: np.ndarray) -> int:
    """Period of an irreducible chain (gcd of cycle lengths through state 0)."""
    adjacency = np.asarray(transition) > 0
    n = adjacency.shape[0]
    level = [-1] * n
    level[0] = 0
    frontier = [0]
    gcd = 0
    while frontier:
        nxt = []
        for state in frontier:
            for succ in np.flatnonzero(adjacency[state]):
                if level[succ] < 0:
                    level[succ] = level[state] + 1
                    nxt.append(int(succ))
                else:
                    gcd = math.gcd(gcd, level[state] + 1 - level[succ])
        frontier = nxt
    return gcd if gcd else 1


def _validate_stochastic_vector(values: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(values)) or np.any(values < 0):
        raise ConfigError(f"{name} must be finite and nonnegative")
    total = _fsum(values)
    if abs(total - 1.0) > SUM_TOLERANCE:
        raise ConfigError(f"{name} sums to {total!r}, not 1")


@dataclass(frozen=True, eq=False)
class MarkovSource:
    """First-order Markov chain: initial law plus row-stochastic transition matrix.

    With ``assert_stationary_ergodic`` the constructor also requires an
    irreducible, aperiodic chain whose initial law is stationary to within
    ``1e-10`` in the sup norm.
    """

    alphabet: Alphabet
    initial: np.ndarray
    transition: np.ndarray
    assert_stationary_ergodic: bool = False

    def __post_init__(self) -> None:
        initial = _readonly(self.initial)
        transition = _readonly(self.transition)
        k = self.alphabet.size
        if initial.shape != (k,):
            raise ConfigError(f"initial must have {k} entries, got shape {initial.shape}")
        if transition.shape != (k, k):
            raise ConfigError(f"transition must be {k}x{k}, got shape {transition.shape}")
        _validate_stochastic_vector(initial, "initial")
        for row_index, row in enumerate(transition):
            _validate_stochastic_vector(row, f"transition row {row_index}")
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "transition", transition)
        if self.assert_stationary_ergodic:
            if not is_irreducible(transition):
                raise ConfigError("chain flagged stationary-ergodic is reducible")
            if period(transition) != 1:
                raise ConfigError("chain flagged stationary-ergodic is periodic")
            gap = float(np.max(np.abs(initial @ transition - initial)))
            if gap > STATIONARITY_TOLERANCE:
                raise ConfigError(f"initial law is not stationary (sup-norm gap {gap:.3e})")

    @classmethod
    def iid(cls, probs: Sequence[float]) -> "MarkovSource":
        probs = np.asarray(probs, dtype=float)
        return cls(Alphabet(len(probs)), probs, np.tile(probs, (len(probs), 1)))

    @classmethod
    def symmetric_binary(cls, flip: float) -> "MarkovSource":
        """Two-state chain that changes state with probability ``flip``, started at (1/2, 1/2)."""
        if not 0.0 <= flip <= 1.0:
            raise ConfigError(f"flip probability must lie in [0, 1], got {flip}")
        transition = np.array([[1.0 - flip, flip], [flip, 1.0 - flip]])
        return cls(Alphabet(2), np.array([0.5, 0.5]), transition)

    @classmethod
    def stationary(cls, transition) -> "MarkovSource":
        transition = np.asarray(transition, dtype=float)
        return cls(Alphabet(transition.shape[0]), stationary_distribution(transition), transition)

    @property
    def is_iid(self) -> bool:
        """True when every row equals the initial law, i.e. the symbols are i.i.d."""
        return bool(np.all(np.abs(self.transition - self.initial[None, :]) <= SUM_TOLERANCE))

    def to_dict(self) -> dict:
        return {
            "alphabet_size": self.alphabet.size,
            "initial": self.initial.tolist(),
            "transition": self.transition.tolist(),
            "assert_stationary_ergodic": self.assert_stationary_ergodic,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MarkovSource":
        try:
            size = int(data["alphabet_size"])
            initial = np.asarray(data["initial"], dtype=float)
            transition = np.asarray(data["transition"], dtype=float)
        except KeyError as exc:
            raise ConfigError(f"source specification missing field {exc.args[0]!r}") from exc
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed source specification: {exc}") from exc
        return cls(
            Alphabet(size),
            initial,
            transition,
            bool(data.get("assert_stationary_ergodic", False)),
        )

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "MarkovSource":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read source file {path}: {exc}") from exc
        return cls.from_dict(data)


def enumerate_sequence_pmf(
    source: MarkovSource, length: int, cap: int = DEFAULT_ENUMERATION_CAP
) -> SequencePmf:
    """Materialize the law of ``(X_1, ..., X_length)`` as a full table."""
    if int(length) != length or length < 1:
        raise ConfigError(f"sequence length must be a positive integer, got {length!r}")
    k = source.alphabet.size
    _checked_size(k, length, cap)
    probs = source.initial.copy()
    for _ in range(length - 1):
        last_symbol = np.arange(len(probs)) % k
        probs = (probs[:, None] * source.transition[last_symbol]).ravel()
    return SequencePmf(source.alphabet, length, probs, cap)


def stationary_distribution(transition) -> np.ndarray:
    """Unique stationary law of an irreducible row-stochastic matrix."""
    transition = np.asarray(transition, dtype=float)
    n = transition.shape[0]
    if transition.shape != (n, n):
        raise ConfigError("transition matrix must be square")
    for row_index, row in enumerate(transition):
        _validate_stochastic_vector(row, f"transition row {row_index}")
    if not is_irreducible(transition):
        raise ConfigError("reducible chain has no unique stationary distribution")
    system = np.vstack([transition.T - np.eye(n), np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    pi, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    if np.max(np.abs(pi @ transition - pi)) > SUM_TOLERANCE:
        raise ConfigError("stationary solve did not converge to 1e-12")
    return pi


def _as_vector(p) -> np.ndarray:
    return p.probs if isinstance(p, SequencePmf) else np.asarray(p, dtype=float)


def entropy(p, base: float | None = None) -> float:
    """Shannon entropy with ``0 log 0 = 0``; nats unless ``base`` is given."""
    value = _fsum(entr(_as_vector(p)))
    return value / math.log(base) if base is not None else value


def entropy_rate(source: MarkovSource, base: float | None = None) -> float:
    """Per-symbol entropy of the chain run from its stationary law.

    Only irreducibility is required, so periodic chains such as a
    deterministic cycle are accepted (their rate is 0).
    """
    pi = stationary_distribution(source.transition)
    value = _fsum(pi[:, None] * entr(source.transition))
    return value / math.log(base) if base is not None else value


def _matching_vectors(p, q) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(p, SequencePmf) and isinstance(q, SequencePmf) and not p.same_shape(q):
        raise ConfigError("distributions are over different alphabets or lengths")
    a, b = _as_vector(p), _as_vector(q)
    if a.shape != b.shape:
        raise ConfigError(f"shape mismatch {a.shape} vs {b.shape}")
    return a, b


def tv_distance(p, q) -> float:
    a, b = _matching_vectors(p, q)
    return 0.5 * _fsum(np.abs(a - b))


def kl_divergence(p, q) -> float:
    """Relative entropy in nats; ``math.inf`` flags ``p`` not absolutely continuous w.r.t. ``q``."""
    a, b = _matching_vectors(p, q)
    if np.any((a > 0) & (b <= 0)):
        return math.inf
    return max(0.0, _fsum(rel_entr(a, b)))


def absolutely_continuous(p, q) -> bool:
    a, b = _matching_vectors(p, q)
    return not bool(np.any((a > 0) & (b <= 0)))
