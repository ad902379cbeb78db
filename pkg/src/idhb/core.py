"""Domain primitives: arms, loss oracles, the evaluation cache and pull ledger.

A hyperparameter configuration is an arm identified by a non-negative integer
``ConfigId``. Evaluating arm ``c`` at level ``r`` (integer resource units)
reveals the deterministic loss ``l_{c,r}`` and costs ``r`` units, unless the
same ``(c, r)`` pair was already evaluated, in which case the cached value is
returned for free.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Iterable, Iterator, List, Mapping, Protocol, Sequence, Tuple

ConfigId = int


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class ContractError(RuntimeError):
    """A caller broke a documented precondition (e.g. a missing loss)."""


class LossCurve(Protocol):
    nu: float

    def __call__(self, t: int) -> float: ...


class LossOracle(Protocol):
    """Anything that maps ``(config, level)`` to a deterministic loss."""

    def loss(self, config: ConfigId, level: int) -> float: ...


class CurveOracle:
    """Oracle backed by an explicit mapping ``ConfigId -> LossCurve``."""

    def __init__(self, curves: Mapping[ConfigId, Callable[[int], float]]):
        self.curves = dict(curves)

    def loss(self, config: ConfigId, level: int) -> float:
        try:
            curve = self.curves[config]
        except KeyError:
            raise KeyError(f"unknown config {config}") from None
        return float(curve(level))

    def nu(self, config: ConfigId) -> float:
        return float(self.curves[config].nu)


@dataclass
class PullLedger:
    """Append-only record of every charged evaluation."""

    entries: List[Tuple[ConfigId, int]] = field(default_factory=list)
    total: int = 0

    def charge(self, config: ConfigId, level: int) -> None:
        self.entries.append((config, level))
        self.total += level

    def recomputed_total(self) -> int:
        return sum(level for _, level in self.entries)

    def copy(self) -> "PullLedger":
        return PullLedger(list(self.entries), self.total)

    def __len__(self) -> int:
        return len(self.entries)


class EvaluationCache:
    """Exact-key memo of observed losses; a key is never rebound."""

    def __init__(self, items: Iterable[Tuple[Tuple[ConfigId, int], float]] = ()):
        self._data: Dict[Tuple[ConfigId, int], float] = {}
        for key, value in items:
            self.put(key[0], key[1], value)

    def get(self, config: ConfigId, level: int) -> float | None:
        return self._data.get((config, level))

    def put(self, config: ConfigId, level: int, loss: float) -> None:
        key = (config, level)
        old = self._data.get(key)
        if old is not None and old != loss:
            raise ContractError(f"cache key {key} already bound to {old!r}, refusing {loss!r}")
        self._data[key] = loss

    def __contains__(self, key: Tuple[ConfigId, int]) -> bool:
        return key in self._data

    def __len__(self) -> int:
        return len(self._data)

    def __iter__(self) -> Iterator[Tuple[ConfigId, int]]:
        return iter(self._data)

    def items(self):
        return self._data.items()

    def copy(self) -> "EvaluationCache":
        clone = EvaluationCache()
        clone._data = dict(self._data)
        return clone

    def __eq__(self, other: object) -> bool:
        return isinstance(other, EvaluationCache) and self._data == other._data


def evaluate(
    config: ConfigId,
    level: int,
    oracle: LossOracle,
    cache: EvaluationCache,
    ledger: PullLedger,
) -> float:
    """Return the loss of ``config`` at ``level``, charging ``level`` on a cache miss."""
    if level < 1:
        raise DomainError(f"level must be >= 1, got {level}")
    cached = cache.get(config, level)
    if cached is not None:
        return cached
    loss = float(oracle.loss(config, level))
    cache.put(config, level, loss)
    ledger.charge(config, level)
    return loss


def top_k(candidates: Sequence[ConfigId], losses: Mapping[ConfigId, float], k: int) -> List[ConfigId]:
    """The ``k`` candidates with smallest loss, ties broken by smaller id.

    The result is sorted by ``(loss, id)``.
    """
    if k < 0:
        raise DomainError(f"k must be >= 0, got {k}")
    missing = [c for c in candidates if c not in losses]
    if missing:
        raise ContractError(f"no loss recorded for candidates {missing}")
    ranked = sorted(set(candidates), key=lambda c: (losses[c], c))
    return ranked[:k]


@dataclass(frozen=True)
class Envelope:
    """Convergence envelope ``gamma(j) >= sup_i |l_{i,j} - nu_i|``, nonincreasing in ``j``."""

    gamma: Callable[[int], float]
    label: str = ""

    def __call__(self, j: int) -> float:
        return float(self.gamma(j))


def envelope_inverse(env: Envelope, y: float, cap: int) -> int:
    """Smallest ``j >= 1`` with ``gamma(j) <= y``, or ``cap`` if none exists up to ``cap``.

    Uses galloping then bisection, which is valid because ``gamma`` is
    nonincreasing.
    """
    if not y > 0:
        raise DomainError(f"envelope inverse needs y > 0, got {y}")
    if cap < 1:
        raise DomainError(f"cap must be >= 1, got {cap}")
    if env(1) <= y:
        return 1
    lo, hi = 1, 2  # invariant: gamma(lo) > y
    while hi < cap and env(hi) > y:
        lo, hi = hi, hi * 2
    hi = min(hi, cap)
    if env(hi) > y:
        return cap
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if env(mid) <= y:
            hi = mid
        else:
            lo = mid
    return hi
