"""Successive Halving and its iterative-deepening variants.

All four routines share the level schedule ``r_k = r * eta**k`` for rounds
``k = 0..s`` and keep ``max(1, n // eta**(k+1))`` arms after round ``k``.
They differ only in which arms are pulled and which arms compete for the
kept slots:

* ``run_sh``      -- classic halving on a fresh set of arms.
* ``run_did_sh``  -- merges the old start pool into the fresh arms and halves
  as if from scratch; old losses come out of the cache for free.
* ``run_pid_sh``  -- like ``run_did_sh`` but old arms that reached level
  ``r_k`` in the previous run stay eligible at round ``k`` even if the
  continued run dropped them.
* ``run_eid_sh``  -- never revokes an old promotion; only the remaining slots
  are filled from fresh arms and old arms that were not promoted.

Losses are always obtained through :func:`idhb.core.evaluate`, so a pull is
charged exactly when the ``(arm, level)`` pair is not already cached.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Sequence, Tuple

from .core import ConfigId, EvaluationCache, LossOracle, PullLedger, evaluate, top_k


class ShArgumentError(ValueError):
    """Malformed halving inputs or an old state that does not line up."""


@dataclass(frozen=True)
class ShInputs:
    arms: Tuple[ConfigId, ...]
    r: int
    eta: int
    s: int

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))
        if self.eta < 2:
            raise ShArgumentError(f"eta must be >= 2, got {self.eta}")
        if self.r < 1:
            raise ShArgumentError(f"base level r must be >= 1, got {self.r}")
        if self.s < 0:
            raise ShArgumentError(f"s must be >= 0, got {self.s}")
        if len(set(self.arms)) != len(self.arms):
            raise ShArgumentError("duplicate arms")

    @property
    def R(self) -> int:
        return self.r * self.eta**self.s

    def level(self, k: int) -> int:
        return self.r * self.eta**k


@dataclass(frozen=True)
class OldShState:
    """What a previous halving run left behind.

    ``pools[k]`` is the set of arms that reached round ``k`` (and therefore
    have a cached loss at level ``r * eta**k``). ``final`` is what that run
    kept after its last round; it is informational and never reserved.
    """

    pools: Tuple[Tuple[ConfigId, ...], ...] = ()
    final: Tuple[ConfigId, ...] = ()

    @classmethod
    def empty(cls) -> "OldShState":
        return cls()

    @classmethod
    def from_trace(cls, trace: "ShTrace") -> "OldShState":
        return cls(tuple(tuple(rd.arms) for rd in trace.rounds), tuple(trace.rounds[-1].kept))

    @property
    def n_old(self) -> int:
        return len(self.pools[0]) if self.pools else 0

    def pool(self, k: int) -> FrozenSet[ConfigId]:
        return frozenset(self.pools[k]) if k < len(self.pools) else frozenset()


@dataclass
class ShRound:
    level: int
    arms: List[ConfigId]  # arms that reached this round
    pool: List[ConfigId]  # arms competing for the kept slots
    losses: Dict[ConfigId, float]
    kept: List[ConfigId]  # every arm that advances (incl. reserved old promotions)
    charged: int


@dataclass
class ShTrace:
    rounds: List[ShRound] = field(default_factory=list)

    @property
    def winner(self) -> ConfigId:
        return self.rounds[-1].kept[0]

    @property
    def charged(self) -> int:
        return sum(rd.charged for rd in self.rounds)

    @property
    def survivors(self) -> List[List[ConfigId]]:
        """Round sets ``S_0..S_s`` followed by the final kept list."""
        return [list(rd.arms) for rd in self.rounds] + [list(self.rounds[-1].kept)]


def keep_count(n: int, eta: int, k: int) -> int:
    """Arms kept after round ``k`` of a halving run over ``n`` arms."""
    return max(1, n // eta ** (k + 1))


def _check_old(inputs: ShInputs, old: OldShState, cache: EvaluationCache) -> None:
    pools = [frozenset(p) for p in old.pools]
    if len(pools) > inputs.s + 1:
        raise ShArgumentError(f"old state has {len(pools)} rounds, more than s+1={inputs.s + 1}")
    for k in range(1, len(pools)):
        if not pools[k] <= pools[k - 1]:
            raise ShArgumentError(f"old pools not nested at round {k}")
    if pools and not frozenset(old.final) <= pools[-1]:
        raise ShArgumentError("old final kept set is not part of the old last round")
    if pools and set(inputs.arms) & pools[0]:
        raise ShArgumentError("fresh arms overlap the old start pool")
    for k, pool in enumerate(pools):
        level = inputs.level(k)
        stray = sorted(c for c in pool if (c, level) not in cache)
        if stray:
            raise ShArgumentError(f"old arms {stray} have no cached loss at aligned level {level}")


def _observe(arms, level, oracle, cache, ledger) -> Tuple[Dict[ConfigId, float], int]:
    before = ledger.total
    losses = {c: evaluate(c, level, oracle, cache, ledger) for c in arms}
    return losses, ledger.total - before


def run_sh(
    inputs: ShInputs, oracle: LossOracle, cache: EvaluationCache, ledger: PullLedger
) -> ShTrace:
    if not inputs.arms:
        raise ShArgumentError("successive halving needs at least one arm")
    n = len(inputs.arms)
    trace = ShTrace()
    current = list(inputs.arms)
    for k in range(inputs.s + 1):
        level = inputs.level(k)
        losses, charged = _observe(current, level, oracle, cache, ledger)
        kept = top_k(current, losses, keep_count(n, inputs.eta, k))
        trace.rounds.append(ShRound(level, current, list(current), losses, kept, charged))
        current = kept
    return trace


def run_did_sh(
    inputs: ShInputs,
    old: OldShState,
    oracle: LossOracle,
    cache: EvaluationCache,
    ledger: PullLedger,
) -> ShTrace:
    _check_old(inputs, old, cache)
    merged = list(old.pools[0]) + list(inputs.arms) if old.pools else list(inputs.arms)
    if not merged:
        raise ShArgumentError("no arms to halve")
    return run_sh(ShInputs(tuple(merged), inputs.r, inputs.eta, inputs.s), oracle, cache, ledger)


def run_pid_sh(
    inputs: ShInputs,
    old: OldShState,
    oracle: LossOracle,
    cache: EvaluationCache,
    ledger: PullLedger,
) -> ShTrace:
    _check_old(inputs, old, cache)
    current = list(old.pools[0]) + list(inputs.arms) if old.pools else list(inputs.arms)
    if not current:
        raise ShArgumentError("no arms to halve")
    n = len(current)
    trace = ShTrace()
    for k in range(inputs.s + 1):
        level = inputs.level(k)
        losses, charged = _observe(current, level, oracle, cache, ledger)
        members = set(current)
        returning = sorted(c for c in old.pool(k) if c not in members)
        # returning arms are cached at this level; reading them is free
        losses.update(_observe(returning, level, oracle, cache, ledger)[0])
        pool = current + returning
        kept = top_k(pool, losses, keep_count(n, inputs.eta, k))
        trace.rounds.append(ShRound(level, current, pool, losses, kept, charged))
        current = kept
    return trace


def run_eid_sh(
    inputs: ShInputs,
    old: OldShState,
    oracle: LossOracle,
    cache: EvaluationCache,
    ledger: PullLedger,
) -> ShTrace:
    _check_old(inputs, old, cache)
    n = len(inputs.arms) + old.n_old
    if n == 0:
        raise ShArgumentError("no arms to halve")
    trace = ShTrace()
    fresh = list(inputs.arms)  # S_k: arms advanced by this run's own decisions
    for k in range(inputs.s + 1):
        level = inputs.level(k)
        promoted = old.pool(k)
        current = sorted(promoted) + fresh
        losses, charged = _observe(current, level, oracle, cache, ledger)
        if k < inputs.s:
            reserved = old.pool(k + 1)
            quota = keep_count(n, inputs.eta, k) - len(reserved)
            if quota < 0:
                raise ShArgumentError(
                    f"old run promoted {len(reserved)} arms into round {k + 1}, "
                    f"more than the {keep_count(n, inputs.eta, k)} slots available"
                )
            pool = [c for c in current if c not in reserved]
            chosen = top_k(pool, losses, quota)
            kept = top_k(list(reserved) + chosen, losses, len(reserved) + len(chosen))
            fresh = chosen
        else:
            pool = current
            kept = top_k(pool, losses, keep_count(n, inputs.eta, k))
        trace.rounds.append(ShRound(level, current, pool, losses, kept, charged))
    return trace


VARIANTS = {"e": run_eid_sh, "p": run_pid_sh, "d": run_did_sh}


def run_variant(mode: str, inputs: ShInputs, old: OldShState, oracle, cache, ledger) -> ShTrace:
    try:
        fn = VARIANTS[mode]
    except KeyError:
        raise ShArgumentError(f"unknown deepening mode {mode!r}; expected one of e, p, d") from None
    return fn(inputs, old, oracle, cache, ledger)


def round_levels(inputs: ShInputs) -> List[int]:
    return [inputs.level(k) for k in range(inputs.s + 1)]


def budget_used(trace: ShTrace) -> int:
    """Sum over rounds of (arms in round) x level, cached or not."""
    return sum(len(rd.arms) * rd.level for rd in trace.rounds)


def charged_by_round(trace: ShTrace) -> Sequence[int]:
    return [rd.charged for rd in trace.rounds]
