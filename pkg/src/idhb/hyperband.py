"""Hyperband brackets, iterative deepening, and the persistent run state.

A fresh run at max size ``R`` executes brackets ``s = s_max..0`` with
``n_s = ceil((s_max+1) * eta**s / (s+1))`` arms starting at level
``R / eta**s``. Deepening multiplies ``R`` by ``eta``: the new bracket ``s``
inherits the old bracket ``s-1`` (whose levels coincide with the first ``s``
levels of the new bracket), tops it up with fresh arms and hands both to one
of the iterative-deepening halving variants.
"""
from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from .core import ConfigId, ContractError, DomainError, EvaluationCache, LossOracle, PullLedger
from .sh import OldShState, ShInputs, ShTrace, run_sh, run_variant

FORMAT_VERSION = 1
MODES = ("e", "p", "d")


class SamplerExhausted(RuntimeError):
    pass


class StateLoadError(ValueError):
    """A run-state document could not be turned back into a RunState."""

    def __init__(self, message: str, section: Optional[str] = None):
        super().__init__(message)
        self.section = section


class StateVersionError(StateLoadError):
    pass


class StateChecksumError(StateLoadError):
    pass


# -- bracket arithmetic -------------------------------------------------------


def ilog(R: int, eta: int) -> int:
    """floor(log_eta R) in exact integer arithmetic."""
    if R < 1:
        raise DomainError(f"R must be >= 1, got {R}")
    s = 0
    while eta ** (s + 1) <= R:
        s += 1
    return s


def _ceil_div(a: int, b: int) -> int:
    return -(-a // b)


@dataclass(frozen=True)
class HbParams:
    R: int
    eta: int

    def __post_init__(self):
        if self.eta < 2:
            raise DomainError(f"eta must be >= 2, got {self.eta}")
        if self.R < 1:
            raise DomainError(f"R must be >= 1, got {self.R}")
        if self.R % self.eta**self.s_max:
            raise DomainError(
                f"R={self.R} is not a multiple of eta**s_max={self.eta**self.s_max}; "
                "bracket start levels would not be integers"
            )

    @property
    def s_max(self) -> int:
        return ilog(self.R, self.eta)

    @property
    def B(self) -> int:
        return (self.s_max + 1) * self.R

    def n(self, s: int) -> int:
        return _ceil_div((self.s_max + 1) * self.eta**s, s + 1)

    def r(self, s: int) -> int:
        return self.R // self.eta**s

    def brackets(self):
        """``[(s, n_s, r_s)]`` for ``s = s_max..0``."""
        return [(s, self.n(s), self.r(s)) for s in range(self.s_max, -1, -1)]

    def old_pool_size(self, s: int) -> int:
        """Arms the deepened bracket ``s`` inherits from the previous run."""
        if s == 0:
            return 0
        return _ceil_div(self.eta ** (s - 1) * self.s_max, s)


# -- samplers ----------------------------------------------------------------


class ConfigStream:
    """Deterministic stream handing out consecutive ConfigIds.

    The configuration behind an id is a pure function of ``(seed, id)`` on the
    benchmark side, so the stream's state is just its position.
    """

    algorithm_name = "seedsequence-pcg64-per-id"

    def __init__(self, seed: int, position: int = 0, limit: Optional[int] = None):
        self.seed = int(seed)
        self.position = int(position)
        self.limit = limit

    def draw(self, count: int) -> List[ConfigId]:
        if count < 0:
            raise DomainError(f"cannot draw {count} configurations")
        if self.limit is not None and self.position + count > self.limit:
            raise SamplerExhausted(
                f"requested {count} configurations at position {self.position}, "
                f"but only {self.limit} exist"
            )
        ids = list(range(self.position, self.position + count))
        self.position += count
        return ids

    def state(self) -> dict:
        return {"algorithm_name": self.algorithm_name, "seed": self.seed, "position": self.position}

    @classmethod
    def from_state(cls, state: dict, limit: Optional[int] = None) -> "ConfigStream":
        if state.get("algorithm_name") != cls.algorithm_name:
            raise StateLoadError(f"cannot resume sampler {state.get('algorithm_name')!r}", "rng")
        return cls(state["seed"], state["position"], limit)


class ScriptedSampler:
    """Replays predetermined batches; used to pair a baseline with a deepened run."""

    algorithm_name = "scripted-replay"

    def __init__(self, batches: Sequence[Sequence[ConfigId]], seed: int = 0):
        self.batches = [list(b) for b in batches]
        self.seed = seed
        self.position = 0
        self._next = 0

    def draw(self, count: int) -> List[ConfigId]:
        if self._next >= len(self.batches):
            raise SamplerExhausted("replay script exhausted")
        batch = self.batches[self._next]
        if len(batch) != count:
            raise ContractError(f"replay batch {self._next} has {len(batch)} ids, {count} requested")
        self._next += 1
        self.position += count
        return list(batch)

    def state(self) -> dict:
        return {"algorithm_name": self.algorithm_name, "seed": self.seed, "position": self.position}


# -- state -------------------------------------------------------------------


@dataclass
class IterationRecord:
    level: int
    losses: Dict[ConfigId, float]
    promoted: List[ConfigId]
    discarded: List[ConfigId]


@dataclass
class BracketState:
    s: int
    n_s: int
    r_s: int
    iterations: List[IterationRecord]

    @classmethod
    def from_trace(cls, s: int, n_s: int, r_s: int, trace: ShTrace) -> "BracketState":
        its = []
        for rd in trace.rounds:
            kept = set(rd.kept)
            its.append(
                IterationRecord(
                    level=rd.level,
                    losses=dict(rd.losses),
                    promoted=list(rd.kept),
                    discarded=[c for c in rd.pool if c not in kept],
                )
            )
        return cls(s, n_s, r_s, its)

    @property
    def arms(self) -> List[ConfigId]:
        return list(self.iterations[0].losses)

    @property
    def winner(self) -> ConfigId:
        return self.iterations[-1].promoted[0]

    def round_sets(self) -> List[List[ConfigId]]:
        """Arms that reached each iteration."""
        return [self.arms] + [list(it.promoted) for it in self.iterations[:-1]]

    def old_state(self) -> OldShState:
        return OldShState(
            tuple(tuple(rs) for rs in self.round_sets()), tuple(self.iterations[-1].promoted)
        )

    def budget(self) -> int:
        """Sum over iterations of (arms reaching it) x level."""
        return sum(len(rs) * it.level for rs, it in zip(self.round_sets(), self.iterations))


@dataclass
class RunState:
    t: int
    eta: int
    R: int
    brackets: List[BracketState]
    cache: EvaluationCache
    ledger: PullLedger
    rng: dict
    next_config_id: int
    benchmark: Optional[dict] = None

    @property
    def params(self) -> HbParams:
        return HbParams(self.R, self.eta)

    def bracket(self, s: int) -> BracketState:
        for b in self.brackets:
            if b.s == s:
                return b
        raise KeyError(s)

    def is_complete(self) -> bool:
        p = self.params
        if sorted(b.s for b in self.brackets) != list(range(p.s_max + 1)):
            return False
        return all(len(b.iterations) == b.s + 1 for b in self.brackets)


@dataclass(frozen=True)
class Incumbent:
    config: ConfigId
    loss: float
    bracket: int
    level: int


def _describe(oracle) -> Optional[dict]:
    describe = getattr(oracle, "describe", None)
    return describe() if callable(describe) else None


def run_hb(
    params: HbParams,
    sampler,
    oracle: LossOracle,
    cache: Optional[EvaluationCache] = None,
    ledger: Optional[PullLedger] = None,
) -> RunState:
    cache = EvaluationCache() if cache is None else cache
    ledger = PullLedger() if ledger is None else ledger
    brackets = []
    for s, n, r in params.brackets():
        arms = sampler.draw(n)
        trace = run_sh(ShInputs(tuple(arms), r, params.eta, s), oracle, cache, ledger)
        brackets.append(BracketState.from_trace(s, n, r, trace))
    return RunState(
        t=0,
        eta=params.eta,
        R=params.R,
        brackets=brackets,
        cache=cache,
        ledger=ledger,
        rng=sampler.state(),
        next_config_id=sampler.position,
        benchmark=_describe(oracle),
    )


def deepen(prev: RunState, mode: str, sampler, oracle: LossOracle) -> RunState:
    """Continue ``prev`` at max size ``eta * prev.R`` using deepening ``mode``.

    ``prev`` is left untouched; the successor gets copies of its cache and
    ledger, so old evaluations are reused but never charged again.
    """
    if mode not in MODES:
        raise DomainError(f"unknown deepening mode {mode!r}; expected one of {MODES}")
    if not prev.is_complete():
        raise ContractError("cannot deepen an incomplete run")
    params = HbParams(prev.R * prev.eta, prev.eta)
    old_params = prev.params
    if params.s_max != old_params.s_max + 1:
        raise ContractError("deepening must add exactly one bracket")
    cache = prev.cache.copy()
    ledger = prev.ledger.copy()
    brackets = []
    for s, n, r in params.brackets():
        n_old = params.old_pool_size(s)
        if s == 0:
            trace = run_sh(ShInputs(tuple(sampler.draw(n)), r, params.eta, 0), oracle, cache, ledger)
        else:
            old = prev.bracket(s - 1)
            if n_old != old.n_s or n_old != len(old.arms) or n_old != old_params.n(s - 1):
                raise ContractError(
                    f"bracket {s}: inherited pool size {n_old} disagrees with old bracket "
                    f"{s - 1} (n={old.n_s}, arms={len(old.arms)})"
                )
            if old.r_s != r:
                raise ContractError(f"bracket {s}: old start level {old.r_s} != new start level {r}")
            fresh = sampler.draw(n - n_old)
            trace = run_variant(
                mode, ShInputs(tuple(fresh), r, params.eta, s), old.old_state(), oracle, cache, ledger
            )
        brackets.append(BracketState.from_trace(s, n, r, trace))
    return RunState(
        t=prev.t + 1,
        eta=params.eta,
        R=params.R,
        brackets=brackets,
        cache=cache,
        ledger=ledger,
        rng=sampler.state(),
        next_config_id=max(prev.next_config_id, sampler.position),
        benchmark=prev.benchmark,
    )


def continue_stream(prev: RunState, limit: Optional[int] = None) -> ConfigStream:
    return ConfigStream.from_state(prev.rng, limit)


def deepening_draws(prev: RunState) -> List[int]:
    """Fresh-arm counts a deepening of ``prev`` draws, in bracket order."""
    params = HbParams(prev.R * prev.eta, prev.eta)
    return [n - params.old_pool_size(s) for s, n, _ in params.brackets()]


def replay_sampler(prev: RunState) -> ScriptedSampler:
    """Sampler for a from-scratch run at ``eta * prev.R`` on the same arms a deepening uses.

    Bracket ``s`` receives the old bracket ``s-1`` arms followed by the fresh
    arms the deepening would draw from the continued stream.
    """
    stream = continue_stream(prev)
    params = HbParams(prev.R * prev.eta, prev.eta)
    batches = []
    for s, n, _ in params.brackets():
        old = prev.bracket(s - 1).arms if s > 0 else []
        batches.append(old + stream.draw(n - len(old)))
    return ScriptedSampler(batches, seed=prev.rng.get("seed", 0))


def incumbent(state: RunState) -> Incumbent:
    """Arm with the smallest loss at its highest recorded level (ties: smaller id)."""
    best: Dict[ConfigId, tuple] = {}
    for b in state.brackets:
        for it in b.iterations:
            for c, loss in it.losses.items():
                if c not in best or it.level > best[c][0]:
                    best[c] = (it.level, loss, b.s)
    if not best:
        raise ContractError("no evaluations recorded")
    c = min(best, key=lambda k: (best[k][1], k))
    level, loss, s = best[c]
    return Incumbent(c, loss, s, level)


def bracket_winners(state: RunState) -> Dict[int, ConfigId]:
    return {b.s: b.winner for b in state.brackets}


# -- persistence -------------------------------------------------------------

_SECTIONS = ("format_version", "t", "eta", "R_t", "rng", "brackets", "ledger", "next_config_id")


def to_document(state: RunState) -> dict:
    body = {
        "format_version": FORMAT_VERSION,
        "t": state.t,
        "eta": state.eta,
        "R_t": state.R,
        "rng": dict(state.rng),
        "brackets": [
            {
                "s": b.s,
                "n_s": b.n_s,
                "r_s": b.r_s,
                "iterations": [
                    {
                        "r_i": it.level,
                        "losses": [[c, loss] for c, loss in it.losses.items()],
                        "promoted": list(it.promoted),
                        "discarded": list(it.discarded),
                    }
                    for it in b.iterations
                ],
            }
            for b in state.brackets
        ],
        "ledger": [[c, level] for c, level in state.ledger.entries],
        "next_config_id": state.next_config_id,
        "benchmark": state.benchmark,
        "cache": [[c, level, loss] for (c, level), loss in state.cache.items()],
    }
    body["checksum"] = _checksum(body)
    return body


def _checksum(body: dict) -> str:
    payload = json.dumps({k: v for k, v in body.items() if k != "checksum"}, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def save_state(state: RunState) -> str:
    return json.dumps(to_document(state), indent=1) + "\n"


def _locate_truncation(text: str) -> str:
    """The top-level section a cut-off document ends in (the last key that was started)."""
    present = re.findall(r'^ "(\w+)":', text, flags=re.MULTILINE)
    return present[-1] if present else _SECTIONS[0]


def load_state(text: str) -> RunState:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        section = _locate_truncation(text)
        raise StateLoadError(
            f"run-state document is truncated or malformed; section {section!r} is missing "
            f"or incomplete ({exc.msg} at line {exc.lineno})",
            section,
        ) from None
    if not isinstance(doc, dict):
        raise StateLoadError("run-state document must be an object")
    for name in _SECTIONS + ("checksum",):
        if name not in doc:
            raise StateLoadError(f"run-state document lacks section {name!r}", name)
    if doc["format_version"] != FORMAT_VERSION:
        raise StateVersionError(
            f"format_version {doc['format_version']!r} is not supported (expected {FORMAT_VERSION})",
            "format_version",
        )
    if doc["checksum"] != _checksum(doc):
        raise StateChecksumError("checksum mismatch; the document was modified or corrupted", "checksum")
    try:
        brackets = [
            BracketState(
                s=b["s"],
                n_s=b["n_s"],
                r_s=b["r_s"],
                iterations=[
                    IterationRecord(
                        level=it["r_i"],
                        losses={int(c): float(v) for c, v in it["losses"]},
                        promoted=[int(c) for c in it["promoted"]],
                        discarded=[int(c) for c in it["discarded"]],
                    )
                    for it in b["iterations"]
                ],
            )
            for b in doc["brackets"]
        ]
        ledger = PullLedger()
        for c, level in doc["ledger"]:
            ledger.charge(int(c), int(level))
        cache = EvaluationCache(((int(c), int(level)), float(v)) for c, level, v in doc.get("cache", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise StateLoadError(f"malformed bracket or ledger entry: {exc!r}", "brackets") from None
    return RunState(
        t=doc["t"],
        eta=doc["eta"],
        R=doc["R_t"],
        brackets=brackets,
        cache=cache,
        ledger=ledger,
        rng=dict(doc["rng"]),
        next_config_id=doc["next_config_id"],
        benchmark=doc.get("benchmark"),
    )
