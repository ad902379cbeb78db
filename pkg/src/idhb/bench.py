"""Loss oracles: analytic curve families, an epsilon-optimal sampler, tabular grids."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np

from .core import ConfigId, DomainError, Envelope


@dataclass(frozen=True)
class PowerCurve:
    """``loss(t) = nu + c * t**-p``."""

    nu: float
    c: float
    p: float = 1.0

    def __post_init__(self):
        if self.c < 0 or self.p <= 0:
            raise DomainError(f"power curve needs c >= 0 and p > 0, got c={self.c}, p={self.p}")

    def __call__(self, t: int) -> float:
        if t < 1:
            raise DomainError(f"pull count must be >= 1, got {t}")
        return self.nu + self.c * float(t) ** -self.p


@dataclass(frozen=True)
class CrossingCurve:
    """Step curve: ``early_loss`` below ``crossover``, ``late_loss`` from it on."""

    early_loss: float
    late_loss: float
    crossover: int

    @property
    def nu(self) -> float:
        return self.late_loss

    def __call__(self, t: int) -> float:
        if t < 1:
            raise DomainError(f"pull count must be >= 1, got {t}")
        return self.early_loss if t < self.crossover else self.late_loss

    def deviation(self) -> float:
        return abs(self.early_loss - self.late_loss)


@dataclass(frozen=True)
class SamplerSpec:
    """Parameters of the default synthetic family.

    With probability ``alpha`` a configuration is epsilon-optimal, its limit
    drawn uniformly from ``[nu_star, nu_star + eps)``; otherwise the limit is
    uniform on ``[nu_star + eps, nu_star + eps + worse_width)``. The transient
    amplitude ``c`` is uniform on ``[0, c_max)``.
    """

    alpha: float = 0.2
    eps: float = 0.1
    nu_star: float = 0.0
    worse_width: float = 1.0
    c_max: float = 1.0
    p: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise DomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.eps <= 0:
            raise DomainError(f"eps must be > 0, got {self.eps}")
        if self.c_max < 0 or self.p <= 0 or self.worse_width <= 0:
            raise DomainError("c_max >= 0, p > 0 and worse_width > 0 are required")


def draw_curve(spec: SamplerSpec, config: ConfigId) -> PowerCurve:
    """Curve of ``config``; a pure function of ``(spec.seed, config)``."""
    rng = np.random.default_rng([spec.seed, config])
    u_good, u_nu, u_c = rng.random(3)
    if u_good < spec.alpha:
        nu = spec.nu_star + spec.eps * u_nu
    else:
        nu = spec.nu_star + spec.eps + spec.worse_width * u_nu
    return PowerCurve(float(nu), float(spec.c_max * u_c), spec.p)


def sample_configs(spec: SamplerSpec, count: int) -> List[Tuple[ConfigId, PowerCurve]]:
    if count < 0:
        raise DomainError(f"count must be >= 0, got {count}")
    return [(i, draw_curve(spec, i)) for i in range(count)]


def envelope_for(c_max: float, p_min: float) -> Envelope:
    """``gamma(j) = c_max * j**-p_min``, dominating every PowerCurve with ``c <= c_max, p >= p_min``."""
    if c_max < 0 or p_min <= 0:
        raise DomainError("envelope needs c_max >= 0 and p_min > 0")
    return Envelope(lambda j: c_max * float(j) ** -p_min, f"{c_max}*j^-{p_min}")


class SyntheticBenchmark:
    """Unbounded pool of PowerCurve configurations drawn from a SamplerSpec."""

    def __init__(self, spec: SamplerSpec):
        self.spec = spec
        self._curve = lru_cache(maxsize=None)(lambda c: draw_curve(spec, c))

    def curve(self, config: ConfigId) -> PowerCurve:
        if config < 0:
            raise KeyError(f"unknown config {config}")
        return self._curve(config)

    def loss(self, config: ConfigId, level: int) -> float:
        return self.curve(config)(level)

    def nu(self, config: ConfigId) -> float:
        return self.curve(config).nu

    @property
    def envelope(self) -> Envelope:
        return envelope_for(self.spec.c_max, self.spec.p)

    @property
    def size(self) -> Optional[int]:
        return None

    def describe(self) -> dict:
        return {"kind": "synthetic", **asdict(self.spec)}


class TabularParseError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class TabularBenchmark:
    """Rectangular grid of losses indexed by ``(config_id, fidelity)``."""

    def __init__(self, grid: Dict[Tuple[int, int], float], source: Optional[str] = None):
        self.grid = dict(grid)
        self.source = source
        self.configs = sorted({c for c, _ in self.grid})
        self.fidelities = sorted({f for _, f in self.grid})
        self._known = frozenset(self.configs)
        for c in self.configs:
            for f in self.fidelities:
                if (c, f) not in self.grid:
                    raise TabularParseError(f"missing cell (config {c}, fidelity {f})")

    @property
    def R_cap(self) -> int:
        return self.fidelities[-1] if self.fidelities else 0

    def __len__(self) -> int:
        return len(self.grid)

    def loss(self, config: int, fidelity: int) -> float:
        if (config, fidelity) in self.grid:
            return self.grid[(config, fidelity)]
        if config not in self._known:
            raise KeyError(f"unknown config {config}")
        raise DomainError(f"fidelity {fidelity} is not on the grid {self.fidelities}")

    def oracle(self, seed: int) -> "TabularOracle":
        return TabularOracle(self, seed)


class TabularOracle:
    """Serves table rows to a run in a seeded random order: ConfigId ``i`` is row ``perm[i]``."""

    def __init__(self, bench: TabularBenchmark, seed: int):
        self.bench = bench
        self.seed = seed
        self.order = [bench.configs[i] for i in np.random.default_rng(seed).permutation(len(bench.configs))]

    @property
    def size(self) -> int:
        return len(self.order)

    def loss(self, config: ConfigId, level: int) -> float:
        if not 0 <= config < len(self.order):
            raise KeyError(f"unknown config {config}")
        return self.bench.loss(self.order[config], level)

    def describe(self) -> dict:
        return {"kind": "tabular", "path": self.bench.source, "seed": self.seed}


HEADER = ["config_id", "fidelity", "loss"]


def parse_tabular(text: str, source: Optional[str] = None) -> TabularBenchmark:
    grid: Dict[Tuple[int, int], float] = {}
    header_seen = False
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = next(csv.reader([line]))
        if not header_seen:
            if [f.strip() for f in fields] != HEADER:
                raise TabularParseError(f"expected header {','.join(HEADER)}, got {line!r}", lineno)
            header_seen = True
            continue
        if len(fields) != 3:
            raise TabularParseError(f"expected 3 fields, got {len(fields)}", lineno)
        try:
            config, fidelity = int(fields[0]), int(fields[1])
        except ValueError:
            raise TabularParseError(f"config_id and fidelity must be integers: {line!r}", lineno) from None
        try:
            loss = float(fields[2])
        except ValueError:
            raise TabularParseError(f"non-numeric loss {fields[2]!r}", lineno) from None
        if not math.isfinite(loss):
            raise TabularParseError(f"non-finite loss {fields[2]!r}", lineno)
        if fidelity < 1:
            raise TabularParseError(f"fidelity must be >= 1, got {fidelity}", lineno)
        if (config, fidelity) in grid:
            raise TabularParseError(f"duplicate cell (config {config}, fidelity {fidelity})", lineno)
        grid[(config, fidelity)] = loss
    if not header_seen:
        raise TabularParseError("missing header line")
    return TabularBenchmark(grid, source)


def load_tabular(path) -> TabularBenchmark:
    path = Path(path)
    return parse_tabular(path.read_text(), str(path))


def dump_tabular(bench: TabularBenchmark) -> str:
    out = io.StringIO()
    out.write(",".join(HEADER) + "\n")
    for c in bench.configs:
        for f in bench.fidelities:
            out.write(f"{c},{f},{bench.grid[(c, f)]!r}\n")
    return out.getvalue()


def export_tabular(bench: TabularBenchmark, path, force: bool = False) -> None:
    path = Path(path)
    if path.exists() and not force:
        raise FileExistsError(f"{path} exists; pass force=True to overwrite")
    path.write_text(dump_tabular(bench))


def materialize(spec: SamplerSpec, n: int, R_cap: int, fidelities=None) -> TabularBenchmark:
    """Tabulate the first ``n`` synthetic configurations at integer fidelities ``1..R_cap``."""
    fidelities = list(range(1, R_cap + 1)) if fidelities is None else list(fidelities)
    grid = {}
    for c, curve in sample_configs(spec, n):
        for f in fidelities:
            grid[(c, f)] = curve(f)
    return TabularBenchmark(grid)


def budget_to_fraction(r: int, R_t: int) -> float:
    """Translate a budget level into a training-data fraction in (0, 1]."""
    if R_t < 1 or not 1 <= r <= R_t:
        raise DomainError(f"need 1 <= r <= R_t, got r={r}, R_t={R_t}")
    return r / R_t


def crossing_instance() -> Dict[ConfigId, CrossingCurve]:
    """Eight step curves on which eID, pID and dID halving visibly disagree.

    Arms 0-3 form the previous run (arm 0 ranks poorly at level 1 but is
    best at level 2); arms 4-7 are the fresh additions. Run with ``eta=2``,
    ``r=1``, ``s=1`` after a previous halving over arms 0-3 at the same levels.
    """
    early = {0: 0.50, 1: 0.10, 2: 0.60, 3: 0.70, 4: 0.20, 5: 0.30, 6: 0.40, 7: 0.80}
    late = {0: 0.05, 1: 0.30, 2: 0.90, 3: 0.90, 4: 0.25, 5: 0.35, 6: 0.15, 7: 0.90}
    return {c: CrossingCurve(early[c], late[c], 2) for c in early}
