"""Randomized referee suites and the strategy-comparison harness.

Every function here is seeded: the same arguments give the same result.
The suites pair a measured run with the matching closed-form oracle from
:mod:`idhb.theory` and report a :class:`Check` per property, where
``status`` is ``"pass"``, ``"fail"`` or ``"not_applicable"`` (the theorem's
precondition does not hold, so nothing is asserted).
"""
from __future__ import annotations

import csv
import io
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from statistics import mean
from typing import Dict, List, Optional, Sequence

from .bench import SamplerSpec, SyntheticBenchmark, crossing_instance
from .core import CurveOracle, Envelope, EvaluationCache, PullLedger
from .hyperband import (
    MODES,
    ConfigStream,
    HbParams,
    RunState,
    continue_stream,
    deepen,
    deepening_draws,
    incumbent,
    load_state,
    replay_sampler,
    run_hb,
    save_state,
)
from .sh import OldShState, ShInputs, keep_count, run_sh, run_variant
from .theory import (
    DegenerateParameterError,
    InstanceSpec,
    binomial_margin,
    ceil_log,
    eid_pull_bound,
    pdid_pull_bound,
    sample_size_for_confidence,
    sh_pull_lower_bound,
    thm3_condition,
    z_id_sh,
)

PASS, FAIL, NA = "pass", "fail", "not_applicable"
CSV_HEADER = ["seed", "mode", "incumbent_loss", "budget_deepen", "budget_lineage", "reused_evals"]
COMPARE_MODES = ("ih",) + MODES


@dataclass
class Check:
    property: str
    status: str
    detail: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"property": self.property, "status": self.status, **self.detail}


def _summarize(name: str, outcomes: Sequence[str], **detail) -> Check:
    fails = sum(o == FAIL for o in outcomes)
    applicable = sum(o != NA for o in outcomes)
    if fails:
        status = FAIL
    elif applicable:
        status = PASS
    else:
        status = NA
    return Check(name, status, {"instances": len(outcomes), "applicable": applicable, "violations": fails, **detail})


# -- deepening suite (equivalence + budget cap) ------------------------------


class RoundedOracle:
    """Rounds another oracle's losses so that exact ties actually occur."""

    def __init__(self, base, digits: int):
        self.base = base
        self.digits = digits

    def loss(self, config, level):
        return round(self.base.loss(config, level), self.digits)

    def describe(self) -> dict:
        return {**self.base.describe(), "round_digits": self.digits}


@dataclass(frozen=True)
class DeepeningCase:
    seed: int
    eta: int
    R0: int
    spec: SamplerSpec
    round_digits: Optional[int] = None

    def oracle(self):
        bench = SyntheticBenchmark(self.spec)
        return bench if self.round_digits is None else RoundedOracle(bench, self.round_digits)


# R_{t-1} values whose deepening keeps R_t <= 64 and integral start levels
_R0_CHOICES = {2: (1, 2, 4, 8, 16, 32), 3: (1, 2, 3, 6, 9, 18)}


def random_deepening_case(seed: int) -> DeepeningCase:
    rnd = random.Random(seed)
    eta = rnd.choice((2, 3))
    R0 = rnd.choice(_R0_CHOICES[eta])
    spec = SamplerSpec(
        alpha=rnd.uniform(0.05, 0.5),
        eps=rnd.uniform(0.02, 0.3),
        c_max=rnd.choice((0.0, 0.5, 1.0, 2.0)),
        p=rnd.choice((0.5, 1.0, 2.0)),
        seed=seed,
    )
    digits = rnd.choice((None, None, None, 1, 2))
    return DeepeningCase(seed, eta, R0, spec, digits)


def budget_cap_violations(state: RunState) -> List[dict]:
    B = state.params.B
    return [{"s": b.s, "budget": b.budget(), "B": B} for b in state.brackets if b.budget() > B]


def reused_evaluations(prev: RunState, new: RunState) -> int:
    """Recorded ``(config, level)`` pairs of ``new`` that were already in ``prev``'s cache."""
    return sum(
        (c, it.level) in prev.cache for b in new.brackets for it in b.iterations for c in it.losses
    )


def did_equivalence(case: DeepeningCase) -> dict:
    """Deepen with mode d and compare against a replayed fresh run at ``eta * R0``."""
    oracle = case.oracle()
    prev = run_hb(HbParams(case.R0, case.eta), ConfigStream(case.seed), oracle)
    deep = deepen(prev, "d", continue_stream(prev), oracle)
    fresh = run_hb(HbParams(case.R0 * case.eta, case.eta), replay_sampler(prev), oracle)
    mismatched = []
    for b_new, b_fresh in zip(deep.brackets, fresh.brackets):
        if [set(x) for x in b_new.round_sets()] != [set(x) for x in b_fresh.round_sets()] or [
            it.promoted for it in b_new.iterations
        ] != [it.promoted for it in b_fresh.iterations]:
            mismatched.append(b_new.s)
    saved = sum(level for c, level in fresh.ledger.entries if (c, level) in prev.cache)
    deep_phase = deep.ledger.total - prev.ledger.total
    return {
        "seed": case.seed,
        "eta": case.eta,
        "R_t": case.R0 * case.eta,
        "incumbent_equal": incumbent(deep) == incumbent(fresh),
        "mismatched_brackets": mismatched,
        "ledger_identity": deep_phase == fresh.ledger.total - saved,
        "cap_violations": budget_cap_violations(deep) + budget_cap_violations(fresh),
    }


def deepening_suite(runs: int, base_seed: int = 0) -> List[Check]:
    eq, cap, ident, mono = [], [], [], []
    for i in range(runs):
        case = random_deepening_case(base_seed + i)
        res = did_equivalence(case)
        eq.append(PASS if res["incumbent_equal"] and not res["mismatched_brackets"] else FAIL)
        ident.append(PASS if res["ledger_identity"] else FAIL)
        oracle = case.oracle()
        prev = run_hb(HbParams(case.R0, case.eta), ConfigStream(case.seed), oracle)
        over = list(res["cap_violations"]) + budget_cap_violations(prev)
        for mode in ("e", "p"):
            new = deepen(prev, mode, continue_stream(prev), oracle)
            over += budget_cap_violations(new)
            if mode == "e":
                mono.append(PASS if not eid_monotone_violations(prev, new) else FAIL)
        cap.append(FAIL if over else PASS)
    return [
        _summarize("did_equivalence", eq),
        _summarize("deepening_ledger_identity", ident),
        _summarize("budget_cap", cap),
        _summarize("eid_monotone_promotion", mono),
    ]


def eid_monotone_violations(prev: RunState, new: RunState) -> List[dict]:
    """Old promotions revoked by an eID deepening.

    Every old iteration except the last one of each bracket is audited: an
    arm promoted out of old iteration ``i`` must reach new iteration ``i+1``.
    The old bracket's final survivors are not reserved in the new bracket
    (the new bracket has one more round to decide), so they are exempt.
    """
    bad = []
    for b in new.brackets:
        if b.s == 0:
            continue
        old = prev.bracket(b.s - 1)
        sets = b.round_sets()
        for i, it in enumerate(old.iterations[:-1]):
            missing = sorted(set(it.promoted) - set(sets[i + 1]))
            if missing:
                bad.append({"s": b.s, "iteration": i, "revoked": missing})
    return bad


# -- eps/2-optimality of halving under a sufficient budget ------------------


@dataclass(frozen=True)
class HalvingInstance:
    """``n`` arms with known limits; the first ``len(old)`` ids ran before at the same levels."""

    seed: int
    eta: int
    s: int
    r: int
    eps: float
    fresh: tuple
    old: tuple
    spec: SamplerSpec

    @property
    def n(self) -> int:
        return len(self.fresh) + len(self.old)

    @property
    def R(self) -> int:
        return self.r * self.eta**self.s

    def bench(self) -> SyntheticBenchmark:
        return SyntheticBenchmark(self.spec)

    def nus(self) -> List[float]:
        bench = self.bench()
        return [bench.nu(c) for c in self.old + self.fresh]

    def theory_spec(self, R: Optional[int] = None) -> InstanceSpec:
        return InstanceSpec(
            tuple(self.nus()), self.bench().envelope, self.eta, self.R if R is None else R, self.eps, self.s, len(self.old)
        )

    def old_run(self, cache: EvaluationCache, ledger: PullLedger, old_s: Optional[int] = None) -> OldShState:
        if not self.old:
            return OldShState.empty()
        s = self.s - 1 if old_s is None else old_s
        trace = run_sh(ShInputs(self.old, self.r, self.eta, s), self.bench(), cache, ledger)
        return OldShState.from_trace(trace)


def implied_budget(n: int, eta: int, s: int, r: int) -> int:
    """ceil(log_eta n) times the smallest per-round spend ``m_k * r * eta**k``.

    Halving with a per-round allowance ``B / ceil(log_eta n)`` gives every
    arm of round ``k`` at least ``r * eta**k`` pulls exactly when this
    quantity is at least ``B``; it is the budget a fixed level schedule
    corresponds to.
    """
    sizes = [n] + [keep_count(n, eta, k) for k in range(s)]
    return ceil_log(n, eta) * min(m * r * eta**k for k, m in enumerate(sizes))


def _base_level_for(n: int, eta: int, s: int, z: int) -> int:
    per_r = implied_budget(n, eta, s, 1)
    return max(1, -(-z // per_r))


def theorem1_instance(seed: int, budget: str = "sufficient") -> HalvingInstance:
    """Bracket-shaped instance: the sizes a deepened Hyperband bracket hands to the variants."""
    rnd = random.Random(10_000 + seed)
    eta = rnd.choice((2, 3))
    s_max = rnd.randint(1, 5 if eta == 2 else 3)
    s = rnd.randint(1, s_max)
    params = HbParams(eta**s_max, eta)
    n, n_old = params.n(s), params.old_pool_size(s)
    spec = SamplerSpec(
        alpha=rnd.uniform(0.1, 0.6),
        eps=rnd.uniform(0.02, 0.3),
        c_max=rnd.uniform(0.1, 2.0),
        p=rnd.choice((0.5, 1.0, 2.0)),
        seed=seed,
    )
    ids = list(range(n))
    rnd.shuffle(ids)
    old, fresh = tuple(sorted(ids[:n_old])), tuple(sorted(ids[n_old:]))
    eps = rnd.uniform(0.05, 0.5)
    inst = HalvingInstance(seed, eta, s, 1, eps, fresh, old, spec)
    if budget == "sufficient":
        # z grows with R only through min{R, .}, so the uncapped value is an upper bound
        z = z_id_sh(inst.theory_spec(R=10**12))
        inst = replace(inst, r=_base_level_for(n, eta, s, z))
    return inst


def theorem1_check(inst: HalvingInstance) -> dict:
    spec = inst.theory_spec()
    z = z_id_sh(spec)
    B = implied_budget(inst.n, inst.eta, inst.s, inst.r)
    out = {"seed": inst.seed, "n": inst.n, "n_old": len(inst.old), "z": z, "B": B}
    if B < z:
        out["status"] = NA
        out["note"] = "guarantee not applicable: B below z_id_sh"
        return out
    bench = inst.bench()
    best = min(inst.nus())
    cache, ledger = EvaluationCache(), PullLedger()
    old = inst.old_run(cache, ledger)
    gaps = {}
    for mode in MODES:
        trace = run_variant(mode, ShInputs(inst.fresh, inst.r, inst.eta, inst.s), old, bench, cache.copy(), PullLedger())
        gaps[mode] = bench.nu(trace.winner) - best
    out["gaps"] = gaps
    out["status"] = PASS if all(g <= inst.eps / 2 for g in gaps.values()) else FAIL
    return out


def theorem1_suite(runs: int, base_seed: int = 0, budget: str = "sufficient") -> List[Check]:
    results = [theorem1_check(theorem1_instance(base_seed + i, budget)) for i in range(runs)]
    failing = [r["seed"] for r in results if r["status"] == FAIL]
    name = "theorem1_eps_half_optimal" + ("" if budget == "sufficient" else "_underbudget")
    return [_summarize(name, [r["status"] for r in results], failing_seeds=failing)]


def theorem1_eid_counterexample() -> dict:
    """A generic (non-bracket-shaped) instance on which eID halving misses eps/2.

    Three arms, ``eta=2``, ``s=1``: arms 0 and 1 ran before with the same
    ``s``, and the old run already filled the single slot of round 1 with
    arm 0. The fresh arm 2 is the best one, yet the fresh quota is zero, so
    it is never promoted, however large the budget.
    """
    curves = {0: _Const(0.30), 1: _Const(0.40), 2: _Const(0.00)}
    oracle = CurveOracle(curves)
    cache = EvaluationCache()
    r, eta, s = 1000, 2, 1
    old = OldShState.from_trace(run_sh(ShInputs((0, 1), r, eta, s), oracle, cache, PullLedger()))
    trace = run_variant("e", ShInputs((2,), r, eta, s), old, oracle, cache.copy(), PullLedger())
    spec = InstanceSpec(tuple(c.nu for c in curves.values()), Envelope(lambda j: 0.0, "0"), eta, r * eta**s, 0.2, s, 2)
    return {"winner": trace.winner, "best": 2, "z": z_id_sh(spec), "B": implied_budget(3, eta, s, r)}


@dataclass(frozen=True)
class _Const:
    nu: float

    def __call__(self, t: int) -> float:
        return self.nu


# -- pull-count ratio bounds ------------------------------------------------


def theorem2_instance(seed: int) -> HalvingInstance:
    rnd = random.Random(20_000 + seed)
    eta = rnd.choice((2, 3))
    s = rnd.randint(0, 3)
    n = rnd.randint(max(2, eta**s), 64)
    n_old = rnd.randint(0, n)
    spec = SamplerSpec(alpha=rnd.uniform(0.1, 0.6), c_max=rnd.uniform(0, 2), p=rnd.choice((0.5, 1.0, 2.0)), seed=seed)
    ids = list(range(n))
    rnd.shuffle(ids)
    old, fresh = tuple(sorted(ids[:n_old])), tuple(sorted(ids[n_old:]))
    return HalvingInstance(seed, eta, s, rnd.randint(1, 8), 0.1, fresh, old, spec)


def theorem2_check(inst: HalvingInstance) -> dict:
    """Measured pulls against the closed-form ratios, in exact rational arithmetic."""
    bench = inst.bench()
    sh_ledger = PullLedger()
    run_sh(ShInputs(inst.old + inst.fresh, inst.r, inst.eta, inst.s), bench, EvaluationCache(), sh_ledger)
    sh = sh_ledger.total
    cache = EvaluationCache()
    old = inst.old_run(cache, PullLedger(), old_s=inst.s)
    pulls = {}
    for mode in MODES:
        ledger = PullLedger()
        run_variant(mode, ShInputs(inst.fresh, inst.r, inst.eta, inst.s), old, bench, cache.copy(), ledger)
        pulls[mode] = ledger.total
    n, n_old, R = inst.n, len(inst.old), inst.R
    lower = sh_pull_lower_bound(n, inst.s, R, inst.eta)
    problems = []
    if sh < lower:
        problems.append("sh_below_lower_bound")
    for mode, p in pulls.items():
        if p > sh:
            problems.append(f"{mode}_exceeds_sh")
    bounds_checked = lower > 0
    if bounds_checked:
        try:
            _, e_cl = eid_pull_bound(n, n_old, inst.s, R, inst.eta)
            _, pd_cl = pdid_pull_bound(n, n_old, inst.s, R, inst.eta)
        except DegenerateParameterError:
            bounds_checked = False
        else:
            if Fraction(pulls["e"]) > e_cl * sh:
                problems.append("e_exceeds_ratio_bound")
            for mode in ("p", "d"):
                if Fraction(pulls[mode]) > pd_cl * sh:
                    problems.append(f"{mode}_exceeds_ratio_bound")
    return {
        "seed": inst.seed,
        "n": n,
        "n_old": n_old,
        "s": inst.s,
        "R": R,
        "eta": inst.eta,
        "sh": sh,
        "pulls": pulls,
        "ratio_bounds_checked": bounds_checked,
        "problems": problems,
        "status": FAIL if problems else PASS,
    }


def theorem2_suite(runs: int, base_seed: int = 0) -> List[Check]:
    results = [theorem2_check(theorem2_instance(base_seed + i)) for i in range(runs)]
    return [
        _summarize(
            "theorem2_pull_bounds",
            [r["status"] for r in results],
            ratio_bounds_checked=sum(r["ratio_bounds_checked"] for r in results),
            failing_seeds=[r["seed"] for r in results if r["status"] == FAIL],
        )
    ]


# -- Hyperband-level eps-optimality guarantee --------------------------------


def thm3_sampling_branch(alpha: float, delta: float, eta: int) -> int:
    return sample_size_for_confidence(alpha, delta) * (eta - 1) + 1


def thm3_search(alpha: float, delta: float, eta: int, eps: float, max_exponent: int = 16) -> dict:
    """Look for an ``R = eta**k`` satisfying the sufficient condition.

    The most favourable instance is used: constant curves (zero envelope)
    with every limit equal, so each ``gamma^-1`` term is 1. Any real instance
    has a budget branch at least this large.
    """
    env = Envelope(lambda j: 0.0, "0")
    tried = []
    for k in range(1, max_exponent + 1):
        R = eta**k
        params = HbParams(R, eta)
        bracket_nus = [[0.0] * params.n(s) for s in range(params.s_max + 1)]
        holds, report = thm3_condition(eta, R, alpha, delta, bracket_nus, env, eps)
        sampling, budget = report.thm3_min_R_terms
        tried.append({"R": R, "sampling_branch": sampling, "budget_branch": budget, "holds": holds})
        if holds:
            return {"satisfiable": True, "R": R, "tried": tried}
    return {"satisfiable": False, "R": None, "tried": tried}


def idhb_returns_eps_optimal(seed: int, R0: int, eta: int, mode: str, spec: SamplerSpec) -> bool:
    bench = SyntheticBenchmark(replace(spec, seed=seed))
    prev = run_hb(HbParams(R0, eta), ConfigStream(seed), bench)
    new = deepen(prev, mode, continue_stream(prev), bench)
    return bench.nu(incumbent(new).config) <= spec.nu_star + spec.eps


def thm3_monte_carlo(runs: int, alpha: float = 0.5, delta: float = 0.1, eta: int = 2, R0: int = 16, mode: str = "e") -> dict:
    spec = SamplerSpec(alpha=alpha, eps=0.1)
    hits = sum(idhb_returns_eps_optimal(seed, R0, eta, mode, spec) for seed in range(runs))
    rate = hits / runs if runs else 0.0
    target = 1 - delta
    return {"runs": runs, "hits": hits, "rate": rate, "threshold": target - binomial_margin(target, max(runs, 1))}


def theorem3_checks(runs: int) -> List[Check]:
    alpha, delta, eta, eps = 0.5, 0.1, 2, 0.1
    search = thm3_search(alpha, delta, eta, eps)
    mc = thm3_monte_carlo(runs, alpha, delta, eta)
    detail = {
        "sampling_branch": thm3_sampling_branch(alpha, delta, eta),
        "condition_satisfiable": search["satisfiable"],
        "empirical_rate": mc["rate"],
        "rate_threshold": mc["threshold"],
        "runs": runs,
    }
    if not search["satisfiable"]:
        detail["note"] = "guarantee not applicable: no tested R meets the sufficient condition"
        return [Check("theorem3_eps_optimal_rate", NA, detail)]
    return [Check("theorem3_eps_optimal_rate", PASS if mc["rate"] >= mc["threshold"] else FAIL, detail)]


# -- persistence and the crossing witness ------------------------------------


def persistence_check(seed: int, R0: int = 16, eta: int = 2) -> dict:
    bench = SyntheticBenchmark(SamplerSpec(seed=seed))
    prev = run_hb(HbParams(R0, eta), ConfigStream(seed), bench)
    text = save_state(prev)
    loaded = load_state(text)
    problems = []
    if save_state(loaded) != text:
        problems.append("round_trip")
    for mode in MODES:
        a = save_state(deepen(prev, mode, continue_stream(prev), bench))
        b = save_state(deepen(loaded, mode, continue_stream(loaded), bench))
        if a != b:
            problems.append(f"deepen_{mode}")
    return {"seed": seed, "problems": problems, "status": FAIL if problems else PASS}


def persistence_suite(runs: int, base_seed: int = 0) -> List[Check]:
    results = [persistence_check(base_seed + i) for i in range(runs)]
    return [_summarize("persistence_round_trip", [r["status"] for r in results])]


CROSSING_EXPECTED = {"e": (0, 8), "p": (0, 10), "d": (6, 10)}


def crossing_outcomes() -> Dict[str, tuple]:
    """``mode -> (winner, pulls)`` on the shipped crossing instance."""
    oracle = CurveOracle(crossing_instance())
    cache = EvaluationCache()
    old = OldShState.from_trace(run_sh(ShInputs((0, 1, 2, 3), 1, 2, 1), oracle, cache, PullLedger()))
    out = {}
    for mode in MODES:
        ledger = PullLedger()
        trace = run_variant(mode, ShInputs((4, 5, 6, 7), 1, 2, 1), old, oracle, cache.copy(), ledger)
        out[mode] = (trace.winner, ledger.total)
    return out


def crossing_check() -> Check:
    got = crossing_outcomes()
    distinct = len(set(got.values())) == len(got)
    ok = distinct and got == CROSSING_EXPECTED
    return Check("variant_distinction", PASS if ok else FAIL, {"outcomes": {m: list(v) for m, v in got.items()}})


# -- suites ------------------------------------------------------------------

SUITES = ("default", "underbudget", "thm3", "quick")


def run_suite(name: str, runs: int) -> List[Check]:
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
    if name == "underbudget":
        return theorem1_suite(runs, budget="underbudget")
    if name == "thm3":
        return theorem3_checks(runs)
    checks = []
    checks += deepening_suite(runs)
    checks += theorem1_suite(runs)
    checks += theorem2_suite(runs)
    checks += persistence_suite(min(runs, 20))
    checks.append(crossing_check())
    if name == "default":
        checks += theorem3_checks(runs)
    return checks


# -- comparison harness ------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    seed: int
    mode: str
    incumbent_loss: float
    budget_deepen: int
    budget_lineage: int
    reused_evals: int

    def as_list(self) -> list:
        return [self.seed, self.mode, repr(self.incumbent_loss), self.budget_deepen, self.budget_lineage, self.reused_evals]


def compare_seed(seed: int, R0: int, eta: int, modes: Sequence[str], replay: bool = True, spec: Optional[SamplerSpec] = None) -> List[ComparisonRow]:
    spec = replace(spec or SamplerSpec(), seed=seed)
    bench = SyntheticBenchmark(spec)
    prev = run_hb(HbParams(R0, eta), ConfigStream(seed), bench)
    rows = []
    for mode in modes:
        if mode == "ih":
            if replay:
                sampler = replay_sampler(prev)
            else:
                sampler = ConfigStream(seed, prev.next_config_id + sum(deepening_draws(prev)))
            fresh = run_hb(HbParams(R0 * eta, eta), sampler, bench)
            rows.append(
                ComparisonRow(seed, mode, incumbent(fresh).loss, fresh.ledger.total, prev.ledger.total + fresh.ledger.total, 0)
            )
        else:
            new = deepen(prev, mode, continue_stream(prev), bench)
            rows.append(
                ComparisonRow(
                    seed,
                    mode,
                    incumbent(new).loss,
                    new.ledger.total - prev.ledger.total,
                    new.ledger.total,
                    reused_evaluations(prev, new),
                )
            )
    return rows


def _compare_job(args):
    return compare_seed(*args)


def compare(
    seeds: Sequence[int],
    R0: int = 16,
    eta: int = 2,
    modes: Sequence[str] = COMPARE_MODES,
    replay: bool = True,
    spec: Optional[SamplerSpec] = None,
    jobs: int = 1,
) -> List[ComparisonRow]:
    """Rows for every ``(seed, mode)``, ordered by seed then by the order of ``modes``."""
    if len(set(seeds)) != len(seeds):
        raise ValueError("seeds must be distinct")
    bad = [m for m in modes if m not in COMPARE_MODES]
    if bad:
        raise ValueError(f"unknown modes {bad}; expected a subset of {COMPARE_MODES}")
    HbParams(R0 * eta, eta)  # validate before spawning work
    tasks = [(seed, R0, eta, tuple(modes), replay, spec) for seed in sorted(seeds)]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            chunks = list(pool.map(_compare_job, tasks))
    else:
        chunks = [_compare_job(t) for t in tasks]
    return [row for chunk in chunks for row in chunk]


def rows_to_csv(rows: Sequence[ComparisonRow]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(row.as_list())
    return out.getvalue()


def aggregate(rows: Sequence[ComparisonRow]) -> Dict[str, dict]:
    """Per mode: mean |incumbent gap| to the ih row and mean deepen-phase budget ratio."""
    base = {r.seed: r for r in rows if r.mode == "ih"}
    out: Dict[str, dict] = {}
    for mode in dict.fromkeys(r.mode for r in rows):
        mine = [r for r in rows if r.mode == mode and r.seed in base]
        if not mine:
            continue
        gaps = [abs(r.incumbent_loss - base[r.seed].incumbent_loss) for r in mine]
        ratios = [r.budget_deepen / base[r.seed].budget_deepen for r in mine]
        out[mode] = {
            "seeds": len(mine),
            "mean_abs_gap": mean(gaps),
            "max_abs_gap": max(gaps),
            "mean_budget_ratio": mean(ratios),
            "max_budget_ratio": max(ratios),
        }
    return out


def aggregate_table(agg: Dict[str, dict]) -> str:
    lines = ["mode,seeds,mean_abs_gap,max_abs_gap,mean_budget_ratio,max_budget_ratio"]
    for mode, a in agg.items():
        lines.append(
            f"{mode},{a['seeds']},{a['mean_abs_gap']:.6g},{a['max_abs_gap']:.6g},"
            f"{a['mean_budget_ratio']:.6g},{a['max_budget_ratio']:.6g}"
        )
    return "\n".join(lines) + "\n"
