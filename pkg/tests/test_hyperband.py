import json

import pytest
from hypothesis import given, strategies as st

from idhb.bench import PowerCurve, SamplerSpec, SyntheticBenchmark
from idhb.core import ContractError, CurveOracle, DomainError
from idhb.experiments import budget_cap_violations
from idhb.hyperband import (
    ConfigStream,
    HbParams,
    SamplerExhausted,
    ScriptedSampler,
    StateChecksumError,
    StateLoadError,
    StateVersionError,
    continue_stream,
    deepen,
    deepening_draws,
    ilog,
    incumbent,
    load_state,
    replay_sampler,
    run_hb,
    save_state,
    to_document,
)
from conftest import TieOracle


def bench(seed=0):
    return SyntheticBenchmark(SamplerSpec(seed=seed))


def test_bracket_table_R16():
    p = HbParams(16, 2)
    assert (p.s_max, p.B) == (4, 80)
    assert [(n, r) for _, n, r in p.brackets()] == [(16, 1), (10, 2), (7, 4), (5, 8), (5, 16)]


def test_bracket_table_R32_and_deepening_sizes():
    p = HbParams(32, 2)
    assert [n for _, n, _ in p.brackets()] == [32, 20, 12, 8, 6, 6]
    assert [r for _, _, r in p.brackets()] == [1, 2, 4, 8, 16, 32]
    assert [p.old_pool_size(s) for s in range(5, -1, -1)] == [16, 10, 7, 5, 5, 0]
    prev = run_hb(HbParams(16, 2), ConfigStream(0), bench())
    assert deepening_draws(prev) == [16, 10, 5, 3, 1, 6]


def test_bracket_table_eta3():
    p = HbParams(27, 3)
    assert (p.s_max, p.B) == (3, 108)
    assert [n for _, n, _ in p.brackets()] == [27, 12, 6, 4]


def test_degenerate_R1():
    p = HbParams(1, 2)
    assert (p.s_max, p.B, p.brackets()) == (0, 1, [(0, 1, 1)])
    state = run_hb(p, ConfigStream(0), bench())
    assert state.ledger.total == 1


def test_params_validation():
    for R, eta in [(0, 2), (16, 1), (12, 2)]:
        with pytest.raises(DomainError):
            HbParams(R, eta)


@given(st.sampled_from([2, 3, 4]), st.integers(1, 7), st.integers(1, 5))
def test_old_pool_size_matches_previous_bracket(eta, s_max, mult):
    R = mult * eta**s_max
    if R % eta ** ilog(R, eta):
        return
    old, new = HbParams(R, eta), HbParams(R * eta, eta)
    for s in range(1, new.s_max + 1):
        assert new.old_pool_size(s) == old.n(s - 1)
        assert new.r(s) == old.r(s - 1)


def test_sampler_exhaustion():
    with pytest.raises(SamplerExhausted):
        run_hb(HbParams(16, 2), ConfigStream(0, limit=20), bench())


def test_deepen_preconditions():
    prev = run_hb(HbParams(4, 2), ConfigStream(0), bench())
    with pytest.raises(DomainError):
        deepen(prev, "x", continue_stream(prev), bench())
    prev.brackets.pop()
    with pytest.raises(ContractError):
        deepen(prev, "e", continue_stream(prev), bench())


def test_deepen_twice_and_level_alignment():
    b = bench(3)
    s0 = run_hb(HbParams(16, 2), ConfigStream(3), b)
    s1 = deepen(s0, "e", continue_stream(s0), b)
    s2 = deepen(s1, "p", continue_stream(s1), b)
    assert (s1.R, s2.R, s2.t) == (32, 64, 2)
    for prev, new in [(s0, s1), (s1, s2)]:
        for bracket in new.brackets:
            if bracket.s:
                old = prev.bracket(bracket.s - 1)
                assert [it.level for it in old.iterations] == [it.level for it in bracket.iterations[:-1]]
                assert set(old.arms) <= set(bracket.arms)
    # old evaluations are never charged again
    assert s2.ledger.entries[: len(s1.ledger.entries)] == s1.ledger.entries
    assert len(set(s2.ledger.entries)) == len(s2.ledger.entries)


def test_bracket_records_are_consistent():
    state = run_hb(HbParams(27, 3), ConfigStream(1), TieOracle(1))
    for b in state.brackets:
        assert [it.level for it in b.iterations] == [b.r_s * 3**i for i in range(b.s + 1)]
        for i, it in enumerate(b.iterations):
            assert not set(it.promoted) & set(it.discarded)
            for c in it.losses:
                assert (c, it.level) in state.cache
            if i:
                assert set(it.promoted) <= set(b.iterations[i - 1].promoted)


def test_incumbent_examples():
    one = run_hb(HbParams(1, 2), ScriptedSampler([[0]]), CurveOracle({0: PowerCurve(0.3, 0)}))
    assert (incumbent(one).config, incumbent(one).loss) == (0, 0.3)
    oracle = CurveOracle({0: PowerCurve(0.2, 0), 1: PowerCurve(0.1, 0), 2: PowerCurve(0.1, 0)})
    state = run_hb(HbParams(2, 2), ScriptedSampler([[0, 1], [2, 0]]), oracle)
    inc = incumbent(state)
    assert (inc.config, inc.loss, inc.level) == (1, 0.1, 2)
    state.brackets.clear()
    with pytest.raises(ContractError):
        incumbent(state)


def test_incumbent_ties_prefer_smaller_id():
    oracle = CurveOracle({5: PowerCurve(0.1, 0), 3: PowerCurve(0.1, 0)})
    state = run_hb(HbParams(2, 2), ScriptedSampler([[5, 3], [5, 3]]), oracle)
    assert incumbent(state).config == 3


@given(st.sampled_from([(2, 1), (2, 4), (2, 8), (2, 16), (3, 3), (3, 9), (3, 18), (3, 6)]), st.integers(0, 10**6), st.sampled_from("epd"))
def test_budget_cap_every_bracket(case, seed, mode):
    eta, R = case
    oracle = TieOracle(seed)
    prev = run_hb(HbParams(R, eta), ConfigStream(seed), oracle)
    new = deepen(prev, mode, continue_stream(prev), oracle)
    assert budget_cap_violations(prev) == [] and budget_cap_violations(new) == []


@given(st.sampled_from([(2, 2), (2, 8), (3, 3), (3, 6)]), st.integers(0, 10**6))
def test_did_deepening_equals_replayed_fresh_run(case, seed):
    eta, R = case
    oracle = TieOracle(seed, values=3)
    prev = run_hb(HbParams(R, eta), ConfigStream(seed), oracle)
    deep = deepen(prev, "d", continue_stream(prev), oracle)
    fresh = run_hb(HbParams(R * eta, eta), replay_sampler(prev), oracle)
    assert incumbent(deep) == incumbent(fresh)
    for a, b in zip(deep.brackets, fresh.brackets):
        assert [set(x) for x in a.round_sets()] == [set(x) for x in b.round_sets()]
    saved = sum(lv for c, lv in fresh.ledger.entries if (c, lv) in prev.cache)
    assert deep.ledger.total - prev.ledger.total == fresh.ledger.total - saved


# -- persistence ------------------------------------------------------------------


@pytest.fixture
def saved():
    b = bench(2)
    state = run_hb(HbParams(8, 2), ConfigStream(2), b)
    return state, save_state(state), b


def test_round_trip_is_byte_identical(saved):
    state, text, _ = saved
    again = load_state(text)
    assert save_state(again) == text
    assert again.rng == state.rng and again.cache == state.cache
    doc = json.loads(text)
    for key in ("format_version", "t", "eta", "R_t", "rng", "brackets", "ledger", "next_config_id"):
        assert key in doc
    assert set(doc["rng"]) == {"algorithm_name", "seed", "position"}
    assert set(doc["brackets"][0]["iterations"][0]) == {"r_i", "losses", "promoted", "discarded"}


@pytest.mark.parametrize("mode", "epd")
def test_deepen_after_reload(saved, mode):
    state, text, b = saved
    loaded = load_state(text)
    assert save_state(deepen(loaded, mode, continue_stream(loaded), b)) == save_state(
        deepen(state, mode, continue_stream(state), b)
    )


def test_truncated_file_names_section(saved):
    _, text, _ = saved
    cut = text[: text.index('"ledger"') + 20]
    with pytest.raises(StateLoadError) as err:
        load_state(cut)
    assert err.value.section == "ledger" and "ledger" in str(err.value)
    with pytest.raises(StateLoadError) as err:
        load_state(text[:40])
    assert err.value.section in ("t", "eta", "R_t", "rng")


def test_version_and_checksum_errors(saved):
    _, text, _ = saved
    doc = json.loads(text)
    doc["format_version"] = 99
    with pytest.raises(StateVersionError):
        load_state(json.dumps(doc))
    doc = json.loads(text)
    doc["t"] = 5
    with pytest.raises(StateChecksumError):
        load_state(json.dumps(doc))
    doc = json.loads(text)
    del doc["brackets"]
    with pytest.raises(StateLoadError, match="brackets"):
        load_state(json.dumps(doc))


def test_document_checksum_covers_body(saved):
    state, _, _ = saved
    doc = to_document(state)
    assert len(doc["checksum"]) == 64
