import pytest
from hypothesis import given, strategies as st

from idhb.bench import (
    CrossingCurve,
    PowerCurve,
    SamplerSpec,
    SyntheticBenchmark,
    TabularParseError,
    budget_to_fraction,
    crossing_instance,
    dump_tabular,
    envelope_for,
    export_tabular,
    load_tabular,
    materialize,
    parse_tabular,
    sample_configs,
)
from idhb.core import CurveOracle, DomainError, EvaluationCache, PullLedger, envelope_inverse
from idhb.sh import OldShState, ShInputs, run_did_sh, run_pid_sh, run_sh


def test_sampler_alpha_fraction():
    spec = SamplerSpec(alpha=0.5, eps=0.1, seed=7)
    configs = sample_configs(spec, 10_000)
    frac = sum(curve.nu <= spec.nu_star + spec.eps for _, curve in configs) / len(configs)
    assert abs(frac - 0.5) <= 0.02


def test_sampler_trivia():
    spec = SamplerSpec(seed=3)
    assert sample_configs(spec, 0) == []
    assert sample_configs(spec, 50) == sample_configs(spec, 50)
    assert sample_configs(spec, 5) != sample_configs(SamplerSpec(seed=4), 5)
    for bad in [dict(alpha=0), dict(alpha=1), dict(eps=0), dict(c_max=-1)]:
        with pytest.raises(DomainError):
            SamplerSpec(**bad)
    with pytest.raises(DomainError):
        sample_configs(spec, -1)


def test_envelope_examples():
    assert envelope_for(1, 1)(4) == 0.25
    zero = envelope_for(0, 1)
    assert all(envelope_inverse(zero, y, 100) == 1 for y in (1e-9, 0.5, 3))


@given(st.floats(0.05, 0.95), st.floats(0, 3), st.floats(0.25, 3), st.integers(0, 10**6))
def test_envelope_dominates_sampled_curves(alpha, c_max, p, seed):
    spec = SamplerSpec(alpha=alpha, c_max=c_max, p=p, seed=seed)
    bench = SyntheticBenchmark(spec)
    env = bench.envelope
    for c in range(20):
        curve = bench.curve(c)
        for j in range(1, 65):
            assert abs(curve(j) - curve.nu) <= env(j) + 1e-15
            assert env(j) >= env(j + 1)


def test_curves():
    assert PowerCurve(0.5, 1.0)(4) == 0.75
    with pytest.raises(DomainError):
        PowerCurve(0.5, -1.0)
    with pytest.raises(DomainError):
        PowerCurve(0.5, 1.0)(0)
    c = CrossingCurve(0.1, 0.4, 3)
    assert (c(2), c(3), c.nu, c.deviation()) == (0.1, 0.4, 0.4, pytest.approx(0.3))


GOOD = "config_id,fidelity,loss\n" + "".join(f"{c},{f},{c + 1 / f}\n" for c in range(3) for f in range(1, 6))


def test_tabular_load_and_round_trip(tmp_path):
    table = parse_tabular("# comment\n" + GOOD)
    assert len(table) == 15 and table.R_cap == 5
    assert table.loss(2, 4) == 2.25
    path = tmp_path / "t.csv"
    export_tabular(table, path)
    again = load_tabular(path)
    assert again.grid == table.grid and dump_tabular(again) == path.read_text()
    with pytest.raises(FileExistsError):
        export_tabular(table, path)
    export_tabular(table, path, force=True)


@pytest.mark.parametrize(
    "text,needle,line",
    [
        (GOOD.replace("1,3,1.3333333333333333\n", ""), "missing cell", None),
        (GOOD + "0,1,0.5\n", "duplicate", 17),
        (GOOD.replace("2,5,2.2", "2,5,abc"), "non-numeric", 16),
        ("config,fid,loss\n", "header", 1),
        (GOOD + "0,2\n", "3 fields", 17),
        (GOOD + "0,x,1\n", "integers", 17),
        (GOOD + "9,0,1\n", "fidelity", 17),
        ("", "header", None),
    ],
)
def test_tabular_errors(text, needle, line):
    with pytest.raises(TabularParseError, match=needle) as err:
        parse_tabular(text)
    assert err.value.line == line


def test_missing_cell_names_the_cell():
    with pytest.raises(TabularParseError, match=r"config 1, fidelity 3"):
        parse_tabular(GOOD.replace("1,3,1.3333333333333333\n", ""))


def test_tabular_lookup_errors():
    table = parse_tabular(GOOD)
    with pytest.raises(DomainError):
        table.loss(0, 7)
    with pytest.raises(KeyError):
        table.loss(5, 1)
    oracle = table.oracle(1)
    assert sorted(oracle.order) == [0, 1, 2]
    with pytest.raises(KeyError):
        oracle.loss(3, 1)


def test_materialize_matches_curves():
    spec = SamplerSpec(seed=11)
    table = materialize(spec, 8, 16)
    bench = SyntheticBenchmark(spec)
    assert all(table.loss(c, f) == bench.loss(c, f) for c in range(8) for f in range(1, 17))
    assert len(parse_tabular(dump_tabular(materialize(spec, 0, 4)))) == 0


def test_budget_to_fraction():
    assert budget_to_fraction(8, 32) == 0.25
    assert budget_to_fraction(32, 32) == 1.0
    assert budget_to_fraction(1, 16) == 0.0625
    for bad in [(0, 4), (5, 4)]:
        with pytest.raises(DomainError):
            budget_to_fraction(*bad)


def test_crossing_instance_separates_pid_and_did():
    oracle = CurveOracle(crossing_instance())
    cache = EvaluationCache()
    old = OldShState.from_trace(run_sh(ShInputs((0, 1, 2, 3), 1, 2, 1), oracle, cache, PullLedger()))
    inputs = ShInputs((4, 5, 6, 7), 1, 2, 1)
    pid = run_pid_sh(inputs, old, oracle, cache.copy(), PullLedger())
    did = run_did_sh(inputs, old, oracle, cache.copy(), PullLedger())
    assert (pid.winner, did.winner) == (0, 6)
