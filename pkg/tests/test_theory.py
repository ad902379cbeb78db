import math
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from idhb.core import DomainError, Envelope, EvaluationCache, PullLedger
from idhb.hyperband import HbParams
from idhb.sh import ShInputs, run_sh
from idhb.theory import (
    DegenerateParameterError,
    InstanceSpec,
    ceil_log,
    eid_pull_bound,
    gamma_bar_inverse,
    pdid_pull_bound,
    sample_size_for_confidence,
    sh_pull_lower_bound,
    thm3_budget_factor,
    thm3_condition,
    z_id_sh,
    z_id_sh_bracket,
)
from conftest import TieOracle

inv_j = Envelope(lambda j: 1.0 / j, "1/j")


def test_z_hand_example():
    spec = InstanceSpec((0, 0.5, 0.5, 1), inv_j, 2, 1000, 0.2)
    assert z_id_sh(spec) == 60


@pytest.mark.parametrize("n", [2, 3, 4, 9])
def test_z_equal_limits(n):
    spec = InstanceSpec((0.3,) * n, inv_j, 2, 1000, 0.4)
    assert z_id_sh(spec) == 2 * ceil_log(n, 2) * n * 11


def test_z_capped_by_R():
    spec = InstanceSpec((0, 0.5, 0.7), inv_j, 3, 1, 0.01)
    assert z_id_sh(spec) == 3 * 1 * 3 * 2


def test_z_needs_two_arms_and_bracket_form():
    with pytest.raises(DomainError):
        z_id_sh(InstanceSpec((0.1,), inv_j, 2, 10, 0.1))
    spec = InstanceSpec((0, 0.5, 0.5, 1), inv_j, 2, 1000, 0.2)
    # bracket s=4 of s_max=4 has 16 arms: 4 rounds instead of 2
    assert z_id_sh_bracket(spec, 4, 4) == 2 * 4 * 15


def test_instance_spec_validation():
    with pytest.raises(DomainError):
        InstanceSpec((0, 1), inv_j, 2, 4, 0.0)
    with pytest.raises(DomainError):
        InstanceSpec((0, 1), inv_j, 2, 4, 0.1, n_old=3)
    assert InstanceSpec((0.5, 0.1), inv_j, 2, 4, 0.1).nus == (0.1, 0.5)


def test_eid_bound_spot_values():
    raw, cl = eid_pull_bound(16, 10, 2, 100, 2)
    assert raw == Fraction(5, 8) and cl == raw
    raw, _ = eid_pull_bound(16, 15, 3, 100, 2)
    assert raw == 1 - Fraction(2792, 4692)
    assert abs(float(raw) - 0.405) < 5e-4
    raw, cl = eid_pull_bound(16, 0, 2, 100, 2)
    assert raw >= 1 and cl == 1


def test_pdid_bound_spot_values():
    assert pdid_pull_bound(16, 10, 2, 100, 2)[0] == Fraction(19, 20)
    assert pdid_pull_bound(16, 8, 2, 100, 2) == (1, 1)
    assert pdid_pull_bound(16, 0, 0, 2, 2)[1] == 1


def test_sh_lower_bound_examples():
    assert sh_pull_lower_bound(4, 2, 4, 2) == 1
    assert sh_pull_lower_bound(1, 0, 1, 2) == 0


def test_bound_errors():
    with pytest.raises(DegenerateParameterError):
        eid_pull_bound(1, 0, 0, 5, 2)
    with pytest.raises(DegenerateParameterError):
        pdid_pull_bound(7, 3, 0, 1, 3)
    with pytest.raises(DomainError):
        eid_pull_bound(4, 5, 1, 4, 2)
    with pytest.raises(DomainError):
        pdid_pull_bound(4, 1, 1, 4, 1)


def test_sample_size_examples():
    assert sample_size_for_confidence(0.5, 0.1) == 4
    assert sample_size_for_confidence(0.9, 0.5) == 1
    assert sample_size_for_confidence(0.5, 0.5) == 1
    assert sample_size_for_confidence(0.5, 0.25) == 2
    for bad in [(0, 0.1), (1, 0.1), (0.5, 0), (0.5, 1)]:
        with pytest.raises(DomainError):
            sample_size_for_confidence(*bad)


@given(st.floats(0.01, 0.99), st.floats(1e-6, 0.99))
def test_sample_size_is_minimal(alpha, delta):
    k = sample_size_for_confidence(alpha, delta)
    assert (1 - alpha) ** k <= delta * (1 + 1e-9)
    assert k == 1 or (1 - alpha) ** (k - 1) > delta * (1 + 1e-9)


def test_thm3_sampling_branch_and_threshold():
    holds, rep = thm3_condition(2, 4, 0.5, 0.1, [[0.0, 0.0]], inv_j, 0.1)
    assert rep.thm3_min_R_terms[0] == 5 and rep.sample_size == 4
    assert not holds and rep.notes


def test_thm3_constant_limits_closed_form():
    # eps/4 >= gamma(1) makes every inverse 1, so each bracket contributes 2 * n_s
    p = HbParams(16, 2)
    nus = [[0.2] * p.n(s) for s in range(p.s_max + 1)]
    assert gamma_bar_inverse(nus, inv_j, 4.0, 16) == 2 * 16
    _, rep = thm3_condition(2, 16, 0.5, 0.1, nus, inv_j, 4.0)
    S = 4
    factor = 2 * (math.log2(4) + 4 + S / 2 - math.log2(math.factorial(S + 1)) / (S + 1))
    assert rep.thm3_min_R_terms[1] == pytest.approx(factor * 32, rel=1e-12)


def test_thm3_budget_factor_domain():
    with pytest.raises(DomainError, match="log_eta"):
        thm3_budget_factor(2, 3)
    assert thm3_budget_factor(10**30, 2) > 0  # factorial handled in log space


@given(st.integers(2, 60), st.integers(0, 4), st.integers(1, 200), st.sampled_from([2, 3, 4]))
def test_clamped_bounds_nonincreasing_in_reuse(n, s, R, eta):
    prev_e = prev_p = None
    for n_old in range(n + 1):
        try:
            _, e = eid_pull_bound(n, n_old, s, R, eta)
            _, p = pdid_pull_bound(n, n_old, s, R, eta)
        except DegenerateParameterError:
            return
        assert 0 <= e <= 1 and 0 <= p <= 1
        if prev_e is not None:
            assert e <= prev_e and p <= prev_p
        prev_e, prev_p = e, p


@given(st.integers(1, 80), st.integers(0, 4), st.integers(1, 4), st.sampled_from([2, 3]), st.integers(0, 10**6))
def test_measured_sh_pulls_respect_lower_bound(n, s, r, eta, seed):
    ledger = PullLedger()
    run_sh(ShInputs(tuple(range(n)), r, eta, s), TieOracle(seed), EvaluationCache(), ledger)
    assert ledger.total >= sh_pull_lower_bound(n, s, r * eta**s, eta)
