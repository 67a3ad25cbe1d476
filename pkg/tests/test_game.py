import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pgg_evo.errors import DomainError
from pgg_evo.game import (
    COOPERATE, DEFECT, EnvParams, GameParams, PopulationProfile, binom_cdf, binom_range,
    binom_sf, coop_defect_ratio, group_comp_pmf, mistake_pmf, oneshot_payoff,
    oneshot_payoff_err, params_from_json, params_to_json,
)
from pgg_evo.validation import brute_force_stage_payoff

P10 = GameParams(10, 10, 5)


@st.composite
def games(draw, max_n=12):
    n = draw(st.integers(2, max_n))
    b = draw(st.floats(0.5, 50.0))
    # keep c a relative 1e-6 away from both bounds so the strict inequalities survive rounding
    lo, hi = b / n * (1 + 1e-6), b * (1 - 1e-6)
    c = draw(st.floats(lo, hi))
    return GameParams(n, b, c)


def test_oneshot_examples():
    assert oneshot_payoff(COOPERATE, 9, P10) == 5.0
    assert oneshot_payoff(DEFECT, 0, P10) == 0.0
    assert oneshot_payoff(DEFECT, 9, P10) == 9.0


@pytest.mark.parametrize("j", [-1, 10])
def test_oneshot_rejects_bad_count(j):
    with pytest.raises(DomainError):
        oneshot_payoff(COOPERATE, j, P10)


def test_oneshot_rejects_bad_action():
    with pytest.raises(DomainError):
        oneshot_payoff("X", 0, P10)


def test_mistake_pmf_examples():
    assert mistake_pmf(9, 0, 0.05) == pytest.approx(0.95**9, rel=1e-15)
    assert mistake_pmf(9, 0, 0.05) == pytest.approx(0.6302494, abs=1e-7)
    assert mistake_pmf(5, 0, 0.0) == 1.0
    assert mistake_pmf(5, 2, 0.0) == 0.0
    assert mistake_pmf(2, 1, 0.5) == 0.5


def test_mistake_pmf_matches_pattern_count():
    eps = 0.05
    tally = [0.0] * 10
    for pattern in itertools.product((0, 1), repeat=9):
        q = sum(pattern)
        tally[q] += eps**q * (1 - eps) ** (9 - q)
    for q in range(10):
        assert mistake_pmf(9, q, eps) == pytest.approx(tally[q], rel=1e-12)


@pytest.mark.parametrize("args", [(3, 4, 0.1), (3, -1, 0.1), (3, 1, 1.5), (3, 1, -0.1)])
def test_mistake_pmf_domain(args):
    with pytest.raises(DomainError):
        mistake_pmf(*args)


def test_group_comp_examples():
    assert group_comp_pmf(9, 1.0, 10) == 1.0
    assert group_comp_pmf(0, 0.0, 10) == 1.0
    assert group_comp_pmf(5, 0.5, 10) == pytest.approx(math.comb(9, 5) / 2**9, rel=1e-15)
    assert group_comp_pmf(5, 0.5, 10) == pytest.approx(0.2460938, abs=1e-7)
    with pytest.raises(DomainError):
        group_comp_pmf(10, 0.5, 10)


def test_distributions_sum_to_one_on_grid():
    grid = np.round(np.arange(0, 1.0, 0.01), 2)
    for x in grid:
        for j in (1, 5, 12):
            assert abs(math.fsum(mistake_pmf(j, q, x) for q in range(j + 1)) - 1) < 1e-12
        for n in (2, 10):
            assert abs(math.fsum(group_comp_pmf(j, x, n) for j in range(n)) - 1) < 1e-12


def test_binomial_tails_consistent():
    for j, p in itertools.product((1, 9, 30), (1e-9, 0.05, 0.5, 0.97)):
        for cut in range(-1, j + 1):
            assert binom_cdf(j, cut, p) + binom_sf(j, cut, p) == pytest.approx(1.0, abs=1e-14)
            assert binom_range(j, 0, cut, p) == pytest.approx(binom_cdf(j, cut, p), abs=1e-14)


def test_pmf_survives_underflow():
    from scipy.stats import binom

    for j, q, p in [(5000, 500, 0.1), (1100, 1000, 0.9), (3000, 3, 1e-3)]:
        assert mistake_pmf(j, q, p) == pytest.approx(binom.pmf(q, j, p), rel=1e-9)


def test_err_payoff_examples():
    assert oneshot_payoff_err(COOPERATE, 9, P10, 0.05) == pytest.approx(4.75, abs=1e-12)
    assert oneshot_payoff_err(DEFECT, 9, P10, 0.05) == pytest.approx(8.55, abs=1e-12)
    eps = 0.05
    hand = (1 - eps) * (10 * (1 + 9 * (1 - eps)) / 10 - 5) + eps * 10 * 9 * (1 - eps) / 10
    assert oneshot_payoff_err(COOPERATE, 9, P10, eps) == pytest.approx(hand, abs=1e-12)


@given(games(), st.integers(0, 11), st.sampled_from([COOPERATE, DEFECT]))
def test_zero_error_reduction_is_exact(params, j, action):
    j = min(j, params.n - 1)
    assert oneshot_payoff_err(action, j, params, 0.0) == oneshot_payoff(action, j, params)


@settings(max_examples=60, deadline=None)
@given(games(max_n=13), st.integers(0, 12), st.floats(0.0, 0.99),
       st.sampled_from([COOPERATE, DEFECT]))
def test_err_payoff_matches_enumeration(params, j, eps, action):
    j = min(j, params.n - 1)
    expected = brute_force_stage_payoff(action, j, params, eps)
    assert abs(oneshot_payoff_err(action, j, params, eps) - expected) < 1e-12


@given(games(), st.integers(0, 11))
def test_defection_dominates_stage_game(params, j):
    j = min(j, params.n - 1)
    gap = oneshot_payoff(DEFECT, j, params) - oneshot_payoff(COOPERATE, j, params)
    assert gap == pytest.approx(params.c - params.b / params.n, abs=1e-12)
    assert gap > 0


def test_ratio_examples():
    assert coop_defect_ratio(P10) == pytest.approx(5 / 9, abs=1e-15)
    assert coop_defect_ratio(GameParams(2, 2, 1.5)) == pytest.approx(0.5, abs=1e-15)
    assert coop_defect_ratio(GameParams(10, 10, 10 - 1e-9)) < 1e-9


@given(games(max_n=30), st.floats(0.0, 0.99))
def test_ratio_identity(params, eps):
    n = params.n
    r = oneshot_payoff_err(COOPERATE, n - 1, params, eps) / oneshot_payoff_err(DEFECT, n - 1, params, eps)
    assert abs(r - coop_defect_ratio(params)) < 1e-12
    assert 0 < coop_defect_ratio(params) < 1


@pytest.mark.parametrize("n,b,c", [(1, 2, 1), (10, 10, 1), (10, 10, 10), (10, 10, 11),
                                   (10, -1, 0.5), (2.5, 2, 1.5), (10, math.inf, 5)])
def test_invalid_game_params(n, b, c):
    with pytest.raises(DomainError):
        GameParams(n, b, c)


@pytest.mark.parametrize("delta,eps", [(0, 0), (1.1, 0), (0.9, 1.0), (0.9, -0.1)])
def test_invalid_env(delta, eps):
    with pytest.raises(DomainError):
        EnvParams(delta, eps)


def test_finite_horizon_guard():
    EnvParams(0.9).require_finite_horizon()
    with pytest.raises(DomainError):
        EnvParams(1.0, 0.1).require_finite_horizon()


def test_profile():
    prof = PopulationProfile({9: 0.5, 3: 0.25, 10: 0.25})
    assert prof.counts(101) == {3: 25, 9: 51, 10: 25} or sum(prof.counts(101).values()) == 101
    assert sum(prof.counts(7).values()) == 7
    assert PopulationProfile.monomorphic(4).counts(20) == {4: 20}
    with pytest.raises(DomainError):
        PopulationProfile({1: 0.5, 2: 0.4})
    with pytest.raises(DomainError):
        PopulationProfile({1: 1.5, 2: -0.5})
    with pytest.raises(DomainError):
        PopulationProfile({11: 1.0}).validate_for(10)


def test_json_round_trip():
    env = EnvParams(0.9, 0.05)
    data = params_to_json(P10, env)
    assert data == {"n": 10, "b": 10.0, "c": 5.0, "delta": 0.9, "epsilon": 0.05}
    assert params_from_json(data) == (P10, env)
    with pytest.raises(DomainError):
        params_from_json({**data, "extra": 1})
    with pytest.raises(DomainError):
        params_from_json({"n": 10, "b": 10})
