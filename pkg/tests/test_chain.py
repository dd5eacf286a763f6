import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypercollapse.beta import BetaSeries
from hypercollapse.chain import (
    ChainState,
    initial_state,
    lambda2,
    lambda2_table,
    lambda2_envelope_error,
    mean_increment,
    run,
    transition,
    u_mean,
)

SERIES = BetaSeries((0.0, 0.3, 0.5, 0.4, 0.2))


def exact_lambda2(coeffs, N, n):
    # N * sum_i beta_{2+i} C(n, i) / C(N, i + 2), all in exact rationals
    total = Fraction(0)
    for i in range(len(coeffs) - 2):
        if i > n:
            break
        total += Fraction(coeffs[2 + i]) * math.comb(n, i) / math.comb(N, i + 2)
    return N * total


def test_lambda2_first_step():
    s = BetaSeries((0.0, 0.1, 0.7, 0.3))
    assert lambda2(s, 50, 0) == pytest.approx(2 * 0.7 / 49, rel=1e-15)


def test_lambda2_exact_rational():
    value = lambda2(BetaSeries((0, 0, 1, 1, 1)), 20, 5)
    assert value == pytest.approx(float(exact_lambda2((0, 0, 1, 1, 1), 20, 5)), rel=1e-14)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.integers(0, 5), min_size=3, max_size=9),
    st.integers(2, 60),
    st.data(),
)
def test_lambda2_matches_rational_oracle(coeffs, N, data):
    n = data.draw(st.integers(0, N - 2))
    s = BetaSeries(tuple(float(c) for c in coeffs))
    expected = float(exact_lambda2(coeffs, N, n))
    assert lambda2(s, N, n) == pytest.approx(expected, rel=1e-12, abs=1e-300)
    assert lambda2_table(s, N)[n] == pytest.approx(expected, rel=1e-12, abs=1e-300)
    assert lambda2(s, N, n) >= 0.0


def test_lambda2_domain():
    with pytest.raises(ValueError):
        lambda2(SERIES, 10, 9)
    with pytest.raises(ValueError):
        lambda2(SERIES, 10, -1)
    assert u_mean(SERIES, 10, 9) == 0.0


def test_lambda2_long_support_truncation():
    # many coefficients: the early exit must not change the value noticeably
    coeffs = tuple(1.0 / math.factorial(j) for j in range(120))
    s = BetaSeries(coeffs)
    N = 400
    for n in (0, 10, 200, 398):
        expected = float(exact_lambda2([Fraction(1, math.factorial(j)) for j in range(120)], N, n))
        assert lambda2(s, N, n) == pytest.approx(expected, rel=1e-12)


def test_lambda2_envelope_shrinks():
    errors = [lambda2_envelope_error(SERIES, N) for N in (100, 1000, 10_000)]
    assert errors[0] > errors[1] > errors[2]
    ratios = [e / (math.log(N) ** 2 / N) for e, N in zip(errors, (100, 1000, 10_000))]
    assert max(ratios) < 10.0


def test_single_patch_step():
    rng = np.random.default_rng(0)
    state = ChainState(100, 3, 1, 7)
    for _ in range(50):
        new, w, u = transition(state, SERIES, rng)
        assert w == 0
        assert new.y == u and new.z == 8 and new.n == 4


def test_no_pair_edges_means_no_new_patches():
    rng = np.random.default_rng(1)
    s = BetaSeries((0.1, 0.5))
    state = ChainState(1000, 0, 40, 0)
    while not state.absorbed:
        new, w, u = transition(state, s, rng)
        assert u == 0 and new.y < state.y
        state = new


def test_transition_errors():
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError):
        transition(ChainState(10, 2, 0, 1), SERIES, rng)
    with pytest.raises(ValueError):
        ChainState(10, 11, 1, 0)
    with pytest.raises(ValueError):
        ChainState(10, 1, -1, 0)


def test_increment_moments():
    rng = np.random.default_rng(3)
    state = ChainState(1000, 100, 50, 3)
    draws = 100_000
    dy = np.empty(draws)
    for k in range(draws):
        new, _, _ = transition(state, SERIES, rng)
        dy[k] = new.y - state.y
    mu = mean_increment(state, SERIES)
    assert mu == pytest.approx(-1 - 49 / 900 + 899 * lambda2(SERIES, 1000, 100), rel=1e-14)
    var = 49 * (1 / 900) * (1 - 1 / 900) + 899 * lambda2(SERIES, 1000, 100)
    assert abs(dy.mean() - mu) < 3 * math.sqrt(var / draws)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_per_step_identity(seed):
    res = run(SERIES, 300, np.random.default_rng(seed))
    y, z, w, u = res.y, res.z, res.w, res.u
    assert np.array_equal((y[1:] + z[1:]) - (y[:-1] + z[:-1]), u)
    assert np.array_equal(z[1:] - z[:-1], 1 + w)
    assert np.all(w >= 0)
    assert y[-1] == 0 and np.all(y[:-1] >= 1)
    assert res.lambda_star_count == z[-1]
    assert res.v_star_count == len(y) - 1


def test_no_initial_patches():
    rng = np.random.default_rng(4)
    res = run(BetaSeries((0.4, 0.0, 1.0)), 1000, rng)
    assert res.v_star_count == 0
    assert res.lambda_star_count == res.z[0]
    assert res.rows() == [(0, 0, res.z[0])]


def test_linear_series_limit():
    rng = np.random.default_rng(5)
    N = 100_000
    fracs = [run(BetaSeries((0.0, 0.2)), N, rng, record=False).v_star_count / N for _ in range(20)]
    assert np.mean(fracs) == pytest.approx(1 - math.exp(-0.2), abs=0.003)


def test_kernel_matches_python_loop():
    N = 5000
    res = run(SERIES, N, np.random.default_rng(6))
    rng = np.random.default_rng(6)
    state = initial_state(SERIES, N, rng)
    ys, zs = [state.y], [state.z]
    while not state.absorbed and state.n < N:
        state = transition(state, SERIES, rng)[0]
        ys.append(state.y)
        zs.append(state.z)
    assert np.array_equal(res.y, ys) and np.array_equal(res.z, zs)


def test_terminal_only_mode():
    a = run(SERIES, 2000, np.random.default_rng(7), record=False)
    b = run(SERIES, 2000, np.random.default_rng(7))
    assert a.y is None
    assert (a.v_star_count, a.lambda_star_count) == (b.v_star_count, b.lambda_star_count)
    assert a.summary(7) == b.summary(7)
    with pytest.raises(ValueError):
        a.rows()
