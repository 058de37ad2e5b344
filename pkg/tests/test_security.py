import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qkdfinite import security as sec
from qkdfinite.protocol import leftover_hash_toy


def h2(x):
    return 0.0 if x in (0, 1) else -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def params(n=10 ** 4, k=10 ** 4, **kw):
    base = dict(M=n + k, n=n, k=k, m=n + k, delta=0.05, c_bar=0.5, s=2000, t=50, l=1000)
    base.update(kw)
    return sec.RateParams(**base)


# -- binary entropy -------------------------------------------------------------

def test_binary_entropy_examples():
    assert sec.binary_entropy(0) == sec.binary_entropy(1) == 0
    assert sec.binary_entropy(0.5) == 1
    assert sec.binary_entropy(0.11) == pytest.approx(0.499916, abs=1e-6)
    with pytest.raises(ValueError):
        sec.binary_entropy(1.1)


@settings(max_examples=200, deadline=None)
@given(st.floats(0, 1))
def test_prop_binary_entropy_symmetric(x):
    assert sec.binary_entropy(x) == pytest.approx(sec.binary_entropy(1 - x), abs=1e-12)
    assert 0 <= sec.binary_entropy(x) <= 1


# -- epsilon_pa ----------------------------------------------------------------------

def test_epsilon_pa_direct_substitution():
    p = params()
    expected = 2.0 ** (-(1 / 5) * (1e4 * (1 - h2(0.06)) - 3050))
    assert sec.epsilon_pa(0.01, p) == pytest.approx(expected, rel=1e-12)


def test_epsilon_pa_exponent_zero():
    nu = 0.01
    l_zero = 1e4 * (1 - h2(0.06)) - 2000 - 50
    p = params(l=0)
    # l enters linearly, so shift it through s to hit a non-integer exactly
    p = sec.RateParams(**{**p.__dict__, "s": 2000 + l_zero})
    assert sec.epsilon_pa(nu, p) == pytest.approx(1.0, abs=1e-12)


def test_epsilon_pa_linearity_in_l():
    for l in (0, 100, 999, 3000):
        a = sec.log2_epsilon_pa(0.01, params(l=l))
        assert sec.log2_epsilon_pa(0.01, params(l=l + 5)) - a == pytest.approx(1, abs=1e-12)
        assert sec.log2_epsilon_pa(0.01, params(l=l + 1)) - a == pytest.approx(0.2, abs=1e-12)
    ratio = sec.epsilon_pa(0.01, params(l=1001)) / sec.epsilon_pa(0.01, params(l=1000))
    assert ratio == pytest.approx(2 ** 0.2, rel=1e-12)


def test_epsilon_pa_monotone():
    p = params()
    nus = np.linspace(0, 0.4, 50)
    vals = [sec.log2_epsilon_pa(nu, p) for nu in nus]
    assert np.all(np.diff(vals) > 0)
    for field in ("s", "t", "l"):
        more = sec.RateParams(**{**p.__dict__, field: getattr(p, field) + 10})
        assert sec.epsilon_pa(0.01, more) > sec.epsilon_pa(0.01, p)


def test_epsilon_pa_domain():
    with pytest.raises(ValueError):
        sec.epsilon_pa(0.96, params())
    with pytest.raises(ValueError):
        sec.epsilon_pa(-0.1, params())


def test_rate_params_validation():
    with pytest.raises(ValueError):
        sec.RateParams(M=100, n=80, k=30, m=100)
    with pytest.raises(ValueError):
        sec.RateParams(M=100, n=50, k=30, m=90, l=60)
    with pytest.raises(ValueError):
        sec.RateParams(M=100, n=50, k=30, m=90, c_bar=0)


# -- nu* ---------------------------------------------------------------------------

def test_nu_star_no_solution():
    p = params(l=9000)
    assert sec.log2_epsilon_pa(0.0, p) >= 0
    ns = sec.solve_nu_star(p)
    assert not ns.solvable and ns.nu is None


def test_nu_star_example_residual_and_grid_oracle():
    p = params()
    ns = sec.solve_nu_star(p)
    assert ns.solvable
    lhs, rhs = sec.log2_epsilon_pa(ns.nu, p), sec.log2_sampling_bound(ns.nu, p)
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), abs(rhs))
    # dense-grid oracle: the crossing is where the sign of the difference flips
    grid = np.linspace(0, 0.5 - p.delta, 100001)
    diff = np.array([sec.log2_epsilon_pa(x, p) - sec.log2_sampling_bound(x, p) for x in grid])
    i = int(np.flatnonzero(diff > 0)[0])
    assert grid[i - 1] <= ns.nu <= grid[i]
    assert ns.eps_pa == pytest.approx(2.0 ** lhs)
    assert ns.within_quarter == (ns.eps_pa <= 0.25)


def test_nu_star_decreases_with_k():
    values = []
    for k in (10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6):
        values.append(sec.solve_nu_star(params(k=k)).nu)
    assert all(b < a for a, b in zip(values, values[1:]))


# -- key length and rates ---------------------------------------------------------------

def test_max_key_length_examples():
    b = sec.SecurityBudget(eps=2 ** -31 + 2 ** -32 + 2 ** -33, eps_ec=2 ** -33,
                           eps_bar=2 ** -32)
    assert b.slack == 2 ** -31
    assert sec.max_key_length(8000, 3000, b) == 4940
    assert sec.max_key_length(3000, 3000, b) == 0
    with pytest.raises(ValueError):
        sec.max_key_length(8000, 3000, sec.SecurityBudget(eps=2e-10, eps_ec=1e-10,
                                                          eps_bar=1e-10))


def test_max_key_length_monotone():
    b = sec.SecurityBudget()
    tighter = sec.SecurityBudget(eps=5e-10)
    for h in np.linspace(0, 10 ** 4, 21):
        assert sec.max_key_length(h + 1, 100, b) >= sec.max_key_length(h, 100, b)
        assert sec.max_key_length(h, 101, b) <= sec.max_key_length(h, 100, b)
        assert sec.max_key_length(h, 100, tighter) <= sec.max_key_length(h, 100, b)


def test_asymptotic_rate_examples():
    assert sec.asymptotic_rate(1 - h2(0), h2(0)) == 1
    assert sec.asymptotic_rate(1 - h2(0.11), h2(0.11)) == pytest.approx(0.000168, abs=2e-6)
    assert sec.asymptotic_rate(1 - h2(0.25), h2(0.25)) < 0


def test_finite_rate_full_leak_is_negative():
    b = sec.SecurityBudget()
    p = sec.RateParams(M=2 * 10 ** 5, n=10 ** 5, k=10 ** 5, m=2 * 10 ** 5, leak_ec=10 ** 5)
    r = sec.sifted_key_rate_finite(p, b, h_xi=1.0)
    assert r == pytest.approx(-sec.finite_size_correction(p.n, b) / p.n)
    assert r < 0


def test_finite_rate_spreadsheet_evaluation():
    n, q = 10 ** 5, 0.03
    b = sec.SecurityBudget(eps=1e-9, eps_ec=1e-10, eps_bar=1e-10, eps_bar_prime=1e-11)
    leak = 1.1 * n * h2(q)
    p = sec.RateParams(M=2 * n, n=n, k=n, m=2 * n, delta=q, leak_ec=leak)
    h_xi = 1 - h2(q + 0.01)
    # hand evaluation of the printed correction
    pa_term = 2 * math.log2(1 / (2 * (1e-9 - 1e-10 - 1e-10)))
    stat = 7 / math.sqrt(n * math.log2(2 / (1e-10 - 1e-11)))
    expected = h_xi - (leak + pa_term + stat) / n
    assert sec.sifted_key_rate_finite(p, b, h_xi=h_xi) == pytest.approx(expected, rel=1e-12)
    stat_lit = 7 * math.sqrt(n * math.log2(2 / 1e-10))
    expected_lit = h_xi - (leak + pa_term + stat_lit) / n
    assert sec.sifted_key_rate_finite(p, b, h_xi=h_xi, delta_term="literature") == \
        pytest.approx(expected_lit, rel=1e-12)


def test_finite_rate_converges_to_asymptotic():
    b = sec.SecurityBudget()
    q, n = 0.03, 10 ** 9
    p = sec.RateParams(M=2 * n, n=n, k=n, m=2 * n, delta=q, leak_ec=n * h2(q))
    r = sec.sifted_key_rate_finite(p, b, h_xi=1 - h2(q))
    assert r == pytest.approx(sec.asymptotic_rate(1 - h2(q), h2(q)), abs=1e-3)
    for term in sec.DELTA_TERMS:
        small = sec.finite_size_correction(10 ** 4, b, term) / 10 ** 4
        large = sec.finite_size_correction(10 ** 9, b, term) / 10 ** 9
        assert large < small


def test_budget_ordering_errors():
    p = sec.RateParams(M=200, n=100, k=100, m=200)
    with pytest.raises(ValueError):
        sec.sifted_key_rate_finite(p, sec.SecurityBudget(eps_bar=1e-11, eps_bar_prime=1e-10),
                                   h_xi=1.0)
    with pytest.raises(ValueError):
        sec.sifted_key_rate_finite(p, sec.SecurityBudget(eps=1e-10, eps_ec=1e-10), h_xi=1.0)
    with pytest.raises(ValueError):
        sec.finite_size_correction(100, sec.SecurityBudget(), "other")


def test_default_h_xi_uses_nu_star():
    p = params(leak_ec=2000)
    b = sec.SecurityBudget()
    ns = sec.solve_nu_star(p)
    expected = sec.bb84_h_xi(p.delta, ns.nu) - (p.leak_ec + sec.finite_size_correction(p.n, b)) / p.n
    assert sec.sifted_key_rate_finite(p, b) == pytest.approx(expected)


def test_security_parameter_bound_examples():
    b = sec.SecurityBudget(eps_ec=2 ** -50, eps_pa=2 ** -50)
    assert sec.security_parameter_bound(b) == 2 ** -49
    assert sec.security_parameter_bound(sec.SecurityBudget(eps_pa=0.0)) == 1e-10
    ns = sec.solve_nu_star(params())
    b = sec.SecurityBudget(eps_ec=2 ** -50, eps_pa=ns.eps_pa)
    assert sec.security_parameter_bound(b) == pytest.approx(2 ** -50 + 2 ** ns.log2_eps_pa)


# -- optimiser ----------------------------------------------------------------------------

def check_report_constraints(rep, b):
    assert rep.n + rep.m <= rep.M
    assert b.eps - b.eps_ec > rep.eps_bar > rep.eps_bar_prime > 0
    assert rep.r_per_signal <= rep.r_sifted + 1e-15
    if rep.eps_pa_at_nu_star is not None:
        assert 0 <= rep.eps_pa_at_nu_star <= 1


def test_optimizer_small_block_gives_zero():
    b = sec.SecurityBudget()
    rep = sec.optimize_rate(10 ** 3, 0.05, b)
    assert rep.r_per_signal == 0
    check_report_constraints(rep, b)


def test_optimizer_small_block_exhaustive_oracle():
    # every admissible split and smoothing choice on a coarse grid gives no key
    b = sec.SecurityBudget()
    leak = sec.default_leak()
    for n in range(100, 1000, 50):
        for eb in 5e-10 * 10.0 ** -np.arange(0, 7):
            for ratio in 10.0 ** -np.arange(1, 7):
                p = sec.RateParams(M=1000, n=n, k=1000 - n, m=1000, delta=0.05,
                                   leak_ec=leak(n, 0.05))
                bb = sec.SecurityBudget(eps_bar=eb, eps_bar_prime=eb * ratio)
                nu = sec.sampling_deviation(n, 1000 - n, eb * ratio)
                assert sec.sifted_key_rate_finite(p, bb, h_xi=sec.bb84_h_xi(0.05, nu)) <= 0


def test_optimizer_rates_monotone_and_near_benchmark():
    b = sec.SecurityBudget()
    reports = [sec.optimize_rate(M, 0.01, b) for M in (10 ** 4, 10 ** 5, 10 ** 6, 10 ** 7)]
    rates = [r.r_per_signal for r in reports]
    assert all(y >= x for x, y in zip(rates, rates[1:]))
    bench = 1 - h2(0.01) - 1.1 * h2(0.01)
    assert rates[-1] >= 0.85 * bench
    for rep in reports:
        check_report_constraints(rep, b)
        assert rep.feasible


def test_optimizer_rejects_bad_inputs():
    with pytest.raises(ValueError):
        sec.optimize_rate(50, 0.01, sec.SecurityBudget())
    with pytest.raises(ValueError):
        sec.optimize_rate(10 ** 4, 0.5, sec.SecurityBudget())


# -- toy secrecy ------------------------------------------------------------------------------

def test_secrecy_toy_examples():
    # uniform key independent of a 2-level E
    rho = np.kron(np.eye(4) / 4, np.diag([0.3, 0.7]))
    assert sec.secrecy_distance_toy(rho, 2) == pytest.approx(0, abs=1e-15)
    for l in (1, 2):
        dk = 2 ** l
        copied = np.zeros((dk * dk, dk * dk))
        for k in range(dk):
            copied[k * dk + k, k * dk + k] = 1 / dk
        assert sec.secrecy_distance_toy(copied, l) == pytest.approx(1 - 2 ** -l)
    with pytest.raises(ValueError):
        sec.secrecy_distance_toy(np.eye(64) / 64, 1)


def test_secrecy_toy_leftover_hash_example():
    distance, bound = leftover_hash_toy(8, 2)
    assert bound == pytest.approx(2 ** (-(7 - 2) / 2))
    assert distance <= bound


def test_secrecy_toy_random_scenarios_within_bound():
    rng = np.random.default_rng(0)
    for _ in range(100):
        d_e = int(rng.integers(1, 4))
        pxe = rng.dirichlet(np.full(16 * d_e, rng.uniform(0.2, 5))).reshape(16, d_e)
        l = int(rng.integers(1, 3))
        distance, bound = leftover_hash_toy(4, l, pxe)
        assert distance <= bound + 1e-12
