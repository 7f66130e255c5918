import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frackac import (
    AdmissibilityError,
    HurstParams,
    fbm_cov,
    first_diff_kernel,
    indicator_inner,
    interval_inner,
    mollified_cov_kernel,
    mollifier_inner,
    mollifier_inner_limit,
    second_diff_kernel,
)

from conftest import assert_within
from oracles import fbm_path, step_indicator_inner


def test_hurst_validation():
    with pytest.raises(ValueError):
        HurstParams(0.5)
    with pytest.raises(ValueError):
        HurstParams(0.0)
    assert HurstParams(0.3).two_h == 0.6


def test_cov_basics():
    assert fbm_cov(1.0, 1.0, 0.3) == 1.0
    assert_within(fbm_cov(1.0, -1.0, 0.4), 0.5 * (2.0 - 2.0**0.8), 1e-15)
    assert fbm_cov(0.0, 5.0, 0.45) == 0.0


@given(
    t=st.floats(-3.0, 3.0),
    s=st.floats(-3.0, 3.0),
    h=st.floats(0.05, 0.45),
)
@settings(max_examples=200, deadline=None)
def test_cov_symmetry_and_diagonal(t, s, h):
    assert fbm_cov(t, s, h) == pytest.approx(fbm_cov(s, t, h), abs=1e-14)
    assert fbm_cov(t, t, h) == abs(t) ** (2 * h)


def test_temporal_gram_psd_with_negative_times():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n = int(rng.integers(3, 65))
        h = float(rng.uniform(0.05, 0.49))
        grid = np.sort(rng.uniform(-2.0, 2.0, n))
        grid = np.unique(grid)
        gram = fbm_cov(grid[:, None], grid[None, :], h)
        eig = np.linalg.eigvalsh(gram)
        assert eig.min() >= -1e-10 * np.trace(gram)


def test_second_diff_limit_value():
    # small-eps limit is beta*(beta-1)*r^(beta-2), negative for beta < 1
    assert_within(second_diff_kernel(1.0, 1e-5, 0.8), -0.16, 1e-6)


def test_second_diff_exact_zero_at_beta_one():
    # for beta = 1 and r > 2 eps all absolute values unfold and cancel
    assert second_diff_kernel(2.0, 0.5, 1.0) == 0.0


def test_second_diff_envelope_spot():
    v = second_diff_kernel(0.01, 1.0, 0.5)
    assert abs(v) <= 64.0 * 0.01 ** (0.5 - 2.0)


def test_second_diff_envelope_grid():
    r = np.geomspace(1e-3, 1e3, 1000)
    eps = np.geomspace(1e-4, 1e1, 1000)
    rg, eg = np.meshgrid(r, eps, sparse=True)
    for beta in (0.55, 0.8, 1.0, 1.5):
        vals = np.abs(second_diff_kernel(rg, eg, beta))
        assert np.all(vals <= 64.0 * rg ** (beta - 2.0) * (1 + 1e-12))


def test_second_diff_limit_rate():
    # |f_eps - limit| should fall like eps^2 once eps is small
    lim = 0.8 * (0.8 - 1.0)
    errs = [abs(second_diff_kernel(1.0, 2.0**-k, 0.8) - lim) for k in range(4, 12)]
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
    ratios = [e1 / e2 for e1, e2 in zip(errs, errs[1:])]
    assert all(3.5 <= r <= 4.5 for r in ratios[2:])


def test_mollified_cov_matches_second_diff():
    rng = np.random.default_rng(11)
    r = rng.uniform(0.01, 5.0, 1000)
    eps = rng.uniform(0.001, 1.0, 1000)
    h = rng.uniform(0.05, 0.49, 1000)
    a = mollified_cov_kernel(r, eps, eps, 0.35)
    b = second_diff_kernel(r, eps, 0.7)
    np.testing.assert_allclose(a, b, rtol=1e-12)
    for i in range(0, 1000, 97):
        va = mollified_cov_kernel(r[i], eps[i], eps[i], float(h[i]))
        vb = second_diff_kernel(r[i], eps[i], 2 * h[i])
        assert va == pytest.approx(vb, rel=1e-12)


def test_mollified_cov_limit():
    v = mollified_cov_kernel(1.0, 1e-4, 1e-4, 0.4)
    assert_within(v, 2 * 0.4 * (2 * 0.4 - 1.0), 1e-6)


def test_mollified_cov_envelope_mixed_scales():
    # envelope transfers through the eps=delta reduction
    v = mollified_cov_kernel(0.5, 0.3, 0.2, 0.3)
    assert abs(v) <= 64.0 * 0.5 ** (0.6 - 2.0)
    # high-precision direct evaluation as the reference
    import mpmath

    mp = mpmath.mp
    mp.dps = 40
    r, e, d, hh = map(mpmath.mpf, ("0.5", "0.3", "0.2", "0.6"))
    ref = (
        abs(r + e + d) ** hh + abs(r - e - d) ** hh
        - abs(r + e - d) ** hh - abs(r - e + d) ** hh
    ) / (4 * e * d)
    assert_within(v, float(ref), 1e-12)


def test_first_diff_limit_and_center():
    assert_within(first_diff_kernel(1.0, 1e-5, 0.3), -0.4, 1e-4)
    # at u = eps the signed term vanishes exactly
    assert_within(first_diff_kernel(0.1, 0.1, 0.4), 5.0 * 0.2**-0.2, 1e-12)


def test_first_diff_two_regime_envelope():
    u = np.geomspace(1e-3, 1e2, 1000)
    eps = np.geomspace(1e-3, 1e1, 1000)
    ug, eg = np.meshgrid(u, eps, sparse=True)
    for h in (0.1, 0.3, 0.45):
        hh = 2 * h
        vals = np.abs(first_diff_kernel(ug, eg, h))
        # the mean-value bound needs the 2^(2-2H) factor near u = 2 eps;
        # the bare asymptotic constant is only valid for u >> eps
        far_const = 2.0 ** (2.0 - hh) * (1.0 - hh)
        near = ug < 2 * eg
        bound = np.where(near, 16.0, far_const) * ug ** (hh - 2.0)
        assert np.all(vals <= bound * (1 + 1e-12))


def test_first_diff_far_regime_spot():
    eps = 0.07
    hh = 0.7
    v = first_diff_kernel(3 * eps, eps, 0.35)
    assert abs(v) <= 2.0 ** (2.0 - hh) * (1 - hh) * (3 * eps) ** (hh - 2.0)
    # the asymptotic constant does hold once u dominates eps
    v = first_diff_kernel(50 * eps, eps, 0.35)
    assert abs(v) <= (1 - hh) * (50 * eps) ** (hh - 2.0)


# ---------------------------------------------------------------------------
# inner products
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("s,t,h", [(0.5, 1.0, 0.3), (1.0, 0.5, 0.3),
                                   (0.7, 0.7, 0.45), (0.25, 2.0, 0.1)])
def test_indicator_inner_constant_path(s, t, h):
    v = indicator_inner(lambda r: np.ones_like(r), s, t, h)
    assert_within(v, fbm_cov(s, t, h), 1e-8)


def test_indicator_inner_step_oracle():
    knots = [0.0, 0.2, 0.45, 0.8]
    coeffs = [1.5, -0.5, 2.0]

    def phi(r):
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for a_i, lo, hi in zip(coeffs, knots[:-1], knots[1:]):
            out = np.where((r >= lo) & (r < hi), a_i, out)
        return out

    for t, h in ((1.0, 0.3), (0.6, 0.45), (0.8, 0.12)):
        got = indicator_inner(phi, knots[-1], t, h, knots=knots[1:-1])
        want = step_indicator_inner(coeffs, knots, t, h)
        assert_within(got, want, 1e-8, f"t={t}, h={h}")


def test_indicator_inner_linear_path_quarter():
    # phi(r) = r, s = t = 1, H = 1/4: H * (1/(2H+1) + Beta(2, 2H)) = 1/2
    v = indicator_inner(lambda r: r, 1.0, 1.0, 0.25)
    assert_within(v, 0.5, 1e-8)


def test_indicator_inner_linearity():
    h = 0.35
    s, t = 0.8, 0.6
    f1 = lambda r: np.sin(3 * r)
    f2 = lambda r: r**2
    lhs = indicator_inner(lambda r: 2.0 * f1(r) - 0.7 * f2(r), s, t, h)
    rhs = 2.0 * indicator_inner(f1, s, t, h) - 0.7 * indicator_inner(f2, s, t, h)
    assert_within(lhs, rhs, 1e-9)


def test_interval_inner_constant_reduction():
    h = 0.3
    u, s, t = 0.2, 0.5, 1.0
    v = interval_inner(lambda r: np.ones_like(r), s, u, t, h)
    assert_within(v, fbm_cov(s, t, h) - fbm_cov(s, u, h), 1e-8)


def test_interval_inner_difference_identity():
    h = 0.4
    u, s, t = 0.3, 0.6, 1.1
    phi = lambda r: np.cos(2 * r)
    v = interval_inner(phi, s, u, t, h)
    w = indicator_inner(phi, s, t, h) - indicator_inner(phi, s, u, h)
    assert_within(v, w, 1e-8)


def test_interval_inner_ordering_guard():
    with pytest.raises(ValueError):
        interval_inner(lambda r: r, 0.5, 0.6, 1.0, 0.3)


def test_interval_inner_gaussian_mc_oracle():
    # discrete fractional-motion simulation as an independent check
    h, u, s, t = 0.3, 0.2, 0.5, 1.0
    n = 2**14
    draws = 3000
    rng = np.random.default_rng(20240811)
    grid = np.linspace(0.0, t, n + 1)
    phi_vals = grid[:-1]  # phi(r) = r on the left cell edges
    prods = np.empty(draws)
    iu, is_ = int(u * n), int(s * n)
    for i in range(draws):
        path = fbm_path(n, h, t, rng)
        incr = np.diff(path)
        integral = float(np.dot(phi_vals[:is_], incr[:is_]))
        prods[i] = integral * (path[-1] - path[iu])
    mc = prods.mean()
    se = prods.std(ddof=1) / math.sqrt(draws)
    v = interval_inner(lambda r: r, s, u, t, h)
    assert abs(v - mc) <= 3.0 * se + 5e-3  # grid bias allowance at 2^14 cells


def test_mollifier_limit_constant():
    h = 0.35
    for c, s in ((2.0, 0.7), (-1.0, 1.3)):
        v = mollifier_inner_limit(lambda r, c=c: np.full_like(r, c), s, h,
                                  alpha=1.0)
        assert_within(v, c * h * s ** (2 * h - 1.0), 1e-8)


def test_mollifier_limit_linear():
    # phi(r) = r, s = 1, H = 0.4: H + H(2H-1) * (-1/(2H)) = 0.5
    v = mollifier_inner_limit(lambda r: r, 1.0, 0.4, alpha=1.0)
    assert_within(v, 0.5, 1e-8)


def test_mollifier_limit_gate():
    with pytest.raises(AdmissibilityError):
        mollifier_inner_limit(lambda r: r, 1.0, 0.1, alpha=0.5)
    with pytest.raises(AdmissibilityError):
        mollifier_inner_limit(lambda r: r, 1.0, 0.4)  # no alpha metadata


def test_mollifier_finite_eps_converges():
    h = 0.4
    s = 1.0
    phi = lambda r: np.sin(2 * r)
    limit = mollifier_inner_limit(phi, s, h, alpha=1.0)
    errs = [abs(mollifier_inner(phi, s, 2.0**-k, h) - limit) for k in (3, 5, 7, 9)]
    assert all(b < a for a, b in zip(errs, errs[1:]))
    assert errs[-1] < 1e-3
    # envelope: finite constant over the sweep against the two-norm bound
    env = 1.0 * s ** (2 * h - 1.0) + 2.0 * s ** (1.0 + 2 * h - 1.0)
    finite_vals = [abs(mollifier_inner(phi, s, 2.0**-k, h)) for k in (3, 5, 7, 9)]
    assert max(finite_vals) <= 10.0 * env
