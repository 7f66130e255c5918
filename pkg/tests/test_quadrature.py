import numpy as np
import pytest

from frackac.quadrature import (
    QuadratureError,
    QuadratureSpec,
    double_quad,
    piecewise_singular_quad,
    singular_quad,
)

from oracles import dense_reference_quad


def test_inverse_sqrt():
    res = singular_quad(lambda r: r**-0.5, 0.0, 1.0, p=-0.5)
    assert abs(res.value - 2.0) <= 1e-8


def test_power_product():
    # r^(2H-2) * r^alpha with H = 0.4, alpha = 0.5
    res = singular_quad(lambda r: r ** (-0.7), 0.0, 1.0, p=-0.7)
    assert abs(res.value - 1.0 / 0.3) <= 1e-8


def test_smooth_against_reference():
    f = lambda r: np.exp(-r) * np.cos(4 * r)
    res = singular_quad(f, 0.0, 2.0, p=0.0)
    ref = dense_reference_quad(f, 0.0, 2.0)
    assert abs(res.value - ref) <= 1e-10


@pytest.mark.parametrize("p", [-0.1, -0.3, -0.5, -0.7, -0.9])
def test_pure_power_family(p):
    res = singular_quad(lambda r: r**p, 0.0, 1.0, p=p)
    assert abs(res.value - 1.0 / (1.0 + p)) <= 1e-9


def test_right_singularity():
    res = singular_quad(
        lambda r: (1.0 - r) ** -0.6, 0.0, 1.0, p=-0.6, singular_end="right"
    )
    assert abs(res.value - 1.0 / 0.4) <= 1e-8


def _series_cos_power(p, terms=40):
    # int_0^1 r^p cos(r) dr by termwise power integration
    out = 0.0
    fact = 1.0
    for k in range(terms):
        if k > 0:
            fact *= (2 * k - 1) * (2 * k)
        out += (-1) ** k / (fact * (p + 2 * k + 1))
    return out


def _series_exp_power(p, terms=40):
    # int_0^1 r^p e^r dr
    out = 0.0
    fact = 1.0
    for k in range(terms):
        if k > 0:
            fact *= k
        out += 1.0 / (fact * (p + k + 1))
    return out


def test_error_estimate_conservative():
    # on the oracle family the true error stays below 2x the estimate
    for p in (-0.5, -0.7, -0.3):
        res = singular_quad(lambda r, p=p: r**p * np.cos(r), 0.0, 1.0, p=p)
        true_err = abs(res.value - _series_cos_power(p))
        assert true_err <= max(2.0 * res.error_estimate, 1e-10)


def test_convergence_order_on_refinement():
    # halving panel widths must cut the error at least by the singular rate
    p = -0.5
    ref = _series_exp_power(p)
    errs = []
    for n in (4, 8):
        spec = QuadratureSpec(n_panels=n, rule_order=2, target_abs_tol=1.0)
        res = singular_quad(lambda r: r**p * np.exp(r), 0.0, 1.0, p=p, spec=spec)
        errs.append(abs(res.value - ref))
    rate = errs[0] / max(errs[1], 1e-16)
    assert rate >= 2.0 ** min(2, 1 + p + 1)


def test_failure_carries_best_value():
    spec = QuadratureSpec(n_panels=2, rule_order=2, target_abs_tol=1e-14)
    with pytest.raises(QuadratureError) as exc:
        singular_quad(lambda r: np.abs(np.sin(20 * r)) ** 0.3, 0.0, 3.0,
                      p=0.0, spec=spec)
    assert np.isfinite(exc.value.value)
    assert exc.value.error_estimate > 0


def test_piecewise_interior_kink():
    # |r - 0.4|^0.3 has an interior kink; exact antiderivative available
    c = 0.4

    def f(r):
        return np.abs(r - c) ** 0.3

    exact = (c**1.3 + (1 - c) ** 1.3) / 1.3
    res = piecewise_singular_quad(f, 0.0, 1.0, [(c, -0.7, -0.7)])
    assert abs(res.value - exact) <= 1e-9


def test_double_quad_singular_inner():
    # f(theta, r) = r^(2H-2) * r over the triangle, closed form
    hh = 0.8

    def f(theta, r):
        return r ** (hh - 2.0) * r

    res = double_quad(f, 1.0, inner_p=hh - 1.0)
    exact = 1.0 / (hh * (hh + 1.0))
    assert abs(res.value - exact) <= 1e-6


def test_double_quad_plain_inner():
    def f(theta, r):
        return np.full_like(np.asarray(r, dtype=float), np.cos(theta))

    res = double_quad(f, 1.0)
    exact = dense_reference_quad(lambda t: t * np.cos(t), 0.0, 1.0)
    assert abs(res.value - exact) <= 1e-8


def test_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(n_panels=1)
    with pytest.raises(ValueError):
        QuadratureSpec(target_abs_tol=0.0)
    with pytest.raises(ValueError):
        singular_quad(lambda r: r, 0.0, 1.0, p=0.5)
