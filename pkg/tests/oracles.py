"""Independent reference implementations used only by the tests.

Nothing here shares code with the package paths under test: the fractional
Gaussian sampler is FFT/circulant-based (the package factorizes Gram
matrices), the moment formulas are closed-form antiderivatives, and the
quadrature references are dense classical rules.
"""

import numpy as np


def fgn_davies_harte(n, hurst, rng):
    """One exact fractional Gaussian noise sample of length n (unit grid).

    Circulant embedding of the autocovariance; exact in distribution
    provided the embedding eigenvalues are nonnegative (true for the sizes
    and Hurst range used in the tests).
    """
    k = np.arange(n + 1)
    auto = 0.5 * (
        np.abs(k + 1) ** (2 * hurst)
        + np.abs(k - 1) ** (2 * hurst)
        - 2.0 * np.abs(k) ** (2 * hurst)
    )
    circ = np.concatenate([auto[:-1], auto[-1:], auto[-2:0:-1]])
    lam = np.fft.fft(circ).real
    if lam.min() < -1e-8:
        raise RuntimeError("circulant embedding failed")
    lam = np.clip(lam, 0.0, None)
    m = len(circ)
    z = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    w = np.fft.fft(np.sqrt(lam / (2.0 * m)) * z)
    return w.real[:n]


def fbm_path(n, hurst, t_max, rng):
    """Fractional motion values at j*t_max/n, j = 0..n (exact covariance)."""
    fgn = fgn_davies_harte(n, hurst, rng)
    path = np.concatenate([[0.0], np.cumsum(fgn)])
    return path * (t_max / n) ** hurst


def const_kernel_second_moment(t, eps, beta):
    """Closed form of the unit-kernel mollified second moment at eps=delta.

    int_0^t int_0^th (|r-2e|^b + (r+2e)^b - 2 r^b)/(4e^2) dr dth by exact
    power antiderivatives.
    """
    b1, b2 = beta + 1.0, beta + 2.0
    e2 = 2.0 * eps

    def double_plus(c):
        # int_0^t int_0^th (r+c)^b dr dth
        return ((t + c) ** b2 - c**b2) / (b1 * b2) - t * c**b1 / b1

    def double_abs(c):
        # same for |r-c|^b with c > 0
        if t <= c:
            return (t * c**b1 + (c - t) ** b2 / b2 - c**b2 / b2) / b1
        low = (c * c**b1 - c**b2 / b2) / b1
        high = ((t - c) * c**b1 + (t - c) ** b2 / b2) / b1
        return low + high

    return (double_abs(e2) + double_plus(e2) - 2.0 * double_plus(0.0)) / (
        4.0 * eps**2
    )


def gaussian_heat_flow(t, x):
    """(p_t u0)(x) for u0(y) = exp(-y^2) under dX = dB (variance t)."""
    return (1.0 + 2.0 * t) ** -0.5 * np.exp(-(x**2) / (1.0 + 2.0 * t))


def step_indicator_inner(coeffs, knots, t, hurst):
    """Closed form of <phi 1_[0,s], 1_[0,t]> for step phi.

    ``phi = sum_i coeffs[i] 1_[knots[i], knots[i+1]]``; the inner product
    telescopes through the two-point covariance.
    """
    def cov(a, b):
        return 0.5 * (
            abs(a) ** (2 * hurst) + abs(b) ** (2 * hurst)
            - abs(a - b) ** (2 * hurst)
        )

    total = 0.0
    for a_i, lo, hi in zip(coeffs, knots[:-1], knots[1:]):
        total += a_i * (cov(hi, t) - cov(lo, t))
    return total


def dense_reference_quad(f, a, b, n=200001):
    """Simpson on a dense uniform grid (smooth integrands only)."""
    from scipy.integrate import simpson

    x = np.linspace(a, b, n)
    return float(simpson(f(x), x=x))
