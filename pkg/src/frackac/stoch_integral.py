"""The nonlinear stochastic line integral and its exact second moments.

The integral of the noise along a moving spatial point phi is defined as the
small-eps limit of trapezoid integrals of the mollified rate evaluated at
(s, phi(s)).  Its second moments have closed forms:

``variance_closed``      exact variance of the limit integral,
``covariance_closed``    mixed moment of two integrals over one horizon,
``mollified_moment``     exact mixed moment at finite mollification scales,
``increment_moment``     exact mollified second moment of an increment.

All deterministic; quadrature is delegated to :mod:`frackac.quadrature`
with singular exponents derived from the kernel's Hoelder exponent and the
path's regularity estimate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _backend
from .gaussian_field import FieldSample
from .kernels import AdmissibilityError, HurstParams, as_hurst, mollified_cov_kernel
from .quadrature import QuadratureSpec, double_quad, singular_quad
from .spatial_kernels import SpatialKernel


def holder_estimate(grid: np.ndarray, values: np.ndarray):
    """(exponent, seminorm) estimated from increments over dyadic lags.

    The exponent is the least-squares slope of log max-increment against
    log lag; the seminorm is the largest ratio increment/lag^exponent seen.
    Constant data returns (1.0, 0.0).
    """
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    n = len(grid) - 1
    lags = []
    mags = []
    lag = 1
    while lag <= max(n // 2, 1):
        incr = values[lag:] - values[:-lag]
        if incr.ndim > 1:
            mag = float(np.max(np.linalg.norm(incr, axis=-1)))
        else:
            mag = float(np.max(np.abs(incr)))
        if mag > 0:
            lags.append(grid[lag] - grid[0])
            mags.append(mag)
        lag *= 2
    if len(lags) < 2:
        return 1.0, 0.0
    slope, _ = np.polyfit(np.log(lags), np.log(mags), 1)
    alpha = float(np.clip(slope, 1e-3, 1.0))
    seminorm = float(np.max(np.asarray(mags) / np.asarray(lags) ** alpha))
    return alpha, seminorm


@dataclass
class HolderPath:
    """A sampled path [0, T] -> R^d with piecewise-linear interpolation."""

    grid: np.ndarray
    values: np.ndarray
    alpha_est: float
    sup_norm: float
    holder_norm_est: float

    @classmethod
    def from_values(cls, grid, values, alpha: float | None = None):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be strictly increasing")
        if len(values) != len(grid):
            raise ValueError("values and grid must have equal length")
        est_alpha, seminorm = holder_estimate(grid, values)
        if alpha is None:
            alpha = est_alpha
        sup = float(np.max(np.abs(values)))
        return cls(grid, values, float(alpha), sup, seminorm)

    @classmethod
    def from_function(cls, fn: Callable, grid, alpha: float | None = None):
        grid = np.asarray(grid, dtype=float)
        vals = np.asarray(fn(grid), dtype=float)
        return cls.from_values(grid, vals, alpha)

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    @property
    def dim(self) -> int:
        return 1 if self.values.ndim == 1 else self.values.shape[-1]

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if self.values.ndim == 1:
            out = np.interp(s, self.grid, self.values)
        else:
            out = np.stack(
                [np.interp(s, self.grid, self.values[:, j])
                 for j in range(self.values.shape[1])],
                axis=-1,
            )
        return out


def constant_path(x0: float, horizon: float = 1.0) -> HolderPath:
    return HolderPath.from_values([0.0, horizon], [x0, x0], alpha=1.0)


def linear_path(horizon: float = 1.0, n: int = 257, slope: float = 1.0) -> HolderPath:
    g = np.linspace(0.0, horizon, n)
    return HolderPath.from_values(g, slope * g, alpha=1.0)


# ---------------------------------------------------------------------------
# admissibility
# ---------------------------------------------------------------------------

GATE_MARGIN = 0.02


def variance_gate(h, kernel: SpatialKernel, alpha: float, force: bool = False):
    """Requires gamma * alpha > 1 - 2H (with a safety margin on alpha)."""
    hp = as_hurst(h)
    lhs = kernel.gamma * (alpha - GATE_MARGIN)
    rhs = 1.0 - hp.two_h
    if lhs <= rhs:
        msg = (
            f"admissibility gamma*alpha > 1-2H violated: "
            f"{kernel.gamma:g}*({alpha:g}-{GATE_MARGIN}) = {lhs:.4f} <= {rhs:.4f}"
        )
        if force:
            warnings.warn(msg)
            return
        raise AdmissibilityError(msg)


def _inner_exponent(h, kernel, alpha):
    """Decay exponent 2H-2+gamma*alpha of the correction integrand at r=0."""
    hp = as_hurst(h)
    p = hp.two_h - 2.0 + kernel.gamma * alpha
    return float(np.clip(p, -0.999, 0.0))


# ---------------------------------------------------------------------------
# pathwise mollified integral over a simulated field
# ---------------------------------------------------------------------------


def _s_grid(times: np.ndarray, t: float) -> np.ndarray:
    inner = times[(times > 0.0) & (times < t)]
    return np.concatenate(([0.0], inner, [t]))


def mollified_line_integral(
    field: FieldSample, phi, t: float, eps: float
) -> float:
    """Trapezoid integral of the mollified rate along s -> (s, phi(s)).

    Uses the field's own time resolution.  The field grid must cover
    [-eps, t + eps] in time and the range of phi in space.
    """
    from .gaussian_field import mollified_rate

    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return 0.0
    if isinstance(phi, HolderPath) and t > phi.horizon + 1e-12:
        raise ValueError("t exceeds the path horizon")
    s = _s_grid(field.spec.times, t)
    x = phi(s) if callable(phi) else np.full_like(s, float(phi))
    vals = mollified_rate(field, s, x, eps)
    return float(np.trapezoid(vals, s))


def integral_coefficients(spec, phi, t: float, eps: float) -> np.ndarray:
    """Dense weight matrix C with  integral = sum_ij C[i,j] * W[i,j].

    The mollified line integral is linear in the field values, so one
    matrix of interpolation x trapezoid weights represents it exactly; this
    is what makes large Monte Carlo sweeps cheap (draws reduce to an inner
    product with the factor-transformed weights).
    """
    times = np.asarray(spec.times)
    sites = np.asarray(spec.sites)
    s = _s_grid(times, t)
    x = phi(s) if callable(phi) else np.full_like(s, float(phi))
    w = np.empty(len(s))
    w[1:-1] = 0.5 * (s[2:] - s[:-2])
    w[0] = 0.5 * (s[1] - s[0])
    w[-1] = 0.5 * (s[-1] - s[-2])
    c = np.zeros((len(times), len(sites)))
    for sign, shift in ((1.0, eps), (-1.0, -eps)):
        ts = s + shift
        if np.any(ts < times[0] - 1e-12) or np.any(ts > times[-1] + 1e-12):
            raise ValueError("field time grid does not cover [-eps, t+eps]")
        it = np.clip(np.searchsorted(times, ts, side="right") - 1, 0, len(times) - 2)
        ft = np.clip((ts - times[it]) / (times[it + 1] - times[it]), 0.0, 1.0)
        ix = np.clip(np.searchsorted(sites, x, side="right") - 1, 0, len(sites) - 2)
        fx = np.clip((x - sites[ix]) / (sites[ix + 1] - sites[ix]), 0.0, 1.0)
        coef = sign * w / (2.0 * eps)
        np.add.at(c, (it, ix), coef * (1 - ft) * (1 - fx))
        np.add.at(c, (it, ix + 1), coef * (1 - ft) * fx)
        np.add.at(c, (it + 1, ix), coef * ft * (1 - fx))
        np.add.at(c, (it + 1, ix + 1), coef * ft * fx)
    return c


# ---------------------------------------------------------------------------
# closed-form moments
# ---------------------------------------------------------------------------


def mollified_moment(
    phi: HolderPath,
    t: float,
    eps: float,
    delta: float,
    h,
    kernel: SpatialKernel,
    spec: QuadratureSpec | None = None,
) -> float:
    """Exact mixed second moment of two mollified integrals at scales
    (eps, delta) over [0, t]:  double integral of
    ``Q(phi_theta, phi_(theta-r)) * K_(eps,delta)(r)`` over 0 < r < theta < t,
    where K is the mollified covariance kernel.
    """
    hp = as_hurst(h)
    if eps <= 0 or delta <= 0:
        raise ValueError("eps and delta must be positive")
    if isinstance(phi, HolderPath) and t > phi.horizon + 1e-12:
        raise ValueError("t exceeds the path horizon")
    hh = hp.two_h
    pk = hh - 1.0  # derivative exponent of the |.|^2H kinks

    def f(theta, r):
        return np.asarray(
            kernel.q(phi(np.asarray(theta)), phi(theta - r))
        ) * mollified_cov_kernel(r, eps, delta, hp)

    kink_locs = sorted({abs(eps - delta), eps + delta} - {0.0})
    alpha = getattr(phi, "alpha_est", 1.0)
    p_edge = float(np.clip(kernel.gamma * alpha - 1.0, -0.999, 0.0))

    def knots(theta):
        out = [(loc, pk, pk) for loc in kink_locs if loc < theta]
        # kinks at or just beyond theta still blow up derivatives inside;
        # grading toward the right end is cheap insurance either way
        edge = pk if kernel.kind in ("constant", "smooth") else min(pk, p_edge)
        out.append((theta, edge, 0.0))
        return out

    inner_p = pk if abs(eps - delta) == 0.0 else 0.0
    res = double_quad(
        f, t, spec, inner_p=inner_p, inner_knots=knots, outer_knots=kink_locs
    )
    return res.value


def variance_closed(
    phi: HolderPath,
    t: float,
    h,
    kernel: SpatialKernel,
    spec: QuadratureSpec | None = None,
    force: bool = False,
) -> float:
    """Exact variance of the limit integral over [0, t].

    ``2H int_0^t theta^(2H-1) Q(phi,phi) dtheta + 2H(2H-1) *
    int_0^t int_0^theta r^(2H-2) (Q(phi_th, phi_(th-r)) - Q(phi_th, phi_th))``.
    Requires gamma * alpha > 1 - 2H, otherwise the correction integral may
    diverge; the gate refuses to run unless ``force`` is set.
    """
    hp = as_hurst(h)
    if isinstance(phi, HolderPath) and t > phi.horizon + 1e-12:
        raise ValueError("t exceeds the path horizon")
    alpha = getattr(phi, "alpha_est", 1.0)
    variance_gate(hp, kernel, alpha, force=force)
    hh = hp.two_h

    def diag(theta):
        theta = np.asarray(theta)
        v = phi(theta)
        return np.asarray(kernel.q(v, v), dtype=float) * theta ** (hh - 1.0)

    t1 = singular_quad(diag, 0.0, t, hh - 1.0, spec)
    total = hh * t1.value
    if kernel.is_constant:
        return total

    p_in = _inner_exponent(hp, kernel, alpha)
    p_edge = float(np.clip(kernel.gamma * alpha - 1.0, -0.999, 0.0))

    def corr(theta, r):
        v = phi(np.asarray(theta))
        q_diag = np.asarray(kernel.q(v, v), dtype=float)
        return (
            np.asarray(kernel.q(v, phi(theta - r)), dtype=float) - q_diag
        ) * r ** (hh - 2.0)

    def knots(theta):
        if kernel.kind == "smooth":
            return []
        return [(theta, p_edge, 0.0)]

    t2 = double_quad(corr, t, spec, inner_p=p_in, inner_knots=knots)
    return total + hh * (hh - 1.0) * t2.value


def covariance_closed(
    phi: HolderPath,
    psi: HolderPath,
    t: float,
    h,
    kernel: SpatialKernel,
    spec: QuadratureSpec | None = None,
    force: bool = False,
) -> float:
    """Exact mixed moment of the integrals of two paths over one horizon."""
    hp = as_hurst(h)
    alpha = min(getattr(phi, "alpha_est", 1.0), getattr(psi, "alpha_est", 1.0))
    variance_gate(hp, kernel, alpha, force=force)
    hh = hp.two_h

    def diag(theta):
        theta = np.asarray(theta)
        return np.asarray(
            kernel.q(phi(theta), psi(theta)), dtype=float
        ) * theta ** (hh - 1.0)

    t1 = singular_quad(diag, 0.0, t, hh - 1.0, spec)
    total = hh * t1.value
    if kernel.is_constant:
        return total

    p_in = _inner_exponent(hp, kernel, alpha)
    p_edge = float(np.clip(kernel.gamma * alpha - 1.0, -0.999, 0.0))

    def corr(theta, r):
        a = phi(np.asarray(theta))
        b = psi(np.asarray(theta))
        q_ab = np.asarray(kernel.q(a, b), dtype=float)
        g = (
            np.asarray(kernel.q(a, psi(theta - r)), dtype=float)
            + np.asarray(kernel.q(phi(theta - r), b), dtype=float)
            - 2.0 * q_ab
        )
        return g * r ** (hh - 2.0)

    def knots(theta):
        if kernel.kind == "smooth":
            return []
        return [(theta, p_edge, 0.0)]

    t2 = double_quad(corr, t, spec, inner_p=p_in, inner_knots=knots)
    return total + 0.5 * hh * (hh - 1.0) * t2.value


def increment_moment(
    phi: HolderPath,
    s: float,
    t: float,
    eps: float,
    h,
    kernel: SpatialKernel,
    spec: QuadratureSpec | None = None,
) -> float:
    """Exact mollified second moment of the increment over [s, t].

    ``int_0^(t-s) int_0^theta Q(phi_(s+th), phi_(s+th-r)) D_eps(r) dr dth``
    with D_eps the symmetric second difference quotient of |r|^2H.
    """
    hp = as_hurst(h)
    if not 0.0 <= s < t:
        raise ValueError("need 0 <= s < t")
    if isinstance(phi, HolderPath) and t > phi.horizon + 1e-12:
        raise ValueError("t exceeds the path horizon")
    hh = hp.two_h
    pk = hh - 1.0

    def f(theta, r):
        return np.asarray(
            kernel.q(phi(np.asarray(s + theta)), phi(s + theta - r)), dtype=float
        ) * mollified_cov_kernel(r, eps, eps, hp)

    def knots(theta):
        out = [(2.0 * eps, pk, pk)] if 2.0 * eps < theta else []
        out.append((theta, pk, 0.0))
        return out

    res = double_quad(
        f, t - s, spec, inner_p=pk, inner_knots=knots, outer_knots=[2.0 * eps]
    )
    return res.value


# ---------------------------------------------------------------------------
# grid-level (fast) moments used by the Monte Carlo solvers
# ---------------------------------------------------------------------------


def variance_on_grid(values: np.ndarray, dt: float, h, kernel: SpatialKernel):
    """Variance of the limit integral for paths sampled at uniform dt.

    ``values`` has shape (B, m+1) (or (B, m+1, d)); integrates the
    closed-form variance on the path grid by product integration.  This is
    the hot kernel behind the Feynman-Kac estimators; accuracy is tied to
    the path resolution, which is the right trade at Monte Carlo tolerances.
    """
    hp = as_hurst(h)
    return _backend.sigma2_batch(
        values, dt, hp.two_h, kernel.kernel_id, kernel.p0, kernel.p1
    )


def covariance_on_grid(values_a, values_b, dt, h, kernel: SpatialKernel):
    """Grid twin of :func:`covariance_closed` for batches of sampled paths."""
    hp = as_hurst(h)
    return _backend.covariance_batch(
        values_a, values_b, dt, hp.two_h, kernel.kernel_id, kernel.p0, kernel.p1
    )
