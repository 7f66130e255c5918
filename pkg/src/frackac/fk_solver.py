"""Monte Carlo evaluation of the noise-driven heat equation solutions.

The estimators integrate the Gaussian noise out analytically: conditional
on a Brownian path the noise functional along the reversed path is a
centred Gaussian whose variance has a closed form, so

    mean solution      E_B[ u0(B_t + x) * exp(sigma^2(B)/2) ]
    second moment      E_B1,B2[ u0 u0 * exp(s1/2 + s2/2 + cov12) ]
    Wick-product mean  E_B[ u0(B_t + x) ]
    Wick second moment E_B1,B2[ u0 u0 * exp(cov12) ]

This removes both the mollification bias and several orders of magnitude of
variance compared with sampling the field itself; the field-level estimator
``solution_pathwise`` is kept as the independent cross-check (and is what
the weak-form experiments use).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .gaussian_field import FieldSample, RngSeed
from .kernels import as_hurst
from .spatial_kernels import SpatialKernel, solver_gate
from .stoch_integral import (
    HolderPath,
    covariance_on_grid,
    variance_on_grid,
)
from . import _backend

# exponent cap: guards exp() overflow without silently clipping values
OVERFLOW_EXPONENT = 700.0

# paths per RNG stream; fixed so results do not depend on worker count
BLOCK = 1024


@dataclass(frozen=True)
class InitialCondition:
    """Bounded initial datum; the Lipschitz constant is optional metadata."""

    fn: Callable[[np.ndarray], np.ndarray]
    bound: float
    lipschitz: float | None = None
    name: str = "custom"

    def __post_init__(self):
        if not np.isfinite(self.bound):
            raise ValueError("initial condition must be bounded")


def ic_one() -> InitialCondition:
    return InitialCondition(fn=lambda y: np.ones_like(np.asarray(y, dtype=float)),
                            bound=1.0, lipschitz=0.0, name="one")


def ic_gaussian(scale: float = 1.0) -> InitialCondition:
    # exp(-(y/scale)^2): bounded by 1, Lipschitz sqrt(2/e)/scale
    def fn(y):
        y = np.asarray(y, dtype=float)
        return np.exp(-((y / scale) ** 2))

    return InitialCondition(fn=fn, bound=1.0,
                            lipschitz=math.sqrt(2.0 / math.e) / scale,
                            name="gaussian")


def ic_cosine(freq: float = 1.0) -> InitialCondition:
    def fn(y):
        return 0.5 * (1.0 + np.cos(freq * np.asarray(y, dtype=float)))

    return InitialCondition(fn=fn, bound=1.0, lipschitz=0.5 * freq, name="cosine")


IC_FACTORIES = {"one": ic_one, "gaussian": ic_gaussian, "cosine": ic_cosine}


@dataclass(frozen=True)
class MCEstimate:
    """Uniform return type of the stochastic estimators."""

    mean: float
    std_error: float
    n: int
    seed: RngSeed
    rejected: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least 2 accepted samples")


def _estimate(values: np.ndarray, seed: RngSeed, rejected: int = 0) -> MCEstimate:
    n = values.size
    return MCEstimate(
        mean=float(np.mean(values)),
        std_error=float(np.std(values, ddof=1) / math.sqrt(n)),
        n=n,
        seed=seed,
        rejected=rejected,
    )


class BrownianPath(HolderPath):
    """Uniform-grid Brownian path starting at 0.

    ``alpha_est`` is pinned at the almost-sure exponent 1/2 rather than
    re-estimated per path; the 0.45-Hoelder seminorm is computed lazily
    (it needs a full lag sweep and only the bound experiments read it).
    """

    DELTA = 0.45

    def __init__(self, grid, values):
        grid = np.asarray(grid, dtype=float)
        values = np.asarray(values, dtype=float)
        super().__init__(
            grid=grid,
            values=values,
            alpha_est=0.5,
            sup_norm=float(np.max(np.abs(values))),
            holder_norm_est=0.0,
        )
        self._delta_norm = None

    @property
    def delta_norm(self) -> float:
        if self._delta_norm is None:
            v = self.values
            dt = self.grid[1] - self.grid[0]
            worst = 0.0
            for lag in range(1, len(v)):
                incr = v[lag:] - v[:-lag]
                mag = np.max(np.abs(incr)) if incr.ndim == 1 else np.max(
                    np.linalg.norm(incr, axis=-1)
                )
                worst = max(worst, float(mag) / (lag * dt) ** self.DELTA)
            self._delta_norm = worst
        return self._delta_norm


def _steps(t_max: float, dt: float) -> int:
    m = int(round(t_max / dt))
    if abs(m * dt - t_max) > 1e-9 * max(t_max, 1.0):
        raise ValueError(f"t_max={t_max} is not a multiple of dt={dt}")
    if m > 2**20:
        raise ValueError("too many time steps (t_max/dt > 2^20)")
    if m < 1:
        raise ValueError("need at least one time step")
    return m


def brownian_batch(
    n: int, t_max: float, dt: float, d: int, seed: RngSeed, offset: int = 0
) -> np.ndarray:
    """(n, m+1) (or (n, m+1, d)) array of Brownian values at k*dt.

    Paths are generated in blocks of :data:`BLOCK` with one counter-based
    stream per block, so path i is reproducible regardless of batch or
    worker partitioning.  ``offset`` shifts the global path index.
    """
    m = _steps(t_max, dt)
    shape_tail = (m,) if d == 1 else (m, d)
    out = np.empty((n, m + 1) + shape_tail[1:], dtype=float)
    first = offset // BLOCK
    last = (offset + n - 1) // BLOCK
    scale = math.sqrt(dt)
    for blk in range(first, last + 1):
        rng = seed.spawn(seed.stream + blk).generator()
        incr = rng.standard_normal((BLOCK,) + shape_tail) * scale
        lo = max(blk * BLOCK, offset)
        hi = min((blk + 1) * BLOCK, offset + n)
        sel = incr[lo - blk * BLOCK : hi - blk * BLOCK]
        seg = np.cumsum(sel, axis=1)
        out[lo - offset : hi - offset, 0] = 0.0
        out[lo - offset : hi - offset, 1:] = seg
    return out


def sample_brownian(
    n: int, t_max: float, dt: float, d: int, seed: RngSeed
) -> list[BrownianPath]:
    """``n`` independent paths as :class:`BrownianPath` objects."""
    values = brownian_batch(n, t_max, dt, d, seed)
    grid = np.arange(_steps(t_max, dt) + 1) * dt
    return [BrownianPath(grid, v) for v in values]


def _reversed_shifted(batch: np.ndarray, k: int, x) -> np.ndarray:
    """Values of s -> B(t - s) + x on the grid, t = k*dt."""
    rev = batch[:, k::-1] if batch.ndim == 2 else batch[:, k::-1, :]
    return rev + x


def conditional_variance(
    b: BrownianPath | np.ndarray, t: float, x, h, kernel: SpatialKernel
) -> float:
    """Variance of the noise functional along the reversed path B(t-.) + x.

    Admissibility is the solver gate H > 1/2 - gamma/4 (the Brownian
    exponent 1/2 makes it equivalent to the generic path gate).
    """
    hp = as_hurst(h)
    solver_gate(hp, kernel)
    if isinstance(b, BrownianPath):
        dt = b.grid[1] - b.grid[0]
        values = b.values
    else:
        raise TypeError("pass a BrownianPath")
    k = int(round(t / dt))
    if abs(k * dt - t) > 1e-9 or k > len(values) - 1:
        raise ValueError("t must be a grid time within the path horizon")
    rev = _reversed_shifted(values[None, :], k, x)
    return float(variance_on_grid(rev, dt, hp, kernel)[0])


def _mc_exponent_mean(
    prefactors: np.ndarray, exponents: np.ndarray, seed: RngSeed
) -> MCEstimate:
    keep = exponents <= OVERFLOW_EXPONENT
    rejected = int(np.size(exponents) - np.count_nonzero(keep))
    vals = prefactors[keep] * np.exp(exponents[keep])
    return _estimate(vals, seed, rejected)


def solution_mean(
    t: float,
    x,
    u0: InitialCondition,
    n_paths: int,
    h,
    kernel: SpatialKernel,
    seed: RngSeed,
    dt: float | None = None,
    workers: int = 1,
) -> MCEstimate:
    """Noise-averaged solution  E[u(t, x)]  by path-level Monte Carlo."""
    hp = as_hurst(h)
    solver_gate(hp, kernel)
    dt = t / 1024 if dt is None else dt
    m = _steps(t, dt)
    d = kernel.dim

    def block_values(lo, hi):
        batch = brownian_batch(hi - lo, t, dt, d, seed, offset=lo)
        rev = _reversed_shifted(batch, m, x)
        sig2 = variance_on_grid(rev, dt, hp, kernel)
        end = batch[:, -1] + x
        return u0.fn(end), 0.5 * sig2

    pre, expo = _run_blocks(block_values, n_paths, workers)
    return _mc_exponent_mean(pre, expo, seed)


def _run_blocks(fn, n, workers):
    """Assemble per-path arrays from fixed-size blocks, optionally threaded."""
    bounds = [(lo, min(lo + BLOCK, n)) for lo in range(0, n, BLOCK)]
    if workers <= 1 or len(bounds) == 1:
        parts = [fn(lo, hi) for lo, hi in bounds]
    else:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(lambda b: fn(*b), bounds))
    return tuple(np.concatenate(cols) for cols in zip(*parts))


def solution_second_moment(
    t: float,
    x,
    y,
    u0: InitialCondition,
    n_path_pairs: int,
    h,
    kernel: SpatialKernel,
    seed: RngSeed,
    dt: float | None = None,
    workers: int = 1,
) -> MCEstimate:
    """E[u(t,x) u(t,y)] via two independent path replicas."""
    hp = as_hurst(h)
    solver_gate(hp, kernel)
    dt = t / 1024 if dt is None else dt
    m = _steps(t, dt)
    d = kernel.dim
    seed2 = seed.spawn(seed.stream + 2**20)

    def block_values(lo, hi):
        b1 = brownian_batch(hi - lo, t, dt, d, seed, offset=lo)
        b2 = brownian_batch(hi - lo, t, dt, d, seed2, offset=lo)
        r1 = _reversed_shifted(b1, m, x)
        r2 = _reversed_shifted(b2, m, y)
        s1 = variance_on_grid(r1, dt, hp, kernel)
        s2 = variance_on_grid(r2, dt, hp, kernel)
        c12 = covariance_on_grid(r1, r2, dt, hp, kernel)
        pre = u0.fn(b1[:, -1] + x) * u0.fn(b2[:, -1] + y)
        return pre, 0.5 * s1 + 0.5 * s2 + c12

    pre, expo = _run_blocks(block_values, n_path_pairs, workers)
    return _mc_exponent_mean(pre, expo, seed)


def exponential_moment(
    t: float,
    x,
    p: float,
    n_paths: int,
    h,
    kernel: SpatialKernel,
    seed: RngSeed,
    dt: float | None = None,
) -> MCEstimate:
    """E_B[exp(p * sigma^2(B)/2)]: the integrability certificate."""
    hp = as_hurst(h)
    solver_gate(hp, kernel)
    dt = t / 1024 if dt is None else dt
    m = _steps(t, dt)

    def block_values(lo, hi):
        batch = brownian_batch(hi - lo, t, dt, kernel.dim, seed, offset=lo)
        rev = _reversed_shifted(batch, m, x)
        sig2 = variance_on_grid(rev, dt, hp, kernel)
        return np.ones(hi - lo), 0.5 * p * sig2

    pre, expo = _run_blocks(block_values, n_paths, 1)
    return _mc_exponent_mean(pre, expo, seed)


def _field_alignment(field: FieldSample, t: float, eps: float):
    """Check uniform field times containing s = 0..t and eps as whole steps."""
    times = field.spec.times
    steps = np.diff(times)
    dtf = float(steps[0])
    if not np.allclose(steps, dtf, rtol=1e-9, atol=0.0):
        raise ValueError("field time grid must be uniform for path solvers")
    idx0 = int(round((0.0 - times[0]) / dtf))
    if idx0 < 0 or abs(times[0] + idx0 * dtf) > 1e-9:
        raise ValueError("field time grid must contain t = 0")
    m_eps = int(round(eps / dtf))
    if m_eps < 1 or abs(m_eps * dtf - eps) > 1e-9 * eps:
        raise ValueError("eps must be a whole number of field time steps")
    k = int(round(t / dtf))
    if abs(k * dtf - t) > 1e-9:
        raise ValueError("t must lie on the field time grid")
    return dtf, idx0, m_eps, k


def solution_pathwise(
    field: FieldSample,
    t: float,
    x: float,
    u0: InitialCondition,
    n_paths: int,
    eps: float,
    seed: RngSeed,
    workers: int = 1,
) -> MCEstimate:
    """Classical Feynman-Kac solution of the mollified equation, for one
    fixed field realization: MC over Brownian paths only."""
    if field.spec.kernel.dim != 1:
        raise ValueError("pathwise solver is d = 1 only")
    dtf, idx0, m_eps, k = _field_alignment(field, t, eps)
    sites = field.spec.sites
    x0, dx = float(sites[0]), float(sites[1] - sites[0])
    if not np.allclose(np.diff(sites), dx, rtol=1e-9, atol=0.0):
        raise ValueError("field site grid must be uniform for path solvers")

    def block_values(lo, hi):
        batch = brownian_batch(hi - lo, t, dtf, 1, seed, offset=lo)
        positions = _reversed_shifted(batch, k, x)
        integ = _backend.line_integral_batch(
            field.values, idx0, m_eps, positions, dtf, x0, dx, eps
        )
        return u0.fn(batch[:, -1] + x), integ

    pre, expo = _run_blocks(block_values, n_paths, workers)
    return _mc_exponent_mean(pre, expo, seed)


def heat_semigroup(u0: InitialCondition, t: float, x, order: int = 160) -> float:
    """Deterministic heat flow  (p_t u0)(x)  by Gauss-Hermite quadrature."""
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.size
    nodes, w = np.polynomial.hermite.hermgauss(order)
    std = math.sqrt(2.0 * t)
    if d == 1:
        vals = u0.fn(x[0] + std * nodes)
        return float(np.dot(w, vals) / math.sqrt(math.pi))
    grids = np.meshgrid(*([nodes] * d), indexing="ij")
    pts = np.stack([x[j] + std * grids[j] for j in range(d)], axis=-1)
    wts = np.ones_like(grids[0])
    for j in range(d):
        shape = [1] * d
        shape[j] = order
        wts = wts * w.reshape(shape)
    vals = u0.fn(pts.reshape(-1, d)).reshape(grids[0].shape)
    return float(np.sum(wts * vals) / math.pi ** (d / 2.0))


def wick_moments(
    t: float,
    x,
    y,
    u0: InitialCondition,
    n_path_pairs: int,
    h,
    kernel: SpatialKernel,
    seed: RngSeed,
    dt: float | None = None,
    workers: int = 1,
    second_moment: bool = True,
) -> dict:
    """Mean and mixed second moment of the Wick-product solution.

    The renormalized exponential has unit expectation, so the mean reduces
    to the plain heat-flow average and the second moment keeps only the
    cross covariance of the two replicas.  Pass ``second_moment=False`` to
    skip the covariance sweep when only the mean is wanted.
    """
    hp = as_hurst(h)
    solver_gate(hp, kernel)
    dt = t / 1024 if dt is None else dt
    m = _steps(t, dt)
    d = kernel.dim
    seed2 = seed.spawn(seed.stream + 2**20)

    def block_values(lo, hi):
        b1 = brownian_batch(hi - lo, t, dt, d, seed, offset=lo)
        b2 = brownian_batch(hi - lo, t, dt, d, seed2, offset=lo)
        u1 = u0.fn(b1[:, -1] + x)
        u2 = u0.fn(b2[:, -1] + y)
        if second_moment:
            c12 = covariance_on_grid(
                _reversed_shifted(b1, m, x), _reversed_shifted(b2, m, y),
                dt, hp, kernel,
            )
        else:
            c12 = np.zeros(hi - lo)
        return u1, u2, c12

    u1, u2, c12 = _run_blocks(block_values, n_path_pairs, workers)
    mean = _estimate(u1, seed)
    out = {"mean_x": mean}
    if second_moment:
        keep = c12 <= OVERFLOW_EXPONENT
        rejected = int(c12.size - np.count_nonzero(keep))
        out["second_moment_xy"] = _estimate(
            (u1 * u2)[keep] * np.exp(c12[keep]), seed, rejected
        )
    return out


def _signed_indicator(endpoint: np.ndarray, z: float) -> np.ndarray:
    """1_[0, b](z) with the sign convention 1_[0,b] = -1_[-b,0] for b < 0."""
    pos = (endpoint >= 0) & (z >= 0.0) & (z <= endpoint)
    neg = (endpoint < 0) & (z <= 0.0) & (z >= endpoint)
    return np.where(pos, 1.0, 0.0) - np.where(neg, 1.0, 0.0)


def chaos_coefficient(
    n: int,
    t: float,
    x,
    points: Sequence[tuple[float, float]],
    u0: InitialCondition,
    n_paths: int,
    h,
    kernel: SpatialKernel,
    seed: RngSeed,
    dt: float | None = None,
) -> MCEstimate:
    """Feynman-Kac form of the order-n homogeneous chaos kernel at the
    given (time, space) points.

    Note: the exponential weight is exp(+sigma^2/2), mirroring the series
    representation this estimator discretizes; see the README note on the
    sign of this weight.
    """
    hp = as_hurst(h)
    solver_gate(hp, kernel)
    if n > 3:
        raise ValueError("chaos order n > 3 refused: variance blows up")
    if len(points) != n:
        raise ValueError("need exactly n (r_i, z_i) points")
    for r_i, _ in points:
        if not 0.0 < r_i < t:
            raise ValueError(f"chaos time {r_i} outside (0, t)")
    dt = t / 1024 if dt is None else dt
    m = _steps(t, dt)
    if kernel.dim != 1:
        raise ValueError("chaos estimator is d = 1 only")

    def block_values(lo, hi):
        batch = brownian_batch(hi - lo, t, dt, 1, seed, offset=lo)
        rev = _reversed_shifted(batch, m, x)
        sig2 = variance_on_grid(rev, dt, hp, kernel)
        pre = u0.fn(batch[:, -1] + x)
        for r_i, z_i in points:
            # path position at time t - r_i, linear interpolation
            u = (t - r_i) / dt
            k_lo = min(int(u), m - 1)
            frac = u - k_lo
            pos = batch[:, k_lo] * (1 - frac) + batch[:, k_lo + 1] * frac + x
            pre = pre * _signed_indicator(pos, z_i)
        return pre, 0.5 * sig2

    pre, expo = _run_blocks(block_values, n_paths, 1)
    return _mc_exponent_mean(pre, expo, seed)
