"""Exact simulation of the space-time Gaussian field on tensor grids.

The field has covariance ``E[W(t,x) W(s,y)] = C_h(t,s) Q(x,y)`` where
``C_h`` is the fractional temporal covariance (valid for negative times)
and Q a spatial kernel.  On a tensor grid the covariance is the Kronecker
product of the two Gram matrices, so one exact joint draw costs two small
factorizations instead of one enormous one: ``W = L_t Z L_x^T`` with Z an
i.i.d. standard normal matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .kernels import HurstParams, as_hurst, fbm_cov
from .spatial_kernels import SpatialKernel

MAX_TIMES = 4096
MAX_SITES = 512


class FactorizationError(RuntimeError):
    pass


@dataclass(frozen=True)
class RngSeed:
    """Counter-based stream identity: (master key, stream index).

    Streams with distinct indices use disjoint counter blocks of the same
    Philox generator, so they are independent and reproducible regardless
    of how work is scheduled across workers.
    """

    master: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.Generator(
            np.random.Philox(key=self.master, counter=self.stream << 128)
        )

    def spawn(self, stream: int) -> "RngSeed":
        return RngSeed(self.master, stream)

    def as_dict(self):
        return {"master": int(self.master), "stream": int(self.stream)}


@dataclass(frozen=True)
class GridSpec:
    """Tensor time x site grid (d = 1 sites) with its noise parameters."""

    times: np.ndarray
    sites: np.ndarray
    h: HurstParams
    kernel: SpatialKernel

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        sites = np.asarray(self.sites, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "sites", sites)
        object.__setattr__(self, "h", as_hurst(self.h))
        if times.ndim != 1 or sites.ndim != 1:
            raise ValueError("times and sites must be 1-d")
        if np.any(np.diff(times) <= 0) or np.any(np.diff(sites) <= 0):
            raise ValueError("grid axes must be strictly increasing")
        if len(times) > MAX_TIMES:
            raise ValueError(f"too many time points ({len(times)} > {MAX_TIMES})")
        if len(sites) > MAX_SITES:
            raise ValueError(f"too many sites ({len(sites)} > {MAX_SITES})")
        if self.kernel.dim != 1:
            raise ValueError("grid simulation supports d = 1 only")


@dataclass(frozen=True)
class FieldSample:
    """One realization of the field on its grid; immutable once built."""

    spec: GridSpec
    values: np.ndarray  # (n_times, n_sites)
    seed: RngSeed


def _psd_factor(gram: np.ndarray, axis_name: str) -> np.ndarray:
    """Lower factor L with L L^T = gram, tolerating exact zero rows.

    Rows with an exactly zero diagonal (zero-variance points, e.g. time 0)
    are removed before the Cholesky and re-embedded as zero rows of L.  If
    plain Cholesky fails, a single jitter of 1e-12 * trace is added to the
    diagonal; a second failure is an error naming the offending axis.
    """
    n = gram.shape[0]
    diag = np.diag(gram)
    alive = diag > 0.0
    reduced = gram[np.ix_(alive, alive)]
    out = np.zeros((n, n))
    if reduced.size:
        try:
            chol = np.linalg.cholesky(reduced)
        except np.linalg.LinAlgError:
            jitter = 1e-12 * float(np.trace(reduced))
            if jitter <= 0.0:
                jitter = 1e-300
            try:
                chol = np.linalg.cholesky(
                    reduced + jitter * np.eye(reduced.shape[0])
                )
            except np.linalg.LinAlgError as exc:
                raise FactorizationError(
                    f"{axis_name} Gram matrix is not positive semidefinite "
                    f"even after jitter {jitter:g}"
                ) from exc
        idx = np.flatnonzero(alive)
        out[np.ix_(idx, idx)] = chol
    return out


def temporal_gram(times, h) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    return fbm_cov(t[:, None], t[None, :], h)


def factorizations(spec: GridSpec):
    """(L_t, L_x) for the tensor draw; cache-friendly helper."""
    gram_t = temporal_gram(spec.times, spec.h)
    gram_x = np.asarray(
        spec.kernel.q(spec.sites[:, None], spec.sites[None, :]), dtype=float
    )
    l_t = _psd_factor(gram_t, "temporal")
    l_x = _psd_factor(gram_x, "spatial")
    return l_t, l_x


def simulate_field(spec: GridSpec, seed: RngSeed) -> FieldSample:
    """One exact joint draw of the field on the tensor grid."""
    l_t, l_x = factorizations(spec)
    rng = seed.generator()
    z = rng.standard_normal((len(spec.times), len(spec.sites)))
    values = l_t @ z @ l_x.T
    return FieldSample(spec=spec, values=values, seed=seed)


def simulate_field_batch(spec: GridSpec, seed: RngSeed, n: int) -> np.ndarray:
    """``n`` independent draws, shape (n, n_times, n_sites).

    Draw i equals ``simulate_field(spec, seed.spawn(seed.stream + i))``.
    """
    l_t, l_x = factorizations(spec)
    nt, nx = len(spec.times), len(spec.sites)
    out = np.empty((n, nt, nx))
    for i in range(n):
        rng = seed.spawn(seed.stream + i).generator()
        z = rng.standard_normal((nt, nx))
        out[i] = l_t @ z @ l_x.T
    return out


def _bilinear(field: FieldSample, s, x):
    times = field.spec.times
    sites = field.spec.sites
    s = np.asarray(s, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(s < times[0] - 1e-12) or np.any(s > times[-1] + 1e-12):
        raise ValueError(
            f"time {float(np.min(s)) if np.any(s < times[0]) else float(np.max(s)):g}"
            f" outside the simulated range [{times[0]:g}, {times[-1]:g}]"
        )
    if np.any(x < sites[0] - 1e-12) or np.any(x > sites[-1] + 1e-12):
        raise ValueError(
            f"site {float(np.min(x)) if np.any(x < sites[0]) else float(np.max(x)):g}"
            f" outside the simulated range [{sites[0]:g}, {sites[-1]:g}]"
        )
    it = np.clip(np.searchsorted(times, s, side="right") - 1, 0, len(times) - 2)
    ix = np.clip(np.searchsorted(sites, x, side="right") - 1, 0, len(sites) - 2)
    ft = np.clip((s - times[it]) / (times[it + 1] - times[it]), 0.0, 1.0)
    fx = np.clip((x - sites[ix]) / (sites[ix + 1] - sites[ix]), 0.0, 1.0)
    v = field.values
    v00 = v[it, ix]
    v01 = v[it, ix + 1]
    v10 = v[it + 1, ix]
    v11 = v[it + 1, ix + 1]
    return (
        v00 * (1 - ft) * (1 - fx)
        + v01 * (1 - ft) * fx
        + v10 * ft * (1 - fx)
        + v11 * ft * fx
    )


def field_value(field: FieldSample, t, x):
    """W(t, x) with bilinear interpolation between grid nodes."""
    out = _bilinear(field, t, x)
    return out.item() if np.ndim(out) == 0 else out


def mollified_rate(field: FieldSample, s, x, eps: float):
    """Symmetric difference quotient (W(s+e, x) - W(s-e, x)) / (2e)."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    hi = _bilinear(field, np.asarray(s, dtype=float) + eps, x)
    lo = _bilinear(field, np.asarray(s, dtype=float) - eps, x)
    out = (hi - lo) / (2.0 * eps)
    return out.item() if np.ndim(out) == 0 else out


def mollified_field(field: FieldSample, t: float, x, eps: float):
    """Time integral of the mollified rate from 0 to t (trapezoid rule)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return 0.0
    times = field.spec.times
    inner = times[(times > 0.0) & (times < t)]
    s_grid = np.concatenate(([0.0], inner, [t]))
    vals = mollified_rate(field, s_grid, np.full_like(s_grid, float(x)), eps)
    return float(np.trapezoid(vals, s_grid))
