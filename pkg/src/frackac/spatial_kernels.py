"""Spatial covariance kernels with declared regularity metadata.

A kernel carries the constants of its local boundedness and local Hoelder
continuity as *declared* metadata (gamma, m, c0, c1) rather than deriving
them; :func:`verify_q1_q2` falsifies bad declarations by sampled maximization
of the two defining inequalities.

Built-in families (selectable from config files):

``constant``   Q(x, y) = c            gamma = 1, m = 0
``fbm_space``  Q(x, y) = (|x|^2k + |y|^2k - |x-y|^2k)/2   gamma = 2k, m = 2k
``smooth``     Q(x, y) = exp(-|x-y|^2 / ell^2)            gamma = 1, m = 0
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .kernels import AdmissibilityError, as_hurst

# integer ids used by the compiled backend's inner loops
KERNEL_CONSTANT = 0
KERNEL_FBM_SPACE = 1
KERNEL_SMOOTH = 2


@dataclass(frozen=True)
class SpatialKernel:
    """Symmetric positive-semidefinite covariance on R^d x R^d."""

    kind: str
    eval: Callable[[np.ndarray, np.ndarray], np.ndarray]
    gamma: float  # local Hoelder exponent, in (0, 1]
    m: float      # growth exponent, < 2
    c0: float     # local bound constant
    c1: float     # local Hoelder constant
    dim: int = 1
    kernel_id: int = -1   # backend dispatch; -1 means "python eval only"
    p0: float = 0.0
    p1: float = 0.0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.m >= 2.0:
            raise ValueError("growth exponent must be < 2")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")

    def q(self, x, y):
        """Evaluate Q(x, y) with broadcasting; last axis is space if dim > 1."""
        return self.eval(np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    @property
    def is_constant(self) -> bool:
        return self.kind == "constant"


def _norms(x, y, dim):
    if dim == 1:
        return np.abs(x), np.abs(y), np.abs(x - y)
    return (
        np.linalg.norm(x, axis=-1),
        np.linalg.norm(y, axis=-1),
        np.linalg.norm(x - y, axis=-1),
    )


def make_constant(c: float, d: int = 1) -> SpatialKernel:
    """Degenerate kernel Q == c; the field collapses to one temporal path."""
    if c < 0:
        raise ValueError("c must be >= 0")

    def ev(x, y):
        shape = np.broadcast_shapes(np.shape(x), np.shape(y))
        if d > 1 and shape:
            shape = shape[:-1]
        return np.full(shape, float(c)) if shape else float(c)

    return SpatialKernel(
        kind="constant", eval=ev, gamma=1.0, m=0.0,
        c0=c if c > 0 else 1.0, c1=1.0, dim=d,
        kernel_id=KERNEL_CONSTANT, p0=float(c),
    )


def make_fbm_space(k: float, d: int = 1) -> SpatialKernel:
    """Fractional-motion spatial covariance, Hoelder exponent 2k."""
    if not 0.0 < k <= 0.5:
        raise ValueError("k must lie in (0, 1/2]")

    def ev(x, y):
        nx, ny, nd = _norms(x, y, d)
        return 0.5 * (nx ** (2 * k) + ny ** (2 * k) - nd ** (2 * k))

    return SpatialKernel(
        kind="fbm_space", eval=ev, gamma=2 * k, m=2 * k,
        c0=1.0, c1=1.0, dim=d,
        kernel_id=KERNEL_FBM_SPACE, p0=float(k),
    )


def make_smooth(ell: float, d: int = 1) -> SpatialKernel:
    """Squared-exponential kernel exp(-|x-y|^2/ell^2); Lipschitz on compacts."""
    if ell <= 0:
        raise ValueError("ell must be positive")

    def ev(x, y):
        _, _, nd = _norms(x, y, d)
        return np.exp(-(nd**2) / ell**2)

    # Lipschitz constant of exp(-d^2/ell^2) in each argument is
    # sqrt(2)/(ell*sqrt(e)) ~ 0.858/ell; declare 1/ell for slack.
    return SpatialKernel(
        kind="smooth", eval=ev, gamma=1.0, m=0.0,
        c0=1.0, c1=1.0 / ell, dim=d,
        kernel_id=KERNEL_SMOOTH, p0=float(ell),
    )


KERNEL_FACTORIES = {
    "constant": make_constant,
    "fbm_space": make_fbm_space,
    "smooth": make_smooth,
}


def kernel_from_config(kind: str, params: dict, d: int = 1) -> SpatialKernel:
    """Build a built-in kernel from config values (kernel.c / .k / .ell)."""
    if kind == "constant":
        return make_constant(float(params.get("c", 1.0)), d)
    if kind == "fbm_space":
        return make_fbm_space(float(params.get("k", 0.25)), d)
    if kind == "smooth":
        return make_smooth(float(params.get("ell", 1.0)), d)
    raise ValueError(f"unknown kernel kind {kind!r}")


def solver_gate(h, kernel: SpatialKernel, force: bool = False) -> None:
    """Admissibility of (H, gamma) for the solution-level operations.

    Requires H > 1/2 - gamma/4.  Pure arithmetic on declared metadata.
    """
    hp = as_hurst(h)
    bound = 0.5 - kernel.gamma / 4.0
    if hp.h <= bound:
        msg = (
            f"admissibility H > 1/2 - gamma/4 violated: "
            f"H = {hp.h} <= {bound} (gamma = {kernel.gamma})"
        )
        if force:
            import warnings

            warnings.warn(msg)
            return
        raise AdmissibilityError(msg)


def verify_q1_q2(
    kernel: SpatialKernel,
    radius: float,
    n_samples: int,
    seed: int = 0,
) -> dict:
    """Sampled maximization of the two regularity-assumption violations.

    Returns max over samples of ``Q(x,y) - c0 (1+K)^m`` (local bound) and of
    ``|Q(x,y) - Q(u,v)| - c1 (1+K)^m (|x-u|^gamma + |y-v|^gamma)`` (local
    Hoelder).  Both are <= 0 for a conforming declaration.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    d = kernel.dim
    shape = (n_samples, d) if d > 1 else (n_samples,)

    def ball(n):
        pts = rng.uniform(-radius, radius, size=shape)
        if d > 1:
            r = np.linalg.norm(pts, axis=-1, keepdims=True)
            scl = np.where(r > radius, radius / r, 1.0)
            pts = pts * scl
        return pts

    envelope = (1.0 + radius) ** kernel.m
    x, y = ball(n_samples), ball(n_samples)
    q1 = kernel.q(x, y) - kernel.c0 * envelope

    u, v = ball(n_samples), ball(n_samples)
    if d > 1:
        dxu = np.linalg.norm(x - u, axis=-1)
        dyv = np.linalg.norm(y - v, axis=-1)
    else:
        dxu = np.abs(x - u)
        dyv = np.abs(y - v)
    lhs = np.abs(kernel.q(x, y) - kernel.q(u, v))
    rhs = kernel.c1 * envelope * (dxu**kernel.gamma + dyv**kernel.gamma)
    q2 = lhs - rhs

    return {
        "max_violation_q1": float(np.max(q1)),
        "max_violation_q2": float(np.max(q2)),
    }


def with_constants(kernel: SpatialKernel, **overrides) -> SpatialKernel:
    """Copy of the kernel with metadata overridden (for falsification tests)."""
    return replace(kernel, **overrides)
