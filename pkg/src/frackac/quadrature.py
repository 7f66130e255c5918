"""Deterministic integration with algebraic endpoint singularities.

All the second-moment formulas in this package reduce to integrals of the
form ``int_a^b (r - a)^p * smooth(r) dr`` with ``p`` in (-1, 0], or to
iterated double integrals over the triangle ``0 < r < theta < t`` whose inner
integrand carries such a weight.  A uniform mesh loses its convergence order
on these, so the rules here use a mesh graded toward the singular endpoint,
with a Gauss-Jacobi rule (weight matched to ``p``) on the panel that touches
it and Gauss-Legendre panels elsewhere.

Integrands must be vectorized: they receive an ndarray of nodes and return
an ndarray of values.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.special import roots_jacobi


class QuadratureError(RuntimeError):
    """Raised when the target tolerance is not met after one refinement.

    Carries the best value obtained and its error estimate so callers can
    decide whether to accept a degraded result.
    """

    def __init__(self, message, value, error_estimate):
        super().__init__(message)
        self.value = value
        self.error_estimate = error_estimate


@dataclass(frozen=True)
class QuadratureSpec:
    """Mesh and tolerance parameters shared by the singular rules."""

    n_panels: int = 64
    grading_exponent: float | None = None  # None: 3/(1+p), clamped to [1, 8]
    rule_order: int = 8
    target_abs_tol: float = 1e-8

    def __post_init__(self):
        if self.n_panels < 2:
            raise ValueError("n_panels must be >= 2")
        if self.target_abs_tol <= 0:
            raise ValueError("target_abs_tol must be positive")
        if self.grading_exponent is not None and self.grading_exponent < 1:
            raise ValueError("grading_exponent must be >= 1")


@dataclass(frozen=True)
class QuadResult:
    value: float
    error_estimate: float


DEFAULT_SPEC = QuadratureSpec()


@lru_cache(maxsize=64)
def _gauss_legendre(order):
    x, w = np.polynomial.legendre.leggauss(order)
    return x, w


@lru_cache(maxsize=256)
def _gauss_jacobi(order, p):
    # weight (1+x)^p on [-1, 1]; beta = p puts the singularity at -1
    x, w = roots_jacobi(order, 0.0, p)
    return x, w


# Innermost-panel cutoff of the geometric mesh, relative to the interval
# length.  Mass below the cutoff is handled by a Gauss-Jacobi panel whose
# weight matches the singular exponent exactly.  Not smaller: integrands
# evaluate coordinates like (b - r), and below ~1e-11 relative distance the
# subtraction noise (1e-16/distance) would poison the innermost panel.
_MESH_CUTOFF = 3e-11

# relative floor on error estimates: Richardson differences can vanish to
# rounding even though the value carries ~1 ulp-per-node noise
_FLOOR = 5e-15


def _mesh_edges(a, b, p, n_panels, grading):
    """Panel edges clustered at ``a``.

    Default mesh is geometric: n panels with common ratio
    ``cutoff^(-1/n)`` between the cutoff and ``b``, preceded by one tiny
    panel [a, a + L*cutoff].  Doubling ``n`` drives every panel ratio toward
    1, so the Richardson difference is a faithful error estimate.  When an
    explicit ``grading_exponent`` g is supplied the classical polynomial
    grading ``a + L*(i/n)^g`` is used instead.
    """
    length = b - a
    if grading is not None:
        return a + length * (np.arange(n_panels + 1) / n_panels) ** grading
    tail = np.arange(n_panels, -1, -1) / n_panels
    return np.concatenate(([a], a + length * _MESH_CUTOFF**tail))


def _eval_graded(f, a, b, p, n_panels, order, grading):
    """One pass of the composite rule, singularity at ``a``."""
    if b - a <= 0.0:
        return 0.0
    edges = _mesh_edges(a, b, p, n_panels, grading)
    total = 0.0
    start = 0
    if p != 0.0:
        # Jacobi panel absorbs the (r-a)^p factor exactly; f is evaluated
        # with the singular factor divided out.  Node distances are floored
        # at a few ulps of the coordinates: integrands form differences
        # like (b - r) whose representation error would otherwise dominate,
        # while the divided-out factor s = f * d^(-p) is smooth at this
        # scale, so the floor costs nothing.
        xj, wj = _gauss_jacobi(order, p)
        h0 = edges[1] - edges[0]
        # 1e-9 of the coordinate scale keeps the relative noise of formed
        # differences at ~1e-7 while s is constant to ~1e-9 down there
        d_floor = 1e-9 * max(abs(a), abs(b))
        dist = np.maximum(h0 * (xj + 1.0) / 2.0, d_floor)
        r0 = a + dist
        vals_j = np.asarray(f(r0), dtype=float) * (r0 - a) ** (-p)
        total += float(np.dot(wj, vals_j)) * (h0 / 2.0) ** (p + 1.0)
        start = 1
    xg, wg = _gauss_legendre(order)
    lo = edges[start:-1]
    hi = edges[start + 1 :]
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    nodes_g = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights_g = (half[:, None] * wg[None, :]).ravel()
    vals_g = np.asarray(f(nodes_g), dtype=float)
    return total + float(np.dot(weights_g, vals_g))


def singular_quad(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    p: float = 0.0,
    spec: QuadratureSpec | None = None,
    singular_end: str = "left",
) -> QuadResult:
    """Integrate ``f`` on [a, b] with an algebraic singularity at one end.

    ``p`` is the singular exponent: |f(r)| <= C (r-a)^p near the singular
    endpoint, with -1 < p <= 0.  The error estimate is the Richardson
    difference between the n-panel and 2n-panel meshes; if the tolerance is
    still not met after one more doubling a :class:`QuadratureError` is
    raised carrying the best value.
    """
    spec = spec or DEFAULT_SPEC
    if not -1.0 < p <= 0.0:
        raise ValueError(f"singular exponent p={p} outside (-1, 0]")
    if b < a:
        raise ValueError("need a <= b")
    if b == a:
        return QuadResult(0.0, 0.0)
    if singular_end == "right":
        return singular_quad(
            lambda r: f(a + b - np.asarray(r)), a, b, p, spec, "left"
        )
    if singular_end != "left":
        raise ValueError("singular_end must be 'left' or 'right'")

    g = spec.grading_exponent
    n = spec.n_panels
    coarse = _eval_graded(f, a, b, p, n, spec.rule_order, g)
    fine = _eval_graded(f, a, b, p, 2 * n, spec.rule_order, g)
    err = abs(fine - coarse) + _FLOOR * abs(fine)
    if err <= spec.target_abs_tol:
        return QuadResult(fine, err)
    finer = _eval_graded(f, a, b, p, 4 * n, spec.rule_order, g)
    err2 = abs(finer - fine) + _FLOOR * abs(finer)
    if err2 <= spec.target_abs_tol:
        return QuadResult(finer, err2)
    raise QuadratureError(
        f"tolerance {spec.target_abs_tol:g} not met on [{a:g}, {b:g}] "
        f"(best estimate {err2:g})",
        value=finer,
        error_estimate=err2,
    )


def piecewise_singular_quad(
    f,
    a,
    b,
    knots: Sequence[tuple[float, float, float]],
    spec: QuadratureSpec | None = None,
) -> QuadResult:
    """Integrate with several singular/kink points inside [a, b].

    ``knots`` is a list of (location, p_left, p_right): the integrand may be
    singular (or have a derivative blow-up) approaching ``location`` from
    either side with the given exponents.  The domain is split at every
    location and each piece is graded toward its singular ends.  Exponents
    are clamped to (-1, 0]; a value of 0 means "kink only", which still gets
    grading via the default exponent heuristic.
    """
    spec = spec or DEFAULT_SPEC
    pts = {a: [0.0, 0.0], b: [0.0, 0.0]}
    for loc, pl, pr in knots:
        if loc <= a or loc >= b:
            if loc == a:
                pts[a][1] = min(pts[a][1], pr)
            if loc == b:
                pts[b][0] = min(pts[b][0], pl)
            continue
        entry = pts.setdefault(loc, [0.0, 0.0])
        entry[0] = min(entry[0], pl)
        entry[1] = min(entry[1], pr)
    locs = sorted(pts)
    total = 0.0
    err = 0.0
    failed = False

    def piece(a_, b_, p_, end):
        nonlocal total, err, failed
        try:
            r = singular_quad(f, a_, b_, p_, spec, end)
            total += r.value
            err += r.error_estimate
        except QuadratureError as exc:
            # keep accumulating so the final value/estimate cover the whole
            # interval, not just the failing piece
            total += exc.value
            err += exc.error_estimate
            failed = True

    for lo, hi in zip(locs[:-1], locs[1:]):
        p_right_of_lo = pts[lo][1]
        p_left_of_hi = pts[hi][0]
        # split the piece in half when both ends are singular
        if p_right_of_lo < 0.0 and p_left_of_hi < 0.0:
            mid = 0.5 * (lo + hi)
            piece(lo, mid, p_right_of_lo, "left")
            piece(mid, hi, p_left_of_hi, "right")
        elif p_left_of_hi < 0.0:
            piece(lo, hi, p_left_of_hi, "right")
        else:
            piece(lo, hi, p_right_of_lo, "left")
    if failed and err > len(locs) * spec.target_abs_tol:
        raise QuadratureError(
            f"piecewise tolerance not met (estimate {err:g})",
            value=total,
            error_estimate=err,
        )
    return QuadResult(total, err)


def double_quad(
    f,
    t: float,
    spec: QuadratureSpec | None = None,
    inner_p: float = 0.0,
    inner_knots: Callable[[float], Sequence[tuple[float, float, float]]] | None = None,
    outer_singular_p: float = 0.0,
    outer_knots: Sequence[float] = (),
) -> QuadResult:
    """Iterated integral of ``f(theta, r)`` over ``0 < r < theta < t``.

    The outer theta-rule is a graded Gauss-Legendre composite (integrands
    here vanish at 0 but with unbounded derivatives); the inner r-integral
    uses :func:`singular_quad` with exponent ``inner_p`` at r = 0, plus any
    interior kink knots supplied by ``inner_knots(theta)``.  Locations
    where the inner integral changes analytic form (e.g. a kink entering
    the domain) go in ``outer_knots`` so the theta-mesh splits there.

    ``f`` is called as ``f(theta, r_array)`` with scalar theta.
    """
    spec = spec or DEFAULT_SPEC
    if t < 0:
        raise ValueError("need t >= 0")
    if t == 0:
        return QuadResult(0.0, 0.0)

    inner_spec = QuadratureSpec(
        n_panels=spec.n_panels,
        grading_exponent=spec.grading_exponent,
        rule_order=spec.rule_order,
        target_abs_tol=spec.target_abs_tol / (8.0 * max(t, 1.0)),
    )
    cuts = sorted({float(k) for k in outer_knots if 0.0 < k < t})

    def outer_value(n_out):
        # outer integrands here are bounded and vanish at 0 (only their
        # derivatives blow up), so a mild polynomial grading suffices and is
        # much cheaper than the deep geometric stack of the inner rule
        g_out = spec.grading_exponent if spec.grading_exponent is not None else 3.0
        pieces = np.concatenate(([0.0], cuts, [t]))
        parts = []
        for plo, phi_ in zip(pieces[:-1], pieces[1:]):
            frac = np.arange(n_out + 1) / n_out
            if plo == 0.0:
                parts.append(phi_ * frac**g_out)
            else:
                # grade mildly toward the knot where regularity is lost
                parts.append(plo + (phi_ - plo) * frac**2)
        edges = np.unique(np.concatenate(parts))
        xg, wg = _gauss_legendre(spec.rule_order)
        inner_err = 0.0
        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            mid = 0.5 * (lo + hi)
            half = 0.5 * (hi - lo)
            thetas = mid + half * xg
            for theta, w in zip(thetas, half * wg):
                knots = list(inner_knots(theta)) if inner_knots is not None else []
                try:
                    if knots:
                        res = piecewise_singular_quad(
                            lambda r: f(theta, r), 0.0, theta,
                            [(0.0, 0.0, inner_p)] + knots, inner_spec,
                        )
                    else:
                        res = singular_quad(
                            lambda r: f(theta, r), 0.0, theta, inner_p, inner_spec
                        )
                    value, ierr = res.value, res.error_estimate
                except QuadratureError as exc:
                    # keep going: the shortfall is carried in the estimate and
                    # judged against the overall tolerance at the end
                    value, ierr = exc.value, exc.error_estimate
                total += w * value
                inner_err += abs(w) * ierr
        return total, inner_err

    n = max(8, spec.n_panels // 4)
    coarse, _ = outer_value(n)
    fine, inner_err = outer_value(2 * n)
    err = abs(fine - coarse) + inner_err + _FLOOR * abs(fine)
    if err <= spec.target_abs_tol:
        return QuadResult(fine, err)
    finer, inner_err2 = outer_value(4 * n)
    err2 = abs(finer - fine) + inner_err2 + _FLOOR * abs(finer)
    if err2 <= spec.target_abs_tol:
        return QuadResult(finer, err2)
    raise QuadratureError(
        f"double quadrature tolerance {spec.target_abs_tol:g} not met "
        f"(best estimate {err2:g})",
        value=finer,
        error_estimate=err2,
    )


def gauss_hermite_expectation(f, mean=0.0, std=1.0, order=150):
    """E[f(Z)] for Z ~ N(mean, std^2) by Gauss-Hermite quadrature."""
    x, w = np.polynomial.hermite.hermgauss(order)
    pts = mean + std * np.sqrt(2.0) * x
    vals = np.asarray(f(pts), dtype=float)
    return float(np.dot(w, vals) / np.sqrt(np.pi))
