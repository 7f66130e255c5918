"""Pure-NumPy implementation of the hot kernels.

This is the fallback twin of the compiled extension ``frackac._core``: same
functions, same semantics, vectorized over the batch axis instead of running
C loops.  Results agree with the compiled core to floating-point
reassociation (~1e-12 relative); within one backend results are bitwise
reproducible.

The second-moment routines integrate the closed-form variance/covariance
formulas on the path's own grid: weights ``theta^(2H-1)`` and ``r^(2H-2)``
are integrated exactly against piecewise-linear data (product integration),
which keeps the r -> 0 singularity harmless because the covariance
difference vanishes at r = 0 exactly.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

_CONSTANT, _FBM_SPACE, _SMOOTH = 0, 1, 2


def _q_pair(xa, xb, kernel_id, p0, p1):
    """Kernel value for point arrays of equal shape (d = 1) or (..., d)."""
    if kernel_id == _CONSTANT:
        return np.full(np.broadcast_shapes(xa.shape, xb.shape), p0)[
            ..., 0
        ] if xa.ndim == 3 else np.full(np.broadcast_shapes(xa.shape, xb.shape), p0)
    if xa.ndim == 3 or xb.ndim == 3:
        na = np.linalg.norm(xa, axis=-1)
        nb = np.linalg.norm(xb, axis=-1)
        nd = np.linalg.norm(xa - xb, axis=-1)
    else:
        na = np.abs(xa)
        nb = np.abs(xb)
        nd = np.abs(xa - xb)
    if kernel_id == _FBM_SPACE:
        tk = 2.0 * p0
        return 0.5 * (na**tk + nb**tk - nd**tk)
    if kernel_id == _SMOOTH:
        return np.exp(-(nd**2) / p0**2)
    raise ValueError(f"unknown kernel id {kernel_id}")


def _power_tables(m, dt, two_h):
    """Exact integrals of the singular weights over grid cells."""
    r = np.arange(m + 1) * dt
    p_2h = r**two_h                        # r^(2H)
    r_2hp1 = r ** (two_h + 1.0)            # r^(2H+1)
    s = np.empty(m + 1)
    s[0] = 0.0                             # placeholder, never weighted
    s[1:] = r[1:] ** (two_h - 1.0) / (two_h - 1.0)
    p2 = p_2h / two_h                      # r^(2H) / 2H
    return r, p_2h, r_2hp1, s, p2


def _term1(q, dt, two_h):
    """2H * int_0^t theta^(2H-1) q(theta) dtheta, q piecewise linear.

    q has shape (B, m+1).
    """
    m = q.shape[1] - 1
    theta = np.arange(m + 1) * dt
    p = theta**two_h
    rr = theta ** (two_h + 1.0)
    slope = (q[:, 1:] - q[:, :-1]) / dt
    a = q[:, :-1] - slope * theta[:-1]
    dp = p[1:] - p[:-1]
    dr = rr[1:] - rr[:-1]
    return a @ dp + (two_h / (two_h + 1.0)) * (slope @ dr)


def _inner_singular(g, s_tab, p2_tab, dt):
    """int_0^{k dt} r^(2H-2) g(r) dr with g piecewise linear, g[..., 0] = 0.

    g has shape (B, k+1); returns (B,).
    """
    k = g.shape[1] - 1
    r = np.arange(k + 1) * dt
    slope = (g[:, 1:] - g[:, :-1]) / dt
    a = g[:, :-1] - slope * r[:-1]
    a[:, 0] = 0.0  # exact: g vanishes at r = 0
    ds = s_tab[1 : k + 1] - s_tab[:k]
    ds = ds.copy()
    ds[0] = 0.0    # paired with a[:, 0] = 0; kills the inf placeholder
    dp2 = p2_tab[1 : k + 1] - p2_tab[:k]
    return a @ ds + slope @ dp2


def sigma2_batch(paths, dt, two_h, kernel_id, p0, p1, skip_correction=False):
    """Closed-form second moment of the noise functional along each path.

    ``paths`` has shape (B, m+1) for d = 1 or (B, m+1, d); row k is the
    spatial point at time k*dt.  Returns an array of shape (B,).
    """
    paths = np.asarray(paths, dtype=float)
    batch, mp1 = paths.shape[0], paths.shape[1]
    m = mp1 - 1
    q_diag = _q_pair(paths, paths, kernel_id, p0, p1)
    total = _term1(q_diag, dt, two_h)
    if skip_correction or kernel_id == _CONSTANT:
        return total
    _, _, _, s_tab, p2_tab = _power_tables(m, dt, two_h)
    f_prev = np.zeros(batch)
    corr = np.zeros(batch)
    for k in range(1, m + 1):
        xk = paths[:, k : k + 1] if paths.ndim == 2 else paths[:, k : k + 1, :]
        rev = paths[:, k::-1] if paths.ndim == 2 else paths[:, k::-1, :]
        g = _q_pair(np.broadcast_to(xk, rev.shape), rev, kernel_id, p0, p1)
        g = g - q_diag[:, k : k + 1]
        g[:, 0] = 0.0
        f_k = _inner_singular(g, s_tab, p2_tab, dt)
        corr += 0.5 * dt * (f_prev + f_k)
        f_prev = f_k
    return total + two_h * (two_h - 1.0) * corr


def covariance_batch(
    paths_a, paths_b, dt, two_h, kernel_id, p0, p1, skip_correction=False
):
    """Closed-form mixed second moment of the functionals of two paths."""
    pa = np.asarray(paths_a, dtype=float)
    pb = np.asarray(paths_b, dtype=float)
    if pa.shape != pb.shape:
        raise ValueError("paths must share a grid")
    batch, mp1 = pa.shape[0], pa.shape[1]
    m = mp1 - 1
    q_ab = _q_pair(pa, pb, kernel_id, p0, p1)
    total = _term1(q_ab, dt, two_h)
    if skip_correction or kernel_id == _CONSTANT:
        return total
    _, _, _, s_tab, p2_tab = _power_tables(m, dt, two_h)
    half_h = 0.5 * two_h
    corr = np.zeros(batch)
    f_prev = np.zeros(batch)
    for k in range(1, m + 1):
        ak = pa[:, k : k + 1] if pa.ndim == 2 else pa[:, k : k + 1, :]
        bk = pb[:, k : k + 1] if pb.ndim == 2 else pb[:, k : k + 1, :]
        rev_b = pb[:, k::-1] if pb.ndim == 2 else pb[:, k::-1, :]
        rev_a = pa[:, k::-1] if pa.ndim == 2 else pa[:, k::-1, :]
        g1 = _q_pair(np.broadcast_to(ak, rev_b.shape), rev_b, kernel_id, p0, p1)
        g2 = _q_pair(np.broadcast_to(bk, rev_a.shape), rev_a, kernel_id, p0, p1)
        g = g1 + g2 - 2.0 * q_ab[:, k : k + 1]
        g[:, 0] = 0.0
        f_k = _inner_singular(g, s_tab, p2_tab, dt)
        corr += 0.5 * dt * (f_prev + f_k)
        f_prev = f_k
    return total + half_h * (two_h - 1.0) * corr


def line_integral_batch(field, idx0, m_eps, positions, dt, x0, dx, eps):
    """Trapezoid integral of the mollified rate along moving spatial points.

    ``field`` is the (n_times, n_sites) sample matrix on a uniform time grid
    of step ``dt``; row ``idx0`` is time 0.  ``positions[b, k]`` is the
    spatial evaluation point at time k*dt; time arguments k*dt +/- eps land
    exactly ``m_eps`` rows away.  Linear interpolation in space.
    """
    field = np.asarray(field, dtype=float)
    positions = np.asarray(positions, dtype=float)
    nt, nx = field.shape
    batch, n_steps_p1 = positions.shape
    n_steps = n_steps_p1 - 1
    if idx0 - m_eps < 0 or idx0 + n_steps + m_eps >= nt:
        raise ValueError("field time grid does not cover [-eps, t+eps]")
    u = (positions - x0) / dx
    if np.any(u < -1e-9) or np.any(u > nx - 1 + 1e-9):
        bad = positions.flat[int(np.argmax((u < -1e-9) | (u > nx - 1 + 1e-9)))]
        raise ValueError(f"path position {bad:g} outside the site range")
    j = np.clip(u.astype(np.int64), 0, nx - 2)
    frac = u - j
    w = np.full(n_steps + 1, dt)
    w[0] = w[-1] = 0.5 * dt
    rows = idx0 + np.arange(n_steps + 1)
    hi = field[rows + m_eps]
    lo = field[rows - m_eps]
    cols = j.T  # (n_steps+1, B)
    fr = frac.T
    w_hi = np.take_along_axis(hi, cols, axis=1) * (1.0 - fr) + np.take_along_axis(
        hi, cols + 1, axis=1
    ) * fr
    w_lo = np.take_along_axis(lo, cols, axis=1) * (1.0 - fr) + np.take_along_axis(
        lo, cols + 1, axis=1
    ) * fr
    wdot = (w_hi - w_lo) / (2.0 * eps)
    return w @ wdot


def prefix_integrals_batch(field, idx0, m_eps, positions, dt, x0, dx, eps, s_indices):
    """Reversed-time mollified line integrals for several horizons at once.

    For each horizon index K in ``s_indices`` computes, per path b,
    ``int_0^{K dt} wdot(K dt - v, positions[b, v/dt]) dv`` by the trapezoid
    rule on the shared grid.  Returns an array of shape (len(s_indices), B).
    """
    field = np.asarray(field, dtype=float)
    positions = np.asarray(positions, dtype=float)
    nt, nx = field.shape
    batch = positions.shape[0]
    s_indices = np.asarray(s_indices, dtype=np.int64)
    out = np.empty((len(s_indices), batch))
    u = (positions - x0) / dx
    if np.any(u < -1e-9) or np.any(u > nx - 1 + 1e-9):
        bad = positions.flat[int(np.argmax((u < -1e-9) | (u > nx - 1 + 1e-9)))]
        raise ValueError(f"path position {bad:g} outside the site range")
    j = np.clip(u.astype(np.int64), 0, nx - 2)
    frac = u - j
    for i, kk in enumerate(s_indices):
        k = int(kk)
        if idx0 - m_eps < 0 or idx0 + k + m_eps >= nt:
            raise ValueError("field time grid does not cover [-eps, t+eps]")
        if k == 0:
            out[i] = 0.0
            continue
        w = np.full(k + 1, dt)
        w[0] = w[-1] = 0.5 * dt
        # integrand time (k - v) dt at path position index v
        rows = idx0 + (k - np.arange(k + 1))
        hi = field[rows + m_eps]
        lo = field[rows - m_eps]
        cols = j[:, : k + 1].T
        fr = frac[:, : k + 1].T
        w_hi = np.take_along_axis(hi, cols, axis=1) * (1.0 - fr) + np.take_along_axis(
            hi, cols + 1, axis=1
        ) * fr
        w_lo = np.take_along_axis(lo, cols, axis=1) * (1.0 - fr) + np.take_along_axis(
            lo, cols + 1, axis=1
        ) * fr
        out[i] = w @ ((w_hi - w_lo) / (2.0 * eps))
    return out
