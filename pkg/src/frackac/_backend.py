"""Selects the compiled extension core or the pure-NumPy fallback.

The compiled module ``frackac._core`` is built from ``_core.pyx`` at install
time; when it is missing (no compiler, source checkout without build) the
NumPy twin ``frackac._corepy`` is used.  Set ``FRACKAC_BACKEND=python`` or
``=compiled`` to force a choice (the benchmark does this).
"""

from __future__ import annotations

import os

import numpy as np

from . import _corepy

_forced = os.environ.get("FRACKAC_BACKEND", "").strip().lower()

_core = None
if _forced != "python":
    try:
        from . import _core  # type: ignore[no-redef]
    except ImportError:
        _core = None
        if _forced == "compiled":
            raise ImportError(
                "FRACKAC_BACKEND=compiled but frackac._core is not built; "
                "reinstall with a C compiler available"
            )

HAVE_COMPILED = _core is not None
BACKEND_NAME = "compiled" if HAVE_COMPILED else "python"


def _as_c2(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def sigma2_batch(paths, dt, two_h, kernel_id, p0, p1, skip_correction=False):
    paths = np.asarray(paths, dtype=float)
    if HAVE_COMPILED and paths.ndim == 2 and kernel_id >= 0:
        out = np.empty(paths.shape[0])
        _core.sigma2_batch(
            _as_c2(paths), float(dt), float(two_h), int(kernel_id),
            float(p0), float(p1), bool(skip_correction), out,
        )
        return out
    return _corepy.sigma2_batch(paths, dt, two_h, kernel_id, p0, p1, skip_correction)


def covariance_batch(paths_a, paths_b, dt, two_h, kernel_id, p0, p1,
                     skip_correction=False):
    pa = np.asarray(paths_a, dtype=float)
    pb = np.asarray(paths_b, dtype=float)
    if HAVE_COMPILED and pa.ndim == 2 and kernel_id >= 0:
        out = np.empty(pa.shape[0])
        _core.covariance_batch(
            _as_c2(pa), _as_c2(pb), float(dt), float(two_h), int(kernel_id),
            float(p0), float(p1), bool(skip_correction), out,
        )
        return out
    return _corepy.covariance_batch(
        pa, pb, dt, two_h, kernel_id, p0, p1, skip_correction
    )


def line_integral_batch(field, idx0, m_eps, positions, dt, x0, dx, eps):
    if HAVE_COMPILED:
        field = _as_c2(field)
        positions = _as_c2(positions)
        out = np.empty(positions.shape[0])
        rc = _core.line_integral_batch(
            field, int(idx0), int(m_eps), positions, float(dt),
            float(x0), float(dx), float(eps), out,
        )
        if rc != 0:
            raise ValueError("path position outside the site range")
        return out
    return _corepy.line_integral_batch(
        field, idx0, m_eps, positions, dt, x0, dx, eps
    )


def prefix_integrals_batch(field, idx0, m_eps, positions, dt, x0, dx, eps,
                           s_indices):
    if HAVE_COMPILED:
        field = _as_c2(field)
        positions = _as_c2(positions)
        s_idx = np.ascontiguousarray(s_indices, dtype=np.int64)
        out = np.empty((len(s_idx), positions.shape[0]))
        rc = _core.prefix_integrals_batch(
            field, int(idx0), int(m_eps), positions, float(dt),
            float(x0), float(dx), float(eps), s_idx, out,
        )
        if rc == 1:
            raise ValueError("path position outside the site range")
        if rc == 2:
            raise ValueError("field time grid does not cover [-eps, t+eps]")
        return out
    return _corepy.prefix_integrals_batch(
        field, idx0, m_eps, positions, dt, x0, dx, eps, s_indices
    )
