"""Config-driven verification suite behind the ``verify`` CLI subcommand.

Runs a reduced-scale edition of the acceptance checks (the full-scale
versions live in the test suite) and emits one record per check:
``{check_id, target, observed, tolerance, pass}``.  Every number is a
deterministic function of (config, seed); nothing time- or
machine-dependent enters the report, so byte-identical reruns are the
reproducibility contract.
"""

from __future__ import annotations

import math

import numpy as np

from .analysis import (
    averaging_bound_check,
    bound_suite,
    convergence_experiment,
    holder_experiment_integral,
    integral_variance_mc,
    power_law_extrapolate,
    rate_fit,
)
from .config import Config
from .fk_solver import (
    heat_semigroup,
    ic_gaussian,
    ic_one,
    solution_mean,
    wick_moments,
)
from .gaussian_field import GridSpec, RngSeed
from .kernels import (
    first_diff_kernel,
    indicator_inner,
    fbm_cov,
    second_diff_kernel,
)
from .spatial_kernels import make_constant, make_fbm_space, make_smooth
from .stoch_integral import constant_path, linear_path, mollified_moment, variance_closed


def _check(check_id, target, observed, tolerance, passed):
    return {
        "check_id": check_id,
        "target": float(target),
        "observed": float(observed),
        "tolerance": float(tolerance),
        "pass": bool(passed),
    }


def run_verification(cfg: Config) -> dict:
    """Run the suite; returns {checks: [...], all_pass: bool, points: [...]}."""
    checks = []
    points = []  # (check_id, scale, value) rows for the CSV
    seed = RngSeed(cfg.seed)

    # constant-kernel closed form
    rng = np.random.default_rng(cfg.seed)
    worst = 0.0
    for _ in range(8):
        t = float(rng.uniform(0.2, 2.0))
        h = float(rng.uniform(0.26, 0.49))
        x0 = float(rng.uniform(-1.0, 1.0))
        v = variance_closed(constant_path(x0, t), t, h, make_constant(1.0))
        worst = max(worst, abs(v - t ** (2 * h)))
    checks.append(_check("constant-kernel-variance", 0.0, worst, 1e-8,
                         worst <= 1e-8))

    c = 1.5
    t = 0.5
    h = 0.4
    est = solution_mean(t, 0.3, ic_one(), max(cfg.n_paths, 2000), h,
                        make_constant(c), seed, dt=t / 256,
                        workers=cfg.workers)
    exact = math.exp(0.5 * c * t ** (2 * h))
    tol = 3.0 * est.std_error
    checks.append(_check("constant-kernel-mean", exact, est.mean, tol,
                         abs(est.mean - exact) <= tol))

    # moment triangle: closed form vs mollified extrapolation vs field MC
    kern = make_smooth(1.0)
    h = 0.35
    phi = linear_path(1.0, 513)
    limit = variance_closed(phi, 1.0, h, kern)
    ladder = sorted(cfg.eps_ladder)[:5]
    vals = [mollified_moment(phi, 1.0, e, e, h, kern) for e in sorted(ladder, reverse=True)]
    for e, v in zip(sorted(ladder, reverse=True), vals):
        points.append(("moment-ladder", e, v))
    extra, err = power_law_extrapolate(sorted(ladder, reverse=True), vals)
    tol = 3.0 * (err + 1e-6)
    checks.append(_check("moment-extrapolation", limit, extra, tol,
                         abs(extra - limit) <= tol))

    eps_mc = 2.0**-8
    n_t = int(round(1.0 / eps_mc))
    times = np.arange(-2, n_t + 3) * eps_mc
    sites = np.linspace(0.0, 1.0, 65)
    gspec = GridSpec(times=times, sites=sites, h=h, kernel=kern)
    mc = integral_variance_mc(gspec, phi, 1.0, eps_mc,
                              max(cfg.n_fields, 2000), seed)
    finite = mollified_moment(phi, 1.0, eps_mc, eps_mc, h, kern)
    tol = 3.0 * (mc["variance_stderr"] + 1e-6)
    checks.append(_check("moment-mc", finite, mc["variance"], tol,
                         abs(mc["variance"] - finite) <= tol))

    # convergence rate (one configuration at verify scale)
    conv = convergence_experiment(phi, 1.0, h, kern,
                                  [2.0**-k for k in range(4, 11)])
    for e, v in zip(conv["eps_ladder"], conv["errors"]):
        points.append(("rate-ladder", e, v))
    checks.append(_check(
        "moment-rate",
        conv["target_slope"] - conv["slack"],
        conv["fit"]["slope"] if conv["fit"] else 0.0,
        conv["slack"],
        conv["passed"],
    ))

    # averaging bound with explicit constant
    grid = np.geomspace(0.01, 0.2, 6)
    for kname, kern2 in (("constant", make_constant(1.0)),
                         ("fbm_space", make_fbm_space(0.35)),
                         ("smooth", make_smooth(1.0))):
        def psi(s, kern2=kern2):
            v = linear_path(1.0, 257)(np.asarray(s))
            return np.asarray(kern2.q(v, v), dtype=float)

        sup = float(np.max(np.abs(psi(np.linspace(0, 1, 257)))))
        if sup == 0.0:
            sup = 1.0
        rep = averaging_bound_check(psi, sup, 1.0, 0.3, grid, grid)
        checks.append(_check(f"averaging-bound-{kname}", 1.0,
                             rep["worst_ratio"], 1.0, rep["passed"]))

    # difference-kernel envelope and limit
    rng = np.random.default_rng(cfg.seed + 1)
    r = np.exp(rng.uniform(np.log(1e-3), np.log(10.0), 20000))
    e = np.exp(rng.uniform(np.log(1e-4), np.log(1.0), 20000))
    worst = 0.0
    for beta in (0.55, 0.8, 1.0, 1.5):
        ratio = np.abs(second_diff_kernel(r, e, beta)) / (64.0 * r ** (beta - 2.0))
        worst = max(worst, float(np.max(ratio)))
    checks.append(_check("difference-envelope", 1.0, worst, 1.0, worst <= 1.0))

    errs = []
    eps_l = [2.0**-k for k in range(3, 9)]
    lim = 0.8 * (0.8 - 1.0) * 1.0
    for ee in eps_l:
        err = abs(second_diff_kernel(1.0, ee, 0.8) - lim)
        errs.append(err)
        points.append(("difference-limit", ee, err))
    fit = rate_fit(list(zip(eps_l, errs)))
    checks.append(_check("difference-limit-order", 2.0, fit.slope, 0.2,
                         abs(fit.slope - 2.0) <= 0.2))

    # weighted-indicator inner product against the closed covariance
    worst = 0.0
    for (s, t2, hh) in ((0.5, 1.0, 0.3), (1.0, 0.5, 0.45), (0.8, 0.8, 0.35)):
        v = indicator_inner(lambda r_: np.ones_like(r_), s, t2, hh)
        worst = max(worst, abs(v - fbm_cov(s, t2, hh)))
    checks.append(_check("indicator-inner", 0.0, worst, 1e-7, worst <= 1e-7))

    # Wick-product mean identity
    u0 = ic_gaussian()
    wm = wick_moments(0.5, 0.3, 0.3, u0, max(cfg.n_paths, 4000), 0.45,
                      make_smooth(1.0), seed, dt=0.5 / 256,
                      workers=cfg.workers, second_moment=False)
    ps = heat_semigroup(u0, 0.5, 0.3)
    tol = 3.0 * wm["mean_x"].std_error
    checks.append(_check("wick-mean", ps, wm["mean_x"].mean, tol,
                         abs(wm["mean_x"].mean - ps) <= tol))

    # integral-regularity slope (degenerate spatial covariance)
    hi = holder_experiment_integral(
        constant_path(0.0, 1.0), 0.35, make_constant(1.0),
        [2.0**-k for k in range(2, 7)],
    )
    for g, v in zip(hi["gaps"], hi["moments"]):
        points.append(("increment-ladder", g, v))
    checks.append(_check("increment-scaling", hi["target_slope"],
                         hi["fit"]["slope"], hi["tol"], hi["passed"]))

    all_pass = all(c["pass"] for c in checks)
    return {"checks": checks, "all_pass": all_pass, "points": points}
