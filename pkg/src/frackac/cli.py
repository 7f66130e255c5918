"""Command-line interface: one executable, one subcommand per experiment.

Outputs are machine-readable: a CSV of long-format data plus a JSON summary
(validated against the shipped schema, stable key order).  Exit codes:
0 success, 1 numerical failure, 2 config/usage error, 3 verification
failure.  ``--workers`` never changes numbers, only wall time.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from importlib import resources

import numpy as np

from . import __version__
from ._backend import BACKEND_NAME
from .config import Config, ConfigError, load_config
from .kernels import AdmissibilityError
from .quadrature import QuadratureError, QuadratureSpec
from .gaussian_field import GridSpec, RngSeed, simulate_field

SUBCOMMANDS = (
    "simulate-field", "kernel-table", "fracderiv", "integral-variance",
    "fk-mean", "fk-second-moment", "wick-moments", "chaos-coeff",
    "holder", "rate", "weak-residual", "verify",
)


def _schema():
    with resources.files("frackac").joinpath("schemas/report.schema.json").open() as fh:
        return json.load(fh)


def write_outputs(cfg: Config, command: str, results: dict, rows, header):
    """Validate and write <out>/<command>.json and .csv; returns paths."""
    import jsonschema

    summary = {
        "command": command,
        "seed": int(cfg.seed),
        "versions": {"frackac": __version__, "backend": BACKEND_NAME},
        "config": cfg.as_dict(),
        "results": results,
    }
    jsonschema.validate(summary, _schema())
    os.makedirs(cfg.output_dir, exist_ok=True)
    json_path = os.path.join(cfg.output_dir, f"{command}.json")
    csv_path = os.path.join(cfg.output_dir, f"{command}.csv")
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(summary, fh, sort_keys=True, indent=2)
        fh.write("\n")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(c) if isinstance(c, float) else c for c in row])
    return json_path, csv_path


def _estimate_dict(est):
    return {
        "estimate": est.mean,
        "stderr": est.std_error,
        "n": est.n,
        "rejected": est.rejected,
    }


def _phi_from_config(cfg: Config, horizon: float):
    from .stoch_integral import constant_path, linear_path

    kind = cfg.extra.get("phi", "linear")
    if kind == "linear":
        slope = float(cfg.extra.get("phi.slope", 1.0))
        return linear_path(horizon, 513, slope)
    if kind == "constant":
        return constant_path(float(cfg.extra.get("phi.x0", 0.0)), horizon)
    raise ConfigError(f"unknown phi kind {kind!r}")


def _u0_from_config(cfg: Config):
    from .fk_solver import IC_FACTORIES

    kind = cfg.extra.get("u0", "one")
    if kind not in IC_FACTORIES:
        raise ConfigError(f"unknown u0 kind {kind!r}")
    if kind == "gaussian" and "u0.scale" in cfg.extra:
        return IC_FACTORIES[kind](float(cfg.extra["u0.scale"]))
    return IC_FACTORIES[kind]()


def cmd_simulate_field(cfg: Config) -> tuple[dict, list, list]:
    eps_max = max(cfg.eps_ladder)
    n_t = min(int(round(cfg.t_max / cfg.dt)), 2048)
    times = np.arange(-2, n_t + 3) * cfg.dt
    times = np.concatenate(([-eps_max - cfg.dt], times, [cfg.t_max + eps_max + cfg.dt]))
    times = np.unique(times)
    sites = np.linspace(
        float(cfg.extra.get("x_min", -2.0)), float(cfg.extra.get("x_max", 2.0)),
        int(cfg.extra.get("n_x", 65)),
    )
    spec = GridSpec(times=times, sites=sites, h=cfg.h, kernel=cfg.kernel())
    field = simulate_field(spec, RngSeed(cfg.seed))
    rows = [
        (float(t), float(x), float(field.values[i, j]))
        for i, t in enumerate(times)
        for j, x in enumerate(sites)
    ]
    results = {
        "n_times": len(times),
        "n_sites": len(sites),
        "value_at_origin": float(field.values[np.argmin(np.abs(times)), 0]),
    }
    return results, rows, ["t", "x", "value"]


def cmd_kernel_table(cfg: Config) -> tuple[dict, list, list]:
    from .kernels import mollified_cov_kernel

    r_min = float(cfg.extra.get("r_min", 0.01))
    r_max = float(cfg.extra.get("r_max", 2.0))
    n_r = int(cfg.extra.get("n_r", 64))
    rs = np.geomspace(r_min, r_max, n_r)
    rows = []
    for eps in cfg.eps_ladder:
        delta = float(cfg.extra.get("delta", eps))
        vals = mollified_cov_kernel(rs, eps, delta, cfg.h)
        rows.extend(
            (float(r), float(eps), float(delta), float(v))
            for r, v in zip(rs, vals)
        )
    return {"n_rows": len(rows)}, rows, ["r", "eps", "delta", "value"]


def cmd_fracderiv(cfg: Config) -> tuple[dict, list, list]:
    from .frac_calc import SampledFunction, frac_deriv

    alpha = float(cfg.extra.get("alpha", 0.4))
    side = str(cfg.extra.get("side", "left"))
    f = SampledFunction.from_function(
        lambda y: np.sin(2.0 * y) + 1.5, 0.0, cfg.t_max, 2049, exponent=1.0
    )
    xs = np.linspace(cfg.t_max / 64.0, cfg.t_max * (1 - 1.0 / 64.0), 63)
    rows = []
    for x in xs:
        rows.append((float(x), float(frac_deriv(f, alpha, side, float(x)))))
    return {"alpha": alpha, "side": side, "n_rows": len(rows)}, rows, ["x", "value"]


def cmd_integral_variance(cfg: Config) -> tuple[dict, list, list]:
    from .analysis import integral_variance_mc, rate_fit
    from .stoch_integral import mollified_moment, variance_closed

    kernel = cfg.kernel()
    phi = _phi_from_config(cfg, cfg.t_max)
    t = float(cfg.extra.get("t", cfg.t_max))
    closed = variance_closed(phi, t, cfg.h, kernel, force=cfg.force)
    ladder = sorted(cfg.eps_ladder, reverse=True)
    moments = [mollified_moment(phi, t, e, e, cfg.h, kernel) for e in ladder]
    errors = [abs(m - closed) for m in moments]
    eps_mc = min(ladder)
    n_steps = int(round(t / eps_mc))
    times = np.arange(-2, n_steps + 3) * eps_mc
    lo = float(np.min(phi(np.linspace(0, t, 257))))
    hi = float(np.max(phi(np.linspace(0, t, 257))))
    pad = 0.05 * max(hi - lo, 1.0)
    sites = np.linspace(lo - pad, hi + pad, 65)
    gspec = GridSpec(times=times, sites=sites, h=cfg.h, kernel=kernel)
    mc = integral_variance_mc(gspec, phi, t, eps_mc, cfg.n_fields, RngSeed(cfg.seed))
    fit = None
    if max(errors) > 1e-10:
        fit = rate_fit(list(zip(ladder, errors))).as_dict()
    results = {
        "closed_form": closed,
        "mc_estimate": mc["variance"],
        "mc_stderr": mc["variance_stderr"],
        "eps_ladder": list(ladder),
        "rate_fit": fit,
    }
    rows = [(float(e), float(m), float(err)) for e, m, err in
            zip(ladder, moments, errors)]
    return results, rows, ["eps", "moment", "abs_error"]


def cmd_fk_mean(cfg: Config) -> tuple[dict, list, list]:
    from .fk_solver import solution_mean

    t = float(cfg.extra.get("t", cfg.t_max))
    x = float(cfg.extra.get("x", 0.0))
    est = solution_mean(
        t, x, _u0_from_config(cfg), cfg.n_paths, cfg.h, cfg.kernel(),
        RngSeed(cfg.seed), dt=cfg.dt if t / cfg.dt == round(t / cfg.dt) else None,
        workers=cfg.workers,
    )
    return _estimate_dict(est), [(t, x, est.mean, est.std_error)], [
        "t", "x", "estimate", "stderr"]


def cmd_fk_second_moment(cfg: Config) -> tuple[dict, list, list]:
    from .fk_solver import solution_second_moment

    t = float(cfg.extra.get("t", cfg.t_max))
    x = float(cfg.extra.get("x", 0.0))
    y = float(cfg.extra.get("y", x))
    est = solution_second_moment(
        t, x, y, _u0_from_config(cfg), cfg.n_paths, cfg.h, cfg.kernel(),
        RngSeed(cfg.seed), dt=cfg.dt if t / cfg.dt == round(t / cfg.dt) else None,
        workers=cfg.workers,
    )
    return _estimate_dict(est), [(t, x, y, est.mean, est.std_error)], [
        "t", "x", "y", "estimate", "stderr"]


def cmd_wick_moments(cfg: Config) -> tuple[dict, list, list]:
    from .fk_solver import heat_semigroup, wick_moments

    t = float(cfg.extra.get("t", cfg.t_max))
    x = float(cfg.extra.get("x", 0.0))
    y = float(cfg.extra.get("y", x))
    u0 = _u0_from_config(cfg)
    out = wick_moments(
        t, x, y, u0, cfg.n_paths, cfg.h, cfg.kernel(), RngSeed(cfg.seed),
        dt=cfg.dt if t / cfg.dt == round(t / cfg.dt) else None,
        workers=cfg.workers,
    )
    results = {
        "mean_x": _estimate_dict(out["mean_x"]),
        "second_moment_xy": _estimate_dict(out["second_moment_xy"]),
        "heat_semigroup": heat_semigroup(u0, t, x),
    }
    rows = [(t, x, y, out["mean_x"].mean, out["second_moment_xy"].mean)]
    return results, rows, ["t", "x", "y", "mean", "second_moment"]


def cmd_chaos_coeff(cfg: Config) -> tuple[dict, list, list]:
    from .fk_solver import chaos_coefficient

    t = float(cfg.extra.get("t", cfg.t_max))
    x = float(cfg.extra.get("x", 0.0))
    n = int(cfg.extra.get("chaos_n", 1))
    raw_pts = cfg.extra.get("chaos_points", [t / 2.0, 0.0][: 2 * n])
    if not isinstance(raw_pts, list):
        raw_pts = [raw_pts]
    if len(raw_pts) != 2 * n:
        raise ConfigError("chaos_points must list n (r, z) pairs flat")
    points = [(float(raw_pts[2 * i]), float(raw_pts[2 * i + 1])) for i in range(n)]
    est = chaos_coefficient(
        n, t, x, points, _u0_from_config(cfg), cfg.n_paths, cfg.h,
        cfg.kernel(), RngSeed(cfg.seed),
        dt=cfg.dt if t / cfg.dt == round(t / cfg.dt) else None,
    )
    rows = [(n, t, x, est.mean, est.std_error)]
    return _estimate_dict(est), rows, ["n", "t", "x", "estimate", "stderr"]


def cmd_holder(cfg: Config) -> tuple[dict, list, list]:
    from .analysis import holder_experiment_integral, holder_experiment_solution

    target = str(cfg.extra.get("target", "integral"))
    if target == "integral":
        gaps = cfg.extra.get("gaps", [2.0**-k for k in range(2, 7)])
        rep = holder_experiment_integral(
            _phi_from_config(cfg, 2.0), cfg.h, cfg.kernel(),
            [float(g) for g in gaps],
        )
        rows = list(zip(rep["gaps"], rep["moments"]))
        header = ["gap", "moment"]
    elif target == "solution":
        gaps = cfg.extra.get("gaps", [2.0**-k for k in range(2, 6)])
        rep = holder_experiment_solution(
            cfg.h, cfg.kernel(), _u0_from_config(cfg),
            float(cfg.extra.get("x", 0.0)), float(cfg.extra.get("t0", 0.25)),
            [float(g) for g in gaps], float(cfg.extra.get("eps", 2.0**-9)),
            cfg.dt, cfg.n_fields, cfg.n_paths, RngSeed(cfg.seed),
        )
        rows = list(zip(rep["gaps"], rep["moments"], rep["stderrs"]))
        header = ["gap", "moment", "stderr"]
    else:
        raise ConfigError("target must be integral or solution")
    results = {k: v for k, v in rep.items()
               if k in ("fit", "target_slope", "passed", "eps", "slack", "tol")}
    return results, rows, header


def cmd_rate(cfg: Config) -> tuple[dict, list, list]:
    from .analysis import convergence_experiment

    rep = convergence_experiment(
        _phi_from_config(cfg, cfg.t_max), float(cfg.extra.get("t", cfg.t_max)),
        cfg.h, cfg.kernel(), cfg.eps_ladder,
        slack=float(cfg.tolerances.get("rate_slack", 0.15)),
    )
    rows = list(zip(rep["eps_ladder"], rep["errors"]))
    results = {k: v for k, v in rep.items()
               if k in ("fit", "target_slope", "passed", "degenerate",
                        "limit_variance", "slack")}
    return results, rows, ["eps", "abs_error"]


def cmd_weak_residual(cfg: Config) -> tuple[dict, list, list]:
    from .analysis import bump_test_function, weak_residual

    kernel = cfg.kernel()
    t = float(cfg.extra.get("t", 0.25))
    phi_fn, lap_fn, halfw = bump_test_function(1.0)
    ladder = sorted(cfg.eps_ladder, reverse=True)
    dtf = cfg.dt
    m_eps_max = int(round(max(ladder) / dtf))
    n_t = int(round(t / dtf))
    times = np.arange(-(m_eps_max + 1), n_t + m_eps_max + 2) * dtf
    sites = np.linspace(-4.0, 4.0, 257)
    gspec = GridSpec(times=times, sites=sites, h=cfg.h, kernel=kernel)
    xg = sites[np.abs(sites) <= halfw + 1e-12]
    if (len(xg) - 1) % 2 == 1:
        xg = xg[:-1]
    rows = []
    per_eps = []
    for f_idx in range(cfg.n_fields):
        field = simulate_field(gspec, RngSeed(cfg.seed, f_idx))
        for eps in ladder:
            rep = weak_residual(
                field, _u0_from_config(cfg), (phi_fn, lap_fn), t, eps,
                cfg.n_paths, xg, RngSeed(cfg.seed, 2**21 + f_idx),
                n_groups=int(cfg.extra.get("n_groups", 8)),
            )
            rows.append((f_idx, float(eps), rep["signed_residual"],
                         rep["error_bar"]))
            per_eps.append((eps, rep["signed_residual"], rep["error_bar"]))
    results = {"eps_ladder": list(ladder), "summary": {}}
    for eps in ladder:
        ds = [d for e, d, _ in per_eps if e == eps]
        bars = [b for e, _, b in per_eps if e == eps]
        results["summary"][repr(float(eps))] = {
            "rms_residual": float(np.sqrt(np.mean(np.square(ds)))),
            "rms_bar": float(np.sqrt(np.mean(np.square(bars)))),
        }
    return results, rows, ["field", "eps", "signed_residual", "error_bar"]


def cmd_verify(cfg: Config) -> tuple[dict, list, list]:
    from .verify import run_verification

    rep = run_verification(cfg)
    rows = [(str(cid), float(s), float(v)) for cid, s, v in rep["points"]]
    return (
        {"checks": rep["checks"], "all_pass": rep["all_pass"]},
        rows,
        ["check_id", "scale", "value"],
    )


HANDLERS = {
    "simulate-field": cmd_simulate_field,
    "kernel-table": cmd_kernel_table,
    "fracderiv": cmd_fracderiv,
    "integral-variance": cmd_integral_variance,
    "fk-mean": cmd_fk_mean,
    "fk-second-moment": cmd_fk_second_moment,
    "wick-moments": cmd_wick_moments,
    "chaos-coeff": cmd_chaos_coeff,
    "holder": cmd_holder,
    "rate": cmd_rate,
    "weak-residual": cmd_weak_residual,
    "verify": cmd_verify,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="frackac",
        description="Rough-noise heat equation toolbox: field simulation, "
        "moment identities and Feynman-Kac Monte Carlo.",
    )
    parser.add_argument("command", choices=SUBCOMMANDS)
    parser.add_argument("--config", default=None, help="path to a key=value file")
    parser.add_argument("--seed", type=int, default=None, help="override seed")
    parser.add_argument("--workers", type=int, default=None,
                        help="thread budget (never changes results)")
    parser.add_argument("--out", default=None, help="override output directory")
    parser.add_argument("--force", action="store_true",
                        help="downgrade admissibility gates to warnings")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.command)
        if args.seed is not None:
            cfg.seed = int(args.seed)
        if args.out is not None:
            cfg.output_dir = args.out
        if args.workers is not None:
            cfg.workers = int(args.workers)
        elif "FRACKAC_WORKERS" in os.environ:
            cfg.workers = int(os.environ["FRACKAC_WORKERS"])
        if args.force:
            cfg.force = True
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        results, rows, header = HANDLERS[args.command](cfg)
        json_path, csv_path = write_outputs(cfg, args.command, results, rows, header)
    except (ConfigError, AdmissibilityError) as exc:
        print(f"gate error: {exc}", file=sys.stderr)
        return 2
    except (QuadratureError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    print(json_path)
    print(csv_path)
    if args.command == "verify" and not results["all_pass"]:
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
