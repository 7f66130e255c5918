"""Line-oriented configuration: ``key = value``, ``#`` comments, dotted keys.

Kept deliberately free of markup dependencies.  Values parse as int, float,
bool, comma-separated lists of numbers, or bare strings; dotted keys nest
(``kernel.ell = 1.0``).  Validation re-checks every admissibility gate so a
bad file fails before any computation starts (exit code 2 in the CLI).
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .kernels import AdmissibilityError
from .spatial_kernels import SpatialKernel, kernel_from_config


class ConfigError(ValueError):
    pass


def _parse_scalar(text: str):
    text = text.strip()
    low = text.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_lines(lines) -> dict:
    """Raw key -> value mapping with dotted keys flattened as given."""
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        value = value.strip()
        if "," in value:
            out[key] = [_parse_scalar(v) for v in value.split(",") if v.strip()]
        else:
            out[key] = _parse_scalar(value)
    return out


DEFAULT_EPS_LADDER = [2.0**-k for k in range(4, 11)]

# keys the CLI understands; anything else in a file is a spelling mistake
KNOWN_KEYS = {
    "h", "t", "t_max", "dt", "x", "y", "seed", "n_paths", "n_fields",
    "eps", "eps_ladder", "output_dir", "workers", "force", "alpha", "side",
    "kernel", "kernel.c", "kernel.k", "kernel.ell", "u0", "u0.scale",
    "phi", "phi.x0", "phi.slope", "n", "order", "t0", "gaps", "target",
    "tolerances.rate_slack", "tolerances.stderr_factor", "points",
    "r_min", "r_max", "n_r", "delta", "x_min", "x_max", "n_x", "chaos_n",
    "chaos_points", "n_groups",
}


@dataclass
class Config:
    """Validated run configuration with defaults filled in."""

    h: float = 0.4
    kernel_kind: str = "smooth"
    kernel_params: dict = field(default_factory=dict)
    t_max: float = 1.0
    dt: float = 2.0**-10
    eps_ladder: list = field(default_factory=lambda: list(DEFAULT_EPS_LADDER))
    n_paths: int = 10000
    n_fields: int = 256
    seed: int = 12345
    output_dir: str = "out"
    workers: int = 1
    force: bool = False
    tolerances: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def kernel(self) -> SpatialKernel:
        return kernel_from_config(self.kernel_kind, self.kernel_params)

    def as_dict(self) -> dict:
        return {
            "h": self.h,
            "kernel": {"kind": self.kernel_kind, **self.kernel_params},
            "t_max": self.t_max,
            "dt": self.dt,
            "eps_ladder": list(self.eps_ladder),
            "n_paths": self.n_paths,
            "n_fields": self.n_fields,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "workers": self.workers,
            "force": self.force,
            "tolerances": dict(self.tolerances),
            "extra": {k: v for k, v in sorted(self.extra.items())},
        }


def _validate(raw: dict, solver_command: bool) -> Config:
    unknown = sorted(k for k in raw if k not in KNOWN_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")

    cfg = Config()
    if "h" in raw:
        cfg.h = float(raw["h"])
    if not 0.0 < cfg.h < 0.5:
        raise ConfigError(f"h must lie in (0, 1/2), got {cfg.h}")

    cfg.kernel_kind = str(raw.get("kernel", cfg.kernel_kind))
    for pkey in ("c", "k", "ell"):
        if f"kernel.{pkey}" in raw:
            cfg.kernel_params[pkey] = float(raw[f"kernel.{pkey}"])
    try:
        kernel = cfg.kernel()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if solver_command:
        bound = 0.5 - kernel.gamma / 4.0
        if cfg.h <= bound:
            raise ConfigError(
                f"solver commands require H > 1/2 - gamma/4: "
                f"h = {cfg.h} <= {bound} for kernel {cfg.kernel_kind!r} "
                f"(gamma = {kernel.gamma})"
            )

    if "t_max" in raw:
        cfg.t_max = float(raw["t_max"])
    if cfg.t_max <= 0:
        raise ConfigError("t_max must be positive")
    if "dt" in raw:
        cfg.dt = float(raw["dt"])
    if cfg.dt <= 0 or cfg.t_max / cfg.dt > 2**20:
        raise ConfigError("dt must be positive with t_max/dt <= 2^20")
    if "eps_ladder" in raw:
        ladder = raw["eps_ladder"]
        if not isinstance(ladder, list):
            ladder = [ladder]
        cfg.eps_ladder = [float(e) for e in ladder]
        if any(e <= 0 for e in cfg.eps_ladder):
            raise ConfigError("eps_ladder entries must be positive")
    for key, attr in (("n_paths", "n_paths"), ("n_fields", "n_fields"),
                      ("workers", "workers")):
        if key in raw:
            setattr(cfg, attr, int(raw[key]))
            if getattr(cfg, attr) < 1:
                raise ConfigError(f"{key} must be >= 1")
    if "seed" in raw:
        cfg.seed = int(raw["seed"])
    if "output_dir" in raw:
        cfg.output_dir = str(raw["output_dir"])
    if "force" in raw:
        cfg.force = bool(raw["force"])
    for key in list(raw):
        if key.startswith("tolerances."):
            cfg.tolerances[key.split(".", 1)[1]] = float(raw[key])
    for key in ("t", "x", "y", "eps", "alpha", "side", "u0", "u0.scale",
                "phi", "phi.x0", "phi.slope", "n", "order", "t0", "gaps",
                "target", "points", "r_min", "r_max", "n_r", "delta",
                "x_min", "x_max", "n_x", "chaos_n", "chaos_points",
                "n_groups"):
        if key in raw:
            cfg.extra[key] = raw[key]
    return cfg


SOLVER_COMMANDS = {
    "fk-mean", "fk-second-moment", "wick-moments", "chaos-coeff",
    "holder", "weak-residual",
}


def load_config(path: str | None, command: str = "") -> Config:
    """Parse and validate a config file; ``None`` gives pure defaults."""
    if path is None:
        raw = {}
    else:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = parse_lines(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
    try:
        return _validate(raw, solver_command=command in SOLVER_COMMANDS)
    except AdmissibilityError as exc:
        raise ConfigError(str(exc)) from exc
