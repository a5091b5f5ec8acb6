"""Run configuration: flat key=value files and initial data presets.

The config format is deliberately minimal so files stay diff-friendly and
parseable without a dependency: one ``key = value`` pair per line, ``#``
comments, blank lines allowed.  Unknown keys are rejected with the offending
line number; missing keys take the documented defaults.

Keys
----
model               sqg | euler2d | clm1d            (default sqg)
n                   grid points per side, even >= 8  (default 256)
initial             cmt | cos_x2 | clm_cos | expr:<python expression>
                    (default cmt; expressions see x1, x2 in 2D or x in 1D
                    plus sin, cos, tanh, exp, pi)
t_end               final time > 0                   (default 6.0)
dt                  fixed step size; setting it selects fixed stepping
cfl                 CFL number in (0, 1], used when dt is unset (default 0.5)
dt_max              cap on adaptive steps            (default 0.01)
snapshot_interval   diagnostics cadence              (default 0.05)
filter              on | off  (default: on for the cmt preset, off otherwise)
filter_c, filter_p  exponential filter parameters    (default 36, 36)
saddle_region       x0,x1,y0,y1 rectangle to track a saddle in (optional;
                    may extend past box edges, interpreted periodically)
track_start         first snapshot time eligible for tracking (default 0.0)
checkpoint_interval write a checkpoint at snapshots spaced this far apart;
                    0 writes only the final state      (default 0.0)
output_dir          directory for CSV/checkpoints     (default .)
seed                recorded in outputs for provenance; the solver itself is
                    deterministic                      (default 0)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Field1D, Field2D, Grid2D
from .models import check_model

_2D_PRESETS = ("cmt", "cos_x2")
_1D_PRESETS = ("clm_cos",)


@dataclass
class SimConfig:
    model: str = "sqg"
    n: int = 256
    initial: str = "cmt"
    t_end: float = 6.0
    dt: float | None = None
    cfl: float = 0.5
    dt_max: float = 0.01
    snapshot_interval: float = 0.05
    filter_enabled: bool | None = None
    filter_c: float = 36.0
    filter_p: float = 36.0
    saddle_region: tuple[float, float, float, float] | None = None
    track_start: float = 0.0
    checkpoint_interval: float = 0.0
    output_dir: str = "."
    seed: int = 0

    def validate(self) -> "SimConfig":
        check_model(self.model)
        if self.n < 8 or self.n % 2 != 0:
            raise ValueError(f"n must be even and >= 8, got {self.n}")
        if not (self.t_end > 0):
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if self.dt is not None and not (self.dt > 0):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (0 < self.cfl <= 1):
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not (self.dt_max > 0):
            raise ValueError(f"dt_max must be positive, got {self.dt_max}")
        if not (0 < self.snapshot_interval):
            raise ValueError(
                f"snapshot_interval must be positive, got {self.snapshot_interval}")
        if self.checkpoint_interval < 0:
            raise ValueError("checkpoint_interval must be >= 0")
        is_1d = self.model == "clm1d"
        if self.initial.startswith("expr:"):
            pass  # dimensionality checked at evaluation
        elif is_1d and self.initial not in _1D_PRESETS:
            raise ValueError(
                f"initial {self.initial!r} is not a 1D preset; clm1d needs one of "
                f"{_1D_PRESETS} or expr:")
        elif not is_1d and self.initial not in _2D_PRESETS:
            raise ValueError(
                f"initial {self.initial!r} is not a 2D preset; expected one of "
                f"{_2D_PRESETS} or expr:")
        if self.model == "clm1d" and self.dt is None:
            raise ValueError("clm1d runs use fixed stepping; set dt")
        if self.saddle_region is not None:
            x0, x1, y0, y1 = self.saddle_region
            if not (x1 > x0 and y1 > y0):
                raise ValueError(f"empty saddle_region {self.saddle_region}")
        return self

    @property
    def filter_on(self) -> bool:
        if self.filter_enabled is None:
            return self.initial == "cmt"
        return self.filter_enabled

    @property
    def step_mode(self) -> str:
        return "fixed" if self.dt is not None else "cfl"


_BOOL = {"on": True, "true": True, "1": True, "yes": True,
         "off": False, "false": False, "0": False, "no": False}

_KEYS = {
    "model": str,
    "n": int,
    "initial": str,
    "t_end": float,
    "dt": float,
    "cfl": float,
    "dt_max": float,
    "snapshot_interval": float,
    "filter": "bool",
    "filter_c": float,
    "filter_p": float,
    "saddle_region": "rect",
    "track_start": float,
    "checkpoint_interval": float,
    "output_dir": str,
    "seed": int,
}

_FIELD_FOR_KEY = {"filter": "filter_enabled"}


def parse_config(text: str) -> SimConfig:
    """Parse a flat key=value config; raises ValueError naming bad lines."""
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key not in _KEYS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        kind = _KEYS[key]
        try:
            if kind == "bool":
                parsed = _BOOL[val.lower()]
            elif kind == "rect":
                parts = [float(p) for p in val.split(",")]
                if len(parts) != 4:
                    raise ValueError("need 4 comma-separated numbers")
                parsed = tuple(parts)
            else:
                parsed = kind(val)
        except (KeyError, ValueError) as exc:
            raise ValueError(f"line {lineno}: bad value for {key}: {val!r} ({exc})")
        field_name = _FIELD_FOR_KEY.get(key, key)
        if field_name in values:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        values[field_name] = parsed
    try:
        return SimConfig(**values).validate()
    except ValueError as exc:
        raise ValueError(f"invalid config: {exc}") from exc


_EXPR_NAMES = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "tanh": np.tanh,
    "exp": np.exp, "sqrt": np.sqrt, "abs": np.abs, "pi": np.pi,
}


def initial_state(config: SimConfig):
    """Build the initial field for a validated config."""
    n = config.n
    if config.model == "clm1d":
        x = np.arange(n) * (2 * np.pi / n)
        if config.initial == "clm_cos":
            return Field1D(n, np.cos(x))
        if config.initial.startswith("expr:"):
            ns = dict(_EXPR_NAMES, x=x)
            vals = eval(config.initial[5:], {"__builtins__": {}}, ns)
            return Field1D(n, np.broadcast_to(vals, (n,)).astype(float))
        raise ValueError(f"initial {config.initial!r} is not defined for clm1d")

    grid = Grid2D(n)
    x1, x2 = grid.mesh()
    if config.initial == "cmt":
        return Field2D(grid, np.sin(x1) * np.sin(x2) + np.cos(x2))
    if config.initial == "cos_x2":
        return Field2D(grid, np.cos(x2))
    if config.initial.startswith("expr:"):
        ns = dict(_EXPR_NAMES, x1=x1, x2=x2)
        vals = eval(config.initial[5:], {"__builtins__": {}}, ns)
        return Field2D(grid, np.broadcast_to(vals, (n, n)).astype(float))
    raise ValueError(f"initial {config.initial!r} is not defined for {config.model}")
