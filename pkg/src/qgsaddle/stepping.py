"""Time integration: classical RK4 with fixed or CFL-limited steps.

Two stepping modes, selected by whether the config sets ``dt``:

* fixed: step boundaries sit exactly at integer multiples of dt, so two runs
  that share a config (or a run resumed from a checkpoint) land on bitwise
  identical times.
* cfl: dt = min(dt_max, cfl * dx / max(1e-12, max|u|)), recomputed every
  step from the current state, with the final step clipped to land on t_end.

Snapshots are taken at the first step boundary at or after each multiple of
``snapshot_interval`` (plus t=0 and the final state).  Each snapshot carries
a diagnostics row with the blow-up functional accumulated by the trapezoid
rule over the snapshots seen so far in this run; a resumed run restarts the
accumulator at zero because checkpoints store only the state.

The physical values array is authoritative between steps: every step does
its own forward/backward transforms, so resuming from a checkpoint (which
stores physical values) reproduces the uninterrupted run exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import SimConfig, initial_state
from .diagnostics import DiagRow, snapshot_diagnostics
from .grid import Field1D, Field2D
from .models import _tendency_values, check_model, filter_factors, max_speed

_TIME_TOL = 1e-12


class BlowupError(RuntimeError):
    """Raised when the state leaves the range of finite floats."""

    def __init__(self, t: float, message: str | None = None):
        self.t = t
        super().__init__(message or f"solution lost finiteness at t={t:.6g}")


@dataclass(frozen=True)
class StepPolicy:
    """Resolved stepping parameters; built from a config by ``run``."""
    mode: str                 # "fixed" or "cfl"
    dt: float | None
    cfl: float
    dt_max: float

    def __post_init__(self):
        if self.mode not in ("fixed", "cfl"):
            raise ValueError(f"unknown step mode {self.mode!r}")
        if self.mode == "fixed" and (self.dt is None or self.dt <= 0):
            raise ValueError("fixed mode needs a positive dt")


@dataclass
class Trajectory:
    """Snapshot record of one run: parallel times/states/rows lists."""
    model: str
    times: list[float] = field(default_factory=list)
    states: list = field(default_factory=list)
    rows: list[DiagRow] = field(default_factory=list)
    steps_taken: int = 0

    @property
    def final_t(self) -> float:
        return self.times[-1] if self.times else 0.0

    @property
    def final_state(self):
        return self.states[-1]


def _rk4_values(model: str, v: np.ndarray, dt: float,
                filt: np.ndarray | None) -> np.ndarray:
    k1 = _tendency_values(model, v)
    k2 = _tendency_values(model, v + (0.5 * dt) * k1)
    k3 = _tendency_values(model, v + (0.5 * dt) * k2)
    k4 = _tendency_values(model, v + dt * k3)
    out = v + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if filt is not None:
        if out.ndim == 1:
            out = np.fft.irfft(np.fft.rfft(out) * filt, n=out.shape[0])
        else:
            out = np.fft.irfft2(np.fft.rfft2(out) * filt, s=out.shape)
    return out


def rk4_step(model: str, state, dt: float, filt: np.ndarray | None = None):
    """One RK4 step; ``filt`` is an optional rfft-layout multiplier array
    (see ``models.filter_factors``) applied once after the update."""
    check_model(model)
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    out = _rk4_values(model, state.values, dt, filt)
    if isinstance(state, Field1D):
        return Field1D(state.n, out)
    return Field2D(state.grid, out)


def _snapshot_targets(t0: float, t_end: float, interval: float) -> list[float]:
    """Scheduled snapshot times in (t0, t_end]; t0 itself is always emitted."""
    out = []
    j = int(np.floor(t0 / interval + 1e-9)) + 1
    while True:
        target = j * interval
        if target > t_end + _TIME_TOL:
            break
        if target > t0 + _TIME_TOL:
            out.append(target)
        j += 1
    if not out or out[-1] < t_end - _TIME_TOL:
        out.append(t_end)
    return out


def run(config: SimConfig, state=None, t0: float = 0.0,
        saddle_disc=None) -> Trajectory:
    """Integrate from t0 to config.t_end, collecting snapshots.

    ``state`` defaults to the config's initial data; passing a state with a
    matching grid (e.g. one read from a checkpoint) together with its time
    resumes a run.  ``saddle_disc`` is forwarded to the diagnostics so the
    direction-field statistic can exclude a tracked saddle.
    """
    config.validate()
    model = config.model
    if state is None:
        state = initial_state(config)
        if t0 != 0.0:
            raise ValueError("t0 without a state makes no sense")
    policy = StepPolicy(config.step_mode, config.dt, config.cfl, config.dt_max)
    t_end = config.t_end
    if t0 >= t_end - _TIME_TOL:
        raise ValueError(f"resume time {t0} is not before t_end {t_end}")

    filt = None
    if config.filter_on:
        ndim = 1 if model == "clm1d" else 2
        filt = filter_factors(config.n, ndim, config.filter_c, config.filter_p)

    dx = 2 * np.pi / config.n
    traj = Trajectory(model=model)
    targets = _snapshot_targets(t0, t_end, config.snapshot_interval)
    next_idx = 0

    def emit(t: float, st) -> None:
        row = snapshot_diagnostics(model, st, saddle_disc=saddle_disc)
        row.t = t
        if traj.rows:
            prev = traj.rows[-1]
            row.bkm_accum = prev.bkm_accum + 0.5 * (
                prev.sup_grad + row.sup_grad) * (t - prev.t)
        traj.times.append(t)
        traj.states.append(st.copy())
        traj.rows.append(row)

    emit(t0, state)
    v = state.values

    # Overflow on the way to a detected blow-up is an expected terminal
    # event; the finiteness check below turns it into BlowupError.
    with np.errstate(over="ignore", invalid="ignore"):
        if policy.mode == "fixed":
            dt = policy.dt
            i0 = int(round(t0 / dt))
            if abs(i0 * dt - t0) > 1e-9 * max(1.0, abs(t0)):
                raise ValueError(
                    f"resume time {t0} is not on the fixed step ladder dt={dt}")
            nsteps = int(np.ceil(t_end / dt - 1e-9))
            for i in range(i0 + 1, nsteps + 1):
                v = _rk4_values(model, v, dt, filt)
                if not np.all(np.isfinite(v)):
                    raise BlowupError(i * dt)
                traj.steps_taken += 1
                t = i * dt
                if next_idx < len(targets) and t >= targets[next_idx] - _TIME_TOL:
                    while (next_idx < len(targets)
                           and t >= targets[next_idx] - _TIME_TOL):
                        next_idx += 1
                    emit(t, _wrap(state, v))
        else:
            t = t0
            while t < t_end - _TIME_TOL:
                st = _wrap(state, v)
                speed = max_speed(model, st)
                dt = min(policy.dt_max, policy.cfl * dx / max(1e-12, speed))
                clipped = t + dt >= t_end - _TIME_TOL
                if clipped:
                    dt = t_end - t
                if dt <= _TIME_TOL:
                    raise BlowupError(t, f"step size collapsed at t={t:.6g}")
                v = _rk4_values(model, v, dt, filt)
                t = t_end if clipped else t + dt
                if not np.all(np.isfinite(v)):
                    raise BlowupError(t)
                traj.steps_taken += 1
                if next_idx < len(targets) and t >= targets[next_idx] - _TIME_TOL:
                    while (next_idx < len(targets)
                           and t >= targets[next_idx] - _TIME_TOL):
                        next_idx += 1
                    emit(t, _wrap(state, v))

    return traj


def _wrap(proto, values: np.ndarray):
    if isinstance(proto, Field1D):
        return Field1D(proto.n, values)
    return Field2D(proto.grid, values)
