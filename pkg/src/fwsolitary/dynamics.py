"""
Method-of-lines time stepping for u_t + u u_y + L u_y = 0 on a periodic grid.

Spatial derivatives and L are Fourier multipliers; the quadratic term is
formed in physical space.  Time stepping is classical RK4.  L d/dy has symbol
i xi / (1 + xi^2), bounded by 1/2 in modulus, so the only stiffness comes
from advection and an explicit scheme with an advective CFL step suffices.

With dealiasing on, the inputs to the product and the product itself are
truncated to |k| < N/3.  The discrete nonlinear term then satisfies
<u, P(Pu (Pu)_y)> = <Pu, Pu (Pu)_y> = 0, so both int u and int u^2 are
conserved by the semi-discrete system, not only by the continuum equation.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .errors import BlowUpError, ConfigurationError
from .spectral_core import Field, PeriodicGrid, functional_Q, write_field_csv

BLOWUP_AMPLITUDE = 1e6
CFL_FACTOR = 0.4


@dataclass(frozen=True, eq=False)
class SimState:
    t: float
    field: Field

    def __post_init__(self):
        if not np.isfinite(self.t):
            raise ConfigurationError(f"state time must be finite, got {self.t}")


@dataclass(frozen=True)
class EvolveConfig:
    """Run parameters; ``dt="auto"`` picks 0.4 dy / max(1, max|u0|)."""

    t_end: float
    dt: float | str = "auto"
    dealias: bool = True
    record_every: int = 1

    def __post_init__(self):
        if not (np.isfinite(self.t_end) and self.t_end > 0):
            raise ConfigurationError(f"t_end must be positive, got {self.t_end}")
        if isinstance(self.dt, str):
            if self.dt != "auto":
                raise ConfigurationError(f"dt must be a positive number or 'auto', got {self.dt!r}")
        elif not (np.isfinite(self.dt) and self.dt > 0):
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if int(self.record_every) != self.record_every or self.record_every < 1:
            raise ConfigurationError(f"record_every must be a positive integer, got {self.record_every}")


@dataclass
class ConservationTrace:
    times: list = dc_field(default_factory=list)
    mass_trace: list = dc_field(default_factory=list)
    q_trace: list = dc_field(default_factory=list)

    def record(self, state: SimState):
        self.times.append(float(state.t))
        self.mass_trace.append(mass_integral(state.field))
        self.q_trace.append(functional_Q(state.field))

    def relative_drift(self) -> tuple[float, float]:
        """max_t |I(t) - I(0)| / |I(0)| for int u and for int u^2 (absolute if I(0) = 0)."""
        out = []
        for tr in (self.mass_trace, self.q_trace):
            a = np.asarray(tr)
            ref = abs(a[0]) if a[0] != 0 else 1.0
            out.append(float(np.max(np.abs(a - a[0])) / ref))
        return out[0], out[1]


def mass_integral(u: Field) -> float:
    return float(u.grid.spacing * np.sum(u.values))


class _Operator:
    """Precomputed multipliers for the right-hand side on one grid."""

    def __init__(self, grid: PeriodicGrid, dealias: bool):
        xi = grid.rwavenumbers
        self.n = grid.N
        self.ik = 1j * xi
        self.ik[-1] = 0.0
        self.iLk = self.ik / (1.0 + xi ** 2)
        self.dealias = dealias
        # strict 2/3 rule on rfft indices k = 0..N/2
        self.mask = np.arange(xi.size) < grid.N / 3.0

    def __call__(self, u: np.ndarray) -> np.ndarray:
        uh = np.fft.rfft(u)
        lin = np.fft.irfft(self.iLk * uh, self.n)
        if self.dealias:
            uh = uh * self.mask
            uu = np.fft.irfft(uh, self.n)
            ux = np.fft.irfft(self.ik * uh, self.n)
            nl = np.fft.irfft(self.mask * np.fft.rfft(uu * ux), self.n)
        else:
            nl = u * np.fft.irfft(self.ik * uh, self.n)
        return -nl - lin


def rhs(u: Field, dealias: bool = True) -> Field:
    """Time derivative -(u u_y + L u_y) of the evolution equation."""
    return u.with_values(_Operator(u.grid, dealias)(u.values))


def _rk4(op, u, dt):
    k1 = op(u)
    k2 = op(u + 0.5 * dt * k1)
    k3 = op(u + 0.5 * dt * k2)
    k4 = op(u + dt * k3)
    return u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _check_blowup(v, t):
    if not np.all(np.isfinite(v)):
        raise BlowUpError(f"non-finite values at t={t:.6g}", time=t)
    amp = float(np.max(np.abs(v)))
    if amp > BLOWUP_AMPLITUDE:
        raise BlowUpError(f"max|u| = {amp:.3e} exceeds {BLOWUP_AMPLITUDE:.0e} at t={t:.6g}", time=t)


def step(state: SimState, dt: float, dealias: bool = True, _op=None) -> SimState:
    """Advance one classical RK4 step of size dt > 0."""
    if not (np.isfinite(dt) and dt > 0):
        raise ConfigurationError(f"dt must be positive, got {dt}")
    op = _op or _Operator(state.field.grid, dealias)
    v = _rk4(op, state.field.values, dt)
    t = state.t + dt
    _check_blowup(v, t)
    return SimState(t, state.field.with_values(v))


def auto_dt(u: Field) -> float:
    return CFL_FACTOR * u.grid.spacing / max(1.0, float(np.max(np.abs(u.values))))


def evolve(initial: Field, cfg: EvolveConfig, t0: float = 0.0):
    """Integrate from ``initial`` to time t0 + cfg.t_end.

    The step is the requested (or automatic) dt shrunk so that an integer
    number of steps lands exactly on t_end.  States are recorded at t0, after
    every ``record_every`` steps, and at the final time.

    Returns
    -------
    (list of SimState, ConservationTrace)

    Raises
    ------
    BlowUpError
        With ``states`` and ``trace`` holding everything recorded before the
        failure and ``time`` the time of detection.
    """
    dt_req = auto_dt(initial) if cfg.dt == "auto" else float(cfg.dt)
    n = max(1, int(np.ceil(cfg.t_end / dt_req - 1e-12)))
    dt = cfg.t_end / n
    op = _Operator(initial.grid, cfg.dealias)
    state = SimState(float(t0), initial)
    traj = [state]
    trace = ConservationTrace()
    trace.record(state)
    for i in range(1, n + 1):
        try:
            state = step(state, dt, _op=op)
        except BlowUpError as exc:
            raise BlowUpError(str(exc), time=exc.time, states=traj, trace=trace) from None
        # exact final time, free of accumulated round-off in t
        if i == n:
            state = SimState(float(t0) + cfg.t_end, state.field)
        if i % cfg.record_every == 0 or i == n:
            traj.append(state)
            trace.record(state)
    return traj, trace


def export_trajectory(out_dir, states, trace: ConservationTrace,
                      blowup_time: float | None = None) -> Path:
    """Write one ``state_XXXXX.csv`` per state plus ``trajectory.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, s in enumerate(states):
        name = f"state_{i:05d}.csv"
        write_field_csv(s.field, out / name)
        files.append(name)
    doc = {"times": [float(t) for t in trace.times],
           "mass_trace": [float(m) for m in trace.mass_trace],
           "q_trace": [float(q) for q in trace.q_trace],
           "files": files}
    if blowup_time is not None:
        doc["blowup_time"] = float(blowup_time)
    path = out / "trajectory.json"
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path
