"""
Finite-resolution diagnostics of the variational structure and of stability.

* concentration function and a three-way (plus Undetermined) classifier of
  mass-density sequences: spreading out, staying together, or splitting;
* strict subadditivity I_q < I_p + I_{q-p} and the scaling inequality
  I_{gamma q} < gamma I_q on computed minimum energies;
* a dilation witness for J(u) + Q(u) < 0;
* the orbital distance inf_a ||u - g(. - a)||_{H^s} and a perturbation
  experiment built on it.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .dynamics import EvolveConfig, evolve
from .errors import BarrierBreachError, BlowUpError, ConfigurationError, DataError
from .spectral_core import (
    DEFAULT_SOBOLEV_S,
    Field,
    PeriodicGrid,
    SobolevIndex,
    _as_index,
    cubic_integral,
    functional_J,
    functional_Q,
    make_grid,
    norm_Hs,
    shift,
)
from .traveling_wave import WaveProfile
from .variational_solver import MinimizeConfig, PenaltySpec, minimize_periodic

SUBADDITIVITY_FLOOR = 1e-6
CONGRUENCE_TOL = 1e-3
MASS_RTOL = 1e-6
TAIL = 5


# ---------------------------------------------------------------------------
# concentration

def _cell_cumsum(density: Field) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative mass of the piecewise-constant density over three periods.

    Cell j is [y_j - h/2, y_j + h/2]; returns breakpoints and cumulative values
    so that np.interp gives the mass to the left of any point in the middle
    period and its neighbours.
    """
    grid = density.grid
    h = grid.spacing
    eta = np.tile(density.values, 3) * h
    edges = np.concatenate([grid.nodes - 2 * grid.P, grid.nodes, grid.nodes + 2 * grid.P]) - 0.5 * h
    edges = np.append(edges, edges[-1] + h)
    cum = np.concatenate([[0.0], np.cumsum(eta)])
    return edges, cum


def _check_density(density: Field):
    if np.min(density.values) < -1e-12:
        raise DataError(f"density has negative entries (min {np.min(density.values):.3e})")


def concentration_function(density: Field, r: float) -> tuple[float, float]:
    """sup over centers x of the mass of ``density`` in [x - r, x + r].

    The density is treated as constant on each grid cell and the window is
    slid over the node positions, so the value is continuous and
    non-decreasing in r and never exceeds the total mass.  When several
    centers tie, the middle of the tied run is reported.

    Returns
    -------
    (value, center)
    """
    if not r > 0:
        raise ConfigurationError(f"window radius must be positive, got {r}")
    _check_density(density)
    grid = density.grid
    total = float(grid.spacing * np.sum(density.values))
    if r >= grid.P:
        j = int(np.argmax(density.values))
        return total, float(grid.nodes[j])
    edges, cum = _cell_cumsum(density)
    x = grid.nodes
    vals = np.interp(x + r, edges, cum) - np.interp(x - r, edges, cum)
    j = int(np.argmax(vals))
    # a window wider than the bump ties over a run of centers; report its middle
    tied = vals >= vals[j] - 1e-12 * max(total, 1e-300)
    lo = hi = 0
    while lo < grid.N - 1 and tied[(j - lo - 1) % grid.N]:
        lo += 1
    while hi < grid.N - 1 and tied[(j + hi + 1) % grid.N]:
        hi += 1
    center = x[j] + 0.5 * (hi - lo) * grid.spacing
    center = (center + grid.P) % (2 * grid.P) - grid.P
    return float(min(vals[j], total)), float(center)


def capture_radius(density: Field, target: float, rtol: float = 1e-6) -> float:
    """Smallest window radius whose best placement holds ``target`` mass (inf if none)."""
    grid = density.grid
    if concentration_function(density, grid.P)[0] < target:
        return float("inf")
    lo, hi = 0.0, grid.P
    while hi - lo > rtol * grid.P:
        mid = 0.5 * (lo + hi)
        if mid > 0 and concentration_function(density, mid)[0] >= target:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass(frozen=True)
class ConcentrationVerdict:
    case_label: str
    evidence: tuple
    capture_radii: tuple = ()
    p_estimate: float = float("nan")

    LABELS = ("Vanishing", "Concentration", "Dichotomy", "Undetermined")

    def to_dict(self) -> dict:
        return {"case_label": self.case_label, "evidence": list(self.evidence),
                "capture_radii": list(self.capture_radii), "p_estimate": self.p_estimate}


def classify_sequence(densities, q: float, eps: float, r: float = 5.0) -> ConcentrationVerdict:
    """Label a sequence of mass densities by how its last few members behave.

    Only the last five entries are inspected.  In order:

    Concentration
        the smallest radius capturing q - eps is finite, below P/2, and not
        growing (last <= 1.1 * first + 2 h).
    Dichotomy
        the mass captured at radius ``r`` is stable (spread <= eps/2) at some
        p with eps < p < q - eps, while the radius needed for q - eps grows
        strictly, i.e. the rest of the mass moves away.
    Vanishing
        the mass captured at radius ``r`` decreases strictly and ends below
        3/4 of its first tail value.

    Anything else is Undetermined.
    """
    densities = list(densities)
    if len(densities) < 3:
        raise DataError(f"need at least 3 densities, got {len(densities)}")
    if not (q > 0 and eps > 0):
        raise ConfigurationError("q and eps must be positive")
    for i, d in enumerate(densities):
        m = float(d.grid.spacing * np.sum(d.values))
        if abs(m - q) > MASS_RTOL * q:
            raise DataError(f"density {i} integrates to {m:.9g}, expected q = {q}")

    evidence = []
    for d in densities:
        val, center = concentration_function(d, r)
        evidence.append({"r": float(r), "best_center": center, "captured_mass": val})
    tail = densities[-TAIL:]
    ev = evidence[-TAIL:]
    grid = tail[-1].grid
    radii = [capture_radius(d, q - eps) for d in tail]
    captured = np.array([e["captured_mass"] for e in ev])

    def verdict(label, p=float("nan")):
        return ConcentrationVerdict(label, tuple(evidence), tuple(radii), float(p))

    if np.all(np.isfinite(radii)) and max(radii) < 0.5 * grid.P \
            and radii[-1] <= 1.1 * radii[0] + 2.0 * grid.spacing:
        return verdict("Concentration", captured[-1])
    p = float(np.mean(captured))
    stable = np.ptp(captured) <= 0.5 * eps
    receding = all(b > a for a, b in zip(radii, radii[1:]))
    if stable and eps < p < q - eps and receding:
        return verdict("Dichotomy", p)
    if np.all(np.diff(captured) < 0) and captured[-1] < 0.75 * captured[0]:
        return verdict("Vanishing", captured[-1])
    return verdict("Undetermined")


# ---------------------------------------------------------------------------
# subadditivity

@dataclass(frozen=True)
class ScanConfig:
    """Solver settings shared by every point of a subadditivity scan."""

    grid: PeriodicGrid = dc_field(default_factory=lambda: make_grid(40.0, 512))
    restarts: int = 3
    max_iters: int = 20000
    grad_tol: float = 1e-8
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if self.restarts < 1:
            raise ConfigurationError(f"restarts must be >= 1, got {self.restarts}")


@dataclass
class SubadditivityReport:
    q_values: list
    I_values: list
    checks: list
    converged: list = dc_field(default_factory=list)
    non_congruent: list = dc_field(default_factory=list)
    minimizers: dict = dc_field(default_factory=dict, repr=False)

    @property
    def all_strict(self) -> bool:
        return bool(self.checks) and all(c["strict"] is True for c in self.checks)

    def to_dict(self) -> dict:
        return {"q_values": self.q_values, "I_values": self.I_values, "checks": self.checks,
                "converged": self.converged, "non_congruent": self.non_congruent}


def _restart_guess(grid: PeriodicGrid, q: float, rng) -> Field:
    width = rng.uniform(1.5, 3.0)
    center = rng.uniform(-0.25, 0.25) * grid.P
    y = (grid.nodes - center + grid.P) % (2 * grid.P) - grid.P
    v = np.exp(-(y / width) ** 2) * (1.0 + 0.1 * rng.uniform(-1, 1) * np.cos(y / width))
    return Field(grid, v * np.sqrt(q / (grid.spacing * np.dot(v, v))))


def _best_minimum(q: float, cfg: ScanConfig, index: int):
    """Run the restarts for one q; returns (best result or None, list of converged results)."""
    rng = np.random.default_rng([cfg.seed, index])
    mcfg = MinimizeConfig(q=q, grid=cfg.grid, max_iters=cfg.max_iters, grad_tol=cfg.grad_tol)
    spec = PenaltySpec.default_for(q)
    good = []
    for k in range(cfg.restarts):
        init = None if k == 0 else _restart_guess(cfg.grid, q, rng)
        try:
            res = minimize_periodic(mcfg, spec, init=init)
        except BarrierBreachError:
            continue
        if res.success:
            good.append(res)
    best = min(good, key=lambda r: r.J_value) if good else None
    return best, good


def aligned_distance(u: Field, g: Field) -> float:
    return stability_metric(u, g, SobolevIndex(0.0))[0]


def subadditivity_scan(q_values, solver_cfg: ScanConfig | None = None) -> SubadditivityReport:
    """Minimum energies I_q and the strict subadditivity / scaling checks.

    Each check has ``margin`` = I_p + I_{q-p} - I_q (split) or gamma I_q - I_{gamma q}
    (scaling) and ``strict`` = margin > 1e-6; if any energy involved failed
    to converge the check is kept with ``strict`` = None ("Undetermined").
    Splits use only values present in ``q_values`` and p in the open
    interval (0, q).
    """
    cfg = solver_cfg or ScanConfig()
    qs = [float(q) for q in q_values]
    if not qs or any(not q > 0 for q in qs):
        raise ConfigurationError("q values must be positive")
    if any(b <= a for a, b in zip(qs, qs[1:])):
        raise ConfigurationError("q values must be strictly increasing")

    def task(i):
        return _best_minimum(qs[i], cfg, i)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            results = list(ex.map(task, range(len(qs))))
    else:
        results = [task(i) for i in range(len(qs))]

    I = []
    conv = []
    flagged = []
    minimizers = {}
    for q, (best, good) in zip(qs, results):
        conv.append(best is not None)
        I.append(best.J_value if best is not None else float("nan"))
        if best is not None:
            minimizers[q] = best.minimizer
            if any(aligned_distance(r.minimizer, best.minimizer) > CONGRUENCE_TOL for r in good):
                flagged.append(q)

    def find(x):
        for j, q in enumerate(qs):
            if abs(q - x) <= 1e-12 * max(1.0, x):
                return j
        return None

    def entry(kind, **kw):
        vals = [kw[k] for k in kw if k.startswith("I_")]
        ok = all(np.isfinite(v) for v in vals)
        m = kw["margin"]
        kw.update(kind=kind, strict=(bool(m > SUBADDITIVITY_FLOOR) if ok else None),
                  label=("strict" if ok and m > SUBADDITIVITY_FLOOR else
                         "not strict" if ok else "Undetermined"))
        return kw

    checks = []
    for jq, q in enumerate(qs):
        for jp, p in enumerate(qs):
            if not p < q or p > q - p + 1e-12:
                continue  # p in (0, q); each unordered split once
            jr = find(q - p)
            if jr is None:
                continue
            checks.append(entry("split", p=p, q=q, I_p=I[jp], I_q_minus_p=I[jr], I_q=I[jq],
                                margin=I[jp] + I[jr] - I[jq]))
    for i, qa in enumerate(qs):
        for j, qb in enumerate(qs):
            if qb > qa:
                gamma = qb / qa
                checks.append(entry("scaling", p=qa, q=qb, gamma=gamma, I_p=I[i], I_q=I[j],
                                    margin=gamma * I[i] - I[j]))
    return SubadditivityReport(q_values=qs, I_values=I, checks=checks, converged=conv,
                               non_congruent=flagged, minimizers=minimizers)


# ---------------------------------------------------------------------------
# energy sign

def cubic_sign(u: Field) -> float:
    """int u^3 over one period."""
    return cubic_integral(u)


def energy_bar(u: Field) -> float:
    """J(u) + Q(u)."""
    return functional_J(u) + functional_Q(u)


def _gaussian_with_mass(grid, q, width, theta=1.0):
    # sqrt(theta) h(theta y) for h = A exp(-y^2 / (2 width^2)) with Q(h) = q
    A = np.sqrt(q / (width * np.sqrt(np.pi)))
    return Field(grid, np.sqrt(theta) * A * np.exp(-(theta * grid.nodes) ** 2 / (2 * width ** 2)))


def negative_energy_witness(q: float, grid: PeriodicGrid, width: float | None = None,
                            n_theta: int = 60) -> dict:
    """Look for a dilation sqrt(theta) h(theta y) of a Gaussian with J + Q < 0.

    Dilation preserves Q and multiplies int u^3 by sqrt(theta), while <u, Lu>
    does depend on theta (it tends to Q as the profile widens), so J + Q is
    evaluated directly.  theta runs geometrically from the smallest value
    whose dilate still fits well inside the period (width / theta <= P / 6)
    up to 1; the first theta with a negative value is returned.

    ``width`` defaults to five grid spacings, the narrowest well-resolved
    Gaussian, since narrow profiles maximize the cubic term.
    """
    if not q > 0:
        raise ConfigurationError(f"q must be positive, got {q}")
    w = 5.0 * grid.spacing if width is None else float(width)
    theta_min = min(1.0, 6.0 * w / grid.P)
    thetas = np.geomspace(theta_min, 1.0, n_theta) if theta_min < 1 else np.array([1.0])
    q_ref = functional_Q(_gaussian_with_mass(grid, q, w))
    defect = 0.0
    best = None
    for th in thetas:
        u = _gaussian_with_mass(grid, q, w, th)
        defect = max(defect, abs(functional_Q(u) - q_ref) / q_ref)
        val = energy_bar(u)
        if best is None or val < best[1]:
            best = (float(th), float(val))
        if val < 0:
            return {"theta": float(th), "value": float(val), "found": True,
                    "scaling_defect": float(defect), "width": w}
    return {"theta": best[0], "value": best[1], "found": False,
            "scaling_defect": float(defect), "width": w}


# ---------------------------------------------------------------------------
# orbital distance

def stability_metric(u: Field, g: Field, s=DEFAULT_SOBOLEV_S) -> tuple[float, float]:
    """min over shifts a of ||u - g(. - a)||_{H^s}; returns (distance, a).

    The H^s-weighted cross-correlation C(a) = <u, g(. - a)>_s is evaluated on
    all grid shifts with one inverse FFT, its argmax is refined by a
    parabola through the neighbours and then by Newton steps on C'(a) = 0
    using the exact Fourier derivatives.  The distance is computed directly
    at the final shift, and a lies in [-P, P).
    """
    if u.grid != g.grid:
        raise ConfigurationError("stability_metric needs both fields on the same grid")
    sv = _as_index(s)
    grid = u.grid
    xi = grid.rwavenumbers
    w = (1.0 + xi ** 2) ** sv * grid._rweights
    X = w * np.fft.rfft(u.values) * np.conj(np.fft.rfft(g.values))
    corr = np.fft.irfft(X, grid.N)
    j = int(np.argmax(corr))
    cm, c0, cp = corr[j - 1], corr[j], corr[(j + 1) % grid.N]
    curv = cm - 2 * c0 + cp
    a = (j + (0.5 * (cm - cp) / curv if curv < 0 else 0.0)) * grid.spacing
    for _ in range(8):
        e = np.exp(1j * xi * a)
        d1 = float(np.sum((X * 1j * xi * e).real))
        d2 = float(np.sum((X * -(xi ** 2) * e).real))
        if not d2 < 0:
            break
        da = -d1 / d2
        a += da
        if abs(da) < 1e-13 * grid.P:
            break
    a = float((a + grid.P) % (2 * grid.P) - grid.P)
    dist = norm_Hs(u - shift(g, a), sv)
    return float(dist), a


@dataclass
class StabilityReport:
    delta: float
    sobolev_s: float
    times: list
    metric_trace: list
    max_metric: float
    ratio: float
    per_seed: dict = dc_field(default_factory=dict)
    blowups: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def perturbation(g: Field, delta: float, rng) -> Field:
    """g plus a random field with modes |xi| <= 2 and H^1 norm delta, rescaled to Q(g)."""
    if delta == 0:
        return g
    grid = g.grid
    nh = np.fft.rfft(rng.standard_normal(grid.N))
    nh[grid.rwavenumbers > 2.0] = 0.0
    n = Field(grid, np.fft.irfft(nh, grid.N))
    n = n * (delta / norm_Hs(n, 1.0))
    u0 = g + n
    return u0 * np.sqrt(functional_Q(g) / functional_Q(u0))


def _run_seed(g: Field, delta, t_end, s, sample_dt, seed, k, dealias):
    rng = np.random.default_rng([seed, k])
    u = perturbation(g, delta, rng)
    rows = []
    t = 0.0
    d, a = stability_metric(u, g, s)
    rows.append((t, d, a))
    n_samples = int(round(t_end / sample_dt))
    try:
        for i in range(1, n_samples + 1):
            traj, _ = evolve(u, EvolveConfig(t_end=sample_dt, dealias=dealias, record_every=10 ** 9),
                             t0=t)
            u = traj[-1].field
            t = i * sample_dt
            d, a = stability_metric(u, g, s)
            rows.append((t, d, a))
    except BlowUpError as exc:
        return rows, exc.time
    return rows, None


def stability_experiment(g: WaveProfile, delta: float, t_end: float, s=DEFAULT_SOBOLEV_S,
                         n_seeds: int = 10, seed: int = 0, sample_dt: float = 1.0,
                         workers: int = 1, out_dir=None, dealias: bool = True) -> StabilityReport:
    """Perturb a solitary wave, evolve, and track its orbital distance.

    For seed index k the perturbation draws from ``default_rng([seed, k])``.
    ``metric_trace`` is the max over surviving seeds at each sample time and
    ``ratio`` = max_metric / delta (nan when delta = 0).  A seed that blows
    up is listed in ``blowups`` with its time and contributes the samples it
    reached.  With ``out_dir`` each seed writes ``seed_XXX.csv`` with
    columns t,metric,shift.
    """
    if not g.converged:
        raise DataError(f"base wave did not converge ({g.status})")
    if not (delta >= 0 and np.isfinite(delta)):
        raise ConfigurationError(f"delta must be nonnegative, got {delta}")
    if not (t_end > 0 and sample_dt > 0):
        raise ConfigurationError("t_end and sample_dt must be positive")
    sv = _as_index(s)
    base = g.field

    def task(k):
        return _run_seed(base, delta, t_end, sv, sample_dt, seed, k, dealias)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(task, range(n_seeds)))
    else:
        results = [task(k) for k in range(n_seeds)]

    n_samples = int(round(t_end / sample_dt)) + 1
    times = [i * sample_dt for i in range(n_samples)]
    trace = np.zeros(n_samples)
    per_seed = {}
    blowups = {}
    for k, (rows, tb) in enumerate(results):
        per_seed[k] = [list(r) for r in rows]
        if tb is not None:
            blowups[k] = float(tb)
        for i, (_, d, _) in enumerate(rows):
            trace[i] = max(trace[i], d)
        if out_dir is not None:
            out = Path(out_dir)
            out.mkdir(parents=True, exist_ok=True)
            with (out / f"seed_{k:03d}.csv").open("w", newline="") as fh:
                wr = csv.writer(fh)
                wr.writerow(["t", "metric", "shift"])
                for t, d, a in rows:
                    wr.writerow([f"{t:.17g}", f"{d:.17g}", f"{a:.17g}"])
    mx = float(trace.max())
    return StabilityReport(delta=float(delta), sobolev_s=sv, times=times,
                           metric_trace=[float(x) for x in trace], max_metric=mx,
                           ratio=mx / delta if delta > 0 else float("nan"),
                           per_seed=per_seed, blowups=blowups)
