"""
Periodic pseudospectral substrate.

Uniform grids on (-P, P], real fields sampled on them, and the Fourier
multipliers used throughout the package:

    L          = (1 - d^2/dy^2)^{-1}       symbol 1 / (1 + xi^2)
    d/dy                                    symbol i xi (Nyquist zeroed)
    (c - L)^-1                              symbol (1 + xi^2) / (c xi^2 + c - 1)

plus the L^2 mass Q(u) = int u^2, the energy J(u) = -1/2 <u, Lu> - 1/6 int u^3,
and fractional Sobolev norms.  All integrals are over one period with the
uniform trapezoid rule, which is spectrally accurate for smooth periodic
integrands; quadratic forms go through Plancherel.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError, DomainError

DEFAULT_SOBOLEV_S = 0.75


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform grid y_j = -P + 2Pj/N, j = 0..N-1, on the period (-P, P]."""

    P: float
    N: int

    def __post_init__(self):
        if not (np.isfinite(self.P) and self.P > 0):
            raise ConfigurationError(f"half period P must be positive, got {self.P}")
        if int(self.N) != self.N or self.N < 8 or self.N % 2:
            raise ConfigurationError(f"mode count N must be an even integer >= 8, got {self.N}")
        object.__setattr__(self, "P", float(self.P))
        object.__setattr__(self, "N", int(self.N))

    @property
    def spacing(self) -> float:
        return 2.0 * self.P / self.N

    @property
    def length(self) -> float:
        return 2.0 * self.P

    @cached_property
    def nodes(self) -> np.ndarray:
        y = -self.P + self.spacing * np.arange(self.N)
        y.setflags(write=False)
        return y

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """xi_k = pi k / P in FFT order, k = 0..N/2-1, -N/2..-1."""
        k = np.fft.fftfreq(self.N, d=1.0 / self.N)
        xi = np.pi * k / self.P
        xi.setflags(write=False)
        return xi

    @cached_property
    def rwavenumbers(self) -> np.ndarray:
        """Nonnegative wavenumbers matching ``np.fft.rfft`` output (Nyquist last)."""
        xi = np.pi * np.arange(self.N // 2 + 1) / self.P
        xi.setflags(write=False)
        return xi

    @cached_property
    def _rweights(self) -> np.ndarray:
        # multiplicity of each rfft coefficient in the full spectrum
        w = np.full(self.N // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        w.setflags(write=False)
        return w


def make_grid(P: float, N: int) -> PeriodicGrid:
    """Build a :class:`PeriodicGrid`; raises ConfigurationError on bad P or N."""
    return PeriodicGrid(P, N)


@dataclass(frozen=True, eq=False)
class Field:
    """Real samples of a 2P-periodic function on a :class:`PeriodicGrid`.

    Values are copied on construction and made read-only.
    """

    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.N,):
            raise ConfigurationError(
                f"field has shape {v.shape}, grid expects ({self.grid.N},)")
        if not np.all(np.isfinite(v)):
            raise DataError("field values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, grid: PeriodicGrid, f) -> "Field":
        return cls(grid, f(grid.nodes))

    @classmethod
    def zeros(cls, grid: PeriodicGrid) -> "Field":
        return cls(grid, np.zeros(grid.N))

    def with_values(self, values) -> "Field":
        return Field(self.grid, values)

    def _other(self, other):
        if isinstance(other, Field):
            _check_same_grid(self, other)
            return other.values
        return other

    def __add__(self, other):
        return self.with_values(self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return self.with_values(self.values - self._other(other))

    def __rsub__(self, other):
        return self.with_values(self._other(other) - self.values)

    def __mul__(self, other):
        return self.with_values(self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.with_values(self.values / self._other(other))

    def __neg__(self):
        return self.with_values(-self.values)

    def __len__(self):
        return self.grid.N


def _check_same_grid(u: Field, v: Field):
    if u.grid != v.grid:
        raise ConfigurationError(f"grid mismatch: {u.grid} vs {v.grid}")


@dataclass(frozen=True)
class SobolevIndex:
    s: float = DEFAULT_SOBOLEV_S

    def __post_init__(self):
        if not (0.0 <= float(self.s) <= 1.0):
            raise DomainError(f"Sobolev index must lie in [0, 1], got {self.s}")


def _as_index(s) -> float:
    if isinstance(s, SobolevIndex):
        return float(s.s)
    return float(SobolevIndex(float(s)).s)


# ---------------------------------------------------------------------------
# array-level kernels (used by the solvers in their inner loops)

def apply_symbol(values: np.ndarray, symbol: np.ndarray) -> np.ndarray:
    """Multiply the rfft coefficients of ``values`` by a real even symbol."""
    n = values.shape[-1]
    return np.fft.irfft(symbol * np.fft.rfft(values), n)


def L_symbol(grid: PeriodicGrid) -> np.ndarray:
    return 1.0 / (1.0 + grid.rwavenumbers ** 2)


def inv_cL_symbol(grid: PeriodicGrid, c: float) -> np.ndarray:
    _check_speed(c)
    xi2 = grid.rwavenumbers ** 2
    return (1.0 + xi2) / (c * xi2 + c - 1.0)


def deriv_values(values: np.ndarray, grid: PeriodicGrid, order: int = 1) -> np.ndarray:
    """Spectral derivative; odd orders zero the Nyquist coefficient."""
    xi = grid.rwavenumbers
    mult = (1j * xi) ** order
    if order % 2:
        mult = mult.copy()
        mult[-1] = 0.0
    return np.fft.irfft(mult * np.fft.rfft(values), grid.N)


def quad_form(values: np.ndarray, grid: PeriodicGrid, weights: np.ndarray) -> float:
    """sum_k weights(xi_k) |u_k|^2, normalized so weights == 1 gives int u^2."""
    uh = np.fft.rfft(values)
    total = np.sum(grid._rweights * weights * (uh.real ** 2 + uh.imag ** 2))
    return float(total * grid.spacing / grid.N)


def _check_speed(c: float):
    if not (np.isfinite(c) and c > 1.0):
        raise DomainError(
            f"wave speed must satisfy c > 1 (the symbol c xi^2 + c - 1 vanishes otherwise), got {c}")


# ---------------------------------------------------------------------------
# operators on fields

def apply_L(u: Field) -> Field:
    """Apply L = (1 - d^2/dy^2)^{-1}."""
    return u.with_values(apply_symbol(u.values, L_symbol(u.grid)))


def apply_deriv(u: Field) -> Field:
    """Spectral d/dy with the Nyquist mode of the result set to zero."""
    return u.with_values(deriv_values(u.values, u.grid, 1))


def apply_inv_cL(u: Field, c: float) -> Field:
    """Apply (c - L)^{-1}; requires c > 1."""
    return u.with_values(apply_symbol(u.values, inv_cL_symbol(u.grid, c)))


def inner(u: Field, v: Field) -> float:
    """Trapezoid-rule L^2 inner product over one period."""
    _check_same_grid(u, v)
    return float(u.grid.spacing * np.dot(u.values, v.values))


def functional_Q(u: Field) -> float:
    """Q(u) = int_{-P}^{P} u^2 dy."""
    return float(u.grid.spacing * np.dot(u.values, u.values))


def quadratic_L(u: Field) -> float:
    """<u, Lu> through Plancherel."""
    return quad_form(u.values, u.grid, L_symbol(u.grid))


def cubic_integral(u: Field) -> float:
    return float(u.grid.spacing * np.sum(u.values ** 3))


def functional_J(u: Field) -> float:
    """J(u) = -1/2 <u, Lu> - 1/6 int u^3 over one period."""
    return -0.5 * quadratic_L(u) - cubic_integral(u) / 6.0


def norm_Hs(u: Field, s=DEFAULT_SOBOLEV_S) -> float:
    """Sobolev norm (sum_k (1 + xi_k^2)^s |u_k|^2)^{1/2}.

    Normalized so that ``norm_Hs(u, 0) ** 2 == functional_Q(u)``; ``s = 1``
    gives int u^2 + u_y^2.
    """
    s = _as_index(s)
    w = (1.0 + u.grid.rwavenumbers ** 2) ** s
    return float(np.sqrt(quad_form(u.values, u.grid, w)))


def residual_tw(u: Field, c: float) -> Field:
    """Traveling-wave defect -c u + u^2/2 + L u."""
    v = u.values
    return u.with_values(-c * v + 0.5 * v * v + apply_symbol(v, L_symbol(u.grid)))


def l2_norm(u: Field) -> float:
    return float(np.sqrt(functional_Q(u)))


def shift_values(values: np.ndarray, grid: PeriodicGrid, a: float) -> np.ndarray:
    """Samples of u(y - a) via band-limited (Fourier) translation.

    The Nyquist coefficient is kept symmetric so the result stays real and
    integer-node shifts are exact up to round-off.
    """
    uh = np.fft.rfft(values)
    phase = np.exp(-1j * grid.rwavenumbers * a)
    phase[-1] = np.cos(grid.rwavenumbers[-1] * a)
    return np.fft.irfft(uh * phase, grid.N)


def shift(u: Field, a: float) -> Field:
    """Return the translate u(. - a)."""
    return u.with_values(shift_values(u.values, u.grid, a))


def reflect(u: Field) -> Field:
    """Return u(-y); exact on the grid since y_j -> y_{N-j}."""
    return u.with_values(np.roll(u.values[::-1], 1))


# ---------------------------------------------------------------------------
# CSV serialization

def write_field_csv(u: Field, path) -> Path:
    """Write ``y,u`` rows with 17 significant digits (round-trips exactly)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("y,u\n")
        for yj, uj in zip(u.grid.nodes, u.values):
            fh.write(f"{yj:.17g},{uj:.17g}\n")
    return path


def read_field_csv(path) -> Field:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["y", "u"]:
            raise DataError(f"{path}: expected header 'y,u', got {header}")
        rows = [(float(a), float(b)) for a, b in reader]
    if not rows:
        raise DataError(f"{path}: no data rows")
    y = np.array([r[0] for r in rows])
    vals = np.array([r[1] for r in rows])
    grid = make_grid(-y[0], len(y))
    if not np.allclose(y, grid.nodes, rtol=0, atol=1e-12 * grid.P):
        raise DataError(f"{path}: nodes are not a uniform grid on (-P, P]")
    return Field(grid, vals)


def peak_offset(values: np.ndarray, grid: PeriodicGrid) -> float:
    """Location of the maximum: argmax node plus a parabolic sub-grid correction."""
    j = int(np.argmax(values))
    um, u0, up = values[j - 1], values[j], values[(j + 1) % grid.N]
    curv = um - 2.0 * u0 + up
    delta = 0.5 * (um - up) / curv if curv < 0 else 0.0
    if abs(delta) < 1e-12:
        delta = 0.0
    return float(grid.nodes[j] + delta * grid.spacing)


def recenter(u: Field) -> tuple[Field, float]:
    """Translate ``u`` so its maximum sits at y = 0; returns (field, applied offset)."""
    grid = u.grid
    j = int(np.argmax(u.values))
    j0 = grid.N // 2  # node at y = 0
    v = np.roll(u.values, j0 - j)
    y_peak = peak_offset(v, grid)
    if y_peak != 0.0:
        v = shift_values(v, grid, -y_peak)
    return u.with_values(v), float(grid.nodes[j] + y_peak)
