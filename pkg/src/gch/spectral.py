"""Periodic pseudo-spectral core: grids, fields, transforms and Fourier multipliers.

Fields are stored by their samples on ``x_m = -L/2 + m*dx``.  The real-FFT
spectrum is cached on first use; everything else is a pure function.
"""
from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft


def fft_workers() -> int:
    """Thread count for FFTs; ``GCH_THREADS`` overrides the CPU count."""
    env = os.environ.get("GCH_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def rfft(a):
    return sfft.rfft(a, workers=fft_workers())


def irfft(a, n):
    return sfft.irfft(a, n=n, workers=fft_workers())


def _is_power_of_two(n) -> bool:
    return isinstance(n, (int, np.integer)) and n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on ``[-L/2, L/2)`` with ``N`` points."""

    L: float
    N: int

    def __post_init__(self):
        if not (np.isfinite(self.L) and self.L > 0):
            raise ValueError(f"grid length must be positive, got L={self.L}")
        if not _is_power_of_two(self.N):
            raise ValueError(f"num_points must be a power of two, got N={self.N}")
        object.__setattr__(self, "L", float(self.L))
        object.__setattr__(self, "N", int(self.N))

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def nyquist(self) -> float:
        return np.pi * self.N / self.L

    @property
    def dxi(self) -> float:
        """Spacing of the frequency lattice."""
        return 2 * np.pi / self.L

    @cached_property
    def x(self) -> np.ndarray:
        x = -0.5 * self.L + self.dx * np.arange(self.N)
        x.flags.writeable = False
        return x

    @cached_property
    def xi(self) -> np.ndarray:
        """Frequencies ``2*pi*k/L`` for ``k = -N/2, ..., N/2-1`` (ascending)."""
        k = np.arange(-self.N // 2, self.N // 2)
        xi = self.dxi * k
        xi.flags.writeable = False
        return xi

    @cached_property
    def rxi(self) -> np.ndarray:
        """Nonnegative frequencies matching the real-FFT layout."""
        xi = self.dxi * np.arange(self.N // 2 + 1)
        xi.flags.writeable = False
        return xi

    @cached_property
    def rweights(self) -> np.ndarray:
        """Multiplicity of each real-FFT coefficient in the full spectrum."""
        w = np.full(self.N // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        w.flags.writeable = False
        return w

    def describe(self) -> dict:
        return {"L": self.L, "N": self.N, "dx": self.dx, "nyquist": self.nyquist}


def make_grid(L: float, N: int) -> Grid:
    return Grid(L, N)


class Field:
    """Real samples on a :class:`Grid`; immutable, with a lazily cached spectrum."""

    def __init__(self, grid: Grid, samples):
        a = np.array(samples, dtype=np.float64)
        if a.shape != (grid.N,):
            raise ValueError(f"expected {grid.N} samples, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("field samples must be finite")
        a.flags.writeable = False
        self.grid = grid
        self.samples = a

    @classmethod
    def from_rspectrum(cls, grid: Grid, rspec) -> "Field":
        f = cls(grid, irfft(rspec, grid.N))
        return f

    @classmethod
    def from_function(cls, grid: Grid, func) -> "Field":
        return cls(grid, func(grid.x))

    @cached_property
    def rspectrum(self) -> np.ndarray:
        s = rfft(self.samples)
        s.flags.writeable = False
        return s

    def __add__(self, other):
        if isinstance(other, Field):
            _check_same_grid(self, other)
            return Field(self.grid, self.samples + other.samples)
        return Field(self.grid, self.samples + other)

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Field):
            _check_same_grid(self, other)
            return Field(self.grid, self.samples - other.samples)
        return Field(self.grid, self.samples - other)

    def __mul__(self, other):
        if isinstance(other, Field):
            _check_same_grid(self, other)
            return Field(self.grid, self.samples * other.samples)
        return Field(self.grid, self.samples * other)

    __rmul__ = __mul__

    def __neg__(self):
        return Field(self.grid, -self.samples)

    def __pow__(self, p):
        return Field(self.grid, self.samples ** p)

    def sup(self) -> float:
        return float(np.max(np.abs(self.samples))) if self.grid.N else 0.0

    def __repr__(self):
        return f"Field(N={self.grid.N}, L={self.grid.L:g}, sup={self.sup():.3e})"


def _check_same_grid(a: Field, b: Field):
    if a.grid != b.grid:
        raise ValueError("fields live on different grids")


def transform(f: Field) -> np.ndarray:
    """Full DFT of the samples, ordered like :attr:`Grid.xi` (ascending k)."""
    return np.fft.fftshift(sfft.fft(f.samples, workers=fft_workers()))


def inverse_transform(grid: Grid, spectrum) -> Field:
    spec = np.fft.ifftshift(np.asarray(spectrum))
    vals = sfft.ifft(spec, workers=fft_workers())
    return Field(grid, vals.real)


def apply_multiplier(f: Field, mult) -> Field:
    """Apply a Fourier multiplier given on the real-FFT frequencies ``grid.rxi``."""
    return Field.from_rspectrum(f.grid, f.rspectrum * mult)


def derivative_multiplier(grid: Grid, order: int) -> np.ndarray:
    m = (1j * grid.rxi) ** order
    if order % 2 == 1:
        # Nyquist mode has no real odd derivative
        m[-1] = 0.0
    return m


def derivative(f: Field, order: int = 1) -> Field:
    if order < 1:
        raise ValueError("derivative order must be >= 1")
    return apply_multiplier(f, derivative_multiplier(f.grid, order))


def helmholtz_multiplier(grid: Grid) -> np.ndarray:
    return 1.0 / (1.0 + grid.rxi ** 2)


def helmholtz_inverse(f: Field) -> Field:
    """``(1 - d^2/dx^2)^{-1} f``, i.e. convolution with ``exp(-|x|)/2``."""
    return apply_multiplier(f, helmholtz_multiplier(f.grid))


def dx_helmholtz_inverse(f: Field) -> Field:
    """``d/dx (1 - d^2/dx^2)^{-1} f`` as a single multiplier."""
    return apply_multiplier(f, derivative_multiplier(f.grid, 1) * helmholtz_multiplier(f.grid))


def lp_norm(f: Field, p) -> float:
    """Grid quadrature of the L^p norm; ``p=inf`` is the max of the samples."""
    if p == np.inf:
        return f.sup()
    if p < 1:
        raise ValueError("p must be >= 1")
    return float((f.grid.dx * np.sum(np.abs(f.samples) ** p)) ** (1.0 / p))


def spectral_energy_fraction(f: Field, mask) -> float:
    """Fraction of ``sum |f_hat|^2`` carried by real-FFT frequencies where ``mask`` holds."""
    e = f.grid.rweights * np.abs(f.rspectrum) ** 2
    total = e.sum()
    if total == 0.0:
        return 0.0
    return float(e[np.asarray(mask)].sum() / total)


def evaluate(f: Field, points, tol: float = 0.0) -> np.ndarray:
    """Evaluate the trigonometric interpolant of ``f`` at arbitrary points.

    Modes with magnitude below ``tol * max|f_hat|`` are skipped, which keeps
    evaluation cheap for narrow-band fields such as dyadic blocks.
    """
    return evaluate_rspectrum(f.grid, f.rspectrum, points, tol=tol)


def evaluate_rspectrum(grid: Grid, rspec, points, tol: float = 0.0, deriv: int = 0) -> np.ndarray:
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    coef = np.array(rspec, dtype=complex) * grid.rweights / grid.N
    if deriv:
        coef = coef * (1j * grid.rxi) ** deriv
        if deriv % 2:
            coef[-1] = 0.0
    idx = np.nonzero(np.abs(coef) > tol * np.max(np.abs(coef), initial=0.0))[0] if tol > 0 else np.arange(coef.size)
    return _trig_sum(grid, grid.rxi[idx], coef[idx], pts)


def _trig_sum(grid: Grid, xi, c, pts) -> np.ndarray:
    """``Re sum_k c_k exp(i xi_k (x + L/2))`` at ``pts``."""
    pts = np.atleast_1d(np.asarray(pts, dtype=float))
    out = np.zeros(pts.size)
    if xi.size == 0:
        return out
    # chunk to bound the size of the phase matrix
    chunk = max(1, int(4_000_000 // xi.size))
    for s in range(0, pts.size, chunk):
        ph = np.exp(1j * np.outer(pts[s:s + chunk] + 0.5 * grid.L, xi))
        out[s:s + chunk] = (ph @ c).real
    return out


def refined_sup(f: Field, eta: float = 1e-7, tol: float = 1e-14,
                max_candidates: int = 1 << 17, atol: float = 0.0) -> float:
    """Sup norm of the trigonometric interpolant, not just of the samples.

    The smallest modes whose amplitudes sum to at most ``eta * max|samples|``
    are dropped, which moves the interpolant by no more than that anywhere;
    ``atol`` raises the dropped budget to an absolute level, so blocks that
    hold only roundoff of a parent field are not refined.
    If the remaining spectrum stops at ``xi_top``, a sample within ``dx/2`` of
    an extremum is at most ``(xi_top*dx)^2/8 * sup|f|`` below it (Bernstein),
    so every local maximum of ``|f|`` above that threshold is a candidate.
    Candidates are polished by Newton steps on spectral derivatives.
    """
    a = np.abs(f.samples)
    M = float(a.max()) if a.size else 0.0
    if M == 0.0:
        return 0.0
    grid = f.grid
    rs = f.rspectrum
    amp = grid.rweights * np.abs(rs) / grid.N
    order = np.argsort(amp, kind="stable")
    dropped = order[np.cumsum(amp[order]) <= max(eta * M, atol)]
    keep = rs.copy()
    keep[dropped] = 0.0
    live = np.nonzero(keep)[0]
    if live.size == 0:
        return M
    xi = grid.rxi[live]
    c0 = keep[live] * grid.rweights[live] / grid.N
    c1 = c0 * (1j * xi)
    c1[live == grid.N // 2] = 0.0
    c2 = -c0 * xi ** 2
    xi_top = float(xi.max())
    delta = min(1.0, (xi_top * grid.dx) ** 2 / 8 + 4 * eta)
    local = (a >= np.roll(a, 1)) & (a >= np.roll(a, -1))
    cand = np.nonzero(local & (a >= M * (1 - delta)))[0]
    if cand.size > max_candidates:
        cand = cand[np.argsort(a[cand])[::-1][:max_candidates]]
    x = grid.x[cand].astype(float)
    for _ in range(30):
        d1 = _trig_sum(grid, xi, c1, x)
        d2 = _trig_sum(grid, xi, c2, x)
        step = np.where(d2 != 0.0, -d1 / np.where(d2 != 0.0, d2, 1.0), 0.0)
        step = np.clip(step, -grid.dx, grid.dx)
        x = x + step
        if np.max(np.abs(step)) < tol * max(1.0, grid.L):
            break
    vals = np.abs(_trig_sum(grid, xi, c0, x))
    return max(M, float(vals.max()))
