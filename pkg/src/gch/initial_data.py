"""High/low-frequency initial data for norm inflation and its certified properties.

The data family is

    u0 = n^{-1/(Q+1)} (u_high + u_low),
    u_low  = sum_l chi_check(x + c_l),
    u_high = lam^{-1} log n sum_l cos(lam*g*(x + c_l)) cos(2^l*g*(x + c_l)) chi_check(x + c_l),

with ``g = 17/24``, ``lam = 2^n`` and ``c_l = 2^{l+1} g`` for the paper-exact
family.  The generalized family keeps the formulas but lets ``lam`` be any
power of two (``n = log2 lam``), uses a small synthetic index set, and puts the
bumps on evenly spaced cells of the torus.

Grids are lattice-aligned: ``L = 2*pi*q/g`` makes every carrier ``lam*g`` and
``2^l*g`` an exact lattice frequency, so the support statements hold exactly on
the torus instead of up to a boundary tail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .littlewood_paley import (
    LPCutoffs,
    SmoothCutoff,
    block_norms,
    build_cutoffs,
    coverage_radius,
    index_set,
    j_max,
    restricted_norm,
)
from .spectral import (
    Field,
    Grid,
    derivative,
    dx_helmholtz_inverse,
    spectral_energy_fraction,
)

GAMMA = 17 / 24
LEAKAGE_TOL = 1e-10
DEFAULT_MAX_POINTS = 2 ** 22
MAX_CELL_PERIODS = 16
BYTES_PER_POINT = 8 * 12  # working arrays held by the solver at once


class InfeasibleGridError(ValueError):
    """The requested instance does not fit the point budget."""

    def __init__(self, message, required_points, budget):
        super().__init__(message)
        self.required_points = required_points
        self.budget = budget
        self.required_bytes = required_points * BYTES_PER_POINT


def min_block_index(Q: int) -> int:
    """Smallest ``l`` for which ``2^{l+1} g +- (Q+1) 2^{-Q}`` stays on the plateau of block ``l``."""
    ell = 0
    while 2.0 ** ell * min(2 * GAMMA - 4 / 3, 1.5 - 2 * GAMMA) < (Q + 1) * 2.0 ** -Q:
        ell += 1
    return ell


def synthetic_index_set(n: int, Q: int) -> list:
    """Index window for the generalized family; its size grows with ``n`` like the paper's window."""
    return list(range(min_block_index(Q), n - 5))


@dataclass(frozen=True)
class DataParams:
    n: int
    Q: int
    gamma: float = GAMMA
    carrier: int | None = None
    indices: tuple | None = None
    family: str = "paper"
    scale: float = 1.0

    def __post_init__(self):
        if self.Q < 2 or int(self.Q) != self.Q:
            raise ValueError(f"Q must be an integer >= 2, got {self.Q}")
        if self.gamma != GAMMA:
            raise ValueError("gamma is fixed at 17/24")
        if self.family == "paper":
            if self.n < 16 or self.n % 16:
                raise ValueError(f"n must lie in 16N = {{16, 32, ...}}, got {self.n}")
            object.__setattr__(self, "carrier", 2 ** self.n)
            object.__setattr__(self, "indices", tuple(index_set(self.n)))
        elif self.family == "lambda":
            if self.carrier is None:
                object.__setattr__(self, "carrier", 2 ** self.n)
            if self.carrier != 2 ** self.n:
                raise ValueError("generalized carrier must equal 2^n")
            if self.indices is None:
                object.__setattr__(self, "indices", tuple(synthetic_index_set(self.n, self.Q)))
            if not self.indices:
                raise ValueError(f"empty index set for n={self.n}, Q={self.Q}")
        else:
            raise ValueError(f"family must be 'paper' or 'lambda', got {self.family!r}")

    @classmethod
    def lambda_family(cls, lam: int, Q: int, indices=None, scale: float = 1.0) -> "DataParams":
        n = int(round(math.log2(lam)))
        if 2 ** n != lam:
            raise ValueError(f"carrier must be a power of two, got {lam}")
        return cls(n=n, Q=Q, carrier=lam, indices=None if indices is None else tuple(indices),
                   family="lambda", scale=scale)

    @property
    def cutoff(self) -> SmoothCutoff:
        return SmoothCutoff(4.0 ** -self.Q, 2.0 ** -self.Q)

    @property
    def log_n(self) -> float:
        return math.log(self.n)

    @property
    def prefactor(self) -> float:
        return self.scale * self.n ** (-1.0 / (self.Q + 1))

    @property
    def max_frequency(self) -> float:
        return self.carrier * self.gamma + 2.0 ** max(self.indices) * self.gamma + 2.0 ** -self.Q

    @property
    def high_band(self) -> tuple:
        """Annulus that must contain the spectrum of ``u_high``."""
        half = self.carrier / 2
        return (4 / 3 * half, 3 / 2 * half)

    def describe(self) -> dict:
        return {"n": self.n, "Q": self.Q, "gamma": self.gamma, "carrier": self.carrier,
                "indices": list(self.indices), "family": self.family, "scale": self.scale}


def paper_centers(params: DataParams) -> dict:
    return {ell: 2.0 ** (ell + 1) * params.gamma for ell in params.indices}


def _next_pow2(x: float) -> int:
    return 1 << max(0, int(math.ceil(math.log2(max(x, 1.0)))))


def _layout_periods(params: DataParams, p: int) -> int:
    """Number of ``2*pi/g`` periods in the torus for cell size ``p``."""
    if params.family == "lambda":
        return p * len(params.indices)
    c = list(paper_centers(params).values())
    span = max(c) - min(c)
    return int(math.ceil(span * params.gamma / (2 * math.pi))) + p


def _points_for(params: DataParams, q: int) -> int:
    need = (params.Q + 4) * q * params.max_frequency / params.gamma
    N = _next_pow2(need)
    L = 2 * math.pi * q / params.gamma
    while coverage_radius(Grid(L, N)) < params.max_frequency:
        N *= 2
    return N


def plan_grid(params: DataParams, max_points: int = DEFAULT_MAX_POINTS,
              cell_periods: int | None = None) -> Grid:
    """Choose a lattice-aligned torus resolving the data with solver headroom.

    The Nyquist frequency is at least ``(Q+4)/2`` times the top data frequency,
    so the data survives the solver's ``2/(Q+4)`` dealiasing filter.  Among the
    feasible cell sizes the widest is taken, which best separates the bumps.
    """
    if cell_periods is not None:
        candidates = [int(cell_periods)]
    else:
        candidates = list(range(MAX_CELL_PERIODS, 0, -1))
    best_need = None
    for p in candidates:
        q = _layout_periods(params, p)
        N = _points_for(params, q)
        if N <= max_points:
            return Grid(2 * math.pi * q / params.gamma, N)
        best_need = N if best_need is None else min(best_need, N)
    raise InfeasibleGridError(
        f"instance n={params.n}, Q={params.Q} needs N={best_need} grid points "
        f"(~{best_need * BYTES_PER_POINT / 2**30:.3g} GiB working memory), "
        f"above the budget of {max_points} points",
        best_need, max_points)


def cell_periods_of(params: DataParams, grid: Grid) -> int:
    q = int(round(grid.L * params.gamma / (2 * math.pi)))
    if params.family == "lambda":
        return q // len(params.indices)
    return q


def centers(params: DataParams, grid: Grid) -> dict:
    if params.family == "paper":
        return paper_centers(params)
    cell = grid.L / len(params.indices)
    return {ell: i * cell for i, ell in enumerate(params.indices)}


def bump(params: DataParams, grid: Grid, shift: float) -> np.ndarray:
    """Samples of ``chi_check(x + shift)``, computed by inverse transform on the grid."""
    spec = (grid.N / grid.L) * params.cutoff(grid.rxi) * np.exp(1j * grid.rxi * (shift - 0.5 * grid.L))
    return Field.from_rspectrum(grid, spec).samples


def build_low(params: DataParams, grid: Grid) -> Field:
    spec = np.zeros(grid.N // 2 + 1, dtype=complex)
    for c in centers(params, grid).values():
        spec += np.exp(1j * grid.rxi * (c - 0.5 * grid.L))
    spec *= (grid.N / grid.L) * params.cutoff(grid.rxi)
    return Field.from_rspectrum(grid, spec)


def high_term(params: DataParams, grid: Grid, ell: int, c: float, power: int = 1) -> np.ndarray:
    """``cos(lam g (x+c)) cos(2^l g (x+c)) chi_check(x+c)^power``."""
    y = grid.x + c
    g = params.gamma
    return np.cos(params.carrier * g * y) * np.cos(2.0 ** ell * g * y) * bump(params, grid, c) ** power


def build_high(params: DataParams, grid: Grid) -> Field:
    total = np.zeros(grid.N)
    for ell, c in centers(params, grid).items():
        total += high_term(params, grid, ell, c)
    return Field(grid, total * params.log_n / params.carrier)


def low_leakage(params: DataParams, f: Field) -> float:
    return spectral_energy_fraction(f, f.grid.rxi > 2.0 ** -params.Q * (1 + 1e-12))


def high_leakage(params: DataParams, f: Field) -> float:
    lo, hi = params.high_band
    r = f.grid.rxi
    return spectral_energy_fraction(f, (r < lo * (1 - 1e-12)) | (r > hi * (1 + 1e-12)))


@dataclass
class DataBundle:
    params: DataParams
    grid: Grid
    u_high: Field
    u_low: Field
    u0: Field
    centers: dict
    leakage: dict = field(default_factory=dict)
    tail_level: float = float("nan")

    def __post_init__(self):
        expected = self.params.prefactor * (self.u_high.samples + self.u_low.samples)
        if not np.allclose(self.u0.samples, expected, rtol=0, atol=1e-15 * max(1.0, np.max(np.abs(expected)))):
            raise ValueError("u0 must equal n^{-1/(Q+1)} (u_high + u_low)")

    def metadata(self) -> dict:
        return {"params": self.params.describe(), "grid": self.grid.describe(),
                "centers": {str(k): v for k, v in self.centers.items()},
                "leakage": self.leakage, "tail_level": self.tail_level,
                "profile_hash": self.params.cutoff.profile_hash}


def _tail_level(params: DataParams, grid: Grid) -> float:
    """``|chi_check|`` at half a cell from its centre, relative to its peak."""
    b = np.abs(bump(params, grid, 0.0))
    half = grid.L / (2 * len(params.indices)) if params.family == "lambda" else grid.L / 2
    far = np.abs(grid.x) >= half - grid.dx
    return float(np.max(b[far]) / np.max(b))


def build_bundle(params: DataParams, grid: Grid | None = None, *,
                 max_points: int = DEFAULT_MAX_POINTS, check: bool = True) -> DataBundle:
    if grid is None:
        grid = plan_grid(params, max_points=max_points)
    if grid.nyquist <= params.max_frequency:
        raise InfeasibleGridError("grid does not resolve the high-frequency carrier",
                                  _points_for(params, 1), grid.N)
    u_low = build_low(params, grid)
    u_high = build_high(params, grid)
    u0 = Field(grid, params.prefactor * (u_high.samples + u_low.samples))
    leak = {"low": low_leakage(params, u_low), "high": high_leakage(params, u_high)}
    if check and max(leak.values()) > LEAKAGE_TOL:
        raise ValueError(f"spectral support certification failed: {leak}")
    return DataBundle(params, grid, u_high, u_low, u0, centers(params, grid), leak,
                      _tail_level(params, grid))


def term_support_report(bundle: DataBundle) -> dict:
    """Per-term support of ``cos(a) cos(b) chi_check^M`` for ``1 <= M <= Q``.

    Each term is measured spectrally against the band
    ``lam g - 2^l g - 1/2 <= |xi| <= lam g + 2^l g + 1/2``, and the band is
    checked to sit inside the high-frequency annulus by interval arithmetic.
    """
    p, grid = bundle.params, bundle.grid
    lo_ann, hi_ann = p.high_band
    rows = []
    ok = True
    for ell, c in bundle.centers.items():
        lo = p.carrier * p.gamma - 2.0 ** ell * p.gamma - 0.5
        hi = p.carrier * p.gamma + 2.0 ** ell * p.gamma + 0.5
        tight_lo = p.carrier * p.gamma - 2.0 ** ell * p.gamma - 2.0 ** -p.Q
        tight_hi = p.carrier * p.gamma + 2.0 ** ell * p.gamma + 2.0 ** -p.Q
        for M in range(1, p.Q + 1):
            term = Field(grid, high_term(p, grid, ell, c, power=M))
            r = grid.rxi
            leak = spectral_energy_fraction(term, (r < lo * (1 - 1e-12)) | (r > hi * (1 + 1e-12)))
            rows.append({"ell": ell, "M": M, "band": [lo, hi], "leakage": leak})
            ok &= leak <= LEAKAGE_TOL
        rows[-1]["band_in_annulus"] = bool(lo_ann <= tight_lo and tight_hi <= hi_ann)
        rows[-1]["loose_band_in_annulus"] = bool(lo_ann < lo and hi <= hi_ann)
        ok &= rows[-1]["band_in_annulus"]
    return {"terms": rows, "passed": bool(ok)}


def lemma_e1_report(bundle: DataBundle) -> dict:
    p = bundle.params
    uh, ul = bundle.u_high, bundle.u_low
    high = (p.carrier * uh.sup() + derivative(uh).sup()) / p.log_n
    low = ul.sup() + derivative(ul).sup()
    return {"n": p.n, "Q": p.Q, "carrier": p.carrier,
            "high_over_log_n": high, "low_lipschitz": low}


def nonlinear_weight(bundle: DataBundle) -> Field:
    """``u0^{Q-1} (d_x u0)^2``."""
    u0 = bundle.u0
    ux = derivative(u0)
    return Field(u0.grid, u0.samples ** (bundle.params.Q - 1) * ux.samples ** 2)


def diagonal_term(bundle: DataBundle, j: int) -> Field:
    """Leading part of the weight in block ``j``:
    ``(1/n)(log n)^2 g^2 / 4 * cos(2^{j+1} g (x+c_j)) chi_check^{Q+1}(x+c_j)``."""
    p, grid = bundle.params, bundle.grid
    c = bundle.centers[j]
    y = grid.x + c
    amp = p.prefactor ** (p.Q + 1) * p.log_n ** 2 * p.gamma ** 2 / 4
    vals = amp * np.cos(2.0 ** (j + 1) * p.gamma * y) * bump(p, grid, c) ** (p.Q + 1)
    return Field(grid, vals)


def lemma_e2_report(bundle: DataBundle, cutoffs: LPCutoffs | None = None) -> dict:
    cutoffs = cutoffs or build_cutoffs()
    p = bundle.params
    w = nonlinear_weight(bundle)
    js = list(p.indices)
    norms = block_norms(w, cutoffs, np.inf, js)
    total = float(sum(norms.values()))
    dominance = {}
    for j in js:
        diag = diagonal_term(bundle, j)
        mult = cutoffs.block_multiplier(bundle.grid, j)
        d = Field.from_rspectrum(bundle.grid, diag.rspectrum * mult)
        blk = Field.from_rspectrum(bundle.grid, w.rspectrum * mult)
        off = (blk - d).sup()
        dominance[str(j)] = {"diagonal": d.sup(), "off_diagonal": off,
                             "ratio": d.sup() / off if off > 0 else math.inf}
    return {"n": p.n, "Q": p.Q, "carrier": p.carrier, "indices": js,
            "restricted_norm": total, "log_n_sq": p.log_n ** 2,
            "ratio": total / p.log_n ** 2,
            "blocks": {str(j): v for j, v in norms.items()},
            "dominance": dominance}


def compute_E0(bundle: DataBundle) -> Field:
    """``-d_x (1 - d_x^2)^{-1} [u0^{Q-1} (d_x u0)^2]``."""
    return -dx_helmholtz_inverse(nonlinear_weight(bundle))


def e0_report(bundle: DataBundle, cutoffs: LPCutoffs | None = None) -> dict:
    cutoffs = cutoffs or build_cutoffs()
    js = list(bundle.params.indices)
    E0 = compute_E0(bundle)
    w = nonlinear_weight(bundle)
    weighted = restricted_norm(E0, 1, None, cutoffs, js)
    deriv = sum(block_norms(derivative(E0), cutoffs, np.inf, js).values())
    base = restricted_norm(w, 0, None, cutoffs, js)
    return {"E0_restricted_B1": weighted, "dxE0_restricted_B0": deriv,
            "weight_restricted_B0": base,
            "ratio_to_weight": weighted / base if base > 0 else math.nan}


def with_scale(params: DataParams, scale: float) -> DataParams:
    return replace(params, scale=scale)


def feasible(params: DataParams, max_points: int = DEFAULT_MAX_POINTS) -> bool:
    try:
        plan_grid(params, max_points)
    except InfeasibleGridError:
        return False
    return True


def resolvable_indices(params: DataParams, grid: Grid) -> bool:
    return max(params.indices) <= j_max(grid)
