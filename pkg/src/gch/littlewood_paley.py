"""Littlewood-Paley blocks, Besov norms and numerical Bernstein/commutator checks."""
from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

from .spectral import (
    Field,
    Grid,
    apply_multiplier,
    derivative,
    derivative_multiplier,
    lp_norm,
    refined_sup,
    spectral_energy_fraction,
)

# dyadic geometry of the inhomogeneous decomposition
BALL_RADIUS = 4.0 / 3.0
ANNULUS_INNER = 3.0 / 4.0
ANNULUS_OUTER = 8.0 / 3.0


def smooth_step(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, built from ``exp(-1/t)``."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


@dataclass(frozen=True)
class SmoothCutoff:
    """Radial profile equal to 1 on ``|xi| <= plateau`` and 0 on ``|xi| >= support``."""

    plateau: float
    support: float

    def __post_init__(self):
        if not (0 < self.plateau < self.support):
            raise ValueError(
                f"cutoff needs 0 < plateau < support, got {self.plateau}, {self.support}")

    def __call__(self, xi):
        r = np.abs(np.asarray(xi, dtype=float))
        return 1.0 - smooth_step((r - self.plateau) / (self.support - self.plateau))

    @property
    def profile_hash(self) -> str:
        key = f"exp-smoothstep:{self.plateau!r}:{self.support!r}"
        return hashlib.sha256(key.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class LPCutoffs:
    chi: SmoothCutoff

    def phi(self, xi):
        xi = np.asarray(xi, dtype=float)
        return self.chi(xi / 2.0) - self.chi(xi)

    def block_multiplier(self, grid: Grid, j: int) -> np.ndarray:
        if j == -1:
            return self.chi(grid.rxi)
        return self.phi(grid.rxi / 2.0 ** j)


def build_cutoffs(plateau: float = 0.75, support: float = BALL_RADIUS) -> LPCutoffs:
    """Pin the Littlewood-Paley profile.

    The plateau must contain ``|xi| <= 3/4`` and the support must sit inside
    ``|xi| <= 4/3``; both are needed for ``phi == 1`` on ``[4/3, 3/2]``.
    """
    if plateau < ANNULUS_INNER or support > BALL_RADIUS or plateau >= support:
        raise ValueError(
            f"LP cutoff must equal 1 on |xi|<=3/4 and vanish for |xi|>=4/3; "
            f"got plateau={plateau}, support={support}")
    return LPCutoffs(SmoothCutoff(plateau, support))


def partition_of_unity_error(cutoffs: LPCutoffs, xi) -> float:
    """``max |chi(xi) + sum_{j>=0} phi(2^-j xi) - 1|`` over the given frequencies."""
    xi = np.abs(np.asarray(xi, dtype=float))
    top = float(np.max(xi, initial=0.0))
    jstop = max(0, int(math.ceil(math.log2(max(top, 1.0) / ANNULUS_INNER))) + 2)
    total = cutoffs.chi(xi)
    for j in range(jstop + 1):
        total = total + cutoffs.phi(xi / 2.0 ** j)
    return float(np.max(np.abs(total - 1.0)))


def j_max(grid: Grid) -> int:
    """Largest block index whose annulus fits below the Nyquist frequency."""
    ratio = grid.nyquist / ANNULUS_OUTER
    if ratio < 1.0:
        return -1
    return int(math.floor(math.log2(ratio)))


def coverage_radius(grid: Grid) -> float:
    """Frequencies up to here are reconstructed exactly by blocks ``-1..j_max``."""
    return ANNULUS_INNER * 2.0 ** (j_max(grid) + 1)


def dyadic_block(f: Field, j: int, cutoffs: LPCutoffs) -> Field:
    if j <= -2:
        return Field(f.grid, np.zeros(f.grid.N))
    jm = j_max(f.grid)
    if j > jm:
        raise ValueError(f"block j={j} exceeds the resolvable band (j_max={jm})")
    return apply_multiplier(f, cutoffs.block_multiplier(f.grid, j))


@dataclass
class DyadicDecomposition:
    field: Field
    blocks: dict = field(default_factory=dict)

    def reconstruct(self) -> Field:
        total = np.zeros(self.field.grid.N)
        for j in sorted(self.blocks):
            total += self.blocks[j].samples
        return Field(self.field.grid, total)


def decompose(f: Field, cutoffs: LPCutoffs) -> DyadicDecomposition:
    blocks = {j: dyadic_block(f, j, cutoffs) for j in range(-1, j_max(f.grid) + 1)}
    return DyadicDecomposition(f, blocks)


NOISE_FLOOR = 1e-12


def block_norms(f: Field, cutoffs: LPCutoffs, p=np.inf, js=None, refine: bool = True) -> dict:
    """``{j: ||Delta_j f||_{L^p}}``; blocks with an identically zero spectrum are skipped.

    For ``p = inf`` the sup of the trigonometric interpolant is used unless
    ``refine`` is off: with a few samples per carrier wavelength the grid max
    can sit several percent below it. Modes summing to at most ``NOISE_FLOOR``
    times the sup of ``f`` are ignored by the refinement, so roundoff-only
    blocks keep their grid max.
    """
    grid = f.grid
    jm = j_max(grid)
    if js is None:
        js = range(-1, jm + 1)
    spec = f.rspectrum
    atol = NOISE_FLOOR * float(np.max(np.abs(f.samples))) if f.samples.size else 0.0
    out = {}
    for j in js:
        if j > jm:
            raise ValueError(f"block j={j} exceeds the resolvable band (j_max={jm})")
        if j <= -2:
            out[j] = 0.0
            continue
        mult = cutoffs.block_multiplier(grid, j)
        nz = np.nonzero(mult)[0]
        if nz.size == 0 or not np.any(spec[nz]):
            out[j] = 0.0
            continue
        blk = Field.from_rspectrum(grid, spec * mult)
        out[j] = refined_sup(blk, atol=atol) if (p == np.inf and refine) else lp_norm(blk, p)
    return out


@dataclass(frozen=True)
class BesovSpec:
    s: float
    p: float = np.inf
    r: float = 1.0

    def __post_init__(self):
        for name in ("p", "r"):
            v = getattr(self, name)
            if not (v == np.inf or v >= 1):
                raise ValueError(f"{name} must lie in [1, inf], got {v}")


def uncovered_energy(f: Field) -> float:
    """Relative spectral energy above :func:`coverage_radius`."""
    return spectral_energy_fraction(f, f.grid.rxi > coverage_radius(f.grid) * (1 + 1e-12))


def besov_norm(f: Field, spec: BesovSpec, cutoffs: LPCutoffs, *, max_uncovered: float = 1e-24) -> float:
    """Nonhomogeneous ``B^s_{p,r}`` norm from grid-quadrature block norms.

    Raises if the field carries energy the resolvable blocks cannot see; a
    silently truncated sum would understate the norm.
    """
    leak = uncovered_energy(f)
    if leak > max_uncovered:
        raise ValueError(
            f"field has relative spectral energy {leak:.2e} above the dyadic coverage "
            f"radius {coverage_radius(f.grid):.4g}; refine the grid")
    norms = block_norms(f, cutoffs, spec.p)
    weighted = np.array([2.0 ** (spec.s * j) * v for j, v in sorted(norms.items())])
    if spec.r == np.inf:
        return float(np.max(weighted, initial=0.0))
    return float(np.sum(weighted ** spec.r) ** (1.0 / spec.r))


def index_set(n: int) -> list:
    """``{k in 8N : n/4 <= k <= n/2}`` for ``n`` in 16N."""
    if n < 16 or n % 16:
        raise ValueError(f"n must lie in 16N = {{16, 32, ...}}, got {n}")
    return [k for k in range(8, n // 2 + 1, 8) if 4 * k >= n]


def restricted_norm(f: Field, k: int, n: int | None, cutoffs: LPCutoffs, indices=None) -> float:
    """``sum_{j in index set} 2^{k j} ||Delta_j f||_inf`` with ``k`` in {0, 1}."""
    if k not in (0, 1):
        raise ValueError("restricted norm is defined for k in {0, 1}")
    js = list(indices) if indices is not None else index_set(n)
    jm = j_max(f.grid)
    if max(js) > jm:
        raise ValueError(f"index set reaches j={max(js)} beyond the resolvable band j_max={jm}")
    norms = block_norms(f, cutoffs, np.inf, js)
    return float(sum(2.0 ** (k * j) * norms[j] for j in js))


def _support_mask(grid: Grid, lam: float, kind: str) -> np.ndarray:
    r = grid.rxi
    if kind == "ball":
        return r <= BALL_RADIUS * lam * (1 + 1e-12)
    if kind == "annulus":
        return (r >= ANNULUS_INNER * lam * (1 - 1e-12)) & (r <= ANNULUS_OUTER * lam * (1 + 1e-12))
    raise ValueError(f"kind must be 'ball' or 'annulus', got {kind!r}")


def bernstein_check(f: Field, lam: float, k: int, p=np.inf, q=np.inf, *, kind="annulus",
                    budget: float = 4.0, declaration_tol: float = 1e-8) -> dict:
    """Measure the Bernstein ratios for ``f`` supported in ``lam*B`` or ``lam*C``.

    ``budget`` plays the role of the lemma's constant ``C``: the ball ratio must
    stay below ``C^{k+1}`` and the annulus ratio inside ``[C^{-k-1}, C^{k+1}]``.
    """
    if p > q:
        raise ValueError("Bernstein inequality needs p <= q")
    outside = spectral_energy_fraction(f, ~_support_mask(f.grid, lam, kind))
    if outside > declaration_tol:
        raise ValueError(
            f"spectral mass {outside:.2e} lies outside the declared {kind} of radius scale {lam}")
    fp = lp_norm(f, p)
    report = {"kind": kind, "lambda": lam, "k": k, "p": _jsonable(p), "q": _jsonable(q),
              "budget": budget, "outside_energy": outside, "grid": f.grid.describe()}
    if fp == 0.0:
        report.update(ratio=0.0, lower_ratio=0.0, passed=True)
        return report
    dk = derivative(f, k) if k > 0 else f
    inv = (lambda a: 0.0 if a == np.inf else 1.0 / a)
    if kind == "ball":
        ratio = lp_norm(dk, q) / (lam ** (k + inv(p) - inv(q)) * fp)
        report.update(ratio=ratio, passed=bool(ratio <= budget ** (k + 1)))
    else:
        ratio = lp_norm(dk, p) / (lam ** k * fp)
        report.update(ratio=ratio, lower_ratio=ratio,
                      passed=bool(budget ** (-k - 1) <= ratio <= budget ** (k + 1)))
    return report


def commutator_check(v: Field, f: Field, cutoffs: LPCutoffs, Q: int | None = None) -> dict:
    """LHS/RHS of the commutator estimate at ``p = p1 = inf``, ``r = 1``.

    LHS = sum_j 2^j ||v Delta_j f_x - Delta_j(v f_x)||_inf,
    RHS = ||v_x||_inf ||f||_{B^1_{inf,1}} + ||f_x||_inf ||v_x||_{B^0_{inf,1}}.
    """
    grid = f.grid
    fx = derivative(f, 1)
    vx = derivative(v, 1)
    vfx = v * fx
    lhs = 0.0
    per_block = {}
    for j in range(-1, j_max(grid) + 1):
        mult = cutoffs.block_multiplier(grid, j)
        a = v.samples * Field.from_rspectrum(grid, fx.rspectrum * mult).samples
        b = Field.from_rspectrum(grid, vfx.rspectrum * mult).samples
        c = float(np.max(np.abs(a - b)))
        per_block[j] = c
        lhs += 2.0 ** j * c
    rhs = (vx.sup() * besov_norm(f, BesovSpec(1, np.inf, 1), cutoffs)
           + fx.sup() * besov_norm(vx, BesovSpec(0, np.inf, 1), cutoffs))
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
    return {"lhs": lhs, "rhs": rhs, "ratio": ratio, "Q": Q,
            "blocks": {str(j): c for j, c in per_block.items()}, "grid": grid.describe()}


def _jsonable(p):
    return "inf" if p == np.inf else p
