"""
Dirichlet–Neumann bracketing of the model operator with frozen coefficients.

In the variable x = λ(r − R) the counting function at depth λ is the
number of eigenvalues ≤ −1 of the rescaled form on (0, ∞) × (0, ℓ).
Cutting at x = M and splitting (0, M) × (0, ℓ) into m × n cells gives

    Σ_{j≥2,k} N^D(cell) ≤ N(λ) ≤ Σ_{j≥2,k} N^N(cell) + N^N(edge strip),

and on each cell the coefficients are frozen at their extrema so the
eigenvalues are explicit and counting reduces to lattice points in an
ellipse.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.coneweyl.config import get_settings
from src.coneweyl.errors import (CoefficientBoundError, DomainError, FileError, HypothesisViolationError,
                                 InvariantViolationError, ResourceError)
from src.coneweyl.metrics import track_bracket
from src.coneweyl.services.eigcount import count_tridiagonal_below
from src.coneweyl.services.geometry import periodic_integral
from src.coneweyl.services.modelop import ModelCoefficients

logger = logging.getLogger(__name__)


class FrozenSide(str, Enum):
    DirichletFrozen = "DirichletFrozen"
    NeumannFrozen = "NeumannFrozen"


def ellipse_lattice_count(A: float, B: float, C: float, lam: float, include_zero: bool,
                          budget: Optional[int] = None) -> int:
    """#{(κ, τ) ∈ N²: κ²/A² + τ²/B² ≤ C/λ} with N = ℕ or ℕ* (exact enumeration)."""
    if lam <= 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    if A <= 0 or B <= 0:
        raise DomainError("A and B must be positive")
    # C ≤ 0 is an empty cell: nothing is counted, the origin included
    if C <= 0:
        return 0
    budget = budget or get_settings().lattice_budget
    level = C / lam
    kappa_max = int(np.floor(A * np.sqrt(level))) + 1
    tau_max = int(np.floor(B * np.sqrt(level))) + 1
    if float(kappa_max + 1) * float(tau_max + 1) > budget:
        raise ResourceError(
            f"Lattice enumeration of about {(kappa_max + 1) * (tau_max + 1):.3g} candidates exceeds the budget; "
            f"asymptotic count is pi*A*B*C/(4*lambda) = {np.pi * A * B * C / (4 * lam):.6g}"
        )
    start = 0 if include_zero else 1
    kappa = np.arange(start, kappa_max + 1, dtype=np.float64)
    inside = kappa * kappa / (A * A) <= level
    kappa = kappa[inside]
    if kappa.size == 0:
        return 0
    rest = level - kappa * kappa / (A * A)
    tau = np.floor(B * np.sqrt(np.maximum(rest, 0.0)))
    # floor of a rounded square root can be off by one either way
    up = kappa * kappa / (A * A) + (tau + 1) * (tau + 1) / (B * B) <= level
    tau = np.where(up, tau + 1, tau)
    down = kappa * kappa / (A * A) + tau * tau / (B * B) > level
    tau = np.where(down, tau - 1, tau)
    per_row = tau - start + 1
    return int(np.sum(np.maximum(per_row, 0)))


@dataclass(frozen=True)
class FrozenCell:
    """Frozen coefficients of one cell: Λ = aλπ²m²/M²κ² + b/(x_b+λR)²·λπ²n²/ℓ²τ² − P/(x_p+λR)."""
    a: float
    b: float
    x_b: float
    x_p: float
    P: float
    include_zero: bool


@dataclass(frozen=True, eq=False)
class BracketPartition:
    m: int
    n: int
    M: float
    lam: float
    coeffs: ModelCoefficients

    def __post_init__(self):
        if self.m < 2 or self.n < 2:
            raise DomainError(f"m and n must be at least 2, got m={self.m}, n={self.n}")
        if self.lam <= 0:
            raise DomainError(f"lambda must be positive, got {self.lam}")
        sup = self.coeffs.sup_potential
        if not self.M > sup:
            raise HypothesisViolationError(
                f"Cut-off M={self.M} must exceed sup(V + nu)={sup:.6g} on the half-strip",
                context={"M": self.M, "lambda": self.lam},
            )

    def x_minus(self, j: int) -> float:
        return (j - 1) * self.M / self.m

    def x_plus(self, j: int) -> float:
        return j * self.M / self.m

    def _x_samples(self, j_values: np.ndarray) -> np.ndarray:
        t = np.linspace(0.0, 1.0, get_settings().extrema_samples)
        lo = (j_values - 1) * self.M / self.m
        return lo[:, None] + t[None, :] * (self.M / self.m)

    @cached_property
    def radial_extrema(self) -> Dict[str, np.ndarray]:
        """Min/max of a_λ, b_λ, ν_λ on every x-cell j = 1..m (index j − 1)."""
        x = self._x_samples(np.arange(1, self.m + 1))
        r = self.coeffs.R + x / self.lam
        a, b, nu = self.coeffs.a_fn(r), self.coeffs.b_fn(r), self.coeffs.nu_fn(r)
        return {
            "a_min": a.min(axis=1), "a_max": a.max(axis=1),
            "b_min": b.min(axis=1), "b_max": b.max(axis=1),
            "nu_min": nu.min(axis=1), "nu_max": nu.max(axis=1),
        }

    @cached_property
    def potential_extrema(self) -> Tuple[np.ndarray, np.ndarray]:
        """Min/max of V on every s-cell k = 1..n (index k − 1), including profile nodes."""
        ell = self.coeffs.ell
        v_min = np.empty(self.n)
        v_max = np.empty(self.n)
        t = np.linspace(0.0, 1.0, get_settings().extrema_samples)
        for k in range(self.n):
            lo, hi = k * ell / self.n, (k + 1) * ell / self.n
            nodes = self.coeffs.s_grid[(self.coeffs.s_grid >= lo) & (self.coeffs.s_grid <= hi)]
            values = self.coeffs.V_at(np.concatenate([lo + t * (hi - lo), nodes]))
            v_min[k], v_max[k] = values.min(), values.max()
        return v_min, v_max

    def cell(self, j: int, k: int, side: FrozenSide) -> FrozenCell:
        if j < 2 or j > self.m:
            raise DomainError(f"Cell index j={j} outside 2..{self.m}; the j=1 strip is bounded by edge_strip_count")
        if k < 1 or k > self.n:
            raise DomainError(f"Cell index k={k} outside 1..{self.n}")
        ext = self.radial_extrema
        v_min, v_max = self.potential_extrema
        xm, xp = self.x_minus(j), self.x_plus(j)
        if FrozenSide(side) == FrozenSide.DirichletFrozen:
            P = v_min[k - 1] + ext["nu_min"][j - 1]
            return FrozenCell(a=ext["a_max"][j - 1], b=ext["b_max"][j - 1], x_b=xm,
                              x_p=xp if P >= 0 else xm, P=P, include_zero=False)
        P = v_max[k - 1] + ext["nu_max"][j - 1]
        return FrozenCell(a=ext["a_min"][j - 1], b=ext["b_min"][j - 1], x_b=xp,
                          x_p=xm if P >= 0 else xp, P=P, include_zero=True)


def frozen_cell_count(partition: BracketPartition, j: int, k: int, side: FrozenSide) -> int:
    """Eigenvalues ≤ −1 of the frozen form on cell (j, k)."""
    cell = partition.cell(j, k, side)
    lam, R = partition.lam, partition.coeffs.R
    C = cell.P / (cell.x_p + lam * R) - 1.0
    A = partition.M / (np.pi * partition.m * np.sqrt(cell.a))
    B = partition.coeffs.ell * (cell.x_b + lam * R) / (np.pi * partition.n * np.sqrt(cell.b))
    return ellipse_lattice_count(A, B, C, lam, include_zero=cell.include_zero)


@dataclass
class EdgeStripBound:
    count: int
    active_modes: int
    sigma: float
    rho: float
    grid: int
    per_mode: list = field(default_factory=list)


def _edge_parameters(partition: BracketPartition) -> Tuple[float, float]:
    ext = partition.radial_extrema
    sigma = float(min(ext["a_min"][0], ext["b_min"][0]))
    rho = partition.coeffs.sup_V + float(ext["nu_max"][0])
    return sigma, rho


def edge_mode_count(partition: BracketPartition, mu: float, sigma: float, grid: Optional[int] = None) -> int:
    """𝒩(L, −1) for L = −σλ d²/dx² + μ/(x + λR) on (0, M/m), Neumann ends, lumped finite differences."""
    grid = grid or get_settings().edge_grid
    lam, R = partition.lam, partition.coeffs.R
    h = partition.M / partition.m / grid
    x = np.arange(grid + 1) * h
    mass = np.full(grid + 1, h)
    mass[[0, -1]] = h / 2.0
    stiff = np.full(grid + 1, 2.0 * sigma * lam / h)
    stiff[[0, -1]] = sigma * lam / h
    inv_sqrt = 1.0 / np.sqrt(mass)
    diag = stiff / mass + mu / (x + lam * R)
    off = -(sigma * lam / h) * inv_sqrt[:-1] * inv_sqrt[1:]
    return count_tridiagonal_below(diag, off, -1.0)


def edge_strip_bound(partition: BracketPartition) -> EdgeStripBound:
    """Neumann count of the strip (0, M/m) × (0, ℓ), bounded mode by mode in s."""
    settings = get_settings()
    sigma, rho = _edge_parameters(partition)
    if sigma <= 0:
        raise CoefficientBoundError(f"Edge strip coefficient bound sigma={sigma:.4g} is not positive")
    lam, m, M, R, ell = partition.lam, partition.m, partition.M, partition.coeffs.R, partition.coeffs.ell
    weight = sigma * lam * m / (M + lam * m * R)
    total, active, per_mode = 0, 0, []
    j = 0
    while True:
        mu = weight * (np.pi * j / ell) ** 2 - rho
        if mu >= 0:
            break
        active += 1
        modes = edge_mode_count(partition, mu, sigma, settings.edge_grid)
        per_mode.append(modes)
        total += modes
        j += 1
    return EdgeStripBound(count=total, active_modes=active, sigma=sigma, rho=rho, grid=settings.edge_grid,
                          per_mode=per_mode)


def edge_strip_count(partition: BracketPartition) -> int:
    return edge_strip_bound(partition).count


@dataclass
class BracketResult:
    lower: int
    upper: int
    edge_count: int
    per_cell: np.ndarray
    lam: float
    m: int
    n: int
    M: float
    edge_active_modes: int = 0
    edge_grid: int = 0
    wall_time: float = 0.0

    def check_invariants(self) -> None:
        if self.lower > self.upper:
            raise InvariantViolationError(f"Bracket lower={self.lower} exceeds upper={self.upper}")
        if self.lower != int(self.per_cell[:, 2].sum()) or self.upper != int(self.per_cell[:, 3].sum()) + self.edge_count:
            raise InvariantViolationError("Bracket totals do not match the per-cell counts")

    def cells_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.per_cell, columns=["j", "k", "dirichlet_count", "neumann_count"])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lambda": self.lam, "m": self.m, "n": self.n, "M": self.M,
            "lower": self.lower, "upper": self.upper, "edge_count": self.edge_count,
            "edge_active_modes": self.edge_active_modes, "edge_grid": self.edge_grid,
            "per_cell": [
                {"j": int(j), "k": int(k), "dirichlet_count": int(d), "neumann_count": int(nc)}
                for j, k, d, nc in self.per_cell
            ],
        }

    def write_cells_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            self.cells_frame().to_csv(path, index=False)
        except OSError as e:
            raise FileError(f"Could not write cell table to {path}: {e}")
        return path


def _row_counts(partition: BracketPartition, j: int) -> np.ndarray:
    rows = np.empty((partition.n, 4), dtype=np.int64)
    for k in range(1, partition.n + 1):
        rows[k - 1] = (j, k, frozen_cell_count(partition, j, k, FrozenSide.DirichletFrozen),
                       frozen_cell_count(partition, j, k, FrozenSide.NeumannFrozen))
    return rows


def bracket_counts(coeffs: ModelCoefficients, lam: float, m: int, n: int, M: float,
                   workers: Optional[int] = None) -> BracketResult:
    """Certified lower/upper counts at depth λ (up to the edge-strip discretization)."""
    start = time.time()
    partition = BracketPartition(m=m, n=n, M=M, lam=lam, coeffs=coeffs)
    # warm the shared extrema before fanning out
    _ = partition.radial_extrema, partition.potential_extrema
    j_values = range(2, m + 1)
    workers = workers if workers is not None else get_settings().workers
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda j: _row_counts(partition, j), j_values))
    else:
        rows = [_row_counts(partition, j) for j in j_values]
    per_cell = np.vstack(rows)
    edge = edge_strip_bound(partition)

    result = BracketResult(
        lower=int(per_cell[:, 2].sum()), upper=int(per_cell[:, 3].sum()) + edge.count, edge_count=edge.count,
        per_cell=per_cell, lam=lam, m=m, n=n, M=M, edge_active_modes=edge.active_modes, edge_grid=edge.grid,
    )
    result.check_invariants()
    result.wall_time = time.time() - start
    track_bracket(result.wall_time, len(per_cell), edge.active_modes)
    logger.info("Bracket at lambda=%g (m=%d, n=%d, M=%g): lower=%d upper=%d edge=%d",
                lam, m, n, M, result.lower, result.upper, result.edge_count)
    return result


def weyl_riemann_sums(partition: BracketPartition) -> Dict[str, float]:
    """Cell weight sums Σ W±(j, k) and the integral ∫₀^M∫₀^ℓ (V − x)₊ they approximate."""
    v_min, v_max = partition.potential_extrema
    j = np.arange(2, partition.m + 1)
    xm = (j - 1) * partition.M / partition.m
    xp = j * partition.M / partition.m
    area = partition.M * partition.coeffs.ell / (partition.m * partition.n)
    w_plus = area * np.maximum(v_min[None, :] - xp[:, None], 0.0) * (xm / xp)[:, None]
    w_minus = area * np.maximum(v_max[None, :] - xm[:, None], 0.0) * (xp / xm)[:, None]

    cut = np.clip(partition.coeffs.V, 0.0, partition.M)
    inner = cut * partition.coeffs.V - cut ** 2 / 2.0
    integral = periodic_integral(inner, partition.coeffs.s_grid, partition.coeffs.ell)
    return {"lower_sum": float(w_plus.sum()), "upper_sum": float(w_minus.sum()), "integral": integral}
