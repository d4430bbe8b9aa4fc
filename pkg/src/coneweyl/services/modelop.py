"""
Effective half-strip operators and their finite-volume discretization.

The quadratic form on (R, R_max) × (0, ℓ) is

    k(v) = ∫∫ a(r) v_r² + b(r)/r² v_s² − (V(s) + ν(r))/r · v²  dr ds.

Unknowns sit at cell centres of a uniform n_r × n_s grid, so the mass
matrix is the uniform scaling h_r·h_s and is folded into the matrix.
Dirichlet walls add the boundary flux 2·coefficient/h² to the adjacent
cells; Neumann walls add nothing.
"""
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
from scipy import sparse
from scipy.integrate import quad

from src.coneweyl.config import get_settings
from src.coneweyl.errors import CoefficientBoundError, DomainError, FileError, ResourceError
from src.coneweyl.metrics import track_assembly
from src.coneweyl.services.geometry import CurvatureProfile, periodic_integral

logger = logging.getLogger(__name__)

CoefficientFn = Callable[[np.ndarray], np.ndarray]


class Side(str, Enum):
    Plus = "Plus"
    Minus = "Minus"
    Custom = "Custom"


class RadialBC(str, Enum):
    DirichletBoth = "DirichletBoth"
    NeumannBoth = "NeumannBoth"
    DirichletInnerNeumannOuter = "DirichletInnerNeumannOuter"
    NeumannInnerDirichletOuter = "NeumannInnerDirichletOuter"

    @property
    def inner_dirichlet(self) -> bool:
        return self in (RadialBC.DirichletBoth, RadialBC.DirichletInnerNeumannOuter)

    @property
    def outer_dirichlet(self) -> bool:
        return self in (RadialBC.DirichletBoth, RadialBC.NeumannInnerDirichletOuter)


class STopology(str, Enum):
    Periodic = "Periodic"
    DirichletEnds = "DirichletEnds"
    NeumannEnds = "NeumannEnds"


# Form domains: H¹₀ at the inner radius for the upper operator, H¹ for the lower one.
DEFAULT_RADIAL_BC = {
    Side.Plus: RadialBC.DirichletBoth,
    Side.Minus: RadialBC.NeumannInnerDirichletOuter,
    Side.Custom: RadialBC.DirichletBoth,
}


@dataclass(frozen=True)
class ModelConstants:
    aplus: float = 1.0
    aminus: float = 1.0
    A: float = 1.0
    CG: float = 1.0

    def __post_init__(self):
        for name in ("aplus", "aminus", "A", "CG"):
            if getattr(self, name) <= 0:
                raise DomainError(f"Model constant {name} must be positive")


def _one(r):
    return np.ones_like(np.asarray(r, dtype=float))


def _zero(r):
    return np.zeros_like(np.asarray(r, dtype=float))


@dataclass(frozen=True, eq=False)
class ModelCoefficients:
    a_fn: CoefficientFn
    b_fn: CoefficientFn
    nu_fn: CoefficientFn
    V: np.ndarray
    s_grid: np.ndarray
    R: float
    ell: float
    side: Side
    const_aplus: float = 1.0
    const_aminus: float = 1.0
    const_A: float = 1.0
    const_CG: float = 1.0

    def V_at(self, s: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        return np.interp(np.mod(s, self.ell), self.s_grid, self.V, period=self.ell)

    @property
    def sup_V(self) -> float:
        return float(np.max(self.V))

    @property
    def sup_V_plus(self) -> float:
        return max(self.sup_V, 0.0)

    def sup_nu(self, r_start: Optional[float] = None) -> float:
        """sup of ν on [r_start, ∞); ν tends to 0 at infinity."""
        r = np.geomspace(r_start or self.R, get_settings().limit_radius, 4000)
        return max(float(np.max(self.nu_fn(r))), 0.0)

    @property
    def sup_potential(self) -> float:
        """sup (V + ν) over the half-strip."""
        return self.sup_V + self.sup_nu()

    def check_invariants(self) -> None:
        settings = get_settings()
        r = np.geomspace(self.R, settings.limit_radius, 4000)
        a, b = self.a_fn(r), self.b_fn(r)
        if np.min(a) < settings.a_min or np.min(b) < settings.b_min:
            raise CoefficientBoundError(
                f"Coefficients not bounded below on [R, inf): min a={np.min(a):.4g}, min b={np.min(b):.4g}",
                context={"side": self.side.value, "R": self.R},
            )
        far = np.array([settings.limit_radius])
        if (abs(self.a_fn(far)[0] - 1.0) > settings.limit_tol or abs(self.b_fn(far)[0] - 1.0) > settings.limit_tol
                or abs(self.nu_fn(far)[0]) > settings.limit_tol):
            raise CoefficientBoundError("Coefficients do not approach a=b=1, nu=0 at large r",
                                        context={"side": self.side.value})


def make_model_coefficients(profile: CurvatureProfile, side: Side, R: float,
                            constants: Optional[ModelConstants] = None,
                            a_fn: Optional[CoefficientFn] = None,
                            b_fn: Optional[CoefficientFn] = None,
                            nu_fn: Optional[CoefficientFn] = None) -> ModelCoefficients:
    """Coefficients of the upper (Plus), lower (Minus) or a user-defined (Custom) model form."""
    side = Side(side)
    if R < 1.0:
        raise DomainError(f"Inner radius R must be at least 1, got {R}")
    c = constants or ModelConstants()

    if side == Side.Plus:
        a_fn = _one
        b_fn = lambda r: 1.0 + c.aplus * np.power(r, -0.75)
        nu_fn = lambda r: -c.aplus * np.power(r, -0.5)
    elif side == Side.Minus:
        a_fn = lambda r: 1.0 - c.A * np.power(r, -1.5)
        b_fn = lambda r: 1.0 - c.CG * np.power(r, -0.75)
        nu_fn = lambda r: c.aminus / np.asarray(r, dtype=float)
    else:
        a_fn = a_fn or _one
        b_fn = b_fn or _one
        nu_fn = nu_fn or _zero

    coeffs = ModelCoefficients(
        a_fn=a_fn, b_fn=b_fn, nu_fn=nu_fn,
        V=np.asarray(profile.kappa, dtype=float), s_grid=np.asarray(profile.arc_grid, dtype=float),
        R=float(R), ell=float(profile.length_ell), side=side,
        const_aplus=c.aplus, const_aminus=c.aminus, const_A=c.A, const_CG=c.CG,
    )
    coeffs.check_invariants()
    return coeffs


@dataclass(frozen=True)
class StripGrid:
    R: float
    R_max: float
    n_r: int
    n_s: int
    ell: float
    bc_r: RadialBC = RadialBC.DirichletBoth
    s_topology: STopology = STopology.Periodic

    def __post_init__(self):
        if not self.R_max > self.R:
            raise DomainError(f"R_max={self.R_max} must exceed R={self.R}")
        if self.n_r < 1 or self.n_s < 1:
            raise DomainError("n_r and n_s must be positive")
        object.__setattr__(self, "bc_r", RadialBC(self.bc_r))
        object.__setattr__(self, "s_topology", STopology(self.s_topology))

    @property
    def h_r(self) -> float:
        return (self.R_max - self.R) / self.n_r

    @property
    def h_s(self) -> float:
        return self.ell / self.n_s

    @property
    def dim(self) -> int:
        return self.n_r * self.n_s

    def r_centres(self) -> np.ndarray:
        return self.R + (np.arange(self.n_r) + 0.5) * self.h_r

    def s_centres(self) -> np.ndarray:
        return (np.arange(self.n_s) + 0.5) * self.h_s

    def summary(self) -> dict:
        return {"n_r": self.n_r, "n_s": self.n_s, "R_max": self.R_max}


@dataclass(frozen=True, eq=False)
class DiscretizedOperator:
    """Symmetric matrix of the discretized form; lower triangle in coordinate storage."""
    dim: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    grid: Optional[StripGrid] = None
    mass_scaling: float = 1.0
    label: str = field(default="")

    @property
    def nnz(self) -> int:
        return len(self.values)

    @cached_property
    def csr(self) -> sparse.csr_matrix:
        lower = sparse.coo_matrix((self.values, (self.rows, self.cols)), shape=(self.dim, self.dim)).tocsr()
        strict = sparse.tril(lower, k=-1)
        return (lower + strict.T).tocsr()

    def diagonal(self) -> np.ndarray:
        return self.csr.diagonal()

    def norm1(self) -> float:
        return float(abs(self.csr).sum(axis=0).max())

    def grid_summary(self) -> dict:
        return self.grid.summary() if self.grid is not None else {"n_r": None, "n_s": None, "R_max": None}

    @classmethod
    def from_sparse(cls, matrix, grid: Optional[StripGrid] = None, label: str = "") -> "DiscretizedOperator":
        """Wrap a symmetric sparse (or dense) matrix; only its lower triangle is kept."""
        lower = sparse.tril(sparse.coo_matrix(matrix)).tocoo()
        lower.sum_duplicates()
        return cls(dim=matrix.shape[0], rows=lower.row.astype(np.int64), cols=lower.col.astype(np.int64),
                   values=lower.data.astype(float), grid=grid, label=label)


def default_r_max(coeffs: ModelCoefficients, lambda_min: float, factor: float = 3.0) -> float:
    """Truncation radius R + factor·max(sup V₊, 1)/λ_min."""
    if lambda_min <= 0:
        raise DomainError("lambda_min must be positive")
    return coeffs.R + factor * max(coeffs.sup_V_plus, 1.0) / lambda_min


def assemble(coeffs: ModelCoefficients, grid: StripGrid) -> DiscretizedOperator:
    """Five-point finite-volume matrix of the model form on the truncated strip."""
    if abs(grid.R - coeffs.R) > 1e-12 * coeffs.R:
        raise DomainError(f"Grid inner radius {grid.R} differs from coefficient radius {coeffs.R}")
    if abs(grid.ell - coeffs.ell) > 1e-9 * coeffs.ell:
        raise DomainError(f"Grid period {grid.ell} differs from the loop length {coeffs.ell}")
    settings = get_settings()
    if grid.dim > settings.max_unknowns:
        raise ResourceError(f"Grid {grid.n_r}x{grid.n_s} exceeds the cap of {settings.max_unknowns} unknowns")

    start = time.time()
    nr, ns = grid.n_r, grid.n_s
    hr, hs = grid.h_r, grid.h_s
    r = grid.r_centres()
    index = np.arange(nr * ns).reshape(nr, ns)

    diag = -(coeffs.V_at(grid.s_centres())[None, :] + coeffs.nu_fn(r)[:, None]) / r[:, None]
    rows, cols, vals = [], [], []

    if nr > 1:
        faces = grid.R + np.arange(1, nr) * hr
        wr = coeffs.a_fn(faces) / hr ** 2
        diag[:-1, :] += wr[:, None]
        diag[1:, :] += wr[:, None]
        rows.append(index[1:, :].ravel())
        cols.append(index[:-1, :].ravel())
        vals.append(np.repeat(-wr, ns))
    if grid.bc_r.inner_dirichlet:
        diag[0, :] += 2.0 * coeffs.a_fn(np.array([grid.R]))[0] / hr ** 2
    if grid.bc_r.outer_dirichlet:
        diag[-1, :] += 2.0 * coeffs.a_fn(np.array([grid.R_max]))[0] / hr ** 2

    ws = coeffs.b_fn(r) / (r ** 2 * hs ** 2)
    if ns > 1:
        diag[:, :-1] += ws[:, None]
        diag[:, 1:] += ws[:, None]
        rows.append(index[:, 1:].ravel())
        cols.append(index[:, :-1].ravel())
        vals.append(np.repeat(-ws, ns - 1))
    if grid.s_topology == STopology.Periodic and ns > 1:
        diag[:, -1] += ws
        diag[:, 0] += ws
        rows.append(index[:, -1])
        cols.append(index[:, 0])
        vals.append(-ws)
    elif grid.s_topology == STopology.DirichletEnds:
        diag[:, 0] += 2.0 * ws
        diag[:, -1] += 2.0 * ws

    rows.append(index.ravel())
    cols.append(index.ravel())
    vals.append(diag.ravel())
    lower = sparse.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                              shape=(nr * ns, nr * ns))
    lower.sum_duplicates()
    if not np.all(np.isfinite(lower.data)):
        raise DomainError("Assembled matrix has non-finite entries")

    op = DiscretizedOperator(dim=nr * ns, rows=lower.row.astype(np.int64), cols=lower.col.astype(np.int64),
                             values=lower.data, grid=grid, mass_scaling=hr * hs, label=coeffs.side.value)
    duration = time.time() - start
    track_assembly(coeffs.side.value, duration, op.dim)
    logger.debug("Assembled %s operator: dim=%d nnz=%d (%.3fs)", coeffs.side.value, op.dim, op.nnz, duration)
    return op


def export_coordinate_text(op: DiscretizedOperator, path: Union[str, Path]) -> Path:
    """Write 'dim nnz' then one 'i j value' row per stored (lower-triangle) entry."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as f:
            f.write(f"{op.dim} {op.nnz}\n")
            np.savetxt(f, np.column_stack([op.rows, op.cols, op.values]), fmt=["%d", "%d", "%.17g"])
    except OSError as e:
        raise FileError(f"Could not export matrix to {path}: {e}")
    return path


def phase_space_volume(coeffs: ModelCoefficients, lam: float, truncated: bool = False) -> float:
    """(1/4π) ∫∫ (V(s) − λ r)₊ dr ds: the semiclassical count at depth λ.

    The radial integral runs over r > 0, which is the R-independent value
    (1/8πλ)∫V₊² ds. With ``truncated`` it starts at the strip's inner radius R
    and carries the finite-R factor (1 − λR/V)².
    """
    if lam <= 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    start = coeffs.R if truncated else 0.0

    def _radial(v: float) -> float:
        top = v / lam
        if top <= start:
            return 0.0
        value, _ = quad(lambda r: v - lam * r, start, top, epsabs=1e-13, epsrel=1e-12)
        return value / (4.0 * np.pi)

    per_s = np.array([_radial(v) for v in coeffs.V])
    return periodic_integral(per_s, coeffs.s_grid, coeffs.ell)


def phase_space_closed_form(coeffs: ModelCoefficients, lam: float, truncated: bool = False) -> float:
    """(1/8πλ) ∫ (V − λR)₊² ds, with R = 0 unless ``truncated``."""
    if lam <= 0:
        raise DomainError(f"lambda must be positive, got {lam}")
    cut = lam * coeffs.R if truncated else 0.0
    integrand = np.maximum(coeffs.V - cut, 0.0) ** 2
    return periodic_integral(integrand, coeffs.s_grid, coeffs.ell) / (8.0 * np.pi * lam)
