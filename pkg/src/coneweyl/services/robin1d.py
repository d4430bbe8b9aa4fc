"""
Ground state of the transversal Robin problem on (0, δ).

    −ψ″ = E ψ,   ψ′(0) + r ψ(0) = 0,   ψ(δ) = 0  or  ψ′(δ) = 0.

With t* the root of F(t) = rδ, F^D(t) = t coth t and F^N(t) = t tanh t,
the ground state energy is E1 = −(t*/δ)² and ψ is a hyperbolic sine or
cosine centred at δ. All hyperbolic expressions are evaluated in
exponentially scaled form so that rδ in the thousands stays finite.
"""
import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import sparse
from scipy.linalg import eigh_tridiagonal
from scipy.optimize import brentq, newton

from src.coneweyl.config import get_settings
from src.coneweyl.errors import ConsistencyError, DomainError, NoBoundStateError

logger = logging.getLogger(__name__)

DEFAULT_RHO = 0.75
_SERIES_CUTOFF = 1e-2


class BoundaryCondition(str, Enum):
    DirichletAtDelta = "DirichletAtDelta"
    NeumannAtDelta = "NeumannAtDelta"


@dataclass(frozen=True)
class DeltaLaw:
    """Interval length δ(r) = c·r^(−rho)."""
    c: float
    rho: float = DEFAULT_RHO

    def __post_init__(self):
        if not self.c > 0:
            raise DomainError(f"DeltaLaw.c must be positive, got {self.c}")
        if not 0.0 < self.rho <= 1.0:
            raise DomainError(f"DeltaLaw.rho must lie in (0, 1], got {self.rho}")

    def delta_at(self, r: float) -> float:
        return self.c * r ** (-self.rho)

    def d_delta(self, r: float) -> float:
        return -self.rho * self.delta_at(r) / r

    @classmethod
    def through(cls, r: float, delta: float, rho: float = DEFAULT_RHO) -> "DeltaLaw":
        """The law with exponent rho that passes through (r, delta)."""
        return cls(c=delta * r ** rho, rho=rho)


@dataclass(frozen=True)
class Robin1DSolution:
    bc: BoundaryCondition
    r: float
    delta: float
    k: float
    E1: float
    C_norm: float
    psi0_sq: float
    psidelta_sq: float
    dr_norm_sq: float
    t_star: float

    @property
    def beta(self) -> float:
        """Decay rate k·r of the eigenfunction."""
        return self.t_star / self.delta


def _sign(bc: BoundaryCondition) -> float:
    return -1.0 if bc == BoundaryCondition.DirichletAtDelta else 1.0


def _F(t: float, bc: BoundaryCondition) -> float:
    if bc == BoundaryCondition.DirichletAtDelta:
        if t < 1e-4:
            return 1.0 + t * t / 3.0
        return t / np.tanh(t)
    return t * np.tanh(t)


def _dF(t: float, bc: BoundaryCondition) -> float:
    if bc == BoundaryCondition.DirichletAtDelta:
        if t < 1e-4:
            return 2.0 * t / 3.0
        return 1.0 / np.tanh(t) - t / np.sinh(t) ** 2 if t < 350 else 1.0
    if t > 350:
        return 1.0
    return np.tanh(t) + t / np.cosh(t) ** 2


def _sinh_minus(T: float, sign: float) -> float:
    """sinh T + sign·T without cancellation for small T (sign = −1)."""
    if sign < 0 and T < _SERIES_CUTOFF:
        T3 = T ** 3
        return T3 / 6.0 + T3 * T * T / 120.0 + T3 * T ** 4 / 5040.0
    return np.sinh(T) + sign * T


def _den(T: float, sign: float) -> float:
    """e^T·den = 2(sinh T ± T), i.e. den = 1 − e^{−2T} ± 2T e^{−T}."""
    if T > 20.0:
        return -np.expm1(-2.0 * T) + sign * 2.0 * T * np.exp(-T)
    return 2.0 * np.exp(-T) * _sinh_minus(T, sign)


def _d_den(T: float, sign: float) -> float:
    """Derivative of den with respect to T."""
    edge = (1.0 + sign * np.exp(-T)) ** 2 if sign > 0 else np.expm1(-T) ** 2
    return -_den(T, sign) + edge


def _solve_root(q: float, bc: BoundaryCondition) -> float:
    settings = get_settings()
    t = brentq(lambda x: _F(x, bc) - q, 0.0, q + 2.0, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    try:
        polished = newton(lambda x: _F(x, bc) - q, t, fprime=lambda x: _dF(x, bc), tol=1e-15, maxiter=20)
        if abs(_F(polished, bc) - q) <= abs(_F(t, bc) - q):
            t = polished
    except (RuntimeError, ZeroDivisionError):
        logger.debug("Newton polish skipped for q=%g", q)
    residual = abs(_F(t, bc) - q)
    if residual > settings.root_tol * q:
        logger.warning("Root residual %.3e exceeds tolerance for r*delta=%g", residual, q)
    return float(t)


def _gauss_panels(delta: float, beta: float, nodes: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss–Legendre rule on [0, delta], graded towards t = 0 when beta·delta is large."""
    x, w = leggauss(nodes)
    breaks = [0.0]
    edge = 1.0 / beta
    while edge < delta and beta * delta > 8.0:
        breaks.append(edge)
        edge *= 4.0
    breaks.append(delta)
    ts, ws = [], []
    for a, b in zip(breaks[:-1], breaks[1:]):
        ts.append(0.5 * (b - a) * x + 0.5 * (b + a))
        ws.append(0.5 * (b - a) * w)
    return np.concatenate(ts), np.concatenate(ws)


def _psi(sol: Robin1DSolution, t: np.ndarray) -> np.ndarray:
    T = 2.0 * sol.t_star
    beta = sol.beta
    scale = np.sqrt(T / (sol.delta * _den(T, _sign(sol.bc))))
    return scale * (np.exp(-beta * t) + _sign(sol.bc) * np.exp(-beta * (2.0 * sol.delta - t)))


def _dpsi_dr(sol: Robin1DSolution, law: DeltaLaw, t: np.ndarray) -> np.ndarray:
    """Partial derivative of ψ(t; r) in r along the law δ = δ(r)."""
    r, delta, t_star = sol.r, sol.delta, sol.t_star
    sign = _sign(sol.bc)
    T = 2.0 * t_star
    beta = t_star / delta
    d_delta = law.d_delta(r)
    d_q = delta + r * d_delta
    d_t = d_q / _dF(t_star, sol.bc)
    d_T = 2.0 * d_t
    d_beta = d_t / delta - t_star * d_delta / delta ** 2
    den = _den(T, sign)
    scale = np.sqrt(T / (delta * den))
    dlog_scale = 0.5 * (d_T / T - d_delta / delta - _d_den(T, sign) * d_T / den)

    e1 = np.exp(-beta * t)
    e2 = np.exp(-beta * (2.0 * delta - t))
    psi = scale * (e1 + sign * e2)
    return dlog_scale * psi + scale * (
        -d_beta * t * e1 - sign * (d_beta * (2.0 * delta - t) + 2.0 * beta * d_delta) * e2
    )


def _dr_norm_sq(sol: Robin1DSolution, law: DeltaLaw) -> float:
    nodes, weights = _gauss_panels(sol.delta, sol.beta, get_settings().quadrature_nodes)
    return float(np.dot(weights, _dpsi_dr(sol, law, nodes) ** 2))


def solve_transversal(r: float, delta: float, bc: BoundaryCondition, law: Optional[DeltaLaw] = None) -> Robin1DSolution:
    """Closed-form ground state of the transversal problem.

    ``dr_norm_sq`` is taken along ``law``; without one, along the
    law δ ∝ r^(−3/4) through (r, delta).
    """
    bc = BoundaryCondition(bc)
    if r <= 0 or delta <= 0:
        raise DomainError(f"r and delta must be positive, got r={r}, delta={delta}")
    q = r * delta
    if bc == BoundaryCondition.DirichletAtDelta and q <= 1.0:
        raise NoBoundStateError(f"No bound state for Dirichlet at delta when r*delta={q:.6g} <= 1",
                                context={"r": r, "delta": delta})

    t_star = _solve_root(q, bc)
    k = t_star / q
    sign = _sign(bc)
    T = 2.0 * t_star
    den = _den(T, sign)
    c_sq = 4.0 * T * np.exp(-T) / (delta * den)
    front = -np.expm1(-T) if sign < 0 else 1.0 + np.exp(-T)
    psi0_sq = T / (delta * den) * front ** 2
    psidelta_sq = 0.0 if bc == BoundaryCondition.DirichletAtDelta else c_sq

    sol = Robin1DSolution(
        bc=bc, r=float(r), delta=float(delta), k=float(k), E1=-(k * r) ** 2,
        C_norm=float(np.sqrt(c_sq)), psi0_sq=float(psi0_sq), psidelta_sq=float(psidelta_sq),
        dr_norm_sq=0.0, t_star=t_star,
    )
    law = law or DeltaLaw.through(r, delta)
    return _with_dr_norm(sol, law)


def _with_dr_norm(sol: Robin1DSolution, law: DeltaLaw) -> Robin1DSolution:
    return replace(sol, dr_norm_sq=_dr_norm_sq(sol, law))


def solve_on_law(r: float, law: DeltaLaw, bc: BoundaryCondition) -> Robin1DSolution:
    return solve_transversal(r, law.delta_at(r), bc, law)


def root_derivative(r: float, law: DeltaLaw, bc: BoundaryCondition) -> float:
    """dk/dr along the law, from implicit differentiation of F(k r δ(r)) = r δ(r)."""
    sol = solve_on_law(r, law, bc)
    q = r * sol.delta
    d_q = sol.delta + r * law.d_delta(r)
    d_t = d_q / _dF(sol.t_star, sol.bc)
    return float((d_t * q - sol.t_star * d_q) / q ** 2)


def eigenfunction_value(sol: Robin1DSolution, t: float) -> float:
    """ψ(t) for 0 ≤ t ≤ δ."""
    if not 0.0 <= t <= sol.delta:
        raise DomainError(f"t={t} outside [0, {sol.delta}]")
    if sol.bc == BoundaryCondition.DirichletAtDelta and t == sol.delta:
        return 0.0
    return float(_psi(sol, np.asarray(t, dtype=float)))


def eigenfunction_values(sol: Robin1DSolution, t: np.ndarray) -> np.ndarray:
    """Vectorized ψ; the closed form is evaluated as is, also slightly beyond δ."""
    return _psi(sol, np.asarray(t, dtype=float))


def normalization(sol: Robin1DSolution) -> float:
    """∫₀^δ ψ² dt by graded Gauss–Legendre quadrature (equals 1 up to rounding)."""
    nodes, weights = _gauss_panels(sol.delta, sol.beta, get_settings().quadrature_nodes)
    return float(np.dot(weights, _psi(sol, nodes) ** 2))


def dr_norm(sol: Robin1DSolution, law: DeltaLaw) -> float:
    """‖∂_r ψ‖² on (0, δ) along the law δ(r)."""
    expected = law.delta_at(sol.r)
    if abs(sol.delta - expected) > 1e-10 * max(1.0, expected):
        raise ConsistencyError(
            f"delta={sol.delta} does not follow the law c*r^-rho={expected} at r={sol.r}",
            context={"c": law.c, "rho": law.rho},
        )
    value = _dr_norm_sq(sol, law)
    settings = get_settings()
    if sol.r >= settings.dr_norm_threshold:
        bound = settings.dr_norm_constant * sol.r ** (-2.0 * law.rho)
        if value > bound:
            logger.warning("dr_norm %.3e above %.3e at r=%g", value, bound, sol.r)
    return value


def fd_matrix_1d(r: float, delta: float, bc: BoundaryCondition, n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the symmetric finite-difference matrix.

    Nodes t_i = i·δ/n. The form ∫u′² − r·u(0)² uses the stiffness of
    piecewise-linear elements and a lumped mass (half weights at the ends);
    the Dirichlet node at δ is removed.
    """
    bc = BoundaryCondition(bc)
    if n < 64:
        raise DomainError(f"grid size must be at least 64, got {n}")
    h = delta / n
    size = n if bc == BoundaryCondition.DirichletAtDelta else n + 1
    stiff = np.full(size, 2.0 / h)
    stiff[0] = 1.0 / h - r
    mass = np.full(size, h)
    mass[0] = h / 2.0
    if bc == BoundaryCondition.NeumannAtDelta:
        stiff[-1] = 1.0 / h
        mass[-1] = h / 2.0
    inv_sqrt = 1.0 / np.sqrt(mass)
    diag = stiff * inv_sqrt ** 2
    off = -(1.0 / h) * inv_sqrt[:-1] * inv_sqrt[1:]
    return diag, off


def fd_sparse_1d(r: float, delta: float, bc: BoundaryCondition, n: int) -> sparse.csr_matrix:
    diag, off = fd_matrix_1d(r, delta, bc, n)
    return sparse.diags([off, diag, off], [-1, 0, 1], format="csr")


def fd_oracle_1d(r: float, delta: float, bc: BoundaryCondition, n: int) -> np.ndarray:
    """All eigenvalues (ascending) of the finite-difference transversal operator."""
    diag, off = fd_matrix_1d(r, delta, bc, n)
    return eigh_tridiagonal(diag, off, eigvals_only=True)


def trace_inequality_slack(f: Callable[[np.ndarray], np.ndarray], df: Callable[[np.ndarray], np.ndarray],
                           a: float, x: float, nodes: int = 128) -> float:
    """x‖f′‖² + (2/x)‖f‖² − f(0)² on (0, a); nonnegative for 0 < x ≤ a."""
    if not 0.0 < x <= a:
        raise DomainError(f"x must lie in (0, {a}], got {x}")
    t, w = leggauss(nodes)
    t = 0.5 * a * (t + 1.0)
    w = 0.5 * a * w
    norm_f = np.dot(w, f(t) ** 2)
    norm_df = np.dot(w, df(t) ** 2)
    return float(x * norm_df + 2.0 / x * norm_f - f(np.array([0.0]))[0] ** 2)
