"""
Exact eigenvalue counting for discretized operators.

By Sylvester's law of inertia, the number of eigenvalues of A below σ
equals the number of negative pivots in a symmetric factorization
P(A − σI)Pᵀ = LDLᵀ.
"""
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy import sparse
from scipy.linalg import eigvalsh, eigvalsh_tridiagonal, ldl
from scipy.sparse.linalg import ArpackNoConvergence, eigsh, splu

from src.coneweyl.config import get_settings
from src.coneweyl.errors import ConvergenceError, DomainError, ResourceError, ThresholdCollisionError
from src.coneweyl.metrics import track_count, track_eigensolver
from src.coneweyl.services.modelop import DiscretizedOperator

logger = logging.getLogger(__name__)


class CountMethod(str, Enum):
    Inertia = "Inertia"
    Lanczos = "Lanczos"
    Dense = "Dense"


@dataclass
class CountResult:
    lam: float
    count: int
    method: CountMethod
    grid_summary: Dict[str, Any] = field(default_factory=dict)
    wall_time: float = 0.0
    threshold: float = 0.0
    factorization: str = ""

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data["lambda"] = data.pop("lam")
        data["method"] = self.method.value
        data["grid"] = data.pop("grid_summary")
        return data

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def operator_from_matrix(matrix, label: str = "") -> DiscretizedOperator:
    """Wrap any symmetric matrix for counting."""
    if matrix.shape[0] != matrix.shape[1]:
        raise DomainError("Matrix must be square")
    return DiscretizedOperator.from_sparse(matrix, label=label)


def _collision(threshold: float, pivot: float) -> ThresholdCollisionError:
    return ThresholdCollisionError(
        f"Threshold {threshold!r} is numerically an eigenvalue (pivot {pivot:.3e}); "
        f"perturb it by +/-1e-9 and retry",
        threshold=threshold, pivot=pivot,
    )


def _dense_inertia(shifted: np.ndarray, threshold: float, tol: float) -> int:
    """Negative eigenvalues of D from LAPACK Bunch–Kaufman (1x1 and 2x2 blocks)."""
    _, d, _ = ldl(shifted, lower=True, hermitian=True)
    n = d.shape[0]
    negatives = 0
    i = 0
    while i < n:
        if i + 1 < n and d[i + 1, i] != 0.0:
            block_eigs = np.linalg.eigvalsh(d[i:i + 2, i:i + 2])
            smallest = float(np.min(np.abs(block_eigs)))
            negatives += int(np.sum(block_eigs < 0))
            i += 2
        else:
            smallest = abs(float(d[i, i]))
            negatives += int(d[i, i] < 0)
            i += 1
        if smallest < tol:
            raise _collision(threshold, smallest)
    return negatives


def _sparse_inertia(shifted: sparse.csc_matrix, threshold: float, tol: float) -> int:
    """Negative pivots of a symmetric-mode SuperLU factorization.

    Diagonal pivoting on a symmetric fill-reducing ordering keeps the row and
    column permutations equal, so U = D·Lᵀ and the signs of diag(U) give
    the inertia.
    """
    try:
        lu = splu(shifted, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.0,
                  options={"SymmetricMode": True})
    except RuntimeError as e:
        raise _collision(threshold, 0.0) from e
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise ThresholdCollisionError(
            f"Factorization at threshold {threshold!r} needed off-diagonal pivots; "
            f"perturb the threshold by +/-1e-9 and retry",
            threshold=threshold, pivot=0.0,
        )
    pivots = lu.U.diagonal()
    smallest = float(np.min(np.abs(pivots)))
    if smallest < tol:
        raise _collision(threshold, smallest)
    return int(np.sum(pivots < 0))


def count_below(op: DiscretizedOperator, threshold: float, strategy: str = "auto") -> CountResult:
    """Number of matrix eigenvalues ≤ threshold from the inertia of A − threshold·I.

    ``strategy`` is "auto", "dense" (LAPACK Bunch–Kaufman) or "sparse"
    (SuperLU in symmetric mode).
    """
    settings = get_settings()
    start = time.time()
    shifted = (op.csr - threshold * sparse.identity(op.dim, format="csr")).tocsc()
    scale = max(float(abs(shifted).sum(axis=0).max()), 1.0)
    tol = settings.pivot_tol * scale

    use_dense = strategy == "dense" or (strategy == "auto" and op.dim <= settings.dense_inertia_max_dim)
    if use_dense:
        count = _dense_inertia(shifted.toarray(), threshold, tol)
        factorization = "bunch-kaufman"
    else:
        count = _sparse_inertia(shifted, threshold, tol)
        factorization = "superlu-symmetric"

    duration = time.time() - start
    track_count(CountMethod.Inertia.value, duration)
    logger.debug("count_below(%s, %.6g) = %d via %s in %.3fs", op.label or "matrix", threshold, count,
                 factorization, duration)
    return CountResult(lam=-threshold, count=count, method=CountMethod.Inertia, grid_summary=op.grid_summary(),
                       wall_time=duration, threshold=threshold, factorization=factorization)


def count_tridiagonal_below(diag: np.ndarray, off: np.ndarray, threshold: float) -> int:
    """Eigenvalues ≤ threshold of a symmetric tridiagonal matrix (Sturm bisection)."""
    diag = np.asarray(diag, dtype=float)
    off = np.asarray(off, dtype=float)
    radius = np.zeros_like(diag)
    radius[:-1] += np.abs(off)
    radius[1:] += np.abs(off)
    lower = float(np.min(diag - radius)) - 1.0
    if threshold <= lower:
        return 0
    values = eigvalsh_tridiagonal(diag, off, select="v", select_range=(lower, threshold))
    return int(len(values))


def lowest_eigenpairs(op: DiscretizedOperator, k: int, threshold: float) -> List[Tuple[float, np.ndarray]]:
    """The k eigenpairs just above the shift, by shift-invert Lanczos; ascending."""
    if k < 1 or k > op.dim / 4:
        raise DomainError(f"k={k} must lie in [1, dim/4] for dim={op.dim}")
    settings = get_settings()
    norm = op.norm1()
    track_eigensolver("arpack-shift-invert")

    def _validated(values: np.ndarray, vectors: np.ndarray) -> Tuple[List[Tuple[float, np.ndarray]], int]:
        pairs, rejected = [], 0
        for idx in np.argsort(values):
            v = vectors[:, idx]
            residual = np.linalg.norm(op.csr @ v - values[idx] * v)
            if residual <= settings.residual_tol * norm:
                pairs.append((float(values[idx]), v))
            else:
                rejected += 1
        return pairs, rejected

    try:
        values, vectors = eigsh(op.csr.tocsc(), k=k, sigma=threshold, which="LA",
                                maxiter=settings.arpack_maxiter)
    except ArpackNoConvergence as e:
        partial, _ = _validated(e.eigenvalues, e.eigenvectors)
        raise ConvergenceError(f"Lanczos converged for {len(partial)} of {k} eigenpairs", partial=partial,
                               context={"shift": threshold})
    except RuntimeError as e:
        raise _collision(threshold, 0.0) from e

    pairs, rejected = _validated(values, vectors)
    if rejected:
        raise ConvergenceError(f"{rejected} eigenpair(s) failed the residual check", partial=pairs,
                               context={"shift": threshold})
    return pairs


def count_lanczos(op: DiscretizedOperator, threshold: float, k_start: int = 8) -> CountResult:
    """Count eigenvalues ≤ threshold from shift-invert Lanczos below the spectrum.

    Diagnostic only; the number of computed pairs grows until one lies above
    the threshold.
    """
    start = time.time()
    diag = op.diagonal()
    radius = np.asarray(abs(op.csr).sum(axis=1)).ravel() - np.abs(diag)
    shift = float(np.min(diag - radius)) - 1e-3
    k = max(1, k_start)
    while True:
        if k > op.dim / 4:
            raise ResourceError(f"Lanczos count needs more than dim/4={op.dim // 4} eigenpairs")
        pairs = lowest_eigenpairs(op, k, shift)
        if pairs[-1][0] > threshold:
            break
        k *= 2
    count = sum(1 for value, _ in pairs if value <= threshold)
    duration = time.time() - start
    track_count(CountMethod.Lanczos.value, duration)
    return CountResult(lam=-threshold, count=count, method=CountMethod.Lanczos, grid_summary=op.grid_summary(),
                       wall_time=duration, threshold=threshold, factorization="arpack")


def dense_oracle(op: DiscretizedOperator) -> np.ndarray:
    """Full spectrum (ascending) of a small operator."""
    settings = get_settings()
    if op.dim > settings.dense_oracle_max_dim:
        raise ResourceError(f"Dense oracle limited to dim <= {settings.dense_oracle_max_dim}, got {op.dim}")
    track_eigensolver("lapack-dense")
    return eigvalsh(op.csr.toarray())


def count_dense(op: DiscretizedOperator, threshold: float) -> CountResult:
    start = time.time()
    count = int(np.sum(dense_oracle(op) <= threshold))
    duration = time.time() - start
    track_count(CountMethod.Dense.value, duration)
    return CountResult(lam=-threshold, count=count, method=CountMethod.Dense, grid_summary=op.grid_summary(),
                       wall_time=duration, threshold=threshold, factorization="lapack-syevd")
