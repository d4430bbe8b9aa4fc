"""
Boundary loops of spherical cross-sections and their geodesic curvature.

A loop is stored as uniformly spaced samples of an arc-length
parametrization Γ(s) on the unit sphere. The outer normal of the
cross-section is n = Γ × Γ′ and the geodesic curvature is the mixed
product κ = [Γ″, Γ′, Γ].
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.integrate import cumulative_trapezoid, trapezoid
from scipy.interpolate import CubicSpline

from src.coneweyl.config import get_settings
from src.coneweyl.errors import DomainError, FileError, GeometryError

logger = logging.getLogger(__name__)

MIN_SAMPLES = 8
_SIDE_TOL = 1e-10
_CROSS_BLOCK_ELEMENTS = 1 << 22


@dataclass(frozen=True, eq=False)
class LoopCurve:
    """Closed curve on S², sampled at equal arc-length steps (no repeated endpoint)."""
    points: np.ndarray
    length_ell: float
    is_closed: bool = True

    @property
    def n_samples(self) -> int:
        return len(self.points)

    @property
    def step(self) -> float:
        return self.length_ell / self.n_samples

    @property
    def arc_grid(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.step

    def chords(self) -> np.ndarray:
        return np.linalg.norm(np.roll(self.points, -1, axis=0) - self.points, axis=1)

    def check_invariants(self) -> None:
        settings = get_settings()
        norms = np.linalg.norm(self.points, axis=1)
        if np.max(np.abs(norms - 1.0)) > settings.unit_norm_tol:
            raise GeometryError("Loop samples are not on the unit sphere")
        chords = self.chords()
        spread = (chords.max() - chords.min()) / chords.mean()
        if spread > settings.chord_tol:
            raise GeometryError(f"Loop samples are not uniformly spaced (chord spread {spread:.3e})")
        if not self.is_closed or self.length_ell <= 0:
            raise GeometryError("Loop must be closed with positive length")


@dataclass(frozen=True, eq=False)
class CurvatureProfile:
    """Sampled geodesic curvature κ(s) of one loop."""
    kappa: np.ndarray
    arc_grid: np.ndarray
    length_ell: float
    kappa_plus_sq_integral: float = field(default=float("nan"))

    def __post_init__(self):
        if len(self.kappa) != len(self.arc_grid):
            raise DomainError("kappa and arc_grid must have the same length")
        if np.isnan(self.kappa_plus_sq_integral):
            object.__setattr__(self, "kappa_plus_sq_integral", periodic_integral(
                np.maximum(self.kappa, 0.0) ** 2, self.arc_grid, self.length_ell))

    @property
    def kappa_max_abs(self) -> float:
        return float(np.max(np.abs(self.kappa)))

    def kappa_at(self, s: Union[float, np.ndarray]) -> Union[float, np.ndarray]:
        """Periodic linear interpolation of κ."""
        return np.interp(np.mod(s, self.length_ell), self.arc_grid, self.kappa, period=self.length_ell)

    def resampled(self, n: int) -> np.ndarray:
        """κ on a uniform grid of n points in [0, ℓ)."""
        return self.kappa_at(np.arange(n) * self.length_ell / n)

    def check_invariants(self) -> None:
        recomputed = periodic_integral(np.maximum(self.kappa, 0.0) ** 2, self.arc_grid, self.length_ell)
        if self.kappa_plus_sq_integral < 0 or abs(recomputed - self.kappa_plus_sq_integral) > 1e-12:
            raise GeometryError("kappa_plus_sq_integral does not match its quadrature")


def periodic_integral(values: np.ndarray, grid: np.ndarray, period: float) -> float:
    """Trapezoid rule over [0, period) for samples of a periodic function."""
    return float(trapezoid(np.append(values, values[0]), np.append(grid, period)))


def cap_boundary(theta0: float, n_samples: int) -> LoopCurve:
    """Boundary of the spherical cap {polar angle < theta0}.

    The loop is traversed clockwise seen from the north pole so that
    Γ × Γ′ is the outer normal of the cap and κ = cot(theta0).
    """
    if not 0.0 < theta0 < np.pi:
        raise DomainError(f"theta0 must lie in (0, pi), got {theta0}")
    if n_samples < MIN_SAMPLES:
        raise DomainError(f"n_samples must be at least {MIN_SAMPLES}, got {n_samples}")

    radius = np.sin(theta0)
    length = 2.0 * np.pi * radius
    psi = 2.0 * np.pi * np.arange(n_samples) / n_samples
    points = np.column_stack([
        radius * np.cos(psi),
        -radius * np.sin(psi),
        np.full(n_samples, np.cos(theta0)),
    ])
    return LoopCurve(points=points, length_ell=float(length))


def _straddle(normals: np.ndarray, first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """[i, j]: the endpoints first[j], second[j] lie strictly on opposite sides of great circle i."""
    a = normals @ first.T
    b = normals @ second.T
    # points on (or numerically on) the great circle of a segment never straddle it
    a[np.abs(a) < _SIDE_TOL] = 0.0
    b[np.abs(b) < _SIDE_TOL] = 0.0
    return a * b < 0


def _segments_cross(points: np.ndarray, block_elements: int = _CROSS_BLOCK_ELEMENTS) -> bool:
    """True if two non-adjacent great-circle segments of the closed polygon cross.

    Segments are compared in row blocks so memory stays at block × n.
    """
    n = len(points)
    nxt = np.roll(points, -1, axis=0)
    normals = np.cross(points, nxt)
    normals /= np.linalg.norm(normals, axis=1)[:, None]
    mids = points + nxt
    idx = np.arange(n)
    block = max(1, block_elements // n)
    for lo in range(0, n, block):
        rows = slice(lo, min(lo + block, n))
        gap = np.abs(idx[rows, None] - idx[None, :])
        non_adjacent = (gap > 1) & (gap < n - 1)
        crossing = (_straddle(normals[rows], points, nxt)
                    & _straddle(normals, points[rows], nxt[rows]).T
                    & ((mids[rows] @ mids.T) > 0)
                    & non_adjacent)
        if crossing.any():
            return True
    return False


def _orient_towards(points: np.ndarray, interior_point: Sequence[float]) -> np.ndarray:
    interior = np.asarray(interior_point, dtype=float)
    interior = interior / np.linalg.norm(interior)
    tangents = np.roll(points, -1, axis=0) - np.roll(points, 1, axis=0)
    normals = np.cross(points, tangents)
    if np.mean(np.einsum("ij,ij->i", normals, interior - points)) > 0:
        logger.debug("Reversing loop so that the normal points out of the cross-section")
        return points[::-1].copy()
    return points


def from_samples(raw_points, n_resample: int, interior_point: Optional[Sequence[float]] = None) -> LoopCurve:
    """Build a LoopCurve from a user-supplied closed point sequence.

    Points are projected to the sphere, interpolated by a periodic cubic
    spline in cumulative chord length, reparametrized by arc length and
    resampled at n_resample equally spaced positions. If ``interior_point``
    is given, the loop is oriented so that Γ × Γ′ points away from it;
    otherwise the supplied order is kept.
    """
    settings = get_settings()
    pts = np.asarray(raw_points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise GeometryError("raw_points must be an (N, 3) array")
    if len(pts) > 1 and np.allclose(pts[0], pts[-1], atol=1e-14):
        pts = pts[:-1]
    if len(pts) < MIN_SAMPLES:
        raise GeometryError(f"At least {MIN_SAMPLES} points are required, got {len(pts)}")
    if n_resample < MIN_SAMPLES:
        raise DomainError(f"n_resample must be at least {MIN_SAMPLES}, got {n_resample}")
    norms = np.linalg.norm(pts, axis=1)
    if np.max(np.abs(norms - 1.0)) > settings.raw_norm_tol:
        raise GeometryError("Input points must lie within 1e-6 of the unit sphere")
    pts = pts / norms[:, None]

    chords = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    if chords.min() <= 1e-12 * max(chords.max(), 1e-300):
        raise GeometryError("Degenerate loop: repeated consecutive points or zero length")
    if _segments_cross(pts):
        raise GeometryError("Loop is self-intersecting")

    if interior_point is not None:
        pts = _orient_towards(pts, interior_point)
        chords = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)

    knots = np.concatenate([[0.0], np.cumsum(chords)])
    spline = CubicSpline(knots, np.vstack([pts, pts[:1]]), bc_type="periodic")
    period = knots[-1]

    dense_n = max(8192, 64 * len(pts), 32 * n_resample)
    u = np.linspace(0.0, period, dense_n + 1)
    gamma = spline(u)
    dgamma = spline(u, 1)
    norm = np.linalg.norm(gamma, axis=1)
    radial = np.einsum("ij,ij->i", gamma, dgamma) / norm ** 2
    speed = np.linalg.norm(dgamma - radial[:, None] * gamma, axis=1) / norm
    arc = cumulative_trapezoid(speed, u, initial=0.0)
    length = float(arc[-1])
    if length <= 0:
        raise GeometryError("Degenerate loop: zero length")

    def _points_at(s_positions: np.ndarray) -> np.ndarray:
        params = np.interp(s_positions, arc, u)
        p = spline(params)
        return p / np.linalg.norm(p, axis=1)[:, None]

    # equalize chords by fixed-point sweeps on the arc-length labels
    labels = np.arange(n_resample) * length / n_resample
    for _ in range(50):
        resampled = _points_at(labels)
        chord = np.linalg.norm(np.roll(resampled, -1, axis=0) - resampled, axis=1)
        spread = (chord.max() - chord.min()) / chord.mean()
        if spread <= 0.01 * settings.chord_tol:
            break
        gaps = np.diff(np.append(labels, length))
        deficit = gaps - chord
        target = (length - deficit.sum()) / n_resample
        labels = np.concatenate([[0.0], np.cumsum(target + deficit)[:-1]])

    curve = LoopCurve(points=resampled, length_ell=length)
    curve.check_invariants()
    logger.debug("Resampled loop: %d raw points -> %d samples, length %.6f", len(pts), n_resample, length)
    return curve


def geodesic_curvature(curve: LoopCurve) -> CurvatureProfile:
    """Mixed product [Γ″, Γ′, Γ] by periodic central differences.

    The product is divided by |Γ′|² of the difference quotient, which
    equals 1 in the continuum and keeps the scheme second order.
    """
    pts = curve.points
    h = curve.step
    fwd = np.roll(pts, -1, axis=0)
    bwd = np.roll(pts, 1, axis=0)
    d1 = (fwd - bwd) / (2.0 * h)
    d2 = (fwd - 2.0 * pts + bwd) / h ** 2
    mixed = np.einsum("ij,ij->i", d2, np.cross(d1, pts))
    kappa = mixed / np.einsum("ij,ij->i", d1, d1)
    return CurvatureProfile(kappa=kappa, arc_grid=curve.arc_grid, length_ell=curve.length_ell)


def constant_profile(kappa: float, length: float, n_samples: int = 256) -> CurvatureProfile:
    """Profile with constant curvature; models a flat potential V ≡ kappa on a loop of given length."""
    if length <= 0:
        raise DomainError("length must be positive")
    grid = np.arange(n_samples) * length / n_samples
    return CurvatureProfile(kappa=np.full(n_samples, float(kappa)), arc_grid=grid, length_ell=float(length))


def tube_metric(profile: CurvatureProfile, s: float, t: float) -> float:
    """Metric weight w(s, t) = cos t − κ(s) sin t of the boundary tube."""
    if t < 0:
        raise DomainError(f"t must be nonnegative, got {t}")
    kmax = profile.kappa_max_abs
    if kmax > 0 and t >= 1.0 / kmax:
        raise DomainError(f"t={t} exceeds the positivity bound 1/max|kappa|={1.0 / kmax:.6g}")
    w = float(np.cos(t) - np.sin(t) * profile.kappa_at(s))
    if w <= 0:
        raise DomainError(f"Tube metric is not positive at s={s}, t={t}")
    return w


def weyl_constant(profiles: Sequence[CurvatureProfile], alpha: float) -> float:
    """α²/(8π) Σ ∫ κ₊² ds over all boundary loops."""
    if alpha <= 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if len(profiles) == 0:
        raise DomainError("At least one curvature profile is required")
    total = sum(p.kappa_plus_sq_integral for p in profiles)
    return float(alpha ** 2 * total / (8.0 * np.pi))


def read_curve_csv(path: Union[str, Path]) -> np.ndarray:
    """Read boundary samples from a CSV with columns x, y, z."""
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FileError(f"Could not read curve file {path}: {e}")
    missing = [c for c in ("x", "y", "z") if c not in frame.columns]
    if missing:
        raise FileError(f"Curve file {path} lacks column(s): {', '.join(missing)}")
    return frame[["x", "y", "z"]].to_numpy(dtype=float)


def write_profile_csv(profile: CurvatureProfile, path: Union[str, Path]) -> Path:
    """Write (s, kappa) rows."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame({"s": profile.arc_grid, "kappa": profile.kappa}).to_csv(path, index=False, float_format="%.17g")
    except OSError as e:
        raise FileError(f"Could not write curvature profile to {path}: {e}")
    return path
