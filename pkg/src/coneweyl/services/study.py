"""
Weyl-law studies: curvature -> coefficients -> assembly -> counts -> brackets -> report.
"""
import logging
import math
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import psutil
import pydantic
import scipy

from src.coneweyl import __version__
from src.coneweyl.cli.schemas import (CapGeometry, ConstantGeometry, CsvGeometry, GridSpec, StudyConfig,
                                      WeylReport, WeylRow)
from src.coneweyl.config import get_settings, override_settings, settings_dict
from src.coneweyl.errors import ConeWeylError, InvariantViolationError
from src.coneweyl.metrics import track_study_job
from src.coneweyl.services.bracketing import BracketResult, bracket_counts
from src.coneweyl.services.eigcount import count_below
from src.coneweyl.services.geometry import (CurvatureProfile, LoopCurve, cap_boundary, constant_profile,
                                            from_samples, geodesic_curvature, read_curve_csv, weyl_constant)
from src.coneweyl.services.modelop import (DEFAULT_RADIAL_BC, DiscretizedOperator, ModelCoefficients,
                                           ModelConstants, RadialBC, Side, StripGrid, assemble, default_r_max,
                                           make_model_coefficients)

logger = logging.getLogger(__name__)

RELATIVE_ERROR_FLOOR = 1e-12

HEADER_NOTE = (
    "Counts are eigenvalue counts of the effective half-strip operators. These bound the counting "
    "function of the Robin Laplacian only up to an unknown finite-rank correction, so only the slopes "
    "lambda*N are comparable with the predicted constant. Counts for coupling alpha at depth lambda are "
    "counts of the unit-coupling model at depth lambda/alpha^2. Bracket bounds treat the edge strip with a "
    "finite-difference count, so the upper bound depends on that grid."
)


def build_profiles(geometry: Sequence) -> List[Tuple[Optional[LoopCurve], CurvatureProfile]]:
    """One (curve, curvature profile) pair per boundary loop."""
    loops = []
    for spec in geometry:
        if isinstance(spec, CapGeometry):
            curve = cap_boundary(spec.theta0, spec.n_samples)
            loops.append((curve, geodesic_curvature(curve)))
        elif isinstance(spec, CsvGeometry):
            curve = from_samples(read_curve_csv(spec.path), spec.n_resample, spec.interior_point)
            loops.append((curve, geodesic_curvature(curve)))
        elif isinstance(spec, ConstantGeometry):
            loops.append((None, constant_profile(spec.kappa, spec.length, spec.n_samples)))
        else:
            raise TypeError(f"Unsupported geometry spec {type(spec).__name__}")
    return loops


def sides_for(side: str) -> List[Side]:
    if side == "Both":
        return [Side.Plus, Side.Minus]
    return [Side(side)]


def build_operator(profile: CurvatureProfile, side: Side, R: float, lambda_min: float, grid: GridSpec,
                   constants: Optional[ModelConstants] = None, r_max: Optional[float] = None,
                   r_max_factor: float = 3.0, bc_r: Optional[RadialBC] = None
                   ) -> Tuple[ModelCoefficients, DiscretizedOperator]:
    """Coefficients and matrix for one loop and side, truncated for the smallest depth of a study."""
    coeffs = make_model_coefficients(profile, side, R, constants)
    R_max = r_max or default_r_max(coeffs, lambda_min, r_max_factor)
    n_r = grid.n_r or max(8, int(math.ceil((R_max - R) / grid.h_r)))
    strip = StripGrid(R=R, R_max=R_max, n_r=n_r, n_s=grid.n_s, ell=coeffs.ell,
                      bc_r=bc_r or DEFAULT_RADIAL_BC[side])
    return coeffs, assemble(coeffs, strip)


def default_partition(coeffs: ModelCoefficients, lam: float, m: Optional[int] = None, n: Optional[int] = None,
                      M: Optional[float] = None) -> Tuple[int, int, float]:
    """Cell counts m = n = ceil(4/sqrt(lambda)) and cut-off M = sup(V + nu) + 1 unless given."""
    auto = max(2, int(math.ceil(4.0 / math.sqrt(lam))))
    return m or auto, n or auto, M or coeffs.sup_potential + 1.0


def _versions() -> Dict[str, str]:
    return {
        "coneweyl": __version__, "python": platform.python_version(), "numpy": np.__version__,
        "scipy": scipy.__version__, "pandas": pd.__version__, "pydantic": pydantic.VERSION,
    }


def weyl_study(config: StudyConfig) -> WeylReport:
    """Run a full study and reduce it into a WeylReport (rows in the config's λ order).

    The config's ``numerics`` overrides hold for this call only.
    """
    with override_settings(**config.numerics):
        return _run_study(config)


def _run_study(config: StudyConfig) -> WeylReport:
    started = time.time()
    settings = get_settings()
    workers = config.workers or settings.workers

    loops = build_profiles(config.geometry)
    profiles = [p for _, p in loops]
    predicted = weyl_constant(profiles, config.alpha)
    sides = sides_for(config.side)
    alpha_sq = config.alpha ** 2
    effective = {lam: lam / alpha_sq for lam in config.lambdas}
    lambda_min = min(effective.values())
    constants = ModelConstants(**config.constants.model_dump())
    logger.info("Study: %d loop(s), sides=%s, alpha=%g, predicted constant=%.6g",
                len(loops), [s.value for s in sides], config.alpha, predicted)

    def _assemble_job(key: Tuple[Side, int]):
        side, loop = key
        try:
            return build_operator(profiles[loop], side, config.R, lambda_min, config.grid, constants,
                                  config.r_max, config.r_max_factor)
        except ConeWeylError as e:
            track_study_job(side.value, "failed")
            raise e.with_context(side=side.value, loop=loop)

    def _count_job(key: Tuple[float, Side, int]) -> int:
        lam, side, loop = key
        try:
            result = count_below(operators[(side, loop)][1], -effective[lam])
        except ConeWeylError as e:
            track_study_job(side.value, "failed")
            raise e.with_context(**{"lambda": lam, "side": side.value})
        track_study_job(side.value, "ok")
        return result.count

    def _bracket_job(key: Tuple[float, Side, int]) -> BracketResult:
        lam, side, loop = key
        coeffs = operators[(side, loop)][0]
        m, n, M = default_partition(coeffs, effective[lam], config.bracketing.m, config.bracketing.n,
                                    config.bracketing.M)
        try:
            return bracket_counts(coeffs, effective[lam], m, n, M, workers=1)
        except ConeWeylError as e:
            raise e.with_context(**{"lambda": lam, "side": side.value})

    assembly_keys = [(side, loop) for side in sides for loop in range(len(loops))]
    job_keys = [(lam, side, loop) for lam in config.lambdas for side in sides for loop in range(len(loops))]
    timings: Dict[str, float] = {}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        t0 = time.time()
        operators = dict(zip(assembly_keys, pool.map(_assemble_job, assembly_keys)))
        timings["assembly"] = time.time() - t0
        t0 = time.time()
        counts = dict(zip(job_keys, pool.map(_count_job, job_keys)))
        timings["counting"] = time.time() - t0
        brackets: Dict[Tuple[float, Side, int], BracketResult] = {}
        if config.bracketing.enabled:
            t0 = time.time()
            brackets = dict(zip(job_keys, pool.map(_bracket_job, job_keys)))
            timings["bracketing"] = time.time() - t0

    rows = []
    for lam in config.lambdas:
        per_side = {side: sum(counts[(lam, side, loop)] for loop in range(len(loops))) for side in sides}
        count_plus = per_side.get(Side.Plus, per_side.get(Side.Custom))
        count_minus = per_side.get(Side.Minus)
        if count_plus is not None and count_minus is not None and count_plus > count_minus:
            raise InvariantViolationError(
                f"Upper-operator count {count_plus} exceeds lower-operator count {count_minus}",
                context={"lambda": lam},
            )
        available = [c for c in (count_plus, count_minus) if c is not None]
        slope = lam * float(np.mean(available))

        lower = upper = None
        if brackets:
            lower_side = sides[0]
            upper_side = Side.Minus if Side.Minus in sides else sides[0]
            lower = sum(brackets[(lam, lower_side, loop)].lower for loop in range(len(loops)))
            upper = sum(brackets[(lam, upper_side, loop)].upper for loop in range(len(loops)))

        rows.append(WeylRow(
            lam=lam, count_plus=count_plus, count_minus=count_minus, bracket_lower=lower, bracket_upper=upper,
            lambda_times_count=slope, predicted_constant=predicted,
            relative_error=abs(slope - predicted) / max(predicted, RELATIVE_ERROR_FLOOR),
        ))
        logger.info("lambda=%g: plus=%s minus=%s bracket=[%s, %s] lambda*N=%.5g", lam, count_plus, count_minus,
                    lower, upper, slope)

    matrices = [
        {"side": side.value, "loop": loop, "dim": op.dim, "nnz": op.nnz, **op.grid_summary(),
         "bc_r": op.grid.bc_r.value}
        for (side, loop), (_, op) in operators.items()
    ]
    bracket_info = [
        {"lambda": lam, "side": side.value, "loop": loop, "m": b.m, "n": b.n, "M": b.M,
         "edge_count": b.edge_count, "edge_grid": b.edge_grid, "edge_active_modes": b.edge_active_modes}
        for (lam, side, loop), b in brackets.items()
    ]
    metadata = {
        "config": config.model_dump(mode="json", by_alias=True),
        "versions": _versions(),
        "workers": workers,
        "numerics": settings_dict(),
        "matrices": matrices,
        "brackets": bracket_info,
        "loops": [{"length": p.length_ell, "kappa_plus_sq_integral": p.kappa_plus_sq_integral} for p in profiles],
        "wall_time": {**timings, "total": time.time() - started},
        "memory_rss_mb": psutil.Process().memory_info().rss / 1024 ** 2,
    }
    return WeylReport(rows=rows, predicted_constant=predicted, header_note=HEADER_NOTE, metadata=metadata)
