"""
Prometheus metrics for the counting pipeline.
"""
from pathlib import Path
from typing import Union

from prometheus_client import Counter, Histogram, Gauge, generate_latest, REGISTRY

# Assembly Metrics
ASSEMBLIES_TOTAL = Counter(
    'coneweyl_assemblies_total',
    'Total model-operator matrices assembled',
    ['side']
)

ASSEMBLY_DURATION = Histogram(
    'coneweyl_assembly_duration_seconds',
    'Model-operator assembly duration in seconds',
    ['side']
)

MATRIX_DIMENSION = Gauge(
    'coneweyl_last_matrix_dimension',
    'Dimension of the most recently assembled matrix'
)

# Counting Metrics
FACTORIZATIONS_TOTAL = Counter(
    'coneweyl_factorizations_total',
    'Total inertia factorizations',
    ['method']
)

COUNT_DURATION = Histogram(
    'coneweyl_count_duration_seconds',
    'Eigenvalue counting duration in seconds',
    ['method']
)

EIGENSOLVER_CALLS = Counter(
    'coneweyl_eigensolver_calls_total',
    'Total eigensolver invocations',
    ['solver']
)

# Bracketing Metrics
BRACKET_CELLS = Counter(
    'coneweyl_bracket_cells_total',
    'Total frozen cells counted',
    ['kind']
)

BRACKET_DURATION = Histogram(
    'coneweyl_bracket_duration_seconds',
    'Bracketing duration in seconds'
)

# Study Metrics
STUDY_JOBS = Counter(
    'coneweyl_study_jobs_total',
    'Total (lambda, side) study jobs',
    ['side', 'status']
)

ERRORS_TOTAL = Counter(
    'coneweyl_errors_total',
    'Total errors raised by the pipeline',
    ['error_type']
)


def track_assembly(side: str, duration: float, dim: int):
    """Track a matrix assembly"""
    ASSEMBLIES_TOTAL.labels(side=side).inc()
    ASSEMBLY_DURATION.labels(side=side).observe(duration)
    MATRIX_DIMENSION.set(dim)


def track_count(method: str, duration: float):
    """Track an inertia or oracle count"""
    FACTORIZATIONS_TOTAL.labels(method=method).inc()
    COUNT_DURATION.labels(method=method).observe(duration)


def track_eigensolver(solver: str):
    """Track an eigensolver call"""
    EIGENSOLVER_CALLS.labels(solver=solver).inc()


def track_bracket(duration: float, cells: int, edge: int):
    """Track a bracketing run"""
    BRACKET_DURATION.observe(duration)
    BRACKET_CELLS.labels(kind='frozen').inc(cells)
    BRACKET_CELLS.labels(kind='edge').inc(edge)


def track_study_job(side: str, status: str):
    """Track a study job outcome"""
    STUDY_JOBS.labels(side=side, status=status).inc()


def track_error(error_type: str):
    """Track errors"""
    ERRORS_TOTAL.labels(error_type=error_type).inc()


def get_metrics() -> bytes:
    """Return the registry in the Prometheus text exposition format."""
    return generate_latest(REGISTRY)


def write_metrics(path: Union[str, Path]) -> Path:
    """Dump the registry to a file (there is no HTTP endpoint)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(get_metrics())
    return path
