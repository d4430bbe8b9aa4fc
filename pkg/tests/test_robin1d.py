"""
Tests for the transversal Robin problem
"""
import math
import sys
from pathlib import Path

import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.coneweyl.errors import ConsistencyError, DomainError, NoBoundStateError
from src.coneweyl.services.robin1d import (BoundaryCondition, DeltaLaw, dr_norm, eigenfunction_value,
                                           eigenfunction_values, fd_matrix_1d, fd_oracle_1d, fd_sparse_1d,
                                           normalization, root_derivative, solve_on_law, solve_transversal,
                                           trace_inequality_slack)

D = BoundaryCondition.DirichletAtDelta
N = BoundaryCondition.NeumannAtDelta

# (r, delta) pairs with r*delta > 1
BOUND_PAIRS = [(2.0, 1.0), (10.0, 0.25), (10.0, 1.0), (50.0, 0.25), (50.0, 1.0)]


def test_dirichlet_ground_state():
    sol = solve_transversal(2.0, 1.0, D)
    assert sol.t_star / math.tanh(sol.t_star) == pytest.approx(2.0, rel=1e-13)
    assert sol.t_star == pytest.approx(1.915, abs=1e-3)
    assert sol.E1 == pytest.approx(-3.6673, abs=1e-3)
    assert sol.k * sol.r * sol.delta == pytest.approx(sol.t_star)
    assert sol.psidelta_sq == 0.0


def test_neumann_ground_state():
    sol = solve_transversal(2.0, 1.0, N)
    assert sol.t_star * math.tanh(sol.t_star) == pytest.approx(2.0, rel=1e-13)
    assert sol.t_star == pytest.approx(2.065, abs=1e-3)
    assert sol.E1 == pytest.approx(-4.2656, abs=1e-3)


@pytest.mark.parametrize("bc", [D, N])
def test_deep_well_energy(bc):
    sol = solve_transversal(50.0, 0.5, bc)
    assert sol.E1 == pytest.approx(-2500.0, rel=1e-7)


def test_no_bound_state_for_short_dirichlet_interval():
    with pytest.raises(NoBoundStateError):
        solve_transversal(0.5, 1.0, D)
    with pytest.raises(NoBoundStateError):
        solve_transversal(1.0, 1.0, D)
    assert solve_transversal(0.5, 1.0, N).E1 < 0


def test_rejects_nonpositive_inputs():
    with pytest.raises(DomainError):
        solve_transversal(-1.0, 1.0, N)
    with pytest.raises(DomainError):
        solve_transversal(1.0, 0.0, N)


def test_accepts_bc_by_name():
    sol = solve_transversal(2.0, 1.0, "NeumannAtDelta")
    assert sol.bc == N


def test_eigenfunction_boundary_values():
    dirichlet = solve_transversal(2.0, 1.0, D)
    assert eigenfunction_value(dirichlet, 1.0) == 0.0
    for sol in (dirichlet, solve_transversal(2.0, 1.0, N)):
        assert eigenfunction_value(sol, 0.0) == pytest.approx(math.sqrt(sol.psi0_sq), abs=1e-12)
        assert eigenfunction_value(sol, 0.5) > 0
    neumann = solve_transversal(2.0, 1.0, N)
    assert eigenfunction_value(neumann, 1.0) ** 2 == pytest.approx(neumann.psidelta_sq, rel=1e-12)


def test_eigenfunction_outside_interval():
    sol = solve_transversal(2.0, 1.0, N)
    with pytest.raises(DomainError):
        eigenfunction_value(sol, 1.5)
    with pytest.raises(DomainError):
        eigenfunction_value(sol, -0.1)


@pytest.mark.parametrize("bc", [D, N])
@pytest.mark.parametrize("r, delta", [(2.0, 1.0), (50.0, 1.0), (1000.0, 0.5)])
def test_normalization(bc, r, delta):
    assert normalization(solve_transversal(r, delta, bc)) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("bc", [D, N])
def test_robin_condition_at_zero(bc):
    sol = solve_transversal(2.0, 1.0, bc)
    h = 1e-6
    slope = (eigenfunction_value(sol, h) - eigenfunction_value(sol, 0.0)) / h
    assert slope == pytest.approx(-sol.r * eigenfunction_value(sol, 0.0), rel=1e-4)


@pytest.mark.parametrize("bc", [D, N])
@pytest.mark.parametrize("r, delta", BOUND_PAIRS)
def test_closed_form_matches_finite_differences(bc, r, delta):
    closed = solve_transversal(r, delta, bc).E1
    fd = fd_oracle_1d(r, delta, bc, 4096)[0]
    assert abs(closed - fd) <= 1e-3 * max(1.0, abs(closed))


@pytest.mark.parametrize("bc", [D, N])
def test_energy_asymptotics(bc):
    for r, delta in [(10.0, 1.0), (50.0, 0.25), (50.0, 1.0)]:
        sol = solve_transversal(r, delta, bc)
        assert abs(sol.E1 + r ** 2) / r ** 2 <= 1e-7


@pytest.mark.parametrize("bc", [D, N])
def test_trace_value_asymptotics(bc):
    for r, delta in [(10.0, 0.5), (10.0, 1.0), (50.0, 0.25), (50.0, 1.0)]:
        sol = solve_transversal(r, delta, bc)
        assert abs(sol.psi0_sq - 2 * r) / (2 * r) <= 1e-2


def test_neumann_far_end_is_exponentially_small():
    for r, delta in BOUND_PAIRS:
        sol = solve_transversal(r, delta, N)
        assert sol.psidelta_sq <= 10 * r ** 2 * delta * math.exp(-2 * r * delta)


@pytest.mark.parametrize("bc", [D, N])
@pytest.mark.parametrize("c", [2.0, 10.0])
def test_scaling_law(bc, c):
    base = solve_transversal(2.0, 1.0, bc).E1
    scaled = solve_transversal(2.0 * c, 1.0 / c, bc).E1
    assert scaled == pytest.approx(c ** 2 * base, rel=1e-10)


def test_large_r_delta_stays_finite():
    sol = solve_transversal(5000.0, 1.0, N)
    assert np.isfinite(sol.psi0_sq) and np.isfinite(sol.dr_norm_sq)
    assert sol.psidelta_sq == 0.0 or sol.psidelta_sq < 1e-300


def test_delta_law():
    law = DeltaLaw(c=1.0)
    assert law.rho == 0.75
    assert law.delta_at(16.0) == pytest.approx(0.125)
    assert DeltaLaw.through(16.0, 0.125).c == pytest.approx(1.0)
    with pytest.raises(DomainError):
        DeltaLaw(c=1.0, rho=1.5)
    with pytest.raises(DomainError):
        DeltaLaw(c=0.0)


@pytest.mark.parametrize("bc", [D, N])
@pytest.mark.parametrize("r", [100.0, 10000.0])
def test_dr_norm_decay(bc, r):
    law = DeltaLaw(c=1.0, rho=0.75)
    sol = solve_on_law(r, law, bc)
    value = dr_norm(sol, law)
    assert 0.0 <= value <= 10.0 * r ** -1.5
    assert value == pytest.approx(sol.dr_norm_sq)


@pytest.mark.parametrize("bc", [D, N])
def test_dr_norm_matches_finite_difference_in_r(bc):
    law = DeltaLaw(c=2.0, rho=0.75)
    r, h = 2.0, 1e-4
    sol = solve_on_law(r, law, bc)
    x, w = leggauss(64)
    t = 0.5 * sol.delta * (x + 1.0)
    w = 0.5 * sol.delta * w
    forward = eigenfunction_values(solve_on_law(r + h, law, bc), t)
    backward = eigenfunction_values(solve_on_law(r - h, law, bc), t)
    fd_value = float(np.dot(w, ((forward - backward) / (2 * h)) ** 2))
    assert dr_norm(sol, law) == pytest.approx(fd_value, rel=1e-2)


def test_dr_norm_rejects_foreign_law():
    sol = solve_transversal(4.0, 1.0, N)
    with pytest.raises(ConsistencyError):
        dr_norm(sol, DeltaLaw(c=1.0))


@pytest.mark.parametrize("bc", [D, N])
def test_root_derivative_matches_finite_difference(bc):
    law = DeltaLaw(c=2.0)
    r, h = 3.0, 1e-5
    fd_value = (solve_on_law(r + h, law, bc).k - solve_on_law(r - h, law, bc).k) / (2 * h)
    assert root_derivative(r, law, bc) == pytest.approx(fd_value, rel=1e-4)


def test_fd_oracle_examples():
    assert fd_oracle_1d(2.0, 1.0, D, 4096)[0] == pytest.approx(-3.6673, abs=1e-3)
    assert fd_oracle_1d(2.0, 1.0, N, 4096)[1] >= 0.0
    assert fd_oracle_1d(0.5, 1.0, D, 1024)[0] >= 0.0


def test_fd_matrix_shapes():
    diag, off = fd_matrix_1d(2.0, 1.0, D, 64)
    assert len(diag) == 64 and len(off) == 63
    diag, off = fd_matrix_1d(2.0, 1.0, N, 64)
    assert len(diag) == 65 and len(off) == 64
    matrix = fd_sparse_1d(2.0, 1.0, N, 64)
    assert abs(matrix - matrix.T).max() == 0.0
    with pytest.raises(DomainError):
        fd_matrix_1d(2.0, 1.0, D, 32)


def _random_fourier(rng):
    a = rng.normal(size=5)
    b = rng.normal(size=5)
    j = np.arange(5)

    def f(t):
        t = np.asarray(t)[..., None]
        return np.sum(a * np.cos(j * np.pi * t) + b * np.sin(j * np.pi * t), axis=-1)

    def df(t):
        t = np.asarray(t)[..., None]
        return np.sum(j * np.pi * (-a * np.sin(j * np.pi * t) + b * np.cos(j * np.pi * t)), axis=-1)

    return f, df


def test_trace_inequality_on_random_functions():
    rng = np.random.default_rng(2024)
    for _ in range(100):
        f, df = _random_fourier(rng)
        for x in (0.1, 0.5, 1.0):
            assert trace_inequality_slack(f, df, 1.0, x) >= -1e-8


def test_trace_inequality_rejects_x_beyond_interval():
    f, df = _random_fourier(np.random.default_rng(0))
    with pytest.raises(DomainError):
        trace_inequality_slack(f, df, 1.0, 1.5)


@pytest.mark.parametrize("r, delta", BOUND_PAIRS)
def test_neumann_ground_state_lies_below_dirichlet(r, delta):
    assert solve_transversal(r, delta, N).E1 <= solve_transversal(r, delta, D).E1


@pytest.mark.parametrize("bc", [D, N])
@pytest.mark.parametrize("r, delta", [(2.0, 1.0), (10.0, 0.5)])
def test_finite_differences_converge_at_second_order(bc, r, delta):
    exact = solve_transversal(r, delta, bc).E1
    errors = [abs(fd_oracle_1d(r, delta, bc, n)[0] - exact) for n in (256, 512, 1024)]
    for coarse, fine in zip(errors[:-1], errors[1:]):
        assert 3.5 <= coarse / fine <= 4.5
