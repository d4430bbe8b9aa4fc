"""
Tests for the half-strip model operators and their assembly
"""
import math
import sys
from pathlib import Path

import numpy as np
import pytest

project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from tests.factories import cap_profile, flat_coefficients, strip_operator
from src.coneweyl.config import override_settings
from src.coneweyl.errors import CoefficientBoundError, DomainError, ResourceError
from src.coneweyl.services.eigcount import count_below, dense_oracle, lowest_eigenpairs
from src.coneweyl.services.geometry import constant_profile
from src.coneweyl.services.modelop import (DEFAULT_RADIAL_BC, DiscretizedOperator, ModelConstants, RadialBC,
                                           Side, STopology, StripGrid, assemble, default_r_max,
                                           export_coordinate_text, make_model_coefficients,
                                           phase_space_closed_form, phase_space_volume)


def test_plus_coefficients():
    coeffs = make_model_coefficients(cap_profile(math.pi / 4), Side.Plus, 10.0)
    r = np.array([10.0])
    assert coeffs.a_fn(r)[0] == 1.0
    assert coeffs.b_fn(r)[0] == pytest.approx(1.0 + 10 ** -0.75)
    assert coeffs.nu_fn(r)[0] == pytest.approx(-10 ** -0.5)
    assert coeffs.b_fn(r)[0] == pytest.approx(1.1778, abs=1e-4)


def test_minus_coefficients():
    coeffs = make_model_coefficients(cap_profile(math.pi / 4), Side.Minus, 10.0)
    r = np.array([10.0])
    assert coeffs.a_fn(r)[0] == pytest.approx(0.96838, abs=1e-5)
    assert coeffs.b_fn(r)[0] == pytest.approx(1.0 - 10 ** -0.75)
    assert coeffs.nu_fn(r)[0] == pytest.approx(0.1)


@pytest.mark.parametrize("side", [Side.Plus, Side.Minus])
def test_coefficients_tend_to_flat_limits(side):
    coeffs = make_model_coefficients(cap_profile(math.pi / 4), side, 2.0)
    far = np.array([1e6])
    assert abs(coeffs.a_fn(far)[0] - 1.0) <= 1e-2
    assert abs(coeffs.b_fn(far)[0] - 1.0) <= 1e-2
    assert abs(coeffs.nu_fn(far)[0]) <= 1e-2


def test_inner_radius_below_one_rejected():
    with pytest.raises(DomainError):
        make_model_coefficients(cap_profile(math.pi / 4), Side.Plus, 0.5)


def test_minus_coefficients_vanish_at_unit_radius():
    with pytest.raises(CoefficientBoundError):
        make_model_coefficients(cap_profile(math.pi / 4), Side.Minus, 1.0)


def test_custom_closures_and_constants():
    coeffs = make_model_coefficients(constant_profile(0.5, 2.0), Side.Custom, 3.0,
                                     nu_fn=lambda r: 1.0 / np.asarray(r, dtype=float) ** 2)
    assert coeffs.a_fn(np.array([4.0]))[0] == 1.0
    assert coeffs.nu_fn(np.array([2.0]))[0] == pytest.approx(0.25)
    assert coeffs.sup_potential == pytest.approx(0.5 + 1.0 / 9.0, rel=1e-3)
    assert coeffs.V_at(2.5) == pytest.approx(0.5)

    scaled = make_model_coefficients(constant_profile(0.5, 2.0), Side.Plus, 4.0, ModelConstants(aplus=2.0))
    assert scaled.nu_fn(np.array([4.0]))[0] == pytest.approx(-1.0)
    with pytest.raises(DomainError):
        ModelConstants(A=0.0)


def test_default_radial_conditions():
    assert DEFAULT_RADIAL_BC[Side.Plus] == RadialBC.DirichletBoth
    assert DEFAULT_RADIAL_BC[Side.Minus] == RadialBC.NeumannInnerDirichletOuter
    assert RadialBC.NeumannInnerDirichletOuter.outer_dirichlet
    assert not RadialBC.NeumannInnerDirichletOuter.inner_dirichlet


def test_strip_grid_geometry():
    grid = StripGrid(R=1.0, R_max=4.0, n_r=3, n_s=4, ell=2 * math.pi)
    assert grid.dim == 12
    assert grid.h_r == pytest.approx(1.0)
    assert np.allclose(grid.r_centres(), [1.5, 2.5, 3.5])
    assert grid.summary() == {"n_r": 3, "n_s": 4, "R_max": 4.0}
    with pytest.raises(DomainError):
        StripGrid(R=2.0, R_max=2.0, n_r=3, n_s=4, ell=1.0)


def test_laplacian_on_small_grid():
    coeffs = flat_coefficients(V=0.0)
    op = strip_operator(coeffs, n_r=3, n_s=4, R_max=4.0)
    assert op.dim == 12
    assert np.max(np.diff(op.csr.indptr)) <= 5
    assert dense_oracle(op).min() >= -1e-12
    assert op.mass_scaling == pytest.approx(1.0 * (2 * math.pi / 4))


def test_matrix_is_exactly_symmetric():
    op = strip_operator(flat_coefficients(V=1.0), n_r=12, n_s=8, R_max=10.0)
    assert (op.csr - op.csr.T).count_nonzero() == 0
    assert np.all(op.rows >= op.cols)
    assert np.all(np.isfinite(op.diagonal()))


def test_potential_bounds_lowest_eigenvalue():
    op = strip_operator(flat_coefficients(V=1.0), n_r=40, n_s=8, R_max=20.0)
    assert dense_oracle(op)[0] >= -1.0


def test_dense_oracle_agrees_with_inertia_on_16x16_grid():
    op = strip_operator(flat_coefficients(V=1.0), n_r=16, n_s=16, R_max=12.0)
    values = dense_oracle(op)
    rng = np.random.default_rng(3)
    for threshold in rng.uniform(values[0] - 0.1, values[20], size=5):
        assert count_below(op, threshold).count == int(np.sum(values <= threshold))


def test_dirichlet_dominates_neumann():
    coeffs = flat_coefficients(V=1.0)
    dirichlet = dense_oracle(strip_operator(coeffs, 20, 8, 15.0, RadialBC.DirichletBoth))
    neumann = dense_oracle(strip_operator(coeffs, 20, 8, 15.0, RadialBC.NeumannBoth))
    assert np.all(dirichlet >= neumann - 1e-10)


def test_plus_form_dominates_minus_form():
    profile = cap_profile(math.pi / 4, 64)
    plus = make_model_coefficients(profile, Side.Plus, 2.0)
    minus = make_model_coefficients(profile, Side.Minus, 2.0)
    for bc in (RadialBC.DirichletBoth, RadialBC.NeumannBoth):
        upper = dense_oracle(strip_operator(plus, 20, 8, 20.0, bc))
        lower = dense_oracle(strip_operator(minus, 20, 8, 20.0, bc))
        assert np.all(upper >= lower - 1e-10)


def test_s_topologies():
    coeffs = flat_coefficients(V=0.0)
    base = dict(R=1.0, R_max=4.0, n_r=3, n_s=4, ell=coeffs.ell)
    periodic = dense_oracle(assemble(coeffs, StripGrid(**base)))
    neumann = dense_oracle(assemble(coeffs, StripGrid(**base, s_topology=STopology.NeumannEnds)))
    dirichlet = dense_oracle(assemble(coeffs, StripGrid(**base, s_topology=STopology.DirichletEnds)))
    assert np.all(dirichlet >= periodic - 1e-10)
    assert np.all(periodic >= neumann - 1e-10)


@pytest.mark.slow
def test_lowest_eigenvalues_converge_under_refinement():
    coeffs = flat_coefficients(V=1.0)
    coarse = strip_operator(coeffs, n_r=200, n_s=32, R_max=20.0)
    fine = strip_operator(coeffs, n_r=400, n_s=64, R_max=20.0)
    low = np.array([value for value, _ in lowest_eigenpairs(coarse, 5, -1.01)])
    high = np.array([value for value, _ in lowest_eigenpairs(fine, 5, -1.01)])
    assert low[0] < 0
    assert np.all(np.abs(high - low) <= 0.02 * abs(low[0]))


def test_assembly_checks_inputs():
    coeffs = flat_coefficients(V=1.0)
    with pytest.raises(DomainError):
        assemble(coeffs, StripGrid(R=2.0, R_max=5.0, n_r=3, n_s=4, ell=coeffs.ell))
    with pytest.raises(DomainError):
        assemble(coeffs, StripGrid(R=1.0, R_max=5.0, n_r=3, n_s=4, ell=1.0))
    with override_settings(max_unknowns=10):
        with pytest.raises(ResourceError):
            strip_operator(coeffs, n_r=3, n_s=4, R_max=4.0)


def test_from_sparse_keeps_lower_triangle():
    op = strip_operator(flat_coefficients(V=1.0), n_r=4, n_s=4, R_max=5.0)
    wrapped = DiscretizedOperator.from_sparse(op.csr)
    assert wrapped.nnz == op.nnz
    assert abs(wrapped.csr - op.csr).max() == 0.0


def test_export_coordinate_text(tmp_path):
    op = strip_operator(flat_coefficients(V=0.0), n_r=3, n_s=4, R_max=4.0)
    path = export_coordinate_text(op, tmp_path / "matrix.txt")
    lines = path.read_text().splitlines()
    assert lines[0] == f"12 {op.nnz}"
    assert len(lines) == op.nnz + 1
    i, j, value = lines[1].split()
    assert int(i) >= int(j)
    float(value)


def test_default_r_max():
    coeffs = flat_coefficients(V=2.0)
    assert default_r_max(coeffs, 0.1) == pytest.approx(1.0 + 3 * 2.0 / 0.1)
    assert default_r_max(flat_coefficients(V=-1.0), 0.5, factor=2.0) == pytest.approx(1.0 + 2 * 1.0 / 0.5)
    with pytest.raises(DomainError):
        default_r_max(coeffs, 0.0)


def test_phase_space_zero_potential():
    assert phase_space_volume(flat_coefficients(V=0.0), 0.05) == 0.0


@pytest.mark.parametrize("lam", [0.05, 0.02, 0.01])
def test_phase_space_flat_potential(lam):
    coeffs = flat_coefficients(V=1.0)
    asymptotic = 2 * math.pi / (8 * math.pi * lam)
    value = phase_space_volume(coeffs, lam)
    assert value == pytest.approx(phase_space_closed_form(coeffs, lam), rel=1e-8)
    assert value == pytest.approx(asymptotic, rel=0.05)


@pytest.mark.parametrize("lam", [0.05, 0.02, 0.01])
def test_phase_space_cap_potential(lam):
    profile = cap_profile(math.pi / 4)
    coeffs = make_model_coefficients(profile, Side.Custom, 1.0)
    asymptotic = profile.kappa_plus_sq_integral / (8 * math.pi * lam)
    assert asymptotic == pytest.approx(0.17678 / lam, rel=1e-3)
    assert phase_space_volume(coeffs, lam) == pytest.approx(asymptotic, rel=0.05)


def test_phase_space_cap_example_value():
    coeffs = make_model_coefficients(cap_profile(math.pi / 4), Side.Custom, 1.0)
    assert phase_space_volume(coeffs, 0.05) == pytest.approx(3.536, rel=0.05)


@pytest.mark.parametrize("lam,factor", [(0.05, 0.9025), (0.02, 0.9604), (0.01, 0.9801)])
def test_truncated_phase_space_carries_inner_radius(lam, factor):
    coeffs = flat_coefficients(V=1.0, R=1.0)
    truncated = phase_space_volume(coeffs, lam, truncated=True)
    assert truncated == pytest.approx(phase_space_closed_form(coeffs, lam, truncated=True), rel=1e-8)
    assert truncated == pytest.approx(factor * phase_space_volume(coeffs, lam), rel=1e-8)


def test_phase_space_ignores_inner_radius():
    near = phase_space_volume(flat_coefficients(V=1.0, R=1.0), 0.05)
    far = phase_space_volume(flat_coefficients(V=1.0, R=5.0), 0.05)
    assert near == pytest.approx(far, rel=1e-10)
    assert phase_space_volume(flat_coefficients(V=1.0, R=30.0), 0.05, truncated=True) == 0.0


def test_phase_space_requires_positive_lambda():
    with pytest.raises(DomainError):
        phase_space_volume(flat_coefficients(V=1.0), 0.0)
