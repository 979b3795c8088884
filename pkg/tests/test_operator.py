import numpy as np
import pytest
from hypothesis import given, strategies as st

from dynamo_spectra.eig import dense_spectrum, is_conjugation_closed
from dynamo_spectra.operator import (
    AlphaProfile,
    BoundaryCondition,
    RadialGrid,
    Scheme,
    affine_parts,
    alpha_eval,
    assemble,
    constant_alpha_oracle,
    free_decay_rates,
    graded_block_residuals,
    graded_transform,
    make_grid,
    profile_zero_nodes,
    pseudo_hermiticity_residual_disc,
    q_operator,
    spherical_jn_zeros,
    to_graded_rep,
)
from oracles import JL_ZEROS, REFERENCE_PROFILE_ROOTS, fd_constant_alpha_eigenvalues, fd_dirichlet_q

SCHEMES = ["fd2", "chebyshev"]
BCS = ["idealized", "physical"]


# -- profile -------------------------------------------------------------------


def test_alpha_eval_examples():
    assert alpha_eval(AlphaProfile.reference(1.0), 0.0) == 1.0
    assert alpha_eval(AlphaProfile.reference(2.0), 1.0) == pytest.approx(0.66, abs=1e-12)
    for r in (0.0, 0.3, 1.0):
        assert alpha_eval(AlphaProfile.reference(0.0), r) == 0.0


@pytest.mark.parametrize("r", [-1e-9, 1.0 + 1e-9, 2.0])
def test_alpha_eval_rejects_outside_unit_interval(r):
    with pytest.raises(ValueError):
        alpha_eval(AlphaProfile.reference(), r)


def test_profile_validation():
    with pytest.raises(ValueError):
        AlphaProfile(())
    with pytest.raises(ValueError):
        AlphaProfile((1.0, np.nan))
    p = AlphaProfile((1, 2), 3)
    assert p.coeffs == (1.0, 2.0) and p.with_c(0.5).c == 0.5


def test_profile_zero_nodes_brackets_the_reference_roots():
    grid = make_grid(64)
    bad = profile_zero_nodes(AlphaProfile.reference(), grid)
    assert bad
    for root in REFERENCE_PROFILE_ROOTS:
        near = np.argmin(np.abs(grid.nodes - root))
        assert near in bad
    assert profile_zero_nodes(AlphaProfile.constant(1.0), grid) == []
    assert profile_zero_nodes(AlphaProfile.constant(0.0), grid) == list(range(64))


# -- grids ---------------------------------------------------------------------


@pytest.mark.parametrize("scheme", SCHEMES)
def test_grid_nodes_interior_and_increasing(scheme):
    g = make_grid(20, scheme)
    assert g.n == len(g.nodes) == 20
    assert np.all(np.diff(g.nodes) > 0)
    assert 0 < g.nodes[0] and g.nodes[-1] < 1
    assert g.scheme is Scheme(scheme)


def test_chebyshev_weights_integrate_polynomials():
    g = RadialGrid.chebyshev(16)
    r, w = g.full_nodes, g.full_weights
    for k in range(10):
        assert np.dot(w, r**k) == pytest.approx(1.0 / (k + 1), abs=1e-13)


def test_grid_too_coarse():
    with pytest.raises(ValueError):
        make_grid(7)


# -- assembly ------------------------------------------------------------------


@pytest.mark.parametrize("scheme", SCHEMES)
@pytest.mark.parametrize("bc", BCS)
def test_zero_alpha_is_block_diagonal(scheme, bc):
    grid = make_grid(16, scheme)
    op = assemble(AlphaProfile.constant(0.0), 2, grid, bc)
    h11, h12, h21, h22 = op.blocks()
    assert np.all(h12 == 0) and np.all(h21 == 0)
    robin = bc == "physical"
    np.testing.assert_allclose(h11, -q_operator(grid, 2, 1.0, robin), atol=1e-12 * np.abs(h11).max())
    np.testing.assert_allclose(h22, -q_operator(grid, 2, 1.0, False), atol=1e-12 * np.abs(h22).max())


def test_fd_idealized_q_matches_independent_stencil():
    d, e = fd_dirichlet_q(16, 1)
    q = q_operator(make_grid(16), 1, 1.0)
    np.testing.assert_allclose(q, np.diag(d) + np.diag(e, 1) + np.diag(e, -1), rtol=1e-14)


def test_assemble_validation():
    grid = make_grid(16)
    for l in (0, -1, 1.5):
        with pytest.raises(ValueError):
            assemble(AlphaProfile.reference(), l, grid, "idealized")
    with pytest.raises(ValueError):
        assemble(AlphaProfile.reference(), 1, grid, "periodic")


def test_matrix_is_immutable_and_real():
    op = assemble(AlphaProfile.reference(2.0), 1, make_grid(16), "physical")
    assert op.matrix.dtype == float
    assert op.matrix.shape == (32, 32)
    with pytest.raises(ValueError):
        op.matrix[0, 0] = 1.0


@pytest.mark.parametrize("scheme", SCHEMES)
@pytest.mark.parametrize("bc", BCS)
def test_affine_in_c(scheme, bc):
    grid = make_grid(24, scheme)
    h0, h1 = affine_parts(AlphaProfile.reference(), 1, grid, bc)
    rng = np.random.default_rng(3)
    for c in rng.uniform(-30, 30, 5):
        h = assemble(AlphaProfile.reference(c), 1, grid, bc).matrix
        scale = np.abs(h).max()
        assert np.abs(h - (h0 + c * h1)).max() <= 1e-13 * scale


@pytest.mark.parametrize("scheme", SCHEMES)
@pytest.mark.parametrize("bc", BCS)
def test_spectrum_closed_under_conjugation(scheme, bc):
    op = assemble(AlphaProfile.reference(20.0), 1, make_grid(32, scheme), bc)
    spec = dense_spectrum(op.matrix)
    assert np.any(np.abs(spec.eigenvalues.imag) > 1e-8)
    assert is_conjugation_closed(spec.eigenvalues, 1e-8 * spec.norm)


def test_psi_inverts_substitution():
    grid = make_grid(16)
    op = assemble(AlphaProfile.constant(1.0), 1, grid, "idealized")
    psi = np.concatenate([grid.nodes**2, np.sin(grid.nodes)])
    u = np.tile(grid.nodes, 2) * psi
    np.testing.assert_allclose(op.psi(u), psi, rtol=1e-15)


# -- J-symmetry and graded representation ---------------------------------------


@pytest.mark.parametrize("scheme", SCHEMES)
def test_idealized_is_pseudo_hermitian(scheme):
    op = assemble(AlphaProfile.reference(1.0), 1, make_grid(64, scheme), "idealized")
    assert pseudo_hermiticity_residual_disc(op) <= 1e-10
    op0 = assemble(AlphaProfile.constant(0.0), 1, make_grid(64, scheme), "idealized")
    assert pseudo_hermiticity_residual_disc(op0) <= 1e-12


@pytest.mark.parametrize("scheme", SCHEMES)
def test_physical_breaks_pseudo_hermiticity(scheme):
    op = assemble(AlphaProfile.reference(1.0), 1, make_grid(64, scheme), "physical")
    assert pseudo_hermiticity_residual_disc(op) > 1e-4


@pytest.mark.parametrize("scheme", SCHEMES)
def test_graded_block_relations(scheme):
    op = assemble(AlphaProfile.constant(1.0), 1, make_grid(32, scheme), "idealized")
    assert max(graded_block_residuals(op)) <= 1e-10
    op = assemble(AlphaProfile.reference(5.0), 1, make_grid(32, scheme), "idealized")
    assert max(graded_block_residuals(op)) <= 1e-10


def test_graded_transform_round_trip():
    op = assemble(AlphaProfile.reference(3.0), 1, make_grid(16), "physical")
    s = graded_transform(op.n)
    np.testing.assert_allclose(s.T @ s, np.eye(2 * op.n), atol=1e-15)
    g = to_graded_rep(op)
    assert g.representation == "graded"
    back = s @ g.matrix @ s.T
    assert np.abs(back - op.matrix).max() <= 1e-13 * np.abs(op.matrix).max()


def test_graded_blocks_match_explicit_formula():
    # S^-1 H S = 1/2 [[Q[a-2] + a, a - Q[a]], [Q[a] - a, -Q[a+2] - a]]
    grid = make_grid(12)
    prof = AlphaProfile.reference(4.0)
    g = to_graded_rep(assemble(prof, 1, grid, "idealized")).matrix
    n = grid.n
    a = np.diag(prof(grid.nodes))
    qa = q_operator(grid, 1, prof)
    qm = q_operator(grid, 1, lambda r: prof(r) - 2.0)
    qp = q_operator(grid, 1, lambda r: prof(r) + 2.0)
    scale = np.abs(g).max()
    expected = 0.5 * np.block([[qm + a, a - qa], [qa - a, -qp - a]])
    assert np.abs(g - expected).max() <= 1e-13 * scale
    assert g[:n, :n].shape == (n, n)


# -- analytic oracles ------------------------------------------------------------


@pytest.mark.parametrize("l", [0, 1, 2, 3])
def test_bessel_zero_bisection_matches_frozen(l):
    np.testing.assert_allclose(spherical_jn_zeros(l, 8), JL_ZEROS[l], rtol=1e-12)


def test_constant_alpha_oracle_examples():
    k = JL_ZEROS[1][0]
    np.testing.assert_allclose(constant_alpha_oracle(0.0, 1, 1), [-k * k, -k * k], rtol=1e-12)
    vals = constant_alpha_oracle(1.0, 1, 4)
    assert np.all(vals.imag == 0)
    np.testing.assert_allclose(vals[0::2].real, -np.array(JL_ZEROS[1][:4]) ** 2 + JL_ZEROS[1][:4], rtol=1e-12)
    with pytest.raises(ValueError):
        constant_alpha_oracle(1.0, 0, 3)
    with pytest.raises(ValueError):
        constant_alpha_oracle(1.0, 1, 0)


@given(st.floats(-50, 50), st.integers(1, 3))
def test_constant_alpha_oracle_vieta(alpha0, l):
    vals = constant_alpha_oracle(alpha0, l, 3)
    k = np.array(JL_ZEROS[l][:3])
    plus, minus = vals[0::2], vals[1::2]
    np.testing.assert_allclose(plus + minus, -2 * k**2, rtol=1e-12)
    scale = k**4 + alpha0**2 * k**2
    assert np.all(np.abs((plus * minus).real - (k**4 - alpha0**2 * k**2)) <= 1e-10 * scale)


@pytest.mark.parametrize("alpha0", [0.0, 1.0, 7.5])
def test_fd_constant_alpha_matches_discrete_oracle(alpha0):
    n = 40
    ev = dense_spectrum(assemble(AlphaProfile.constant(alpha0), 1, make_grid(n), "idealized").matrix).eigenvalues
    ref = fd_constant_alpha_eigenvalues(n, 1, alpha0)
    scale = np.abs(ref).max()
    assert np.abs(np.sort(ev.real) - np.sort(ref)).max() <= 1e-10 * scale
    assert np.abs(ev.imag).max() <= 1e-10 * scale


def _leading_error(n, scheme, count=5):
    ex = constant_alpha_oracle(1.0, 1, count + 2).real
    ex = np.sort(ex[np.argsort(np.abs(ex))][:count])
    ev = dense_spectrum(assemble(AlphaProfile.constant(1.0), 1, make_grid(n, scheme), "idealized").matrix).eigenvalues
    ev = np.sort(ev[np.argsort(np.abs(ev))][:count].real)
    return np.max(np.abs(ev - ex) / np.abs(ex))


def test_fd_converges_at_second_order():
    errs = [_leading_error(n, "fd2") for n in (31, 63, 127)]
    for coarse, fine in zip(errs, errs[1:]):
        assert 3.5 < coarse / fine < 4.5


def test_chebyshev_converges_spectrally():
    errs = [_leading_error(n, "chebyshev") for n in (12, 16, 24)]
    assert errs[0] / errs[1] > 10 and errs[1] / errs[2] > 10
    assert errs[-1] < 1e-7
    # far below what fd2 reaches with ten times the nodes
    assert errs[-1] < 1e-3 * _leading_error(255, "fd2")


@pytest.mark.parametrize("bc", BCS)
def test_free_decay_physical_profile_c0(bc):
    op = assemble(AlphaProfile.reference(0.0), 1, make_grid(64, "chebyshev"), bc)
    ev = dense_spectrum(op.matrix).eigenvalues
    assert np.all(ev.imag == 0) and np.all(ev.real < 0)
    ref = free_decay_rates(1, bc, 4)
    np.testing.assert_allclose(ev[:8].real, ref, rtol=1e-6)


def test_free_decay_physical_uses_j0_zeros():
    ref = free_decay_rates(1, BoundaryCondition.PHYSICAL, 2)
    assert ref[0] == pytest.approx(-np.pi**2, rel=1e-12)
    assert np.min(np.abs(ref + JL_ZEROS[1][0] ** 2)) <= 1e-10
