import numpy as np
import pytest

from vmsgreens.assembly import divergence_matrix, mass_matrix, saddle_matrix, stiffness_matrix
from vmsgreens.greens import (
    basis_row,
    classic_greens,
    exact_greens_1d_poisson,
    exact_greens_2d_poisson,
    fine_scale_greens,
    kernel_eval,
)
from vmsgreens.solver import ProblemSpec, coarse_to_fine, discretize
from vmsgreens.spaces import Mesh, build_space, embedding


def direct_kernel(N, p):
    V = build_space(Mesh(1, N), p, "H1_nodal", True)
    return classic_greens(stiffness_matrix(V), V)


def test_exact_1d_kernel():
    assert exact_greens_1d_poisson(0.5, 0.5) == 0.25
    assert exact_greens_1d_poisson(0.1, 0.25) == pytest.approx(0.075)
    assert exact_greens_1d_poisson(0.0, 0.3) == 0.0


@pytest.mark.parametrize("s", [1 / 3, 2 / 3])
def test_discrete_1d_kernel_exact_for_nodal_source(s):
    g = direct_kernel(3, 3)
    x = np.linspace(0, 1, 200)
    gh = np.array([kernel_eval(g, xi, s) for xi in x])
    np.testing.assert_allclose(gh, exact_greens_1d_poisson(x, s), atol=1e-12)


def test_discrete_kernel_symmetric():
    g = direct_kernel(4, 2)
    for x, s in [(0.1, 0.63), (0.37, 0.9), (0.5, 0.21)]:
        assert kernel_eval(g, x, s) == pytest.approx(kernel_eval(g, s, x), abs=1e-15)


def test_mixed_1d_kernel_symmetric_and_positive():
    m = Mesh(1, 4)
    Q, W = build_space(m, 2, "H1_nodal"), build_space(m, 2, "L2_volume")
    g = classic_greens(saddle_matrix(mass_matrix(Q, Q), divergence_matrix(W, Q)), (Q, W))
    for x, s in [(0.1, 0.63), (0.37, 0.9), (0.55, 0.21)]:
        assert kernel_eval(g, x, s) == pytest.approx(kernel_eval(g, s, x), rel=1e-12)
        assert kernel_eval(g, x, s) > 0
    # far from the source the discrete kernel tracks the exact one
    assert kernel_eval(g, 0.1, 0.63) == pytest.approx(exact_greens_1d_poisson(0.1, 0.63), rel=2e-2)


def test_2d_series_properties():
    s = (0.3, 0.7)
    assert exact_greens_2d_poisson((0.5, 0.5), s) == pytest.approx(exact_greens_2d_poisson(s, (0.5, 0.5)), abs=1e-14)
    x = np.linspace(0, 1, 11)
    np.testing.assert_allclose(exact_greens_2d_poisson((x, np.zeros_like(x)), s), 0.0, atol=1e-15)
    np.testing.assert_allclose(exact_greens_2d_poisson((np.ones_like(x), x), s), 0.0, atol=1e-14)
    # high source coordinate does not overflow
    assert np.isfinite(exact_greens_2d_poisson((0.99, 0.999), (0.5, 0.998), n_terms=500))
    with pytest.raises(ValueError):
        exact_greens_2d_poisson((0.5, 0.5), s, n_terms=0)


def test_2d_series_converges():
    a = exact_greens_2d_poisson((0.6, 0.3), (0.625, 0.375), 400)
    b = exact_greens_2d_poisson((0.6, 0.3), (0.625, 0.375), 800)
    assert a == pytest.approx(b, rel=5e-3)


def test_2d_mixed_kernel_far_field():
    m = Mesh(2, 4)
    Q, W = build_space(m, 4, "Hdiv_flux"), build_space(m, 4, "L2_volume")
    g = classic_greens(saddle_matrix(mass_matrix(Q, Q), divergence_matrix(W, Q)), (Q, W))
    for s in [(0.125, 0.125), (0.625, 0.375), (0.875, 0.875)]:
        x = (1 - s[0], 1 - s[1]) if s != (0.625, 0.375) else (0.2, 0.8)
        ref = exact_greens_2d_poisson(x, s, n_terms=400)
        assert kernel_eval(g, x, s) == pytest.approx(ref, rel=5e-3)


def test_classic_greens_validation():
    V = build_space(Mesh(1, 2), 2, "L2_volume")
    with pytest.raises(ValueError):
        classic_greens(mass_matrix(V, V), V)
    Q = build_space(Mesh(2, 2), 1, "Hdiv_flux")
    with pytest.raises(ValueError):
        basis_row(Q, (0.5, 0.5))
    H = build_space(Mesh(1, 2), 1, "H1_nodal", True)
    with pytest.raises(ValueError):
        basis_row(H, (0.5, 0.5))


@pytest.mark.parametrize(
    "dim,form,p,k", [(1, "direct", 1, 1), (1, "direct", 2, 3), (1, "mixed", 2, 2), (2, "mixed", 1, 2)]
)
def test_fine_scale_greens_identities(dim, form, p, k):
    spec = ProblemSpec(dim, form, 0.1, 3, p, k, source=lambda *x: np.ones_like(x[0]))
    c, f = discretize(spec, p), discretize(spec, p + k)
    E = coarse_to_fine(c, f)
    Gp = fine_scale_greens(f.A, E)
    G, A = Gp.matrix, f.A.data
    scale = np.abs(G).max()
    np.testing.assert_allclose(E.T @ A @ G, 0.0, atol=1e-10 * scale * np.abs(A).max())
    np.testing.assert_allclose(G @ A @ E, 0.0, atol=1e-10 * scale * np.abs(A).max())
    np.testing.assert_allclose(G, G.T, atol=1e-10 * scale)
    # G' A is the complementary projector
    P = G @ A
    np.testing.assert_allclose(P @ P, P, atol=1e-9)


def test_fine_scale_greens_vanishes_without_refinement():
    spec = ProblemSpec(1, "direct", 1.0, 2, 2, 0, source=np.ones_like)
    d = discretize(spec, 2)
    Gp = fine_scale_greens(d.A, np.eye(d.size))
    assert Gp.trivial
    assert not np.any(Gp.matrix)
    with pytest.raises(ValueError):
        fine_scale_greens(d.A, np.ones((d.size + 1, 1)))


def test_fine_scale_greens_accepts_embedding_object():
    m = Mesh(1, 2)
    c, f = build_space(m, 1, "H1_nodal", True), build_space(m, 2, "H1_nodal", True)
    Gp = fine_scale_greens(stiffness_matrix(f), embedding(c, f))
    assert Gp.matrix.shape == (f.dof_count, f.dof_count)
