import numpy as np
import pytest

from vmsgreens.assembly import (
    OperatorMatrix,
    SingularMatrixError,
    advection_matrix,
    divergence_matrix,
    load_vector,
    mass_matrix,
    saddle_matrix,
    solve_dense,
    stiffness_matrix,
)
from vmsgreens.spaces import Mesh, build_space


def h1(dim, N, p, constrained=False):
    return build_space(Mesh(dim, N), p, "H1_nodal", constrained)


def test_linear_element_matrices():
    V = h1(1, 1, 1)
    np.testing.assert_allclose(mass_matrix(V, V).data, [[1 / 3, 1 / 6], [1 / 6, 1 / 3]], atol=1e-15)
    np.testing.assert_allclose(stiffness_matrix(V).data, [[1, -1], [-1, 1]], atol=1e-14)
    np.testing.assert_allclose(advection_matrix(V, V, 1.0).data, [[-0.5, 0.5], [-0.5, 0.5]], atol=1e-15)
    W = build_space(Mesh(1, 1), 1, "L2_volume")
    np.testing.assert_allclose(divergence_matrix(W, V).data, [[-1, 1]], atol=1e-14)
    np.testing.assert_allclose(mass_matrix(W, W).data, [[1.0]], atol=1e-14)


def test_load_vectors():
    V = h1(1, 1, 1)
    np.testing.assert_allclose(load_vector(V, lambda x: np.ones_like(x)), [0.5, 0.5], atol=1e-15)
    W = build_space(Mesh(1, 2), 1, "L2_volume")
    # volume-form edge functions integrate to 1 on their element
    np.testing.assert_allclose(load_vector(W, lambda x: np.ones_like(x)), [1.0, 1.0], atol=1e-14)


def test_mass_matrix_integrates_products_exactly():
    V = h1(1, 3, 4)
    M = mass_matrix(V, V).data
    n = V.components[0][0].node_coordinates()
    # u = x^2, v = x^3 are in the space: int x^5 = 1/6
    assert (n**3) @ M @ (n**2) == pytest.approx(1 / 6, abs=1e-14)
    assert np.allclose(M, M.T)
    assert np.all(np.linalg.eigvalsh(M) > 0)


@pytest.mark.parametrize("dim", [1, 2])
def test_advection_is_skew_on_constrained_space(dim):
    V = h1(dim, 3, 3, True)
    C = advection_matrix(V, V, 1.0).data
    np.testing.assert_allclose(C + C.T, 0.0, atol=1e-13)


def test_divergence_full_rank_and_saddle_symmetry():
    m = Mesh(2, 4)
    Q, W = build_space(m, 2, "Hdiv_flux"), build_space(m, 2, "L2_volume")
    D = divergence_matrix(W, Q)
    assert D.shape == (64, 144)
    assert np.linalg.matrix_rank(D.data) == 64
    S = saddle_matrix(mass_matrix(Q, Q), D)
    np.testing.assert_allclose(S.data, S.data.T, atol=1e-14)
    S.factorize()


def test_divergence_of_flux_matches_pointwise_divergence():
    m = Mesh(2, 2)
    Q, W = build_space(m, 3, "Hdiv_flux"), build_space(m, 3, "L2_volume")
    rng = np.random.default_rng(1)
    q = rng.standard_normal(Q.dof_count)
    # (eta, div q) assembled vs quadrature of the evaluated divergence
    from vmsgreens.quadrature import rule_for_precision
    from vmsgreens.spaces import quadrature_sampling

    s = quadrature_sampling(2, rule_for_precision(25))
    div = Q.divergence(q, (s, s))
    W_vals = np.kron(W.components[0][1].evaluate(s), W.components[0][0].evaluate(s))
    ref = W_vals.T @ (np.outer(s.weights, s.weights) * div).ravel()
    np.testing.assert_allclose(divergence_matrix(W, Q).data @ q, ref, atol=1e-11)


def test_unconstrained_laplacian_is_rejected():
    V = h1(1, 3, 2)
    with pytest.raises(SingularMatrixError):
        stiffness_matrix(V).factorize()
    with pytest.raises(SingularMatrixError):
        solve_dense(np.zeros((2, 2)), np.ones(2))


def test_operator_matrix_validation_and_solve():
    with pytest.raises(ValueError):
        OperatorMatrix(np.ones(3))
    with pytest.raises(ValueError):
        OperatorMatrix(np.eye(2), role="weird")
    A = OperatorMatrix(np.array([[4.0, 1.0], [1.0, 3.0]]), "stiffness")
    x = A.solve(np.array([1.0, 2.0]))
    np.testing.assert_allclose(A.data @ x, [1.0, 2.0])
    with pytest.raises(ValueError):
        solve_dense(A, np.ones(3))


def test_mesh_mismatch_rejected():
    with pytest.raises(ValueError):
        mass_matrix(h1(1, 2, 1), h1(1, 3, 1))
