from dataclasses import replace

import numpy as np
import pytest

from vmsgreens.analysis import error_direct, exact_1d, exact_2d, exact_bundle
from vmsgreens.assembly import SingularMatrixError
from vmsgreens.greens import fine_scale_greens
from vmsgreens.solver import (
    ProblemSpec,
    SolverError,
    SuyashGreens,
    build_suyash_greens,
    coarse_to_fine,
    discretize,
    fixed_point_fine_scales,
    galerkin_solve,
    optimal_projection,
    reconstruct_fine_scales,
    solve,
    uncondensed_solve,
    vms_solve,
)
from vmsgreens.spaces import locate


def spec1(form="direct", nu=0.01, N=4, p=2, k=2, **kw):
    return ProblemSpec(1, form, nu, N, p, k, exact=exact_1d(nu, kw.pop("c", 1.0)), **kw)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(dim=3, formulation="direct", nu=1.0, N=2, p=1),
        dict(dim=1, formulation="primal", nu=1.0, N=2, p=1),
        dict(dim=1, formulation="direct", nu=0.0, N=2, p=1),
        dict(dim=1, formulation="direct", nu=float("inf"), N=2, p=1),
        dict(dim=1, formulation="direct", nu=1.0, N=0, p=1),
        dict(dim=1, formulation="direct", nu=1.0, N=2, p=0),
        dict(dim=1, formulation="direct", nu=1.0, N=2, p=1, k=-1),
    ],
)
def test_problem_spec_validation(kwargs):
    with pytest.raises(ValueError):
        ProblemSpec(**kwargs, source=np.ones_like)


def test_problem_spec_needs_data():
    with pytest.raises(ValueError):
        ProblemSpec(1, "direct", 1.0, 2, 1)
    assert ProblemSpec(1, "direct", 0.01, 2, 1, source=np.ones_like).peclet == 100


@pytest.mark.parametrize("dim,form", [(1, "direct"), (1, "mixed"), (2, "mixed")])
def test_zero_source_gives_zero(dim, form):
    spec = ProblemSpec(dim, form, 0.1, 2, 2, 1, source=lambda *x: np.zeros_like(x[0]))
    for sol in (galerkin_solve(spec), vms_solve(spec)):
        assert not np.any(sol.coeffs)


def test_galerkin_oscillates_at_high_peclet():
    spec = spec1()
    gal, proj = galerkin_solve(spec), optimal_projection(spec)
    assert error_direct(gal, spec.exact, proj).e_exact > error_direct(proj, spec.exact, proj).e_exact
    x = np.linspace(0, 1, 401)
    vals = gal.field().phi((locate(4, x),))
    assert np.sum(np.diff(np.sign(np.diff(vals))) != 0) >= 4


def test_projection_without_exact_rejected():
    with pytest.raises(ValueError):
        optimal_projection(ProblemSpec(1, "direct", 1.0, 2, 1, source=np.ones_like))
    with pytest.raises(ValueError):
        solve(spec1(), "upwind")


class _Bundle:
    """Exact polynomial data that lies in every coarse space of degree >= 2."""

    def __init__(self, dim, nu):
        self.nu = nu
        if dim == 1:
            self.phi = lambda x: x * (1 - x)
            self.grad = lambda x: (1 - 2 * x,)
            self.laplacian = lambda x: -2 * np.ones_like(x)
        else:
            self.phi = lambda X, Y: X * (1 - X) * Y * (1 - Y)
            self.grad = lambda X, Y: ((1 - 2 * X) * Y * (1 - Y), X * (1 - X) * (1 - 2 * Y))
            self.laplacian = lambda X, Y: -2 * Y * (1 - Y) - 2 * X * (1 - X)
        self.f = lambda *x: sum(self.grad(*x)) - nu * self.laplacian(*x)


@pytest.mark.parametrize("dim", [1, 2])
def test_direct_projection_reproduces_coarse_function(dim):
    b = _Bundle(dim, 0.3)
    spec = ProblemSpec(dim, "direct", 0.3, 3, 2, 1, exact=b)
    proj = optimal_projection(spec)
    V = proj.coarse.scalar_space
    nodes = V.components[0][0].node_coordinates()[1:-1]
    if dim == 1:
        ref = b.phi(nodes)
    else:
        X, Y = np.meshgrid(nodes, nodes)
        ref = b.phi(X, Y).ravel()
    np.testing.assert_allclose(proj.coeffs, ref, atol=1e-11)
    # polynomial exact solution: Galerkin and VMS also reproduce it
    np.testing.assert_allclose(galerkin_solve(spec).coeffs, ref, atol=1e-11)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_1d_direct_projection_is_nodally_exact(p):
    spec = spec1(N=8, p=p)
    proj = optimal_projection(spec)
    x = np.linspace(0, 1, 9)
    np.testing.assert_allclose(proj.field().phi((locate(8, x),)), spec.exact.phi(x), atol=1e-11)


def test_suyash_greens_without_advection_is_fine_scale_greens():
    spec = spec1(k=2)
    c, f = discretize(spec, 2), discretize(spec, 4)
    Gp = fine_scale_greens(f.A, coarse_to_fine(c, f))
    S = build_suyash_greens(Gp, np.zeros((f.size, f.size)))
    b = np.random.default_rng(0).standard_normal(f.size)
    np.testing.assert_array_equal(S.apply(b), Gp.apply(b))
    with pytest.raises(ValueError):
        SuyashGreens(Gp, np.zeros((2, 2)))


@pytest.mark.parametrize("dim,form", [(1, "direct"), (1, "mixed"), (2, "mixed")])
def test_suyash_output_is_annihilated_by_coarse_tests(dim, form):
    spec = ProblemSpec(dim, form, 0.05, 3, 2, 2, exact=exact_bundle(dim, 0.05))
    sol = vms_solve(spec)
    S, E, A = sol.extras["S"], sol.extras["E"], sol.fine.A.data
    b = np.random.default_rng(3).standard_normal(sol.fine.size)
    y = S.apply(b)
    assert np.abs(E.T @ (A @ y)).max() < 1e-10 * max(1, np.abs(A @ y).max())
    # S solves the fine-scale fixed point exactly
    np.testing.assert_allclose(y, sol.extras["Gp"].apply(b - sol.fine.C @ y), atol=1e-10 * np.abs(y).max())


def test_singular_closure_is_reported():
    spec = spec1(k=1)
    c, f = discretize(spec, 2), discretize(spec, 3)
    Gp = fine_scale_greens(f.A, coarse_to_fine(c, f))
    # I + G'(-A) = E (E^T A E)^-1 E^T A is a rank-deficient projector
    with pytest.raises(SingularMatrixError):
        SuyashGreens(Gp, -f.A.data)


def test_solver_error_carries_parameters(monkeypatch):
    import vmsgreens.solver as solver_mod

    def boom(*a, **k):
        raise SingularMatrixError("rcond=0")

    monkeypatch.setattr(solver_mod, "build_suyash_greens", boom)
    with pytest.raises(SolverError, match="nu=0.01, N=4, p=2, k=2"):
        vms_solve(spec1())


def test_condensed_matches_uncondensed_and_fixed_point():
    spec = spec1(nu=1.0, N=2, p=1, k=1)
    sol = vms_solve(spec)
    ub, up = uncondensed_solve(spec)
    np.testing.assert_allclose(sol.coeffs, ub, rtol=1e-10)
    np.testing.assert_allclose(sol.fine_coeffs, up, rtol=1e-10, atol=1e-12 * np.abs(up).max())
    b = sol.fine.F - sol.fine.C @ sol.extras["E"] @ sol.coeffs
    fp = fixed_point_fine_scales(sol.extras["Gp"], sol.fine.C, b)
    np.testing.assert_allclose(fp, sol.fine_coeffs, rtol=1e-10, atol=1e-12 * np.abs(up).max())


@pytest.mark.parametrize("dim,form", [(1, "direct"), (1, "mixed"), (2, "mixed")])
def test_k_zero_is_galerkin(dim, form):
    spec = ProblemSpec(dim, form, 0.05, 3, 2, 0, exact=exact_bundle(dim, 0.05))
    vms, gal = vms_solve(spec), galerkin_solve(spec)
    np.testing.assert_allclose(vms.coeffs, gal.coeffs, atol=1e-12 * np.abs(gal.coeffs).max())
    assert not np.any(vms.fine_coeffs)


@pytest.mark.parametrize("dim,form", [(1, "direct"), (1, "mixed"), (2, "mixed")])
def test_symmetric_problem_all_solvers_agree(dim, form):
    spec = ProblemSpec(dim, form, 0.2, 3, 2, 2, exact=exact_bundle(dim, 0.2, c=0.0), c=0.0)
    g, p, v = galerkin_solve(spec), optimal_projection(spec), vms_solve(spec)
    scale = np.abs(p.coeffs).max()
    np.testing.assert_allclose(g.coeffs, p.coeffs, atol=1e-11 * scale)
    np.testing.assert_allclose(v.coeffs, p.coeffs, atol=1e-11 * scale)


def test_fine_scale_fields():
    spec = spec1(k=4)
    vms = vms_solve(spec)
    fine = reconstruct_fine_scales(vms)
    s = (locate(4, np.array([0.0, 1.0])),)
    np.testing.assert_allclose(fine.phi(s), 0.0, atol=1e-14)
    gal = galerkin_solve(spec)
    x = (locate(4, np.linspace(0, 1, 33)),)
    assert not np.any(reconstruct_fine_scales(gal).phi(x))
    assert gal.phi_prime is None and gal.q_bar is None
    assert vms.phi_prime is not None


def test_fine_scales_improve_with_k():
    base = spec1(p=2, N=4)
    proj = optimal_projection(base)
    errs = [error_direct(vms_solve(replace(base, k=k)), base.exact, proj).e_fine for k in (2, 4)]
    assert errs[1] < errs[0]


def test_mixed_split_and_flux():
    spec = ProblemSpec(2, "mixed", 0.1, 2, 2, 1, exact=exact_2d(0.1))
    sol = vms_solve(spec)
    q, phi = sol.coarse.split(sol.coeffs)
    assert len(q) == sol.coarse.flux_space.dof_count
    assert len(phi) == sol.coarse.scalar_space.dof_count
    assert sol.q_prime is not None and len(sol.q_prime) == sol.fine.flux_space.dof_count
    with pytest.raises(ValueError):
        discretize(spec1(), 2).flux_space
