"""Galerkin, optimal-projection and VMS solvers for steady advection-diffusion.

Both formulations are written as ``(A + C) u = F`` with ``A`` symmetric:

direct (H1_0)::

    A = nu K,   C = (v, c . grad u),   F = (v, f)

mixed (flux q = nu grad phi in H(div), phi in L2)::

    A = [[M / nu, D^T], [D, 0]],   C = [[0, 0], [-(eta, c . q) / nu, 0]],   F = [0, -(eta, f)]

The second mixed row is the advection-diffusion equation multiplied by -1
so that ``A`` stays symmetric.

The VMS solve works on a coarse space of degree ``p`` embedded (by ``E``)
into a fine space of degree ``p + k`` on the same mesh. The fine scales obey
``u' = G'(F - C E u_bar - C u')``, i.e. ``u' = S (F - C E u_bar)`` with
``S = (I + G' C)^{-1} G'``, and the coarse equation is condensed to

    [E^T A E + E^T C E - E^T C S C E] u_bar = E^T F - E^T C S F.
"""

from __future__ import annotations

import logging
from collections.abc import Callable
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np
import scipy.linalg as sla

from .assembly import (
    OperatorMatrix,
    SingularMatrixError,
    advection_matrix,
    divergence_load,
    divergence_matrix,
    gradient_load,
    load_vector,
    lu_factor_checked,
    mass_matrix,
    saddle_matrix,
    solve_dense,
    stiffness_matrix,
    vector_load,
)
from .greens import FineScaleGreens, fine_scale_greens
from .spaces import AxisSampling, FunctionSpace, Mesh, build_space, embedding, stacked_embedding

log = logging.getLogger(__name__)

FORMULATIONS = ("direct", "mixed")
SOLVERS = ("galerkin", "projection", "vms")


class SolverError(RuntimeError):
    """A linear system of a solve could not be factorized."""


@dataclass(frozen=True)
class ProblemSpec:
    """Steady advection-diffusion ``c . grad phi - nu laplacian phi = f`` on [0, 1]^dim.

    ``c`` scales the velocity vector of ones; ``c = 0`` leaves the symmetric
    problem. ``source`` defaults to ``exact.f`` when an exact bundle is given.
    """

    dim: int
    formulation: str
    nu: float
    N: int
    p: int
    k: int = 0
    source: Callable | None = None
    exact: Any = None
    c: float = 1.0

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.formulation not in FORMULATIONS:
            raise ValueError(f"formulation must be one of {FORMULATIONS}, got {self.formulation!r}")
        if not (np.isfinite(self.nu) and self.nu > 0):
            raise ValueError(f"nu must be a positive number, got {self.nu}")
        if self.N < 1 or self.p < 1 or self.k < 0:
            raise ValueError(f"need N >= 1, p >= 1, k >= 0 (got N={self.N}, p={self.p}, k={self.k})")
        if self.source is None and self.exact is None:
            raise ValueError("either a source term or an exact solution bundle is required")

    @property
    def f(self) -> Callable:
        return self.source if self.source is not None else self.exact.f

    @property
    def peclet(self) -> float:
        return abs(self.c) / self.nu

    def describe(self) -> str:
        return (
            f"{self.dim}D {self.formulation}, nu={self.nu:g}, N={self.N}, p={self.p}, k={self.k}, c={self.c:g}"
        )


@dataclass(eq=False)
class Discretization:
    """Assembled symmetric part, advection part and load of one spec at one degree."""

    spec: ProblemSpec
    degree: int
    spaces: tuple[FunctionSpace, ...]
    A: OperatorMatrix
    C: np.ndarray
    F: np.ndarray

    @property
    def mixed(self) -> bool:
        return self.spec.formulation == "mixed"

    @property
    def flux_space(self) -> FunctionSpace:
        if not self.mixed:
            raise ValueError("the direct formulation has no flux unknown")
        return self.spaces[0]

    @property
    def scalar_space(self) -> FunctionSpace:
        return self.spaces[-1]

    @property
    def size(self) -> int:
        return self.A.rows

    def split(self, u: np.ndarray) -> tuple[np.ndarray | None, np.ndarray]:
        """``(flux coefficients or None, scalar coefficients)``."""
        if not self.mixed:
            return None, u
        nq = self.spaces[0].dof_count
        return u[:nq], u[nq:]


def discretize(spec: ProblemSpec, degree: int) -> Discretization:
    mesh = Mesh(spec.dim, spec.N)
    velocity = np.full(spec.dim, spec.c)
    if spec.formulation == "direct":
        V = build_space(mesh, degree, "H1_nodal", constrained=True)
        A = stiffness_matrix(V, spec.nu)
        C = advection_matrix(V, V, velocity).data
        F = load_vector(V, spec.f)
        return Discretization(spec, degree, (V,), A, C, F)
    flux_kind = "H1_nodal" if spec.dim == 1 else "Hdiv_flux"
    Q = build_space(mesh, degree, flux_kind)
    W = build_space(mesh, degree, "L2_volume")
    A = saddle_matrix(mass_matrix(Q, Q, 1.0 / spec.nu), divergence_matrix(W, Q))
    nq, nw = Q.dof_count, W.dof_count
    C = np.zeros((nq + nw, nq + nw))
    C[nq:, :nq] = -advection_matrix(W, Q, velocity / spec.nu).data
    F = np.concatenate([np.zeros(nq), -load_vector(W, spec.f)])
    return Discretization(spec, degree, (Q, W), A, C, F)


def coarse_to_fine(coarse: Discretization, fine: Discretization) -> np.ndarray:
    """Embedding of the (stacked) coarse unknowns into the fine ones."""
    embs = [embedding(c, f) for c, f in zip(coarse.spaces, fine.spaces)]
    if len(embs) == 1:
        return embs[0].matrix
    return stacked_embedding(*embs)


class SuyashGreens:
    """The operator ``S = (I + G' C)^{-1} G'`` mapping dual vectors to fine scales.

    ``I + G' C`` is inverted through the Woodbury identity restricted to the
    columns where ``C`` is nonzero (all of them in the direct form, the flux
    columns in the mixed form), which is exact and avoids a full-size
    factorization when ``C`` has empty columns.
    """

    def __init__(self, Gp: FineScaleGreens, C_f: np.ndarray | OperatorMatrix):
        C = np.asarray(C_f, dtype=np.float64)
        if C.shape != (Gp.n, Gp.n):
            raise ValueError(f"advection operator of shape {C.shape} does not match G' ({Gp.n})")
        self.Gp = Gp
        self.C = C
        self.support = np.flatnonzero(np.any(C != 0.0, axis=0))
        if self.support.size == 0 or Gp.trivial:
            self._lu = None
            return
        self._GC = Gp.apply(C[:, self.support])
        small = np.eye(self.support.size) + self._GC[self.support, :]
        self._lu = lu_factor_checked(small)

    def apply(self, b: np.ndarray) -> np.ndarray:
        y = self.Gp.apply(b)
        if self._lu is None:
            return y
        return y - self._GC @ sla.lu_solve(self._lu, y[self.support])


def build_suyash_greens(Gp: FineScaleGreens, C_f) -> SuyashGreens:
    return SuyashGreens(Gp, C_f)


@dataclass(eq=False)
class VmsSolution:
    spec: ProblemSpec
    solver: str
    coarse: Discretization
    coeffs: np.ndarray
    fine: Discretization | None = None
    fine_coeffs: np.ndarray | None = None
    extras: dict = field(default_factory=dict, repr=False)

    @property
    def phi_bar(self) -> np.ndarray:
        return self.coarse.split(self.coeffs)[1]

    @property
    def q_bar(self) -> np.ndarray | None:
        return self.coarse.split(self.coeffs)[0]

    @property
    def phi_prime(self) -> np.ndarray | None:
        if self.fine is None:
            return None
        return self.fine.split(self.fine_coeffs)[1]

    @property
    def q_prime(self) -> np.ndarray | None:
        if self.fine is None:
            return None
        return self.fine.split(self.fine_coeffs)[0]

    def field(self) -> "DiscreteField":
        return DiscreteField(self.coarse, self.coeffs)


class DiscreteField:
    """Evaluates the scalar and (mixed) flux parts of a stacked coefficient vector.

    Fluxes are returned as approximations of ``grad phi``, i.e. divided by nu.
    """

    def __init__(self, disc: Discretization, coeffs: np.ndarray | None):
        self.disc = disc
        self.coeffs = np.zeros(disc.size) if coeffs is None else np.asarray(coeffs)
        self.q, self.phi_coeffs = disc.split(self.coeffs)

    @property
    def nu(self) -> float:
        return self.disc.spec.nu

    def phi(self, samplings: tuple[AxisSampling, ...]) -> np.ndarray:
        return self.disc.scalar_space.values(self.phi_coeffs, samplings)

    def grad(self, samplings: tuple[AxisSampling, ...]) -> list[np.ndarray]:
        """``grad phi`` (direct) or the flux divided by nu (mixed)."""
        if not self.disc.mixed:
            return self.disc.scalar_space.gradient(self.phi_coeffs, samplings)
        Q = self.disc.flux_space
        vals = Q.values(self.q, samplings)
        if not isinstance(vals, list):
            vals = [vals]
        return [v / self.nu for v in vals]

    def div_flux(self, samplings: tuple[AxisSampling, ...]) -> np.ndarray:
        """Divergence of the (nu-scaled) flux, mixed form only."""
        return self.disc.flux_space.divergence(self.q, samplings)


def _factor_error(spec: ProblemSpec, what: str, exc: Exception) -> SolverError:
    return SolverError(f"{what} failed for {spec.describe()}: {exc}")


def galerkin_solve(spec: ProblemSpec, disc: Discretization | None = None) -> VmsSolution:
    disc = disc or discretize(spec, spec.p)
    try:
        u = solve_dense(disc.A.data + disc.C, disc.F)
    except SingularMatrixError as exc:
        raise _factor_error(spec, "Galerkin solve", exc) from exc
    return VmsSolution(spec, "galerkin", disc, u)


def projection_rhs(disc: Discretization, exact) -> np.ndarray:
    """``a(coarse_i, u_exact)`` evaluated with the over-integration rule."""
    spec = disc.spec
    d = spec.dim
    grads = [lambda *x, k=k: exact.grad(*x)[k] for k in range(d)]
    if not disc.mixed:
        return spec.nu * gradient_load(disc.scalar_space, grads)
    Q, W = disc.spaces
    # (v, kappa^-1 q) + (div v, phi) with kappa^-1 q = grad phi, and (eta, div q) = nu (eta, lap phi)
    top = vector_load(Q, grads) + divergence_load(Q, exact.phi)
    bottom = spec.nu * load_vector(W, exact.laplacian)
    return np.concatenate([top, bottom])


def optimal_projection(spec: ProblemSpec, disc: Discretization | None = None) -> VmsSolution:
    """Projection of the exact solution with the projector of the symmetric operator."""
    if spec.exact is None:
        raise ValueError("the optimal projection needs an exact solution bundle")
    disc = disc or discretize(spec, spec.p)
    try:
        u = disc.A.solve(projection_rhs(disc, spec.exact))
    except SingularMatrixError as exc:
        raise _factor_error(spec, "projection", exc) from exc
    return VmsSolution(spec, "projection", disc, u)


def vms_solve(spec: ProblemSpec, coarse: Discretization | None = None) -> VmsSolution:
    coarse = coarse or discretize(spec, spec.p)
    fine = discretize(spec, spec.p + spec.k)
    E = coarse_to_fine(coarse, fine)
    try:
        Gp = fine_scale_greens(fine.A, E)
        S = build_suyash_greens(Gp, fine.C)
        SF = S.apply(fine.F)
        CE = fine.C @ E
        SCE = S.apply(CE)
        A_total = E.T @ fine.A.data @ E + E.T @ CE - E.T @ fine.C @ SCE
        rhs = E.T @ fine.F - E.T @ fine.C @ SF
        u_bar = solve_dense(A_total, rhs)
    except SingularMatrixError as exc:
        raise _factor_error(spec, "VMS solve", exc) from exc
    u_prime = SF - SCE @ u_bar
    log.debug("vms %s: coarse %d dofs, fine %d dofs", spec.describe(), coarse.size, fine.size)
    return VmsSolution(spec, "vms", coarse, u_bar, fine, u_prime, extras={"E": E, "Gp": Gp, "S": S})


def reconstruct_fine_scales(sol: VmsSolution) -> DiscreteField:
    """Field evaluator for the computed fine scales (zero for non-VMS solutions)."""
    if sol.fine is None:
        return DiscreteField(sol.coarse, None)
    return DiscreteField(sol.fine, sol.fine_coeffs)


def solve(spec: ProblemSpec, solver: str) -> VmsSolution:
    if solver == "galerkin":
        return galerkin_solve(spec)
    if solver == "projection":
        return optimal_projection(spec)
    if solver == "vms":
        return vms_solve(spec)
    raise ValueError(f"unknown solver {solver!r}; expected one of {SOLVERS}")


def with_k(spec: ProblemSpec, k: int) -> ProblemSpec:
    return replace(spec, k=k)


def uncondensed_solve(spec: ProblemSpec) -> tuple[np.ndarray, np.ndarray]:
    """Coarse and fine-scale vectors from the coupled block system, without condensation.

    Solves ``[[E^T (A + C) E, E^T C], [G' C E, I + G' C]] [u_bar; u'] = [E^T F; G' F]``
    with a dense ``G'``; meant as a check on small problems.
    """
    coarse = discretize(spec, spec.p)
    fine = discretize(spec, spec.p + spec.k)
    E = coarse_to_fine(coarse, fine)
    G = fine_scale_greens(fine.A, E).matrix
    A, C = fine.A.data, fine.C
    m, n = E.shape[1], E.shape[0]
    K = np.block([[E.T @ (A + C) @ E, E.T @ C], [G @ C @ E, np.eye(n) + G @ C]])
    x = solve_dense(K, np.concatenate([E.T @ fine.F, G @ fine.F]))
    return x[:m], x[m:]


def fixed_point_fine_scales(
    Gp: FineScaleGreens, C_f: np.ndarray, b: np.ndarray, iterations: int = 50
) -> np.ndarray:
    """Iterate ``u' <- G'(b - C u')`` from zero; converges only when ``G' C`` is a contraction."""
    u = np.zeros_like(np.asarray(b, dtype=np.float64))
    for _ in range(iterations):
        u = Gp.apply(b - C_f @ u)
    return u
