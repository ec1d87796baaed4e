"""Dense assembly of the bilinear forms and load vectors, plus a cached LU solve.

All forms are separable on the uniform tensor mesh, so every 2D operator is
a sum of Kronecker products of 1D integrals. The 1D integrals are evaluated
element by element with a GLL rule of ``p + 2`` points.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .quadrature import ERROR_NORM_PRECISION, QuadRule, gauss_lobatto_rule, rule_for_precision
from .spaces import Factor1D, FunctionSpace, SpaceKind, quadrature_sampling

ROLES = ("mass", "stiffness", "divergence", "advection", "saddle", "coupling")

# reciprocal condition estimates below this are treated as singular
SINGULAR_RCOND = 1e-15


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a system cannot be factorized to working precision."""


@dataclass(eq=False)
class OperatorMatrix:
    data: np.ndarray
    role: str = "coupling"
    _lu: tuple | None = field(default=None, repr=False)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValueError("operator matrices are two-dimensional")
        if self.role not in ROLES:
            raise ValueError(f"unknown operator role {self.role!r}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def T(self) -> np.ndarray:
        return self.data.T

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def factorize(self) -> tuple:
        """LU factors with partial pivoting; computed once and reused."""
        if self._lu is None:
            self._lu = lu_factor_checked(self.data)
        return self._lu

    def solve(self, b: np.ndarray) -> np.ndarray:
        return sla.lu_solve(self.factorize(), np.asarray(b, dtype=np.float64))


def lu_factor_checked(A: np.ndarray) -> tuple:
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] == 0:
        return (A.copy(), np.zeros(0, dtype=np.int32))
    if not np.all(np.isfinite(A)):
        raise SingularMatrixError("matrix contains non-finite entries")
    anorm = np.linalg.norm(A, 1)
    with np.errstate(all="ignore"):
        lu, piv, info = lapack.dgetrf(A)
    if info > 0 or anorm == 0.0:
        raise SingularMatrixError(f"exactly singular matrix (zero pivot at {info})")
    rcond, _ = lapack.dgecon(lu, anorm, norm="1")
    if rcond < SINGULAR_RCOND:
        raise SingularMatrixError(f"matrix is singular to working precision (rcond={rcond:.2e})")
    return lu, piv


def solve_dense(A: OperatorMatrix | np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``A x = b`` for a vector or a block of right-hand sides."""
    if not isinstance(A, OperatorMatrix):
        A = OperatorMatrix(A)
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != A.rows:
        raise ValueError(f"right-hand side of length {b.shape[0]} does not match {A.shape}")
    return A.solve(b)


# 1D building blocks -------------------------------------------------------------


@lru_cache(maxsize=512)
def _pair_cached(test_key: tuple, trial_key: tuple, d_test: bool, d_trial: bool) -> np.ndarray:
    test, trial = Factor1D(*test_key), Factor1D(*trial_key)
    rule = gauss_lobatto_rule(max(test.p, trial.p) + 2)
    s = quadrature_sampling(test.N, rule)
    Bt = test.evaluate(s, deriv=d_test)
    Bs = trial.evaluate(s, deriv=d_trial)
    out = (Bt * s.weights[:, None]).T @ Bs
    out.setflags(write=False)
    return out


def factor_pair(test: Factor1D, trial: Factor1D, d_test: bool = False, d_trial: bool = False) -> np.ndarray:
    """``int_0^1 (d^a test_i)(d^b trial_j) dx`` for two 1D factors."""
    if test.N != trial.N:
        raise ValueError("factors live on different meshes")
    return _pair_cached(test.key(), trial.key(), d_test, d_trial)


def _tensor(test_comp: Sequence[Factor1D], trial_comp: Sequence[Factor1D], deriv: Sequence[tuple[bool, bool]]):
    mats = [factor_pair(t, s, *d) for t, s, d in zip(test_comp, trial_comp, deriv)]
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(m, out)
    return out


def _no_derivs(dim: int) -> list[tuple[bool, bool]]:
    return [(False, False)] * dim


def _check_mesh(test: FunctionSpace, trial: FunctionSpace) -> None:
    if not test.compatible(trial):
        raise ValueError(f"spaces live on different meshes: {test!r} / {trial!r}")


def _scalar_like(space: FunctionSpace) -> bool:
    return len(space.components) == 1


# bilinear forms ------------------------------------------------------------------


def mass_matrix(test: FunctionSpace, trial: FunctionSpace, weight: float = 1.0) -> OperatorMatrix:
    """``weight * (test_i, trial_j)`` in L2; vector spaces pair component by component."""
    _check_mesh(test, trial)
    if len(test.components) != len(trial.components):
        raise ValueError(f"cannot form a mass matrix between {test!r} and {trial!r}")
    d = test.dim
    blocks = [
        _tensor(tc, sc, _no_derivs(d)) for tc, sc in zip(test.components, trial.components)
    ]
    return OperatorMatrix(weight * sla.block_diag(*blocks), "mass")


def stiffness_matrix(space: FunctionSpace, kappa: float = 1.0) -> OperatorMatrix:
    if space.kind is not SpaceKind.H1_NODAL:
        raise ValueError(f"stiffness needs an H1 space, got {space.kind.value}")
    comp = space.components[0]
    d = space.dim
    K = sum(
        _tensor(comp, comp, [(ax == a, ax == a) for a in range(d)]) for ax in range(d)
    )
    return OperatorMatrix(kappa * K, "stiffness")


def _velocity(c, dim: int) -> np.ndarray:
    c = np.atleast_1d(np.asarray(c, dtype=np.float64))
    if c.size == 1:
        c = np.full(dim, c[0])
    if c.size != dim:
        raise ValueError(f"velocity has {c.size} components in {dim}D")
    return c


def advection_matrix(test: FunctionSpace, trial: FunctionSpace, c) -> OperatorMatrix:
    """Advection pairing for the direct or the mixed formulation.

    Direct (both ``H1_nodal``): ``(test_i, c . grad trial_j)``.
    Mixed (``L2_volume`` test, flux trial): ``(test_i, c . trial_j)``; the
    caller folds the inverse diffusivity into ``c``.
    """
    _check_mesh(test, trial)
    d = test.dim
    c = _velocity(c, d)
    if test.kind is SpaceKind.H1_NODAL and trial.kind is SpaceKind.H1_NODAL:
        tc, sc = test.components[0], trial.components[0]
        C = sum(c[ax] * _tensor(tc, sc, [(False, ax == a) for a in range(d)]) for ax in range(d))
        return OperatorMatrix(C, "advection")
    if test.kind is SpaceKind.L2_VOLUME and _is_flux(trial):
        tc = test.components[0]
        cols = [c[k] * _tensor(tc, comp, _no_derivs(d)) for k, comp in enumerate(trial.components)]
        return OperatorMatrix(np.hstack(cols), "advection")
    raise ValueError(f"no advection pairing between {test.kind.value} and {trial.kind.value}")


def _is_flux(space: FunctionSpace) -> bool:
    if space.dim == 1:
        return space.kind is SpaceKind.H1_NODAL and not space.constrained
    return space.kind is SpaceKind.HDIV_FLUX


def divergence_matrix(test: FunctionSpace, trial: FunctionSpace) -> OperatorMatrix:
    """``(eta_i, div Q_j)`` for an L2 test space and a flux trial space."""
    _check_mesh(test, trial)
    if test.kind is not SpaceKind.L2_VOLUME or not _is_flux(trial):
        raise ValueError(f"divergence pairs L2_volume with a flux space, got {test!r} / {trial!r}")
    d = test.dim
    tc = test.components[0]
    cols = [_tensor(tc, comp, [(False, a == k) for a in range(d)]) for k, comp in enumerate(trial.components)]
    return OperatorMatrix(np.hstack(cols), "divergence")


def saddle_matrix(Mq: OperatorMatrix, D: OperatorMatrix) -> OperatorMatrix:
    """Symmetric block operator ``[[Mq, D^T], [D, 0]]``."""
    Mq_, D_ = np.asarray(Mq), np.asarray(D)
    if Mq_.shape[0] != Mq_.shape[1] or D_.shape[1] != Mq_.shape[0]:
        raise ValueError(f"incompatible blocks {Mq_.shape} and {D_.shape}")
    m = D_.shape[0]
    A = np.block([[Mq_, D_.T], [D_, np.zeros((m, m))]])
    return OperatorMatrix(A, "saddle")


# linear functionals ----------------------------------------------------------------


def _grid(space: FunctionSpace, rule: QuadRule):
    s = quadrature_sampling(space.mesh.N, rule)
    samplings = (s,) * space.dim
    if space.dim == 1:
        return samplings, (s.x,), s.weights
    X, Y = np.meshgrid(s.x, s.x)
    return samplings, (X, Y), np.outer(s.weights, s.weights)


def _integrate_component(space: FunctionSpace, comp: int, samplings, G: np.ndarray, deriv_axis=None) -> np.ndarray:
    """``int basis * G`` (or ``d basis / dx_axis``) for every function of one component."""
    factors = space.components[comp]
    mats = [f.evaluate(s, deriv=(deriv_axis == ax)) for ax, (f, s) in enumerate(zip(factors, samplings))]
    if space.dim == 1:
        return mats[0].T @ G
    return (mats[1].T @ G @ mats[0]).ravel()


def _default_rule(rule: QuadRule | None) -> QuadRule:
    return rule if rule is not None else rule_for_precision(ERROR_NORM_PRECISION)


def load_vector(test: FunctionSpace, f: Callable, rule: QuadRule | None = None) -> np.ndarray:
    """``F_i = int test_i f`` for a scalar test space (default rule: precision 25)."""
    if not _scalar_like(test):
        raise ValueError("load vectors of scalar data need a scalar test space")
    rule = _default_rule(rule)
    samplings, coords, W = _grid(test, rule)
    fx = np.broadcast_to(np.asarray(f(*coords), dtype=np.float64), W.shape)
    return _integrate_component(test, 0, samplings, W * fx)


def vector_load(test: FunctionSpace, g: Sequence[Callable], rule: QuadRule | None = None) -> np.ndarray:
    """``int Q_i . g`` for a flux test space and vector data ``g``."""
    rule = _default_rule(rule)
    samplings, coords, W = _grid(test, rule)
    parts = []
    for k in range(len(test.components)):
        gk = np.broadcast_to(np.asarray(g[k](*coords), dtype=np.float64), W.shape)
        parts.append(_integrate_component(test, k, samplings, W * gk))
    return np.concatenate(parts)


def divergence_load(test: FunctionSpace, g: Callable, rule: QuadRule | None = None) -> np.ndarray:
    """``int (div Q_i) g`` for a flux test space."""
    rule = _default_rule(rule)
    samplings, coords, W = _grid(test, rule)
    gx = np.broadcast_to(np.asarray(g(*coords), dtype=np.float64), W.shape)
    parts = [
        _integrate_component(test, k, samplings, W * gx, deriv_axis=k) for k in range(len(test.components))
    ]
    return np.concatenate(parts)


def gradient_load(test: FunctionSpace, g: Sequence[Callable], rule: QuadRule | None = None) -> np.ndarray:
    """``int grad(v_i) . g`` for an H1 test space."""
    if test.kind is not SpaceKind.H1_NODAL:
        raise ValueError("gradient loads need an H1 test space")
    rule = _default_rule(rule)
    samplings, coords, W = _grid(test, rule)
    out = np.zeros(test.dof_count)
    for ax in range(test.dim):
        gk = np.broadcast_to(np.asarray(g[ax](*coords), dtype=np.float64), W.shape)
        out += _integrate_component(test, 0, samplings, W * gk, deriv_axis=ax)
    return out
