"""Discrete classic and fine-scale Greens' functions, and exact Poisson kernels.

The classic Greens' function of the symmetric operator is approximated on a
fine space as ``g_h(x, s) = psi(x) A^{-1} psi(s)^T``.

The fine-scale Greens' function of the optimal (energy or saddle) projector
onto the coarse space spanned by the columns of ``E`` is

    G' = A^{-1} - E (E^T A E)^{-1} E^T

which is the closed form obtained when the dual functionals of the projector
are taken as ``mu_i(w) = a(coarse_i, w)``, i.e. the rows of ``E^T A``. It
satisfies ``E^T A G' = 0`` and ``G' A E = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import numpy.typing as npt
import scipy.linalg as sla

from .assembly import OperatorMatrix, SingularMatrixError, lu_factor_checked
from .spaces import Embedding, FunctionSpace, SpaceKind, locate

EXACT_2D_TERMS = 100


def basis_row(space: FunctionSpace, point) -> np.ndarray:
    """Values of all basis functions of a scalar space at one point."""
    if space.is_vector:
        raise ValueError("kernels are evaluated on scalar spaces")
    coords = np.atleast_1d(np.asarray(point, dtype=np.float64))
    if coords.size != space.dim:
        raise ValueError(f"expected a {space.dim}D point, got {point!r}")
    comp = space.components[0]
    rows = [f.evaluate(locate(space.mesh.N, [c]))[0] for f, c in zip(comp, coords)]
    out = rows[0]
    for r in rows[1:]:
        out = np.kron(r, out)
    return out


@dataclass(eq=False)
class ClassicGreens:
    """Handle on ``A^{-1}`` and the kernel ``psi(x) A^{-1} psi(s)^T``.

    For a saddle operator the kernel is read off the scalar block, with the
    sign that makes it the Greens' function of ``-laplacian``.
    """

    operator: OperatorMatrix
    scalar_space: FunctionSpace
    scalar_block: slice
    sign: float = 1.0
    _cache: dict = field(default_factory=dict, repr=False)

    def apply(self, b: np.ndarray) -> np.ndarray:
        return self.operator.solve(b)

    def response(self, s) -> np.ndarray:
        """Scalar-space coefficients of ``g_h(., s)``."""
        key = tuple(np.atleast_1d(np.asarray(s, dtype=np.float64)))
        if key not in self._cache:
            rhs = np.zeros(self.operator.rows)
            rhs[self.scalar_block] = basis_row(self.scalar_space, key)
            self._cache[key] = self.sign * self.apply(rhs)[self.scalar_block]
        return self._cache[key]

    def kernel_eval(self, x, s) -> float:
        return float(basis_row(self.scalar_space, x) @ self.response(s))


def classic_greens(fine_operator: OperatorMatrix, fine_space) -> ClassicGreens:
    """Build the discrete classic Greens' function.

    ``fine_space`` is a constrained H1 space (direct form, ``fine_operator`` the
    stiffness matrix) or a ``(flux, L2)`` pair (mixed form, ``fine_operator``
    the saddle matrix ``[[M, D^T], [D, 0]]``).
    """
    if isinstance(fine_space, FunctionSpace):
        if fine_space.kind is not SpaceKind.H1_NODAL:
            raise ValueError("a single space must be H1_nodal; pass (flux, L2) for mixed kernels")
        if fine_operator.rows != fine_space.dof_count:
            raise ValueError("operator does not match the space")
        g = ClassicGreens(fine_operator, fine_space, slice(0, fine_space.dof_count), 1.0)
    else:
        flux, scalar = fine_space
        nq = flux.dof_count
        if fine_operator.rows != nq + scalar.dof_count:
            raise ValueError("saddle operator does not match the (flux, L2) pair")
        # the scalar block of [[M, D^T], [D, 0]] carries -f
        g = ClassicGreens(fine_operator, scalar, slice(nq, nq + scalar.dof_count), -1.0)
    fine_operator.factorize()
    return g


def kernel_eval(g: ClassicGreens, x, s) -> float:
    return g.kernel_eval(x, s)


class FineScaleGreens:
    """Fine-scale Greens' function ``G'`` acting on fine-space dual vectors."""

    def __init__(self, A_fine: OperatorMatrix, E: np.ndarray):
        self.A = A_fine
        self.E = np.asarray(E, dtype=np.float64)
        n, m = self.E.shape
        if n != A_fine.rows:
            raise ValueError(f"embedding has {n} rows, operator has {A_fine.rows}")
        self.n = n
        self.trivial = False
        if m == n:
            if np.linalg.matrix_rank(self.E) < n:
                raise ValueError("square embedding is not invertible")
            # coarse space equals fine space: nothing is unresolved
            self.trivial = True
            return
        A_fine.factorize()
        self.coarse_operator = self.E.T @ A_fine.data @ self.E
        try:
            self._coarse_lu = lu_factor_checked(self.coarse_operator) if m else None
        except SingularMatrixError as exc:
            raise ValueError(f"E^T A E is rank deficient, coarse space is not a valid subspace: {exc}") from exc

    def apply(self, b: np.ndarray) -> np.ndarray:
        b = np.asarray(b, dtype=np.float64)
        if self.trivial:
            return np.zeros_like(b)
        out = self.A.solve(b)
        if self.E.shape[1]:
            out -= self.E @ sla.lu_solve(self._coarse_lu, self.E.T @ b)
        return out

    @cached_property
    def matrix(self) -> np.ndarray:
        """Dense ``G'``; only formed on request."""
        return self.apply(np.eye(self.n))


def fine_scale_greens(A_fine: OperatorMatrix, E: Embedding | np.ndarray) -> FineScaleGreens:
    if isinstance(E, Embedding):
        E = E.matrix
    return FineScaleGreens(A_fine, E)


def exact_greens_1d_poisson(x: npt.ArrayLike, s: npt.ArrayLike) -> np.ndarray | float:
    """Greens' function of ``-u'' = f`` on [0, 1] with homogeneous Dirichlet data."""
    x, s = np.asarray(x, dtype=np.float64), np.asarray(s, dtype=np.float64)
    out = np.where(x <= s, (1.0 - s) * x, s * (1.0 - x))
    return float(out) if out.ndim == 0 else out


def exact_greens_2d_poisson(x, s, n_terms: int = EXACT_2D_TERMS) -> np.ndarray | float:
    """Truncated eigenfunction series for ``-laplacian`` on the unit square.

    ``x`` may be a single point or a pair of coordinate arrays ``(X, Y)``.
    The hyperbolic factor ``sinh(n pi a) sinh(n pi b) / sinh(n pi)`` with
    ``a = min(y, s2)``, ``b = 1 - max(y, s2)`` is evaluated with non-positive
    exponents only.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be >= 1")
    X, Y = (np.asarray(c, dtype=np.float64) for c in x)
    s1, s2 = (float(c) for c in s)
    scalar = X.ndim == 0
    X, Y = np.atleast_1d(X)[..., None], np.atleast_1d(Y)[..., None]
    n = np.arange(1, n_terms + 1, dtype=np.float64)
    npi = n * np.pi
    a = np.minimum(Y, s2)
    b = 1.0 - np.maximum(Y, s2)
    hyper = (
        0.5
        * np.exp(npi * (a + b - 1.0))
        * (-np.expm1(-2.0 * npi * a))
        * (-np.expm1(-2.0 * npi * b))
        / (-np.expm1(-2.0 * npi))
    )
    terms = 2.0 * np.sin(npi * s1) * np.sin(npi * X) / npi * hyper
    out = terms.sum(axis=-1)
    return float(out[0]) if scalar else out
