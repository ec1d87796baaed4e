"""Gauss-Lobatto-Legendre nodes with nodal (Lagrange) and edge bases on [-1, 1].

The edge polynomials are built from the nodal ones as

    e_i(x) = -sum_{k < i} dh_k/dx(x),    i = 1..p

so that the integral of ``e_i`` over the sub-interval ``[x_{j-1}, x_j]`` is
``delta_ij``. They span the polynomials of degree ``p - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import numpy.typing as npt

NEWTON_TOL = 1e-15
NEWTON_MAXITER = 100


def _check_degree(p: int) -> None:
    if int(p) != p or p < 1:
        raise ValueError(f"polynomial degree must be an integer >= 1, got {p!r}")


def legendre(n: int, x: npt.ArrayLike) -> np.ndarray:
    """Evaluate the Legendre polynomial ``L_n`` by the three-term recurrence."""
    x = np.asarray(x, dtype=np.float64)
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev
    p_curr = x.copy()
    for m in range(1, n):
        p_prev, p_curr = p_curr, ((2 * m + 1) * x * p_curr - m * p_prev) / (m + 1)
    return p_curr


@dataclass(frozen=True)
class NodeSet:
    degree: int
    nodes: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        self.nodes.setflags(write=False)

    def __len__(self) -> int:
        return self.degree + 1


def gll_nodes(p: int) -> NodeSet:
    """Return the ``p + 1`` Gauss-Lobatto-Legendre points of degree ``p``.

    The interior points are the roots of ``L_p'``; they are found with a
    Newton iteration on ``(1 - x^2) L_p'(x)`` written through the Legendre
    Vandermonde recurrence, started from the Chebyshev-Gauss-Lobatto points.
    """
    _check_degree(p)
    n = p + 1
    x = -np.cos(np.pi * np.arange(n) / p)
    vander = np.zeros((n, n))
    for _ in range(NEWTON_MAXITER):
        x_old = x
        vander[:, 0] = 1.0
        vander[:, 1] = x
        for k in range(2, n):
            vander[:, k] = ((2 * k - 1) * x * vander[:, k - 1] - (k - 1) * vander[:, k - 2]) / k
        x = x_old - (x * vander[:, p] - vander[:, p - 1]) / (n * vander[:, p])
        if np.max(np.abs(x - x_old)) <= NEWTON_TOL:
            break
    x[0], x[-1] = -1.0, 1.0
    # enforce exact symmetry of the computed pairs
    x = 0.5 * (x - x[::-1])
    return NodeSet(p, x)


class NodalBasis:
    """Lagrange polynomials through a :class:`NodeSet`."""

    def __init__(self, node_set: NodeSet):
        self.node_set = node_set

    @property
    def degree(self) -> int:
        return self.node_set.degree

    @property
    def nodes(self) -> np.ndarray:
        return self.node_set.nodes

    def __len__(self) -> int:
        return self.degree + 1

    @cached_property
    def _denominators(self) -> np.ndarray:
        xi = self.nodes
        diff = xi[:, None] - xi[None, :]
        np.fill_diagonal(diff, 1.0)
        return np.prod(diff, axis=1)

    @cached_property
    def diff_matrix(self) -> np.ndarray:
        """``D[j, i] = h_i'(x_j)``, the nodal differentiation matrix."""
        return self.derivatives(self.nodes)

    def values(self, x: npt.ArrayLike) -> np.ndarray:
        """All basis functions at the points ``x``; shape ``(len(x), p + 1)``."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        xi = self.nodes
        n = len(xi)
        out = np.empty((x.size, n))
        diff = x[:, None] - xi[None, :]
        for i in range(n):
            mask = np.ones(n, dtype=bool)
            mask[i] = False
            out[:, i] = np.prod(diff[:, mask], axis=1) / self._denominators[i]
        # Kronecker property exactly at the nodes
        hit = np.isclose(diff, 0.0, rtol=0.0, atol=0.0)
        rows = np.any(hit, axis=1)
        out[rows] = hit[rows].astype(np.float64)
        return out

    def derivatives(self, x: npt.ArrayLike) -> np.ndarray:
        """First derivatives of all basis functions; shape ``(len(x), p + 1)``.

        Uses ``h_i'(x) = sum_{m != i} prod_{l != i, m} (x - x_l) / prod_{l != i} (x_i - x_l)``.
        """
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        xi = self.nodes
        n = len(xi)
        diff = x[:, None] - xi[None, :]
        out = np.zeros((x.size, n))
        for i in range(n):
            for m in range(n):
                if m == i:
                    continue
                mask = np.ones(n, dtype=bool)
                mask[[i, m]] = False
                out[:, i] += np.prod(diff[:, mask], axis=1)
            out[:, i] /= self._denominators[i]
        return out


class EdgeBasis:
    """Edge polynomials ``e_1..e_p`` associated with a :class:`NodeSet`."""

    def __init__(self, node_set: NodeSet):
        self.node_set = node_set
        self.nodal = NodalBasis(node_set)

    @property
    def degree(self) -> int:
        return self.node_set.degree

    @property
    def nodes(self) -> np.ndarray:
        return self.node_set.nodes

    def __len__(self) -> int:
        return self.degree

    def values(self, x: npt.ArrayLike) -> np.ndarray:
        """Edge functions at ``x``; column ``i - 1`` holds ``e_i``."""
        dh = self.nodal.derivatives(x)
        return -np.cumsum(dh, axis=1)[:, :-1]

    def integrals(self, a: npt.ArrayLike, b: npt.ArrayLike) -> np.ndarray:
        """Exact integrals of every ``e_i`` over ``[a, b]``; shape ``(len(a), p)``.

        Follows from the telescoping definition:
        ``int_a^b e_i = -sum_{k < i} (h_k(b) - h_k(a))``.
        """
        hb = self.nodal.values(b)
        ha = self.nodal.values(a)
        return -np.cumsum(hb - ha, axis=1)[:, :-1]


def _as_scalar_eval(table: np.ndarray) -> float:
    return float(table[0])


def eval_nodal(basis: NodalBasis, i: int, x: float) -> float:
    if not 0 <= i <= basis.degree:
        raise ValueError(f"nodal index {i} out of range 0..{basis.degree}")
    return _as_scalar_eval(basis.values([x])[:, i])


def eval_nodal_deriv(basis: NodalBasis, i: int, x: float) -> float:
    if not 0 <= i <= basis.degree:
        raise ValueError(f"nodal index {i} out of range 0..{basis.degree}")
    return _as_scalar_eval(basis.derivatives([x])[:, i])


def eval_edge(basis: EdgeBasis, i: int, x: float) -> float:
    """Value of the edge polynomial ``e_i`` (``1 <= i <= p``) at ``x``."""
    if not 1 <= i <= basis.degree:
        raise ValueError(f"edge index {i} out of range 1..{basis.degree}")
    return _as_scalar_eval(basis.values([x])[:, i - 1])
