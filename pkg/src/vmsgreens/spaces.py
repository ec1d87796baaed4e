"""Uniform tensor meshes on [0, 1]^d, spectral-element spaces and coarse-to-fine embeddings.

Every space is built from one-dimensional *factors* (a nodal or an edge
family on the N uniform elements of one axis):

* ``H1_nodal``   - (nodal,) in 1D, (nodal, nodal) in 2D
* ``Hdiv_flux``  - two components, q_x = nodal(x) * edge(y), q_y = edge(x) * nodal(y)
* ``L2_volume``  - (edge,) in 1D, (edge, edge) in 2D

Within a component the global index is ``iy * nx + ix`` (x runs fastest),
so tensor-product operators are ``np.kron(Y, X)``. Vector components are
stacked one after the other.

Edge functions are mapped as volume forms: on an element of width ``h`` the
physical function is ``e_i(xi) * 2 / h``, so its degrees of freedom are
integrals over the sub-cells between consecutive GLL nodes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import numpy.typing as npt
import scipy.linalg as sla

from .polybasis import EdgeBasis, NodalBasis, gll_nodes
from .quadrature import QuadRule


class SpaceKind(str, enum.Enum):
    H1_NODAL = "H1_nodal"
    HDIV_FLUX = "Hdiv_flux"
    L2_VOLUME = "L2_volume"


@dataclass(frozen=True)
class Mesh:
    dim: int
    elements_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"only 1D and 2D meshes are supported, got dim={self.dim}")
        if int(self.elements_per_axis) != self.elements_per_axis or self.elements_per_axis < 1:
            raise ValueError(f"elements_per_axis must be >= 1, got {self.elements_per_axis}")

    @property
    def N(self) -> int:
        return self.elements_per_axis

    @property
    def h(self) -> float:
        return 1.0 / self.elements_per_axis

    @property
    def boundaries(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.elements_per_axis + 1)

    @property
    def element_measures(self) -> np.ndarray:
        widths = np.diff(self.boundaries)
        if self.dim == 1:
            return widths
        return np.outer(widths, widths).ravel()


@dataclass(frozen=True)
class AxisSampling:
    """Points along one axis given as (element, reference coordinate) pairs."""

    elements: np.ndarray
    xi: np.ndarray
    x: np.ndarray
    weights: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.x)


def locate(N: int, x: npt.ArrayLike) -> AxisSampling:
    """Assign physical points to elements; interface points go to the right element."""
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if np.any((x < 0.0) | (x > 1.0)):
        raise ValueError("sample points must lie in [0, 1]")
    elem = np.minimum(np.floor(x * N).astype(int), N - 1)
    xi = 2.0 * (x * N - elem) - 1.0
    return AxisSampling(elem, np.clip(xi, -1.0, 1.0), x)


def quadrature_sampling(N: int, rule: QuadRule) -> AxisSampling:
    """Element-by-element quadrature points and physical weights along one axis."""
    nq = len(rule)
    elem = np.repeat(np.arange(N), nq)
    xi = np.tile(rule.points, N)
    x = (elem + 0.5 * (xi + 1.0)) / N
    w = np.tile(rule.weights, N) * 0.5 / N
    return AxisSampling(elem, xi, x, w)


class Factor1D:
    """One-dimensional global basis (nodal or edge family) on N uniform elements."""

    def __init__(self, N: int, p: int, family: str, constrained: bool = False):
        if family not in ("nodal", "edge"):
            raise ValueError(f"unknown factor family {family!r}")
        if constrained and family != "nodal":
            raise ValueError("only nodal factors carry Dirichlet constraints")
        self.N = N
        self.p = p
        self.family = family
        self.constrained = constrained
        self.node_set = gll_nodes(p)
        self._nodal = NodalBasis(self.node_set)
        self._edge = EdgeBasis(self.node_set) if family == "edge" else None

    def __repr__(self) -> str:
        c = ", constrained" if self.constrained else ""
        return f"Factor1D(N={self.N}, p={self.p}, {self.family}{c})"

    def key(self) -> tuple:
        return (self.N, self.p, self.family, self.constrained)

    @property
    def n_local(self) -> int:
        return self.p + 1 if self.family == "nodal" else self.p

    @property
    def n_full(self) -> int:
        """Number of DOFs before boundary removal."""
        return self.N * self.p + 1 if self.family == "nodal" else self.N * self.p

    @cached_property
    def kept(self) -> np.ndarray:
        """Indices of the full numbering retained by this factor."""
        if self.constrained:
            return np.arange(1, self.n_full - 1)
        return np.arange(self.n_full)

    @property
    def ndofs(self) -> int:
        return len(self.kept)

    @cached_property
    def _full_to_kept(self) -> np.ndarray:
        m = -np.ones(self.n_full, dtype=int)
        m[self.kept] = np.arange(len(self.kept))
        return m

    def local_to_global(self, elem: np.ndarray) -> np.ndarray:
        """Global (kept) index of each local function on ``elem``; -1 where removed."""
        elem = np.asarray(elem)
        full = elem[:, None] * self.p + np.arange(self.n_local)[None, :]
        return self._full_to_kept[full]

    def local_values(self, xi: np.ndarray, deriv: bool = False) -> np.ndarray:
        h = 1.0 / self.N
        if self.family == "nodal":
            if deriv:
                return self._nodal.derivatives(xi) * (2.0 / h)
            return self._nodal.values(xi)
        if deriv:
            raise ValueError("edge factors are not differentiated")
        return self._edge.values(xi) * (2.0 / h)

    def evaluate(self, sampling: AxisSampling, deriv: bool = False) -> np.ndarray:
        """Dense ``(len(sampling), ndofs)`` matrix of global basis values."""
        out = np.zeros((len(sampling), self.ndofs))
        # group by unique reference coordinates to limit basis evaluations
        xi_u, inv = np.unique(sampling.xi, return_inverse=True)
        local = self.local_values(xi_u, deriv)[inv]
        glob = self.local_to_global(sampling.elements)
        rows = np.repeat(np.arange(len(sampling)), self.n_local)
        cols = glob.ravel()
        vals = local.ravel()
        keep = cols >= 0
        np.add.at(out, (rows[keep], cols[keep]), vals[keep])
        return out

    def node_coordinates(self) -> np.ndarray:
        """Physical coordinates of the nodal DOFs (full numbering)."""
        if self.family != "nodal":
            raise ValueError("edge factors have no nodes")
        elem = np.arange(self.N)
        x = (elem[:, None] + 0.5 * (self.node_set.nodes[None, :] + 1.0)) / self.N
        return np.concatenate([x[:, :-1].ravel(), [1.0]])


def embed_factor(coarse: Factor1D, fine: Factor1D) -> np.ndarray:
    """Fine-factor coefficients of every coarse factor function.

    Nodal factors are interpolated at the fine GLL nodes; edge factors are
    histopolated, i.e. integrated over each fine sub-cell.
    """
    if coarse.N != fine.N or coarse.family != fine.family or coarse.constrained != fine.constrained:
        raise ValueError(f"cannot embed {coarse!r} into {fine!r}")
    if fine.p < coarse.p:
        raise ValueError("fine degree must not be lower than coarse degree")
    N = coarse.N
    if coarse.family == "nodal":
        xf = fine.node_coordinates()
        full_coarse = Factor1D(N, coarse.p, "nodal")
        E = full_coarse.evaluate(locate(N, xf))
        return E[np.ix_(fine.kept, coarse.kept)]
    xi_f = fine.node_set.nodes
    ref = coarse._edge.integrals(xi_f[:-1], xi_f[1:])  # (p_fine, p_coarse)
    return np.kron(np.eye(N), ref)


@dataclass(frozen=True, eq=False)
class FunctionSpace:
    mesh: Mesh
    degree: int
    kind: SpaceKind
    constrained: bool
    components: tuple[tuple[Factor1D, ...], ...]

    def __repr__(self) -> str:
        c = ", constrained" if self.constrained else ""
        return (
            f"FunctionSpace({self.mesh.dim}D, N={self.mesh.N}, p={self.degree}, "
            f"{self.kind.value}{c}, dofs={self.dof_count})"
        )

    @property
    def dim(self) -> int:
        return self.mesh.dim

    @property
    def is_vector(self) -> bool:
        return self.kind is SpaceKind.HDIV_FLUX

    @property
    def component_sizes(self) -> list[int]:
        return [int(np.prod([f.ndofs for f in comp])) for comp in self.components]

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.component_sizes)])

    @property
    def dof_count(self) -> int:
        return int(sum(self.component_sizes))

    def compatible(self, other: FunctionSpace) -> bool:
        return self.mesh == other.mesh

    def component_field(
        self,
        coeffs: np.ndarray,
        comp: int,
        samplings: tuple[AxisSampling, ...],
        deriv_axis: int | None = None,
    ) -> np.ndarray:
        """Values (or one partial derivative) of one component on a tensor sampling.

        Returns an array of shape ``(len(s_x),)`` in 1D and ``(len(s_y), len(s_x))``
        in 2D.
        """
        factors = self.components[comp]
        u = np.asarray(coeffs)[self.offsets[comp] : self.offsets[comp + 1]]
        mats = [f.evaluate(s, deriv=(deriv_axis == ax)) for ax, (f, s) in enumerate(zip(factors, samplings))]
        if self.dim == 1:
            return mats[0] @ u
        U = u.reshape(factors[1].ndofs, factors[0].ndofs)
        return mats[1] @ U @ mats[0].T

    def values(self, coeffs: np.ndarray, samplings: tuple[AxisSampling, ...]) -> np.ndarray | list[np.ndarray]:
        """Scalar field values, or the list of vector components for flux spaces."""
        if self.is_vector:
            return [self.component_field(coeffs, c, samplings) for c in range(len(self.components))]
        return self.component_field(coeffs, 0, samplings)

    def gradient(self, coeffs: np.ndarray, samplings: tuple[AxisSampling, ...]) -> list[np.ndarray]:
        if self.kind is not SpaceKind.H1_NODAL:
            raise ValueError(f"gradient is only defined on H1 spaces, not {self.kind.value}")
        return [self.component_field(coeffs, 0, samplings, deriv_axis=ax) for ax in range(self.dim)]

    def divergence(self, coeffs: np.ndarray, samplings: tuple[AxisSampling, ...]) -> np.ndarray:
        """Divergence of a flux field (the derivative, for a 1D nodal flux)."""
        if self.dim == 1 and self.kind is SpaceKind.H1_NODAL:
            return self.component_field(coeffs, 0, samplings, deriv_axis=0)
        if self.kind is not SpaceKind.HDIV_FLUX:
            raise ValueError(f"divergence is not defined on {self.kind.value}")
        return sum(self.component_field(coeffs, c, samplings, deriv_axis=c) for c in range(self.dim))


def _as_kind(kind) -> SpaceKind:
    try:
        return SpaceKind(kind)
    except ValueError:
        raise ValueError(f"unknown space kind {kind!r}") from None


def build_space(mesh: Mesh, p: int, kind: SpaceKind | str, constrained: bool = False) -> FunctionSpace:
    """Construct a spectral-element space of degree ``p`` on ``mesh``.

    ``constrained`` removes the boundary DOFs of an ``H1_nodal`` space
    (strong homogeneous Dirichlet conditions).
    """
    kind = _as_kind(kind)
    if int(p) != p or p < 1:
        raise ValueError(f"polynomial degree must be >= 1, got {p!r}")
    if constrained and kind is not SpaceKind.H1_NODAL:
        raise ValueError("strong Dirichlet constraints apply to H1_nodal spaces only")
    N = mesh.N
    if kind is SpaceKind.H1_NODAL:
        f = Factor1D(N, p, "nodal", constrained)
        comps = ((f,) * mesh.dim,)
    elif kind is SpaceKind.L2_VOLUME:
        f = Factor1D(N, p, "edge")
        comps = ((f,) * mesh.dim,)
    else:
        if mesh.dim == 1:
            raise ValueError("Hdiv_flux is a 2D space; 1D mixed problems use H1_nodal fluxes")
        nodal, edge = Factor1D(N, p, "nodal"), Factor1D(N, p, "edge")
        comps = ((nodal, edge), (edge, nodal))
    return FunctionSpace(mesh, int(p), kind, bool(constrained), comps)


@dataclass(frozen=True, eq=False)
class Embedding:
    coarse: FunctionSpace
    fine: FunctionSpace
    matrix: np.ndarray

    @property
    def E(self) -> np.ndarray:
        return self.matrix


def embedding(coarse: FunctionSpace, fine: FunctionSpace) -> Embedding:
    """Matrix whose column ``i`` holds the fine coefficients of coarse basis function ``i``."""
    if coarse.mesh != fine.mesh or coarse.kind is not fine.kind or coarse.constrained != fine.constrained:
        raise ValueError(f"cannot embed {coarse!r} into {fine!r}")
    if fine.degree < coarse.degree:
        raise ValueError("fine space must have a degree at least as high as the coarse space")
    blocks = []
    for cc, fc in zip(coarse.components, fine.components):
        mats = [embed_factor(c, f) for c, f in zip(cc, fc)]
        block = mats[0]
        for m in mats[1:]:
            block = np.kron(m, block)
        blocks.append(block)
    return Embedding(coarse, fine, sla.block_diag(*blocks))


def stacked_embedding(*embeddings: Embedding) -> np.ndarray:
    """Block-diagonal embedding for a stacked (flux, scalar) unknown."""
    return sla.block_diag(*(e.matrix for e in embeddings))
