"""Exact solutions, error norms, convergence sweeps and orthogonality tables.

The exact profiles are built from

    g(t) = t - (exp(a (t - 1)) - exp(-a)) / (1 - exp(-a)),   a = 1 / nu

which solves ``g' - nu g'' = 1`` with ``g(0) = g(1) = 0``. Only non-positive
exponents are ever evaluated, so large Peclet numbers do not overflow.

Mixed fluxes are compared in gradient scaling, i.e. the computed flux
``q = nu grad phi`` is divided by nu before it meets ``grad phi_exact``.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .quadrature import ERROR_NORM_PRECISION, rule_for_precision
from .solver import (
    ProblemSpec,
    SolverError,
    VmsSolution,
    coarse_to_fine,
    discretize,
    galerkin_solve,
    optimal_projection,
    reconstruct_fine_scales,
    vms_solve,
)
from .spaces import quadrature_sampling

log = logging.getLogger(__name__)

AXES = ("h", "p", "k")
MIN_RATE_POINTS = 3
H_RATE_WINDOW = 3


def _profile(t, alpha: float):
    """``g``, ``g'``, ``g''`` and ``alpha E(t)`` with ``E = exp(alpha (t-1)) / (1 - exp(-alpha))``."""
    t = np.asarray(t, dtype=np.float64)
    denom = -math.expm1(-alpha)
    e = np.exp(alpha * (t - 1.0))
    aE = alpha * e / denom
    g = t - (e - math.exp(-alpha)) / denom
    return g, 1.0 - aE, -alpha * aE, aE


@dataclass(frozen=True)
class ExactBundle:
    """Exact solution with analytic derivatives and the matching source term.

    All callables take one coordinate array per axis (``phi(x)`` in 1D,
    ``phi(X, Y)`` in 2D); ``grad`` returns a tuple with one entry per axis.
    """

    dim: int
    nu: float
    c: float
    phi: Callable
    grad: Callable
    laplacian: Callable
    f: Callable

    @property
    def alpha(self) -> float:
        return 1.0 / self.nu

    @property
    def peclet(self) -> float:
        return abs(self.c) / self.nu

    def residual(self, *x) -> np.ndarray:
        """``c . grad phi - nu laplacian phi - f`` (zero for a consistent bundle)."""
        adv = sum(self.c * g for g in self.grad(*x))
        return adv - self.nu * self.laplacian(*x) - self.f(*x)


def _check_nu(nu: float) -> float:
    nu = float(nu)
    if not (np.isfinite(nu) and nu > 0):
        raise ValueError(f"nu must be a positive number, got {nu}")
    return nu


def exact_1d(nu: float, c: float = 1.0) -> ExactBundle:
    """``phi = g(x)``; the source is 1 for the unit velocity.

    For other ``c`` the same profile is kept and ``f = c g' - nu g''``.
    """
    nu = _check_nu(nu)
    a = 1.0 / nu

    def phi(x):
        return _profile(x, a)[0]

    def grad(x):
        return (_profile(x, a)[1],)

    def lap(x):
        return _profile(x, a)[2]

    def f(x):
        # c g' - nu g'' = c + (1 - c) alpha E
        aE = _profile(x, a)[3]
        return c + (1.0 - c) * aE

    return ExactBundle(1, nu, float(c), phi, grad, lap, f)


def exact_2d(nu: float, c: float = 1.0) -> ExactBundle:
    """Manufactured ``phi = g(x) g(y)`` with ``f = g(x) + g(y)`` for the unit velocity."""
    nu = _check_nu(nu)
    a = 1.0 / nu

    def phi(X, Y):
        return _profile(X, a)[0] * _profile(Y, a)[0]

    def grad(X, Y):
        gx, dgx = _profile(X, a)[:2]
        gy, dgy = _profile(Y, a)[:2]
        return (dgx * gy, gx * dgy)

    def lap(X, Y):
        gx, _, ddgx, _ = _profile(X, a)
        gy, _, ddgy, _ = _profile(Y, a)
        return ddgx * gy + gx * ddgy

    def f(X, Y):
        gx, _, _, aEx = _profile(X, a)
        gy, _, _, aEy = _profile(Y, a)
        return (c + (1.0 - c) * aEx) * gy + (c + (1.0 - c) * aEy) * gx

    return ExactBundle(2, nu, float(c), phi, grad, lap, f)


def poisson_1d(nu: float) -> ExactBundle:
    """Pure diffusion with unit source: ``phi = x (1 - x) / (2 nu)``."""
    nu = _check_nu(nu)
    return ExactBundle(
        1,
        nu,
        0.0,
        lambda x: x * (1.0 - x) / (2.0 * nu),
        lambda x: ((1.0 - 2.0 * x) / (2.0 * nu),),
        lambda x: np.full_like(np.asarray(x, dtype=np.float64), -1.0 / nu),
        lambda x: np.ones_like(np.asarray(x, dtype=np.float64)),
    )


def poisson_2d(nu: float) -> ExactBundle:
    """Pure diffusion with ``phi = x (1 - x) y (1 - y)``."""
    nu = _check_nu(nu)

    def lap(X, Y):
        return -2.0 * (X * (1.0 - X) + Y * (1.0 - Y))

    return ExactBundle(
        2,
        nu,
        0.0,
        lambda X, Y: X * (1.0 - X) * Y * (1.0 - Y),
        lambda X, Y: ((1.0 - 2.0 * X) * Y * (1.0 - Y), X * (1.0 - X) * (1.0 - 2.0 * Y)),
        lap,
        lambda X, Y: -nu * lap(X, Y),
    )


def exact_bundle(dim: int, nu: float, c: float = 1.0) -> ExactBundle:
    """Boundary-layer bundle for advective problems, smooth Poisson bundle for ``c = 0``."""
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if c == 0.0:
        return poisson_1d(nu) if dim == 1 else poisson_2d(nu)
    return exact_1d(nu, c) if dim == 1 else exact_2d(nu, c)


@dataclass(frozen=True)
class ErrorReport:
    e_exact: float
    e_projection: float
    e_fine: float
    labels: tuple[str, str, str]

    def __post_init__(self):
        for name in ("e_exact", "e_projection", "e_fine"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0.0):
                raise ValueError(f"{name} must be finite and non-negative, got {v}")


class _ErrorGrid:
    """Tensor over-integration points and weights on the coarse mesh."""

    def __init__(self, dim: int, N: int):
        s = quadrature_sampling(N, rule_for_precision(ERROR_NORM_PRECISION))
        self.samplings = (s,) * dim
        if dim == 1:
            self.coords = (s.x,)
            self.W = s.weights
        else:
            X, Y = np.meshgrid(s.x, s.x)
            self.coords = (X, Y)
            self.W = np.outer(s.weights, s.weights)

    def sq(self, v) -> float:
        return float(np.sum(self.W * np.asarray(v) ** 2))


def _fields(sol: VmsSolution, projection: VmsSolution, bundle: ExactBundle, formulation: str):
    if sol.spec.formulation != formulation or projection.spec.formulation != formulation:
        raise ValueError(f"expected {formulation} solutions, got {sol.spec.formulation}/{projection.spec.formulation}")
    if projection.solver != "projection":
        raise ValueError("the reference solution must come from optimal_projection")
    if bundle.dim != sol.spec.dim:
        raise ValueError("bundle dimension does not match the solution")
    grid = _ErrorGrid(sol.spec.dim, sol.spec.N)
    return grid, sol.field(), projection.field(), reconstruct_fine_scales(sol)


def error_direct(sol: VmsSolution, bundle: ExactBundle, projection: VmsSolution) -> ErrorReport:
    """Full H1 distances to the exact solution, to the projection, and between fine scales."""
    grid, bar, proj, fine = _fields(sol, projection, bundle, "direct")
    s, x = grid.samplings, grid.coords
    phi, gphi = bundle.phi(*x), bundle.grad(*x)
    vb, gb = bar.phi(s), bar.grad(s)
    vp, gp = proj.phi(s), proj.grad(s)
    vf, gf = fine.phi(s), fine.grad(s)

    def h1(v, g):
        return math.sqrt(grid.sq(v) + sum(grid.sq(gi) for gi in g))

    return ErrorReport(
        h1(vb - phi, [a - b for a, b in zip(gb, gphi)]),
        h1(vb - vp, [a - b for a, b in zip(gb, gp)]),
        # exact fine scales are phi - P phi
        h1(vf - (phi - vp), [a - (b - c) for a, b, c in zip(gf, gphi, gp)]),
        ("H1", "H1", "H1"),
    )


def error_mixed(sol: VmsSolution, bundle: ExactBundle, projection: VmsSolution) -> ErrorReport:
    """Divergence error against the PDE data and L2 distances in (phi, grad phi)."""
    grid, bar, proj, fine = _fields(sol, projection, bundle, "mixed")
    s, x = grid.samplings, grid.coords
    c = sol.spec.c
    phi, gphi = bundle.phi(*x), bundle.grad(*x)
    data = sum(c * g for g in gphi) - bundle.f(*x)
    e_exact = math.sqrt(grid.sq(bar.div_flux(s) - data))

    vb, qb = bar.phi(s), bar.grad(s)
    vp, qp = proj.phi(s), proj.grad(s)
    vf, qf = fine.phi(s), (fine.grad(s) if sol.fine is not None else [np.zeros_like(phi)] * sol.spec.dim)

    def l2pair(v, q):
        return math.sqrt(grid.sq(v) + sum(grid.sq(qi) for qi in q))

    return ErrorReport(
        e_exact,
        l2pair(vb - vp, [a - b for a, b in zip(qb, qp)]),
        l2pair(vf - (phi - vp), [a - (b - c_) for a, b, c_ in zip(qf, gphi, qp)]),
        ("Hdiv-seminorm", "L2", "L2"),
    )


def error_report(sol: VmsSolution, bundle: ExactBundle, projection: VmsSolution) -> ErrorReport:
    if sol.spec.formulation == "direct":
        return error_direct(sol, bundle, projection)
    return error_mixed(sol, bundle, projection)


def fit_rate(values: Sequence[float], errors: Sequence[float], axis: str) -> float:
    """Convergence rate: ``-d log(e) / d log(N)`` for h, ``-d log(e) / d(param)`` for p and k.

    Uses every finite positive error on the p and k axes and the last three
    on the h axis. Returns nan when fewer than three points qualify.
    """
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    v = np.asarray(values, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    ok = np.isfinite(e) & (e > 0)
    v, e = v[ok], e[ok]
    if axis == "h":
        order = np.argsort(v)
        v, e = v[order][-H_RATE_WINDOW:], e[order][-H_RATE_WINDOW:]
    if len(v) < MIN_RATE_POINTS:
        return float("nan")
    xs = np.log(v) if axis == "h" else v
    return float(-np.polyfit(xs, np.log(e), 1)[0])


COLUMNS = ("err_galerkin", "err_projection", "err_vms", "err_vms_vs_projection", "err_fine_scales")


@dataclass
class SweepPoint:
    value: int
    errors: dict[str, float] | None
    reports: dict[str, ErrorReport] = field(default_factory=dict, repr=False)
    failure: str | None = None

    @property
    def ok(self) -> bool:
        return self.errors is not None


@dataclass
class ConvergenceRecord:
    axis: str
    points: list[SweepPoint]
    rates: dict[str, float]

    @property
    def n_ok(self) -> int:
        return sum(p.ok for p in self.points)

    def column(self, name: str) -> np.ndarray:
        return np.array([p.errors[name] if p.ok else np.nan for p in self.points])

    @property
    def values(self) -> list[int]:
        return [p.value for p in self.points]


def _point_spec(template: ProblemSpec, axis: str, value: int) -> ProblemSpec:
    key = {"h": "N", "p": "p", "k": "k"}[axis]
    return replace(template, **{key: int(value)})


def evaluate_point(spec: ProblemSpec) -> dict[str, ErrorReport]:
    """Galerkin, projection and VMS error reports for one spec (shared coarse system)."""
    if spec.exact is None:
        raise ValueError("error evaluation needs an exact solution bundle")
    coarse = discretize(spec, spec.p)
    gal = galerkin_solve(spec, coarse)
    proj = optimal_projection(spec, coarse)
    vms = vms_solve(spec, coarse)
    return {name: error_report(s, spec.exact, proj) for name, s in (("galerkin", gal), ("projection", proj), ("vms", vms))}


def convergence_sweep(axis: str, grid: Sequence[int], template: ProblemSpec) -> ConvergenceRecord:
    """Run all three solvers over a parameter grid and fit rates per error column."""
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    values = sorted({int(v) for v in grid})
    if len(values) < MIN_RATE_POINTS:
        raise ValueError(f"a sweep needs at least {MIN_RATE_POINTS} distinct grid points, got {len(values)}")
    points = []
    for v in values:
        try:
            spec = _point_spec(template, axis, v)
            rep = evaluate_point(spec)
        except (SolverError, ValueError, np.linalg.LinAlgError) as exc:
            log.warning("sweep point %s=%s failed: %s", axis, v, exc)
            points.append(SweepPoint(v, None, failure=str(exc)))
            continue
        errors = {
            "err_galerkin": rep["galerkin"].e_exact,
            "err_projection": rep["projection"].e_exact,
            "err_vms": rep["vms"].e_exact,
            "err_vms_vs_projection": rep["vms"].e_projection,
            "err_fine_scales": rep["vms"].e_fine,
        }
        points.append(SweepPoint(v, errors, rep))
    record = ConvergenceRecord(axis, points, {})
    record.rates = {c: fit_rate(record.values, record.column(c), axis) for c in COLUMNS}
    return record


@dataclass(frozen=True)
class OrthoTable:
    """Signed inner product of largest magnitude per (p, k)."""

    family: str
    p_values: tuple[int, ...]
    k_values: tuple[int, ...]
    values: np.ndarray

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0


def _largest(v: np.ndarray) -> float:
    if v.size == 0:
        return 0.0
    return float(v[np.argmax(np.abs(v))])


def orthogonality_entries(spec: ProblemSpec) -> dict[str, float]:
    """Coarse-test inner products with the computed fine scales of one VMS solve.

    direct: ``(grad v, grad phi')``; mixed: ``(v, q') + (div v, phi')`` and
    ``(eta, div q')`` with ``q'`` in gradient scaling.
    """
    sol = vms_solve(spec)
    if sol.fine is None:
        return {"gradient": 0.0} if spec.formulation == "direct" else {"constitutive": 0.0, "divergence": 0.0}
    E = sol.extras.get("E")
    if E is None:
        E = coarse_to_fine(sol.coarse, sol.fine)
    fine, u = sol.fine, sol.fine_coeffs
    if spec.formulation == "direct":
        return {"gradient": _largest(E.T @ (fine.A.data @ u) / spec.nu)}
    r = E.T @ (fine.A.data @ u)
    nq = sol.coarse.spaces[0].dof_count
    return {"constitutive": _largest(r[:nq]), "divergence": _largest(r[nq:] / spec.nu)}


def orthogonality_table(
    formulation: str, p_list: Sequence[int], k_list: Sequence[int], template: ProblemSpec
) -> list[OrthoTable]:
    """One table per inner-product family (one for direct, two for mixed)."""
    if formulation not in ("direct", "mixed"):
        raise ValueError(f"unknown formulation {formulation!r}")
    base = replace(template, formulation=formulation)
    entries = {(p, k): orthogonality_entries(replace(base, p=int(p), k=int(k))) for p in p_list for k in k_list}
    families = next(iter(entries.values())).keys() if entries else []
    return [
        OrthoTable(
            fam,
            tuple(int(p) for p in p_list),
            tuple(int(k) for k in k_list),
            np.array([[entries[p, k][fam] for k in k_list] for p in p_list]),
        )
        for fam in families
    ]
