"""Command-line front end: ``solve``, ``converge``, ``greens`` and ``ortho``.

Every subcommand writes comma-separated files with 17 significant digits and
LF line endings into ``--out``. A YAML or JSON file given with ``--config``
supplies the same keys as the flags; flags win on conflict.

Exit codes: 0 success, 2 invalid configuration, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .analysis import COLUMNS, convergence_sweep, exact_bundle, orthogonality_table
from .assembly import divergence_matrix, mass_matrix, saddle_matrix, stiffness_matrix
from .greens import classic_greens, exact_greens_1d_poisson, exact_greens_2d_poisson
from .solver import (
    ProblemSpec,
    SolverError,
    discretize,
    galerkin_solve,
    optimal_projection,
    reconstruct_fine_scales,
    vms_solve,
)
from .spaces import Mesh, build_space, locate

log = logging.getLogger("vmsgreens")

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
SAMPLES_PER_AXIS = 200
GREENS_SOURCES_2D = ((0.125, 0.125), (0.625, 0.375), (0.875, 0.875))

# per-subcommand defaults
DEFAULTS = {
    "solve": dict(dim=1, form="direct", nu=0.01, N=4, p=2, k=4),
    "converge": dict(dim=1, form="direct", nu=0.01, N=4, p=2, k=4, axis="h", grid=[8, 16, 32, 64]),
    "greens": dict(dim=1, form="direct", N=3, p=3, sources=None),
    "ortho": dict(dim=1, form="direct", nu=0.01, N=4, p=[1, 2, 4], k=[1, 2, 3, 4]),
}
COMMON_KEYS = {"out", "plot"}


class ConfigError(ValueError):
    """Invalid run configuration (exit code 2)."""


@dataclass
class RunConfig:
    command: str
    values: dict = field(default_factory=dict)
    out: Path = Path(".")
    plot: bool = False

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None


def _int_list(value) -> list[int]:
    if isinstance(value, (list, tuple)):
        items = list(value)
    elif isinstance(value, str):
        items = [s for s in value.replace(" ", ",").split(",") if s]
    else:
        items = [value]
    out = []
    for v in items:
        if isinstance(v, bool) or (isinstance(v, float) and not v.is_integer()):
            raise ConfigError(f"expected integers, got {value!r}")
        try:
            out.append(int(v))
        except (TypeError, ValueError):
            raise ConfigError(f"expected an integer or a list of integers, got {value!r}") from None
    return out


def _source_list(value) -> list[tuple[float, ...]]:
    if isinstance(value, str):
        chunks = [c for c in value.split(";") if c.strip()]
        value = [[float(v) for v in c.split(",")] for c in chunks]
    try:
        return [tuple(float(v) for v in np.atleast_1d(s)) for s in value]
    except (TypeError, ValueError):
        raise ConfigError(f"cannot parse source points {value!r}") from None


def load_config_file(path: str) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    try:
        data = yaml.safe_load(text)  # JSON is a subset of YAML
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse config file {path}: {exc}") from None
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a key-value mapping")
    return data


def resolve_config(command: str, flags: dict, file_values: dict) -> RunConfig:
    """Merge defaults, config file and flags (in that order) and validate."""
    allowed = set(DEFAULTS[command]) | COMMON_KEYS
    unknown = sorted(set(file_values) - allowed)
    if unknown:
        raise ConfigError(f"unknown config keys for '{command}': {', '.join(unknown)}")
    merged = dict(DEFAULTS[command])
    merged.update({"out": ".", "plot": False})
    merged.update(file_values)
    merged.update({k: v for k, v in flags.items() if v is not None and k in allowed})

    v = {k: merged[k] for k in DEFAULTS[command]}
    try:
        v["dim"] = int(v["dim"])
        v["N"] = int(v["N"])
        if "nu" in v:
            v["nu"] = float(v["nu"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid numeric value: {exc}") from None
    if v["dim"] not in (1, 2):
        raise ConfigError(f"dim must be 1 or 2, got {v['dim']}")
    if v["form"] not in ("direct", "mixed"):
        raise ConfigError(f"form must be direct or mixed, got {v['form']!r}")
    if "nu" in v and not (math.isfinite(v["nu"]) and v["nu"] > 0):
        raise ConfigError(f"nu must be > 0, got {v['nu']}")
    if v["N"] < 1:
        raise ConfigError(f"N must be >= 1, got {v['N']}")
    if command == "ortho":
        v["p"], v["k"] = _int_list(v["p"]), _int_list(v["k"])
    else:
        v["p"] = _single(v["p"], "p")
        if "k" in v:
            v["k"] = _single(v["k"], "k")
    if any(p < 1 for p in _int_list(v["p"])):
        raise ConfigError("p must be >= 1")
    if "k" in v and any(k < 0 for k in _int_list(v["k"])):
        raise ConfigError("k must be >= 0")
    if command == "converge":
        if v["axis"] not in ("h", "p", "k"):
            raise ConfigError(f"axis must be h, p or k, got {v['axis']!r}")
        v["grid"] = sorted(set(_int_list(v["grid"])))
        if len(v["grid"]) < 3:
            raise ConfigError(f"a convergence sweep needs at least 3 grid points, got {v['grid']}")
        lower = {"h": 1, "p": 1, "k": 0}[v["axis"]]
        if v["grid"][0] < lower:
            raise ConfigError(f"grid values for axis {v['axis']} must be >= {lower}")
    if command == "greens":
        v["sources"] = _source_list(v["sources"]) if v["sources"] is not None else None
        if v["sources"] is not None and any(len(s) != v["dim"] or min(s) < 0 or max(s) > 1 for s in v["sources"]):
            raise ConfigError(f"sources must be {v['dim']}D points in [0, 1]")
    return RunConfig(command, v, Path(str(merged["out"])), bool(merged["plot"]))


def _single(value, name: str) -> int:
    vals = _int_list(value)
    if len(vals) != 1:
        raise ConfigError(f"{name} must be a single integer for this command, got {value!r}")
    return vals[0]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    v = float(v)
    return "" if math.isnan(v) else format(v, ".17g")


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _spec(cfg: RunConfig) -> ProblemSpec:
    v = cfg.values
    return ProblemSpec(v["dim"], v["form"], v["nu"], v["N"], v["p"], v.get("k", 0), exact=exact_bundle(v["dim"], v["nu"]))


def _grid_sampling(dim: int, N: int):
    x = np.linspace(0.0, 1.0, SAMPLES_PER_AXIS)
    s = locate(N, x)
    if dim == 1:
        return (s,), (x,)
    X, Y = np.meshgrid(x, x)
    return (s, s), (X, Y)


def cmd_solve(cfg: RunConfig) -> int:
    spec = _spec(cfg)
    coarse = discretize(spec, spec.p)
    gal = galerkin_solve(spec, coarse)
    proj = optimal_projection(spec, coarse)
    vms = vms_solve(spec, coarse)
    samplings, coords = _grid_sampling(spec.dim, spec.N)
    exact = spec.exact.phi(*coords)
    p_proj = proj.field().phi(samplings)
    cols = {
        "phi_exact": exact,
        "phi_projection": p_proj,
        "phi_galerkin": gal.field().phi(samplings),
        "phi_vms": vms.field().phi(samplings),
        "phi_prime_exact": exact - p_proj,
        "phi_prime_computed": reconstruct_fine_scales(vms).phi(samplings),
    }
    axes = ["x"] if spec.dim == 1 else ["x", "y"]
    data = np.column_stack([c.ravel() for c in coords] + [c.ravel() for c in cols.values()])
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out / "solution.csv", axes + list(cols), data)
    print(f"wrote {cfg.out / 'solution.csv'} ({spec.describe()})")
    if cfg.plot:
        from .plotting import plot_solution

        plot_solution(cfg.out / "solution.png", coords, cols, spec)
    return EXIT_OK


def cmd_converge(cfg: RunConfig) -> int:
    template = _spec(cfg)
    record = convergence_sweep(cfg.axis, cfg.grid, template)
    cfg.out.mkdir(parents=True, exist_ok=True)
    rows = [[pt.value] + [pt.errors[c] if pt.ok else None for c in COLUMNS] for pt in record.points]
    write_csv(cfg.out / "convergence.csv", ["axis_value", *COLUMNS], rows)
    write_csv(cfg.out / "rates.csv", ["quantity", "rate"], [[c, record.rates[c]] for c in COLUMNS])
    for pt in record.points:
        if not pt.ok:
            print(f"{cfg.axis}={pt.value}: failed ({pt.failure})", file=sys.stderr)
    print(f"wrote {cfg.out / 'convergence.csv'} and rates.csv ({record.n_ok}/{len(record.points)} points)")
    if cfg.plot:
        from .plotting import plot_convergence

        plot_convergence(cfg.out / "convergence.png", record)
    if record.n_ok < 3:
        print("fewer than 3 sweep points succeeded", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


def greens_operator(dim: int, form: str, N: int, p: int):
    """Classic discrete Greens' function of the Poisson operator on one space."""
    mesh = Mesh(dim, N)
    if form == "direct":
        V = build_space(mesh, p, "H1_nodal", constrained=True)
        return classic_greens(stiffness_matrix(V), V), V
    Q = build_space(mesh, p, "H1_nodal" if dim == 1 else "Hdiv_flux")
    W = build_space(mesh, p, "L2_volume")
    return classic_greens(saddle_matrix(mass_matrix(Q, Q), divergence_matrix(W, Q)), (Q, W)), W


def default_sources(dim: int, N: int) -> list[tuple[float, ...]]:
    if dim == 2:
        return [tuple(s) for s in GREENS_SOURCES_2D]
    nodes = np.arange(1, N) / N if N > 1 else np.array([0.5])
    return [(float(s),) for s in nodes]


def greens_samples(dim: int, form: str, N: int, p: int, sources):
    """Per-source arrays ``(coords, g_h, g_exact)`` on the uniform sample grid."""
    g, space = greens_operator(dim, form, N, p)
    samplings, coords = _grid_sampling(dim, N)
    out = []
    for s in sources:
        gh = space.values(g.response(s), samplings)
        if dim == 1:
            ge = exact_greens_1d_poisson(coords[0], s[0])
        else:
            ge = exact_greens_2d_poisson(coords, s)
        out.append((s, gh, ge))
    return coords, out


def cmd_greens(cfg: RunConfig) -> int:
    sources = cfg.sources or default_sources(cfg.dim, cfg.N)
    coords, results = greens_samples(cfg.dim, cfg.form, cfg.N, cfg.p, sources)
    src_cols = ["s"] if cfg.dim == 1 else ["s_x", "s_y"]
    axes = ["x"] if cfg.dim == 1 else ["x", "y"]
    flat = [c.ravel() for c in coords]
    rows = []
    for s, gh, ge in results:
        gh, ge = gh.ravel(), ge.ravel()
        block = np.column_stack([np.full((len(gh), len(s)), s), *flat, gh, ge, np.abs(gh - ge)])
        rows.extend(block)
        rel = np.linalg.norm(gh - ge) / np.linalg.norm(ge)
        print(f"source {s}: max|g_h - g_exact| = {np.abs(gh - ge).max():.3e}, relative L2 deviation = {rel:.3e}")
    cfg.out.mkdir(parents=True, exist_ok=True)
    write_csv(cfg.out / "greens.csv", src_cols + axes + ["g_h", "g_exact", "abs_diff"], rows)
    print(f"wrote {cfg.out / 'greens.csv'}")
    if cfg.plot:
        from .plotting import plot_greens

        plot_greens(cfg.out / "greens.png", coords, results)
    return EXIT_OK


def cmd_ortho(cfg: RunConfig) -> int:
    template = ProblemSpec(cfg.dim, cfg.form, cfg.nu, cfg.N, cfg.p[0], 0, exact=exact_bundle(cfg.dim, cfg.nu))
    tables = orthogonality_table(cfg.form, cfg.p, cfg.k, template)
    cfg.out.mkdir(parents=True, exist_ok=True)
    names = {"gradient": "ortho.csv", "constitutive": "ortho.csv", "divergence": "ortho_div.csv"}
    header = ["p"] + [f"k{k}" for k in cfg.k]
    for t in tables:
        rows = [[p, *t.values[i]] for i, p in enumerate(t.p_values)]
        write_csv(cfg.out / names[t.family], header, rows)
        print(f"wrote {cfg.out / names[t.family]} ({t.family}, max |entry| = {t.max_abs:.3e})")
    if cfg.plot:
        from .plotting import plot_ortho

        plot_ortho(cfg.out / "ortho.png", tables)
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "converge": cmd_converge, "greens": cmd_greens, "ortho": cmd_ortho}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vmsgreens",
        description="VMS with the fine-scale Greens' function for steady advection-diffusion.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log solver progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "solve": "sample exact, projection, Galerkin and VMS solutions (solution.csv)",
        "converge": "h, p or k convergence sweep (convergence.csv, rates.csv)",
        "greens": "discrete vs exact Poisson Greens' function (greens.csv)",
        "ortho": "orthogonality of the computed fine scales (ortho.csv)",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", help="YAML or JSON file with the same keys as the flags")
        p.add_argument("--dim", type=int, choices=(1, 2))
        p.add_argument("--form", choices=("direct", "mixed"))
        p.add_argument("--N", type=int, help="elements per axis")
        if name == "ortho":
            p.add_argument("--p", help="coarse degrees, e.g. 1,2,4")
        else:
            p.add_argument("--p", help="coarse polynomial degree")
        if name != "greens":
            p.add_argument("--nu", type=float, help="diffusion coefficient")
            p.add_argument("--k", help="fine degree increment (list for ortho)")
        if name == "converge":
            p.add_argument("--axis", choices=("h", "p", "k"))
            p.add_argument("--grid", help="sweep values, e.g. 8,16,32,64")
        if name == "greens":
            p.add_argument("--sources", help="source points, ';'-separated, e.g. '0.5' or '0.625,0.375'")
        p.add_argument("--out", help="output directory (default: current directory)")
        p.add_argument("--plot", action="store_true", default=None, help="also render PNG figures")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    try:
        file_values = load_config_file(args.config) if args.config else {}
        cfg = resolve_config(args.command, flags, file_values)
    except ConfigError as exc:
        print(f"vmsgreens {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](cfg)
    except (SolverError, np.linalg.LinAlgError) as exc:
        print(f"vmsgreens {args.command}: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"vmsgreens {args.command}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
