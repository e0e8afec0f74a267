"""Command-line front end.

    cmcfoliate <subcommand> --config job.json [--H 1.0] [--window 2.0] [--h 0.05] [--out DIR]

Exit codes: 0 success, 1 a verification check failed, 2 invalid
configuration, 3 solver non-convergence.
"""
import argparse
import json
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .domain import (
    RegularDomain,
    cone_support,
    make_support_function,
    random_support,
    wedge_support,
)
from .exceptions import CMCError, InputError, NewtonDiverged, NoStabilization
from .geometry import fundamental_forms, normal_flow
from .grid import GridDomain
from .solver import (
    MAX_BOXES,
    SpacelikeGraph,
    MAX_ITER,
    SLOPE_MARGIN,
    STABILIZATION_TOL,
    TOL_NEWTON,
    foliate,
    solve_entire,
)
from .verify import (
    asymptotic_data,
    comparison_check,
    convergence_study,
    distance_bound_check,
    random_probes,
)

SUBCOMMANDS = (
    "horizon", "ctime", "solve", "foliate", "geometry",
    "flow", "verify", "asymptotics", "convergence",
)

logger = logging.getLogger("cmcfoliate")


class ConfigError(InputError):
    """Invalid configuration; ``field`` names the offending entry."""

    def __init__(self, field_name, message):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class JobConfig:
    n: int
    support: object
    H: float = None
    H_list: list = None
    window: float = 2.0
    h: float = 0.05
    solver: dict = field(default_factory=dict)
    probes: np.ndarray = None
    seed: int = 0
    flow_t: float = 1.0
    directions: list = None
    radii: list = None
    oracle: str = "hyperboloid"
    grids: list = field(default_factory=lambda: [0.2, 0.1, 0.05])
    out: Path = Path(".")
    prefix: str = "job"


def _positive(value, name):
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(name, f"expected a number, got {value!r}") from None
    if not np.isfinite(value) or value <= 0:
        raise ConfigError(name, f"must be positive, got {value!r}")
    return value


def _sample(record, n):
    """One ``{angle_degrees | sign | direction, value}`` record as a pair."""
    if not isinstance(record, dict) or "value" not in record:
        raise ConfigError("support.samples", "each sample needs a direction and a 'value'")
    if "angle_degrees" in record and n == 2:
        a = np.deg2rad(float(record["angle_degrees"]))
        d = [np.cos(a), np.sin(a)]
    elif "sign" in record and n == 1:
        d = [float(np.sign(record["sign"]))]
    elif "direction" in record:
        d = record["direction"]
    else:
        key = "angle_degrees" if n == 2 else "sign"
        raise ConfigError("support.samples", f"expected '{key}' or 'direction' for n = {n}")
    return np.asarray(d, dtype=float), float(record["value"])


def _support(entry, n, seed):
    if not isinstance(entry, dict):
        raise ConfigError("support", "expected an object with 'preset' or 'samples'")
    try:
        if "samples" in entry:
            return make_support_function([_sample(r, n) for r in entry["samples"]])
        preset = entry.get("preset")
        params = dict(entry.get("params", {}))
        if preset == "cone":
            return cone_support(n=n, **params)
        if preset == "wedge":
            return wedge_support(n=n, **params)
        if preset == "random":
            params.setdefault("seed", seed)
            return random_support(n=n, **params)
    except ConfigError:
        raise
    except InputError as exc:
        raise ConfigError("support", str(exc)) from None
    except (TypeError, ValueError) as exc:
        raise ConfigError("support", f"bad parameters ({exc})") from None
    raise ConfigError("support", f"unknown preset {entry.get('preset')!r}")


def load_config(path, overrides=None):
    """Parse and validate a JSON job description; ``overrides`` win over the file."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be an object")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    n = raw.get("n", 2)
    if n not in (1, 2):
        raise ConfigError("n", f"must be 1 or 2, got {n!r}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or not 0 <= seed < 2 ** 64:
        raise ConfigError("seed", "must be a 64-bit unsigned integer")
    sf = _support(raw.get("support"), n, seed)
    if sf.n != n:
        raise ConfigError("support", f"directions have dimension {sf.n}, expected n = {n}")

    solver = dict(raw.get("solver", {}))
    cfg = JobConfig(n=n, support=sf, seed=seed)
    if "H" in overrides or "H" in solver:
        cfg.H = _positive(overrides.get("H", solver.get("H")), "solver.H")
    if "H_list" in solver:
        values = solver["H_list"]
        if not isinstance(values, list) or len(values) < 2:
            raise ConfigError("solver.H_list", "needs at least two values")
        cfg.H_list = [_positive(v, "solver.H_list") for v in values]
        if any(b <= a for a, b in zip(cfg.H_list, cfg.H_list[1:])):
            raise ConfigError("solver.H_list", "must be strictly increasing")
    cfg.window = _positive(overrides.get("window", solver.get("window", 2.0)), "solver.window")
    cfg.h = _positive(overrides.get("h", solver.get("h", 0.05)), "solver.h")
    kwargs = {}
    for key, default in (
        ("stabilization_tol", STABILIZATION_TOL),
        ("tol_newton", TOL_NEWTON),
        ("slope_margin", SLOPE_MARGIN),
    ):
        kwargs[key] = _positive(solver.get(key, default), f"solver.{key}")
    for key, default in (("max_iter", MAX_ITER), ("max_boxes", MAX_BOXES)):
        value = solver.get(key, default)
        if not isinstance(value, int) or value < 1:
            raise ConfigError(f"solver.{key}", "must be a positive integer")
        kwargs[key] = value
    cfg.solver = kwargs

    if "probes" in raw:
        try:
            probes = np.array(raw["probes"], dtype=float).reshape(-1, n + 1)
        except ValueError:
            raise ConfigError("probes", f"each probe needs {n + 1} coordinates") from None
        cfg.probes = probes
    flow = raw.get("flow", {})
    cfg.flow_t = float(flow.get("t", 1.0))
    asym = raw.get("asymptotics", {})
    cfg.directions = asym.get("directions")
    cfg.radii = asym.get("radii")
    conv = raw.get("convergence", {})
    cfg.oracle = conv.get("oracle", "hyperboloid")
    cfg.grids = [_positive(v, "convergence.grids") for v in conv.get("grids", cfg.grids)]
    output = raw.get("output", {})
    cfg.out = Path(overrides.get("out", output.get("dir", ".")))
    cfg.prefix = str(output.get("prefix", Path(path).stem))
    return cfg


# --------------------------------------------------------------------------
# pipelines


def _grid(cfg):
    try:
        return GridDomain(cfg.n, cfg.window, cfg.h)
    except InputError as exc:
        raise ConfigError("solver.h", str(exc)) from None


def _need_H(cfg):
    if cfg.H is None:
        raise ConfigError("solver.H", "required for this subcommand")
    return cfg.H


def _solve(cfg):
    return solve_entire(cfg.support, _need_H(cfg), _grid(cfg), **cfg.solver)


def _export_surface(cfg, graph, name, extra=None):
    path = cfg.out / f"{cfg.prefix}_{name}.csv"
    io.write_graph_csv(path, graph, extra)
    if graph.n == 2:
        io.write_obj(cfg.out / f"{cfg.prefix}_{name}.obj", graph)
    return path


def cmd_horizon(cfg):
    grid = _grid(cfg)
    domain = RegularDomain.from_support(cfg.support)
    pts = grid.points()
    v0 = domain.horizon_height(pts.reshape(-1, cfg.n)).reshape(grid.shape)
    path = _export_surface(cfg, SpacelikeGraph(grid, v0), "horizon")
    print(f"horizon: {grid.n_nodes} nodes, min v0 = {v0.min():.6g} -> {path}")
    return 0


def cmd_ctime(cfg):
    if cfg.probes is None:
        raise ConfigError("probes", "required for ctime")
    domain = RegularDomain.from_support(cfg.support)
    try:
        T = domain.cosmological_time(cfg.probes)
    except InputError as exc:
        raise ConfigError("probes", str(exc)) from None
    cols = io.coordinate_columns(None, cfg.probes[:, : cfg.n])
    cols["t"] = cfg.probes[:, cfg.n]
    cols["T"] = T
    path = cfg.out / f"{cfg.prefix}_ctime.csv"
    io.write_table(path, cols)
    print(f"ctime: {len(T)} probes, T in [{T.min():.6g}, {T.max():.6g}] -> {path}")
    return 0


def cmd_solve(cfg):
    g = _solve(cfg)
    path = _export_surface(cfg, g, "solve")
    d = g.diagnostics
    print(
        f"solve: H={g.H_target:g} residual={g.residual_norm:.3e} "
        f"slope_margin={g.slope_margin:.3e} boxes={len(d['boxes'])} -> {path}"
    )
    return 0


def cmd_foliate(cfg):
    if cfg.H_list is None:
        raise ConfigError("solver.H_list", "required for foliate")
    probe = None if cfg.probes is None else cfg.probes[0]
    res = foliate(cfg.support, cfg.H_list, _grid(cfg), probe=probe, **cfg.solver)
    for H, g in res.leaves:
        _export_surface(cfg, g, f"leaf_H{H:g}")
    bracket = "" if res.bracket is None else f" bracket={res.bracket}"
    print(f"foliate: {len(res.leaves)} leaves, strict={res.strict}{bracket} -> {cfg.out}")
    return 0


def cmd_geometry(cfg):
    g = _solve(cfg)
    geo = fundamental_forms(g)
    cols = io.coordinate_columns(None, geo.points)
    cols.update(u=geo.u, H_num=geo.H, K_num=geo.K)
    path = cfg.out / f"{cfg.prefix}_geometry.csv"
    io.write_table(path, cols)
    print(f"geometry: H_num in [{geo.H.min():.6g}, {geo.H.max():.6g}] -> {path}")
    return 0


def cmd_flow(cfg):
    g = _solve(cfg)
    f = normal_flow(g, cfg.flow_t)
    cols = io.coordinate_columns(None, f.points[:, :2])
    cols.update(u=f.points[:, 2], H_num=f.H, K_num=f.K)
    path = cfg.out / f"{cfg.prefix}_flow.csv"
    io.write_table(path, cols)
    print(f"flow: t={cfg.flow_t:g} K_num in [{f.K.min():.6g}, {f.K.max():.6g}] -> {path}")
    return 0


def _asymptotics(cfg, g):
    R = g.grid.R
    radii = cfg.radii or list(np.linspace(R / 4, R, 7))
    dirs = cfg.directions or cfg.support.directions
    return asymptotic_data(g, dirs, radii, support=cfg.support)


def cmd_asymptotics(cfg):
    g = _solve(cfg)
    est = _asymptotics(cfg, g)
    dirs = np.array([e.direction for e in est])
    cols = {f"theta{i + 1}": dirs[:, i] for i in range(dirs.shape[1])}
    cols.update(
        f0=[e.limit for e in est], phi=[e.phi for e in est],
        diverging=[float(e.diverging) for e in est],
    )
    path = cfg.out / f"{cfg.prefix}_asymptotics.csv"
    io.write_table(path, cols)
    n_div = sum(e.diverging for e in est)
    print(f"asymptotics: {len(est)} directions, {n_div} diverging -> {path}")
    return 0


def cmd_convergence(cfg):
    study = convergence_study(cfg.oracle, cfg.grids, window=cfg.window)
    orders = [np.nan] + study.orders
    path = cfg.out / f"{cfg.prefix}_convergence.csv"
    io.write_table(path, {"h": study.hs, "error": study.errors, "order": orders})
    print(f"convergence: {cfg.oracle} order={study.order:.3f} -> {path}")
    return 0


def cmd_verify(cfg):
    grid = _grid(cfg)
    domain = RegularDomain.from_support(cfg.support)
    if cfg.H_list is not None:
        leaves = foliate(cfg.support, cfg.H_list, grid, **cfg.solver).leaves
    else:
        leaves = [(_need_H(cfg), _solve(cfg))]
    ok = True
    lines = []
    # leaves are ordered by increasing H, so the earlier one lies above
    for (H2, g2), (H1, g1) in zip(leaves, leaves[1:]):
        rep = comparison_check(g1, g2, tol=10 * cfg.solver["stabilization_tol"])
        ok &= rep.passed
        lines.append(f"{rep.summary()} H1={H1:g} H2={H2:g}")
    for H, g in leaves:
        probes = random_probes(g, domain, 100, seed=cfg.seed)
        if cfg.probes is not None:
            probes = np.vstack([probes, cfg.probes])
        res = distance_bound_check(g, domain, probes)
        passed = all(r.passed for r in res)
        ok &= passed
        dmax = max(r.distance for r in res)
        lines.append(
            f"distance-bound: {'PASS' if passed else 'FAIL'} H={H:g} "
            f"max d={dmax:.6g} < {1 / H:.6g} ({len(res)} probes)"
        )
        est = _asymptotics(cfg, g)
        bounded = [e for e in est if not e.diverging]
        worst = max((e.error for e in bounded), default=0.0)
        mono = all(e.monotone for e in est)
        ok &= mono
        # f0 accuracy is window-limited; report C in |f0 - phi| <= C / R
        lines.append(
            f"asymptotics: {'PASS' if mono else 'FAIL'} H={H:g} monotone={mono} "
            f"bounded={len(bounded)}/{len(est)} C={worst * g.grid.R:.3g}"
        )
    for line in lines:
        print(line)
    return 0 if ok else 1


COMMANDS = {name: globals()[f"cmd_{name}"] for name in SUBCOMMANDS}


def build_parser():
    parser = argparse.ArgumentParser(prog="cmcfoliate", description=__doc__.splitlines()[0])
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="JSON job description")
    parser.add_argument("--H", type=float, help="mean curvature (overrides solver.H)")
    parser.add_argument("--window", type=float, help="window half-width")
    parser.add_argument("--h", type=float, help="grid spacing")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true", help="log Newton iterations")
    return parser


def run(subcommand, config, **overrides):
    """Run one subcommand; returns the process exit code."""
    try:
        cfg = load_config(config, overrides)
        cfg.out.mkdir(parents=True, exist_ok=True)
        return COMMANDS[subcommand](cfg)
    except (NewtonDiverged, NoStabilization) as exc:
        print(f"error: solver did not converge: {exc}", file=sys.stderr)
        if isinstance(exc, NoStabilization):
            print(f"  window changes: {exc.differences}", file=sys.stderr)
        else:
            print(
                f"  last residual: {exc.last_residual}, damping: {exc.damping_history}",
                file=sys.stderr,
            )
        return 3
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except CMCError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s"
    )
    return run(args.subcommand, args.config, H=args.H, window=args.window, h=args.h, out=args.out)


if __name__ == "__main__":
    sys.exit(main())
