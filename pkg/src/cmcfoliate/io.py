"""CSV and OBJ export of graphs, and CSV import.

Floats are written with 17 significant digits so a CSV round trip is
bit-exact.
"""
import csv

import numpy as np

from .exceptions import InputError
from .grid import GridDomain
from .solver import SpacelikeGraph

FLOAT_FORMAT = "%.17g"


def write_table(path, columns):
    """Write a CSV with a header row from an ordered mapping of 1-d columns."""
    names = list(columns)
    data = [np.asarray(columns[k], dtype=float).ravel() for k in names]
    if len({len(c) for c in data}) > 1:
        raise InputError("CSV columns have different lengths")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*data):
            writer.writerow([FLOAT_FORMAT % v for v in row])


def read_table(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        names = next(reader)
        rows = [[float(v) for v in row] for row in reader if row]
    data = np.array(rows, dtype=float).reshape(-1, len(names))
    return {k: data[:, i] for i, k in enumerate(names)}


def coordinate_columns(grid, points=None):
    pts = grid.points().reshape(-1, grid.n) if points is None else points
    return {f"x{i + 1}": pts[:, i] for i in range(pts.shape[1])}


def write_graph_csv(path, graph, extra=None):
    """Nodes of ``graph`` as rows ``x1[,x2],u`` plus optional extra columns."""
    cols = coordinate_columns(graph.grid)
    cols["u"] = graph.u.ravel()
    for k, v in (extra or {}).items():
        cols[k] = v
    write_table(path, cols)


def read_graph_csv(path):
    """Inverse of :func:`write_graph_csv` for uniform grids."""
    cols = read_table(path)
    n = sum(1 for k in cols if k.startswith("x"))
    if n not in (1, 2) or "u" not in cols:
        raise InputError("CSV does not describe a graph (need x1[,x2] and u)")
    axis = np.unique(cols["x1"])
    if axis.size < 2:
        raise InputError("CSV grid has fewer than two nodes per axis")
    h = float(axis[1] - axis[0])
    R = float(axis[-1])
    grid = GridDomain(n, R, round(h, 12))
    if grid.n_nodes != cols["u"].size:
        raise InputError("CSV rows do not form a full uniform grid")
    return SpacelikeGraph(grid, cols["u"].reshape(grid.shape))


def write_obj(path, graph):
    """Triangle mesh of a graph over R^2 (two triangles per grid cell)."""
    if graph.n != 2:
        raise InputError("OBJ export needs a graph over R^2")
    N = graph.grid.size
    pts = graph.grid.points().reshape(-1, 2)
    idx = np.arange(N * N).reshape(N, N) + 1
    a, b = idx[:-1, :-1].ravel(), idx[1:, :-1].ravel()
    c, d = idx[1:, 1:].ravel(), idx[:-1, 1:].ravel()
    with open(path, "w") as fh:
        for (x, y), z in zip(pts, graph.u.ravel()):
            fh.write(f"v {FLOAT_FORMAT % x} {FLOAT_FORMAT % y} {FLOAT_FORMAT % z}\n")
        for tri in np.concatenate([np.column_stack([a, b, c]), np.column_stack([a, c, d])]):
            fh.write("f %d %d %d\n" % tuple(tri))
