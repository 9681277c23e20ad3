"""Lorentzian distance on causal graphs.

Distances are longest weighted paths, computed by sweeping the graph's
topological levels.  Unreachable entries are ``-inf`` internally; the public
distance functions clamp them to 0, matching the convention that points
with no causal curve between them are at distance 0.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .causal_graph import CausalGraph, SamplingSpec, build_causal_dag, sample_points
from .metric_models import MetricModel

log = logging.getLogger(__name__)

__all__ = [
    "sweep",
    "longest_from",
    "longest_to",
    "all_pairs",
    "DistanceField",
    "longest_path_distance",
    "distance_to_set",
    "distance_from_point_to_set",
    "set_distance_field",
    "check_reverse_triangle",
    "RefinementLadder",
    "build_ladder",
    "DivergenceTable",
    "divergence_probe",
    "ALL_PAIRS_LIMIT",
]

ALL_PAIRS_LIMIT = 2000


def sweep(graph: CausalGraph, init: np.ndarray, direction: str = "forward") -> np.ndarray:
    """Max-plus relaxation of ``init`` (shape ``(k, n)``) along the DAG.

    Forward: ``out[r, v] = max(init[r, v], max_u out[r, u] + w(u, v))``.
    Backward propagates along reversed edges.  ``init`` is not modified.
    """
    vals = np.array(init, dtype=float, copy=True)
    squeeze = vals.ndim == 1
    if squeeze:
        vals = vals[None, :]
    for tail, w, heads, cuts in graph.schedule(direction):
        cand = vals[:, tail] + w
        red = np.maximum.reduceat(cand, cuts, axis=1)
        vals[:, heads] = np.maximum(vals[:, heads], red)
    return vals[0] if squeeze else vals


def _indicator(graph, nodes):
    init = np.full(graph.n, -np.inf)
    init[np.asarray(list(nodes), dtype=np.int64)] = 0.0
    return init


def longest_from(graph: CausalGraph, sources) -> np.ndarray:
    """Longest path weight from the source set to every node (-inf if unreachable)."""
    return sweep(graph, _indicator(graph, _ids(sources)), "forward")


def longest_to(graph: CausalGraph, sinks) -> np.ndarray:
    """Longest path weight from every node into the sink set (-inf if it cannot reach)."""
    return sweep(graph, _indicator(graph, _ids(sinks)), "backward")


def _ids(nodes):
    if hasattr(nodes, "ids"):
        return np.asarray(nodes.ids, dtype=np.int64)
    if np.isscalar(nodes):
        return np.array([int(nodes)], dtype=np.int64)
    return np.asarray(list(nodes), dtype=np.int64)


def all_pairs(graph: CausalGraph) -> np.ndarray:
    """Matrix ``L[u, v]`` of longest path weights (-inf where unrelated).

    Cached on the graph.  Only materialised for graphs with at most
    ``ALL_PAIRS_LIMIT`` nodes.
    """
    graph.require_acyclic()
    if "all_pairs" in graph._cache:
        return graph._cache["all_pairs"]
    if graph.n > ALL_PAIRS_LIMIT:
        raise MemoryError(f"all-pairs table refused for {graph.n} > {ALL_PAIRS_LIMIT} nodes")
    init = np.full((graph.n, graph.n), -np.inf)
    np.fill_diagonal(init, 0.0)
    L = sweep(graph, init, "forward")
    L.setflags(write=False)
    graph._cache["all_pairs"] = L
    return L


@dataclass
class DistanceField:
    """Distances from (``from-source``) or to (``to-sink``) a node set."""

    source: tuple
    values: np.ndarray
    reachable: np.ndarray
    direction: str = "from-source"

    def __getitem__(self, node):
        return self.values[node]


def set_distance_field(graph: CausalGraph, S, direction: str = "from-source") -> DistanceField:
    """d(S, .) (``from-source``) or d(., S) (``to-sink``) on every node."""
    graph.require_acyclic()
    ids = _ids(S)
    if len(ids) == 0:
        raise ValueError("source set is empty")
    raw = longest_from(graph, ids) if direction == "from-source" else longest_to(graph, ids)
    reach = np.isfinite(raw)
    return DistanceField(tuple(int(i) for i in ids), np.where(reach, np.maximum(raw, 0.0), 0.0),
                         reach, direction)


def longest_path_distance(graph: CausalGraph, p: int, q: int) -> float:
    """Graph Lorentzian distance d(p, q); 0 when q is not causally after p."""
    graph.require_acyclic()
    if "all_pairs" in graph._cache:
        v = graph._cache["all_pairs"][p, q]
    else:
        v = longest_from(graph, [p])[q]
    return float(max(v, 0.0)) if np.isfinite(v) else 0.0


def distance_to_set(graph: CausalGraph, S, x: int) -> float:
    """d(S, x) = max over s in S of d(s, x)."""
    return float(set_distance_field(graph, S, "from-source").values[x])


def distance_from_point_to_set(graph: CausalGraph, x: int, S) -> float:
    """d(x, S) = max over s in S of d(x, s)."""
    return float(set_distance_field(graph, S, "to-sink").values[x])


def check_reverse_triangle(graph: CausalGraph, table: np.ndarray | None = None,
                           max_triples: int = 100_000, seed: int = 0, S=None,
                           rtol: float = 1e-12) -> list:
    """Violations of d(x, z) >= d(x, y) + d(y, z) over chronological triples.

    Triples with y in I+(x) and z in I+(y) are enumerated when there are at
    most ``max_triples`` of them and sampled uniformly otherwise.  Graphs
    above ``ALL_PAIRS_LIMIT`` nodes are checked from sampled sources.  With ``S``
    given, the set form d(S, y) >= d(S, x) + d(x, y) is checked for x in
    I+(S), y in I+(x) instead.  ``table`` overrides the distance table (used
    for negative controls).
    """
    if table is None and S is None and graph.n > ALL_PAIRS_LIMIT:
        return _sampled_triangle(graph, max_triples, seed, rtol)
    L = all_pairs(graph) if table is None else np.asarray(table, dtype=float)
    D = np.where(np.isfinite(L), np.maximum(L, 0.0), 0.0)
    chron = D > 0
    rng = np.random.default_rng(seed)
    out = []
    if S is not None:
        ids = _ids(S)
        dS = D[ids].max(axis=0)
        xs = np.flatnonzero(dS > 0)
        pairs = [(x, y) for x in xs for y in np.flatnonzero(chron[x])]
        if len(pairs) > max_triples:
            pick = rng.choice(len(pairs), max_triples, replace=False)
            pairs = [pairs[i] for i in np.sort(pick)]
        for x, y in pairs:
            lhs, rhs = dS[y], dS[x] + D[x, y]
            if lhs < rhs - rtol * max(1.0, rhs):
                out.append(("set", int(x), int(y), float(lhs), float(rhs)))
        return out
    n_before = chron.sum(axis=0)
    n_after = chron.sum(axis=1)
    counts = n_before * n_after
    total = int(counts.sum())
    if total == 0:
        return out
    if total <= max_triples:
        triples = []
        for y in np.flatnonzero(counts):
            xs = np.flatnonzero(chron[:, y])
            zs = np.flatnonzero(chron[y])
            X, Z = np.meshgrid(xs, zs, indexing="ij")
            triples.append(np.column_stack([X.ravel(), np.full(X.size, y), Z.ravel()]))
        T = np.concatenate(triples)
    else:
        ys = np.sort(rng.choice(len(D), size=max_triples, p=counts / total))
        T = np.empty((max_triples, 3), dtype=np.int64)
        T[:, 1] = ys
        uy, start, cnt = np.unique(ys, return_index=True, return_counts=True)
        for y, a, c in zip(uy, start, cnt):
            T[a:a + c, 0] = rng.choice(np.flatnonzero(chron[:, y]), c)
            T[a:a + c, 2] = rng.choice(np.flatnonzero(chron[y]), c)
    lhs = D[T[:, 0], T[:, 2]]
    rhs = D[T[:, 0], T[:, 1]] + D[T[:, 1], T[:, 2]]
    bad = np.flatnonzero(lhs < rhs - rtol * np.maximum(1.0, rhs))
    for k in bad:
        x, y, z = T[k]
        out.append(("point", int(x), int(y), int(z), float(lhs[k]), float(rhs[k])))
    return out


def _rows(graph, ids):
    init = np.full((len(ids), graph.n), -np.inf)
    init[np.arange(len(ids)), ids] = 0.0
    R = sweep(graph, init, "forward")
    return np.where(np.isfinite(R), np.maximum(R, 0.0), 0.0)


def _sampled_triangle(graph, max_triples, seed, rtol, n_sources=64, per_source=16):
    # graphs too large for the table: distance rows from sampled x and y only
    rng = np.random.default_rng(seed)
    g = graph
    g.require_acyclic()
    xs = np.sort(rng.choice(g.n, size=min(g.n, n_sources), replace=False))
    Rx = _rows(g, xs)
    T = []
    for i, x in enumerate(xs):
        after = np.flatnonzero(Rx[i] > 0)
        if len(after):
            for y in rng.choice(after, size=min(len(after), per_source), replace=False):
                T.append((i, int(y)))
    if not T:
        return []
    ys = np.unique([y for _, y in T])
    Ry = _rows(g, ys)
    pos = {int(y): k for k, y in enumerate(ys)}
    budget = max(1, max_triples // len(T))
    out = []
    for i, y in T:
        row = Ry[pos[y]]
        zs = np.flatnonzero(row > 0)
        if len(zs) > budget:
            zs = rng.choice(zs, size=budget, replace=False)
        lhs = Rx[i, zs]
        rhs = Rx[i, y] + row[zs]
        for k in np.flatnonzero(lhs < rhs - rtol * np.maximum(1.0, rhs)):
            out.append(("point", int(xs[i]), int(y), int(zs[k]), float(lhs[k]), float(rhs[k])))
    return out


@dataclass
class RefinementLadder:
    """Graphs of one model at strictly decreasing refinement parameters."""

    levels: list = field(default_factory=list)  # [(param, CausalGraph)]

    def __post_init__(self):
        params = [p for p, _ in self.levels]
        if any(b >= a for a, b in zip(params, params[1:])):
            raise ValueError("ladder parameters must be strictly decreasing")

    def __iter__(self):
        return iter(self.levels)

    def __len__(self):
        return len(self.levels)

    @property
    def params(self):
        return [p for p, _ in self.levels]

    @property
    def finest(self) -> CausalGraph:
        return self.levels[-1][1]

    @property
    def coarsest(self) -> CausalGraph:
        return self.levels[0][1]


def build_ladder(model: MetricModel, steps, window, horizon_factor: float = 4.0,
                 workers=None) -> RefinementLadder:
    """Grid graphs of ``model`` on a fixed window, one per grid step."""
    levels = []
    for h in steps:
        spec = SamplingSpec(mode="grid", window=window, step=h)
        pts = sample_points(model, spec)
        g = build_causal_dag(model, pts, horizon=horizon_factor * h, prox_radius=1.5 * h,
                             workers=workers, meta={"step": h, "window": window})
        levels.append((float(h), g))
    return RefinementLadder(levels)


@dataclass
class DivergenceTable:
    """Rows ``(epsilon, distance, log_inv_eps)`` and the fitted slope."""

    rows: list
    slope: float
    intercept: float

    def to_csv(self, path):
        import csv
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epsilon", "distance", "log_inv_eps"])
            for r in self.rows:
                w.writerow([repr(float(x)) for x in r])


def divergence_probe(ladder: RefinementLadder, probe) -> DivergenceTable:
    """Track the distance between probe points across a refinement ladder.

    ``probe`` is either a fixed pair of coordinates ``(p, q)`` or a callable
    ``eps -> (p, q)``.  Levels whose graph lacks a probe point are skipped
    with a warning.  The slope is the least-squares fit of the distance
    against ln(1/eps).
    """
    rows = []
    for eps, graph in ladder:
        p, q = probe(eps) if callable(probe) else probe
        tol = 1e-6 * max(1.0, float(graph.meta.get("spacing", 1.0)))
        try:
            i, j = graph.node_at(p, tol), graph.node_at(q, tol)
        except KeyError as exc:
            warnings.warn(f"level eps={eps} skipped: {exc}")
            continue
        rows.append((float(eps), longest_path_distance(graph, i, j), float(np.log(1.0 / eps))))
    if len(rows) >= 2:
        x = np.array([r[2] for r in rows])
        y = np.array([r[1] for r in rows])
        slope, intercept = np.polyfit(x, y, 1)
    else:
        slope, intercept = float("nan"), float("nan")
    return DivergenceTable(rows, float(slope), float(intercept))
