"""Discretisation of a metric model into a weighted causal graph.

Edges u -> v connect nodes whose straight segment is future-directed causal
at every sample point, stays in the domain and is no longer than the
horizon.  Edge weights are the proper time of the segment.  A separate set
of undirected proximity edges records spatial adjacency.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .metric_models import MetricModel, segment_lengths

__all__ = [
    "SamplingError",
    "CyclicGraphError",
    "SamplingSpec",
    "CausalGraph",
    "sample_points",
    "build_causal_dag",
    "mean_spacing",
    "sprinkle_spacing",
]

# weights below this are treated as exactly null
WEIGHT_ATOL = 1e-12
CAUSAL_SAMPLES = 8


class SamplingError(ValueError):
    pass


class CyclicGraphError(RuntimeError):
    """Raised by distance operations on graphs that contain causal cycles."""


@dataclass(frozen=True)
class SamplingSpec:
    """How to place nodes in a coordinate window.

    ``step`` may be a scalar or one step per coordinate (grid mode).  Grid
    nodes sit at integer multiples of the step, so the coordinate origin is
    a lattice point whenever it lies in the window.
    """

    mode: str
    window: tuple
    step: float | tuple | None = None
    density: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("grid", "sprinkle"):
            raise ValueError(f"unknown sampling mode {self.mode!r}")
        (a0, b0), (a1, b1) = self.window
        if not (b0 > a0 and b1 > a1):
            raise ValueError("degenerate window")
        if self.mode == "grid":
            steps = np.broadcast_to(np.asarray(self.step, dtype=float), (2,))
            if np.any(steps <= 0):
                raise ValueError("grid step must be positive")
        elif self.density is None or self.density <= 0:
            raise ValueError("sprinkle density must be positive")

    @property
    def steps(self):
        return np.broadcast_to(np.asarray(self.step, dtype=float), (2,)).copy()

    def to_dict(self):
        step = self.step
        if step is not None and not np.isscalar(step):
            step = [float(s) for s in step]
        return {"mode": self.mode, "window": [list(map(float, w)) for w in self.window],
                "step": step, "density": self.density, "seed": int(self.seed)}

    @classmethod
    def from_dict(cls, d):
        step = d.get("step")
        if isinstance(step, list):
            step = tuple(step)
        window = tuple(tuple(w) for w in d["window"])
        return cls(mode=d["mode"], window=window, step=step,
                   density=d.get("density"), seed=int(d.get("seed", 0)))


def _lattice(lo, hi, h):
    k0 = math.ceil(lo / h - 1e-9)
    k1 = math.floor(hi / h + 1e-9)
    return np.arange(k0, k1 + 1) * h


def sample_points(model: MetricModel, spec: SamplingSpec) -> np.ndarray:
    """Node coordinates for ``model`` under ``spec``, sorted by (time, space).

    Grid mode returns every in-domain lattice point of the window.  Sprinkle
    mode draws a Poisson process whose intensity is ``density`` times the
    metric volume element (thinning against its maximum on a probe grid).
    """
    (a0, b0), (a1, b1) = spec.window
    if spec.mode == "grid":
        h0, h1 = spec.steps
        X0, X1 = np.meshgrid(_lattice(a0, b0, h0), _lattice(a1, b1, h1), indexing="ij")
        pts = np.column_stack([X0.ravel(), X1.ravel()])
    else:
        rng = np.random.default_rng(spec.seed)
        area = (b0 - a0) * (b1 - a1)
        probe = np.column_stack([c.ravel() for c in np.meshgrid(
            np.linspace(a0, b0, 129), np.linspace(a1, b1, 129), indexing="ij")])
        probe = probe[model.contains_batch(probe)]
        vmax = float(np.max(model.volume_element_batch(probe))) if len(probe) else 1.0
        n = rng.poisson(spec.density * vmax * area)
        pts = np.column_stack([rng.uniform(a0, b0, n), rng.uniform(a1, b1, n)])
        if len(pts):
            inside = model.contains_batch(pts)
            vol = np.zeros(len(pts))
            vol[inside] = model.volume_element_batch(pts[inside])
            keep = rng.uniform(0.0, vmax, len(pts)) < vol
            pts = pts[keep]
    if len(pts) == 0:
        raise SamplingError("sampling produced no points")
    pts = model.canonical(pts)
    pts = pts[model.contains_batch(pts)]
    if len(pts) == 0:
        raise SamplingError("no sampled point lies in the domain")
    pts = np.unique(np.round(pts, 12), axis=0)
    ta = model.time_axis
    order = np.lexsort((pts[:, 1 - ta], pts[:, ta]))
    return pts[order]


def mean_spacing(points: np.ndarray, model: MetricModel | None = None) -> float:
    """Mean nearest-neighbour coordinate distance."""
    if len(points) < 2:
        return 1.0
    tree = cKDTree(points)
    d, _ = tree.query(points, k=2)
    nn = d[:, 1]
    if model is not None and len(model.lattice_offsets) > 1:
        for off in model.lattice_offsets[1:]:
            d2, _ = tree.query(points + off, k=1)
            nn = np.minimum(nn, d2)
    return float(np.mean(nn))


def sprinkle_spacing(model: MetricModel, points: np.ndarray, density: float) -> float:
    """Typical node separation of a sprinkle, 1 / sqrt(coordinate intensity).

    The nearest-neighbour mean of a Poisson process is only half of this,
    which leaves the proximity graph of a sprinkle poorly connected.
    """
    vol = model.volume_element_batch(np.atleast_2d(points))
    return float(np.mean(1.0 / np.sqrt(density * vol)))


def _candidate_pairs(points, model, radius):
    """All ordered (i, j, displacement) with |displacement| <= radius."""
    tree = cKDTree(points)
    I, J, D = [], [], []
    for off in model.lattice_offsets:
        shifted = cKDTree(points + off)
        sdm = shifted.sparse_distance_matrix(tree, radius, output_type="ndarray")
        if len(sdm) == 0:
            continue
        i = sdm["i"].astype(np.int64)
        j = sdm["j"].astype(np.int64)
        keep = i != j
        i, j = i[keep], j[keep]
        I.append(i)
        J.append(j)
        D.append(points[j] - (points[i] + off))
    if not I:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros((0, 2))
    return np.concatenate(I), np.concatenate(J), np.concatenate(D)


def _connect(points, model, prox):
    """Join proximity components, each to its nearest node outside it.

    Sparse sprinkles can leave small islands beyond the proximity radius;
    the boundary operator could never reach them.
    """
    from scipy.sparse import coo_matrix
    from scipy.sparse.csgraph import connected_components

    n = len(points)
    while n > 1:
        m = coo_matrix((np.ones(len(prox)), (prox[:, 0], prox[:, 1])), shape=(n, n))
        ncomp, lab = connected_components(m, directed=False)
        if ncomp == 1:
            break
        extra = []
        for c in range(ncomp):
            inside = np.flatnonzero(lab == c)
            outside = np.flatnonzero(lab != c)
            tree = cKDTree(points[outside])
            best = (np.inf, 0, 0)
            for off in model.lattice_offsets:
                d, j = tree.query(points[inside] + off)
                k = int(np.argmin(d))
                if d[k] < best[0]:
                    best = (d[k], int(inside[k]), int(outside[j[k]]))
            extra.append(sorted(best[1:]))
        prox = np.unique(np.vstack([prox, np.array(extra, dtype=np.int64)]), axis=0)
    return prox


def _worker_count(workers):
    if workers is None:
        workers = int(os.environ.get("CAUSAL_LAB_WORKERS", "1"))
    return max(1, int(workers))


@dataclass
class CausalGraph:
    """Nodes, weighted causal edges and proximity edges of a sampled model.

    Treated as immutable once built.  ``levels`` is the longest hop count
    from a source node and doubles as the topological layering; it is
    ``None`` (and ``cyclic`` True) when a causal cycle exists.
    """

    points: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    weight: np.ndarray
    proximity: np.ndarray
    model_id: str = ""
    meta: dict = field(default_factory=dict)
    levels: np.ndarray | None = None
    cyclic: bool = False
    cycle: list | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.levels is None and not self.cyclic:
            self._compute_levels()

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    @property
    def topo_order(self):
        if self.levels is None:
            return None
        return np.lexsort((np.arange(self.n), self.levels))

    def _compute_levels(self):
        n = self.n
        indeg = np.bincount(self.dst, minlength=n)
        order = np.argsort(self.src, kind="stable")
        starts = np.searchsorted(self.src[order], np.arange(n + 1))
        level = np.zeros(n, dtype=np.int64)
        frontier = np.flatnonzero(indeg == 0)
        remaining = indeg.copy()
        seen = 0
        depth = 0
        while len(frontier):
            level[frontier] = depth
            seen += len(frontier)
            idx = np.concatenate([order[starts[u]:starts[u + 1]] for u in frontier]) \
                if len(frontier) else np.zeros(0, np.int64)
            targets = self.dst[idx]
            np.subtract.at(remaining, targets, 1)
            cand = np.unique(targets)
            frontier = cand[remaining[cand] == 0]
            depth += 1
        if seen < n:
            self.cyclic = True
            self.levels = None
            self.cycle = self._find_cycle(remaining > 0)
        else:
            self.levels = level

    def _find_cycle(self, alive):
        # every alive node keeps an alive predecessor, so walking backwards
        # must revisit a node
        pred = {}
        for u, v in zip(self.src, self.dst):
            if alive[u] and alive[v] and v not in pred:
                pred[int(v)] = int(u)
        start = int(np.flatnonzero(alive)[0])
        seen = {}
        path = []
        x = start
        while x not in seen:
            seen[x] = len(path)
            path.append(x)
            x = pred[x]
        cycle = path[seen[x]:]
        cycle.reverse()
        return cycle

    def require_acyclic(self):
        if self.cyclic:
            raise CyclicGraphError("graph contains a causal cycle; distances are undefined")

    # -- sweep schedules ---------------------------------------------------
    def schedule(self, direction="forward"):
        """Per-level edge groups used by the longest-path sweeps."""
        self.require_acyclic()
        key = ("schedule", direction)
        if key in self._cache:
            return self._cache[key]
        if direction == "forward":
            head, tail, lev = self.dst, self.src, self.levels[self.dst]
            order_levels = np.unique(lev)
        else:
            head, tail, lev = self.src, self.dst, self.levels[self.src]
            order_levels = np.unique(lev)[::-1]
        groups = []
        order = np.lexsort((head, lev))
        lev_sorted = lev[order]
        for L in order_levels:
            a, b = np.searchsorted(lev_sorted, [L, L + 1])
            idx = order[a:b]
            if len(idx) == 0:
                continue
            h = head[idx]
            cuts = np.flatnonzero(np.r_[True, h[1:] != h[:-1]])
            groups.append((tail[idx], self.weight[idx], h[cuts], cuts))
        self._cache[key] = groups
        return groups

    def neighbors(self):
        """Proximity adjacency lists."""
        if "nbrs" not in self._cache:
            nb = [[] for _ in range(self.n)]
            for u, v in self.proximity:
                nb[u].append(int(v))
                nb[v].append(int(u))
            self._cache["nbrs"] = [np.array(sorted(x), dtype=np.int64) for x in nb]
        return self._cache["nbrs"]

    def proximity_matrix(self):
        from scipy.sparse import coo_matrix
        if "prox" not in self._cache:
            p = self.proximity
            m = coo_matrix((np.ones(2 * len(p)), (np.r_[p[:, 0], p[:, 1]], np.r_[p[:, 1], p[:, 0]])),
                           shape=(self.n, self.n)).tocsr()
            self._cache["prox"] = m
        return self._cache["prox"]

    def node_at(self, point, tol=None) -> int:
        """Id of the node nearest ``point``; raises KeyError beyond ``tol``."""
        point = np.asarray(point, dtype=float)
        d = np.linalg.norm(self.points - point, axis=1)
        i = int(np.argmin(d))
        if tol is None:
            tol = 1e-9
        if d[i] > tol:
            raise KeyError(f"no node within {tol} of {tuple(point)}")
        return i

    # -- serialisation -----------------------------------------------------
    def to_json(self) -> dict:
        return {
            "nodes": [[i, float(p[0]), float(p[1])] for i, p in enumerate(self.points)],
            "edges": [[int(u), int(v), float(w)] for u, v, w in zip(self.src, self.dst, self.weight)],
            "proximity": [[int(u), int(v)] for u, v in self.proximity],
            "meta": dict(self.meta, model=self.model_id),
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def from_json(cls, data: dict) -> "CausalGraph":
        nodes = sorted(data["nodes"])
        points = np.array([[x0, x1] for _, x0, x1 in nodes], dtype=float).reshape(-1, 2)
        e = np.array(data["edges"], dtype=float).reshape(-1, 3)
        prox = np.array(data["proximity"], dtype=np.int64).reshape(-1, 2)
        meta = dict(data.get("meta", {}))
        return cls(points=points, src=e[:, 0].astype(np.int64), dst=e[:, 1].astype(np.int64),
                   weight=e[:, 2], proximity=prox, model_id=meta.get("model", ""), meta=meta)

    @classmethod
    def load(cls, path) -> "CausalGraph":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _classify_chunk(model, P, D, subdivisions):
    _, worst, gTv = segment_lengths(model, P, D, CAUSAL_SAMPLES)
    future = np.all(gTv < 0, axis=1)
    causal = (worst <= 0) & future & model.visible_batch(P, D)
    w = np.zeros(len(P))
    if np.any(causal):
        w[causal] = segment_lengths(model, P[causal], D[causal], subdivisions)[0]
    return causal, w


def build_causal_dag(model: MetricModel, points, horizon: float | None = None,
                     prox_radius: float | None = None, subdivisions: int = 64,
                     workers: int | None = None, meta: dict | None = None,
                     spacing: float | None = None) -> CausalGraph:
    """Connect sampled nodes into a weighted causal graph.

    Parameters
    ----------
    horizon : float, optional
        Maximum coordinate length of a causal edge; defaults to four times
        the mean node spacing.
    prox_radius : float, optional
        Radius of the proximity graph; defaults to 1.5 times the spacing.
    subdivisions : int
        Midpoint samples used for each edge weight.
    spacing : float, optional
        Node spacing behind both defaults; the mean nearest-neighbour
        distance when omitted (exact for grids).

    A graph containing a causal cycle is still returned, with ``cyclic`` set
    and a witness in ``cycle``.
    """
    points = np.asarray(points, dtype=float)
    spacing = mean_spacing(points, model) if spacing is None else float(spacing)
    horizon = 4.0 * spacing if horizon is None else float(horizon)
    prox_radius = 1.5 * spacing if prox_radius is None else float(prox_radius)

    I, J, D = _candidate_pairs(points, model, horizon)
    P = points[I]
    chunk = 20000
    slices = [slice(a, a + chunk) for a in range(0, len(I), chunk)]
    work = lambda s: _classify_chunk(model, P[s], D[s], subdivisions)  # noqa: E731
    nw = _worker_count(workers)
    if nw > 1 and len(slices) > 1:
        with ThreadPoolExecutor(nw) as ex:
            parts = list(ex.map(work, slices))
    else:
        parts = [work(s) for s in slices]
    if parts:
        causal = np.concatenate([c for c, _ in parts])
        w = np.concatenate([x for _, x in parts])
    else:
        causal = np.zeros(0, bool)
        w = np.zeros(0)
    I, J, w = I[causal], J[causal], w[causal]
    w[w < WEIGHT_ATOL] = 0.0
    # a pair reachable through two lifts keeps the larger weight
    order = np.lexsort((-w, J, I))
    I, J, w = I[order], J[order], w[order]
    first = np.ones(len(I), dtype=bool)
    first[1:] = (I[1:] != I[:-1]) | (J[1:] != J[:-1])
    I, J, w = I[first], J[first], w[first]

    pi, pj, _ = _candidate_pairs(points, model, prox_radius)
    a, b = np.minimum(pi, pj), np.maximum(pi, pj)
    prox = np.unique(np.column_stack([a, b]), axis=0) if len(a) else np.zeros((0, 2), np.int64)
    prox = _connect(points, model, prox)

    info = {"horizon": horizon, "prox_radius": prox_radius, "spacing": spacing,
            "subdivisions": subdivisions}
    if meta:
        info.update(meta)
    return CausalGraph(points=points, src=I, dst=J, weight=w, proximity=prox.astype(np.int64),
                       model_id=model.id, meta=info)
