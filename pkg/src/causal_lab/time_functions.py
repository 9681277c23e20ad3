"""Generalised time functions on causal graphs.

Covers the surface-built time function, reverse-Lipschitz checks, gradient
estimates from proximity neighbourhoods, steepness summaries and the exact
dual potential realising the graph distance between two nodes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .achronal import NodeSet, as_mask, classify, is_hatting
from .causal_graph import CausalGraph
from .distance import all_pairs, longest_path_distance, longest_to, sweep, ALL_PAIRS_LIMIT
from .metric_models import MetricModel, curve_length

log = logging.getLogger(__name__)

__all__ = [
    "SplitError",
    "PreconditionError",
    "ScalarField",
    "analytic_field",
    "time_function_from_surface",
    "check_reverse_lipschitz",
    "GradientEstimate",
    "estimate_gradient",
    "analytic_gradient",
    "SteepnessSummary",
    "check_steepness",
    "BoundResult",
    "check_bound_inequality",
    "random_causal_paths",
    "dual_potential",
    "level_set",
    "check_level_set_hatting",
    "continuity_report",
]


class SplitError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


@dataclass
class ScalarField:
    """Node values with a provenance label."""

    values: np.ndarray
    provenance: str = "analytic"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)

    def __getitem__(self, i):
        return self.values[i]

    def __len__(self):
        return len(self.values)

    def scaled(self, c):
        return ScalarField(c * self.values, self.provenance, dict(self.meta, scale=c))

    def to_json(self):
        return {str(i): float(v) for i, v in enumerate(self.values)}

    @classmethod
    def from_json(cls, data, provenance="analytic"):
        n = len(data)
        vals = np.empty(n)
        for k, v in data.items():
            vals[int(k)] = v
        return cls(vals, provenance)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path, provenance="analytic"):
        with open(path) as fh:
            return cls.from_json(json.load(fh), provenance)


def analytic_field(graph: CausalGraph, func, label="analytic") -> ScalarField:
    """Evaluate ``func(points) -> values`` on the graph's nodes."""
    return ScalarField(np.asarray(func(graph.points), dtype=float), label)


def time_function_from_surface(graph: CausalGraph, S) -> ScalarField:
    """f = d(S, x) on I+(S), 0 on S and -d(x, S) on I-(S).

    Raises
    ------
    SplitError
        If some node lies in none of I+(S), S, I-(S).
    """
    fut, m, past, residue = classify(graph, S)
    if residue.any():
        raise SplitError(f"{int(residue.sum())} nodes lie outside I+(S), S and I-(S)")
    init = np.where(m, 0.0, -np.inf)
    up = sweep(graph, init, "forward")
    down = sweep(graph, init, "backward")
    f = np.zeros(graph.n)
    f[fut] = up[fut]
    f[past] = -down[past]
    f[m] = 0.0
    return ScalarField(f, "from-surface", {"surface": list(np.flatnonzero(m))})


def check_reverse_lipschitz(graph: CausalGraph, f, form: str = "both",
                            max_pairs: int = 200_000, seed: int = 0, atol: float = 1e-9):
    """Violations of the reverse-Lipschitz condition.

    Edge form: f(v) - f(u) >= w(u, v) on every causal edge.  Pair form:
    f(y) - f(x) >= d(x, y) on related pairs with d(x, y) > 0, enumerated
    when the graph fits the all-pairs table and there are at most
    ``max_pairs`` of them, sampled otherwise.  Returns tuples
    ``(form, x, y, lhs, rhs)``.
    """
    vals = f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)
    out = []
    if form in ("edge", "both"):
        lhs = vals[graph.dst] - vals[graph.src]
        bad = np.flatnonzero(lhs < graph.weight - atol)
        out += [("edge", int(graph.src[k]), int(graph.dst[k]), float(lhs[k]),
                 float(graph.weight[k])) for k in bad]
    if form in ("pair", "both"):
        rng = np.random.default_rng(seed)
        if graph.n <= ALL_PAIRS_LIMIT:
            L = all_pairs(graph)
            X, Y = np.nonzero(np.isfinite(L) & (L > 0))
            if len(X) > max_pairs:
                pick = rng.choice(len(X), max_pairs, replace=False)
                X, Y = X[pick], Y[pick]
            D = L[X, Y]
        else:
            X = rng.choice(graph.n, size=min(graph.n, 256), replace=False)
            rows = np.full((len(X), graph.n), -np.inf)
            rows[np.arange(len(X)), X] = 0.0
            R = sweep(graph, rows, "forward")
            i, Y = np.nonzero(np.isfinite(R) & (R > 0))
            D, X = R[i, Y], X[i]
        lhs = vals[Y] - vals[X]
        bad = np.flatnonzero(lhs < D - atol)
        out += [("pair", int(X[k]), int(Y[k]), float(lhs[k]), float(D[k])) for k in bad]
    return out


@dataclass
class GradientEstimate:
    """Local gradient of a field at one node."""

    node: int
    df: np.ndarray
    grad: np.ndarray
    g_grad_grad: float
    g_grad_T: float
    residual: float
    n_neighbors: int
    reliable: bool


def _local(model, graph, x):
    nb = graph.neighbors()[x]
    P = graph.points
    D = np.array([model.displacement(P[x], P[j]) for j in nb]).reshape(-1, 2)
    return nb, D


def analytic_gradient(model: MetricModel, point, df) -> GradientEstimate:
    """Gradient from an exact differential ``df`` at ``point``."""
    g = model.metric_batch(np.atleast_2d(point))[0]
    T = model.time_orientation_batch(np.atleast_2d(point))[0]
    df = np.asarray(df, dtype=float)
    grad = np.linalg.solve(g, df)
    return GradientEstimate(-1, df, grad, float(df @ grad), float(df @ T), 0.0, 0, True)


def estimate_gradient(model: MetricModel, graph: CausalGraph, f, x: int,
                      rel_residual: float = 0.05, min_neighbors: int = 5) -> GradientEstimate:
    """Affine fit of ``f`` over the proximity neighbourhood of node ``x``.

    Neighbours are weighted by inverse coordinate distance.  The estimate
    is unreliable when it has fewer than ``min_neighbors`` neighbours, a
    rank-deficient design, or a weighted RMS residual above
    ``rel_residual`` times the local oscillation of ``f``.
    """
    vals = f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)
    nb, D = _local(model, graph, x)
    k = len(nb)
    nan = np.full(2, np.nan)
    if k < 3:
        return GradientEstimate(x, nan, nan, np.nan, np.nan, np.inf, k, False)
    dist = np.linalg.norm(D, axis=1)
    w = 1.0 / np.maximum(dist, 1e-300)
    A = np.column_stack([np.ones(k + 1), np.vstack([np.zeros(2), D])])
    wt = np.r_[w.max(), w]
    b = np.r_[vals[x], vals[nb]]
    sw = np.sqrt(wt)
    coef, _, rank, _ = np.linalg.lstsq(A * sw[:, None], b * sw, rcond=None)
    res = b - A @ coef
    rms = float(np.sqrt(np.sum(wt * res ** 2) / np.sum(wt)))
    osc = float(b.max() - b.min())
    df = coef[1:]
    g = model.metric_batch(graph.points[x][None])[0]
    T = model.time_orientation_batch(graph.points[x][None])[0]
    grad = np.linalg.solve(g, df)
    reliable = bool(k >= min_neighbors and rank == 3 and rms <= rel_residual * osc + 1e-12)
    return GradientEstimate(x, df, grad, float(df @ grad), float(df @ T), rms, k, reliable)


@dataclass
class SteepnessSummary:
    passed: bool
    fraction: float
    worst: float
    ess_sup: float
    tol: float
    n_reliable: int
    n_past_directed: int
    estimates: list = field(repr=False, default_factory=list)

    def to_json(self):
        return {"pass": self.passed, "fraction": self.fraction, "worst": self.worst,
                "ess_sup": self.ess_sup, "tol": self.tol, "n_reliable": self.n_reliable,
                "n_past_directed": self.n_past_directed}

    def to_csv(self, path):
        import csv
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["node_id", "g_grad_grad", "reliable"])
            for e in self.estimates:
                w.writerow([e.node, repr(e.g_grad_grad), int(e.reliable)])


def check_steepness(model: MetricModel, graph: CausalGraph, f, tol: float | None = None,
                    nodes=None, quantile: float = 0.95, min_fraction: float = 0.95,
                    exclude=None) -> SteepnessSummary:
    """Fraction of reliable nodes with g(grad f, grad f) <= -1 + tol.

    ``tol`` defaults to twice the graph spacing (0.1 at spacing 0.05).  The
    essential supremum is approximated by the ``quantile`` of the reliable
    values.  ``exclude`` removes nodes (for instance a surface where f has a
    kink) before aggregation.
    """
    if tol is None:
        tol = 2.0 * float(graph.meta.get("spacing", 0.05))
    ids = np.arange(graph.n) if nodes is None else np.asarray(list(nodes), dtype=np.int64)
    if exclude is not None:
        ids = ids[~as_mask(graph, exclude)[ids]]
    est = [estimate_gradient(model, graph, f, int(i)) for i in ids]
    rel = [e for e in est if e.reliable]
    vals = np.array([e.g_grad_grad for e in rel])
    if len(vals) == 0:
        return SteepnessSummary(False, 0.0, np.nan, np.nan, tol, 0, 0, est)
    frac = float(np.mean(vals <= -1.0 + tol))
    past = int(sum(e.g_grad_T > 0 for e in rel))
    return SteepnessSummary(frac >= min_fraction, frac, float(vals.max()),
                            float(np.quantile(vals, quantile)), tol, len(rel), past, est)


@dataclass
class BoundResult:
    status: str  # "pass", "fail" or "inconclusive"
    slack: float
    length: float
    steepness: float

    def __bool__(self):
        return self.status == "pass"


def check_bound_inequality(model: MetricModel, graph: CausalGraph, f, path,
                           tol_grad: float = 0.05) -> BoundResult:
    """|f(end) - f(start)| >= L(path) * min over the path of sqrt(-g(grad f, grad f)).

    Unreliable gradient estimates on the path give ``inconclusive``.
    """
    vals = f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)
    path = [int(i) for i in path]
    P = graph.points
    pts = [P[path[0]]]
    for a, b in zip(path, path[1:]):
        pts.append(pts[-1] + model.displacement(P[a], P[b]))
    length = curve_length(model, np.asarray(pts))
    est = [estimate_gradient(model, graph, vals, i) for i in path]
    if not all(e.reliable for e in est):
        return BoundResult("inconclusive", np.nan, length, np.nan)
    m = min(np.sqrt(max(-e.g_grad_grad, 0.0)) for e in est)
    slack = abs(vals[path[-1]] - vals[path[0]]) - length * m
    return BoundResult("pass" if slack >= -tol_grad else "fail", float(slack), length, float(m))


def random_causal_paths(g: CausalGraph, n: int, rng, max_len: int = 6) -> list:
    """Random causal edge walks of positive weight."""
    order = np.argsort(g.src, kind="stable")
    src, dst, w = g.src[order], g.dst[order], g.weight[order]
    ptr = np.searchsorted(src, np.arange(g.n + 1))
    paths = []
    for _ in range(50 * n):
        if len(paths) >= n:
            break
        x = int(rng.integers(g.n))
        p = [x]
        for _ in range(max_len):
            lo, hi = ptr[x], ptr[x + 1]
            ok = np.flatnonzero(w[lo:hi] > 0)
            if len(ok) == 0:
                break
            x = int(dst[lo + rng.choice(ok)])
            p.append(x)
        if len(p) > 1:
            paths.append(p)
    return paths


def dual_potential(graph: CausalGraph, p: int, q: int):
    """Edge-steep field f with f(q) - f(p) equal to the graph distance d(p, q).

    Returns ``(field, value)`` with ``value = max(f(q) - f(p), 0)``.  The
    field is the max-plus closure of the initial values
    c_u = min(-L(u, p), d(p, q) - L(u, q)), where L is the longest path
    weight (nodes related to neither endpoint start at 0).
    """
    graph.require_acyclic()
    V = longest_path_distance(graph, p, q)
    Lp = longest_to(graph, [p])
    Lq = longest_to(graph, [q])
    with np.errstate(invalid="ignore"):
        c = np.minimum(-Lp, V - Lq)
    c[np.isinf(c)] = 0.0
    phi = sweep(graph, c, "forward")
    phi = phi - phi[p]
    value = max(phi[q] - phi[p], 0.0)
    return ScalarField(phi, "dual-potential", {"p": int(p), "q": int(q)}), float(value)


def level_set(graph: CausalGraph, f, r: float, tol: float | None = None) -> NodeSet:
    """Nodes with f = r, or within ``tol`` of r.

    Without ``tol``, nodes attaining r exactly are used when there are any;
    otherwise the band is half the median causal edge weight.
    """
    vals = f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)
    if tol is None:
        exact = np.abs(vals - r) <= 1e-12 * max(1.0, abs(r))
        if exact.any():
            return NodeSet.from_mask(exact, "generic")
        pos = graph.weight[graph.weight > 0]
        tol = 0.5 * float(np.median(pos)) if len(pos) else 0.0
    return NodeSet.from_mask(np.abs(vals - r) <= tol, "generic")


def check_level_set_hatting(graph: CausalGraph, f, r: float, chains, tol: float | None = None) -> bool:
    """Whether the level set f^-1(r) is a hatting for ``chains``."""
    if check_reverse_lipschitz(graph, f, form="edge"):
        raise PreconditionError("field violates the reverse-Lipschitz condition")
    H = level_set(graph, f, r, tol)
    if len(H) == 0:
        raise ValueError(f"level set f = {r} is empty")
    return is_hatting(graph, H, chains)


def continuity_report(graph: CausalGraph, f, model: MetricModel | None = None, top_k: int = 10) -> dict:
    """Largest jumps of ``f`` across proximity edges, per unit coordinate length."""
    vals = f.values if isinstance(f, ScalarField) else np.asarray(f, dtype=float)
    pr = graph.proximity
    if len(pr) == 0:
        return {"max_jump": 0.0, "top": []}
    P = graph.points
    if model is None:
        ln = np.linalg.norm(P[pr[:, 1]] - P[pr[:, 0]], axis=1)
    else:
        ln = np.array([np.linalg.norm(model.displacement(P[a], P[b])) for a, b in pr])
    jump = np.abs(vals[pr[:, 1]] - vals[pr[:, 0]]) / np.maximum(ln, 1e-300)
    order = np.argsort(-jump)[:top_k]
    return {"max_jump": float(jump.max()),
            "top": [(int(pr[k, 0]), int(pr[k, 1]), float(jump[k])) for k in order]}
