"""Independent reference computations used only by the tests."""

import itertools

import networkx as nx
import numpy as np
from scipy.optimize import linprog

from causal_lab.causal_graph import CausalGraph


def dag(n, edges, points=None, prox=None):
    """Hand-built graph; ``edges`` are (u, v, w) triples."""
    e = np.array(edges, dtype=float).reshape(-1, 3)
    if points is None:
        points = np.column_stack([np.arange(n, dtype=float), np.zeros(n)])
    if prox is None:
        prox = [(i, i + 1) for i in range(n - 1)]
    return CausalGraph(points=np.asarray(points, float), src=e[:, 0].astype(np.int64),
                       dst=e[:, 1].astype(np.int64), weight=e[:, 2],
                       proximity=np.array(prox, dtype=np.int64).reshape(-1, 2))


def random_dag(rng, n, p=0.3, wmax=2.0, zero_frac=0.2):
    """Random DAG on nodes in index order with some zero-weight edges."""
    edges = []
    for u, v in itertools.combinations(range(n), 2):
        if rng.random() < p:
            w = 0.0 if rng.random() < zero_frac else float(rng.uniform(0.01, wmax))
            edges.append((u, v, w))
    prox = [(i, j) for i, j in itertools.combinations(range(n), 2) if abs(i - j) <= 2]
    return dag(n, edges, prox=prox)


def to_nx(g):
    G = nx.DiGraph()
    G.add_nodes_from(range(g.n))
    for u, v, w in zip(g.src, g.dst, g.weight):
        G.add_edge(int(u), int(v), weight=float(w))
    return G


def brute_longest(g, p, q):
    """Max path weight over all simple paths p -> q, or None when q is unreachable."""
    if p == q:
        return 0.0
    G = to_nx(g)
    best = None
    for path in nx.all_simple_paths(G, p, q):
        w = sum(G[a][b]["weight"] for a, b in zip(path, path[1:]))
        best = w if best is None else max(best, w)
    return best


def brute_distance(g, p, q):
    v = brute_longest(g, p, q)
    return 0.0 if v is None else max(v, 0.0)


def brute_chronological_future(g, U):
    """Nodes reached from U by a path with positive total weight."""
    G = to_nx(g)
    out = set()
    for u in U:
        for x in nx.descendants(G, u):
            if (brute_longest(g, u, x) or 0.0) > 0:
                out.add(x)
    return out


def lp_value(g, p, q):
    """min f(q) - f(p) subject to f(v) - f(u) >= w on every edge; 0 if unbounded."""
    n = g.n
    c = np.zeros(n)
    c[q] += 1
    c[p] -= 1
    A = np.zeros((g.n_edges, n))
    for k, (u, v) in enumerate(zip(g.src, g.dst)):
        A[k, u] += 1
        A[k, v] -= 1
    res = linprog(c, A_ub=A if g.n_edges else None, b_ub=-g.weight if g.n_edges else None,
                  A_eq=np.eye(n)[[p]], b_eq=[0.0], bounds=[(None, None)] * n, method="highs")
    if res.status == 3:
        return 0.0
    assert res.status == 0, res.message
    return max(res.fun, 0.0)


def pairwise_achronal(g, S):
    S = list(S)
    for a in S:
        for b in S:
            if a != b and (brute_longest(g, a, b) or 0.0) > 0:
                return False
    return True


def flat_tau(dt, dx):
    """Proper time of a straight Minkowski segment (0 if not timelike)."""
    s = dt * dt - dx * dx
    return float(np.sqrt(s)) if dt > 0 and s > 0 else 0.0
