"""Achronal sets, splitting surfaces and hattings on causal graphs.

Chronological relations use the timelike proxy: ``y`` is in I+(x) when a
causal path of strictly positive total weight runs from ``x`` to ``y``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .causal_graph import CausalGraph
from .distance import RefinementLadder, all_pairs, sweep

log = logging.getLogger(__name__)

__all__ = [
    "ConstructionError",
    "StructureError",
    "NodeSet",
    "as_mask",
    "chronological_future",
    "chronological_past",
    "causal_future",
    "causal_past",
    "is_achronal",
    "boundary",
    "SplitResult",
    "build_splitting_surface",
    "surface_from_achronal",
    "classify",
    "DivergentChain",
    "detect_divergent_chains",
    "build_hatting",
    "is_hatting",
    "ITERATION_CAP",
]

TAGS = ("generic", "achronal", "future-set", "past-set", "surface", "hatting")
ITERATION_CAP = 128


class ConstructionError(RuntimeError):
    pass


class StructureError(ValueError):
    pass


@dataclass(frozen=True)
class NodeSet:
    """Sorted, duplicate-free node ids plus a tag."""

    ids: tuple = ()
    tag: str = "generic"

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown tag {self.tag!r}")
        object.__setattr__(self, "ids", tuple(sorted({int(i) for i in self.ids})))

    @classmethod
    def from_mask(cls, mask, tag="generic"):
        return cls(tuple(np.flatnonzero(mask)), tag)

    def mask(self, n):
        m = np.zeros(n, dtype=bool)
        m[list(self.ids)] = True
        return m

    def __len__(self):
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)

    def __contains__(self, i):
        return int(i) in set(self.ids)

    def to_json(self):
        return {"tag": self.tag, "ids": list(self.ids)}

    @classmethod
    def from_json(cls, data):
        if isinstance(data, list):
            return cls(tuple(data))
        return cls(tuple(data["ids"]), data.get("tag", "generic"))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def as_mask(graph: CausalGraph, U) -> np.ndarray:
    if isinstance(U, np.ndarray) and U.dtype == bool:
        return U
    if isinstance(U, NodeSet):
        return U.mask(graph.n)
    m = np.zeros(graph.n, dtype=bool)
    ids = list(U)
    if ids:
        m[np.asarray(ids, dtype=np.int64)] = True
    return m


def _reach(graph, U, direction):
    graph.require_acyclic()
    m = as_mask(graph, U)
    init = np.where(m, 0.0, -np.inf)
    return sweep(graph, init, direction)


def chronological_future(graph: CausalGraph, U) -> np.ndarray:
    """Mask of nodes reached from ``U`` by a path of positive weight."""
    return _reach(graph, U, "forward") > 0


def chronological_past(graph: CausalGraph, U) -> np.ndarray:
    return _reach(graph, U, "backward") > 0


def causal_future(graph: CausalGraph, U) -> np.ndarray:
    """Mask of nodes reached from ``U`` by any causal path (``U`` included)."""
    return np.isfinite(_reach(graph, U, "forward"))


def causal_past(graph: CausalGraph, U) -> np.ndarray:
    return np.isfinite(_reach(graph, U, "backward"))


def is_achronal(graph: CausalGraph, S):
    """``(True, None)`` or ``(False, (a, b))`` with ``b`` in I+(a), both in S."""
    m = as_mask(graph, S)
    hit = np.flatnonzero(m & chronological_future(graph, m))
    if len(hit) == 0:
        return True, None
    b = int(hit[0])
    back = _reach(graph, [b], "backward")
    a = int(np.flatnonzero(m & (back > 0))[0])
    return False, (a, b)


def boundary(graph: CausalGraph, A, kind: str | None = None, seed=None) -> np.ndarray:
    """Discrete boundary of the node set ``A`` through the proximity graph.

    Candidates are nodes outside ``A`` with a proximity neighbour in ``A``.
    With ``seed`` given, the seed nodes and their neighbours outside ``A``
    join the candidates.  ``kind="future"`` keeps the candidates not in the
    chronological past of another candidate (use for future sets);
    ``kind="past"`` keeps those not in the chronological future of another.
    """
    if graph.n > 1 and len(graph.proximity) == 0:
        raise StructureError("graph has no proximity edges")
    A = as_mask(graph, A)
    P = graph.proximity_matrix()
    touch = (P @ A.astype(np.int64)) > 0
    cand = touch & ~A
    if seed is not None:
        U = as_mask(graph, seed)
        near = (P @ U.astype(np.int64)) > 0
        cand |= U | (near & ~A)
    if kind is None or not cand.any():
        return cand
    if kind == "future":
        return cand & ~chronological_past(graph, cand)
    if kind == "past":
        return cand & ~chronological_future(graph, cand)
    raise ValueError(f"unknown boundary kind {kind!r}")


def classify(graph: CausalGraph, S):
    """Masks ``(I+(S), S, I-(S), residue)``."""
    m = as_mask(graph, S)
    fut = chronological_future(graph, m)
    past = chronological_past(graph, m)
    residue = ~(fut | past | m)
    return fut, m, past, residue


@dataclass
class SplitResult:
    surface: NodeSet
    iterates: list
    residue: NodeSet
    converged: bool
    unreliable: NodeSet = field(default_factory=NodeSet)

    @property
    def n_iterations(self):
        """Number of distinct iterates."""
        return len({it.ids for it in self.iterates})


def build_splitting_surface(graph: CausalGraph, F0, seed=None,
                            cap: int = ITERATION_CAP) -> SplitResult:
    """Split the graph by an achronal surface grown from the future set ``F0``.

    Starts with the boundary of ``F0`` and alternately takes the boundary of
    the past and of the future of the current surface until it stops
    growing.  Every iterate contains its predecessor.
    """
    graph.require_acyclic()
    F0 = as_mask(graph, F0)
    S = boundary(graph, F0, "future", seed=seed)
    if not S.any():
        raise ConstructionError("the seed future set has an empty boundary")
    iterates = [NodeSet.from_mask(S, "surface")]
    converged = False
    idle = 0
    for i in range(1, cap + 1):
        if i % 2:
            nxt = boundary(graph, chronological_past(graph, S), "past", seed=S)
        else:
            nxt = boundary(graph, chronological_future(graph, S), "future", seed=S)
        if not np.all(nxt[S]):
            raise ConstructionError(f"iterate {i} does not contain iterate {i - 1}")
        ok, wit = is_achronal(graph, nxt)
        if not ok:
            raise ConstructionError(f"iterate {i} is not achronal: {wit}")
        grew = nxt.sum() > S.sum()
        S = nxt
        iterates.append(NodeSet.from_mask(S, "surface"))
        idle = 0 if grew else idle + 1
        if idle >= 2:
            converged = True
            break
    residue = classify(graph, S)[3]
    deg = np.asarray(graph.proximity_matrix().sum(axis=1)).ravel()
    return SplitResult(NodeSet.from_mask(S, "surface"), iterates,
                       NodeSet.from_mask(residue), converged,
                       NodeSet.from_mask(S & (deg < 3)))


def surface_from_achronal(graph: CausalGraph, H, cap: int = ITERATION_CAP) -> SplitResult:
    """Splitting surface containing the achronal set ``H``."""
    ok, wit = is_achronal(graph, H)
    if not ok:
        raise ConstructionError(f"seed set is not achronal: {wit}")
    return build_splitting_surface(graph, chronological_future(graph, H), seed=H, cap=cap)


@dataclass
class DivergentChain:
    """Nodes, one per ladder level, with distance growth to or from a witness.

    ``kind="future"`` records d(x_k, w); ``kind="past"`` records d(w, x_k).
    """

    kind: str
    nodes: list
    coords: np.ndarray
    witness: np.ndarray
    growth: np.ndarray
    focus: np.ndarray | None = None

    @property
    def tail(self):
        return self.coords[-1]

    def to_json(self):
        return {"kind": self.kind, "nodes": [int(i) for i in self.nodes],
                "coords": np.asarray(self.coords).tolist(),
                "witness": np.asarray(self.witness).tolist(),
                "growth": np.asarray(self.growth).tolist(),
                "focus": None if self.focus is None else np.asarray(self.focus).tolist()}

    @classmethod
    def from_json(cls, d):
        focus = d.get("focus")
        return cls(d["kind"], list(d["nodes"]), np.asarray(d["coords"], float),
                   np.asarray(d["witness"], float), np.asarray(d["growth"], float),
                   None if focus is None else np.asarray(focus, float))


def _match(graph, pts, radius):
    from scipy.spatial import cKDTree
    d, i = cKDTree(graph.points).query(pts)
    return np.where(d <= radius, i, -1)


def default_threshold(graph: CausalGraph) -> float:
    L = all_pairs(graph)
    pos = L[np.isfinite(L) & (L > 0)]
    return 5.0 * float(np.median(pos)) if len(pos) else np.inf


def _focus(g, vals, start, kind):
    # follow the optimal path from ``start`` to the witness and return the
    # point where proper time per coordinate length peaks
    fwd = kind == "future"
    a, b = (g.src, g.dst) if fwd else (g.dst, g.src)
    order = np.argsort(a, kind="stable")
    a, b, w = a[order], b[order], g.weight[order]
    ptr = np.searchsorted(a, np.arange(g.n + 1))
    best, where, x = -1.0, g.points[start], start
    for _ in range(g.n):
        lo, hi = ptr[x], ptr[x + 1]
        if lo == hi:
            break
        gain = w[lo:hi] + vals[b[lo:hi]]
        k = int(np.argmax(gain))
        if not np.isclose(gain[k], vals[x], rtol=1e-12, atol=1e-12):
            break
        y = int(b[lo + k])
        dens = w[lo + k] / max(np.linalg.norm(g.points[y] - g.points[x]), 1e-300)
        if dens > best:
            best, where = dens, 0.5 * (g.points[x] + g.points[y])
        x = y
    return where


def detect_divergent_chains(ladder: RefinementLadder, threshold: float | None = None):
    """Finite stand-ins for divergent sequences across a refinement ladder.

    Every node of the coarsest level is a candidate witness, matched to the
    nearest node of each finer level.  At each level the future chain takes
    the node maximising d(x, w) and the past chain the node maximising
    d(w, x).  A chain is kept when its growth record is strictly increasing
    and its final value exceeds ``threshold``.  Chains sharing a tail keep
    the one with the largest final growth.
    """
    coarse = ladder.coarsest
    if threshold is None:
        threshold = default_threshold(coarse)
    W = coarse.points
    per_level = []
    for _, g in ladder:
        g.require_acyclic()
        wid = _match(g, W, float(g.meta.get("spacing", np.inf)))
        ok = wid >= 0
        init = np.full((len(W), g.n), -np.inf)
        init[np.flatnonzero(ok), wid[ok]] = 0.0
        to_w = sweep(g, init, "backward")    # d(x, w)
        from_w = sweep(g, init, "forward")   # d(w, x)
        per_level.append((g, ok, to_w, from_w))

    chains = {}
    for kind, slot in (("future", 2), ("past", 3)):
        for k in range(len(W)):
            nodes, coords, growth, focus = [], [], [], []
            for lev in per_level:
                g, ok, vals = lev[0], lev[1], lev[slot]
                if not ok[k]:
                    break
                row = np.where(np.isfinite(vals[k]), vals[k], -np.inf)
                j = int(np.argmax(row))
                nodes.append(j)
                coords.append(g.points[j])
                growth.append(max(row[j], 0.0))
                focus.append(_focus(g, vals[k], j, kind))
            else:
                gr = np.asarray(growth)
                if np.all(np.diff(gr) > 0) and gr[-1] > threshold:
                    c = DivergentChain(kind, nodes, np.asarray(coords), W[k].copy(), gr,
                                       np.asarray(focus))
                    key = (kind, nodes[-1])
                    if key not in chains or chains[key].growth[-1] < gr[-1]:
                        chains[key] = c
    out = sorted(chains.values(), key=lambda c: (c.kind, -c.growth[-1]))
    log.info("detected %d divergent chains (threshold %.3g)", len(out), threshold)
    return out


def _tail_id(graph, chain):
    return int(_match(graph, np.atleast_2d(chain.tail), float(graph.meta.get("spacing", np.inf)))[0])


def _witness_id(graph, chain):
    return int(_match(graph, np.atleast_2d(chain.witness), np.inf)[0])


def build_hatting(graph: CausalGraph, chains, record: list | None = None) -> NodeSet:
    """Achronal set with every future chain tail in its past and every
    past chain tail in its future.

    Follows the alternating induction over the chain witnesses.  An element
    is adjoined when it keeps the set achronal; otherwise it is projected
    onto the boundary of the past (or future) of the current set, or the
    boundary nodes separating it from its chain tails are adjoined.
    ``record`` collects ``(element, case, added nodes)`` tuples.
    """
    graph.require_acyclic()
    if not chains:
        raise ValueError("no chains given")
    coords = graph.points

    def group(kind):
        out = {}
        for c in chains:
            if c.kind == kind:
                out.setdefault(_witness_id(graph, c), []).append(_tail_id(graph, c))
        return list(out.items())

    F, P = group("future"), group("past")

    def conflicts(elem, tails, reach):
        # opposite-kind tails that a base at ``elem`` would strand
        r = reach(graph, [elem])
        r[elem] = True
        return int(sum(r[t] for t in tails))

    # the ordering of the witnesses is free; start from the base element
    # that strands the fewest chain tails
    if P:
        ft = [t for _, ts in F for t in ts]
        k = min(range(len(P)), key=lambda i: conflicts(P[i][0], ft, chronological_future))
        P = [P[k]] + P[:k] + P[k + 1:]
    else:
        pt = [t for _, ts in P for t in ts]
        k = min(range(len(F)), key=lambda i: conflicts(F[i][0], pt, chronological_past))
        F = [F[k]] + F[:k] + F[k + 1:]
    S = np.zeros(graph.n, dtype=bool)
    if P:
        S[P[0][0]] = True
        P_rest, first = P[1:], ("base", P[0][0])
    else:
        S[F[0][0]] = True
        F, P_rest, first = F[1:], P, ("base", F[0][0])
    if record is not None:
        record.append((first[1], "base", [first[1]]))

    def step(S, elem, tails, kind):
        fut = chronological_future(graph, S)
        past = chronological_past(graph, S)
        if not fut[elem] and not past[elem] and not S[elem]:
            return [elem], 1
        same = past if kind == "future" else fut
        if same[elem] or S[elem]:
            # project along a causal path onto the near boundary
            side = "past" if kind == "future" else "future"
            B = boundary(graph, same, side, seed=S)
            rel = (chronological_future if kind == "future" else chronological_past)(graph, [elem])
            opts = np.flatnonzero(B & (rel | (np.arange(graph.n) == elem)))
            if len(opts) == 0:
                raise ConstructionError(f"no projection node for element {elem}")
            j = opts[np.argmin(np.linalg.norm(coords[opts] - coords[elem], axis=1))]
            return [int(j)], 2
        other = fut if kind == "future" else past
        side = "future" if kind == "future" else "past"
        B = boundary(graph, other, side, seed=S)
        added = set()
        if kind == "future":
            below, above = chronological_past(graph, [elem]), chronological_future
            done = past
        else:
            below, above = chronological_future(graph, [elem]), chronological_past
            done = fut
        for t in tails:
            between = B & below & above(graph, [t])
            done_t = done[t]
            added.update(np.flatnonzero(between).tolist())
            if not done_t and not between.any():
                raise ConstructionError(f"no separating boundary node for element {elem} "
                                        f"and chain tail {t}")
        return sorted(added), 3

    queue = []
    for k in range(max(len(F), len(P_rest))):
        if k < len(F):
            queue.append(("future",) + F[k])
        if k < len(P_rest):
            queue.append(("past",) + P_rest[k])
    for kind, elem, tails in queue:
        added, case = step(S, elem, tails, kind)
        S[added] = True
        if record is not None:
            record.append((elem, case, added))
        ok, wit = is_achronal(graph, S)
        if not ok:
            raise ConstructionError(f"element {elem} (case {case}) broke achronality: {wit}")
    return NodeSet.from_mask(S, "hatting")


def is_hatting(graph: CausalGraph, H, chains) -> bool:
    """``H`` is achronal, future chain tails lie in I-(H) and past chain
    tails in I+(H)."""
    m = as_mask(graph, H)
    if not m.any():
        return False
    if not is_achronal(graph, m)[0]:
        return False
    if not chains:
        return True
    past = chronological_past(graph, m)
    fut = chronological_future(graph, m)
    for c in chains:
        t = _tail_id(graph, c)
        if t < 0:
            return False
        if c.kind == "future" and not past[t]:
            return False
        if c.kind == "past" and not fut[t]:
            return False
    return True
