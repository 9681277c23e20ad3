"""Config-driven experiment pipelines, reports and plot data."""

from __future__ import annotations

import copy
import csv
import hashlib
import json
import logging
import os
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .achronal import (NodeSet, build_hatting, build_splitting_surface, chronological_future,
                       detect_divergent_chains, is_achronal, is_hatting, surface_from_achronal)
from .causal_graph import (CausalGraph, SamplingError, SamplingSpec, build_causal_dag, sample_points,
                           sprinkle_spacing)
from .distance import build_ladder, divergence_probe, longest_path_distance
from .metric_models import (FrameSpec, build_steep_frame, make_model, widen_cones)
from .time_functions import (ScalarField, analytic_field, analytic_gradient, check_level_set_hatting,
                             check_reverse_lipschitz, check_steepness, dual_potential,
                             time_function_from_surface)

log = logging.getLogger(__name__)

__all__ = [
    "CONFIG_SCHEMA",
    "DEFAULT_WINDOWS",
    "CheckRecord",
    "validate_config",
    "load_config",
    "bundled_configs",
    "load_bundled",
    "model_from_meta",
    "make_graph",
    "lp_distance",
    "cylinder_points",
    "stable_causality_probe",
    "run_experiment",
    "report_digest",
    "exit_code",
    "emit_plot_data",
]

CONFIG_DIR = Path(__file__).with_name("configs")

DEFAULT_WINDOWS = {
    "minkowski2d": [[-0.2, 1.2], [-0.6, 0.6]],
    "slit_minkowski": [[-2.5, 2.5], [-2.2, 2.2]],
    "singular_wedge": [[-0.25, 0.25], [-0.5, 1.0]],
    "slit_cylinder": [[-np.pi, np.pi], [-np.pi, np.pi]],
}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["name", "seed", "pipeline"],
    "properties": {
        "name": {"type": "string"},
        "seed": {"type": "integer", "minimum": 0},
        "model": {
            "type": "object",
            "required": ["id"],
            "properties": {
                "id": {"enum": sorted(DEFAULT_WINDOWS)},
                "params": {"type": "object"},
                "delta": {"type": "number", "minimum": 0},
            },
        },
        "sampling": {
            "type": "object",
            "properties": {
                "mode": {"enum": ["grid", "sprinkle"]},
                "window": {"type": "array", "items": {"type": "array", "minItems": 2, "maxItems": 2},
                           "minItems": 2, "maxItems": 2},
                "step": {"anyOf": [{"type": "number", "exclusiveMinimum": 0},
                                   {"type": "array", "items": {"type": "number"}}]},
                "density": {"type": "number", "exclusiveMinimum": 0},
                "horizon_factor": {"type": "number", "exclusiveMinimum": 0},
            },
        },
        "pipeline": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "object", "required": ["op"], "properties": {"op": {"type": "string"}}},
        },
        "output_dir": {"type": "string"},
        "workers": {"type": "integer", "minimum": 1},
    },
}


@dataclass
class CheckRecord:
    name: str
    status: str  # pass, fail, inconclusive or skipped
    summary: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    artifacts: dict = field(default_factory=dict)
    plot: dict | None = None
    seconds: float = 0.0

    def to_json(self):
        d = {"name": self.name, "status": self.status, "summary": _plain(self.summary),
             "tolerances": _plain(self.tolerances), "artifacts": dict(self.artifacts)}
        if self.plot is not None:
            d["plot"] = _plain(self.plot)
        return d


def _plain(x):
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, np.ndarray):
        return _plain(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if np.isfinite(x) else repr(x)
    return x


def validate_config(cfg: dict) -> dict:
    jsonschema.validate(cfg, CONFIG_SCHEMA)
    return cfg


def load_config(path) -> dict:
    with open(path) as fh:
        return validate_config(json.load(fh))


def bundled_configs() -> list:
    return sorted(p.stem for p in CONFIG_DIR.glob("*.json"))


def load_bundled(name: str) -> dict:
    return load_config(CONFIG_DIR / f"{name.removesuffix('.json')}.json")


def model_from_meta(meta: dict):
    m = make_model(meta["model"], **meta.get("model_params", {}))
    return widen_cones(m, float(meta.get("delta", 0.0)))


def cylinder_points(step_ratio: float = 1.02, n: int = 32):
    """Anisotropic grid on the cylinder; the spatial step is ``step_ratio`` times
    the time step so grid diagonals sit just outside the unwidened cones."""
    h = np.pi / n
    spec = SamplingSpec("grid", window=DEFAULT_WINDOWS["slit_cylinder"], step=(h, step_ratio * h))
    return sample_points(make_model("slit_cylinder"), spec), spec


def make_graph(model_id: str, sampling: dict | None = None, params: dict | None = None,
               delta: float = 0.0, seed: int = 0, workers=None) -> CausalGraph:
    """Sample a model and build its causal graph, recording provenance in ``meta``."""
    params = params or {}
    sampling = dict(sampling or {})
    base = make_model(model_id, **params)
    model = widen_cones(base, delta)
    hf = float(sampling.pop("horizon_factor", 4.0))
    sampling.setdefault("mode", "grid")
    sampling.setdefault("window", DEFAULT_WINDOWS[model_id])
    if sampling["mode"] == "grid":
        sampling.setdefault("step", 0.05)
    spec = SamplingSpec.from_dict(dict(sampling, seed=seed))
    pts = sample_points(base, spec)
    steps = np.atleast_1d(np.asarray(spec.step if spec.step is not None else np.nan, float))
    horizon = None if spec.mode == "sprinkle" else hf * float(np.max(steps))
    meta = {"model_params": params, "delta": float(delta), "seed": int(seed),
            "density": spec.density, "sampling": spec.to_dict()}
    spacing = sprinkle_spacing(base, pts, spec.density) if spec.mode == "sprinkle" else None
    g = build_causal_dag(model, pts, horizon=horizon,
                         prox_radius=None if spec.mode == "sprinkle" else 1.5 * float(np.max(steps)),
                         workers=workers, meta=meta, spacing=spacing)
    return g


def lp_distance(graph: CausalGraph, p: int, q: int) -> float:
    """Minimise f(q) - f(p) subject to f(v) - f(u) >= w_uv with a generic LP
    solver; an unbounded program means the value 0."""
    from scipy.optimize import linprog
    n = graph.n
    c = np.zeros(n)
    c[q] += 1.0
    c[p] -= 1.0
    m = graph.n_edges
    A = np.zeros((m, n))
    A[np.arange(m), graph.src] = 1.0
    A[np.arange(m), graph.dst] -= 1.0
    A_eq = np.zeros((1, n))
    A_eq[0, p] = 1.0
    res = linprog(c, A_ub=A if m else None, b_ub=-graph.weight if m else None, A_eq=A_eq,
                  b_eq=[0.0], bounds=[(None, None)] * n, method="highs")
    if res.status == 3:
        return 0.0
    if res.status != 0:
        raise RuntimeError(f"LP failed: {res.message}")
    return max(float(res.fun), 0.0)


# -- pipeline stages ------------------------------------------------------

class _Ctx:
    def __init__(self, cfg, out):
        self.cfg = cfg
        self.out = out
        self.seed = int(cfg["seed"])
        m = cfg.get("model", {"id": "minkowski2d"})
        self.model_id = m["id"]
        self.params = m.get("params", {})
        self.delta = float(m.get("delta", 0.0))
        self.model = widen_cones(make_model(self.model_id, **self.params), self.delta)
        self.sampling = cfg.get("sampling", {})
        self.workers = cfg.get("workers")
        self.graph = None
        self.surface = None
        self.field = None

    def write(self, name, obj) -> dict:
        path = self.out / name
        if hasattr(obj, "to_json"):
            obj = obj.to_json()
        with open(path, "w") as fh:
            json.dump(_plain(obj), fh, sort_keys=True)
        return {name: _sha256(path)}


def _sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _status(ok):
    return "pass" if ok else "fail"


def _coord_node(graph, pt):
    return graph.node_at(pt, 1e-6 * max(1.0, float(graph.meta.get("spacing", 1.0))))


def op_graph(ctx, op):
    ctx.graph = make_graph(ctx.model_id, dict(ctx.sampling, **op.get("sampling", {})),
                           ctx.params, ctx.delta, ctx.seed, ctx.workers)
    g = ctx.graph
    arts = ctx.write("graph.json", g)
    return [CheckRecord("graph", "pass", {"nodes": g.n, "edges": g.n_edges, "cyclic": g.cyclic},
                        artifacts=arts)]


def op_distance(ctx, op):
    g = ctx.graph
    out = []
    for k, pr in enumerate(op["pairs"]):
        p, q = _coord_node(g, pr["p"]), _coord_node(g, pr["q"])
        d = longest_path_distance(g, p, q)
        slack = float(pr.get("slack", 0.0))
        s = {"p": pr["p"], "q": pr["q"], "distance": d}
        if "equals" in pr:
            ok = d == float(pr["equals"])
            tol = {"equals": pr["equals"]}
        else:
            lo, hi = pr["range"]
            ok = lo - slack <= d <= hi + slack
            tol = {"range": [lo, hi], "slack": slack}
        out.append(CheckRecord(pr.get("name", f"distance_{k}"), _status(ok), s, tol))
    return out


def _seed_nodes(ctx, seed):
    g = ctx.graph
    if "row" in seed:
        ax = int(seed.get("axis", getattr(ctx.model, "time_axis", 0)))
        return np.flatnonzero(np.abs(g.points[:, ax] - float(seed["row"])) < 1e-9)
    if "point" in seed:
        return np.array([_coord_node(g, seed["point"])])
    return np.asarray(seed["ids"], dtype=np.int64)


def op_surface(ctx, op):
    g = ctx.graph
    U = _seed_nodes(ctx, op.get("seed", {"row": 0.0}))
    res = build_splitting_surface(g, chronological_future(g, U))
    ctx.surface = res.surface
    nested = all(set(a.ids) <= set(b.ids) for a, b in zip(res.iterates, res.iterates[1:]))
    achronal = is_achronal(g, res.surface)[0]
    ok = achronal and nested and len(res.residue) == 0
    arts = ctx.write("surface.json", res.surface)
    return [CheckRecord("surface", _status(ok),
                        {"size": len(res.surface), "iterations": res.n_iterations,
                         "residue": len(res.residue), "nested": nested, "achronal": achronal,
                         "converged": res.converged, "boundary_unreliable": len(res.unreliable)},
                        {"residue": 0}, arts)]


def op_surfaces(ctx, op):
    """Surface stage repeated over several models, each on its own graph."""
    out = []
    for item in op["models"]:
        sub = _Ctx(dict(ctx.cfg, model={"id": item["id"], "params": item.get("params", {})},
                        sampling=item.get("sampling", {})), ctx.out)
        sub.graph = make_graph(item["id"], item.get("sampling", {}), item.get("params", {}),
                               0.0, ctx.seed, ctx.workers)
        for rec in op_surface(sub, {"seed": item["seed"]}):
            rec.name = f"surface_{item['id']}"
            rec.artifacts = {}
            out.append(rec)
    return out


def op_timefn(ctx, op):
    g = ctx.graph
    f = time_function_from_surface(g, ctx.surface)
    ctx.field = f
    arts = ctx.write("field.json", f)
    viol = check_reverse_lipschitz(g, f)
    pos = g.weight > 0
    strict = bool(np.all(f.values[g.dst[pos]] > f.values[g.src[pos]]))
    out = [CheckRecord("reverse_lipschitz", _status(not viol), {"violations": len(viol)},
                       {"atol": 1e-9}, arts),
           CheckRecord("strict_increase", _status(strict), {"positive_edges": int(pos.sum())})]
    if "steepness" in op:
        tol = float(op["steepness"].get("tol", 0.1))
        st = check_steepness(ctx.model, g, f, tol=tol,
                             min_fraction=float(op["steepness"].get("min_fraction", 0.95)))
        out.append(CheckRecord("steepness", _status(st.passed), st.to_json(),
                               {"tol": tol, "min_fraction": op["steepness"].get("min_fraction", 0.95)},
                               plot={"columns": ["node_id", "g_grad_grad", "reliable"],
                                     "rows": [[e.node, e.g_grad_grad, int(e.reliable)]
                                              for e in st.estimates]}))
    return out


def duality_corpus(seed: int, n_graphs: int = 200, max_nodes: int = 300,
                   small_every: int = 4, window=((0.0, 1.0), (-0.5, 0.5))):
    """Seeded sprinkled Minkowski graphs; every ``small_every``-th one has at
    most 12 nodes so the LP oracle stays cheap."""
    rng = np.random.default_rng(seed)
    m = make_model("minkowski2d")
    area = (window[0][1] - window[0][0]) * (window[1][1] - window[1][0])
    k = 0
    while k < n_graphs:
        small = k % small_every == 0
        density = rng.uniform(3, 10) / area if small else rng.uniform(40, 250) / area
        spec = SamplingSpec("sprinkle", window=[list(w) for w in window], density=density,
                            seed=int(rng.integers(2 ** 31)))
        try:
            pts = sample_points(m, spec)[:12 if small else max_nodes]
        except SamplingError:
            continue
        if len(pts) < 2:
            continue
        k += 1
        yield build_causal_dag(m, pts, horizon=np.inf if small else None,
                               meta={"seed": spec.seed, "density": density})


def op_duality(ctx, op):
    n_graphs = int(op.get("n_graphs", 200))
    n_pairs = int(op.get("n_pairs", 20))
    tol = float(op.get("tol", 1e-9))
    lp_max = int(op.get("lp_max_nodes", 12))
    rng = np.random.default_rng(ctx.seed + 1)
    rows, worst, lp_bad, lp_n, eq_bad, n_fields = [], 0.0, 0, 0, 0, 0
    t0 = time.perf_counter()
    for g in duality_corpus(ctx.seed, n_graphs, int(op.get("max_nodes", 300))):
        P = rng.integers(0, g.n, size=(n_pairs, 2))
        for p, q in P:
            d = longest_path_distance(g, p, q)
            f, v = dual_potential(g, p, q)
            if check_reverse_lipschitz(g, f, form="edge"):
                worst = np.inf
            diff = abs(v - d)
            worst = max(worst, diff)
            rows.append([len(rows), d, v, diff])
            if g.n <= lp_max:
                lp_n += 1
                if abs(lp_distance(g, p, q) - d) > 1e-7:
                    lp_bad += 1
            # edge-steep and pair-steep must agree on the field and on perturbations of it
            for fld in (f.values, f.values + rng.normal(0, 0.05, g.n), 0.5 * f.values):
                e = not check_reverse_lipschitz(g, fld, form="edge", atol=0.0)
                pp = not check_reverse_lipschitz(g, fld, form="pair", atol=0.0)
                n_fields += 1
                eq_bad += e != pp
    seconds = time.perf_counter() - t0
    budget = float(op.get("time_budget", 60.0))
    return [
        CheckRecord("duality", _status(worst <= tol and seconds < budget),
                    {"pairs": len(rows), "max_abs_diff": worst, "within_budget": seconds < budget},
                    {"abs_diff": tol, "time_budget_s": budget},
                    plot={"columns": ["pair_id", "longest_path", "dual_value", "abs_diff"],
                          "rows": rows}, seconds=seconds),
        CheckRecord("duality_lp", _status(lp_bad == 0 and lp_n > 0),
                    {"pairs": lp_n, "disagreements": lp_bad}, {"abs_diff": 1e-7}),
        CheckRecord("steep_equivalence", _status(eq_bad == 0),
                    {"fields": n_fields, "counterexamples": eq_bad}, {"counterexamples": 0}),
    ]


def _probe(spec):
    if spec == "axis":
        return lambda e: ((0.0, e), (0.0, 1.0))
    return (tuple(spec[0]), tuple(spec[1]))


def op_divergence(ctx, op):
    mid = op.get("model", ctx.model_id)
    model = make_model(mid)
    window = op.get("window", DEFAULT_WINDOWS[mid])
    ladder = build_ladder(model, op["ladder"], window, workers=ctx.workers)
    tab = divergence_probe(ladder, _probe(op.get("probe", "axis")))
    tab.to_csv(ctx.out / f"{op.get('name', 'divergence')}.csv")
    s = tab.slope
    if "slope_range" in op:
        lo, hi = op["slope_range"]
        ok = lo <= s <= hi
        tol = {"slope_range": [lo, hi]}
    else:
        ok = abs(s) <= float(op["slope_abs_max"])
        tol = {"slope_abs_max": op["slope_abs_max"]}
    ok = ok and len(tab.rows) == len(op["ladder"])
    return [CheckRecord(op.get("name", "divergence"), _status(ok),
                        {"slope": s, "intercept": tab.intercept, "levels": len(tab.rows)}, tol,
                        {f"{op.get('name', 'divergence')}.csv":
                         _sha256(ctx.out / f"{op.get('name', 'divergence')}.csv")},
                        plot={"columns": ["epsilon", "distance", "log_inv_eps"], "rows": tab.rows})]


def op_hatting(ctx, op):
    model = make_model("singular_wedge")
    ladder = build_ladder(model, op.get("ladder", [0.1, 0.05, 0.025, 0.0125]),
                          op.get("window", DEFAULT_WINDOWS["singular_wedge"]), workers=ctx.workers)
    chains = detect_divergent_chains(ladder, op.get("threshold", 3.0))
    g = ladder.finest
    arts = ctx.write("chains.json", [c.to_json() for c in chains])
    kinds = {c.kind for c in chains}
    if kinds != {"future", "past"}:
        return [CheckRecord("hatting", "fail", {"chains": len(chains), "kinds": sorted(kinds)})]
    H = build_hatting(g, chains)
    arts.update(ctx.write("hatting.json", H))
    ok_h = is_hatting(g, H, chains)
    split = surface_from_achronal(g, H)
    f = time_function_from_surface(g, split.surface)
    arts.update(ctx.write("field.json", f))
    ok_f = check_level_set_hatting(g, f, 0.0, chains)
    return [CheckRecord("hatting", _status(ok_h), {"chains": len(chains), "size": len(H)},
                        artifacts=arts),
            CheckRecord("level_set_hatting", _status(ok_f),
                        {"level": 0.0, "surface_size": len(split.surface),
                         "residue": len(split.residue)})]


def _random_domain_points(model_id, n, rng):
    m = make_model(model_id)
    w = np.asarray(DEFAULT_WINDOWS[model_id], float)
    out = []
    while len(out) < n:
        P = rng.uniform(w[:, 0], w[:, 1], size=(4 * n, 2))
        out.extend(P[m.contains_batch(P)])
    return m, np.asarray(out[:n])


def op_frame(ctx, op):
    rng = np.random.default_rng(ctx.seed)
    eps = op.get("epsilons", [0.9, 0.5, 0.1, 0.01])
    tol = float(op.get("tol", 1e-12))
    worst = 0.0
    for mid in op.get("models", sorted(DEFAULT_WINDOWS)):
        m, pts = _random_domain_points(mid, int(op.get("n_points", 100)), rng)
        for p in pts:
            g = m.metric_batch(p[None])[0]
            for e in eps:
                E = build_steep_frame(m, p, FrameSpec(e))
                G = E @ g @ E.T
                want = np.full((2, 2), -1.0)
                want[1, 1] = (1 - e) ** 2 - 1
                worst = max(worst, float(np.max(np.abs(G - want))))
    return [CheckRecord("frame", _status(worst <= tol), {"max_abs_error": worst}, {"abs": tol})]


def stable_causality_probe(deltas=(0.0, 0.05, 0.1, 0.5), step_ratio: float = 1.02, n: int = 32,
                           workers=None) -> list:
    """Cycle search on the widened slit cylinder for each delta.

    Returns rows ``{"delta", "cycle_found", "witness"}`` with the witness a
    list of node coordinates along one closed causal chain.
    """
    pts, spec = cylinder_points(step_ratio, n)
    base = make_model("slit_cylinder")
    rows = []
    for d in deltas:
        g = build_causal_dag(widen_cones(base, d), pts, workers=workers,
                             meta={"delta": float(d), "sampling": spec.to_dict()})
        wit = [] if g.cycle is None else [g.points[i].tolist() for i in g.cycle]
        rows.append({"delta": float(d), "cycle_found": bool(g.cyclic), "witness": wit,
                     "witness_ids": [] if g.cycle is None else [int(i) for i in g.cycle]})
    return rows


def op_stable_causality(ctx, op):
    deltas = op.get("deltas", [0.0, 0.05, 0.1, 0.5])
    rows = stable_causality_probe(deltas, op.get("step_ratio", 1.02), op.get("n", 32), ctx.workers)
    arts = ctx.write("stable_causality.json", rows)
    ok = all(r["cycle_found"] == (r["delta"] > 0) for r in rows)
    ok = ok and all(len(r["witness"]) >= 2 for r in rows if r["delta"] > 0)
    return [CheckRecord("stable_causality", _status(ok),
                        {"rows": [{"delta": r["delta"], "cycle_found": r["cycle_found"],
                                   "witness_length": len(r["witness"])} for r in rows]},
                        {"expect": "acyclic at 0, cyclic otherwise"}, arts)]


def op_counterexample(ctx, op):
    model = make_model("singular_wedge")
    tol = float(op.get("tol", 1e-9))
    radii = op.get("radii", [0.5, 0.1, 0.01, 0.001])
    err = 0.0
    for r in radii:
        for ang in (np.pi / 2, 3 * np.pi / 4, np.pi, -np.pi / 2):
            p = np.array([r * np.cos(ang), r * np.sin(ang)])
            est = analytic_gradient(model, p, [0.0, 1.0])
            err = max(err, abs(np.sqrt(-est.g_grad_grad) - r))
    g = make_graph("singular_wedge", {"step": op.get("step", 0.025)}, seed=ctx.seed)
    h = analytic_field(g, lambda P: P[:, 1], "analytic")
    near = np.flatnonzero(np.linalg.norm(g.points, axis=1) < float(op.get("near", 0.25)))
    st = check_steepness(model, g, h, tol=float(op.get("steep_tol", 0.1)), nodes=near)
    pos = g.weight > 0
    strict = bool(np.all(h.values[g.dst[pos]] > h.values[g.src[pos]]))
    ok = err <= tol and not st.passed and strict
    return [CheckRecord("counterexample", _status(ok),
                        {"max_radius_error": err, "steepness_fraction_near_origin": st.fraction,
                         "steepness_worst": st.worst, "strictly_increasing": strict},
                        {"radius_abs": tol})]


OPS = {
    "graph": (op_graph, ()),
    "distance": (op_distance, ("graph",)),
    "surface": (op_surface, ("graph",)),
    "surfaces": (op_surfaces, ()),
    "timefn": (op_timefn, ("graph", "surface")),
    "duality": (op_duality, ()),
    "divergence": (op_divergence, ()),
    "hatting": (op_hatting, ()),
    "frame": (op_frame, ()),
    "stable_causality": (op_stable_causality, ()),
    "counterexample": (op_counterexample, ()),
}


def run_experiment(config: dict, output_dir=None) -> dict:
    """Run every pipeline stage of ``config`` and write ``report.json``.

    Stage exceptions become failed records; stages whose inputs are missing
    are recorded as skipped.
    """
    cfg = validate_config(copy.deepcopy(config))
    out = Path(output_dir or cfg.get("output_dir") or f"runs/{cfg['name']}")
    out.mkdir(parents=True, exist_ok=True)
    ctx = _Ctx(cfg, out)
    checks, timing = [], {}
    for k, op in enumerate(cfg["pipeline"]):
        name = op["op"]
        if name not in OPS:
            raise jsonschema.ValidationError(f"unknown op {name!r}")
        fn, needs = OPS[name]
        missing = [n for n in needs if getattr(ctx, n) is None]
        if missing:
            checks.append(CheckRecord(name, "skipped", {"missing": missing}))
            continue
        t0 = time.perf_counter()
        try:
            recs = fn(ctx, op)
        except Exception as exc:  # recorded, later stages decide for themselves
            log.exception("stage %s failed", name)
            recs = [CheckRecord(name, "fail", {"error": f"{type(exc).__name__}: {exc}"})]
        timing[f"{k}:{name}"] = time.perf_counter() - t0
        checks.extend(recs)
    report = {
        "name": cfg["name"],
        "config": cfg,
        "environment": {"version": __version__, "seed": cfg["seed"], "numpy": np.__version__},
        "checks": [c.to_json() for c in checks],
    }
    report["digest"] = report_digest(report)
    report["stamp"] = {"timestamp": datetime.now(timezone.utc).isoformat(), "seconds": timing}
    with open(out / "report.json", "w") as fh:
        json.dump(_plain(report), fh, sort_keys=True, indent=1)
    return report


def report_digest(report: dict) -> str:
    body = {k: v for k, v in report.items() if k not in ("stamp", "digest")}
    return hashlib.sha256(json.dumps(_plain(body), sort_keys=True).encode()).hexdigest()


def exit_code(report: dict) -> int:
    st = [c["status"] for c in report["checks"]]
    if any(s in ("fail", "skipped") for s in st):
        return 2
    if any(s == "inconclusive" for s in st):
        return 3
    return 0


def emit_plot_data(report, which: str, path) -> Path:
    """Write the plot rows of check ``which`` to a CSV file."""
    if not isinstance(report, dict):
        with open(report) as fh:
            report = json.load(fh)
    for c in report["checks"]:
        if c["name"] == which and "plot" in c:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(c["plot"]["columns"])
                w.writerows(c["plot"]["rows"])
            return Path(path)
    raise ValueError(f"report has no plot data for check {which!r}")


def default_workers():
    v = os.environ.get("CAUSAL_LAB_WORKERS")
    return int(v) if v else None
