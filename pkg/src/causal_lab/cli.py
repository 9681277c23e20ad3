"""Command line entry point ``causal-lab``.

Exit codes: 0 when every check passes, 2 when any check fails, 3 when
nothing fails but some check is inconclusive.  ``CAUSAL_LAB_WORKERS``
sets the worker count for edge classification.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .achronal import (NodeSet, build_hatting, build_splitting_surface, chronological_future,
                       detect_divergent_chains, is_hatting, surface_from_achronal)
from .causal_graph import CausalGraph
from .distance import (RefinementLadder, build_ladder, divergence_probe, longest_path_distance,
                       set_distance_field)
from .experiments import (DEFAULT_WINDOWS, _plain, bundled_configs, emit_plot_data, exit_code,
                          load_bundled, load_config, make_graph, model_from_meta, run_experiment,
                          stable_causality_probe)
from .metric_models import make_model
from .time_functions import (ScalarField, check_bound_inequality, check_reverse_lipschitz,
                             check_steepness, dual_potential, random_causal_paths,
                             time_function_from_surface)

log = logging.getLogger("causal_lab")


def _floats(s):
    return [float(x) for x in s.split(",") if x.strip()]


def _window(s):
    v = _floats(s)
    if len(v) != 4:
        raise argparse.ArgumentTypeError("window needs four numbers: a0,b0,a1,b1")
    return [[v[0], v[1]], [v[2], v[3]]]


def _params(items):
    out = {}
    for it in items or []:
        k, _, v = it.partition("=")
        out[k] = json.loads(v)
    return out


def _dump(obj, out):
    text = json.dumps(_plain(obj), sort_keys=True, indent=1)
    if out:
        Path(out).write_text(text)
    else:
        print(text)


def _report_checks(checks, out):
    report = {"checks": checks}
    _dump(report, out)
    return exit_code(report)


def cmd_sample(a):
    sampling = {"mode": a.mode, "window": a.window or DEFAULT_WINDOWS[a.model]}
    if a.mode == "grid":
        st = _floats(a.step)
        sampling["step"] = st[0] if len(st) == 1 else st
    else:
        sampling["density"] = a.density
    if a.horizon_factor:
        sampling["horizon_factor"] = a.horizon_factor
    g = make_graph(a.model, sampling, _params(a.param), a.delta, a.seed)
    g.save(a.out)
    print(json.dumps({"nodes": g.n, "edges": g.n_edges, "cyclic": g.cyclic}))
    return 0


def cmd_distance(a):
    g = CausalGraph.load(a.graph)
    if a.set_file:
        S = NodeSet.load(a.set_file)
        fld = set_distance_field(g, S, "to-sink" if a.to_set else "from-source")
        _dump({str(i): v for i, v in enumerate(fld.values)}, a.out)
        return 0
    if a.source is None or a.target is None:
        raise SystemExit("distance needs --from and --to, or --set-file")
    d = longest_path_distance(g, a.source, a.target)
    _dump({"from": a.source, "to": a.target, "distance": d}, a.out)
    return 0


def cmd_surface(a):
    g = CausalGraph.load(a.graph)
    seed = NodeSet.load(a.seed_set)
    if seed.tag == "future-set":
        res = build_splitting_surface(g, seed)
    else:
        res = surface_from_achronal(g, seed)
    res.surface.save(a.out)
    print(json.dumps({"size": len(res.surface), "iterations": res.n_iterations,
                      "residue": len(res.residue), "converged": res.converged}))
    return 0 if len(res.residue) == 0 else 2


def _step_of(g):
    st = g.meta.get("step", g.meta.get("sampling", {}).get("step"))
    return float(np.max(st)) if st is not None else float(g.meta["spacing"])


def _load_ladder(directory):
    graphs = [CausalGraph.load(p) for p in sorted(Path(directory).glob("*.json"))]
    key = [_step_of(g) for g in graphs]
    order = np.argsort(key)[::-1]
    return RefinementLadder([(key[i], graphs[i]) for i in order])


def cmd_hatting(a):
    if a.ladder_dir:
        ladder = _load_ladder(a.ladder_dir)
    else:
        ladder = build_ladder(make_model(a.model), _floats(a.ladder), a.window or DEFAULT_WINDOWS[a.model])
    chains = detect_divergent_chains(ladder, a.threshold)
    g = ladder.finest
    if not chains:
        print("no divergent chains detected", file=sys.stderr)
        return 3
    H = build_hatting(g, chains)
    H.save(a.out)
    if a.chains_out:
        Path(a.chains_out).write_text(json.dumps([c.to_json() for c in chains]))
    ok = is_hatting(g, H, chains)
    print(json.dumps({"chains": len(chains), "size": len(H), "is_hatting": ok}))
    return 0 if ok else 2


def cmd_timefn(a):
    g = CausalGraph.load(a.graph)
    f = time_function_from_surface(g, NodeSet.load(a.surface))
    f.save(a.out)
    return 0


def cmd_verify(a):
    g = CausalGraph.load(a.graph)
    model = model_from_meta(g.meta)
    f = ScalarField.load(a.field)
    checks = []
    names = [c.strip() for c in a.checks.split(",") if c.strip()]
    for name in names:
        if name == "flip":
            v = check_reverse_lipschitz(g, f)
            checks.append({"name": "flip", "status": "pass" if not v else "fail",
                           "summary": {"violations": len(v)}, "tolerances": {"atol": 1e-9}})
        elif name == "steep":
            st = check_steepness(model, g, f, tol=a.tol)
            if a.steepness_csv:
                st.to_csv(a.steepness_csv)
            checks.append({"name": "steep", "status": "pass" if st.passed else "fail",
                           "summary": st.to_json(), "tolerances": {"tol": st.tol}})
        elif name == "bound":
            rng = np.random.default_rng(a.seed)
            res = [check_bound_inequality(model, g, f, p) for p in random_causal_paths(g, a.paths, rng)]
            st = [r.status for r in res]
            status = "fail" if "fail" in st else ("pass" if "pass" in st else "inconclusive")
            checks.append({"name": "bound", "status": status,
                           "summary": {s: st.count(s) for s in ("pass", "fail", "inconclusive")},
                           "tolerances": {"tol_grad": 0.05}})
        else:
            raise SystemExit(f"unknown check {name!r}")
    return _report_checks(checks, a.out)


def cmd_verify_duality(a):
    g = CausalGraph.load(a.graph)
    pairs = json.loads(Path(a.pairs).read_text())
    rows, worst = [], 0.0
    for k, (p, q) in enumerate(pairs):
        d = longest_path_distance(g, p, q)
        f, v = dual_potential(g, p, q)
        rows.append([k, d, v, abs(v - d)])
        worst = max(worst, abs(v - d))
    if a.csv:
        import csv
        with open(a.csv, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["pair_id", "longest_path", "dual_value", "abs_diff"])
            w.writerows(rows)
    return _report_checks([{"name": "duality", "status": "pass" if worst <= a.tol else "fail",
                            "summary": {"pairs": len(rows), "max_abs_diff": worst},
                            "tolerances": {"abs_diff": a.tol}}], a.out)


def cmd_probe_divergence(a):
    model = make_model(a.model)
    ladder = build_ladder(model, _floats(a.ladder), a.window or DEFAULT_WINDOWS[a.model])
    probe = ((0.0, 0.0), (1.0, 0.0)) if a.fixed else (lambda e: ((0.0, e), (0.0, 1.0)))
    if a.probe:
        v = _floats(a.probe)
        probe = ((v[0], v[1]), (v[2], v[3]))
    tab = divergence_probe(ladder, probe)
    tab.to_csv(a.out)
    print(json.dumps({"slope": tab.slope, "levels": len(tab.rows)}))
    return 0


def cmd_stable(a):
    rows = stable_causality_probe(_floats(a.deltas), a.step_ratio, a.n)
    _dump(rows, a.out)
    ok = all(r["cycle_found"] == (r["delta"] > 0) for r in rows)
    return 0 if ok else 2


def cmd_report(a):
    if a.list:
        print("\n".join(bundled_configs()))
        return 0
    cfg = load_bundled(a.config) if a.bundled else load_config(a.config)
    rep = run_experiment(cfg, a.out_dir)
    for c in rep["checks"]:
        print(f"{c['status'].upper():13s} {c['name']}")
    return exit_code(rep)


def cmd_emit_plot(a):
    emit_plot_data(a.report, a.check, a.out)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="causal-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("sample", help="sample a model and build its causal graph")
    s.add_argument("--model", required=True, choices=sorted(DEFAULT_WINDOWS))
    s.add_argument("--param", action="append", help="model parameter key=json")
    s.add_argument("--mode", default="grid", choices=["grid", "sprinkle"])
    s.add_argument("--window", type=_window)
    s.add_argument("--step", default="0.05")
    s.add_argument("--density", type=float, default=200.0)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--delta", type=float, default=0.0)
    s.add_argument("--horizon-factor", type=float)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_sample)

    s = sub.add_parser("distance", help="graph distance between nodes or to a node set")
    s.add_argument("--graph", required=True)
    s.add_argument("--from", dest="source", type=int)
    s.add_argument("--to", dest="target", type=int)
    s.add_argument("--set-file")
    s.add_argument("--to-set", action="store_true", help="d(x, S) instead of d(S, x)")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_distance)

    s = sub.add_parser("surface", help="splitting surface from a seed set")
    s.add_argument("--graph", required=True)
    s.add_argument("--seed-set", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_surface)

    s = sub.add_parser("hatting", help="divergent chains and a hatting over a ladder")
    s.add_argument("--ladder-dir")
    s.add_argument("--model", default="singular_wedge", choices=sorted(DEFAULT_WINDOWS))
    s.add_argument("--ladder", default="0.1,0.05,0.025,0.0125")
    s.add_argument("--window", type=_window)
    s.add_argument("--threshold", type=float, default=3.0)
    s.add_argument("--chains-out")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_hatting)

    s = sub.add_parser("timefn", help="time function from a splitting surface")
    s.add_argument("--graph", required=True)
    s.add_argument("--surface", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_timefn)

    s = sub.add_parser("verify", help="check a field: flip, steep, bound")
    s.add_argument("--graph", required=True)
    s.add_argument("--field", required=True)
    s.add_argument("--checks", default="flip,steep")
    s.add_argument("--tol", type=float)
    s.add_argument("--paths", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--steepness-csv")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_verify)

    s = sub.add_parser("verify-duality", help="dual potential against longest paths")
    s.add_argument("--graph", required=True)
    s.add_argument("--pairs", required=True)
    s.add_argument("--tol", type=float, default=1e-9)
    s.add_argument("--csv")
    s.add_argument("--out")
    s.set_defaults(fn=cmd_verify_duality)

    s = sub.add_parser("probe-divergence", help="distance growth over a refinement ladder")
    s.add_argument("--model", default="singular_wedge", choices=sorted(DEFAULT_WINDOWS))
    s.add_argument("--ladder", default="0.1,0.05,0.025,0.0125")
    s.add_argument("--window", type=_window)
    s.add_argument("--probe", help="fixed probe coordinates p0,p1,q0,q1")
    s.add_argument("--fixed", action="store_true", help="use the fixed pair (0,0), (1,0)")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_probe_divergence)

    s = sub.add_parser("stable-causality-probe", help="cycle search on the widened cylinder")
    s.add_argument("--deltas", default="0,0.05,0.1,0.5")
    s.add_argument("--step-ratio", type=float, default=1.02)
    s.add_argument("--n", type=int, default=32)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_stable)

    s = sub.add_parser("report", help="run an experiment config")
    s.add_argument("config", nargs="?")
    s.add_argument("--bundled", action="store_true", help="treat CONFIG as a bundled config name")
    s.add_argument("--list", action="store_true", help="list bundled configs")
    s.add_argument("--out-dir")
    s.set_defaults(fn=cmd_report)

    s = sub.add_parser("emit-plot", help="write a check's plot data as CSV")
    s.add_argument("--report", required=True)
    s.add_argument("--check", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_emit_plot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return int(args.fn(args) or 0)


if __name__ == "__main__":
    sys.exit(main())
