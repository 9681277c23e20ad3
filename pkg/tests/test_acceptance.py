"""Acceptance suite.

Each test runs one bundled config, re-checks the reported numbers against
the stated tolerance and prints a single ``PASS``/``FAIL`` line.  Run with
``pytest tests/test_acceptance.py -v`` or ``python3 tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from causal_lab.experiments import load_bundled, run_experiment

from oracles import flat_tau

_cache = {}


@pytest.fixture(scope="module")
def run(tmp_path_factory):
    def _run(name):
        if name not in _cache:
            t0 = time.perf_counter()
            rep = run_experiment(load_bundled(name), tmp_path_factory.mktemp(name))
            _cache[name] = (rep, time.perf_counter() - t0)
        return _cache[name]
    return _run


def checks(rep):
    return {c["name"]: c for c in rep["checks"]}


def report_line(capsys, k, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def test_c01_duality(run, capsys):
    rep, secs = run("minkowski_duality")
    c = checks(rep)
    d, lp = c["duality"]["summary"], c["duality_lp"]["summary"]
    ok = (d["pairs"] == 4000 and d["max_abs_diff"] <= 1e-9 and lp["disagreements"] == 0
          and lp["pairs"] > 0 and secs < 60)
    report_line(capsys, 1, ok, f"pairs={d['pairs']} max|diff|={d['max_abs_diff']:.2e} (tol 1e-9), "
                f"lp disagreements={lp['disagreements']}/{lp['pairs']}, {secs:.1f}s (budget 60s)")


def test_c02_steep_equivalence(run, capsys):
    rep, _ = run("minkowski_duality")
    s = checks(rep)["steep_equivalence"]["summary"]
    ok = s["fields"] > 0 and s["counterexamples"] == 0
    report_line(capsys, 2, ok, f"fields={s['fields']} counterexamples={s['counterexamples']} (tol 0)")


def test_c03_minkowski_convergence(run, capsys):
    rep, secs = run("minkowski_convergence")
    d = checks(rep)["d_origin_unit_time"]["summary"]["distance"]
    ok = 0.95 <= d <= 1.0 + 1e-12 and secs < 30
    report_line(capsys, 3, ok, f"d={d:.15f} in [0.95, 1.0], {secs:.1f}s (budget 30s)")


def test_c04_slit(run, capsys):
    rep, _ = run("slit_distances")
    c = checks(rep)
    d = c["d_around_slit"]["summary"]["distance"]
    z = c["d_shadowed"]["summary"]["distance"]
    # continuum two-segment oracle: bend at (0, x) with |x| >= 1
    best = max(2 * flat_tau(2.0, x) for x in np.linspace(1.0, 2.0, 1001))
    ok = 0.95 * best <= d <= best and z == 0.0 and best == pytest.approx(2 * math.sqrt(3))
    report_line(capsys, 4, ok, f"d_around={d:.6f} in [{0.95 * best:.4f}, {best:.4f}], d_shadowed={z} (exact 0)")


def test_c05_singular_divergence(run, capsys):
    rep, _ = run("singular_divergence")
    c = checks(rep)
    s = c["singular_growth"]["summary"]["slope"]
    m = c["minkowski_control"]["summary"]["slope"]
    ok = 0.8 <= s <= 1.2 and abs(m) <= 0.1
    report_line(capsys, 5, ok, f"slope={s:.6f} in [0.8, 1.2], control |s|={abs(m):.2e} <= 0.1")


def test_c06_frames(run, capsys):
    rep, _ = run("frames")
    e = checks(rep)["frame"]["summary"]["max_abs_error"]
    ok = e <= 1e-12
    report_line(capsys, 6, ok, f"max Gram error={e:.2e} (tol 1e-12)")


def test_c07_splitting_surfaces(run, capsys):
    rep, _ = run("splitting_surfaces")
    parts, ok = [], True
    for name, c in checks(rep).items():
        s = c["summary"]
        good = s["residue"] == 0 and s["nested"] and s["achronal"] and c["status"] == "pass"
        ok &= good
        parts.append(f"{name.removeprefix('surface_')}: size={s['size']} residue={s['residue']}")
    ok &= len(parts) == 4
    report_line(capsys, 7, ok, "; ".join(parts))


def test_c08_time_function(run, capsys):
    rep, _ = run("minkowski_timefn")
    c = checks(rep)
    v = c["reverse_lipschitz"]["summary"]["violations"]
    st = c["steepness"]["summary"]
    ok = (v == 0 and c["strict_increase"]["status"] == "pass"
          and st["fraction"] >= 0.95 and st["tol"] == 0.1)
    report_line(capsys, 8, ok, f"violations={v}, strict increase on "
                f"{c['strict_increase']['summary']['positive_edges']} edges, "
                f"steep fraction={st['fraction']:.3f} (>= 0.95 at tol 0.1)")


def test_c09_hatting(run, capsys):
    rep, _ = run("singular_hatting")
    c = checks(rep)
    h, lv = c["hatting"], c["level_set_hatting"]
    ok = h["status"] == "pass" and lv["status"] == "pass" and h["summary"]["chains"] > 0
    report_line(capsys, 9, ok, f"chains={h['summary']['chains']} hatting size={h['summary']['size']}, "
                f"level set f^-1(0) size={lv['summary']['surface_size']} passes")


def test_c10_stable_causality(run, capsys):
    rep, _ = run("cylinder_stable_causality")
    rows = checks(rep)["stable_causality"]["summary"]["rows"]
    by = {r["delta"]: r for r in rows}
    ok = (not by[0.0]["cycle_found"]
          and all(by[d]["cycle_found"] and by[d]["witness_length"] >= 2 for d in (0.05, 0.1, 0.5)))
    report_line(capsys, 10, ok, ", ".join(
        f"delta={d}: {'cycle' if r['cycle_found'] else 'acyclic'}" for d, r in by.items()))


def test_c11_counterexample(run, capsys):
    rep, _ = run("singular_counterexample")
    s = checks(rep)["counterexample"]["summary"]
    ok = (s["max_radius_error"] <= 1e-9 and s["steepness_fraction_near_origin"] < 0.95
          and s["strictly_increasing"])
    report_line(capsys, 11, ok, f"radius error={s['max_radius_error']:.1e} (tol 1e-9), "
                f"steep fraction near origin={s['steepness_fraction_near_origin']} (check fails), "
                f"strictly increasing={s['strictly_increasing']}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
