import numpy as np
import pytest

from causal_lab.achronal import build_splitting_surface, chronological_future
from causal_lab.distance import build_ladder, longest_path_distance
from causal_lab.experiments import DEFAULT_WINDOWS, make_graph
from causal_lab.metric_models import make_model
from causal_lab.time_functions import (
    PreconditionError, ScalarField, SplitError, analytic_field, analytic_gradient,
    check_bound_inequality, check_level_set_hatting, check_reverse_lipschitz, check_steepness,
    continuity_report, dual_potential, estimate_gradient, level_set, random_causal_paths,
    time_function_from_surface,
)

from oracles import brute_distance, dag, lp_value, random_dag


def chain3():
    return dag(3, [(0, 1, 1.0), (1, 2, 1.0)])


def test_chain_time_function():
    f = time_function_from_surface(chain3(), [1])
    assert f.values.tolist() == [-1.0, 0.0, 1.0]
    assert f.provenance == "from-surface"


def test_split_error():
    with pytest.raises(SplitError):
        time_function_from_surface(dag(2, []), [0])


def test_field_json(tmp_path):
    f = ScalarField(np.array([0.5, -1.25, 3.0]), "analytic")
    f.save(tmp_path / "f.json")
    g = ScalarField.load(tmp_path / "f.json")
    assert np.array_equal(g.values, f.values)
    assert set(f.to_json()) == {"0", "1", "2"}


def test_surface_field_on_minkowski(mink_grid, mink_row_split):
    res, f = mink_row_split
    P = mink_grid.points
    assert np.all(f.values[list(res.surface.ids)] == 0)
    inner = np.abs(P[:, 1]) <= 0.3
    assert np.allclose(f.values[inner], P[inner, 0], rtol=0.05, atol=1e-12)


def test_reverse_lipschitz(mink_grid, mink_row_split):
    _, f = mink_row_split
    assert check_reverse_lipschitz(mink_grid, f) == []
    zero = ScalarField(np.zeros(3), "analytic")
    bad = check_reverse_lipschitz(chain3(), zero)
    assert {b[0] for b in bad} == {"edge", "pair"}


def test_edge_form_implies_pair_form():
    rng = np.random.default_rng(17)
    for _ in range(500):
        n = int(rng.integers(2, 10))
        g = random_dag(rng, n, p=0.4)
        f = rng.normal(size=n) * 3
        edge = not check_reverse_lipschitz(g, f, form="edge")
        pair = all(f[y] - f[x] >= brute_distance(g, x, y) - 1e-9
                   for x in range(n) for y in range(n) if brute_distance(g, x, y) > 0)
        # the pair form only sees pairs at positive distance, so null edges
        # are compared directly
        null_ok = all(f[v] - f[u] >= -1e-9 for u, v, w in zip(g.src, g.dst, g.weight) if w == 0)
        assert edge == (pair and null_ok)


def test_strictly_increasing_on_timelike_edges(mink_grid, mink_row_split):
    _, f = mink_row_split
    pos = mink_grid.weight > 0
    assert np.all(f.values[mink_grid.dst[pos]] > f.values[mink_grid.src[pos]])


def test_analytic_gradients():
    m = make_model("minkowski2d")
    e = analytic_gradient(m, (0.3, 0.1), (1.0, 0.0))
    assert np.allclose(e.grad, (-1, 0)) and e.g_grad_grad == -1
    sw = make_model("singular_wedge")
    x, y = 0.1, 0.3
    e = analytic_gradient(sw, (x, y), (0.0, 1.0))
    r2 = x * x + y * y
    assert np.allclose(e.grad, (0, -r2)) and e.g_grad_grad == pytest.approx(-r2)
    # the gradient of a time function is past-directed
    assert e.g_grad_T > 0


def test_estimated_gradient_matches_analytic(mink_grid, singular_grid):
    m = make_model("minkowski2d")
    f = analytic_field(mink_grid, lambda P: P[:, 0])
    e = estimate_gradient(m, mink_grid, f, mink_grid.node_at((0.5, 0.0)))
    assert e.reliable and e.g_grad_grad == pytest.approx(-1, abs=1e-9)
    sw = make_model("singular_wedge")
    h = analytic_field(singular_grid, lambda P: P[:, 1])
    i = singular_grid.node_at((0.0, 0.5))
    e = estimate_gradient(sw, singular_grid, h, i)
    assert e.reliable and e.g_grad_grad == pytest.approx(-0.25, rel=1e-9)


def test_surface_gradient_interior(mink_grid, mink_row_split):
    _, f = mink_row_split
    e = estimate_gradient(make_model("minkowski2d"), mink_grid, f, mink_grid.node_at((0.5, 0.1)))
    assert e.reliable and e.g_grad_grad <= -1 + 0.1


def test_unreliable_on_small_neighbourhood():
    g = dag(3, [(0, 1, 1.0), (1, 2, 1.0)], points=[(0, 0), (1, 0), (2, 0)])
    e = estimate_gradient(make_model("minkowski2d"), g, np.arange(3.0), 1)
    assert not e.reliable


def test_steepness(mink_grid, mink_row_split):
    m = make_model("minkowski2d")
    _, f = mink_row_split
    s = check_steepness(m, mink_grid, f, tol=0.1)
    assert s.passed and s.fraction >= 0.95 and s.n_past_directed == s.n_reliable
    s2 = check_steepness(m, mink_grid, analytic_field(mink_grid, lambda P: 2 * P[:, 0]))
    assert s2.passed and s2.worst == pytest.approx(-4)


def test_steepness_fails_near_singularity(singular_grid):
    sw = make_model("singular_wedge")
    h = analytic_field(singular_grid, lambda P: P[:, 1])
    near = np.flatnonzero(np.linalg.norm(singular_grid.points, axis=1) < 0.3)
    s = check_steepness(sw, singular_grid, h, tol=0.1, nodes=near)
    assert not s.passed and s.fraction == 0.0
    # h is still strictly increasing along timelike edges
    pos = singular_grid.weight > 0
    assert np.all(h.values[singular_grid.dst[pos]] > h.values[singular_grid.src[pos]])


def test_steepness_csv(tmp_path, mink_grid):
    m = make_model("minkowski2d")
    s = check_steepness(m, mink_grid, analytic_field(mink_grid, lambda P: P[:, 0]), nodes=range(20))
    s.to_csv(tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "node_id,g_grad_grad,reliable"


def test_bound_equality_on_vertical_path(mink_grid):
    m = make_model("minkowski2d")
    f = analytic_field(mink_grid, lambda P: P[:, 0])
    path = [mink_grid.node_at((t, 0.0)) for t in (0.2, 0.4, 0.6)]
    r = check_bound_inequality(m, mink_grid, f, path)
    assert r.status == "pass" and r.slack == pytest.approx(0, abs=1e-9)
    assert r.length == pytest.approx(0.4)


def test_bound_on_random_paths(mink_grid, mink_row_split):
    m = make_model("minkowski2d")
    _, f = mink_row_split
    paths = random_causal_paths(mink_grid, 100, np.random.default_rng(4))
    assert len(paths) == 100
    res = [check_bound_inequality(m, mink_grid, f, p) for p in paths]
    assert not any(r.status == "fail" for r in res)
    assert all(r.slack >= -0.05 for r in res if r.status == "pass")


def test_bound_singular_axis(singular_grid):
    sw = make_model("singular_wedge")
    h = analytic_field(singular_grid, lambda P: P[:, 1])
    factors = []
    for y0 in (0.8, 0.4, 0.2, 0.1):
        path = [singular_grid.node_at((0.0, y)) for y in np.arange(y0 / 2, y0 + 1e-9, 0.025)]
        r = check_bound_inequality(sw, singular_grid, h, path)
        assert r.status == "pass"
        factors.append(r.steepness)
    assert np.all(np.diff(factors) < 0) and factors[-1] < 0.1


def test_bound_inconclusive():
    g = dag(2, [(0, 1, 1.0)], points=[(0, 0), (1, 0)])
    r = check_bound_inequality(make_model("minkowski2d"), g, np.array([0.0, 1.0]), [0, 1])
    assert r.status == "inconclusive" and not r


def test_dual_potential_small_dags():
    rng = np.random.default_rng(23)
    for _ in range(200):
        n = int(rng.integers(2, 13))
        g = random_dag(rng, n, p=float(rng.uniform(0.1, 0.6)))
        p, q = (int(v) for v in rng.integers(0, n, 2))
        f, value = dual_potential(g, p, q)
        assert value == pytest.approx(longest_path_distance(g, p, q), abs=1e-12)
        assert value == pytest.approx(brute_distance(g, p, q), abs=1e-12)
        assert value == pytest.approx(lp_value(g, p, q), abs=1e-9)
        assert check_reverse_lipschitz(g, f, form="edge", atol=1e-12) == []


def test_dual_potential_unrelated():
    f, value = dual_potential(dag(2, []), 0, 1)
    assert value == 0.0


def test_dual_potential_minkowski(mink_grid):
    g = mink_grid
    p, q = g.node_at((0, 0)), g.node_at((1, 0))
    f, value = dual_potential(g, p, q)
    assert abs(value - longest_path_distance(g, p, q)) <= 1e-9
    assert check_reverse_lipschitz(g, f) == []


def test_level_set(mink_grid, mink_row_split):
    res, f = mink_row_split
    H = level_set(mink_grid, f, 0.0)
    assert set(H.ids) == set(res.surface.ids)
    assert check_level_set_hatting(mink_grid, f, 0.0, [])
    band = level_set(chain3(), np.array([-1.0, 0.6, 2.0]), 0.5)
    assert band.ids == (1,)


def test_level_set_errors(mink_grid):
    with pytest.raises(PreconditionError):
        check_level_set_hatting(chain3(), np.zeros(3), 0.0, [])
    f = analytic_field(mink_grid, lambda P: P[:, 0])
    with pytest.raises(ValueError):
        check_level_set_hatting(mink_grid, f, 50.0, [])


def test_rescaling():
    g = dag(3, [(0, 1, 1.0), (1, 2, 3.0)])
    f = time_function_from_surface(g, [1])
    assert check_reverse_lipschitz(g, f.scaled(1.5)) == []
    bad = check_reverse_lipschitz(g, f.scaled(0.9), form="edge")
    assert bad


def _surface_field(g, ta=0, t0=0.0):
    row = np.flatnonzero(np.abs(g.points[:, ta] - t0) < 1e-9)
    return time_function_from_surface(g, build_splitting_surface(g, chronological_future(g, row)).surface)


def test_continuity_minkowski():
    m = make_model("minkowski2d")
    jumps = [continuity_report(g, _surface_field(g), m)["max_jump"]
             for g in (make_graph("minkowski2d", {"step": h}) for h in (0.1, 0.05, 0.025))]
    assert max(jumps) <= 1.5


def test_continuity_slit():
    m = make_model("slit_minkowski")
    out = []
    for h in (0.1, 0.05):
        g = make_graph("slit_minkowski", {"step": h})
        rep = continuity_report(g, _surface_field(g, ta=1, t0=-2.0), m)
        out.append(rep["max_jump"])
        for a, b, _ in rep["top"][:3]:
            x, t = g.points[a]
            # jumps sit on the edge of the slit's causal shadow
            assert t > 0 and abs(abs(x) + t - 1.0) <= 2 * h
    assert out[1] > 1.5 * out[0]


def test_continuity_constant(mink_grid):
    assert continuity_report(mink_grid, np.ones(mink_grid.n))["max_jump"] == 0.0


def test_oscillation_bounds_probe_distance():
    lad = build_ladder(make_model("minkowski2d"), [0.1, 0.05, 0.025], DEFAULT_WINDOWS["minkowski2d"])
    for _, g in lad:
        f = _surface_field(g)
        assert check_reverse_lipschitz(g, f, form="edge") == []
        d = longest_path_distance(g, g.node_at((0, 0)), g.node_at((1, 0)))
        assert d <= f.values.max() - f.values.min()
