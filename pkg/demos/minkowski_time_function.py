"""Build a splitting surface on a Minkowski grid and the time function it induces."""

import numpy as np

from causal_lab.achronal import build_splitting_surface, chronological_future
from causal_lab.distance import longest_path_distance
from causal_lab.experiments import make_graph
from causal_lab.metric_models import make_model
from causal_lab.time_functions import (
    check_reverse_lipschitz, check_steepness, time_function_from_surface,
)


def main():
    model = make_model("minkowski2d")
    g = make_graph("minkowski2d", {"step": 0.05})
    print(f"graph: {g.n} nodes, {g.n_edges} edges")

    o, e = g.node_at((0, 0)), g.node_at((1, 0))
    print(f"d((0,0),(1,0)) = {longest_path_distance(g, o, e):.6f}  (continuum value 1)")

    row = np.flatnonzero(np.abs(g.points[:, 0]) < 1e-9)
    res = build_splitting_surface(g, chronological_future(g, row))
    print(f"surface: {len(res.surface)} nodes after {res.n_iterations} iteration(s), "
          f"residue {len(res.residue)}")

    f = time_function_from_surface(g, res.surface)
    bad = check_reverse_lipschitz(g, f)
    steep = check_steepness(model, g, f, tol=0.1)
    print(f"reverse-Lipschitz violations: {len(bad)}")
    print(f"steep fraction {steep.fraction:.3f}, worst g(grad f, grad f) = {steep.worst:.4f}")


if __name__ == "__main__":
    main()
