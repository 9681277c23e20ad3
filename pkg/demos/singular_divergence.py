"""Distances toward the removed point of the singular model grow like ln(1/eps)."""

import math

from causal_lab.distance import build_ladder, divergence_probe
from causal_lab.experiments import DEFAULT_WINDOWS
from causal_lab.metric_models import make_model


def main():
    steps = [0.1, 0.05, 0.025, 0.0125]
    ladder = build_ladder(make_model("singular_wedge"), steps, DEFAULT_WINDOWS["singular_wedge"])
    tab = divergence_probe(ladder, lambda eps: ((0.0, eps), (0.0, 1.0)))
    print(f"{'eps':>8} {'d':>10} {'ln(1/eps)':>10}")
    for eps, d, x in tab.rows:
        print(f"{eps:8.4f} {d:10.5f} {x:10.5f}")
    print(f"fitted slope {tab.slope:.4f} (analytic 1), intercept {tab.intercept:.2e}")
    assert math.isfinite(tab.slope)


if __name__ == "__main__":
    main()
