"""Discrete Lorentzian causality on weighted causal graphs."""

__version__ = "0.1.0"

from .metric_models import (  # noqa: E402
    MetricModel, Minkowski2D, SlitMinkowski, SingularWedge, SlitCylinder, FrameSpec,
    make_model, widen_cones, build_steep_frame, causal_character, curve_length,
)
from .causal_graph import CausalGraph, SamplingSpec, sample_points, build_causal_dag  # noqa: E402
from .distance import (  # noqa: E402
    longest_path_distance, distance_to_set, distance_from_point_to_set, check_reverse_triangle,
    RefinementLadder, build_ladder, divergence_probe,
)
from .achronal import (  # noqa: E402
    NodeSet, chronological_future, chronological_past, is_achronal, boundary,
    build_splitting_surface, surface_from_achronal, detect_divergent_chains, build_hatting,
    is_hatting,
)
from .time_functions import (  # noqa: E402
    ScalarField, time_function_from_surface, check_reverse_lipschitz, estimate_gradient,
    check_steepness, check_bound_inequality, dual_potential, check_level_set_hatting,
    continuity_report,
)
