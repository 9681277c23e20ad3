"""Analytic 1+1 dimensional spacetime models.

Every model stores points as length-2 coordinate arrays.  Which coordinate
is time differs between models and is recorded in ``time_axis``:

==================  ===========  =========
model id            coordinates  time axis
==================  ===========  =========
``minkowski2d``     (t, x)       0
``slit_minkowski``  (x, t)       1
``singular_wedge``  (x, y)       1
``slit_cylinder``   (t, s)       0
==================  ===========  =========

Metrics have signature (-, +).  All methods are pure; models hold no
mutable state.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "DomainError",
    "CausalityError",
    "MetricModel",
    "Minkowski2D",
    "SlitMinkowski",
    "SingularWedge",
    "SlitCylinder",
    "WidenedModel",
    "FrameSpec",
    "make_model",
    "widen_cones",
    "metric_at",
    "causal_character",
    "curve_length",
    "build_steep_frame",
    "segment_visible",
    "MODEL_IDS",
]

# relative tolerance used to call a vector null
NULL_RTOL = 1e-12


class DomainError(ValueError):
    """Point or segment outside the model's domain."""


class CausalityError(ValueError):
    """A segment that should be causal is spacelike."""


class MetricModel:
    """Base class for the analytic spacetime models.

    Subclasses implement the vectorised ``metric_batch`` (shape ``(N, 2, 2)``)
    and may override domain, visibility and displacement handling.
    """

    id = "abstract"
    time_axis = 0
    # coordinate translations identifying lifts of the same point
    lattice_offsets = (np.zeros(2),)

    # -- pointwise ---------------------------------------------------------
    def metric_batch(self, pts):
        raise NotImplementedError

    def time_orientation_batch(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        T = np.zeros_like(pts)
        T[:, self.time_axis] = 1.0
        return T

    def contains_batch(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return np.all(np.isfinite(pts), axis=1)

    def contains(self, p) -> bool:
        return bool(self.contains_batch(p)[0])

    def canonical(self, pts):
        """Map points into the fundamental domain (identity unless quotiented)."""
        return np.atleast_2d(np.asarray(pts, dtype=float)).copy()

    def displacement(self, p, q):
        """Coordinate vector from p to q along the straight segment used by graphs."""
        return np.asarray(q, dtype=float) - np.asarray(p, dtype=float)

    def visible_batch(self, P, D):
        """True where the straight segments P -> P + D stay inside the domain."""
        return np.ones(len(np.atleast_2d(P)), dtype=bool)

    def volume_element_batch(self, pts):
        g = self.metric_batch(pts)
        return np.sqrt(np.abs(np.linalg.det(g)))

    # -- bilinear forms ----------------------------------------------------
    def inner_batch(self, pts, u, v):
        g = self.metric_batch(pts)
        return np.einsum("ni,nij,nj->n", np.atleast_2d(u), g, np.atleast_2d(v))

    def check_domain(self, p):
        if not self.contains(p):
            raise DomainError(f"point {tuple(np.asarray(p, float))} is outside {self.id}")

    def __repr__(self):
        return f"{type(self).__name__}()"


class Minkowski2D(MetricModel):
    """Flat space, coordinates (t, x), g = diag(-1, 1)."""

    id = "minkowski2d"
    time_axis = 0

    def metric_batch(self, pts):
        n = len(np.atleast_2d(pts))
        g = np.zeros((n, 2, 2))
        g[:, 0, 0] = -1.0
        g[:, 1, 1] = 1.0
        return g


class SlitMinkowski(MetricModel):
    """Minkowski space in (x, t) coordinates with the segment
    ``{t = 0, |x| <= half_width}`` removed."""

    id = "slit_minkowski"
    time_axis = 1

    def __init__(self, half_width: float = 1.0):
        self.half_width = float(half_width)

    def metric_batch(self, pts):
        n = len(np.atleast_2d(pts))
        g = np.zeros((n, 2, 2))
        g[:, 0, 0] = 1.0
        g[:, 1, 1] = -1.0
        return g

    def contains_batch(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        on_slit = (pts[:, 1] == 0.0) & (np.abs(pts[:, 0]) <= self.half_width)
        return np.all(np.isfinite(pts), axis=1) & ~on_slit

    def visible_batch(self, P, D):
        P = np.atleast_2d(P)
        D = np.atleast_2d(D)
        x0, t0 = P[:, 0], P[:, 1]
        dx, dt = D[:, 0], D[:, 1]
        t1 = t0 + dt
        crosses = (np.minimum(t0, t1) <= 0.0) & (np.maximum(t0, t1) >= 0.0)
        ok = np.ones(len(P), dtype=bool)
        moving = crosses & (dt != 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = np.where(moving, -t0 / np.where(dt == 0.0, 1.0, dt), 0.0)
        xc = x0 + tau * dx
        ok[moving & (np.abs(xc) <= self.half_width)] = False
        # segment lying inside the t = 0 line
        flat = crosses & (dt == 0.0)
        if np.any(flat):
            lo = np.minimum(x0, x0 + dx)
            hi = np.maximum(x0, x0 + dx)
            hit = (lo <= self.half_width) & (hi >= -self.half_width)
            ok[flat & hit] = False
        return ok

    def __repr__(self):
        return f"SlitMinkowski(half_width={self.half_width})"


class SingularWedge(MetricModel):
    """ds^2 = (dx^2 - dy^2) / (x^2 + y^2) on {2|y| > x, x > -1}; y is time.

    The domain test uses strict inequalities with no tolerance band.
    """

    id = "singular_wedge"
    time_axis = 1

    def metric_batch(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        r2 = pts[:, 0] ** 2 + pts[:, 1] ** 2
        g = np.zeros((len(pts), 2, 2))
        g[:, 0, 0] = 1.0 / r2
        g[:, 1, 1] = -1.0 / r2
        return g

    def contains_batch(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        x, y = pts[:, 0], pts[:, 1]
        return (2.0 * np.abs(y) > x) & (x > -1.0)

    def visible_batch(self, P, D):
        # complement of the domain near the segment is the closed convex wedge
        # {x - 2y >= 0} & {x + 2y >= 0}; x > -1 is convex and holds at both ends
        P = np.atleast_2d(P)
        D = np.atleast_2d(D)
        a0 = P[:, 0] - 2.0 * P[:, 1]
        da = D[:, 0] - 2.0 * D[:, 1]
        b0 = P[:, 0] + 2.0 * P[:, 1]
        db = D[:, 0] + 2.0 * D[:, 1]
        lo_a, hi_a = _halfline_interval(a0, da)
        lo_b, hi_b = _halfline_interval(b0, db)
        lo = np.maximum(np.maximum(lo_a, lo_b), 0.0)
        hi = np.minimum(np.minimum(hi_a, hi_b), 1.0)
        return lo > hi

    def time_function(self, pts):
        return np.atleast_2d(pts)[:, 1]


def _halfline_interval(c0, dc):
    """Parameter interval {tau : c0 + tau * dc >= 0} as (lo, hi)."""
    lo = np.full(c0.shape, -np.inf)
    hi = np.full(c0.shape, np.inf)
    pos = dc > 0
    neg = dc < 0
    zero = dc == 0
    lo[pos] = -c0[pos] / dc[pos]
    hi[neg] = -c0[neg] / dc[neg]
    empty = zero & (c0 < 0)
    lo[empty] = np.inf
    hi[empty] = -np.inf
    return lo, hi


class SlitCylinder(MetricModel):
    """The time-periodic cylinder with two removed half-lines.

    Coordinates (t, s) with t identified modulo 2*pi and stored in
    [-pi, pi); metric -dt^2 + ds^2.  Removed: ``{t = pi/4, s <= pi/4}`` and
    ``{t = -pi/4, s >= -pi/4}``.  Segments are straight in the universal
    cover; the displacement picks the lift with |dt| <= pi.
    """

    id = "slit_cylinder"
    time_axis = 0
    lattice_offsets = (
        np.zeros(2),
        np.array([2.0 * math.pi, 0.0]),
        np.array([-2.0 * math.pi, 0.0]),
    )
    slit_t = math.pi / 4

    def metric_batch(self, pts):
        n = len(np.atleast_2d(pts))
        g = np.zeros((n, 2, 2))
        g[:, 0, 0] = -1.0
        g[:, 1, 1] = 1.0
        return g

    def canonical(self, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float)).copy()
        pts[:, 0] = _wrap(pts[:, 0])
        return pts

    def contains_batch(self, pts):
        pts = self.canonical(pts)
        t, s = pts[:, 0], pts[:, 1]
        a = self.slit_t
        cut_up = np.isclose(t, a, rtol=0, atol=1e-12) & (s <= a)
        cut_dn = np.isclose(t, -a, rtol=0, atol=1e-12) & (s >= -a)
        return np.all(np.isfinite(pts), axis=1) & ~cut_up & ~cut_dn

    def displacement(self, p, q):
        d = np.asarray(q, dtype=float) - np.asarray(p, dtype=float)
        d[0] = _wrap(d[0])
        return d

    def visible_batch(self, P, D):
        P = self.canonical(P)
        D = np.atleast_2d(D)
        a = self.slit_t
        ok = np.ones(len(P), dtype=bool)
        for k in (-1, 0, 1):
            for tl, blocked in ((a + 2 * math.pi * k, lambda s: s <= a),
                                (-a + 2 * math.pi * k, lambda s: s >= -a)):
                with np.errstate(divide="ignore", invalid="ignore"):
                    tau = (tl - P[:, 0]) / D[:, 0]
                hit = (D[:, 0] != 0) & (tau >= 0) & (tau <= 1)
                s_cross = P[:, 1] + np.where(hit, tau, 0.0) * D[:, 1]
                ok[hit & blocked(s_cross)] = False
        return ok


def _wrap(t):
    return (np.asarray(t, dtype=float) + math.pi) % (2.0 * math.pi) - math.pi


class WidenedModel(MetricModel):
    """Base model with cones opened by ``delta``:
    g_bar = g - delta * (T_flat x T_flat) / |g(T, T)|."""

    def __init__(self, base: MetricModel, delta: float):
        if delta < 0:
            raise ValueError("delta must be >= 0")
        self.base = base
        self.delta = float(delta)
        self.id = base.id
        self.time_axis = base.time_axis
        self.lattice_offsets = base.lattice_offsets

    def metric_batch(self, pts):
        g = self.base.metric_batch(pts)
        if self.delta == 0.0:
            return g
        T = self.base.time_orientation_batch(pts)
        Tf = np.einsum("nij,nj->ni", g, T)
        gTT = np.abs(np.einsum("ni,ni->n", Tf, T))
        return g - self.delta * np.einsum("ni,nj->nij", Tf, Tf) / gTT[:, None, None]

    def time_orientation_batch(self, pts):
        return self.base.time_orientation_batch(pts)

    def contains_batch(self, pts):
        return self.base.contains_batch(pts)

    def canonical(self, pts):
        return self.base.canonical(pts)

    def displacement(self, p, q):
        return self.base.displacement(p, q)

    def visible_batch(self, P, D):
        return self.base.visible_batch(P, D)

    def __repr__(self):
        return f"WidenedModel({self.base!r}, delta={self.delta})"


MODEL_IDS = {
    "minkowski2d": Minkowski2D,
    "slit_minkowski": SlitMinkowski,
    "singular_wedge": SingularWedge,
    "slit_cylinder": SlitCylinder,
}


def make_model(model_id: str, **params) -> MetricModel:
    """Construct a model from its string id (as used in experiment configs)."""
    try:
        cls = MODEL_IDS[model_id]
    except KeyError:
        raise ValueError(f"unknown model id {model_id!r}; expected one of {sorted(MODEL_IDS)}")
    return cls(**params)


def widen_cones(model: MetricModel, delta: float) -> MetricModel:
    """Return ``model`` with strictly wider light cones for ``delta > 0``."""
    if delta == 0:
        return model
    return WidenedModel(model, delta)


# -- operations -------------------------------------------------------------

def metric_at(model: MetricModel, p) -> np.ndarray:
    """Metric tensor at ``p`` as a 2x2 array."""
    model.check_domain(p)
    return model.metric_batch(np.asarray(p, dtype=float))[0]


def _null_tol(g, v):
    return NULL_RTOL * np.abs(g).max() * float(np.dot(v, v))


def causal_character(model: MetricModel, p, v) -> str:
    """Classify ``v`` at ``p``.

    Returns one of ``"timelike-future"``, ``"timelike-past"``,
    ``"null-future"``, ``"null-past"``, ``"spacelike"``, ``"zero"``.
    """
    model.check_domain(p)
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        return "zero"
    g = model.metric_batch(np.asarray(p, dtype=float))[0]
    T = model.time_orientation_batch(p)[0]
    vv = v @ g @ v
    tol = _null_tol(g, v)
    if vv > tol:
        return "spacelike"
    kind = "null" if vv >= -tol else "timelike"
    return f"{kind}-future" if T @ g @ v < 0 else f"{kind}-past"


def segment_visible(model: MetricModel, p, q) -> bool:
    """True iff the straight segment p -> q stays in the domain."""
    p = np.asarray(p, dtype=float)
    d = model.displacement(p, q)
    return bool(model.visible_batch(p[None, :], d[None, :])[0])


def segment_lengths(model: MetricModel, P, D, subdivisions: int = 64, signed=False):
    """Midpoint-rule proper time of the straight segments P -> P + D.

    Returns ``(length, worst_interval, orientation)`` where ``worst_interval``
    is the largest g(v, v) sampled (positive means a spacelike sample) and
    ``orientation`` the sign of -g(T, v) at the first sample.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    D = np.atleast_2d(np.asarray(D, dtype=float))
    n = len(P)
    taus = (np.arange(subdivisions) + 0.5) / subdivisions
    pts = (P[:, None, :] + taus[None, :, None] * D[:, None, :]).reshape(-1, 2)
    g = model.metric_batch(pts).reshape(n, subdivisions, 2, 2)
    vv = np.einsum("ni,nkij,nj->nk", D, g, D)
    scale = np.abs(g).max(axis=(2, 3)) * np.einsum("ni,ni->n", D, D)[:, None]
    vv = np.where(np.abs(vv) <= NULL_RTOL * scale, 0.0, vv)
    length = np.sqrt(np.clip(-vv, 0.0, None)).mean(axis=1)
    T = model.time_orientation_batch(pts).reshape(n, subdivisions, 2)
    gTv = np.einsum("nki,nkij,nj->nk", T, g, D)
    return length, vv.max(axis=1), gTv


def curve_length(model: MetricModel, path, subdivisions: int = 64) -> float:
    """Proper time of a piecewise straight causal path.

    ``path`` is a sequence of vertices.  Each segment is integrated with the
    composite midpoint rule.  Segments may be future- or past-directed but
    must be causal and stay in the domain.
    """
    V = [np.asarray(v, dtype=float) for v in path]
    if len(V) < 2:
        return 0.0
    for v in V:
        model.check_domain(v)
    P = np.array(V[:-1])
    D = np.array([model.displacement(a, b) for a, b in zip(V[:-1], V[1:])])
    if not np.all(model.visible_batch(P, D)):
        bad = int(np.argmin(model.visible_batch(P, D)))
        raise DomainError(f"segment {bad} leaves the domain of {model.id}")
    length, worst, gTv = segment_lengths(model, P, D, subdivisions)
    if np.any(worst > 0):
        raise CausalityError(f"segment {int(np.argmax(worst > 0))} is not causal")
    for i in range(len(P)):
        signs = np.sign(gTv[i][gTv[i] != 0])
        if len(signs) and np.any(signs != signs[0]):
            raise CausalityError(f"segment {i} changes time orientation")
    return float(length.sum())


class FrameSpec:
    """Parameter of the steep frame; requires 0 < epsilon < 1."""

    def __init__(self, epsilon: float):
        if not 0.0 < epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        self.epsilon = float(epsilon)

    def __repr__(self):
        return f"FrameSpec(epsilon={self.epsilon})"


def orthonormal_frame(g: np.ndarray, T: np.ndarray) -> np.ndarray:
    """Gram-Schmidt against ``g`` starting from the time orientation ``T``.

    Rows of the result are w_0 (unit, future timelike) followed by unit
    spacelike vectors.  Raises ``FloatingPointError`` on degenerate input.
    """
    n = len(T)
    basis = [np.asarray(T, dtype=float)]
    basis += [np.eye(n)[i] for i in range(n)]
    frame = []
    for v in basis:
        w = v.copy()
        for u in frame:
            w = w - (w @ g @ u) / (u @ g @ u) * u
        norm2 = w @ g @ w
        if len(frame) == 0 and not norm2 < 0:
            raise FloatingPointError("time orientation is not timelike")
        if abs(norm2) < 1e-14 * max(1.0, np.abs(g).max()):
            continue
        w = w / math.sqrt(abs(norm2))
        if len(frame) > 0:
            # sign convention: largest spatial component positive
            k = int(np.argmax(np.abs(w)))
            if w[k] < 0:
                w = -w
        frame.append(w)
        if len(frame) == n:
            break
    if len(frame) < n:
        raise FloatingPointError("metric is degenerate; frame construction failed")
    return np.array(frame)


def build_steep_frame(model: MetricModel, p, spec: FrameSpec) -> np.ndarray:
    """Frame e_0 = w_0, e_i = (1 - eps) w_i + w_0 built on an orthonormal frame.

    Every e_k is future timelike with g(e_0, e_j) = -1 and
    g(e_i, e_j) = (1 - eps)^2 delta_ij - 1.
    """
    model.check_domain(p)
    g = model.metric_batch(np.asarray(p, dtype=float))[0]
    T = model.time_orientation_batch(p)[0]
    w = orthonormal_frame(g, T)
    e = np.empty_like(w)
    e[0] = w[0]
    e[1:] = (1.0 - spec.epsilon) * w[1:] + w[0]
    return e
