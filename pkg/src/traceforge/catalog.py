"""Built-in graph and domain catalogs plus frozen test-function sets.

Catalog domains are polytopes whose every corner admits an axis-permutation
graph chart (interior angles stay away from right angles), so one code path
covers flat walls, cone corners, and seeded sawtooth boundaries:

  unit-square : unit-area square in diagonal orientation (perimeter 4),
  cone        : diamond whose lower boundary is the cone graph |x| over [-1, 1],
  sawtooth    : same roof with a seeded zigzag floor,
  cone-3d     : octahedron |x1| + |x2| + |x3 - 1| < 1 (d = 3 spot checks).

Chart radii are derived from the distance to the nearest feature that breaks
the chart predicate, shrunk by a safety factor; the cover is then validated
by the geometry test suite, not trusted.
"""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

from .geometry import (AffineGraph, ConeGraph, GraphChart, LipschitzDomain,
                       PiecewiseLinearGraph, SawtoothGraph, SeparableGraph,
                       ZeroGraph)

RADIUS_SAFETY = 0.9
_SQ = 1.0 / np.sqrt(2.0)


# ---------------------------------------------------------------------------
# Graph catalog (used by the quadrature and round-trip suites)
# ---------------------------------------------------------------------------

def graph_catalog(dim=2):
    """Frozen list of (name, graph) pairs for the given ambient dimension."""
    if dim == 2:
        return [
            ("zero", ZeroGraph(ambient_dim=2)),
            ("affine1", AffineGraph([1.0])),
            ("affine2", AffineGraph([2.0])),
            ("cone", ConeGraph(1.0, ambient_dim=2)),
            ("pwl", PiecewiseLinearGraph([-2.0, -0.7, 0.1, 0.9, 2.0],
                                         [0.3, -0.4, 0.5, -0.1, 0.6])),
            ("sawtooth", SawtoothGraph(seed=5, amplitude=0.3, period=0.5)),
        ]
    if dim == 3:
        return [
            ("zero3", ZeroGraph(ambient_dim=3)),
            ("affine3", AffineGraph([0.5, -1.0])),
            ("cone3", ConeGraph(1.0, ambient_dim=3)),
            ("corner3", SeparableGraph([AffineGraph([1.0]),
                                        ConeGraph(1.0, ambient_dim=2)])),
        ]
    raise ValueError(f"no graph catalog for dimension {dim}")


# ---------------------------------------------------------------------------
# Chart placement helpers
# ---------------------------------------------------------------------------

def _walk_positions(total, left_cover, right_cover, radius_fn, margin):
    """Greedy arc positions covering (left_cover, total - right_cover).

    Each chart placed at arc ``a`` owns the open interval of half-radius
    ``radius_fn(a) / 2`` around it; successive charts overlap the covered
    prefix by ``margin``.
    """
    out = []
    covered = left_cover
    target = total - right_cover + margin
    for _ in range(200):
        if covered >= target:
            return out
        a = covered
        for _ in range(30):
            a_new = covered - margin + radius_fn(a) / 2.0
            if abs(a_new - a) < 1e-12:
                break
            a = a_new
        a = min(a, total - margin)
        r = radius_fn(a)
        advance = a + r / 2.0
        if advance <= covered + 1e-9:
            raise ValueError("chart walk stalled; radii too small")
        out.append((a, r))
        covered = advance
    raise ValueError("chart walk did not terminate")


def _edge_charts(p0, p1, frame, slope, left_cover, right_cover, margin=0.05,
                 radius_cap=np.inf):
    """Affine charts along the straight edge p0 -> p1.

    ``frame``/``slope`` give the chart-local orientation and graph slope of
    the edge; radii follow 0.9 * min(arc to either endpoint wedge).
    """
    p0, p1 = np.asarray(p0, float), np.asarray(p1, float)
    length = float(np.linalg.norm(p1 - p0))
    direction = (p1 - p0) / length

    def radius(a):
        return min(RADIUS_SAFETY * min(a, length - a), radius_cap)

    charts = []
    for a, r in _walk_positions(length, left_cover, right_cover, radius, margin):
        center = p0 + a * direction
        charts.append(GraphChart(center=center, radius=r,
                                 graph=AffineGraph([slope]), axis_map=frame))
    return charts


def _polyline_arcs(points):
    seg = np.diff(points, axis=0)
    lengths = np.linalg.norm(seg, axis=1)
    return np.concatenate([[0.0], np.cumsum(lengths)])


def _point_at_arc(points, arcs, a):
    j = int(np.searchsorted(arcs, a, side="right") - 1)
    j = min(max(j, 0), len(points) - 2)
    t = (a - arcs[j]) / (arcs[j + 1] - arcs[j])
    return (1 - t) * points[j] + t * points[j + 1], j


# ---------------------------------------------------------------------------
# d = 2 diamonds
# ---------------------------------------------------------------------------

def _diamond_domain(s, name, vertex_radius, edge_margin=0.05):
    """Diamond |x1| + |x2 - s| < s: four cone corners plus affine edge charts."""
    bottom = np.array([0.0, 0.0])
    right = np.array([s, s])
    top = np.array([0.0, 2 * s])
    left = np.array([-s, s])
    r_v = vertex_radius
    charts = [
        GraphChart(bottom, r_v, ConeGraph(1.0), (1, 2)),
        GraphChart(top, r_v, ConeGraph(1.0), (1, -2)),
        GraphChart(right, r_v, ConeGraph(1.0), (2, -1)),
        GraphChart(left, r_v, ConeGraph(1.0), (2, 1)),
    ]
    cover = r_v / 2.0
    cap = RADIUS_SAFETY * s * _SQ  # wedge distance from an edge interior point
    charts += _edge_charts(bottom, right, (1, 2), +1.0, cover, cover,
                           edge_margin, cap)
    charts += _edge_charts(bottom, left, (1, 2), -1.0, cover, cover,
                           edge_margin, cap)
    charts += _edge_charts(right, top, (1, -2), +1.0, cover, cover,
                           edge_margin, cap)
    charts += _edge_charts(left, top, (1, -2), -1.0, cover, cover,
                           edge_margin, cap)
    pad = 0.05 * (2 * s)
    bbox = [[-s - pad, -pad], [s + pad, 2 * s + pad]]
    return LipschitzDomain(charts=charts, bbox=np.array(bbox), name=name)


def unit_square_domain():
    """Unit-area square (diagonal orientation): area 1, perimeter 4."""
    return _diamond_domain(_SQ, "unit-square", vertex_radius=0.97)


def cone_domain():
    """Diamond whose lower boundary is the cone graph |x| over [-1, 1]."""
    return _diamond_domain(1.0, "cone", vertex_radius=1.38)


# ---------------------------------------------------------------------------
# Sawtooth domain
# ---------------------------------------------------------------------------

def _sawtooth_floor(seed):
    """Zigzag knots from (-1, 1) to (1, 1); end slopes forced to -1 / +1."""
    rng = np.random.default_rng(seed)
    xs = np.linspace(-1.0, 1.0, 7)
    vs = np.empty(7)
    vs[0] = vs[6] = 1.0
    vs[1] = vs[5] = 1.0 - (xs[1] - xs[0])  # slope exactly -1 / +1 at the corners
    vs[2] = rng.uniform(0.30, 0.55)
    vs[3] = rng.uniform(0.10, 0.35)
    vs[4] = rng.uniform(0.30, 0.55)
    return xs, vs


def sawtooth_domain(seed=11):
    """Seeded zigzag floor under the diamond roof through (0, 2)."""
    xs, vs = _sawtooth_floor(seed)
    floor = PiecewiseLinearGraph(xs, vs)
    right = np.array([1.0, 1.0])
    left = np.array([-1.0, 1.0])
    top = np.array([0.0, 2.0])

    charts = [
        GraphChart(top, 1.38, ConeGraph(1.0), (1, -2)),
        # corner cones: exact along the roof edge and the forced-slope segment
        GraphChart(right, 0.42, ConeGraph(1.0), (2, -1)),
        GraphChart(left, 0.42, ConeGraph(1.0), (2, 1)),
    ]
    roof_cap = RADIUS_SAFETY * 1.0 * _SQ
    charts += _edge_charts(top, right, (1, -2), +1.0, 1.38 / 2.0, 0.42 / 2.0,
                           0.05, roof_cap)
    charts += _edge_charts(top, left, (1, -2), -1.0, 1.38 / 2.0, 0.42 / 2.0,
                           0.05, roof_cap)

    # floor charts carry the whole shifted polyline, so their predicate is
    # exact along the entire zigzag; the binding mismatch features are the
    # roof wedges at (+-1, 1) and the roof lines themselves.
    pts = np.column_stack([xs, vs])
    arcs = _polyline_arcs(pts)

    def floor_radius(a):
        c, _ = _point_at_arc(pts, arcs, a)
        d_corners = min(np.linalg.norm(c - right), np.linalg.norm(c - left))
        d_roof = (2.0 - abs(c[0]) - c[1]) * _SQ
        return RADIUS_SAFETY * min(d_corners, d_roof)

    cover = 0.42 / 2.0
    for a, r in _walk_positions(arcs[-1], cover, cover, floor_radius, 0.05):
        center, _ = _point_at_arc(pts, arcs, a)
        charts.append(GraphChart(
            center=center, radius=r,
            graph=floor.shifted(center[0], center[1]), axis_map=(1, 2)))

    bbox = np.array([[-1.1, -0.1], [1.1, 2.1]])
    return LipschitzDomain(charts=charts, bbox=bbox, name="sawtooth")


# ---------------------------------------------------------------------------
# d = 3 octahedron
# ---------------------------------------------------------------------------

def _abs_part():
    return ConeGraph(1.0, ambient_dim=2)


def _lin_part(slope):
    return AffineGraph([slope])


def octahedron_domain():
    """Octahedron |x1| + |x2| + |x3 - 1| < 1: every corner is a graph corner.

    Radii sit under the analytic mismatch distances: sqrt(3/2) for vertices
    (the offending wedge splits its ell^1 mass over both horizontal axes),
    ~0.61 for edge midpoints, and the opposite-crease wedge at ~0.385 for
    face charts.
    """
    charts = []
    r_v, r_e, r_f = 1.2, 0.6, 0.36
    l1cone = lambda: SeparableGraph([_abs_part(), _abs_part()])

    # vertices: bottom, top, then the four equator tips
    charts.append(GraphChart([0, 0, 0], r_v, l1cone(), (1, 2, 3)))
    charts.append(GraphChart([0, 0, 2], r_v, l1cone(), (1, 2, -3)))
    charts.append(GraphChart([1, 0, 1], r_v, l1cone(), (2, 3, -1)))
    charts.append(GraphChart([-1, 0, 1], r_v, l1cone(), (2, 3, 1)))
    charts.append(GraphChart([0, 1, 1], r_v, l1cone(), (1, 3, -2)))
    charts.append(GraphChart([0, -1, 1], r_v, l1cone(), (1, 3, 2)))

    # bottom and top edges: gamma = (+-xi_1) + |xi_2| in the polar frame
    for sx in (+1.0, -1.0):
        charts.append(GraphChart([0.5 * sx, 0, 0.5], r_e,
                                 SeparableGraph([_lin_part(sx), _abs_part()]),
                                 (1, 2, 3)))
        charts.append(GraphChart([0, 0.5 * sx, 0.5], r_e,
                                 SeparableGraph([_abs_part(), _lin_part(sx)]),
                                 (1, 2, 3)))
        charts.append(GraphChart([0.5 * sx, 0, 1.5], r_e,
                                 SeparableGraph([_lin_part(sx), _abs_part()]),
                                 (1, 2, -3)))
        charts.append(GraphChart([0, 0.5 * sx, 1.5], r_e,
                                 SeparableGraph([_abs_part(), _lin_part(sx)]),
                                 (1, 2, -3)))

    # equator edges: vertical axis points inward along +-x
    charts.append(GraphChart([0.5, 0.5, 1], r_e,
                             SeparableGraph([_lin_part(1.0), _abs_part()]),
                             (2, 3, -1)))
    charts.append(GraphChart([0.5, -0.5, 1], r_e,
                             SeparableGraph([_lin_part(-1.0), _abs_part()]),
                             (2, 3, -1)))
    charts.append(GraphChart([-0.5, 0.5, 1], r_e,
                             SeparableGraph([_lin_part(1.0), _abs_part()]),
                             (2, 3, 1)))
    charts.append(GraphChart([-0.5, -0.5, 1], r_e,
                             SeparableGraph([_lin_part(-1.0), _abs_part()]),
                             (2, 3, 1)))

    # faces: affine graphs at the centroid plus a spoke toward each corner
    # (the spokes close the cover gap between the centroid and vertex balls)
    third = 1.0 / 3.0
    r_s = 0.26
    spoke_frac = 0.25 / (np.sqrt(2.0) / np.sqrt(3.0))
    for sx in (+1.0, -1.0):
        for sy in (+1.0, -1.0):
            for upper, frame in ((False, (1, 2, 3)), (True, (1, 2, -3))):
                z_c = 2 - 2 * third if upper else 2 * third
                centroid = np.array([sx * third, sy * third, z_c])
                charts.append(GraphChart(centroid, r_f,
                                         AffineGraph([sx, sy]), frame))
                corners = [np.array([sx, 0.0, 1.0]), np.array([0.0, sy, 1.0]),
                           np.array([0.0, 0.0, 2.0 if upper else 0.0])]
                for corner in corners:
                    center = centroid + spoke_frac * (corner - centroid)
                    charts.append(GraphChart(center, r_s,
                                             AffineGraph([sx, sy]), frame))

    bbox = np.array([[-1.05, -1.05, -0.05], [1.05, 1.05, 2.05]])
    return LipschitzDomain(charts=charts, bbox=bbox, name="cone-3d")


# ---------------------------------------------------------------------------
# Registry, analytic oracles, data files
# ---------------------------------------------------------------------------

BUILTIN_DOMAINS = {
    "unit-square": unit_square_domain,
    "cone": cone_domain,
    "sawtooth": sawtooth_domain,
    "cone-3d": octahedron_domain,
}


def builtin_domain_names():
    return sorted(BUILTIN_DOMAINS)


def load_domain(name_or_path):
    """Resolve a built-in name via the packaged data files, else read a path."""
    if name_or_path in BUILTIN_DOMAINS:
        data = resources.files("traceforge").joinpath(f"domains/{name_or_path}.json")
        return LipschitzDomain.from_json(data.read_text(), name=name_or_path)
    with open(name_or_path) as fh:
        return LipschitzDomain.from_json(fh.read(), name=str(name_or_path))


def write_builtin_domain_files(directory):
    """Regenerate the shipped domain JSON files (development helper)."""
    import pathlib

    directory = pathlib.Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for name, builder in BUILTIN_DOMAINS.items():
        (directory / f"{name}.json").write_text(builder().to_json() + "\n")


def analytic_indicator(name, seed=11):
    """Closed-form inside test; the oracle the chart-glued indicator must match."""
    if name == "unit-square":
        return lambda x: np.abs(x[:, 0]) + np.abs(x[:, 1] - _SQ) < _SQ
    if name == "cone":
        return lambda x: np.abs(x[:, 0]) + np.abs(x[:, 1] - 1.0) < 1.0
    if name == "sawtooth":
        xs, vs = _sawtooth_floor(seed)
        floor = PiecewiseLinearGraph(xs, vs)
        return lambda x: (x[:, 1] > floor(x[:, 0])) & (x[:, 1] < 2.0 - np.abs(x[:, 0]))
    if name == "cone-3d":
        return lambda x: (np.abs(x[:, 0]) + np.abs(x[:, 1])
                          + np.abs(x[:, 2] - 1.0) < 1.0)
    raise KeyError(name)


def boundary_margin(name):
    """ell^1 distance to the boundary (vanishes on it); trace-zero generator."""
    if name == "unit-square":
        return lambda x: _SQ - np.abs(x[:, 0]) - np.abs(x[:, 1] - _SQ)
    if name == "cone":
        return lambda x: 1.0 - np.abs(x[:, 0]) - np.abs(x[:, 1] - 1.0)
    if name == "cone-3d":
        return lambda x: (1.0 - np.abs(x[:, 0]) - np.abs(x[:, 1])
                          - np.abs(x[:, 2] - 1.0))
    raise KeyError(name)


# ---------------------------------------------------------------------------
# Frozen function sets
# ---------------------------------------------------------------------------

def trace_function_catalog(seed=23):
    """Ten smooth fields for the trace-constant experiment (any dimension)."""
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-0.6, 1.4, size=(3, 2))
    sigmas = rng.uniform(0.35, 0.7, size=3)

    def gauss(c, s):
        return lambda x: np.exp(-((x[:, 0] - c[0]) ** 2
                                  + (x[:, 1] - c[1]) ** 2) / (2 * s * s))

    cat = [
        ("one", lambda x: np.ones(len(x))),
        ("x1", lambda x: x[:, 0]),
        ("x2", lambda x: x[:, 1]),
        ("x1x2", lambda x: x[:, 0] * x[:, 1]),
        ("sin-cos", lambda x: np.sin(2.0 * x[:, 0]) * np.cos(x[:, 1])),
        ("shifted", lambda x: 0.3 + 0.5 * x[:, 1]),
        ("radial", lambda x: np.sqrt(1.0 + x[:, 0] ** 2 + x[:, 1] ** 2)),
    ]
    for i, (c, s) in enumerate(zip(centers, sigmas)):
        cat.append((f"bump{i}", gauss(c, s)))
    return cat


def restriction_function_catalog():
    """Five continuous closed forms for the trace-restriction check."""
    return [
        ("one", lambda x: np.ones(len(x))),
        ("linear", lambda x: x[:, 0] + x[:, 1]),
        ("quadratic", lambda x: x[:, 0] ** 2 - 0.5 * x[:, 1]),
        ("cosine", lambda x: np.cos(3.0 * x[:, 0]) + 0.2 * x[:, 1]),
        ("gauss", lambda x: np.exp(-np.sum(x * x, axis=1))),
    ]


def trace_zero_fixtures(domain_name):
    """Cubic boundary-decay fields: trace-zero with gradient mass the cutoff
    sequence can actually shed at desk-scale k."""
    phi = boundary_margin(domain_name)

    def cubed(extra):
        return lambda x: phi(x) ** 3 * extra(x)

    return [
        ("margin3", cubed(lambda x: np.ones(len(x)))),
        ("margin3-tilt", cubed(lambda x: 1.0 + 0.5 * x[:, 0])),
        ("margin3-wave", cubed(lambda x: 0.8 + 0.4 * np.sin(2.0 * x[:, 0] + 1.0)
                               * np.cos(2.0 * x[:, 1]))),
    ]


def capped_height_fixture(domain_name, cap=0.45):
    """u = min(ell^1 margin, cap): equals the collar coordinate near the
    boundary, so the slice-estimate constant is 1 there."""
    phi = boundary_margin(domain_name)
    return lambda x: np.minimum(phi(x), cap)
