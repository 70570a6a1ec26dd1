"""Lipschitz boundary graphs, charts, flattening maps, and partitions of unity.

A boundary patch is the graph of a Lipschitz function gamma in chart-local
coordinates obtained from world coordinates by an axis permutation with sign
flips and a translation to the chart center.  The flattening map sends the
patch to the hyperplane {y_d = 0} and the domain side to {y_d > 0}; it is
volume preserving (unit lower-triangular Jacobian away from kinks).

Every operation is a pure function of its inputs plus explicit seeds, and all
reductions are fixed-order sums, so single-threaded runs are bit-reproducible.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import CoverageGap

KINK_FLAG_TOL = 1e-6


def _as_points(x, dim):
    """Normalize scalar / 1-D input to an (n, dim) float array."""
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        if dim != 1:
            raise ValueError(f"scalar input for dimension {dim}")
        return a.reshape(1, 1)
    if a.ndim == 1:
        if dim == 1:
            return a.reshape(-1, 1)
        if a.shape[0] == dim:
            return a.reshape(1, dim)
        raise ValueError(f"cannot interpret shape {a.shape} as points in R^{dim}")
    if a.shape[1] != dim:
        raise ValueError(f"points have dimension {a.shape[1]}, expected {dim}")
    return a


# ---------------------------------------------------------------------------
# Graph catalog
# ---------------------------------------------------------------------------

class LipschitzGraph:
    """Boundary generator gamma: R^{d-1} -> R with a certified Lipschitz bound.

    Subclasses are closed-form so the bound is analytic, not estimated.
    ``ambient_dim`` is the dimension d of the surrounding space; gamma takes
    points in R^{d-1}.
    """

    kind = "abstract"

    def __init__(self, ambient_dim=2):
        if ambient_dim < 2:
            raise ValueError("ambient dimension must be >= 2")
        self.ambient_dim = int(ambient_dim)

    @property
    def input_dim(self):
        return self.ambient_dim - 1

    @property
    def lipschitz_bound(self):
        raise NotImplementedError

    def _eval(self, xp):
        raise NotImplementedError

    def __call__(self, xp):
        pts = _as_points(xp, self.input_dim)
        vals = self._eval(pts)
        if not np.all(np.isfinite(vals)):
            raise ValueError(f"{self.kind} graph produced non-finite values")
        return vals

    def kink_distance(self, xp):
        """Distance from each point to the nearest non-differentiability."""
        pts = _as_points(xp, self.input_dim)
        return np.full(len(pts), np.inf)

    def config(self):
        raise NotImplementedError


class ZeroGraph(LipschitzGraph):
    kind = "zero"

    @property
    def lipschitz_bound(self):
        return 0.0

    def _eval(self, xp):
        return np.zeros(len(xp))

    def config(self):
        return {"kind": "zero"}


class AffineGraph(LipschitzGraph):
    """gamma(x') = s . x' for a fixed slope vector s."""

    kind = "affine"

    def __init__(self, slope):
        slope = np.atleast_1d(np.asarray(slope, dtype=float))
        super().__init__(ambient_dim=slope.shape[0] + 1)
        self.slope = slope

    @property
    def lipschitz_bound(self):
        return float(np.linalg.norm(self.slope))

    def _eval(self, xp):
        return xp @ self.slope

    def config(self):
        return {"kind": "affine", "slope": self.slope.tolist()}


class ConeGraph(LipschitzGraph):
    """gamma(x') = c * |x'|; the model kink at the origin."""

    kind = "cone"

    def __init__(self, c, ambient_dim=2):
        super().__init__(ambient_dim=ambient_dim)
        self.c = float(c)

    @property
    def lipschitz_bound(self):
        return abs(self.c)

    def _eval(self, xp):
        return self.c * np.linalg.norm(xp, axis=1)

    def kink_distance(self, xp):
        pts = _as_points(xp, self.input_dim)
        return np.linalg.norm(pts, axis=1)

    def config(self):
        return {"kind": "cone", "c": self.c}


class PiecewiseLinearGraph(LipschitzGraph):
    """1-D sample table with linear interpolation, extended by the end slopes."""

    kind = "piecewise_linear"

    def __init__(self, knots_t, knots_v):
        super().__init__(ambient_dim=2)
        t = np.asarray(knots_t, dtype=float)
        v = np.asarray(knots_v, dtype=float)
        if t.ndim != 1 or t.shape != v.shape or len(t) < 2:
            raise ValueError("need matching 1-D knot tables with >= 2 entries")
        if not np.all(np.diff(t) > 0):
            raise ValueError("knot abscissae must be strictly increasing")
        self.knots_t = t
        self.knots_v = v
        self._slopes = np.diff(v) / np.diff(t)

    @property
    def lipschitz_bound(self):
        return float(np.max(np.abs(self._slopes)))

    def _eval(self, xp):
        t = xp[:, 0]
        out = np.interp(t, self.knots_t, self.knots_v)
        left = t < self.knots_t[0]
        right = t > self.knots_t[-1]
        if np.any(left):
            out[left] = self.knots_v[0] + self._slopes[0] * (t[left] - self.knots_t[0])
        if np.any(right):
            out[right] = self.knots_v[-1] + self._slopes[-1] * (t[right] - self.knots_t[-1])
        return out

    def kink_distance(self, xp):
        pts = _as_points(xp, 1)
        # interior knots only; end knots continue with the same slope outward
        interior = self.knots_t[1:-1] if len(self.knots_t) > 2 else self.knots_t[:0]
        if len(interior) == 0:
            return np.full(len(pts), np.inf)
        return np.min(np.abs(pts[:, :1] - interior[None, :]), axis=1)

    def config(self):
        return {
            "kind": "piecewise_linear",
            "knots_t": self.knots_t.tolist(),
            "knots_v": self.knots_v.tolist(),
        }

    def shifted(self, dt, dv):
        """Same polyline in coordinates translated by (-dt, -dv)."""
        return PiecewiseLinearGraph(self.knots_t - dt, self.knots_v - dv)


class SawtoothGraph(PiecewiseLinearGraph):
    """Seeded zigzag: knot values drawn once from a counter-based RNG.

    Knots sit at integer multiples of ``period`` covering ``n_periods`` cells
    on either side of the origin; values are uniform in [-amplitude, amplitude].
    """

    kind = "sawtooth"

    def __init__(self, seed, amplitude, period, n_periods=64):
        seed = int(seed)
        amplitude = float(amplitude)
        period = float(period)
        if period <= 0 or amplitude < 0:
            raise ValueError("need period > 0 and amplitude >= 0")
        rng = np.random.Generator(np.random.Philox(key=seed))
        j = np.arange(-n_periods, n_periods + 1)
        values = amplitude * (2.0 * rng.random(len(j)) - 1.0)
        super().__init__(j * period, values)
        self.seed = seed
        self.amplitude = amplitude
        self.period = period
        self.n_periods = int(n_periods)

    def config(self):
        return {
            "kind": "sawtooth",
            "seed": self.seed,
            "amplitude": self.amplitude,
            "period": self.period,
        }


class SeparableGraph(LipschitzGraph):
    """gamma(x') = sum_j g_j(x'_j) built from 1-D parts.

    Needed for d >= 3 boundary corners (e.g. octahedron edges and vertices),
    where the graph depends on several coordinates but splits additively.
    """

    kind = "separable"

    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise ValueError("need at least one part")
        for g in parts:
            if g.input_dim != 1:
                raise ValueError("separable parts must be 1-D graphs")
        super().__init__(ambient_dim=len(parts) + 1)
        self.parts = parts

    @property
    def lipschitz_bound(self):
        return float(np.sqrt(sum(g.lipschitz_bound ** 2 for g in self.parts)))

    def _eval(self, xp):
        total = np.zeros(len(xp))
        for j, g in enumerate(self.parts):
            total = total + g(xp[:, j])
        return total

    def kink_distance(self, xp):
        pts = _as_points(xp, self.input_dim)
        dist = np.full(len(pts), np.inf)
        for j, g in enumerate(self.parts):
            dist = np.minimum(dist, g.kink_distance(pts[:, j]))
        return dist

    def config(self):
        return {"kind": "separable", "parts": [g.config() for g in self.parts]}


def graph_from_config(cfg, ambient_dim):
    kind = cfg.get("kind")
    if kind == "zero":
        return ZeroGraph(ambient_dim=ambient_dim)
    if kind == "affine":
        g = AffineGraph(cfg["slope"])
        if g.ambient_dim != ambient_dim:
            raise ValueError("affine slope length does not match chart dimension")
        return g
    if kind == "cone":
        return ConeGraph(cfg["c"], ambient_dim=ambient_dim)
    if kind == "piecewise_linear":
        if ambient_dim != 2:
            raise ValueError("piecewise_linear graphs are 1-D")
        return PiecewiseLinearGraph(cfg["knots_t"], cfg["knots_v"])
    if kind == "sawtooth":
        if ambient_dim != 2:
            raise ValueError("sawtooth graphs are 1-D")
        return SawtoothGraph(cfg["seed"], cfg["amplitude"], cfg["period"])
    if kind == "separable":
        parts = [graph_from_config(p, ambient_dim=2) for p in cfg["parts"]]
        g = SeparableGraph(parts)
        if g.ambient_dim != ambient_dim:
            raise ValueError("separable part count does not match chart dimension")
        return g
    raise ValueError(f"unknown graph kind {kind!r}")


def eval_gamma(graph, xp):
    """Evaluate gamma at one point or a batch; total on finite inputs."""
    vals = graph(xp)
    return float(vals[0]) if vals.shape == (1,) else vals


def estimate_lipschitz(graph, halfwidth, n_pairs, seed):
    """Max secant slope over seeded point pairs in [-halfwidth, halfwidth]^{d-1}."""
    rng = np.random.default_rng(seed)
    m = graph.input_dim
    x = rng.uniform(-halfwidth, halfwidth, size=(n_pairs, m))
    y = rng.uniform(-halfwidth, halfwidth, size=(n_pairs, m))
    gap = np.linalg.norm(x - y, axis=1)
    keep = gap > 1e-12
    secants = np.abs(graph(x[keep]) - graph(y[keep])) / gap[keep]
    return float(np.max(secants))


# ---------------------------------------------------------------------------
# Derivatives of gamma (a.e., by central differences)
# ---------------------------------------------------------------------------

def grad_gamma_fd(graph, xp, h):
    """Central-difference gradient of gamma, clamped to the Lipschitz ball.

    Rademacher only gives a.e. differentiability, so estimates at kinks are
    clamped (componentwise, then in norm) to the certified bound L.  Returns
    ``(grad, kink_flags)`` where a flag marks raw estimates exceeding L by
    more than 1e-6.

    Parameters
    ----------
    graph : LipschitzGraph
    xp : array-like, points in R^{d-1}
    h : float, positive difference step
    """
    if h <= 0:
        raise ValueError("difference step must be positive")
    pts = _as_points(xp, graph.input_dim)
    m = graph.input_dim
    L = graph.lipschitz_bound
    grad = np.empty((len(pts), m))
    for j in range(m):
        shift = np.zeros(m)
        shift[j] = h
        grad[:, j] = (graph(pts + shift) - graph(pts - shift)) / (2.0 * h)
    kink = np.any(np.abs(grad) > L + KINK_FLAG_TOL, axis=1)
    grad = np.clip(grad, -L, L)
    norms = np.linalg.norm(grad, axis=1)
    kink |= norms > L + KINK_FLAG_TOL
    over = norms > L
    if np.any(over) and L > 0:
        grad[over] *= (L / norms[over])[:, None]
    return grad, kink


def area_factor(graph, xp, h):
    """Surface Jacobian sqrt(1 + |grad gamma|^2) of the graph map x' -> (x', gamma(x')).

    Converts flat integrals over the chart footprint into surface-measure
    integrals; always in [1, sqrt(1 + L^2)] thanks to the gradient clamp.
    """
    grad, _ = grad_gamma_fd(graph, xp, h)
    return np.sqrt(1.0 + np.sum(grad * grad, axis=1))


# ---------------------------------------------------------------------------
# Charts
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class GraphChart:
    """A boundary patch B(center, radius) with its graph and axis orientation.

    ``axis_map`` lists signed 1-based world axes: local axis j reads world
    axis |axis_map[j]| - 1 with the given sign, after translating the center
    to the origin.  The domain side of the patch is {xi_d > gamma(xi')} in
    these local coordinates, and that predicate agrees with the domain
    indicator everywhere in the (open) chart ball.
    """

    center: np.ndarray
    radius: float
    graph: LipschitzGraph
    axis_map: tuple

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        d = len(self.center)
        self.radius = float(self.radius)
        if self.radius <= 0:
            raise ValueError("chart radius must be positive")
        if self.graph.ambient_dim != d:
            raise ValueError("graph ambient dimension does not match center")
        amap = tuple(int(a) for a in self.axis_map)
        if sorted(abs(a) for a in amap) != list(range(1, d + 1)):
            raise ValueError(f"axis_map {amap} is not a signed permutation of 1..{d}")
        self.axis_map = amap
        self._perm = np.array([abs(a) - 1 for a in amap])
        self._signs = np.array([1.0 if a > 0 else -1.0 for a in amap])
        g0 = self.graph(np.zeros((1, d - 1)))[0]
        if abs(g0) > 1e-9 * max(1.0, self.radius):
            raise ValueError("chart center must lie on the graph (gamma(0) = 0)")

    @property
    def dim(self):
        return len(self.center)

    def to_local(self, x):
        pts = _as_points(x, self.dim)
        return self._signs[None, :] * (pts[:, self._perm] - self.center[self._perm])

    def to_world(self, xi):
        xi = _as_points(xi, self.dim)
        out = np.empty_like(xi)
        out[:, self._perm] = self.center[self._perm] + self._signs[None, :] * xi
        return out

    def in_ball(self, x, shrink=1.0):
        pts = _as_points(x, self.dim)
        return np.linalg.norm(pts - self.center, axis=1) < self.radius * shrink

    def predicate(self, x):
        """Domain-side test xi_d > gamma(xi'), valid inside the chart ball."""
        xi = self.to_local(x)
        return xi[:, -1] > self.graph(xi[:, :-1])

    def vertical_coordinate(self, x):
        """Signed chart-vertical distance xi_d - gamma(xi') (the collar coordinate)."""
        xi = self.to_local(x)
        return xi[:, -1] - self.graph(xi[:, :-1])

    def footprint_halfwidth(self, safety=0.98):
        """Largest w so graph points over [-w, w]^{d-1} stay in the chart ball."""
        return safety * self.radius / np.sqrt(1.0 + self.graph.lipschitz_bound ** 2)

    def config(self):
        return {
            "center": self.center.tolist(),
            "radius": self.radius,
            "graph": self.graph.config(),
            "axis_map": list(self.axis_map),
        }


def flatten(chart, x):
    """Flattening map F: world point -> chart-local (y', y_d) with y_d = xi_d - gamma(xi')."""
    xi = chart.to_local(x)
    y = xi.copy()
    y[:, -1] -= chart.graph(xi[:, :-1])
    return y


def unflatten(chart, y):
    """Inverse flattening: chart-local (y', y_d) -> world point."""
    y = _as_points(y, chart.dim)
    xi = y.copy()
    xi[:, -1] += chart.graph(y[:, :-1])
    return chart.to_world(xi)


def jacobian_F_check(chart, samples, seed, fd_step=None):
    """Max |det DF - 1| over seeded sample points that avoid kinks.

    DF is assembled by central differences of the local flattening map; its
    exact value is unit lower-triangular so the determinant is 1 wherever
    gamma is differentiable.
    """
    if samples < 1:
        raise ValueError("need at least one sample")
    d = chart.dim
    if fd_step is None:
        fd_step = 1e-5 * chart.radius
    rng = np.random.default_rng(seed)
    pts = np.empty((0, d))
    for _ in range(200):
        if len(pts) >= samples:
            break
        cand = rng.uniform(-0.7 * chart.radius, 0.7 * chart.radius, size=(samples, d))
        ok = chart.graph.kink_distance(cand[:, :-1]) > 4.0 * fd_step
        pts = np.vstack([pts, cand[ok]])
    pts = pts[:samples]
    if len(pts) < samples:
        raise ValueError("could not sample enough kink-free points")

    def f_local(xi):
        y = xi.copy()
        y[:, -1] -= chart.graph(xi[:, :-1])
        return y

    jac = np.empty((len(pts), d, d))
    for j in range(d):
        shift = np.zeros(d)
        shift[j] = fd_step
        jac[:, :, j] = (f_local(pts + shift) - f_local(pts - shift)) / (2.0 * fd_step)
    dets = np.linalg.det(jac)
    return float(np.max(np.abs(dets - 1.0)))


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class LipschitzDomain:
    """Bounded domain described by a finite chart cover of its boundary.

    The indicator is glued from the chart predicates: the first chart whose
    ball contains a point decides, and points in no chart ball are outside.
    Catalog domains are built so the chart balls also cover the interior,
    which makes this rule total.
    """

    charts: list
    bbox: np.ndarray
    name: str = ""

    def __post_init__(self):
        if not self.charts:
            raise ValueError("domain needs at least one chart")
        self.bbox = np.asarray(self.bbox, dtype=float)
        d = self.charts[0].dim
        if self.bbox.shape != (2, d):
            raise ValueError("bbox must be [[lo...], [hi...]]")
        if not np.all(np.isfinite(self.bbox)):
            raise ValueError("domain must be bounded (finite bbox)")
        for c in self.charts:
            if c.dim != d:
                raise ValueError("charts disagree on dimension")

    @property
    def dim(self):
        return self.charts[0].dim

    def indicator(self, x):
        pts = _as_points(x, self.dim)
        inside = np.zeros(len(pts), dtype=bool)
        undecided = np.ones(len(pts), dtype=bool)
        for chart in self.charts:
            if not np.any(undecided):
                break
            sel = undecided & chart.in_ball(pts)
            if np.any(sel):
                inside[sel] = chart.predicate(pts[sel])
                undecided &= ~sel
        return inside

    def config(self):
        return {
            "dim": self.dim,
            "charts": [c.config() for c in self.charts],
            "bbox": self.bbox.tolist(),
        }

    def to_json(self, indent=2):
        return json.dumps(self.config(), indent=indent)

    @classmethod
    def from_config(cls, doc, name=""):
        d = int(doc["dim"])
        charts = []
        for c in doc["charts"]:
            center = np.asarray(c["center"], dtype=float)
            if len(center) != d:
                raise ValueError("chart center dimension does not match domain")
            charts.append(GraphChart(
                center=center,
                radius=float(c["radius"]),
                graph=graph_from_config(c["graph"], ambient_dim=d),
                axis_map=tuple(c["axis_map"]),
            ))
        return cls(charts=charts, bbox=np.asarray(doc["bbox"], dtype=float), name=name)

    @classmethod
    def from_json(cls, text, name=""):
        return cls.from_config(json.loads(text), name=name)


def boundary_probe_points(domain, grid):
    """Midpoints of grid edges where the inside mask flips: cheap boundary detector."""
    mask = grid.mask
    pieces = []
    axes = grid.axes()
    mesh = np.meshgrid(*axes, indexing="ij")
    for ax in range(grid.dim):
        lo = tuple(slice(0, -1) if a == ax else slice(None) for a in range(grid.dim))
        hi = tuple(slice(1, None) if a == ax else slice(None) for a in range(grid.dim))
        flip = mask[lo] != mask[hi]
        if not np.any(flip):
            continue
        mids = np.stack([
            0.5 * (m[lo][flip] + m[hi][flip]) for m in mesh
        ], axis=1)
        pieces.append(mids)
    if not pieces:
        return np.empty((0, grid.dim))
    return np.vstack(pieces)


def verify_finite_subcover(domain, grid):
    """Check every detected boundary point lies in some half-radius chart ball.

    Raises CoverageGap with the worst offender if the finite-subcover
    hypothesis fails at this grid resolution.
    """
    probes = boundary_probe_points(domain, grid)
    if len(probes) == 0:
        raise CoverageGap("no boundary detected on the grid")
    covered = np.zeros(len(probes), dtype=bool)
    for chart in domain.charts:
        covered |= chart.in_ball(probes, shrink=0.5)
        if np.all(covered):
            return len(probes)
    worst = probes[~covered][0]
    raise CoverageGap(f"boundary point {worst.tolist()} outside every half-radius ball")


# ---------------------------------------------------------------------------
# Partition of unity
# ---------------------------------------------------------------------------

def _smooth_plateau(rho):
    """C-infinity bump profile: 1 on [0, 1/2], exp(1 - 1/(1-tau^2)) taper to 0 at 1."""
    rho = np.asarray(rho, dtype=float)
    out = np.zeros(rho.shape)
    out[rho <= 0.5] = 1.0
    mid = (rho > 0.5) & (rho < 1.0)
    if np.any(mid):
        tau = 2.0 * rho[mid] - 1.0
        out[mid] = np.exp(1.0 - 1.0 / (1.0 - tau * tau))
    return out


def bump_values(charts, points):
    """(n_points, n_charts) matrix of chart bumps b_i, each 1 on the half ball."""
    pts = np.asarray(points, dtype=float)
    b = np.empty((len(pts), len(charts)))
    for i, chart in enumerate(charts):
        rho = np.linalg.norm(pts - chart.center, axis=1) / chart.radius
        b[:, i] = _smooth_plateau(rho)
    return b


def partition_weights(charts, points):
    """Normalized weights rho_i = b_i / sum_j b_j; rows with no support are zero."""
    b = bump_values(charts, points)
    s = np.sum(b, axis=1)
    covered = s > 0
    b[covered] /= s[covered, None]
    b[~covered] = 0.0
    return b


@dataclass(eq=False)
class PartitionOfUnity:
    """Chart-subordinate weights sampled on the boundary collar of a grid.

    The collar is measured in chart-vertical coordinates (|y_d| below
    ``collar_width`` in some covering chart).  ``weights[k, i]`` is rho_i at
    the collar node with flat index ``node_indices[k]``.
    """

    charts: list
    collar_width: float
    node_indices: np.ndarray
    weights: np.ndarray

    def weights_at(self, points):
        return partition_weights(self.charts, points)


def build_partition_of_unity(domain, grid, collar_width=None):
    """Sample normalized chart bumps on the collar nodes of ``grid``.

    Raises CoverageGap if a detected boundary point has no bump support, or
    if some chart is so small that no collar node lands in its ball.
    """
    if collar_width is None:
        collar_width = min(c.radius for c in domain.charts) / 2.0
    nodes = grid.nodes()
    in_collar = np.zeros(len(nodes), dtype=bool)
    for chart in domain.charts:
        ball = chart.in_ball(nodes)
        if np.any(ball):
            vert = chart.vertical_coordinate(nodes[ball])
            sel = np.where(ball)[0][np.abs(vert) < collar_width]
            in_collar[sel] = True
    idx = np.where(in_collar)[0]
    if len(idx) == 0:
        raise CoverageGap("no grid node falls in the boundary collar")
    b = bump_values(domain.charts, nodes[idx])
    if np.any(np.max(b, axis=0) <= 0.0):
        dead = int(np.argmin(np.max(b, axis=0)))
        raise CoverageGap(f"chart {dead} owns no collar grid node (radius too small)")
    probes = boundary_probe_points(domain, grid)
    if len(probes):
        s = np.sum(bump_values(domain.charts, probes), axis=1)
        if np.any(s <= 0.0):
            worst = probes[np.argmin(s)]
            raise CoverageGap(f"no bump covers boundary point {worst.tolist()}")
    s = np.sum(b, axis=1)
    if np.any(s <= 0.0):
        # collar nodes can sit farther than any bump reaches; drop them
        keep = s > 0.0
        idx, b, s = idx[keep], b[keep], s[keep]
    weights = b / s[:, None]
    return PartitionOfUnity(
        charts=list(domain.charts),
        collar_width=float(collar_width),
        node_indices=idx,
        weights=weights,
    )
