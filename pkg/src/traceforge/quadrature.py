"""Midpoint quadrature for surface integrals and change-of-variables checks.

Midpoint rule everywhere: the boundary graphs are only Lipschitz, so
higher-order rules buy nothing, and midpoint is first-order robust at kinks.
The practical error proxy for a result is the difference against the
half-resolution value (no analytic bound exists for merely Lipschitz
integrands).

All reductions are fixed-order sums.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import area_factor


@dataclass(eq=False)
class SurfacePatch:
    """A chart footprint box with a quadrature resolution.

    ``footprint`` is ((lo, hi), ...) per horizontal axis in chart-local
    coordinates; every corner must stay inside the projected chart ball.
    """

    chart: object
    footprint: np.ndarray
    resolution: int

    def __post_init__(self):
        self.footprint = np.atleast_2d(np.asarray(self.footprint, dtype=float))
        if self.footprint.shape != (self.chart.dim - 1, 2):
            raise ValueError("footprint must give (lo, hi) per horizontal axis")
        if np.any(self.footprint[:, 1] <= self.footprint[:, 0]):
            raise ValueError("footprint box is empty")
        self.resolution = int(self.resolution)
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")
        corners = np.stack(np.meshgrid(*self.footprint, indexing="ij"), axis=-1)
        if np.any(np.linalg.norm(corners.reshape(-1, self.chart.dim - 1), axis=1)
                  > self.chart.radius):
            raise ValueError("footprint leaves the projected chart ball")


@dataclass
class QuadratureResult:
    value: float
    resolution: int
    estimated_error: float

    def __post_init__(self):
        self.estimated_error = abs(float(self.estimated_error))


def _midpoint_axes(box, res):
    """Cell centers and widths for a box at ``res`` cells per axis."""
    box = np.atleast_2d(box)
    centers, widths = [], []
    for lo, hi in box:
        w = (hi - lo) / res
        centers.append(lo + (np.arange(res) + 0.5) * w)
        widths.append(w)
    return centers, widths


def _mesh_points(centers):
    mesh = np.meshgrid(*centers, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def _surface_value(g, patch, res):
    chart = patch.chart
    centers, widths = _midpoint_axes(patch.footprint, res)
    cellvol = float(np.prod(widths))
    xp = _mesh_points(centers)
    gamma = chart.graph(xp)
    af = area_factor(chart.graph, xp, h=min(widths) / 4.0)
    world = chart.to_world(np.column_stack([xp, gamma]))
    vals = np.asarray(g(world), dtype=float)
    return float(np.sum(vals * af) * cellvol)


def surface_integral(g, patch):
    """Flat-side realization of the surface integral over the graph patch.

    Computes the midpoint value of  integral g(x', gamma(x')) * sqrt(1+|Dgamma|^2) dx'
    over the footprint: the graph map is injective, so the sum over each fiber
    in the area formula is the single sample at that point.
    """
    value = _surface_value(g, patch, patch.resolution)
    coarse = _surface_value(g, patch, max(2, patch.resolution // 2))
    return QuadratureResult(value=value, resolution=patch.resolution,
                            estimated_error=value - coarse)


def _flat_side_value(g, chart, slab, res):
    centers, widths = _midpoint_axes(slab, res)
    cellvol = float(np.prod(widths))
    x = _mesh_points(centers)
    y = x.copy()
    y[:, -1] -= chart.graph(x[:, :-1])
    vals = np.asarray(g(y), dtype=float)
    return float(np.sum(vals) * cellvol)


def _image_side_value(g, chart, slab, res):
    """Quadrature over F(slab) on an independent axis-aligned tiling.

    Columns over the horizontal footprint keep their exact sheared bounds;
    the vertical axis is cut by a global uniform grid with exact partial-cell
    overlap weights, so the tiling never references the flat-side nodes.
    """
    slab = np.atleast_2d(slab)
    centers, widths = _midpoint_axes(slab[:-1], res)
    col_area = float(np.prod(widths))
    yp = _mesh_points(centers)
    gamma = chart.graph(yp)
    lo = slab[-1, 0] - gamma
    hi = slab[-1, 1] - gamma
    v0, v1 = float(np.min(lo)), float(np.max(hi))
    edges = np.linspace(v0, v1, res + 1)
    total = 0.0
    for j in range(res):
        ov_lo = np.maximum(edges[j], lo)
        ov_hi = np.minimum(edges[j + 1], hi)
        w = np.maximum(0.0, ov_hi - ov_lo)
        sel = w > 0
        if not np.any(sel):
            continue
        mids = 0.5 * (ov_lo[sel] + ov_hi[sel])
        pts = np.column_stack([yp[sel], mids])
        vals = np.asarray(g(pts), dtype=float)
        total += float(np.sum(vals * w[sel]))
    return total * col_area


def flat_change_of_variables_check(g, chart, slab, resolution):
    """Evaluate integral of g∘F over a slab and of g over F(slab), independently.

    The flattening has unit Jacobian a.e., so the two values agree up to
    quadrature error.  The slab is a box in chart-local pre-flattening
    coordinates and must sit inside the chart ball.
    """
    slab = np.atleast_2d(np.asarray(slab, dtype=float))
    if slab.shape != (chart.dim, 2):
        raise ValueError("slab must give (lo, hi) per axis")
    corners = np.stack(np.meshgrid(*slab, indexing="ij"), axis=-1).reshape(-1, chart.dim)
    if np.any(np.linalg.norm(corners, axis=1) > chart.radius):
        raise ValueError("slab leaves the chart ball")
    res = int(resolution)
    half = max(2, res // 2)
    flat_fine = _flat_side_value(g, chart, slab, res)
    image_fine = _image_side_value(g, chart, slab, res)
    flat = QuadratureResult(
        value=flat_fine, resolution=res,
        estimated_error=flat_fine - _flat_side_value(g, chart, slab, half))
    image = QuadratureResult(
        value=image_fine, resolution=res,
        estimated_error=image_fine - _image_side_value(g, chart, slab, half))
    return flat, image


def box_quadrature(g, box, resolution):
    """Plain midpoint quadrature over a box, row-major fixed-order sum."""
    centers, widths = _midpoint_axes(box, int(resolution))
    cellvol = float(np.prod(widths))
    pts = _mesh_points(centers)
    vals = np.asarray(g(pts), dtype=float)
    return float(np.sum(vals) * cellvol)


def slice_integral(g, box, axis, resolution):
    """Iterated quadrature: 1-D midpoint along ``axis`` fibers, then the rest.

    The projection map dropping ``axis`` has unit Jacobian, so this equals the
    full-box quadrature up to floating-point regrouping (same nodes, same cell
    volumes, different summation nesting).
    """
    box = np.atleast_2d(np.asarray(box, dtype=float))
    d = box.shape[0]
    axis = int(axis)
    if not 0 <= axis < d:
        raise ValueError("axis out of range")
    res = int(resolution)
    centers, widths = _midpoint_axes(box, res)
    cellvol = float(np.prod(widths))
    mesh = np.meshgrid(*centers, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = np.asarray(g(pts), dtype=float).reshape([res] * d)
    fiber = np.sum(vals, axis=axis) * widths[axis]
    outer_area = cellvol / widths[axis]
    return float(np.sum(fiber) * outer_area)
