"""Grid functions on a Lipschitz domain: sampling, FD gradients, L^p / W^{1,p} norms.

Nodes sit at cell centers of a uniform grid covering the domain's bounding
box; only nodes with inside_mask set carry values.  Norms use the node-sum
times h^d rule masked to inside nodes (cut cells are not specially weighted),
and gradients fall back to one-sided differences where a neighbor is outside
so the stencil never leaves the domain.

Node loops are vectorized but reductions stay fixed-order, so results are
bit-stable across runs.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ChartUnresolved, IsolatedNode

_MAGIC = b"TFGF"
_FORMAT_VERSION = 1


@dataclass(eq=False)
class DomainGrid:
    """Uniform cell-centered grid with an inside mask.

    Attributes
    ----------
    origin : (d,) array, lower corner of the covered box
    h : float, spacing (same along every axis)
    dims : tuple of cells per axis
    mask : bool array of shape ``dims``, True at inside nodes
    """

    origin: np.ndarray
    h: float
    dims: tuple
    mask: np.ndarray

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.dims = tuple(int(n) for n in self.dims)
        self.h = float(self.h)
        if self.h <= 0:
            raise ValueError("grid spacing must be positive")
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.dims:
            raise ValueError("mask shape does not match dims")
        if not np.any(self.mask):
            raise ValueError("grid has no inside node")

    @classmethod
    def from_domain(cls, domain, resolution):
        """Cover the domain bbox with ``resolution`` cells along its longest axis."""
        lo, hi = domain.bbox
        extent = hi - lo
        h = float(np.max(extent)) / int(resolution)
        dims = tuple(int(np.ceil(e / h - 1e-12)) for e in extent)
        grid = cls(origin=lo, h=h, dims=dims, mask=np.ones(dims, dtype=bool))
        grid.mask = domain.indicator(grid.nodes()).reshape(dims)
        if not np.any(grid.mask):
            raise ValueError("no grid node inside the domain at this resolution")
        return grid

    @property
    def dim(self):
        return len(self.dims)

    @property
    def cell_volume(self):
        return self.h ** self.dim

    def axes(self):
        return [self.origin[a] + (np.arange(self.dims[a]) + 0.5) * self.h
                for a in range(self.dim)]

    def nodes(self):
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def inside_nodes(self):
        return self.nodes()[self.mask.ravel()]

    def compatible(self, other):
        return (self.dims == other.dims and self.h == other.h
                and np.array_equal(self.origin, other.origin)
                and np.array_equal(self.mask, other.mask))


@dataclass(eq=False)
class GridFunction:
    """Values on the inside nodes of a DomainGrid, with the exponent p as metadata.

    Outside entries of ``values`` are kept at zero; they have no meaning.
    """

    grid: DomainGrid
    values: np.ndarray
    p: float | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.dims:
            raise ValueError("values shape does not match grid dims")
        if not np.all(np.isfinite(self.values[self.grid.mask])):
            raise ValueError("grid function has non-finite inside values")
        self.values = np.where(self.grid.mask, self.values, 0.0)

    def _merge_p(self, other):
        if self.p is not None and other.p is not None and self.p != other.p:
            raise ValueError(f"mixed exponents p={self.p} and p={other.p}")
        return self.p if self.p is not None else other.p

    def _check_same_grid(self, other):
        if self.grid is not other.grid and not self.grid.compatible(other.grid):
            raise ValueError("grid functions live on different grids")

    def __add__(self, other):
        self._check_same_grid(other)
        return GridFunction(self.grid, self.values + other.values, p=self._merge_p(other))

    def __sub__(self, other):
        self._check_same_grid(other)
        return GridFunction(self.grid, self.values - other.values, p=self._merge_p(other))

    def __mul__(self, alpha):
        return GridFunction(self.grid, self.values * float(alpha), p=self.p)

    __rmul__ = __mul__

    def copy(self):
        return GridFunction(self.grid, self.values.copy(), p=self.p)


@dataclass(eq=False)
class VectorGridFunction:
    """One GridFunction-like component per axis (the FD gradient carrier)."""

    grid: DomainGrid
    components: np.ndarray  # shape (d,) + dims

    def magnitude(self):
        mag = np.sqrt(np.sum(self.components * self.components, axis=0))
        return GridFunction(self.grid, mag)

    def component(self, axis):
        return GridFunction(self.grid, self.components[axis])


def sample(f, grid, p=None):
    """Evaluate a closed-form field at the inside nodes.

    ``f`` maps an (n, d) point array to (n,) values.
    """
    vals = np.zeros(grid.dims)
    nodes = grid.nodes()
    inside = grid.mask.ravel()
    out = np.asarray(f(nodes[inside]), dtype=float)
    if not np.all(np.isfinite(out)):
        raise ValueError("sampled field is not finite on inside nodes")
    vals.ravel()[np.where(inside)[0]] = out
    return GridFunction(grid, vals, p=p)


def _shifted_mask(mask, axis, step):
    """Mask of nodes whose neighbor at ``step`` along ``axis`` is inside."""
    out = np.zeros_like(mask)
    src = [slice(None)] * mask.ndim
    dst = [slice(None)] * mask.ndim
    if step > 0:
        src[axis] = slice(1, None)
        dst[axis] = slice(0, -1)
    else:
        src[axis] = slice(0, -1)
        dst[axis] = slice(1, None)
    out[tuple(dst)] = mask[tuple(src)]
    return out


def _shift_values(values, axis, step):
    out = np.zeros_like(values)
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    if step > 0:
        src[axis] = slice(1, None)
        dst[axis] = slice(0, -1)
    else:
        src[axis] = slice(0, -1)
        dst[axis] = slice(1, None)
    out[tuple(dst)] = values[tuple(src)]
    return out


def gradient_fd(u):
    """Finite-difference gradient: central inside, one-sided at the mask edge.

    Raises IsolatedNode if some inside node has no inside neighbor along an
    axis (the grid is too coarse for the domain there).
    """
    grid = u.grid
    mask = grid.mask
    comps = np.zeros((grid.dim,) + grid.dims)
    for ax in range(grid.dim):
        has_plus = _shifted_mask(mask, ax, +1) & mask
        has_minus = _shifted_mask(mask, ax, -1) & mask
        isolated = mask & ~has_plus & ~has_minus
        if np.any(isolated):
            where = np.argwhere(isolated)[0]
            raise IsolatedNode(
                f"node {tuple(int(i) for i in where)} has no inside neighbor along axis {ax}")
        v_plus = _shift_values(u.values, ax, +1)
        v_minus = _shift_values(u.values, ax, -1)
        central = has_plus & has_minus
        fwd = has_plus & ~has_minus
        bwd = has_minus & ~has_plus
        g = np.zeros(grid.dims)
        g[central] = (v_plus[central] - v_minus[central]) / (2.0 * grid.h)
        g[fwd] = (v_plus[fwd] - u.values[fwd]) / grid.h
        g[bwd] = (u.values[bwd] - v_minus[bwd]) / grid.h
        comps[ax] = g
    return VectorGridFunction(grid, comps)


def _validate_p(u, p):
    p = float(p)
    if not (1.0 <= p < np.inf):
        raise ValueError("p must satisfy 1 <= p < infinity")
    if u.p is not None and u.p != p:
        raise ValueError(f"grid function carries p={u.p}, asked for p={p}")
    return p


def lp_norm(u, p):
    """(sum |u_i|^p h^d)^{1/p} over inside nodes, fixed-order summation."""
    p = _validate_p(u, p)
    total = np.sum(np.abs(u.values[u.grid.mask]) ** p)
    return float((total * u.grid.cell_volume) ** (1.0 / p))


def w1p_norm(u, p):
    """(||u||_p^p + || |grad u| ||_p^p)^{1/p} with the FD gradient."""
    p = _validate_p(u, p)
    mag = gradient_fd(u).magnitude()
    return float((lp_norm(u, p) ** p + lp_norm(mag, p) ** p) ** (1.0 / p))


def interpolate(u, points, allow_unresolved=False):
    """Multilinear interpolation from inside nodes.

    Stencil corners outside the domain are dropped and the weights
    renormalized; a point whose whole 2^d stencil is outside raises
    ChartUnresolved (or returns NaN when ``allow_unresolved``).
    """
    grid = u.grid
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    t = (pts - grid.origin[None, :]) / grid.h - 0.5
    i0 = np.floor(t).astype(int)
    for ax in range(grid.dim):
        i0[:, ax] = np.clip(i0[:, ax], 0, grid.dims[ax] - 2)
    frac = t - i0
    num = np.zeros(len(pts))
    den = np.zeros(len(pts))
    flat_vals = u.values.ravel()
    flat_mask = grid.mask.ravel()
    strides = np.array([int(np.prod(grid.dims[a + 1:])) for a in range(grid.dim)])
    base = i0 @ strides
    for corner in np.ndindex(*(2,) * grid.dim):
        off = np.array(corner)
        idx = base + off @ strides
        w = np.prod(np.where(off[None, :] == 1, frac, 1.0 - frac), axis=1)
        inside = flat_mask[idx]
        num += np.where(inside, w * flat_vals[idx], 0.0)
        den += np.where(inside, w, 0.0)
    bad = den <= 0.0
    if np.any(bad):
        if not allow_unresolved:
            raise ChartUnresolved(
                f"{int(np.sum(bad))} interpolation stencils have no inside node")
        out = np.full(len(pts), np.nan)
        ok = ~bad
        out[ok] = num[ok] / den[ok]
        return out
    return num / den


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def to_bytes(u):
    """Flat binary layout: header (version, d, dims, h, origin), row-major
    float64 node values, then the inside mask packed as a bit array."""
    grid = u.grid
    head = bytearray()
    head += _MAGIC
    head += struct.pack("<HH", _FORMAT_VERSION, grid.dim)
    head += struct.pack(f"<{grid.dim}q", *grid.dims)
    head += struct.pack("<d", grid.h)
    head += struct.pack(f"<{grid.dim}d", *grid.origin)
    body = u.values.astype("<f8").tobytes(order="C")
    bits = np.packbits(grid.mask.ravel(order="C")).tobytes()
    return bytes(head) + body + bits


def from_bytes(blob):
    if blob[:4] != _MAGIC:
        raise ValueError("not a grid-function blob")
    off = 4
    version, d = struct.unpack_from("<HH", blob, off)
    if version != _FORMAT_VERSION:
        raise ValueError(f"unsupported format version {version}")
    off += 4
    dims = struct.unpack_from(f"<{d}q", blob, off)
    off += 8 * d
    (h,) = struct.unpack_from("<d", blob, off)
    off += 8
    origin = np.array(struct.unpack_from(f"<{d}d", blob, off))
    off += 8 * d
    n = int(np.prod(dims))
    values = np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(dims).copy()
    off += 8 * n
    nbytes = (n + 7) // 8
    bits = np.frombuffer(blob, dtype=np.uint8, count=nbytes, offset=off)
    mask = np.unpackbits(bits, count=n).astype(bool).reshape(dims)
    grid = DomainGrid(origin=origin, h=h, dims=dims, mask=mask)
    return GridFunction(grid, values)


def dump_csv(u, path):
    """Inspection dump: one row per inside node, coordinates then value."""
    grid = u.grid
    nodes = grid.nodes()[grid.mask.ravel()]
    vals = u.values[grid.mask]
    with open(path, "w") as fh:
        fh.write(",".join(f"x{a + 1}" for a in range(grid.dim)) + ",value\n")
        for row, v in zip(nodes, vals):
            fh.write(",".join(repr(float(c)) for c in row) + f",{float(v)!r}\n")
