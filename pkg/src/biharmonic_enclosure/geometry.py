"""Discrete geometry: domains, obstacle shapes, tensor grids, boundary data.

The computational domain is either a box (grid-aligned, geometry exact) or a
ball (staircase classification, analytic normals).  Obstacles are volumetric
shapes strictly contained in the domain; they only enter through their
characteristic function and their log-distance support values.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

EXTERIOR, INTERIOR, BOUNDARY = 0, 1, 2

_NORM_TOL = 1e-12


class GeometryError(ValueError):
    """Raised for invalid domain, shape, or probe configurations."""


# ---------------------------------------------------------------------------
# domain specifications
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box; the grid covers it exactly."""

    bounds: tuple  # ((lo, hi), ...) per axis

    def __post_init__(self):
        b = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        object.__setattr__(self, "bounds", b)
        if not all(hi > lo for lo, hi in b):
            raise GeometryError(f"degenerate box bounds {b}")

    @property
    def dim(self) -> int:
        return len(self.bounds)

    @property
    def center(self) -> np.ndarray:
        return np.array([(lo + hi) / 2 for lo, hi in self.bounds])

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm([hi - lo for lo, hi in self.bounds]))

    def bounding_box(self):
        return self.bounds

    def contains_hull(self, x: np.ndarray) -> bool:
        return all(lo <= xi <= hi for xi, (lo, hi) in zip(x, self.bounds))

    def hull_distance(self, x: np.ndarray) -> float:
        """Euclidean distance from x to the convex hull (0 if inside)."""
        d = np.maximum(np.array([lo for lo, _ in self.bounds]) - x, 0.0)
        d = np.maximum(d, x - np.array([hi for _, hi in self.bounds]))
        return float(np.linalg.norm(np.maximum(d, 0.0)))

    def surface_measure(self) -> float:
        sides = np.array([hi - lo for lo, hi in self.bounds])
        if self.dim == 2:
            return float(2 * sides.sum())
        total = 0.0
        for k in range(self.dim):
            face = np.prod(np.delete(sides, k))
            total += 2 * face
        return float(total)


@dataclass(frozen=True)
class BallDomain:
    """Ball domain; discretized with a staircase boundary, analytic normals."""

    center: tuple
    radius: float
    bbox: tuple | None = None  # optional explicit bounding box

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius <= 0:
            raise GeometryError("ball radius must be positive")
        if self.bbox is not None:
            bb = tuple((float(lo), float(hi)) for lo, hi in self.bbox)
            object.__setattr__(self, "bbox", bb)
            for c, (lo, hi) in zip(self.center, bb):
                if not (lo < c - self.radius and c + self.radius < hi):
                    raise GeometryError(
                        "ball domain not strictly inside the bounding box"
                    )

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    def bounding_box(self):
        if self.bbox is not None:
            return self.bbox
        pad = 0.5 * self.radius
        return tuple(
            (c - self.radius - pad, c + self.radius + pad) for c in self.center
        )

    def contains_hull(self, x: np.ndarray) -> bool:
        return float(np.linalg.norm(np.asarray(x) - np.array(self.center))) <= self.radius

    def hull_distance(self, x: np.ndarray) -> float:
        r = float(np.linalg.norm(np.asarray(x) - np.array(self.center)))
        return max(r - self.radius, 0.0)

    def surface_measure(self) -> float:
        n, R = self.dim, self.radius
        if n == 2:
            return 2 * np.pi * R
        return 4 * np.pi * R**2


# ---------------------------------------------------------------------------
# obstacle shapes
# ---------------------------------------------------------------------------

class ObstacleShape:
    """Volumetric obstacle; closed set convention (boundary points belong)."""

    dim: int

    def chi(self, x: np.ndarray) -> np.ndarray:
        """Indicator at points x of shape (..., dim); returns 0/1 floats."""
        raise NotImplementedError

    def support_log_distance(self, x0: np.ndarray) -> float:
        """inf over the shape of log|x - x0|."""
        raise NotImplementedError

    def boundary_points(self, n: int, seed: int = 0) -> np.ndarray:
        """Sample points on the shape boundary (for scoring/oracles)."""
        raise NotImplementedError


@dataclass(frozen=True)
class BallShape(ObstacleShape):
    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if self.radius <= 0:
            raise GeometryError("obstacle ball radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    def chi(self, x):
        x = np.asarray(x, float)
        r = np.linalg.norm(x - np.array(self.center), axis=-1)
        return (r <= self.radius).astype(float)

    def support_log_distance(self, x0):
        d = float(np.linalg.norm(np.asarray(x0, float) - np.array(self.center)))
        if d <= self.radius:
            raise GeometryError("probe point inside the obstacle")
        return float(np.log(d - self.radius))

    def boundary_points(self, n, seed=0):
        rng = np.random.default_rng(seed)
        v = rng.normal(size=(n, self.dim))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return np.array(self.center) + self.radius * v


@dataclass(frozen=True)
class EllipsoidShape(ObstacleShape):
    center: tuple
    semi_axes: tuple

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "semi_axes", tuple(float(a) for a in self.semi_axes))
        if any(a <= 0 for a in self.semi_axes):
            raise GeometryError("ellipsoid semi-axes must be positive")
        if len(self.center) != len(self.semi_axes):
            raise GeometryError("center/semi-axes dimension mismatch")

    @property
    def dim(self) -> int:
        return len(self.center)

    def chi(self, x):
        x = np.asarray(x, float)
        q = (x - np.array(self.center)) / np.array(self.semi_axes)
        return (np.sum(q * q, axis=-1) <= 1.0).astype(float)

    def support_log_distance(self, x0):
        # no closed form; dense boundary sampling
        pts = self.boundary_points(20000, seed=7)
        d = np.linalg.norm(pts - np.asarray(x0, float), axis=1)
        return float(np.log(d.min()))

    def boundary_points(self, n, seed=0):
        rng = np.random.default_rng(seed)
        v = rng.normal(size=(n, self.dim))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return np.array(self.center) + v * np.array(self.semi_axes)


@dataclass(frozen=True)
class UnionShape(ObstacleShape):
    parts: tuple  # tuple of ObstacleShape

    def __post_init__(self):
        object.__setattr__(self, "parts", tuple(self.parts))
        if not self.parts:
            raise GeometryError("empty union shape")
        dims = {p.dim for p in self.parts}
        if len(dims) != 1:
            raise GeometryError("mixed dimensions in union shape")

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    def chi(self, x):
        out = self.parts[0].chi(x)
        for p in self.parts[1:]:
            out = np.maximum(out, p.chi(x))
        return out

    def support_log_distance(self, x0):
        return min(p.support_log_distance(x0) for p in self.parts)

    def boundary_points(self, n, seed=0):
        k = max(1, n // len(self.parts))
        pts = [p.boundary_points(k, seed=seed + i) for i, p in enumerate(self.parts)]
        return np.concatenate(pts, axis=0)


@dataclass(frozen=True)
class SampledShape(ObstacleShape):
    """Signed-distance samples on a node lattice; inside where sdf <= 0."""

    origin: tuple
    spacing: tuple
    sdf: np.ndarray = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return self.sdf.ndim

    def _interp(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        rel = (x - np.array(self.origin)) / np.array(self.spacing)
        idx = np.clip(np.round(rel).astype(int), 0, np.array(self.sdf.shape) - 1)
        return self.sdf[tuple(idx.T)]

    def chi(self, x):
        x = np.asarray(x, float)
        vals = self._interp(x.reshape(-1, self.dim)) <= 0.0
        return vals.astype(float).reshape(x.shape[:-1])

    def _inside_nodes(self):
        idx = np.argwhere(self.sdf <= 0.0)
        return np.array(self.origin) + idx * np.array(self.spacing)

    def support_log_distance(self, x0):
        pts = self._inside_nodes()
        if pts.size == 0:
            raise GeometryError("sampled shape has no interior nodes")
        d = np.linalg.norm(pts - np.asarray(x0, float), axis=1)
        return float(np.log(d.min()))

    def boundary_points(self, n, seed=0):
        pts = self._inside_nodes()
        rng = np.random.default_rng(seed)
        take = rng.choice(len(pts), size=min(n, len(pts)), replace=False)
        return pts[take]


def brute_force_log_distance(shape: ObstacleShape, x0, n: int = 200000) -> float:
    """Independent h_D oracle: min of log|x - x0| over dense boundary samples."""
    pts = shape.boundary_points(n, seed=123)
    d = np.linalg.norm(pts - np.asarray(x0, float), axis=1)
    return float(np.log(d.min()))


# ---------------------------------------------------------------------------
# grid
# ---------------------------------------------------------------------------

@dataclass
class Grid:
    """Regular tensor grid with node classification and boundary data.

    Nodes sit at ``origin + index * spacing``.  Boundary nodes carry a unit
    outward normal taken from the analytic domain description and a surface
    quadrature weight; interior nodes never have exterior axis neighbors.
    """

    domain: object
    origin: np.ndarray
    spacing: np.ndarray
    counts: tuple
    classification: np.ndarray      # int8 array of EXTERIOR/INTERIOR/BOUNDARY
    boundary_idx: np.ndarray        # flat indices, canonical (sorted) order
    boundary_normals: np.ndarray    # (Nb, dim)
    boundary_weights: np.ndarray    # (Nb,)

    @property
    def dim(self) -> int:
        return len(self.counts)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.counts))

    @property
    def interior_idx(self) -> np.ndarray:
        if not hasattr(self, "_interior_idx"):
            flat = self.classification.reshape(-1)
            self._interior_idx = np.flatnonzero(flat == INTERIOR)
        return self._interior_idx

    @property
    def nonexterior_idx(self) -> np.ndarray:
        if not hasattr(self, "_nonext_idx"):
            flat = self.classification.reshape(-1)
            self._nonext_idx = np.flatnonzero(flat != EXTERIOR)
        return self._nonext_idx

    def node_coords(self, flat_idx=None) -> np.ndarray:
        """Coordinates of the requested flat node indices (all if None)."""
        if flat_idx is None:
            flat_idx = np.arange(self.n_nodes)
        multi = np.unravel_index(np.asarray(flat_idx), self.counts)
        return self.origin + np.stack(multi, axis=-1) * self.spacing

    @property
    def boundary_coords(self) -> np.ndarray:
        if not hasattr(self, "_bcoords"):
            self._bcoords = self.node_coords(self.boundary_idx)
        return self._bcoords

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def header(self) -> dict:
        """Small JSON header for flat-binary export."""
        return {
            "dim": self.dim,
            "origin": self.origin.tolist(),
            "spacing": self.spacing.tolist(),
            "counts": list(self.counts),
        }


def _box_classification(counts):
    cls = np.full(counts, INTERIOR, dtype=np.int8)
    for ax in range(len(counts)):
        sl = [slice(None)] * len(counts)
        sl[ax] = 0
        cls[tuple(sl)] = BOUNDARY
        sl[ax] = -1
        cls[tuple(sl)] = BOUNDARY
    return cls


def _box_boundary_data(domain: BoxDomain, coords, spacing):
    """Normals and trapezoidal surface weights for box boundary nodes."""
    lo = np.array([b[0] for b in domain.bounds])
    hi = np.array([b[1] for b in domain.bounds])
    dim = len(lo)
    on_lo = np.isclose(coords, lo, atol=1e-9 * spacing.min())
    on_hi = np.isclose(coords, hi, atol=1e-9 * spacing.min())
    normals = np.zeros_like(coords)
    normals -= on_lo.astype(float)
    normals += on_hi.astype(float)
    norms = np.linalg.norm(normals, axis=1, keepdims=True)
    normals /= norms
    # each face contributes a trapezoidal weight; a node on k faces sums k
    # face-weights, each halved once per tangential face-edge it sits on
    weights = np.zeros(len(coords))
    for ax in range(dim):
        for face in (on_lo[:, ax], on_hi[:, ax]):
            w = np.where(face, np.prod(np.delete(spacing, ax)), 0.0)
            for tax in range(dim):
                if tax == ax:
                    continue
                edge = on_lo[:, tax] | on_hi[:, tax]
                w = np.where(face & edge, w / 2.0, w)
            weights += w
    return normals, weights


def _plane_cell_area(nu, offset, sides):
    """Area of the plane {nu . (x - cell_center) = offset} inside a box cell.

    Exact polytope cross-section via the ramp-power formula; used as a
    second-order surface element for smooth staircase boundaries.
    """
    nu = np.asarray(nu, float)
    sides = np.asarray(sides, float)
    m = sides * nu
    mnorm = float(np.linalg.norm(m))
    if mnorm == 0.0:
        return 0.0
    scale = float(np.prod(sides)) / mnorm
    a = np.abs(m) / mnorm
    t = offset / mnorm + 0.5 * a.sum()
    live = a > 1e-9
    k = int(live.sum())
    if k == 0:
        return 0.0
    al = a[live]
    if k == 1:
        return scale if 0.0 <= t <= al.sum() else 0.0
    total = 0.0
    if k == 2:
        for v in range(4):
            arg = t - al[0] * (v & 1) - al[1] * ((v >> 1) & 1)
            if arg > 0:
                total += (-1) ** bin(v).count("1") * arg
        return max(total / (al[0] * al[1]), 0.0) * scale
    for v in range(8):
        arg = t - al[0] * (v & 1) - al[1] * ((v >> 1) & 1) - al[2] * ((v >> 2) & 1)
        if arg > 0:
            total += (-1) ** bin(v).count("1") * arg * arg
    return max(total / (2.0 * al[0] * al[1] * al[2]), 0.0) * scale


def _ball_classification(domain: BallDomain, origin, spacing, counts):
    """Band classification: boundary nodes are those whose dual cell can
    intersect the sphere; interior lies strictly inside the band."""
    axes = [origin[k] + spacing[k] * np.arange(counts[k]) for k in range(len(counts))]
    mesh = np.meshgrid(*axes, indexing="ij")
    r = np.sqrt(sum((m - c) ** 2 for m, c in zip(mesh, domain.center)))
    half_diag = 0.5 * float(np.linalg.norm(spacing))
    d = r - domain.radius
    cls = np.full(counts, EXTERIOR, dtype=np.int8)
    cls[d < -half_diag] = INTERIOR
    cls[np.abs(d) <= half_diag + 1e-12 * domain.radius] = BOUNDARY
    return cls


def _ball_boundary_data(domain: BallDomain, boundary_idx, coords, spacing):
    """Analytic sphere normals; weights from tangent-plane/dual-cell clipping."""
    center = np.array(domain.center)
    rel = coords - center
    r = np.linalg.norm(rel, axis=1)
    normals = rel / r[:, None]
    d = r - domain.radius  # signed distance, positive outside
    weights = np.array([
        _plane_cell_area(nu, -di, spacing) for nu, di in zip(normals, d)
    ])
    return normals, weights


def build_grid(domain, resolution) -> Grid:
    """Build the tensor grid for a box or ball domain.

    ``resolution`` is the node count per axis (scalar or sequence); at least
    8 nodes per axis are required.
    """
    if isinstance(resolution, (int, np.integer)):
        res = (int(resolution),) * domain.dim
    else:
        res = tuple(int(r) for r in resolution)
    if len(res) != domain.dim:
        raise GeometryError("resolution rank does not match domain dimension")
    if any(r < 8 for r in res):
        raise GeometryError(f"resolution {res} below the minimum of 8 nodes per axis")
    if domain.dim not in (2, 3):
        raise GeometryError("only dim 2 and 3 are supported")

    bbox = domain.bounding_box()
    origin = np.array([b[0] for b in bbox])
    spacing = np.array([(b[1] - b[0]) / (r - 1) for b, r in zip(bbox, res)])

    if isinstance(domain, BoxDomain):
        cls = _box_classification(res)
        boundary_idx = np.flatnonzero(cls.reshape(-1) == BOUNDARY)
        coords = origin + np.stack(np.unravel_index(boundary_idx, res), axis=-1) * spacing
        normals, weights = _box_boundary_data(domain, coords, spacing)
    elif isinstance(domain, BallDomain):
        cls = _ball_classification(domain, origin, spacing, res)
        boundary_idx = np.flatnonzero(cls.reshape(-1) == BOUNDARY)
        coords = origin + np.stack(np.unravel_index(boundary_idx, res), axis=-1) * spacing
        normals, weights = _ball_boundary_data(domain, boundary_idx, coords, spacing)
    else:
        raise GeometryError(f"unsupported domain type {type(domain).__name__}")

    grid = Grid(
        domain=domain,
        origin=origin,
        spacing=spacing,
        counts=res,
        classification=cls,
        boundary_idx=boundary_idx,
        boundary_normals=normals,
        boundary_weights=weights,
    )
    _check_grid(grid)
    return grid


def _check_grid(grid: Grid):
    norms = np.linalg.norm(grid.boundary_normals, axis=1)
    if not np.allclose(norms, 1.0, atol=_NORM_TOL):
        raise GeometryError("boundary normals are not unit length")
    flat = grid.classification.reshape(-1)
    interior = grid.interior_idx
    multi = np.stack(np.unravel_index(interior, grid.counts), axis=-1)
    for ax in range(grid.dim):
        for step in (-1, 1):
            nb = multi.copy()
            nb[:, ax] += step
            if (nb[:, ax] < 0).any() or (nb[:, ax] >= grid.counts[ax]).any():
                raise GeometryError("interior node on the lattice edge")
            flat_nb = np.ravel_multi_index(tuple(nb.T), grid.counts)
            if (flat[flat_nb] == EXTERIOR).any():
                raise GeometryError("interior node with exterior axis neighbor")


def chi_D(x, shape: ObstacleShape):
    """Obstacle indicator at x; 1 on the closed shape, 0 outside."""
    return shape.chi(x)


def support_log_distance(shape: ObstacleShape, x0, domain=None) -> float:
    """Log-distance support value h_D(x0) = inf over the shape of log|x - x0|.

    The probe x0 must lie outside the convex hull of the domain when one is
    supplied.
    """
    x0 = np.asarray(x0, float)
    if domain is not None and domain.contains_hull(x0):
        raise GeometryError("probe point lies inside the domain hull")
    return shape.support_log_distance(x0)


def shape_inside_domain(shape: ObstacleShape, grid: Grid, margin_cells: int = 2) -> bool:
    """Check D subset of the domain with a positive margin (by node sampling)."""
    coords = grid.node_coords()
    inside_D = shape.chi(coords.reshape(*grid.counts, grid.dim)) > 0.5
    flat = grid.classification.reshape(grid.counts)
    if not inside_D.any():
        return True
    if (flat[inside_D] == EXTERIOR).any() or (flat[inside_D] == BOUNDARY).any():
        return False
    # margin: dilate D by margin_cells and require it stays non-boundary
    grown = inside_D.copy()
    for _ in range(margin_cells):
        nxt = grown.copy()
        for ax in range(grid.dim):
            nxt |= np.roll(grown, 1, axis=ax)
            nxt |= np.roll(grown, -1, axis=ax)
        grown = nxt
    return not (flat[grown] != INTERIOR).any()


def omega_complement_connected(shape: ObstacleShape, grid: Grid) -> bool:
    """Flood-fill check that the domain minus the obstacle stays connected."""
    coords = grid.node_coords().reshape(*grid.counts, grid.dim)
    free = (grid.classification != EXTERIOR) & (shape.chi(coords) < 0.5)
    seeds = np.argwhere(free)
    if len(seeds) == 0:
        return False
    visited = np.zeros_like(free)
    stack = [tuple(seeds[0])]
    visited[tuple(seeds[0])] = True
    while stack:
        node = stack.pop()
        for ax in range(grid.dim):
            for step in (-1, 1):
                nb = list(node)
                nb[ax] += step
                if not (0 <= nb[ax] < grid.counts[ax]):
                    continue
                nb = tuple(nb)
                if free[nb] and not visited[nb]:
                    visited[nb] = True
                    stack.append(nb)
    return bool((visited == free).all())
