"""Sampling designs, polar images, the shape library and the Lebesgue metric.

Images live on ``T = [-1/2, 1/2]^2`` with the reference point at the origin.
A star-shaped region is described by its radius function ``gamma(omega)``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TWO_PI = 2.0 * math.pi
CORNER_RADIUS = math.sqrt(2.0) / 2.0
MIN_RADIUS = 1e-3


class GeometryError(ValueError):
    pass


# ---------------------------------------------------------------------------
# designs and polar coordinates


def generate_design(design: str, size: int, seed) -> np.ndarray:
    """Pixel locations on ``T`` as an ``(n, 2)`` array.

    ``design="jittered"`` draws one uniform point in each cell of an
    ``size x size`` grid (row-major, x fastest); ``design="random"`` draws
    ``size`` i.i.d. uniform points.
    """
    rng = np.random.default_rng(seed)
    if design == "jittered":
        m = int(size)
        if m < 2:
            raise GeometryError("jittered design needs m >= 2")
        jj, ii = np.meshgrid(np.arange(m), np.arange(m))
        cells = np.column_stack([jj.ravel(), ii.ravel()]).astype(float)
        return (cells + rng.uniform(size=cells.shape)) / m - 0.5
    if design == "random":
        n = int(size)
        if n < 1:
            raise GeometryError("random design needs n >= 1")
        return rng.uniform(-0.5, 0.5, size=(n, 2))
    raise GeometryError(f"unknown design {design!r}")


def to_polar(x, y):
    """``(omega, r)`` with ``omega`` in ``[0, 2 pi)``; the origin maps to ``(0, 0)``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    omega = np.mod(np.arctan2(y, x), TWO_PI)
    # mod can round a tiny negative angle up to exactly 2 pi
    omega = np.where(omega >= TWO_PI, 0.0, omega)
    r = np.hypot(x, y)
    if omega.ndim == 0:
        return float(omega), float(r)
    return omega, r


def max_radius(omega):
    """Distance from the origin to the boundary of ``T`` along ``omega``."""
    omega = np.asarray(omega, dtype=float)
    return 0.5 / np.maximum(np.abs(np.cos(omega)), np.abs(np.sin(omega)))


@dataclass(frozen=True)
class PolarImage:
    omega: np.ndarray
    r: np.ndarray
    y: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (len(self.omega) == len(self.r) == len(self.y)):
            raise GeometryError("omega, r and y must have equal length")
        if len(self.omega) == 0:
            raise GeometryError("image has no pixels")

    @property
    def n(self) -> int:
        return len(self.y)

    @classmethod
    def from_cartesian(cls, xy, y, meta=None) -> "PolarImage":
        omega, r = to_polar(xy[:, 0], xy[:, 1])
        return cls(np.asarray(omega), np.asarray(r), np.asarray(y, dtype=float), dict(meta or {}))

    def cartesian(self) -> np.ndarray:
        return np.column_stack([self.r * np.cos(self.omega), self.r * np.sin(self.omega)])


# ---------------------------------------------------------------------------
# shape library


@dataclass(frozen=True)
class ShapeCase:
    """A star-shaped truth boundary: ``ellipse`` (optionally shifted and rotated) or ``triangle``."""

    kind: str
    b1: float = 0.35
    b2: float = 0.25
    center: tuple = (0.0, 0.0)
    rotation: float = 0.0  # radians, counter-clockwise
    height: float = 0.5
    name: str = ""

    def __post_init__(self):
        if self.kind not in ("ellipse", "triangle"):
            raise GeometryError(f"unknown shape kind {self.kind!r}")
        if self.kind == "ellipse":
            if not (self.b1 > 0 and self.b2 > 0):
                raise GeometryError("ellipse semi-axes must be positive")
            cx, cy = self.center
            c, s = math.cos(self.rotation), math.sin(self.rotation)
            qx, qy = c * -cx + s * -cy, -s * -cx + c * -cy
            if (qx / self.b1) ** 2 + (qy / self.b2) ** 2 >= 1.0:
                raise GeometryError("reference point (origin) must lie inside the ellipse")
        grid = np.linspace(0.0, TWO_PI, 4096, endpoint=False)
        radii = shape_radius(self, grid)
        if not np.all(radii > 0) or not np.all(radii < max_radius(grid)):
            raise GeometryError(f"shape {self} does not fit inside the image")

    def __call__(self, omega):
        return shape_radius(self, omega)

    def area(self) -> float:
        if self.kind == "ellipse":
            return math.pi * self.b1 * self.b2
        side = 2.0 * self.height / math.sqrt(3.0)
        return 0.5 * side * self.height


def case_shape(case: str) -> ShapeCase:
    """Truth boundary for a simulation case id (``B1``-``B3``; G-cases share ``B2``)."""
    case = case.upper()
    if case == "B1":
        return ShapeCase("ellipse", name="B1")
    if case == "B2" or case.startswith("G"):
        return ShapeCase("ellipse", center=(0.1, 0.1), rotation=math.radians(60.0), name="B2")
    if case == "B3":
        return ShapeCase("triangle", height=0.5, name="B3")
    raise GeometryError(f"unknown case {case!r}")


# Triangle with one vertex on the positive x-axis: outward edge normals at
# 60, 180 and 300 degrees, apothem height / 3.
_TRIANGLE_NORMALS = np.array([math.pi / 3.0, math.pi, 5.0 * math.pi / 3.0])


def shape_radius(case: ShapeCase, omega):
    omega = np.asarray(omega, dtype=float)
    if case.kind == "triangle":
        apothem = case.height / 3.0
        support = np.cos(omega[..., None] - _TRIANGLE_NORMALS).max(axis=-1)
        out = apothem / support
    elif case.center == (0.0, 0.0) and case.rotation == 0.0:
        out = case.b1 * case.b2 / np.hypot(case.b2 * np.cos(omega), case.b1 * np.sin(omega))
    else:
        out = _ray_ellipse(case, omega)
    return float(out) if out.ndim == 0 else out


def _ray_ellipse(case: ShapeCase, omega):
    # Solve |D R(-theta) (t d - c)|^2 = 1 for the positive root t, D = diag(1/b1, 1/b2).
    c, s = math.cos(case.rotation), math.sin(case.rotation)
    cx, cy = case.center
    dx, dy = np.cos(omega), np.sin(omega)
    ux, uy = (c * dx + s * dy) / case.b1, (-s * dx + c * dy) / case.b2
    wx, wy = (c * -cx + s * -cy) / case.b1, (-s * -cx + c * -cy) / case.b2
    qa = ux * ux + uy * uy
    qb = 2.0 * (ux * wx + uy * wy)
    qc = wx * wx + wy * wy - 1.0
    disc = qb * qb - 4.0 * qa * qc
    if np.any(disc < 0):
        raise GeometryError("ray does not intersect the ellipse")
    # qc < 0, so the roots have opposite signs; this form avoids cancellation.
    return 2.0 * -qc / (qb + np.sqrt(disc))


def ellipse_implicit(case: ShapeCase, x, y):
    """Implicit function of an ellipse case; zero on the boundary."""
    c, s = math.cos(case.rotation), math.sin(case.rotation)
    px, py = x - case.center[0], y - case.center[1]
    qx, qy = c * px + s * py, -s * px + c * py
    return (qx / case.b1) ** 2 + (qy / case.b2) ** 2 - 1.0


# ---------------------------------------------------------------------------
# curves, membership and the Lebesgue metric


def curve_at(curve, omegas) -> np.ndarray:
    """Evaluate a scalar, per-angle array or callable radius function at ``omegas``."""
    omegas = np.asarray(omegas, dtype=float)
    if callable(curve):
        values = np.asarray(curve(omegas), dtype=float)
    else:
        values = np.asarray(curve, dtype=float)
        if values.ndim == 0:
            values = np.full(omegas.shape, float(values))
    if values.shape != omegas.shape:
        raise GeometryError(f"curve has shape {values.shape}, expected {omegas.shape}")
    return values


def membership(curve_values, image: PolarImage) -> np.ndarray:
    """Inside flags ``r_i < gamma(omega_i)``; ties count as outside."""
    return image.r < np.asarray(curve_values, dtype=float)


def angle_grid(size: int) -> np.ndarray:
    return np.arange(size) * (TWO_PI / size)


def lebesgue_error(curve_a, curve_b, grid_size: int = 10_000) -> float:
    """Area of the symmetric difference of two star-shaped regions.

    ``0.5 * int_0^{2 pi} |gamma_a^2 - gamma_b^2| d omega`` by the periodic
    trapezoid rule.  Curves are callables of the angle or arrays already
    evaluated on :func:`angle_grid` of the matching size.
    """
    grid = angle_grid(grid_size)
    a = curve_at(curve_a, grid)
    b = curve_at(curve_b, grid)
    return float(0.5 * np.abs(a * a - b * b).mean() * TWO_PI)


def interpolate_periodic(values, grid=None):
    """Callable linear interpolant of curve values given on a uniform angle grid."""
    values = np.asarray(values, dtype=float)
    if grid is None:
        grid = angle_grid(values.size)
    xp = np.append(grid, TWO_PI)
    fp = np.append(values, values[0])

    def curve(omega):
        return np.interp(np.mod(omega, TWO_PI), xp, fp)

    return curve


# ---------------------------------------------------------------------------
# image files


def _sidecar(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def write_image(image: PolarImage, path) -> None:
    """CSV ``omega,r,y`` plus ``<path>.json`` holding the metadata record."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["omega", "r", "y"])
        for row in zip(image.omega, image.r, image.y):
            writer.writerow([repr(float(v)) for v in row])
    with open(_sidecar(path), "w") as fh:
        json.dump(image.meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_image(path) -> PolarImage:
    path = Path(path)
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header != ["omega", "r", "y"]:
        raise GeometryError(f"{path}: expected header omega,r,y, got {','.join(header)}")
    meta = {}
    if _sidecar(path).exists():
        with open(_sidecar(path)) as fh:
            meta = json.load(fh)
    return PolarImage(data[:, 0].copy(), data[:, 1].copy(), data[:, 2].copy(), meta)
