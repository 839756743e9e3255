"""Point clouds over which the discrete point processes are defined.

A :class:`PointCloud` is an ordered list of ``n`` points in ``R^d``; the row
order is what ties matrix indices to points everywhere else in the package,
and each point implicitly carries weight ``1/n``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import SeededRng, as_generator

SPHERE_NORM_TOL = 1e-12


@dataclass(frozen=True)
class PointCloud:
    """Immutable ordered set of points; rows index points."""

    points: np.ndarray

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2:
            raise ValueError(f"points must be a 2-d array, got shape {pts.shape}")
        if pts.shape[1] < 1:
            raise ValueError("ambient dimension must be at least 1")
        if pts.size and not np.isfinite(pts).all():
            bad = np.argwhere(~np.isfinite(pts))[0]
            raise ValueError(f"non-finite coordinate at point {bad[0]}")
        pts = np.ascontiguousarray(pts)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def translated(self, offset: np.ndarray) -> "PointCloud":
        return PointCloud(self.points + np.asarray(offset, dtype=float))


def sample_uniform_cube(n: int, d: int, rng: SeededRng) -> PointCloud:
    """Draw ``n`` iid points with coordinates uniform on [-1, 1]."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    if d < 1:
        raise ValueError("dimension must be at least 1")
    gen = as_generator(rng)
    return PointCloud(gen.uniform(-1.0, 1.0, size=(n, d)))


def sample_uniform_sphere(n: int, rng: SeededRng) -> PointCloud:
    """Draw ``n`` iid points uniform on the unit sphere in R^3.

    Points are standard 3-d Gaussians normalized to unit length, which is
    exactly uniform on the sphere.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    gen = as_generator(rng)
    pts = gen.standard_normal(size=(n, 3))
    norms = np.linalg.norm(pts, axis=1)
    # a zero draw has probability zero but would divide by zero; redraw
    while (degenerate := norms < 1e-12).any():
        pts[degenerate] = gen.standard_normal(size=(int(degenerate.sum()), 3))
        norms = np.linalg.norm(pts, axis=1)
    return PointCloud(pts / norms[:, None])


def save_points(cloud: PointCloud, path: str) -> None:
    """Write a cloud as ``d=<dim>`` header plus one text row per point.

    Coordinates are written with shortest round-trip ``repr``, so a
    save/load cycle reproduces them bit-exactly.
    """
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"d={cloud.dim}\n")
        for row in cloud.points:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_points(path: str) -> PointCloud:
    """Read a cloud written by :func:`save_points`."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("d="):
        raise ValueError(f"{path}: line 1: expected header 'd=<dim>'")
    try:
        dim = int(lines[0][2:])
    except ValueError:
        raise ValueError(f"{path}: line 1: malformed dimension {lines[0][2:]!r}") from None
    if dim < 1:
        raise ValueError(f"{path}: line 1: dimension must be positive, got {dim}")
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        parts = raw.split()
        if not parts:
            continue
        if len(parts) != dim:
            raise ValueError(
                f"{path}: line {lineno}: dimension mismatch, expected {dim} "
                f"coordinates, got {len(parts)}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ValueError(f"{path}: line {lineno}: unparseable coordinate") from None
    if not rows:
        return PointCloud(np.empty((0, dim)))
    return PointCloud(np.array(rows, dtype=float))
