"""Dyadic trees on the unit interval and on the square S(0, 1).

Cells are indexed by ``(n, j)`` with ``1 <= j <= 2**n``; the children of
``(n, j)`` are ``(n + 1, 2j - 1)`` and ``(n + 1, 2j)``.

Line cells are the dyadic intervals ``[(j-1)/2**n, j/2**n)`` (the last one is
closed at 1).  Plane cells come from alternating splits of
``S(0,1) = [-1/2, 1/2]**2``: even levels split horizontally, odd levels
vertically.  The first child takes the strict side (``y > mid`` / ``x > mid``)
and the second child the non-strict side, so children partition the parent.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

MAX_LEVEL = 24


class Ambient(enum.Enum):
    LINE = "line"
    PLANE = "plane"

    @classmethod
    def parse(cls, value: "str | Ambient") -> "Ambient":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown ambient {value!r}; expected 'line' or 'plane'") from None

    @property
    def dim(self) -> int:
        return 1 if self is Ambient.LINE else 2


@dataclass(frozen=True, order=True)
class CellId:
    n: int
    j: int

    def __post_init__(self):
        if self.n < 0 or not 1 <= self.j <= 2**self.n:
            raise ValueError(f"invalid cell ({self.n}, {self.j})")

    def __repr__(self):
        return f"CellId({self.n}, {self.j})"


class CellGeometry(NamedTuple):
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> complex:
        return complex((self.x_min + self.x_max) / 2, (self.y_min + self.y_max) / 2)


def children(cell: CellId) -> tuple[CellId, CellId]:
    return CellId(cell.n + 1, 2 * cell.j - 1), CellId(cell.n + 1, 2 * cell.j)


def parent(cell: CellId) -> CellId:
    if cell.n == 0:
        raise ValueError("the root cell has no parent")
    return CellId(cell.n - 1, (cell.j + 1) // 2)


def sibling(cell: CellId) -> CellId:
    if cell.n == 0:
        raise ValueError("the root cell has no sibling")
    return CellId(cell.n, cell.j + 1 if cell.j % 2 else cell.j - 1)


def descendant_range(cell: CellId, level: int) -> tuple[int, int]:
    """1-based inclusive range of ``j`` for the level-``level`` descendants."""
    if level < cell.n:
        raise ValueError(f"level {level} is coarser than cell level {cell.n}")
    k = 2 ** (level - cell.n)
    return (cell.j - 1) * k + 1, cell.j * k


def ancestor(cell: CellId, level: int) -> CellId:
    if level > cell.n:
        raise ValueError(f"level {level} is finer than cell level {cell.n}")
    return CellId(level, (cell.j - 1) // 2 ** (cell.n - level) + 1)


def level_bounds(n: int, ambient: Ambient) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Bounds ``(x_min, x_max, y_min, y_max)`` of every level-``n`` cell, indexed by ``j - 1``."""
    if not 0 <= n <= MAX_LEVEL:
        raise ValueError(f"level {n} outside 0..{MAX_LEVEL}")
    if ambient is Ambient.LINE:
        edges = np.arange(2**n + 1, dtype=float) / 2**n
        zeros = np.zeros(2**n)
        return edges[:-1], edges[1:], zeros, zeros.copy()
    x0 = np.array([-0.5])
    x1 = np.array([0.5])
    y0 = np.array([-0.5])
    y1 = np.array([0.5])
    for k in range(n):
        if k % 2 == 0:
            mid = (y0 + y1) / 2
            y0 = np.stack([mid, y0], axis=1).ravel()
            y1 = np.stack([y1, mid], axis=1).ravel()
            x0 = np.repeat(x0, 2)
            x1 = np.repeat(x1, 2)
        else:
            mid = (x0 + x1) / 2
            x0 = np.stack([mid, x0], axis=1).ravel()
            x1 = np.stack([x1, mid], axis=1).ravel()
            y0 = np.repeat(y0, 2)
            y1 = np.repeat(y1, 2)
    return x0, x1, y0, y1


def level_centers(n: int, ambient: Ambient) -> np.ndarray:
    x0, x1, y0, y1 = level_bounds(n, ambient)
    return (x0 + x1) / 2 + 1j * (y0 + y1) / 2


def geometry(cell: CellId, ambient: Ambient) -> CellGeometry:
    if ambient is Ambient.LINE:
        return CellGeometry((cell.j - 1) / 2**cell.n, cell.j / 2**cell.n, 0.0, 0.0)
    x0, x1, y0, y1 = -0.5, 0.5, -0.5, 0.5
    bits = cell.j - 1
    for k in range(cell.n):
        second = (bits >> (cell.n - 1 - k)) & 1
        if k % 2 == 0:
            mid = (y0 + y1) / 2
            y0, y1 = (y0, mid) if second else (mid, y1)
        else:
            mid = (x0 + x1) / 2
            x0, x1 = (x0, mid) if second else (mid, x1)
    return CellGeometry(x0, x1, y0, y1)


def cell_size(n: int, ambient: Ambient) -> tuple[float, float]:
    """Width and height shared by all level-``n`` cells."""
    if ambient is Ambient.LINE:
        return 2.0**-n, 0.0
    return 2.0 ** -(n // 2), 2.0 ** -((n + 1) // 2)


def cell_area(n: int, ambient: Ambient) -> float:
    # Plane cells halve their area at every split, like line cells.
    return 2.0**-n


def diameter(cell: CellId | int, ambient: Ambient) -> float:
    n = cell.n if isinstance(cell, CellId) else cell
    w, h = cell_size(n, ambient)
    return math.hypot(w, h)


def diameter_bound(n: int, ambient: Ambient) -> float:
    """Guaranteed diameter rate: ``2**(1 - n/2)`` in the plane, ``2**-n`` on the line."""
    if ambient is Ambient.LINE:
        return 2.0**-n
    return 2.0 ** (1 - n / 2)


def contains(cell: CellId, point: complex, ambient: Ambient) -> bool:
    """Half-open membership matching the partition convention."""
    g = geometry(cell, ambient)
    z = complex(point)
    if ambient is Ambient.LINE:
        if z.imag != 0:
            return False
        x = z.real
        return g.x_min <= x < g.x_max or (x == g.x_max == 1.0)

    def inside(c, lo, hi):
        return lo < c <= hi or (c == lo == -0.5)

    return inside(z.real, g.x_min, g.x_max) and inside(z.imag, g.y_min, g.y_max)


def in_region(points, ambient: Ambient) -> np.ndarray:
    z = np.asarray(points, dtype=complex)
    if ambient is Ambient.LINE:
        return (z.imag == 0) & (z.real >= 0) & (z.real <= 1)
    return (np.abs(z.real) <= 0.5) & (np.abs(z.imag) <= 0.5)


def locate_many(points, level: int, ambient: Ambient) -> np.ndarray:
    """Level-``level`` cell index ``j`` (1-based) of each point."""
    z = np.atleast_1d(np.asarray(points, dtype=complex))
    if not np.all(in_region(z, ambient)):
        bad = z[~in_region(z, ambient)][0]
        raise ValueError(f"point {bad} lies outside the {ambient.value} region")
    if ambient is Ambient.LINE:
        j = np.floor(z.real * 2**level).astype(np.int64) + 1
        return np.minimum(j, 2**level)
    x, y = z.real, z.imag
    x0 = np.full(z.shape, -0.5)
    x1 = np.full(z.shape, 0.5)
    y0 = x0.copy()
    y1 = x1.copy()
    bits = np.zeros(z.shape, dtype=np.int64)
    for k in range(level):
        if k % 2 == 0:
            mid = (y0 + y1) / 2
            first = y > mid
            y0 = np.where(first, mid, y0)
            y1 = np.where(first, y1, mid)
        else:
            mid = (x0 + x1) / 2
            first = x > mid
            x0 = np.where(first, mid, x0)
            x1 = np.where(first, x1, mid)
        bits = 2 * bits + (~first).astype(np.int64)
    return bits + 1


def locate(point: complex, level: int, ambient: Ambient) -> CellId:
    return CellId(level, int(locate_many([point], level, ambient)[0]))


def closed_distance(points, level: int, js, ambient: Ambient) -> np.ndarray:
    """Euclidean distance from each point to each closed cell; shape ``(len(points), len(js))``."""
    x0, x1, y0, y1 = level_bounds(level, ambient)
    idx = np.asarray(js, dtype=np.int64) - 1
    z = np.atleast_1d(np.asarray(points, dtype=complex))[:, None]
    dx = np.maximum(np.maximum(x0[idx] - z.real, z.real - x1[idx]), 0.0)
    dy = np.maximum(np.maximum(y0[idx] - z.imag, z.imag - y1[idx]), 0.0)
    return np.hypot(dx, dy)
