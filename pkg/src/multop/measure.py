"""Finite compactly supported measures on the line or the plane.

A :class:`MeasureSpec` is a finite list of atoms plus a nonatomic part with
piecewise-constant density on the dyadic cells of a fixed level.  Dyadic
cells live in the unit region ([0, 1] or S(0, 1)); the spec's ``frame`` maps
raw coordinates onto that region, so a measure on [2, 4] is a unit-region
density together with the frame ``z -> (z - 2) / 2``.

Infinite atom families are described by finitely many atoms plus their
declared limit set (``accumulation_points`` and ``accumulation_cells``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .dyadic import (
    Ambient,
    CellId,
    ancestor,
    closed_distance,
    descendant_range,
    in_region,
    level_bounds,
    locate_many,
    sibling,
)

POINT_DECIMALS = 12
_TOL = 1e-12


class SpecError(ValueError):
    """A measure spec document or value is malformed; ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class AffineMap:
    """The similarity ``z -> (z - shift) / scale`` from raw to unit coordinates."""

    shift: complex = 0j
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "shift", complex(self.shift))
        object.__setattr__(self, "scale", float(self.scale))
        if not self.scale > 0:
            raise SpecError("frame.side", "must be positive")

    def to_unit(self, z):
        return (np.asarray(z, dtype=complex) - self.shift) / self.scale

    def from_unit(self, w):
        return np.asarray(w, dtype=complex) * self.scale + self.shift

    @property
    def is_identity(self) -> bool:
        return self.shift == 0 and self.scale == 1.0


IDENTITY = AffineMap()


@dataclass(frozen=True)
class Atom:
    point: complex
    mass: float

    def __post_init__(self):
        object.__setattr__(self, "point", complex(self.point))
        object.__setattr__(self, "mass", float(self.mass))
        if not (self.mass > 0 and math.isfinite(self.mass)):
            raise SpecError("atoms.mass", f"must be positive and finite, got {self.mass}")


@dataclass(frozen=True)
class NonatomicPart:
    """Constant density per level-``level`` cell; zero-density cells are dropped.

    ``densities`` may be given as a mapping ``j -> density``; it is stored as a
    sorted tuple of pairs so the part stays immutable.
    """

    level: int = 0
    densities: tuple = ()

    def __post_init__(self):
        items = self.densities.items() if isinstance(self.densities, Mapping) else self.densities
        clean = {}
        for j, d in items:
            j, d = int(j), float(d)
            if not 1 <= j <= 2**self.level:
                raise SpecError("nonatomic.cells.j", f"index {j} outside 1..{2 ** self.level}")
            if d < 0 or not math.isfinite(d):
                raise SpecError("nonatomic.cells.density", f"must be nonnegative and finite, got {d}")
            if d > 0:
                clean[j] = d
        object.__setattr__(self, "densities", tuple(sorted(clean.items())))

    @property
    def density_map(self) -> dict[int, float]:
        return dict(self.densities)

    def __bool__(self):
        return bool(self.densities)


@dataclass(frozen=True)
class MeasureSpec:
    ambient: Ambient
    atoms: tuple = ()
    nonatomic: NonatomicPart = field(default_factory=NonatomicPart)
    accumulation_points: tuple = ()
    accumulation_cells: tuple = ()
    frame: AffineMap = IDENTITY

    def __post_init__(self):
        amb = Ambient.parse(self.ambient)
        object.__setattr__(self, "ambient", amb)
        atoms = tuple(a if isinstance(a, Atom) else Atom(*a) for a in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "accumulation_points", tuple(complex(z) for z in self.accumulation_points))
        cells = tuple(c if isinstance(c, CellId) else CellId(*c) for c in self.accumulation_cells)
        object.__setattr__(self, "accumulation_cells", cells)
        if amb is Ambient.LINE:
            for z in [a.point for a in atoms] + list(self.accumulation_points):
                if z.imag != 0:
                    raise SpecError("atoms", f"line measure has non-real point {z}")
        keys = [_point_key(a.point) for a in atoms]
        if len(set(keys)) != len(keys):
            raise SpecError("atoms", "atom points must be pairwise distinct")
        self._check_accumulation()

    def _check_accumulation(self):
        # Syntactic only: the finite atom list must visibly approach each
        # declared limit point (nearest other atom within frame side / 8) and
        # every declared limit cell must hold at least one atom.
        pts = np.array([a.point for a in self.atoms], dtype=complex)
        for i, z in enumerate(self.accumulation_points):
            d = np.abs(pts - z)
            d = d[d > 0]
            if d.size == 0 or d.min() > self.frame.scale / 8:
                raise SpecError(
                    f"accumulation_points[{i}]", "no atoms accumulate near this point"
                )
        if self.accumulation_cells:
            unit = self.frame.to_unit(pts) if pts.size else pts
            inside = in_region(unit, self.ambient) if pts.size else np.zeros(0, bool)
            for i, c in enumerate(self.accumulation_cells):
                ok = False
                if inside.any():
                    js = locate_many(unit[inside], c.n, self.ambient)
                    ok = bool(np.any(js == c.j))
                if not ok:
                    raise SpecError(f"accumulation_cells[{i}]", "cell contains no atoms")

    @property
    def has_cells(self) -> bool:
        return bool(self.nonatomic) or bool(self.accumulation_cells)


def _point_key(z: complex) -> complex:
    return complex(round(z.real, POINT_DECIMALS) + 0.0, round(z.imag, POINT_DECIMALS) + 0.0)


# -- construction helpers ----------------------------------------------------


def uniform(ambient, cells: Iterable | None = None, density: float = 1.0, level: int | None = None,
            frame: AffineMap = IDENTITY) -> MeasureSpec:
    """Constant ``density`` on the given cells (default: the whole unit region)."""
    ambient = Ambient.parse(ambient)
    cells = [CellId(0, 1)] if cells is None else [c if isinstance(c, CellId) else CellId(*c) for c in cells]
    lev = max(c.n for c in cells) if level is None else level
    dens = {}
    for c in cells:
        lo, hi = descendant_range(c, lev)
        for j in range(lo, hi + 1):
            dens[j] = density
    return MeasureSpec(ambient, nonatomic=NonatomicPart(lev, dens), frame=frame)


def atomic(ambient, points: Iterable, masses: Iterable | float = 1.0,
           accumulation_points: Iterable = ()) -> MeasureSpec:
    points = list(points)
    if isinstance(masses, (int, float)):
        masses = [masses] * len(points)
    return MeasureSpec(ambient, atoms=tuple(Atom(z, w) for z, w in zip(points, masses)),
                       accumulation_points=tuple(accumulation_points))


def with_atoms(m: MeasureSpec, points: Iterable, masses: Iterable | float = 1.0,
               accumulation_points: Iterable = (), accumulation_cells: Iterable = ()) -> MeasureSpec:
    points = list(points)
    if isinstance(masses, (int, float)):
        masses = [masses] * len(points)
    return replace(
        m,
        atoms=m.atoms + tuple(Atom(z, w) for z, w in zip(points, masses)),
        accumulation_points=m.accumulation_points + tuple(accumulation_points),
        accumulation_cells=m.accumulation_cells + tuple(accumulation_cells),
    )


# -- masses -------------------------------------------------------------------


def raw_cell_area(m: MeasureSpec, n: int) -> float:
    return m.frame.scale ** m.ambient.dim * 2.0**-n


def density_array(m: MeasureSpec, level: int) -> np.ndarray:
    """Densities of the level-``level`` cells, ``level >= m.nonatomic.level``."""
    base = m.nonatomic.level
    if level < base:
        raise ValueError(f"level {level} below nonatomic level {base}; use nonatomic_masses")
    arr = np.zeros(2**base)
    for j, d in m.nonatomic.densities:
        arr[j - 1] = d
    return np.repeat(arr, 2 ** (level - base))


def nonatomic_masses(m: MeasureSpec, level: int) -> np.ndarray:
    base = m.nonatomic.level
    masses = density_array(m, max(level, base)) * raw_cell_area(m, max(level, base))
    for _ in range(base - level):
        masses = masses.reshape(-1, 2).sum(axis=1)
    return masses


def atom_unit_points(m: MeasureSpec) -> np.ndarray:
    return m.frame.to_unit(np.array([a.point for a in m.atoms], dtype=complex))


def atom_masses(m: MeasureSpec) -> np.ndarray:
    return np.array([a.mass for a in m.atoms], dtype=float)


def cell_masses(m: MeasureSpec, level: int) -> np.ndarray:
    """Nonatomic masses plus the atoms lying (half-open) in each level cell."""
    masses = nonatomic_masses(m, level)
    if m.atoms:
        unit = atom_unit_points(m)
        inside = in_region(unit, m.ambient)
        if inside.any():
            js = locate_many(unit[inside], level, m.ambient)
            np.add.at(masses, js - 1, atom_masses(m)[inside])
    return masses


def cell_mass(m: MeasureSpec, cell: CellId) -> float:
    return float(cell_masses(m, cell.n)[cell.j - 1])


def total_mass(m: MeasureSpec) -> float:
    return float(nonatomic_masses(m, 0).sum() + atom_masses(m).sum())


# -- operations ---------------------------------------------------------------


def refine(m: MeasureSpec, level: int) -> MeasureSpec:
    base = m.nonatomic.level
    if level < base:
        raise ValueError(f"cannot refine from level {base} down to {level}")
    if level == base:
        return m
    dens = density_array(m, level)
    nz = np.flatnonzero(dens)
    return replace(m, nonatomic=NonatomicPart(level, {int(i) + 1: float(dens[i]) for i in nz}))


def split_parts(m: MeasureSpec) -> tuple[MeasureSpec, MeasureSpec]:
    """``(nonatomic, atomic)``; accumulation data travels with the atoms."""
    nonatomic = MeasureSpec(m.ambient, nonatomic=m.nonatomic, frame=m.frame)
    atomic_part = replace(m, nonatomic=NonatomicPart())
    return nonatomic, atomic_part


def normalize(m: MeasureSpec) -> tuple[MeasureSpec, AffineMap]:
    """Map ``m`` into the unit region; returns the normalized spec and the raw-to-unit map.

    With a nonatomic part the frame is kept (doubled outward until every atom
    and declared limit point fits) so that dyadic cells stay dyadic.  A purely
    atomic measure that does not already fit is fitted by its bounding box.
    """
    if total_mass(m) <= 0:
        raise ValueError("empty measure")
    pts = np.array([a.point for a in m.atoms] + list(m.accumulation_points), dtype=complex)
    if m.has_cells:
        m = _expand_frame(m, pts)
        fmap = m.frame
    elif pts.size == 0 or np.all(in_region(pts, m.ambient)):
        fmap = IDENTITY
    else:
        fmap = _bbox_map(pts, m.ambient)

    def move(z):
        w = complex(fmap.to_unit(z))
        if m.ambient is Ambient.LINE:
            return complex(min(max(w.real, 0.0), 1.0), 0.0)
        return complex(min(max(w.real, -0.5), 0.5), min(max(w.imag, -0.5), 0.5))

    dens = {j: d * fmap.scale ** m.ambient.dim for j, d in m.nonatomic.densities}
    out = MeasureSpec(
        m.ambient,
        atoms=tuple(Atom(move(a.point), a.mass) for a in m.atoms),
        nonatomic=NonatomicPart(m.nonatomic.level, dens),
        accumulation_points=tuple(move(z) for z in m.accumulation_points),
        accumulation_cells=m.accumulation_cells if m.has_cells else (),
        frame=IDENTITY,
    )
    return out, fmap


def _bbox_map(pts: np.ndarray, ambient: Ambient) -> AffineMap:
    if ambient is Ambient.LINE:
        lo, hi = pts.real.min(), pts.real.max()
        if hi == lo:
            return AffineMap(lo - 0.5, 1.0)
        return AffineMap(lo, hi - lo)
    x0, x1, y0, y1 = pts.real.min(), pts.real.max(), pts.imag.min(), pts.imag.max()
    side = max(x1 - x0, y1 - y0)
    return AffineMap(complex((x0 + x1) / 2, (y0 + y1) / 2), side if side > 0 else 1.0)


def _expand_frame(m: MeasureSpec, pts: np.ndarray) -> MeasureSpec:
    for _ in range(64):
        unit = m.frame.to_unit(pts) if pts.size else pts
        if pts.size == 0 or np.all(in_region(unit, m.ambient)):
            return m
        s = m.frame.scale
        if m.ambient is Ambient.LINE:
            left = bool(np.any(unit.real < 0))
            offset = (lambda n: 2**n) if left else (lambda n: 0)
            shift = m.frame.shift - s if left else m.frame.shift
            step = 1
        else:
            left = bool(np.any(unit.real < -0.5))
            down = bool(np.any(unit.imag < -0.5))
            # level-2 quadrants: 1 upper-right, 2 upper-left, 3 lower-right, 4 lower-left
            q = (1 if down else 3) + (0 if left else 1)
            offset = (lambda n, q=q: (q - 1) * 2**n)
            shift = m.frame.shift + s / 2 * complex(-1 if left else 1, -1 if down else 1)
            step = 2
        n0 = m.nonatomic.level
        dens = {j + offset(n0): d for j, d in m.nonatomic.densities}
        cells = tuple(CellId(c.n + step, c.j + offset(c.n)) for c in m.accumulation_cells)
        m = MeasureSpec(
            m.ambient,
            atoms=m.atoms,
            nonatomic=NonatomicPart(n0 + step, dens),
            accumulation_points=m.accumulation_points,
            accumulation_cells=cells,
            frame=AffineMap(shift, 2 * s),
        )
    raise ValueError("could not fit atoms into the dyadic frame")


# -- closed sets --------------------------------------------------------------


@dataclass(frozen=True)
class ClosedSetDesc:
    """A finite union of closed dyadic cells plus finitely many points.

    Cells are expressed in the unit region of ``frame``; points are raw
    coordinates.  Build through :func:`closed_set` to get the canonical form
    (maximal cells, no point inside a cell), under which equality of values is
    equality of sets.
    """

    ambient: Ambient
    frame: AffineMap
    cells: frozenset
    points: frozenset

    def is_empty(self) -> bool:
        return not self.cells and not self.points

    def is_finite(self) -> bool:
        return not self.cells

    def distance(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        best = np.full(z.shape, np.inf)
        if self.points:
            pts = np.array(sorted(self.points, key=lambda w: (w.real, w.imag)), dtype=complex)
            best = np.minimum(best, np.abs(z[:, None] - pts[None, :]).min(axis=1))
        by_level: dict[int, list[int]] = {}
        for c in self.cells:
            by_level.setdefault(c.n, []).append(c.j)
        unit = self.frame.to_unit(z)
        for n, js in by_level.items():
            d = closed_distance(unit, n, js, self.ambient).min(axis=1) * self.frame.scale
            best = np.minimum(best, d)
        return best

    def contains_set(self, other: "ClosedSetDesc") -> bool:
        if other.is_empty():
            return True
        _require_same_frame(self, other)
        both = closed_set(self.ambient, self.frame, self.cells | other.cells, self.points | other.points)
        return both == self

    def to_dict(self) -> dict:
        return {
            "cells": [[c.n, c.j] for c in sorted(self.cells)],
            "points": [[z.real, z.imag] for z in sorted(self.points, key=lambda w: (w.real, w.imag))],
        }


def canonical_cells(cells: Iterable[CellId]) -> frozenset:
    cells = set(cells)
    cells = {c for c in cells if not any(ancestor(c, k) in cells for k in range(c.n))}
    changed = True
    while changed:
        changed = False
        for c in sorted(cells, key=lambda c: -c.n):
            if c not in cells or c.n == 0:
                continue
            s = sibling(c)
            if s in cells:
                cells -= {c, s}
                cells.add(ancestor(c, c.n - 1))
                changed = True
    return frozenset(cells)


def closed_set(ambient: Ambient, frame: AffineMap, cells: Iterable[CellId], points: Iterable[complex]) -> ClosedSetDesc:
    cells = canonical_cells(cells)
    pts = {_point_key(complex(z)) for z in points}
    if cells and pts:
        desc = ClosedSetDesc(ambient, frame, cells, frozenset())
        arr = np.array(sorted(pts, key=lambda w: (w.real, w.imag)), dtype=complex)
        keep = desc.distance(arr) > _TOL * frame.scale
        pts = set(arr[keep].tolist())
    if not cells:
        frame = IDENTITY
    return ClosedSetDesc(ambient, frame, cells, frozenset(pts))


def positive_cells(m: MeasureSpec) -> list[CellId]:
    lev = m.nonatomic.level
    return [CellId(lev, j) for j, _ in m.nonatomic.densities]


def support(m: MeasureSpec) -> ClosedSetDesc:
    cells = positive_cells(m) + list(m.accumulation_cells)
    pts = [a.point for a in m.atoms] + list(m.accumulation_points)
    return closed_set(m.ambient, m.frame, cells, pts)


def cluster_points(m: MeasureSpec) -> ClosedSetDesc:
    cells = positive_cells(m) + list(m.accumulation_cells)
    return closed_set(m.ambient, m.frame, cells, m.accumulation_points)


def support_is_infinite(m: MeasureSpec) -> bool:
    return bool(m.nonatomic) or bool(m.accumulation_points) or bool(m.accumulation_cells)


def _require_same_frame(a, b):
    if a.ambient is not b.ambient:
        raise ValueError(f"ambient mismatch: {a.ambient.value} vs {b.ambient.value}")
    if a.cells and b.cells and a.frame != b.frame:
        raise ValueError("cell sets use different frames; normalize both with a shared frame first")


def _density_masks(m1: MeasureSpec, m2: MeasureSpec) -> tuple[np.ndarray, np.ndarray]:
    if m1.ambient is not m2.ambient:
        raise ValueError(f"ambient mismatch: {m1.ambient.value} vs {m2.ambient.value}")
    if m1.nonatomic and m2.nonatomic and m1.frame != m2.frame:
        raise ValueError("nonatomic parts use different frames; normalize both with a shared frame first")
    lev = max(m1.nonatomic.level, m2.nonatomic.level)
    return density_array(m1, lev) > 0, density_array(m2, lev) > 0


def equivalent_nonatomic(m1: MeasureSpec, m2: MeasureSpec) -> bool:
    """Piecewise-constant densities are equivalent iff they vanish on the same cells."""
    a, b = _density_masks(m1, m2)
    return bool(np.array_equal(a, b))


def mutually_singular(m1: MeasureSpec, m2: MeasureSpec) -> bool:
    a, b = _density_masks(m1, m2)
    if np.any(a & b):
        return False
    k1 = {_point_key(x.point) for x in m1.atoms}
    k2 = {_point_key(x.point) for x in m2.atoms}
    return not (k1 & k2)


def share_frame(m1: MeasureSpec, m2: MeasureSpec) -> tuple[MeasureSpec, MeasureSpec]:
    """Put two specs on one frame so pairwise predicates apply.

    A spec without cells adopts the other's frame (its atoms are raw
    coordinates, so nothing moves).  Two specs with cells must already agree.
    """
    if m1.ambient is not m2.ambient:
        raise ValueError(f"ambient mismatch: {m1.ambient.value} vs {m2.ambient.value}")
    if m1.frame == m2.frame:
        return m1, m2
    if not m1.has_cells:
        return replace(m1, frame=m2.frame), m2
    if not m2.has_cells:
        return m1, replace(m2, frame=m1.frame)
    raise ValueError("both measures have dyadic cells but different frames")


# -- spec documents -----------------------------------------------------------


def _num(doc, key, where, default=None):
    if key not in doc:
        if default is not None:
            return default
        raise SpecError(f"{where}{key}", "missing field")
    v = doc[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SpecError(f"{where}{key}", f"expected a number, got {v!r}")
    return v


def spec_from_dict(doc: Mapping) -> MeasureSpec:
    if not isinstance(doc, Mapping):
        raise SpecError("<root>", "expected an object")
    if "ambient" not in doc:
        raise SpecError("ambient", "missing field")
    try:
        ambient = Ambient.parse(doc["ambient"])
    except ValueError as exc:
        raise SpecError("ambient", str(exc)) from None
    atoms = []
    for i, a in enumerate(doc.get("atoms", [])):
        where = f"atoms[{i}]."
        if not isinstance(a, Mapping):
            raise SpecError(f"atoms[{i}]", "expected an object")
        mass = _num(a, "mass", where)
        if mass <= 0:
            raise SpecError(f"{where}mass", "must be positive")
        atoms.append(Atom(complex(_num(a, "x", where), _num(a, "y", where, 0.0)), mass))
    na = doc.get("nonatomic", {"level": 0, "cells": []})
    if not isinstance(na, Mapping):
        raise SpecError("nonatomic", "expected an object")
    level = _num(na, "level", "nonatomic.", 0)
    if int(level) != level or level < 0:
        raise SpecError("nonatomic.level", "must be a nonnegative integer")
    dens = {}
    for i, c in enumerate(na.get("cells", [])):
        where = f"nonatomic.cells[{i}]."
        if not isinstance(c, Mapping):
            raise SpecError(f"nonatomic.cells[{i}]", "expected an object")
        j = _num(c, "j", where)
        d = _num(c, "density", where)
        if int(j) != j or not 1 <= j <= 2 ** int(level):
            raise SpecError(f"{where}j", f"must be an integer in 1..{2 ** int(level)}")
        if d < 0:
            raise SpecError(f"{where}density", "must be nonnegative")
        dens[int(j)] = float(d)
    acc = []
    for i, z in enumerate(doc.get("accumulation_points", [])):
        where = f"accumulation_points[{i}]."
        if not isinstance(z, Mapping):
            raise SpecError(f"accumulation_points[{i}]", "expected an object")
        acc.append(complex(_num(z, "x", where), _num(z, "y", where, 0.0)))
    acc_cells = []
    for i, c in enumerate(doc.get("accumulation_cells", [])):
        where = f"accumulation_cells[{i}]."
        n, j = _num(c, "level", where), _num(c, "j", where)
        if int(n) != n or n < 0 or int(j) != j or not 1 <= j <= 2 ** int(n):
            raise SpecError(f"accumulation_cells[{i}]", "invalid (level, j)")
        acc_cells.append(CellId(int(n), int(j)))
    frame = IDENTITY
    if "frame" in doc:
        f = doc["frame"]
        if not isinstance(f, Mapping):
            raise SpecError("frame", "expected an object")
        frame = AffineMap(complex(_num(f, "x", "frame."), _num(f, "y", "frame.", 0.0)), _num(f, "side", "frame."))
    return MeasureSpec(ambient, tuple(atoms), NonatomicPart(int(level), dens), tuple(acc),
                       tuple(acc_cells), frame)


def spec_to_dict(m: MeasureSpec) -> dict:
    doc = {
        "ambient": m.ambient.value,
        "atoms": [{"x": a.point.real, "y": a.point.imag, "mass": a.mass} for a in m.atoms],
        "nonatomic": {
            "level": m.nonatomic.level,
            "cells": [{"j": j, "density": d} for j, d in m.nonatomic.densities],
        },
        "accumulation_points": [{"x": z.real, "y": z.imag} for z in m.accumulation_points],
    }
    if m.accumulation_cells:
        doc["accumulation_cells"] = [{"level": c.n, "j": c.j} for c in m.accumulation_cells]
    if not m.frame.is_identity:
        doc["frame"] = {"x": m.frame.shift.real, "y": m.frame.shift.imag, "side": m.frame.scale}
    return doc


def load_spec(path) -> MeasureSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SpecError("<document>", f"not valid JSON ({exc.msg} at line {exc.lineno})") from None
    return spec_from_dict(doc)
