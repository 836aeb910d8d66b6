import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multop.dyadic import Ambient, CellId
from multop.measure import (
    AffineMap,
    Atom,
    MeasureSpec,
    NonatomicPart,
    SpecError,
    atomic,
    canonical_cells,
    cell_masses,
    closed_set,
    cluster_points,
    equivalent_nonatomic,
    load_spec,
    mutually_singular,
    nonatomic_masses,
    normalize,
    share_frame,
    spec_from_dict,
    spec_to_dict,
    split_parts,
    support,
    total_mass,
    uniform,
    with_atoms,
)


@st.composite
def line_specs(draw):
    lev = draw(st.integers(0, 5))
    js = draw(st.sets(st.integers(1, 2**lev), max_size=2**lev))
    dens = {j: draw(st.floats(0.1, 10)) for j in js}
    pts = draw(st.lists(st.floats(0, 1), max_size=4, unique_by=lambda x: round(x, 9)))
    atoms = tuple(Atom(complex(x), draw(st.floats(0.01, 3))) for x in pts)
    if not dens and not atoms:
        dens = {1: 1.0}
    return MeasureSpec("line", atoms, NonatomicPart(lev, dens))


def test_uniform_masses():
    m = uniform("plane")
    assert total_mass(m) == 1.0
    assert np.allclose(nonatomic_masses(m, 4), 1 / 16)


@given(line_specs(), st.integers(0, 7))
def test_cell_masses_sum(m, level):
    assert np.isclose(cell_masses(m, level).sum(), total_mass(m))


@given(line_specs())
def test_document_roundtrip(m):
    assert spec_from_dict(json.loads(json.dumps(spec_to_dict(m)))) == m


@given(line_specs())
def test_normalize_preserves_mass_and_is_idempotent(m):
    mn, fmap = normalize(m)
    assert np.isclose(total_mass(mn), total_mass(m))
    again, f2 = normalize(mn)
    assert f2.is_identity and again == mn


def test_normalize_expands_frame_for_outside_atoms():
    m = with_atoms(uniform("line"), [1.5], 0.5)
    mn, fmap = normalize(m)
    assert fmap.scale == 2.0
    assert np.isclose(total_mass(mn), 1.5)
    assert np.isclose(nonatomic_masses(mn, 1).sum(), 1.0)


def test_normalize_atomic_bbox():
    m = atomic("plane", [2 + 2j, 4 + 3j])
    mn, fmap = normalize(m)
    pts = np.array([a.point for a in mn.atoms])
    assert np.all(np.abs(pts.real) <= 0.5) and np.all(np.abs(pts.imag) <= 0.5)
    assert np.allclose(fmap.from_unit(pts), [2 + 2j, 4 + 3j])


def test_empty_measure():
    with pytest.raises(ValueError, match="empty measure"):
        normalize(MeasureSpec("line"))


@pytest.mark.parametrize("doc, field", [
    ({"ambient": "line", "atoms": [{"x": 0.1, "mass": 1}, {"x": 0.2, "mass": 1}, {"x": 0.3, "mass": -2}]},
     "atoms[2].mass"),
    ({"ambient": "line", "nonatomic": {"level": 2, "cells": [{"j": 9, "density": 1}]}}, "nonatomic.cells[0].j"),
    ({"ambient": "torus"}, "ambient"),
    ({"atoms": []}, "ambient"),
    ({"ambient": "line", "atoms": [{"x": "a", "mass": 1}]}, "atoms[0].x"),
])
def test_malformed_documents_name_the_field(doc, field):
    with pytest.raises(SpecError) as exc:
        spec_from_dict(doc)
    assert exc.value.field == field


def test_load_spec_bad_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(SpecError, match="not valid JSON"):
        load_spec(p)


def test_line_points_must_be_real():
    with pytest.raises(SpecError):
        atomic("line", [0.5 + 0.1j])


def test_accumulation_point_needs_nearby_atoms():
    with pytest.raises(SpecError, match="accumulate"):
        atomic("line", [0.9], accumulation_points=[0.0])
    m = atomic("line", [1 / n for n in range(1, 30)], accumulation_points=[0.0])
    assert cluster_points(m).points == frozenset({0j})


def test_canonical_cells_merge_siblings():
    assert canonical_cells([CellId(1, 1), CellId(1, 2)]) == {CellId(0, 1)}
    assert canonical_cells([CellId(2, 1), CellId(2, 2), CellId(3, 3)]) == {CellId(1, 1)}


def test_closed_set_drops_covered_points():
    s = closed_set(Ambient.LINE, AffineMap(), [CellId(1, 1)], [0.25, 0.5, 0.9])
    assert s.points == frozenset({0.9 + 0j})
    assert s == closed_set(Ambient.LINE, AffineMap(), [CellId(2, 1), CellId(2, 2)], [0.9])


def test_support_and_cluster_points():
    m = with_atoms(uniform("line", [(1, 1)]), [0.9])
    assert support(m).points == frozenset({0.9 + 0j})
    assert cluster_points(m).points == frozenset()
    assert cluster_points(m).cells == frozenset({CellId(1, 1)})


def test_equivalence_and_singularity():
    left, right = uniform("line", [(1, 1)]), uniform("line", [(1, 2)])
    assert equivalent_nonatomic(left, uniform("line", [(1, 1)], density=7.0))
    assert not equivalent_nonatomic(left, right)
    assert mutually_singular(left, right)
    assert not mutually_singular(left, uniform("line"))


def test_split_parts():
    m = with_atoms(uniform("line"), [0.3, 0.7], 0.25)
    na, at = split_parts(m)
    assert not na.atoms and total_mass(na) == 1.0
    assert np.isclose(total_mass(at), 0.5)


def test_share_frame():
    a = uniform("line", frame=AffineMap(1.0, 2.0))
    b = atomic("line", [1.5])
    a2, b2 = share_frame(a, b)
    assert b2.frame == a.frame
    with pytest.raises(ValueError, match="different frames"):
        share_frame(a, uniform("line"))
