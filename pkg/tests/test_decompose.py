import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from multop import dyadic
from multop.decompose import (
    DecompositionCertificate,
    choose_cutoff,
    choose_lambda,
    decompose,
    decompose_line,
    diagonal_in_basis,
    element_entries,
    geometric_tail,
    recheck,
    right_conditional_expectation,
    verify_certificate,
)
from multop.dyadic import Ambient, CellId
from multop.lpnum import LpOperator, power_lower_bound
from multop.measure import MeasureSpec, NonatomicPart, atomic, spec_from_dict, spec_to_dict, uniform, with_atoms


@pytest.fixture(scope="module")
def lebesgue_p2():
    return decompose(uniform("line"), 2.0, 0.5, 8)


# -- cutoff --------------------------------------------------------------------


@given(st.floats(0.01, 20), st.floats(1.0, 3.0))
def test_cutoff_matches_term_sums(eps, c):
    assert choose_cutoff(2.0, eps, c, Ambient.LINE, level_cap=60) == oracles.line_cutoff(c, eps)
    assert choose_cutoff(2.0, eps, c, Ambient.PLANE, level_cap=120) == oracles.plane_cutoff(c, eps)


def test_cutoff_examples():
    assert choose_cutoff(2.0, 10.0, 1.0, Ambient.PLANE) == 0
    assert choose_cutoff(2.0, 0.25, 1.0, Ambient.LINE) == 4


@given(st.floats(0.05, 5), st.floats(0.05, 5))
def test_cutoff_monotone(e1, e2):
    lo, hi = sorted((e1, e2))
    assert choose_cutoff(3.0, lo, 1.0, Ambient.PLANE, 40) >= choose_cutoff(3.0, hi, 1.0, Ambient.PLANE, 40)
    assert choose_cutoff(3.0, lo / 2, 1.0, Ambient.PLANE, 40) <= choose_cutoff(3.0, lo, 1.0, Ambient.PLANE, 40) + 2


def test_cutoff_cap():
    with pytest.raises(ValueError, match="increase level cap"):
        choose_cutoff(2.0, 1e-6, 1.0, Ambient.PLANE, level_cap=14)


def test_geometric_tail_closed_form():
    for M in range(6):
        assert geometric_tail(M, Ambient.PLANE) == pytest.approx(
            sum(2 ** (1 - (n - 1) / 2) for n in range(M + 1, M + 300)))


# -- lambda plan ---------------------------------------------------------------


def test_lambda_lowest_index_tie_break():
    plan = choose_lambda(uniform("line"), 4)
    assert plan[2, 3] == 17 / 32


def test_lambda_zero_off_support():
    plan = choose_lambda(uniform("line", [(1, 1)]), 4)
    assert plan[1, 2] == 0
    assert plan[2, 4] == 0


def test_lambda_single_cell_support():
    m = uniform("plane", [(4, 7)])
    plan = choose_lambda(m, 4)
    c = dyadic.geometry(CellId(4, 7), Ambient.PLANE).center
    for n in range(5):
        assert plan[dyadic.ancestor(CellId(4, 7), n).n, dyadic.ancestor(CellId(4, 7), n).j] == c


@given(st.integers(1, 5), st.data())
def test_lambda_in_cell_and_support(lev, data):
    js = data.draw(st.sets(st.integers(1, 2**lev), min_size=1))
    m = MeasureSpec("plane", nonatomic=NonatomicPart(lev, {j: data.draw(st.floats(0.1, 5)) for j in js}))
    L = lev + 1
    plan = choose_lambda(m, L)
    for n in range(L + 1):
        for j in range(1, 2**n + 1):
            lam = plan[n, j]
            lo, hi = dyadic.descendant_range(CellId(n, j), lev) if n <= lev else (None, None)
            hit = any(lo <= k <= hi for k in js) if n <= lev else (
                dyadic.ancestor(CellId(n, j), lev).j in js)
            if not hit:
                assert lam == 0
            else:
                g = dyadic.geometry(CellId(n, j), Ambient.PLANE)
                assert g.x_min <= lam.real <= g.x_max and g.y_min <= lam.imag <= g.y_max


# -- decomposition -------------------------------------------------------------


@pytest.mark.parametrize("amb, p", [("line", 2.0), ("line", 3.0), ("plane", 3.0), ("plane", 1.5)])
def test_exactness_and_rates(amb, p):
    dec = decompose(uniform(amb), p, 1.0, 7)
    assert np.abs(dec.D.matrix + dec.K.matrix - dec.mhat.matrix).max() <= 1e-12
    c = dec.certificate
    assert c.total_K_lower <= c.total_K_upper
    for r in c.levels:
        assert r.block_norm <= r.bound + 1e-12
    assert c.head.block_norm <= c.head.bound + 1e-12
    assert c.meets_target


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_line_blocks_match_oracle(p):
    dec = decompose(uniform("line"), p, 0.5, 6)
    for r in dec.certificate.levels:
        expected = max(oracles.line_tail_block(r.n, j, 6, p) for j in range(1, 2 ** (r.n - 1) + 1))
        assert r.block_norm == pytest.approx(expected, rel=1e-12)


def test_p2_power_below_certificate(lebesgue_p2):
    c = lebesgue_p2.certificate
    n = lebesgue_p2.basis.space.dim
    k = LpOperator(lebesgue_p2.basis.space, lebesgue_p2.basis.space, lebesgue_p2.K.matrix[:n, :n])
    assert power_lower_bound(k).lower <= c.total_K_upper + 1e-12


def test_tail_bounds_decay(lebesgue_p2):
    c = lebesgue_p2.certificate
    tails = [c.head.tail_upper] + [r.tail_upper for r in c.levels]
    assert all(a >= b for a, b in zip(tails, tails[1:]))
    assert tails[-1] == 0.0


def test_full_head_leaves_no_tail(lebesgue_p2):
    b = lebesgue_p2.basis
    k = lebesgue_p2.K.matrix
    assert np.abs(k - right_conditional_expectation(k, b, b.level)).max() == 0


def test_atomic_measure_has_zero_remainder():
    dec = decompose(atomic("line", [0.1, 0.4, 0.8]), 3.0, 0.1, 6)
    assert np.all(dec.K.matrix == 0)
    assert np.array_equal(dec.D.matrix, dec.mhat.matrix)
    assert verify_certificate(dec.certificate, dec.D, dec.K, dec.basis).ok


def test_atoms_pass_through():
    m = with_atoms(uniform("line"), [0.3, 0.6], 0.5)
    dec = decompose(m, 3.0, 0.5, 6)
    n = dec.basis.space.dim
    assert np.all(dec.K.matrix[n:, :] == 0) and np.all(dec.K.matrix[:, n:] == 0)
    assert np.allclose(np.diag(dec.D.matrix)[n:], [0.3, 0.6])
    assert verify_certificate(dec.certificate, dec.D, dec.K, dec.basis).ok


def test_raw_frame_is_reported():
    m = spec_from_dict({"ambient": "line", "nonatomic": {"level": 0, "cells": [{"j": 1, "density": 1}]},
                        "frame": {"x": 2.0, "side": 4.0}})
    dec = decompose(m, 2.0, 0.5, 6)
    assert dec.certificate.frame.scale == 4.0


def test_discretization_too_coarse():
    with pytest.raises(ValueError, match="raise the level"):
        decompose(uniform("plane"), 2.0, 0.1, 2)


# -- verification --------------------------------------------------------------


def test_verify_passes(lebesgue_p2):
    rep = verify_certificate(lebesgue_p2.certificate, lebesgue_p2.D, lebesgue_p2.K, lebesgue_p2.basis)
    assert rep.ok and set(rep.checks) == set("abcdef")


def test_fault_injection_moves_one_entry(lebesgue_p2):
    dec = lebesgue_p2
    b = dec.basis
    entries = element_entries(b, dec.plan).real
    k = b.element_position("tail", 5, 3)
    entries[k] += 0.5  # far outside A_{4,3}
    d = dec.mhat.matrix.copy()
    n = b.space.dim
    d[:n, :n] = diagonal_in_basis(b, entries)
    D = LpOperator(dec.D.domain, dec.D.codomain, d)
    K = dec.mhat - D
    rep = verify_certificate(dec.certificate, D, K, b)
    assert not rep.checks["a"]
    assert ("tail", 5, 3) in {v.index for v in rep.violations if v.check == "a"}


def test_non_diagonal_D_is_caught(lebesgue_p2):
    d = lebesgue_p2.D.matrix.copy()
    d[0, 5] += 1e-3
    D = LpOperator(lebesgue_p2.D.domain, lebesgue_p2.D.codomain, d)
    rep = verify_certificate(lebesgue_p2.certificate, D, lebesgue_p2.K, lebesgue_p2.basis)
    assert not rep.checks["d"] and not rep.checks["e"]


def test_certificate_json_roundtrip_and_recheck():
    m = uniform("line")
    dec = decompose_line(m, 3.0, 0.5, 7)
    doc = json.loads(json.dumps(dec.certificate.to_dict()))
    back = DecompositionCertificate.from_dict(doc)
    assert back.to_dict() == dec.certificate.to_dict()
    assert recheck(doc, spec_from_dict(spec_to_dict(m))).ok
    doc["levels"][0]["block_norm"] *= 1.01
    assert not recheck(doc, m).ok


# -- 1-summing shapes ------------------------------------------------------------


@pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
def test_pi1_levels_within_shape(p):
    c = decompose_line(uniform("line"), p, 0.5, 8).certificate
    for r in c.levels:
        assert r.pi1 <= r.pi1_bound + 1e-12
    assert c.head.pi1 <= c.head.pi1_bound + 1e-12
    shapes = [r.pi1_bound for r in c.levels]
    assert all(a > b for a, b in zip(shapes, shapes[1:]))


def test_hs_norm_below_geometric_sum():
    c = decompose_line(uniform("line"), 2.0, 0.3, 9).certificate
    assert c.hs_norm <= c.pi1_total + 1e-10
    assert c.hs_norm <= 2.0 ** (-c.cutoff / 2) * (3 + math.sqrt(2)) + 1e-10


def test_decompose_line_rejects_plane():
    with pytest.raises(ValueError, match="line"):
        decompose_line(uniform("plane"), 2.0, 0.5, 4)


def test_single_atom_pi1_is_zero():
    c = decompose_line(atomic("line", [0.5]), 2.0, 0.5, 4).certificate
    assert c.pi1_total == 0.0 and c.hs_norm == 0.0
