import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from multop.dyadic import Ambient
from multop.haar import (
    build_haar,
    estimate_unconditional_constant,
    hybrid_basis,
    lambda_set,
    level_masses,
)
from multop.lpnum import WeightedSpace, vec_norm
from multop.measure import MeasureSpec, NonatomicPart, uniform, with_atoms


@st.composite
def densities(draw, ambient="line"):
    lev = draw(st.integers(1, 4))
    js = draw(st.sets(st.integers(1, 2**lev), min_size=1))
    return MeasureSpec(ambient, nonatomic=NonatomicPart(lev, {j: draw(st.floats(0.05, 20)) for j in js}))


@given(densities(), st.integers(0, 5), st.floats(1.2, 6))
def test_orthogonal_and_normalized(m, extra, p):
    L = m.nonatomic.level + extra
    N = min(extra, L)
    b = hybrid_basis(m, L, N, p)
    u = b.matrix
    g = (u.T * b.space.weights) @ u
    assert np.allclose(g - np.diag(np.diag(g)), 0, atol=1e-10 * np.abs(g).max())
    for k in range(b.dim):
        assert vec_norm(b.space, b.dense_element(k)) == pytest.approx(1.0, rel=1e-12)
    assert np.allclose(b.inverse_matrix @ u, np.eye(b.dim), atol=1e-9)


@given(densities("plane"), st.integers(0, 3), st.floats(1.2, 6))
def test_analyze_synthesize_roundtrip(m, extra, p):
    b = build_haar(m, m.nonatomic.level + extra, p)
    rng = np.random.default_rng(0)
    f = rng.standard_normal(b.space.dim) + 1j * rng.standard_normal(b.space.dim)
    assert np.allclose(b.synthesize(b.analyze(f)), f)


def test_dimension_matches_positive_cells():
    m = MeasureSpec("line", nonatomic=NonatomicPart(3, {1: 1.0, 2: 2.0, 6: 1.0}))
    b = build_haar(m, 5, 3.0)
    assert b.dim == b.space.dim == 12


def test_haar_values_match_closed_norm():
    m = MeasureSpec("line", nonatomic=NonatomicPart(1, {1: 1.0, 2: 3.0}))
    b = build_haar(m, 1, 3.0)
    tail = b.elements[1]
    mu1, mu2 = 0.5, 1.5
    norm = oracles.haar_norm(mu1, mu2, 3.0)
    assert tail.values[0] == pytest.approx(1 / mu1 / norm)
    assert tail.values[1] == pytest.approx(-1 / mu2 / norm)


def test_lambda_set():
    m = MeasureSpec("line", nonatomic=NonatomicPart(2, {1: 1.0, 2: 1.0, 4: 1.0}))
    lam = lambda_set(m, 2)
    assert (0, 1) in lam and (1, 1) in lam and (2, 1) in lam
    assert (2, 2) not in lam


def test_level_masses():
    out = level_masses(np.array([1.0, 2.0, 3.0, 4.0]), 2)
    assert [list(x) for x in out] == [[10.0], [3.0, 7.0], [1.0, 2.0, 3.0, 4.0]]


def test_same_span_for_head():
    # level-N indicators and {h_{n,j}: n <= N} span the same space
    m = uniform("line")
    full = build_haar(m, 5, 2.0)
    hyb = hybrid_basis(m, 5, 3, 2.0)
    low = full.matrix[:, [k for k, e in enumerate(full.elements) if e.n <= 3]]
    head = hyb.matrix[:, [k for k, e in enumerate(hyb.elements) if e.kind == "head"]]
    coef, *_ = np.linalg.lstsq(low, head, rcond=None)
    assert np.abs(low @ coef - head).max() < 1e-12


def test_rejects_atoms_and_bad_cutoff():
    with pytest.raises(ValueError, match="nonatomic"):
        build_haar(with_atoms(uniform("line"), [0.5]), 3, 2.0)
    with pytest.raises(ValueError):
        hybrid_basis(uniform("line"), 3, 4, 2.0)


def test_unconditional_is_one_at_p2():
    b = build_haar(MeasureSpec("line", nonatomic=NonatomicPart(3, {1: 1.0, 3: 5.0, 4: 1.0, 8: 2.0})), 3, 2.0)
    assert abs(estimate_unconditional_constant(b) - 1) < 1e-12


def test_unconditional_monotone_in_level():
    m = uniform("line")
    ests = [estimate_unconditional_constant(build_haar(m, L, 4.0), budget=8, seed=3) for L in range(1, 6)]
    assert all(a <= b for a, b in zip(ests, ests[1:]))
    assert ests[-1] > 1.0


def test_unconditional_deterministic():
    b = build_haar(uniform("plane"), 5, 3.0)
    assert estimate_unconditional_constant(b, budget=4, seed=7) == estimate_unconditional_constant(b, budget=4, seed=7)


def test_plane_element_supports():
    b = hybrid_basis(uniform("plane"), 4, 2, 3.0)
    for e in b.elements:
        sup = e.support_cell
        assert sup.n == (e.n if e.kind == "head" else e.n - 1)
    assert b.measure.ambient is Ambient.PLANE
    assert isinstance(b.space, WeightedSpace)
