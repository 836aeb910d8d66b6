"""Generalized Haar systems on dyadic trees.

For a nonatomic measure mu and cells A_{n,j}, the index set Lambda holds
(0, 1) and every (n, j) whose two children A_{n,2j-1}, A_{n,2j} both carry
mass.  Each such index gives

    h_{n,j} = H / ||H||_p,   H = 1_{A_{n,2j-1}} / mu(A_{n,2j-1}) - 1_{A_{n,2j}} / mu(A_{n,2j}),

supported on A_{n-1,j}.  The hybrid basis with cutoff N replaces every
h_{n,j} with n <= N by the normalized indicators of the level-N cells; both
span the functions constant on level-N cells.

Elements are stored sparsely as values on the positive-mass finest cells.
The system is orthogonal in L^2(mu), which gives the exact inverse of the
change of basis without a dense solve.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import dyadic
from .lpnum import LpOperator, WeightedSpace, ascend, vec_norm
from .measure import MeasureSpec, cell_masses, nonatomic_masses

EXHAUSTIVE_MAX = 12
ASCENT_ROUNDS = 3


def level_masses(masses_L: np.ndarray, L: int) -> list[np.ndarray]:
    """``out[n]`` holds the masses of the level-n cells, computed from level L."""
    out = [masses_L]
    for _ in range(L):
        out.append(out[-1].reshape(-1, 2).sum(axis=1))
    return out[::-1]


def lambda_set(m: MeasureSpec, max_level: int) -> frozenset:
    masses = level_masses(cell_masses(m, max_level), max_level)
    lam = {(0, 1)}
    for n in range(1, max_level + 1):
        both = (masses[n][0::2] > 0) & (masses[n][1::2] > 0)
        lam.update((n, int(j) + 1) for j in np.flatnonzero(both))
    return frozenset(lam)


@dataclass(frozen=True, eq=False)
class HaarElement:
    """Head elements are normalized indicators of A_{N,j}; tail elements are h_{n,j}."""

    kind: str
    n: int
    j: int
    start: int
    stop: int
    values: np.ndarray

    @property
    def level(self) -> int:
        return self.n

    @property
    def index(self) -> tuple[int, int]:
        return self.n, self.j

    @property
    def support_cell(self) -> dyadic.CellId:
        if self.kind == "head":
            return dyadic.CellId(self.n, self.j)
        return dyadic.CellId(self.n - 1, self.j)


@dataclass(frozen=True, eq=False)
class HaarBasis:
    measure: MeasureSpec
    level: int
    cutoff: int
    p: float
    space: WeightedSpace
    js: np.ndarray
    elements: tuple

    @property
    def dim(self) -> int:
        return len(self.elements)

    @cached_property
    def _flat(self):
        elem = np.concatenate([np.full(e.stop - e.start, k) for k, e in enumerate(self.elements)])
        idx = np.concatenate([np.arange(e.start, e.stop) for e in self.elements])
        vals = np.concatenate([e.values for e in self.elements])
        return elem, idx, vals

    @cached_property
    def gram(self) -> np.ndarray:
        """``integral u_k**2 dmu`` for each element."""
        elem, idx, vals = self._flat
        return np.bincount(elem, weights=self.space.weights[idx] * vals**2, minlength=self.dim)

    @cached_property
    def matrix(self) -> np.ndarray:
        """Columns are the elements in cell coordinates."""
        elem, idx, vals = self._flat
        u = np.zeros((self.space.dim, self.dim))
        u[idx, elem] = vals
        return u

    @cached_property
    def inverse_matrix(self) -> np.ndarray:
        u = self.matrix
        return (u.T * self.space.weights[None, :]) / self.gram[:, None]

    def analyze(self, f) -> np.ndarray:
        f = np.asarray(f)
        if f.shape != (self.space.dim,):
            raise ValueError(f"expected a vector of length {self.space.dim}")
        elem, idx, vals = self._flat
        w = self.space.weights[idx] * vals

        def project(x):
            return np.bincount(elem, weights=w * x[idx], minlength=self.dim) / self.gram

        if np.iscomplexobj(f):
            return project(f.real) + 1j * project(f.imag)
        return project(f)

    def synthesize(self, c) -> np.ndarray:
        c = np.asarray(c)
        if c.shape != (self.dim,):
            raise ValueError(f"expected {self.dim} coefficients")
        elem, idx, vals = self._flat

        def build(x):
            return np.bincount(idx, weights=x[elem] * vals, minlength=self.space.dim)

        if np.iscomplexobj(c):
            return build(c.real) + 1j * build(c.imag)
        return build(c)

    def level_groups(self) -> dict[int, list[int]]:
        """Element positions grouped by level; the head sits at level ``cutoff``."""
        groups: dict[int, list[int]] = {}
        for k, e in enumerate(self.elements):
            groups.setdefault(e.n, []).append(k)
        return groups

    def dense_element(self, k: int) -> np.ndarray:
        e = self.elements[k]
        out = np.zeros(self.space.dim)
        out[e.start:e.stop] = e.values
        return out

    def element_position(self, kind: str, n: int, j: int) -> int:
        for k, e in enumerate(self.elements):
            if (e.kind, e.n, e.j) == (kind, n, j):
                return k
        raise KeyError((kind, n, j))


def hybrid_basis(m: MeasureSpec, L: int, N: int, p: float) -> HaarBasis:
    """Normalized level-N indicators followed by h_{n,j}, N < n <= L, level-major."""
    if m.atoms:
        raise ValueError("Haar bases need a nonatomic measure; strip atoms with split_parts")
    if not 0 <= N <= L:
        raise ValueError(f"cutoff N={N} must lie in 0..L={L}")
    if not p > 1:
        raise ValueError(f"exponent must exceed 1, got {p}")
    masses_L = nonatomic_masses(m, L)
    if masses_L.sum() <= 0:
        raise ValueError("zero-mass measure")
    masses = level_masses(masses_L, L)
    js = np.flatnonzero(masses_L > 0) + 1
    space = WeightedSpace(masses_L[js - 1], p, tuple(dyadic.CellId(L, int(j)) for j in js))

    def span(cell_n, cell_j, lo_off=0):
        lo, hi = dyadic.descendant_range(dyadic.CellId(cell_n, cell_j), L)
        return int(np.searchsorted(js, lo)), int(np.searchsorted(js, hi, side="right"))

    elements = []
    for j in np.flatnonzero(masses[N] > 0) + 1:
        a, b = span(N, int(j))
        elements.append(HaarElement("head", N, int(j), a, b, np.full(b - a, masses[N][j - 1] ** (-1 / p))))
    for n in range(N + 1, L + 1):
        m1, m2 = masses[n][0::2], masses[n][1::2]
        for j in np.flatnonzero((m1 > 0) & (m2 > 0)) + 1:
            mu1, mu2 = m1[j - 1], m2[j - 1]
            a, b = span(n - 1, int(j))
            _, mid = span(n, 2 * int(j) - 1)
            norm = (mu1 ** (1 - p) + mu2 ** (1 - p)) ** (1 / p)
            vals = np.empty(b - a)
            vals[: mid - a] = 1 / mu1 / norm
            vals[mid - a:] = -1 / mu2 / norm
            elements.append(HaarElement("tail", n, int(j), a, b, vals))
    if len(elements) != js.size:
        raise RuntimeError("Haar element count does not match the cell dimension")
    return HaarBasis(m, L, N, p, space, js, tuple(elements))


def build_haar(m: MeasureSpec, L: int, p: float) -> HaarBasis:
    return hybrid_basis(m, L, 0, p)


def samespan_check(m: MeasureSpec, L: int, N: int, p: float) -> tuple[float, float]:
    """Change of basis between {h_{n,j}: n <= N} and the level-N indicators.

    Returns ``(residual, condition number)``: the indicators are solved for in
    the span of the low Haar functions, which must be square and invertible.
    """
    full = build_haar(m, L, p)
    hyb = hybrid_basis(m, L, N, p)
    low = [k for k, e in enumerate(full.elements) if e.n <= N]
    head = [k for k, e in enumerate(hyb.elements) if e.kind == "head"]
    if len(low) != len(head):
        raise RuntimeError("span dimensions differ")
    h = full.matrix[:, low]
    ind = hyb.matrix[:, head]
    coef, *_ = np.linalg.lstsq(h, ind, rcond=None)
    residual = float(np.abs(h @ coef - ind).max()) if head else 0.0
    return residual, float(np.linalg.cond(coef)) if head else 1.0


# -- unconditional constant ---------------------------------------------------


def _trial_draws(seed: int, trial: int, counts: list[int]) -> tuple[np.ndarray, np.ndarray]:
    # One chunk per level so the draws for a coarser basis are a prefix.
    rng = np.random.default_rng([seed, trial])
    coefs, signs = [], []
    for c in counts:
        coefs.append(rng.standard_normal(c) * np.exp(1.5 * rng.standard_normal(c)))
        signs.append(rng.choice([-1.0, 1.0], size=c))
    return np.concatenate(coefs), np.concatenate(signs)


def _level_counts(basis: HaarBasis) -> list[int]:
    groups = basis.level_groups()
    return [len(groups.get(n, [])) for n in range(basis.cutoff, basis.level + 1)]


def _sign_ratio_at(basis: HaarBasis, p: float, budget: int, seed: int) -> float:
    space = basis.space.with_exponent(p)
    w = space.weights
    counts = _level_counts(basis)
    mdim = basis.dim

    best = 1.0
    if mdim <= EXHAUSTIVE_MAX:
        u = basis.matrix
        patterns = np.array(list(itertools.product([1.0, -1.0], repeat=mdim)))
    for t in range(budget):
        a, eps = _trial_draws(seed, t, counts)
        base = vec_norm(space, basis.synthesize(a))
        if base == 0:
            continue
        if mdim <= EXHAUSTIVE_MAX:
            vals = (w[:, None] * np.abs(u @ (patterns * a).T) ** p).sum(axis=0) ** (1 / p)
            best = max(best, float(vals.max() / base))
            continue
        # Alternate greedy sign flips (coefficients fixed) with a norm ascent
        # over coefficients (signs fixed).
        for _ in range(ASCENT_ROUNDS):
            _greedy_flips(basis, w, p, a, eps)
            t = LpOperator(space, space, (basis.matrix * eps[None, :]) @ basis.inverse_matrix)
            val, f = ascend(t, basis.synthesize(a), max_iter=30)
            best = max(best, val)
            a = basis.analyze(f.real)
        _greedy_flips(basis, w, p, a, eps)
        base = vec_norm(space, basis.synthesize(a))
        if base > 0:
            best = max(best, vec_norm(space, basis.synthesize(eps * a)) / base)
    return best


def _greedy_flips(basis: HaarBasis, w: np.ndarray, p: float, a: np.ndarray, eps: np.ndarray):
    # a flip only touches the flipped element's support
    v = basis.synthesize(eps * a)
    for _ in range(20):
        improved = False
        for k, e in enumerate(basis.elements):
            sl = slice(e.start, e.stop)
            new = v[sl] - 2 * eps[k] * a[k] * e.values
            gain = np.sum(w[sl] * np.abs(new) ** p) - np.sum(w[sl] * np.abs(v[sl]) ** p)
            if gain > 0:
                v[sl] = new
                eps[k] = -eps[k]
                improved = True
        if not improved:
            break


def estimate_unconditional_constant(basis: HaarBasis, p: float | None = None, budget: int = 64,
                                    seed: int = 0) -> float:
    """Lower bound on the real-sign unconditional constant of ``basis``.

    The sup of ``||sum eps_n a_n u_n|| / ||sum a_n u_n||`` over seeded random
    coefficient vectors and sign patterns: exhaustive signs when the basis has
    at most 12 elements; otherwise random signs improved by alternating
    greedy flips with a norm ascent on ``U diag(eps) U^{-1}`` over the
    coefficients.  The search
    also runs on every coarser truncation of the tree, so the estimate is
    nondecreasing in the level and in the trial budget.
    """
    p = basis.p if p is None else p
    best = 1.0
    for lev in range(basis.cutoff, basis.level + 1):
        sub = basis if lev == basis.level else hybrid_basis(basis.measure, lev, basis.cutoff, basis.p)
        best = max(best, _sign_ratio_at(sub, p, budget, seed))
    return best
