"""Numerics on weighted finite-dimensional l^p spaces.

A :class:`WeightedSpace` with weights ``w`` and exponent ``p`` carries the
norm ``(sum_i w_i |f_i|**p)**(1/p)``; with ``w_i = mu(cell_i)`` it is
L^p(mu) restricted to the functions constant on each cell.  An
:class:`LpOperator` is a dense matrix between two such spaces.

Operator p-norms of general matrices are only bounded: a monotone ascent on
the dual pairing gives lower bounds and Riesz-Thorin interpolation between
the weighted 1- and inf-norms gives upper bounds.  Diagonal operators and
direct sums of rank-one blocks are computed exactly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import dyadic
from .measure import MeasureSpec, atom_masses, nonatomic_masses


def dual_exponent(p: float) -> float:
    if not p > 1:
        raise ValueError(f"exponent must exceed 1, got {p}")
    return math.inf if p == math.inf else p / (p - 1)


@dataclass(frozen=True, eq=False)
class WeightedSpace:
    weights: np.ndarray
    p: float
    cells: tuple = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise ValueError("weights must be positive and finite")
        if not 1 < self.p < math.inf:
            raise ValueError(f"exponent must lie in (1, inf), got {self.p}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "cells", tuple(self.cells))

    @property
    def dim(self) -> int:
        return self.weights.size

    def with_exponent(self, p: float) -> "WeightedSpace":
        return WeightedSpace(self.weights, p, self.cells)

    def same_as(self, other: "WeightedSpace") -> bool:
        return self.p == other.p and np.array_equal(self.weights, other.weights)

    def norm(self, f) -> float:
        return vec_norm(self, f)


def sequence_space(k: int, p: float) -> WeightedSpace:
    return WeightedSpace(np.ones(k), p)


def direct_sum(a: WeightedSpace, b: WeightedSpace) -> WeightedSpace:
    if a.p != b.p:
        raise ValueError("direct sum needs a common exponent")
    return WeightedSpace(np.concatenate([a.weights, b.weights]), a.p, a.cells + b.cells)


def vec_norm(space: WeightedSpace, f) -> float:
    f = np.asarray(f).ravel()
    if f.size != space.dim:
        raise ValueError(f"vector of length {f.size} in a space of dimension {space.dim}")
    a = np.abs(f)
    m = a.max(initial=0.0)
    if m == 0:
        return 0.0
    # Scale out the max to keep |f|**p finite for large p.
    return float(m * np.sum(space.weights * (a / m) ** space.p) ** (1 / space.p))


@dataclass(frozen=True, eq=False)
class LpOperator:
    domain: WeightedSpace
    codomain: WeightedSpace
    matrix: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.matrix)
        if a.shape != (self.codomain.dim, self.domain.dim):
            raise ValueError(f"matrix shape {a.shape} does not match spaces "
                             f"({self.codomain.dim}, {self.domain.dim})")
        if not np.all(np.isfinite(a)):
            raise ValueError("operator entries must be finite")
        object.__setattr__(self, "matrix", a)

    def apply(self, f) -> np.ndarray:
        return self.matrix @ np.asarray(f)

    def __matmul__(self, other: "LpOperator") -> "LpOperator":
        return LpOperator(other.domain, self.codomain, self.matrix @ other.matrix)

    def __sub__(self, other: "LpOperator") -> "LpOperator":
        return LpOperator(self.domain, self.codomain, self.matrix - other.matrix)

    def __add__(self, other: "LpOperator") -> "LpOperator":
        return LpOperator(self.domain, self.codomain, self.matrix + other.matrix)

    def is_diagonal(self, tol: float = 0.0) -> bool:
        a = self.matrix
        if a.shape[0] != a.shape[1]:
            return False
        off = a - np.diag(np.diag(a))
        return bool(np.all(np.abs(off) <= tol))

    def scaled_matrix(self) -> np.ndarray:
        """The matrix acting between unweighted l^p spaces with the same norm."""
        p = self.domain.p
        return (self.codomain.weights[:, None] ** (1 / p)) * self.matrix / (self.domain.weights[None, :] ** (1 / p))


def identity(space: WeightedSpace) -> LpOperator:
    return LpOperator(space, space, np.eye(space.dim))


def diagonal(space: WeightedSpace, entries) -> LpOperator:
    return LpOperator(space, space, np.diag(np.asarray(entries)))


def adjoint(op: LpOperator) -> LpOperator:
    """Adjoint for the pairing ``sum_i w_i f_i g_i``; acts between the dual-exponent spaces."""
    q = dual_exponent(op.domain.p)
    mat = (op.matrix.T * op.codomain.weights[None, :]) / op.domain.weights[:, None]
    return LpOperator(op.codomain.with_exponent(q), op.domain.with_exponent(q), mat)


# -- norm estimation ----------------------------------------------------------


class NormMethod(enum.Enum):
    EXACT_DIAGONAL = "ExactDiagonal"
    EXACT_DISJOINT_BLOCKS = "ExactDisjointBlocks"
    POWER_ITERATION = "PowerIteration"
    INTERPOLATION = "Interpolation"


@dataclass(frozen=True)
class NormEstimate:
    lower: float
    upper: float | None
    method: NormMethod
    converged: bool = True

    def __post_init__(self):
        if self.upper is not None and self.lower > self.upper * (1 + 1e-12) + 1e-14:
            raise ValueError(f"lower bound {self.lower} exceeds upper bound {self.upper}")

    @classmethod
    def exact(cls, value: float, method: NormMethod) -> "NormEstimate":
        return cls(float(value), float(value), method)

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper, "method": self.method.value,
                "converged": self.converged}

    @classmethod
    def from_dict(cls, doc) -> "NormEstimate":
        return cls(doc["lower"], doc["upper"], NormMethod(doc["method"]), doc.get("converged", True))


POWER_RESTARTS = 8
POWER_MAX_ITER = 200
POWER_TOL = 1e-12


def _lp(v, p):
    a = np.abs(v)
    m = a.max(initial=0.0)
    if m == 0:
        return 0.0
    return float(m * np.sum((a / m) ** p) ** (1 / p))


def _dual_vector(v, p):
    # Unit vector in l^q norming v: sum v_i conj(u_i) = ||v||_p.
    a = np.abs(v)
    n = _lp(v, p)
    phase = np.divide(v, a, out=np.zeros_like(v), where=a > 0)
    return (a / n) ** (p - 1) * phase


def _ascent(a: np.ndarray, p: float, x: np.ndarray, max_iter: int, tol: float) -> tuple[float, bool, np.ndarray]:
    q = dual_exponent(p)
    x = x / _lp(x, p)
    best = _lp(a @ x, p)
    for _ in range(max_iter):
        y = a @ x
        if _lp(y, p) == 0:
            return best, True, x
        z = a.conj().T @ _dual_vector(y, p)
        if _lp(z, q) == 0:
            return best, True, x
        nx = _dual_vector(z, q)
        val = _lp(a @ nx, p)
        if val <= best * (1 + tol):
            return (val, True, nx) if val > best else (best, True, x)
        best, x = val, nx
    return best, False, x


def ascend(op: LpOperator, x0, max_iter: int = POWER_MAX_ITER, tol: float = POWER_TOL) -> tuple[float, np.ndarray]:
    """Monotone ascent from ``x0``; returns ``(||op x|| / ||x||, x)`` for the best iterate found."""
    wd = op.domain.weights ** (1 / op.domain.p)
    x = np.asarray(x0) * wd
    if _lp(x, op.domain.p) == 0:
        raise ValueError("starting vector is zero")
    val, _, xs = _ascent(op.scaled_matrix(), op.domain.p, x, max_iter, tol)
    return val, xs / wd


def power_lower_bound(op: LpOperator, restarts: int = POWER_RESTARTS, max_iter: int = POWER_MAX_ITER,
                      tol: float = POWER_TOL, seed: int = 0) -> NormEstimate:
    """Lower bound on ``||op||_{p->p}`` by monotone ascent on the dual pairing.

    The first start is the coordinate vector of the largest column, the rest
    are seeded Gaussian vectors.  Every iterate is a feasible test vector, so
    the result is a lower bound whether or not the ascent converged.
    """
    a = op.scaled_matrix()
    p = op.domain.p
    if a.size == 0:
        return NormEstimate(0.0, None, NormMethod.POWER_ITERATION)
    cols = np.array([_lp(a[:, k], p) for k in range(a.shape[1])])
    best = float(cols.max())
    if best == 0:
        return NormEstimate(0.0, None, NormMethod.POWER_ITERATION)
    rng = np.random.default_rng(seed)
    is_complex = np.iscomplexobj(a)
    converged = True
    for r in range(restarts):
        if r == 0:
            x = np.zeros(a.shape[1], dtype=a.dtype)
            x[int(np.argmax(cols))] = 1
        else:
            x = rng.standard_normal(a.shape[1])
            if is_complex:
                x = x + 1j * rng.standard_normal(a.shape[1])
        val, ok, _ = _ascent(a, p, x, max_iter, tol)
        converged &= ok
        best = max(best, val)
    return NormEstimate(best, None, NormMethod.POWER_ITERATION, converged)


def interpolation_upper_bound(op: LpOperator) -> float:
    """Riesz-Thorin: ``||A||_p <= ||A||_1**(1/p) * ||A||_inf**(1 - 1/p)`` on the scaled matrix."""
    a = np.abs(op.scaled_matrix())
    if a.size == 0:
        return 0.0
    p = op.domain.p
    n1 = a.sum(axis=0).max()
    ninf = a.sum(axis=1).max()
    return float(n1 ** (1 / p) * ninf ** (1 - 1 / p))


def op_norm(op: LpOperator, mode: str = "both", **power_kw) -> NormEstimate:
    """Norm estimate; ``mode`` is ``exact``, ``power``, ``interpolation`` or ``both``."""
    if op.domain.p != op.codomain.p:
        raise ValueError("domain and codomain exponents differ")
    if mode == "exact":
        if not (op.domain.same_as(op.codomain) and op.is_diagonal()):
            raise ValueError("exact mode needs a diagonal operator on a single space")
        return NormEstimate.exact(np.abs(np.diag(op.matrix)).max(initial=0.0), NormMethod.EXACT_DIAGONAL)
    if mode == "power":
        return power_lower_bound(op, **power_kw)
    if mode == "interpolation":
        return NormEstimate(0.0, interpolation_upper_bound(op), NormMethod.INTERPOLATION)
    if mode == "both":
        low = power_lower_bound(op, **power_kw)
        up = interpolation_upper_bound(op)
        return NormEstimate(low.lower, max(up, low.lower), NormMethod.POWER_ITERATION, low.converged)
    raise ValueError(f"unknown mode {mode!r}")


def spectral_norm(op: LpOperator) -> float:
    """Exact norm at p = 2 via the orthonormalized matrix."""
    if op.domain.p != 2 or op.codomain.p != 2:
        raise ValueError("spectral norm needs p = 2")
    a = op.scaled_matrix()
    return float(np.linalg.norm(a, 2)) if a.size else 0.0


# -- exact norms for structured operators -------------------------------------


@dataclass(frozen=True, eq=False)
class Block:
    """One summand of a direct sum: ``op`` acting on coordinates ``domain_support``."""

    op: LpOperator
    domain_support: frozenset = field(default_factory=frozenset)
    codomain_support: frozenset = field(default_factory=frozenset)


def block_norm(op: LpOperator) -> float:
    p = op.domain.p
    a = op.matrix
    if op.domain.dim == 1:
        return vec_norm(op.codomain, a[:, 0]) / op.domain.weights[0] ** (1 / p)
    if op.codomain.dim == 1:
        q = dual_exponent(p)
        dual = WeightedSpace(op.domain.weights, q)
        return vec_norm(dual, a[0, :] / op.domain.weights) * op.codomain.weights[0] ** (1 / p)
    if op.domain.same_as(op.codomain) and op.is_diagonal():
        return float(np.abs(np.diag(a)).max(initial=0.0))
    raise ValueError("block norm is exact only for rank-one-shaped or diagonal blocks")


def norm_exact_disjoint(blocks: Sequence[Block]) -> float:
    """Norm of a direct sum of blocks with disjoint supports: the largest block norm."""
    seen_dom: set = set()
    seen_cod: set = set()
    for b in blocks:
        if seen_dom & b.domain_support or seen_cod & b.codomain_support:
            raise ValueError("blocks not disjoint")
        seen_dom |= b.domain_support
        seen_cod |= b.codomain_support
    return max((block_norm(b.op) for b in blocks), default=0.0)


def hs_norm(op: LpOperator) -> float:
    """Hilbert-Schmidt norm, computed in the orthonormalized cell basis."""
    if op.domain.p != 2 or op.codomain.p != 2:
        raise ValueError("Hilbert-Schmidt norm needs p = 2 on both sides")
    return float(np.linalg.norm(op.scaled_matrix()))


def pi1_diag_bound(entries, p: float) -> float:
    """The C(p)-free shape of the 1-summing bound for a diagonal on l^p.

    ``(sum |a_n|**q)**(1/q)`` for ``p >= 2`` and ``(sum |a_n|**2)**(1/2)`` for ``p <= 2``.
    """
    a = np.abs(np.asarray(entries, dtype=complex)).ravel()
    r = dual_exponent(p) if p >= 2 else 2.0
    return _lp(a, r)


class InequalityCheck(NamedTuple):
    holds: bool
    lhs: float
    rhs: float

    def __bool__(self):
        return self.holds


def estimate_ineq_check(a: float, b: float, p: float) -> InequalityCheck:
    """``(a + b)**p <= b**p + a*p*(a + b)**(p - 1)`` for ``a, b > 0``, ``p > 1``."""
    if not (a > 0 and b > 0 and p > 1):
        raise ValueError("need a, b > 0 and p > 1")
    lhs = (a + b) ** p
    rhs = b**p + a * p * (a + b) ** (p - 1)
    # A few ulps of slack: as a -> 0 both sides agree to rounding.
    return InequalityCheck(bool(lhs <= rhs * (1 + 8 * np.finfo(float).eps)), lhs, rhs)


# -- the multiplication operator ----------------------------------------------


def coordinate_space(m: MeasureSpec, level: int, p: float) -> tuple[WeightedSpace, np.ndarray]:
    """Positive-mass level cells (in index order) followed by the atoms.

    Returns the space and the 1-based cell indices ``j`` of the cell coordinates.
    """
    masses = nonatomic_masses(m, level)
    js = np.flatnonzero(masses > 0) + 1
    weights = np.concatenate([masses[js - 1], atom_masses(m)])
    labels = tuple(dyadic.CellId(level, int(j)) for j in js) + m.atoms
    return WeightedSpace(weights, p, labels), js


def mult_operator(m: MeasureSpec, level: int, p: float) -> tuple[LpOperator, float]:
    """Diagonal discretization of ``f -> z f`` and a bound on ``||M_mu - M_hat||``.

    Cell coordinates carry the cell center, atom coordinates the exact atom
    point, so the error bound is half the finest raw cell diameter (0 if there
    are no cells).
    """
    space, js = coordinate_space(m, level, p)
    centers = dyadic.level_centers(level, m.ambient)[js - 1]
    entries = np.concatenate([m.frame.from_unit(centers), [a.point for a in m.atoms]]).astype(complex)
    if m.ambient is dyadic.Ambient.LINE:
        entries = entries.real
    err = m.frame.scale * dyadic.diameter(level, m.ambient) / 2 if js.size else 0.0
    return diagonal(space, entries), float(err)


# -- Rademacher sums ----------------------------------------------------------


def rademacher_sum(k: int, level: int) -> np.ndarray:
    """``sum_{n=1..k} r_n`` on the level cells of [0, 1], with ``r_n(t) = (-1)**floor(2**n t)``."""
    if k > level:
        raise ValueError(f"level {level} too small for {k} independent Rademacher functions")
    i = np.arange(2**level)
    total = np.zeros(2**level, dtype=np.int64)
    for n in range(1, k + 1):
        total += 1 - 2 * ((i >> (level - n)) & 1)
    return total


def rademacher_growth(k: int, p: float, level: int | None = None) -> tuple[float, float]:
    """``(||sum r_n||_p, ||sum r_n||_2)`` under Lebesgue measure on [0, 1]."""
    level = k if level is None else level
    s = rademacher_sum(k, level)
    space = WeightedSpace(np.full(2**level, 2.0**-level), p)
    return vec_norm(space, s), float(np.sqrt(np.mean(s.astype(float) ** 2)))


def nonembed_table(p: float, ks: Sequence[int], op_norm_bound: float = 1.0) -> list[dict]:
    """Rademacher lower growth ``sqrt(k)`` against the ``||L|| k**(1/p)`` ceiling.

    For an operator that nearly preserves disjointness the images of k such
    functions have norm at most ``||L|| k**(1/p)`` while the functions have norm
    at least ``sqrt(k)``; for p > 2 the ratio goes to 0.
    """
    rows = []
    for k in ks:
        lp, l2 = rademacher_growth(k, p)
        upper = op_norm_bound * k ** (1 / p)
        rows.append({"k": k, "lp_norm": lp, "l2_norm": l2, "sqrt_k": math.sqrt(k),
                     "upper": upper, "ratio": upper / math.sqrt(k)})
    return rows
