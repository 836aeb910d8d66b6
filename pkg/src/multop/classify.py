"""Similarity verdicts for pairs of multiplication operators, and their witnesses.

Two operators M_mu1, M_mu2 on L^p (p != 2, infinite supports) are similar
modulo compact operators exactly when the nonatomic parts are equivalent and
the supports have the same cluster points.  They are approximately similar
exactly when the nonatomic parts are equivalent and the supports coincide.

The constructive pieces are an embedding pair (L, R) realizing a diagonal
inside L^p(mu) up to small commutator defects, a bottleneck matching of two
diagonals with the same cluster points, and a finite demonstration that
adding atoms from the support is absorbed up to a small similarity defect.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dyadic
from .lpnum import (
    Block,
    LpOperator,
    NormEstimate,
    NormMethod,
    WeightedSpace,
    coordinate_space,
    diagonal,
    direct_sum,
    dual_exponent,
    interpolation_upper_bound,
    norm_exact_disjoint,
    power_lower_bound,
    sequence_space,
)
from .measure import (
    ClosedSetDesc,
    MeasureSpec,
    cluster_points,
    equivalent_nonatomic,
    share_frame,
    split_parts,
    support,
    support_is_infinite,
)


@dataclass
class Verdict:
    similar_mod_compact: bool | None
    approx_similar: bool
    reasons: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"similar_mod_compact": ("not-applicable" if self.similar_mod_compact is None
                                        else self.similar_mod_compact),
                "approx_similar": self.approx_similar, "reasons": self.reasons}


def spectrum(m: MeasureSpec) -> ClosedSetDesc:
    return support(m)


def essential_spectrum(m: MeasureSpec) -> ClosedSetDesc:
    return cluster_points(m)


def _facts(m1: MeasureSpec, m2: MeasureSpec) -> tuple[bool, bool, bool, list]:
    m1, m2 = share_frame(m1, m2)
    eq = equivalent_nonatomic(m1, m2)
    same_support = support(m1) == support(m2)
    same_cluster = cluster_points(m1) == cluster_points(m2)
    reasons = [
        {"fact": "nonatomic parts equivalent", "value": eq},
        {"fact": "supports equal", "value": same_support},
        {"fact": "cluster sets equal", "value": same_cluster},
    ]
    return eq, same_support, same_cluster, reasons


def _check_p(p: float):
    if not p > 1 or math.isinf(p):
        raise ValueError(f"exponent must lie in (1, inf), got {p}")


def similar_mod_compact(m1: MeasureSpec, m2: MeasureSpec, p: float) -> Verdict:
    _check_p(p)
    if p == 2:
        raise ValueError("Hilbert case: use the cluster-point-only criterion, out of scope")
    for name, m in (("first", m1), ("second", m2)):
        if not support_is_infinite(m):
            raise ValueError(f"theorem hypothesis violated: the {name} support is a finite set")
    eq, same_support, same_cluster, reasons = _facts(m1, m2)
    return Verdict(eq and same_cluster, eq and same_support, reasons)


def approx_similar(m1: MeasureSpec, m2: MeasureSpec) -> Verdict:
    eq, same_support, same_cluster, reasons = _facts(m1, m2)
    return Verdict(None, eq and same_support, reasons)


def classify(m1: MeasureSpec, m2: MeasureSpec, p: float) -> Verdict:
    """Both verdicts; the modulo-compact one is None outside its hypotheses."""
    _check_p(p)
    eq, same_support, same_cluster, reasons = _facts(m1, m2)
    smc = None
    if p != 2 and support_is_infinite(m1) and support_is_infinite(m2):
        smc = eq and same_cluster
    else:
        reasons.append({"fact": "modulo-compact criterion applicable", "value": False})
    return Verdict(smc, eq and same_support, reasons)


# -- embedding pair ------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EmbeddingPair:
    """``L: l^p_k -> L^p(mu)`` and ``R: L^p(mu) -> l^p_k`` with ``RL = I``.

    ``L e_n`` is the normalized indicator of the n-th neighborhood and
    ``(Rf)_n`` averages f over it against the dual normalization.
    """

    L: LpOperator
    R: LpOperator
    D: LpOperator
    mhat: LpOperator
    entries: np.ndarray
    epsilons: np.ndarray
    neighborhoods: tuple
    defects: dict
    norm_L: NormEstimate
    norm_R: NormEstimate
    target: float
    discretization_error: float

    def within_targets(self) -> dict[str, bool]:
        t, e = self.target, self.discretization_error
        d = self.defects
        return {
            "norm_L": self.norm_L.upper < 1 + t,
            "norm_R": self.norm_R.upper < 1 + t,
            "ML-LD": bool(d["ML-LD"] <= t + e),
            "RM-DR": bool(d["RM-DR"] <= t + e),
            "RL-I": bool(d["RL-I"] <= t),
        }


def _epsilons(entries: np.ndarray, target: float) -> np.ndarray:
    k = entries.size
    if k == 1:
        gaps = np.array([np.inf])
    else:
        dist = np.abs(entries[:, None] - entries[None, :])
        np.fill_diagonal(dist, np.inf)
        gaps = dist.min(axis=1) / 2
    return np.minimum(target, gaps) * 2.0 ** -np.arange(1, k + 1)


def build_embedding(m: MeasureSpec, entries, target: float, L: int, p: float = 2.0) -> EmbeddingPair:
    if not target > 0:
        raise ValueError("target defect must be positive")
    entries = np.atleast_1d(np.asarray(entries, dtype=complex))
    keys = {(round(z.real, 12), round(z.imag, 12)) for z in entries}
    if len(keys) != entries.size:
        raise ValueError("entries must be distinct")
    na, _ = split_parts(m)
    space, js = coordinate_space(na, L, p)
    if js.size == 0:
        raise ValueError("the measure has no nonatomic part")
    centers = m.frame.from_unit(dyadic.level_centers(L, m.ambient)[js - 1])
    raw_err = m.frame.scale * dyadic.diameter(L, m.ambient) / 2
    supp = support(na)
    off = supp.distance(entries) > 1e-12 * m.frame.scale if entries.size else np.zeros(0, bool)
    if off.any():
        raise ValueError(f"entry off-support: {entries[off][0]}")

    eps = _epsilons(entries, target) if entries.size else np.zeros(0)
    hoods = []
    used = np.zeros(js.size, bool)
    for lam, e in zip(entries, eps):
        d = np.abs(centers - lam)
        idx = np.flatnonzero(d < e)
        if idx.size == 0:
            idx = np.array([int(np.argmin(d))])
        if used[idx].any():
            raise ValueError(f"neighborhoods overlap at level {L}: refine")
        used[idx] = True
        hoods.append(idx)

    k = entries.size
    w = space.weights
    q = dual_exponent(p)
    seq = sequence_space(k, p)
    lmat = np.zeros((space.dim, k))
    rmat = np.zeros((k, space.dim))
    for n, idx in enumerate(hoods):
        mass = w[idx].sum()
        lmat[idx, n] = mass ** (-1 / p)
        rmat[n, idx] = w[idx] / mass ** (1 / q)
    if m.ambient is dyadic.Ambient.LINE:
        centers = centers.real
        entries = entries.real
    Lop = LpOperator(seq, space, lmat)
    Rop = LpOperator(space, seq, rmat)
    D = diagonal(seq, entries)
    mhat = diagonal(space, centers)

    one = WeightedSpace(np.ones(1), p)
    col_blocks, row_blocks, l_blocks, r_blocks = [], [], [], []
    for n, idx in enumerate(hoods):
        sub = WeightedSpace(w[idx], p)
        sup = frozenset(idx.tolist())
        dev = centers[idx] - entries[n]
        col_blocks.append(Block(LpOperator(one, sub, (dev * lmat[idx, n])[:, None]), frozenset([n]), sup))
        row_blocks.append(Block(LpOperator(sub, one, (dev * rmat[n, idx])[None, :]), sup, frozenset([n])))
        l_blocks.append(Block(LpOperator(one, sub, lmat[idx, n][:, None]), frozenset([n]), sup))
        r_blocks.append(Block(LpOperator(sub, one, rmat[n, idx][None, :]), sup, frozenset([n])))
    rl = rmat @ lmat
    defects = {
        "ML-LD": float(norm_exact_disjoint(col_blocks)),
        "RM-DR": float(norm_exact_disjoint(row_blocks)),
        "RL-I": float(np.abs(rl - np.eye(k)).max(initial=0.0)),
    }
    norm_L = NormEstimate.exact(norm_exact_disjoint(l_blocks), NormMethod.EXACT_DISJOINT_BLOCKS)
    norm_R = NormEstimate.exact(norm_exact_disjoint(r_blocks), NormMethod.EXACT_DISJOINT_BLOCKS)
    return EmbeddingPair(Lop, Rop, D, mhat, entries, eps, tuple(hoods), defects, norm_L, norm_R,
                         float(target), float(raw_err))


# -- diagonal matching ---------------------------------------------------------


@dataclass(frozen=True)
class Matching:
    pairs: tuple
    head_size: int
    tail_deviation: tuple
    head_deviation: tuple

    @property
    def final_deviation(self) -> float:
        seq = self.tail_deviation or self.head_deviation
        return seq[-1] if seq else 0.0


def _sorted_by_distance(d: np.ndarray, r: np.ndarray) -> np.ndarray:
    return np.array(sorted(range(d.size), key=lambda i: (-r[i], d[i].real, d[i].imag)), dtype=int)


def match_diagonals(d1, d2, cluster: ClosedSetDesc, cluster_tol: float = 0.1) -> Matching:
    """Greedy bottleneck matching of two diagonals accumulating at ``cluster``.

    Both lists are sorted by distance to the cluster set (farthest first).
    The tail is paired in that order; the head is the shortest prefix after
    which the paired deviations are nonincreasing, and is paired by nearest
    neighbor instead.
    """
    d1 = np.atleast_1d(np.asarray(d1, dtype=complex))
    d2 = np.atleast_1d(np.asarray(d2, dtype=complex))
    if d1.size != d2.size:
        raise ValueError("diagonals must have the same length")
    for d in (d1, d2):
        if len({(round(z.real, 12), round(z.imag, 12)) for z in d}) != d.size:
            raise ValueError("diagonal entries must be distinct")
    if d1.size == 0:
        return Matching((), 0, (), ())
    r1, r2 = cluster.distance(d1), cluster.distance(d2)
    if cluster.is_empty() or min(r1.min(), r2.min()) > cluster_tol or abs(r1.min() - r2.min()) > cluster_tol:
        raise ValueError("hypothesis of Lemma violated: the diagonals do not share the cluster set")
    o1, o2 = _sorted_by_distance(d1, r1), _sorted_by_distance(d2, r2)
    dev = np.abs(d1[o1] - d2[o2])
    h = dev.size - 1
    while h > 0 and dev[h - 1] >= dev[h]:
        h -= 1
    pairs = []
    free = list(o2[:h])
    head_dev = []
    for i in o1[:h]:
        dist = [abs(d1[i] - d2[j]) for j in free]
        j = free.pop(int(np.argmin(dist)))
        pairs.append((int(i), int(j)))
        head_dev.append(float(abs(d1[i] - d2[j])))
    pairs += [(int(i), int(j)) for i, j in zip(o1[h:], o2[h:])]
    return Matching(tuple(pairs), int(h), tuple(float(x) for x in dev[h:]), tuple(head_dev))


# -- absorbing atoms -----------------------------------------------------------


DEMO_TARGETS = (0.2, 0.1, 0.05)


def _absorb_row(m: MeasureSpec, entries, target: float, L: int, p: float, power_kw: dict) -> dict:
    pair = build_embedding(m, entries, target, L, p)
    lm, rm = pair.L.matrix, pair.R.matrix
    mh = pair.mhat.matrix
    k = lm.shape[1]
    f = np.eye(mh.shape[0]) - lm @ rm
    b = f @ mh @ lm
    c = rm @ mh @ f
    e = rm @ mh @ lm - pair.D.matrix
    space = pair.mhat.domain
    seq = pair.D.domain
    total = direct_sum(space, seq)
    delta = np.zeros((total.dim, total.dim))
    n = space.dim
    delta[:n, n:] = b
    delta[n:, :n] = c
    delta[n:, n:] = e
    op = LpOperator(total, total, delta)
    parts = (interpolation_upper_bound(LpOperator(seq, space, b))
             + interpolation_upper_bound(LpOperator(space, seq, c))
             + float(np.abs(np.diag(e)).max(initial=0.0)))
    upper = min(parts, interpolation_upper_bound(op))
    lower = power_lower_bound(op, **power_kw).lower if k else 0.0
    q = dual_exponent(p)
    return {
        "target": target,
        "entries": k,
        "ML-LD": pair.defects["ML-LD"],
        "RM-DR": pair.defects["RM-DR"],
        "RL-I": pair.defects["RL-I"],
        "similarity_defect_lower": lower,
        "similarity_defect_upper": max(upper, lower),
        "discretization_error": pair.discretization_error,
        # W f = (F f, R f) and W^{-1}(g, x) = g + L x, with ||F|| <= 2 and ||L|| = ||R|| = 1.
        "condition_bound": (2.0**p + 1) ** (1 / p) * 2 ** (1 / q),
        "within_target": bool(max(upper, lower) <= target + pair.discretization_error
                              and all(pair.within_targets().values())),
    }


def atom_absorb_demo(m: MeasureSpec, entries, L: int, p: float = 2.0, targets=DEMO_TARGETS,
                     power_kw: dict | None = None) -> list[dict]:
    """Similarity defect of ``M_hat`` against ``M_hat (+) D`` at shrinking targets.

    With F = I - LR and W f = (F f, R f), the difference between
    ``W M_hat W^{-1}`` and ``F M_hat F (+) D`` is
    ``[[0, F M_hat L], [R M_hat F, R M_hat L - D]]``; each row reports bounds
    on its norm.
    """
    power_kw = power_kw or {"restarts": 2, "max_iter": 50}
    entries = list(entries)
    if not entries:
        return [{"target": t, "entries": 0, "ML-LD": 0.0, "RM-DR": 0.0, "RL-I": 0.0,
                 "similarity_defect_lower": 0.0, "similarity_defect_upper": 0.0,
                 "discretization_error": 0.0, "condition_bound": 1.0, "within_target": True}
                for t in targets]
    return [_absorb_row(m, entries, t, L, p, power_kw) for t in targets]
