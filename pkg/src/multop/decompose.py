"""Diagonal-plus-compact decomposition of the discretized multiplication operator.

Given a measure, an exponent p, a target epsilon and a finest level L:

1. normalize into the unit region and split off the atoms (they are already
   eigenvectors and pass through exactly);
2. measure the level projection norms of the Haar system exactly, and pick
   the smallest cutoff N whose geometric bound ``C * (head + tail)`` beats
   ``epsilon`` minus the discretization error;
3. build the hybrid basis (level-N indicators, then Haar functions above N)
   and let D be diagonal in it with the point lambda of the enclosing cell;
4. K = M_hat - D, with a certificate holding the exact per-level block norms
   and the bound chain they imply.

Rates: a level-n Haar block is within ``2**-(n-1)`` (line) or
``2**(1-(n-1)/2)`` (plane) of its diagonal value; the head within ``2**-N``
or ``2**(1-N/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import dyadic
from .dyadic import Ambient
from .haar import HaarBasis, build_haar, hybrid_basis, level_masses
from .lpnum import (
    Block,
    LpOperator,
    NormEstimate,
    NormMethod,
    WeightedSpace,
    dual_exponent,
    hs_norm,
    interpolation_upper_bound,
    mult_operator,
    norm_exact_disjoint,
    pi1_diag_bound,
    power_lower_bound,
    vec_norm,
)
from .measure import AffineMap, MeasureSpec, nonatomic_masses, normalize, split_parts, total_mass

DEFAULT_LEVEL_CAP = 14
SQRT2 = math.sqrt(2.0)


# -- rates --------------------------------------------------------------------


def tail_rate(n: int, ambient: Ambient) -> float:
    return 2.0 ** -(n - 1) if ambient is Ambient.LINE else 2.0 ** (1 - (n - 1) / 2)


def head_rate(N: int, ambient: Ambient) -> float:
    return 2.0**-N if ambient is Ambient.LINE else 2.0 ** (1 - N / 2)


def geometric_tail(M: int, ambient: Ambient) -> float:
    """``sum_{n >= M+1} tail_rate(n)`` in closed form."""
    if ambient is Ambient.LINE:
        return 2.0 ** (1 - M)
    return 2.0 ** (1 - M / 2) * (2 + SQRT2)


def rate_bound(N: int, ambient: Ambient, constant: float = 1.0) -> float:
    return constant * (head_rate(N, ambient) + geometric_tail(N, ambient))


def choose_cutoff(p: float, epsilon: float, constant: float, ambient: Ambient,
                  level_cap: int = DEFAULT_LEVEL_CAP) -> int:
    """Smallest N with ``constant * (head_rate(N) + tail sum) < epsilon``."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    dual_exponent(p)
    for N in range(level_cap + 1):
        if rate_bound(N, ambient, constant) < epsilon:
            return N
    raise ValueError(f"epsilon={epsilon} needs a cutoff above level {level_cap}: increase level cap")


# -- diagonal plan -------------------------------------------------------------


@dataclass(frozen=True)
class DiagonalPlan:
    """``lam[n][j-1]`` is the chosen point of A_{n,j} (0 if the cell misses the support)."""

    lam: tuple
    level: int
    cutoff: int = 0

    def __getitem__(self, cell) -> complex:
        n, j = cell
        return complex(self.lam[n][j - 1])


def choose_lambda(m: MeasureSpec, L: int, N: int = 0) -> DiagonalPlan:
    """Center of the heaviest finest descendant in each cell; lowest index on ties."""
    masses = nonatomic_masses(m, L)
    centers = dyadic.level_centers(L, m.ambient)
    lam = []
    for n in range(L + 1):
        blocks = masses.reshape(2**n, -1)
        pick = blocks.argmax(axis=1) + np.arange(2**n) * blocks.shape[1]
        vals = np.where(blocks.max(axis=1) > 0, centers[pick], 0)
        lam.append(tuple(complex(v) for v in vals))
    return DiagonalPlan(tuple(lam), L, N)


def element_entries(basis: HaarBasis, plan: DiagonalPlan) -> np.ndarray:
    """Diagonal value per element: lambda_{N,j} on the head, lambda_{n-1,j} on h_{n,j}."""
    return np.array([plan[e.support_cell.n, e.support_cell.j] for e in basis.elements])


def diagonal_in_basis(basis: HaarBasis, entries) -> np.ndarray:
    """Cell-coordinate matrix of the operator with ``u_k -> entries[k] u_k``."""
    entries = np.asarray(entries)
    return (basis.matrix * entries[None, :]) @ basis.inverse_matrix


# -- projections ---------------------------------------------------------------


def element_projection_norm(basis: HaarBasis, k: int, p: float) -> float:
    """Norm on L^p of the rank-one coordinate projection ``f -> <f,u>/<u,u> u``."""
    e = basis.elements[k]
    w = basis.space.weights[e.start:e.stop]
    q = dual_exponent(p)
    up = np.sum(w * np.abs(e.values) ** p) ** (1 / p)
    uq = np.sum(w * np.abs(e.values) ** q) ** (1 / q)
    return float(up * uq / basis.gram[k])


def projection_norms(basis: HaarBasis) -> tuple[dict[int, NormEstimate], NormEstimate]:
    """Exact norms of the level projections P_n (n > N) and of P_0 + ... + P_N.

    Each is a direct sum of rank-one projections with disjoint supports, so
    its norm is the largest summand.
    """
    groups = basis.level_groups()
    p = basis.p

    def level_norm(ks):
        return NormEstimate.exact(max(element_projection_norm(basis, k, p) for k in ks),
                                  NormMethod.EXACT_DISJOINT_BLOCKS)

    head = [k for k, e in enumerate(basis.elements) if e.kind == "head"]
    tails = {n: level_norm(ks) for n, ks in sorted(groups.items())
             if n > basis.cutoff}
    return tails, level_norm(head)


def right_conditional_expectation(k: np.ndarray, basis: HaarBasis, M: int) -> np.ndarray:
    """``K @ Q_M`` where Q_M averages over level-M cells (w.r.t. mu)."""
    w = basis.space.weights
    out = np.empty_like(k)
    lev = basis.level
    anc = (basis.js - 1) >> (lev - M)
    bounds = np.flatnonzero(np.diff(anc)) + 1
    for sl in np.split(np.arange(basis.space.dim), bounds):
        a, b = sl[0], sl[-1] + 1
        col = k[:, a:b] @ w[a:b] / w[a:b].sum()
        out[:, a:b] = col[:, None]
    return out


# -- certificate ---------------------------------------------------------------


@dataclass
class LevelRecord:
    n: int
    block_norm: float
    bound: float
    proj_norm: NormEstimate
    tail_upper: float = 0.0
    rate_tail: float = 0.0
    pi1: float | None = None
    pi1_bound: float | None = None

    def to_dict(self) -> dict:
        d = {"n": self.n, "block_norm": self.block_norm, "bound": self.bound,
             "proj_norm": self.proj_norm.to_dict(), "tail_upper": self.tail_upper,
             "rate_tail": self.rate_tail}
        if self.pi1 is not None:
            d.update(pi1=self.pi1, pi1_bound=self.pi1_bound)
        return d

    @classmethod
    def from_dict(cls, d) -> "LevelRecord":
        return cls(d["n"], d["block_norm"], d["bound"], NormEstimate.from_dict(d["proj_norm"]),
                   d.get("tail_upper", 0.0), d.get("rate_tail", 0.0), d.get("pi1"), d.get("pi1_bound"))


@dataclass
class DecompositionCertificate:
    ambient: Ambient
    p: float
    target_epsilon: float
    level: int
    cutoff: int
    empirical_constant: float
    discretization_error: float
    rate_bound_at_N: float
    head: LevelRecord
    levels: list = field(default_factory=list)
    total_K_lower: float = 0.0
    total_K_upper: float = 0.0
    total_K_upper_chain: float = 0.0
    total_K_upper_interpolation: float = 0.0
    frame: AffineMap = field(default_factory=AffineMap)
    pi1_total: float | None = None
    hs_norm: float | None = None
    hs_closed_form: float | None = None

    @property
    def per_level_block_norm(self) -> dict[int, float]:
        return {r.n: r.block_norm for r in self.levels}

    @property
    def head_norm(self) -> float:
        return self.head.block_norm

    @property
    def meets_target(self) -> bool:
        return self.total_K_upper + self.discretization_error < self.target_epsilon

    def to_dict(self) -> dict:
        d = {
            "kind": "decomposition_certificate",
            "ambient": self.ambient.value,
            "p": self.p,
            "target_epsilon": self.target_epsilon,
            "level": self.level,
            "cutoff": self.cutoff,
            "empirical_constant": self.empirical_constant,
            "empirical_constant_note": "exact projection norms at this resolution; a lower bound for C(p)",
            "discretization_error": self.discretization_error,
            "rate_bound_at_N": self.rate_bound_at_N,
            "frame": {"shift": [self.frame.shift.real, self.frame.shift.imag], "scale": self.frame.scale},
            "head": self.head.to_dict(),
            "levels": [r.to_dict() for r in self.levels],
            "totals": {
                "K_lower": self.total_K_lower,
                "K_upper": self.total_K_upper,
                "K_upper_chain": self.total_K_upper_chain,
                "K_upper_interpolation": self.total_K_upper_interpolation,
                "K_upper_plus_discretization": self.total_K_upper + self.discretization_error,
                "meets_target": self.meets_target,
            },
        }
        if self.pi1_total is not None:
            d["pi1"] = {"total_shape": self.pi1_total, "hs_norm": self.hs_norm,
                        "hs_closed_form": self.hs_closed_form}
        return d

    @classmethod
    def from_dict(cls, d) -> "DecompositionCertificate":
        t = d["totals"]
        pi1 = d.get("pi1", {})
        return cls(
            Ambient.parse(d["ambient"]), d["p"], d["target_epsilon"], d["level"], d["cutoff"],
            d["empirical_constant"], d["discretization_error"], d["rate_bound_at_N"],
            LevelRecord.from_dict(d["head"]), [LevelRecord.from_dict(r) for r in d["levels"]],
            t["K_lower"], t["K_upper"], t["K_upper_chain"], t["K_upper_interpolation"],
            AffineMap(complex(*d["frame"]["shift"]), d["frame"]["scale"]),
            pi1.get("total_shape"), pi1.get("hs_norm"), pi1.get("hs_closed_form"),
        )


@dataclass(frozen=True, eq=False)
class Decomposition:
    """``D + K == mhat`` on the coordinate space (level-L cells, then atoms)."""

    D: LpOperator
    K: LpOperator
    certificate: DecompositionCertificate
    basis: HaarBasis | None
    mhat: LpOperator
    plan: DiagonalPlan | None
    normalized: MeasureSpec

    def __iter__(self):
        return iter((self.D, self.K, self.certificate))


def _block_norms(basis: HaarBasis, centers: np.ndarray, entries: np.ndarray) -> np.ndarray:
    """``||(M_hat - entries[k]) u_k||_p`` per element; each u_k has unit norm."""
    out = np.empty(basis.dim)
    space = basis.space
    for k, e in enumerate(basis.elements):
        sl = slice(e.start, e.stop)
        sub = WeightedSpace(space.weights[sl], space.p)
        out[k] = vec_norm(sub, (centers[sl] - entries[k]) * e.values)
    return out


def level_block_norms(basis: HaarBasis, plan: DiagonalPlan) -> tuple[float, dict[int, float]]:
    """Head block norm and per-level tail block norms, via disjoint-block norms."""
    centers = dyadic.level_centers(basis.level, basis.measure.ambient)[basis.js - 1]
    if basis.measure.ambient is Ambient.LINE:
        centers = centers.real
    entries = element_entries(basis, plan)
    one = WeightedSpace(np.ones(1), basis.p)
    groups: dict[int, list[Block]] = {}
    head: list[Block] = []
    for k, e in enumerate(basis.elements):
        sl = slice(e.start, e.stop)
        sub = WeightedSpace(basis.space.weights[sl], basis.p)
        col = ((centers[sl] - entries[k]) * e.values)[:, None]
        blk = Block(LpOperator(one, sub, col), frozenset(range(e.start, e.stop)),
                    frozenset(range(e.start, e.stop)))
        (head if e.kind == "head" else groups.setdefault(e.n, [])).append(blk)
    return float(norm_exact_disjoint(head)), {n: float(norm_exact_disjoint(b)) for n, b in sorted(groups.items())}


def block_norm_table(m: MeasureSpec, p: float, L: int, N: int) -> tuple[float, dict[int, float]]:
    """Head and per-level block norms without forming D or K densely."""
    mn, _ = normalize(m)
    na, _ = split_parts(mn)
    return level_block_norms(hybrid_basis(na, L, N, p), choose_lambda(na, L, N))


def _atomic_only(mn: MeasureSpec, fmap: AffineMap, p: float, epsilon: float, L: int) -> Decomposition:
    mhat, err = mult_operator(mn, L, p)
    zero = LpOperator(mhat.domain, mhat.codomain, np.zeros_like(mhat.matrix))
    head = LevelRecord(0, 0.0, head_rate(0, mn.ambient), NormEstimate.exact(1.0, NormMethod.EXACT_DISJOINT_BLOCKS))
    cert = DecompositionCertificate(mn.ambient, p, epsilon, L, 0, 1.0, err, 0.0, head, frame=fmap)
    return Decomposition(mhat, zero, cert, None, mhat, None, mn)


def decompose(m: MeasureSpec, p: float, epsilon: float, L: int,
              power_kw: dict | None = None) -> Decomposition:
    """Split ``M_hat = D + K`` with D diagonal in a hybrid Haar basis and ``||K||`` certified."""
    power_kw = power_kw or {}
    mn, fmap = normalize(m)
    na, _ = split_parts(mn)
    if total_mass(na) <= 0:
        return _atomic_only(mn, fmap, p, epsilon, L)
    mhat, disc = mult_operator(mn, L, p)
    budget = epsilon - disc
    if budget <= 0:
        raise ValueError(f"discretization error {disc:.3g} at level {L} exceeds epsilon; raise the level")

    full = build_haar(na, L, p)
    tails0, _ = projection_norms(full)
    constant = max([1.0] + [e.upper for e in tails0.values()])
    if constant - 1.0 < 1e-12:
        constant = 1.0  # uniform masses give exactly 1 up to rounding
    N = choose_cutoff(p, budget, constant, mn.ambient, level_cap=L)

    basis = hybrid_basis(na, L, N, p)
    plan = choose_lambda(na, L, N)
    entries = element_entries(basis, plan)
    if mn.ambient is Ambient.LINE:
        entries = entries.real
    d_cells = diagonal_in_basis(basis, entries)
    ncell = basis.space.dim
    d_full = np.array(mhat.matrix, dtype=d_cells.dtype, copy=True)
    d_full[:ncell, :ncell] = d_cells
    D = LpOperator(mhat.domain, mhat.codomain, d_full)
    K = mhat - D

    head_norm, tail_norms = level_block_norms(basis, plan)
    tails, qn = projection_norms(basis)
    amb = mn.ambient
    records = []
    for n in range(N + 1, L + 1):
        records.append(LevelRecord(n, tail_norms.get(n, 0.0), tail_rate(n, amb),
                                   tails.get(n, NormEstimate.exact(0.0, NormMethod.EXACT_DISJOINT_BLOCKS))))
    contrib = [r.block_norm * r.proj_norm.upper for r in records]
    for i, r in enumerate(records):
        r.tail_upper = float(sum(contrib[i + 1:]))
        r.rate_tail = constant * geometric_tail(r.n, amb)
    head = LevelRecord(N, head_norm, head_rate(N, amb), qn,
                       tail_upper=float(sum(contrib)), rate_tail=constant * geometric_tail(N, amb))
    chain = head_norm * qn.upper + float(sum(contrib))
    k_cells = LpOperator(basis.space, basis.space, K.matrix[:ncell, :ncell])
    interp = interpolation_upper_bound(k_cells)
    lower = power_lower_bound(k_cells, **power_kw).lower
    cert = DecompositionCertificate(
        amb, p, epsilon, L, N, constant, disc, rate_bound(N, amb, constant), head, records,
        total_K_lower=lower, total_K_upper=max(min(chain, interp), lower),
        total_K_upper_chain=chain, total_K_upper_interpolation=interp, frame=fmap,
    )
    return Decomposition(D, K, cert, basis, mhat, plan, mn)


def decompose_line(m: MeasureSpec, p: float, epsilon: float, L: int,
                   power_kw: dict | None = None) -> Decomposition:
    """:func:`decompose` on the line plus the per-level 1-summing bound shapes.

    Each level restriction of K is a diagonal from l^p into L^p with entries
    the block norms, so its 1-summing norm is at most C(p) times
    :func:`pi1_diag_bound` of those entries.  At p = 2 the Hilbert-Schmidt
    norm of K is computed exactly as well.
    """
    if m.ambient is not Ambient.LINE:
        raise ValueError("decompose_line needs a measure on the line")
    dec = decompose(m, p, epsilon, L, power_kw)
    cert = dec.certificate
    if dec.basis is None:
        cert.pi1_total = 0.0
        if p == 2:
            cert.hs_norm = 0.0
            cert.hs_closed_form = 0.0
        return dec
    basis, plan = dec.basis, dec.plan
    centers = dyadic.level_centers(basis.level, Ambient.LINE)[basis.js - 1].real
    norms = _block_norms(basis, centers, element_entries(basis, plan).real)
    r = min(dual_exponent(p), 2.0)
    groups = basis.level_groups()
    head_ks = [k for k, e in enumerate(basis.elements) if e.kind == "head"]
    cert.head.pi1 = pi1_diag_bound(norms[head_ks], p)
    cert.head.pi1_bound = 2.0 ** (cert.cutoff / r) / 2.0**cert.cutoff
    total = cert.head.pi1 * cert.head.proj_norm.upper
    for rec in cert.levels:
        ks = groups.get(rec.n, [])
        rec.pi1 = pi1_diag_bound(norms[ks], p) if ks else 0.0
        rec.pi1_bound = 2.0 ** ((rec.n - 1) / r) / 2.0 ** (rec.n - 1)
        total += rec.pi1 * rec.proj_norm.upper
    cert.pi1_total = float(total)
    if p == 2:
        ncell = basis.space.dim
        k_cells = LpOperator(basis.space, basis.space, dec.K.matrix[:ncell, :ncell])
        cert.hs_norm = hs_norm(k_cells)
        cert.hs_closed_form = 2.0 ** (-cert.cutoff / 2) * (3 + SQRT2)
    return dec


# -- verification --------------------------------------------------------------


@dataclass
class Violation:
    check: str
    index: tuple | int | None
    detail: str


@dataclass
class VerificationReport:
    checks: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    tail_lower: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def fail(self, check: str, index, detail: str):
        self.checks[check] = False
        self.violations.append(Violation(check, index, detail))

    def to_dict(self) -> dict:
        return {"ok": self.ok, "checks": {k: ("pass" if v else "fail") for k, v in sorted(self.checks.items())},
                "violations": [{"check": v.check, "index": v.index, "detail": v.detail} for v in self.violations]}


def verify_certificate(cert: DecompositionCertificate, D: LpOperator, K: LpOperator, basis: HaarBasis | None,
                       power_restarts: int = 2, power_iter: int = 50, tol: float = 1e-12) -> VerificationReport:
    """Recheck a decomposition independently of how it was assembled.

    (a) every diagonal value of D in the hybrid basis lies in its cell and
        its block meets the rate, by direct vector norms;
    (b) a power-iteration lower bound on ``||K P_n||`` stays below the
        certified ``block norm * ||P_n||``;
    (c) the bounds on ``||K (I - Q_M)||`` are nonincreasing, dominated by the
        geometric tail, consistent with power-iteration lower bounds, and
        vanish at M = L;
    (d) D is diagonal in the hybrid basis;
    (e) ``D + K`` is the diagonal multiplication operator;
    (f) the certified total meets the target.
    """
    rep = VerificationReport()
    for name in "abcdef":
        rep.checks[name] = True
    amb = cert.ambient
    pk = dict(restarts=power_restarts, max_iter=power_iter)

    mhat = D.matrix + K.matrix
    if not np.all(np.abs(mhat - np.diag(np.diag(mhat))) <= tol):
        rep.fail("e", None, "D + K is not diagonal")
    if basis is None:
        if np.abs(K.matrix).max(initial=0.0) > tol:
            rep.fail("e", None, "atomic-only decomposition has nonzero K")
        if not cert.meets_target:
            rep.fail("f", None, "certified total does not meet the target")
        return rep

    ncell = basis.space.dim
    centers = dyadic.level_centers(basis.level, amb)[basis.js - 1]
    if amb is Ambient.LINE:
        centers = centers.real
    if np.abs(np.diag(mhat)[:ncell] - centers).max() > tol:
        rep.fail("e", None, "diagonal of D + K differs from the cell centers")
    if K.matrix.shape[0] > ncell and np.abs(K.matrix[ncell:, :]).max() + np.abs(K.matrix[:, ncell:]).max() > tol:
        rep.fail("e", None, "K acts on atom coordinates")

    d_cells = D.matrix[:ncell, :ncell]
    k_cells = K.matrix[:ncell, :ncell]
    conj = basis.inverse_matrix @ d_cells @ basis.matrix
    delta = np.diag(conj).copy()
    off = np.abs(conj - np.diag(delta)).max(initial=0.0)
    if off > 1e-10:
        rep.fail("d", None, f"largest off-diagonal entry in the hybrid basis is {off:.3e}")

    # (a)
    space = basis.space
    recorded = {r.n: r.block_norm for r in cert.levels}
    for k, e in enumerate(basis.elements):
        cell = e.support_cell
        g = dyadic.geometry(cell, amb)
        z = complex(delta[k])
        inside = (g.x_min - tol <= z.real <= g.x_max + tol) and (g.y_min - tol <= z.imag <= g.y_max + tol)
        label = (e.kind, e.n, e.j)
        if not inside:
            rep.fail("a", label, f"diagonal value {z} lies outside cell {cell}")
        sl = slice(e.start, e.stop)
        val = vec_norm(WeightedSpace(space.weights[sl], space.p), (centers[sl] - delta[k]) * e.values)
        bound = head_rate(cert.cutoff, amb) if e.kind == "head" else tail_rate(e.n, amb)
        if val > bound + tol:
            rep.fail("a", label, f"block norm {val:.6g} exceeds rate {bound:.6g}")
        ref = cert.head.block_norm if e.kind == "head" else recorded.get(e.n, 0.0)
        if val > ref + 1e-10:
            rep.fail("a", label, f"block norm {val:.6g} exceeds certified {ref:.6g}")

    # (b) and (c)
    kq = {M: right_conditional_expectation(k_cells, basis, M) for M in range(cert.cutoff, basis.level + 1)}
    for rec in cert.levels:
        kp = kq[rec.n] - kq[rec.n - 1]
        low = power_lower_bound(LpOperator(space, space, kp), **pk).lower
        cap = rec.block_norm * rec.proj_norm.upper
        if low > cap * (1 + 1e-9) + tol:
            rep.fail("b", rec.n, f"||K P_n|| >= {low:.6g} exceeds certified {cap:.6g}")
    uppers = [(cert.cutoff, cert.head.tail_upper, cert.head.rate_tail)] + [
        (r.n, r.tail_upper, r.rate_tail) for r in cert.levels]
    prev = math.inf
    for M, up, geo in uppers:
        if up > prev + tol:
            rep.fail("c", M, "tail bound increased")
        prev = up
        if up > geo * (1 + 1e-12) + tol:
            rep.fail("c", M, f"tail bound {up:.6g} exceeds geometric tail {geo:.6g}")
        tail = k_cells - kq[M]
        if M == basis.level:
            if np.abs(tail).max(initial=0.0) > tol:
                rep.fail("c", M, "K (I - Q_L) is not zero")
            rep.tail_lower[M] = 0.0
            continue
        low = power_lower_bound(LpOperator(space, space, tail), **pk).lower
        rep.tail_lower[M] = low
        if low > up * (1 + 1e-9) + tol:
            rep.fail("c", M, f"||K (I - Q_M)|| >= {low:.6g} exceeds bound {up:.6g}")

    # (f)
    if cert.total_K_upper > cert.total_K_upper_chain * (1 + 1e-12) + tol:
        rep.fail("f", None, "total upper bound exceeds the chain bound")
    if not cert.meets_target:
        rep.fail("f", None, f"{cert.total_K_upper + cert.discretization_error:.6g} >= epsilon")
    return rep


def recheck(doc: dict, m: MeasureSpec, rtol: float = 1e-9) -> VerificationReport:
    """Re-run the decomposition named in a certificate document and verify it.

    Fails if any recorded number drifts from the recomputed certificate.
    """
    cert = DecompositionCertificate.from_dict(doc)
    if cert.ambient is Ambient.LINE and doc.get("pi1"):
        dec = decompose_line(m, cert.p, cert.target_epsilon, cert.level)
    else:
        dec = decompose(m, cert.p, cert.target_epsilon, cert.level)
    rep = verify_certificate(dec.certificate, dec.D, dec.K, dec.basis)
    fresh = dec.certificate
    rep.checks["document"] = True
    pairs = [("cutoff", cert.cutoff, fresh.cutoff), ("head", cert.head.block_norm, fresh.head.block_norm),
             ("K_upper", cert.total_K_upper, fresh.total_K_upper)]
    pairs += [(f"level {a.n}", a.block_norm, b.block_norm) for a, b in zip(cert.levels, fresh.levels)]
    if len(cert.levels) != len(fresh.levels):
        rep.fail("document", None, "level count differs")
    for name, a, b in pairs:
        if not math.isclose(a, b, rel_tol=rtol, abs_tol=1e-15):
            rep.fail("document", name, f"recorded {a} vs recomputed {b}")
    return rep
