"""Command-line driver.

    multop decompose SPEC --p 2 --epsilon 0.5 --level 10
    multop classify SPEC1 SPEC2 --p 3
    multop haar-const SPEC --p 4 --level 6
    multop norms SPEC --p 3 --level 8
    multop demo-nonembed --p 4
    multop demo-absorb SPEC --entries 0.25,0.75 --level 10

``--format table`` writes CSV with a header row; ``--format records`` writes
sorted JSON.  Exit status: 0 success, 1 a check failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import classify as cls
from . import decompose as dec
from .dyadic import Ambient
from .haar import build_haar, estimate_unconditional_constant
from .lpnum import LpOperator, NormEstimate, mult_operator, nonembed_table, op_norm, sequence_space
from .measure import SpecError, load_spec, normalize, split_parts

LEVEL_CAP = 14
COMMANDS = ("decompose", "classify", "haar-const", "norms", "demo-nonembed", "demo-absorb")


@dataclass
class RunConfig:
    command: str
    p: float = 2.0
    epsilon: float = 0.5
    level: int = 10
    seed: int = 42
    inputs: list = field(default_factory=list)
    out: str | None = None
    format: str = "table"
    entries: list | None = None
    kmax: int = 8
    op_norm: float = 1.0
    budget: int = 16

    def validate(self):
        if self.command not in COMMANDS:
            raise SpecError("command", f"unknown command {self.command!r}")
        if not (self.p > 1 and math.isfinite(self.p)):
            raise SpecError("--p", "must lie in (1, inf)")
        if not self.epsilon > 0:
            raise SpecError("--epsilon", "must be positive")
        if not 0 <= self.level <= LEVEL_CAP:
            raise SpecError("--level", f"must lie in 0..{LEVEL_CAP}")
        if self.format not in ("table", "records"):
            raise SpecError("--format", "must be 'table' or 'records'")
        need = {"classify": 2, "demo-nonembed": 0}.get(self.command, 1)
        if len(self.inputs) != need:
            raise SpecError("inputs", f"{self.command} takes {need} spec path(s), got {len(self.inputs)}")


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return x.item()
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def render(rows: list[dict], doc: dict, fmt: str) -> str:
    if fmt == "records":
        return json.dumps(_clean(doc), sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    if rows:
        cols = list(rows[0])
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: _clean(r.get(k)) for k in cols})
    return buf.getvalue()


def _estimate_row(name: str, est: NormEstimate) -> dict:
    return {"operator": name, "lower": est.lower, "upper": est.upper, "method": est.method.value,
            "converged": est.converged}


# -- commands ------------------------------------------------------------------


def cmd_decompose(cfg: RunConfig):
    m = load_spec(cfg.inputs[0])
    run = dec.decompose_line if m.ambient is Ambient.LINE else dec.decompose
    power_kw = {"seed": cfg.seed}
    rows = []
    for L in range(min(4, cfg.level), cfg.level + 1):
        try:
            r = run(m, cfg.p, cfg.epsilon, L, power_kw)
        except ValueError as exc:
            rows.append({"level": L, "K_upper": None, "discretization_error": None, "cutoff": None,
                         "empirical_constant": None, "meets_target": False, "note": str(exc)})
            continue
        c = r.certificate
        rows.append({"level": L, "K_upper": c.total_K_upper, "discretization_error": c.discretization_error,
                     "cutoff": c.cutoff, "empirical_constant": c.empirical_constant,
                     "meets_target": c.meets_target, "note": ""})
    final = run(m, cfg.p, cfg.epsilon, cfg.level, power_kw)
    report = dec.verify_certificate(final.certificate, final.D, final.K, final.basis)
    doc = {"certificate": final.certificate.to_dict(), "verification": report.to_dict(),
           "convergence": rows}
    return rows, doc, report.ok


def cmd_classify(cfg: RunConfig):
    m1, m2 = load_spec(cfg.inputs[0]), load_spec(cfg.inputs[1])
    v = cls.classify(m1, m2, cfg.p)
    doc = {"p": cfg.p, "inputs": [Path(x).name for x in cfg.inputs], "verdict": v.to_dict()}
    rows = [{"fact": "similar_mod_compact", "value": v.to_dict()["similar_mod_compact"]},
            {"fact": "approx_similar", "value": v.approx_similar}]
    rows += [dict(r) for r in v.reasons]
    return rows, doc, True


def cmd_haar_const(cfg: RunConfig):
    m = load_spec(cfg.inputs[0])
    mn, _ = normalize(m)
    na, _ = split_parts(mn)
    rows = []
    for L in range(1, cfg.level + 1):
        b = build_haar(na, L, cfg.p)
        est = estimate_unconditional_constant(b, budget=cfg.budget, seed=cfg.seed)
        rows.append({"level": L, "basis_size": b.dim, "estimate": est})
    return rows, {"p": cfg.p, "seed": cfg.seed, "budget": cfg.budget, "rows": rows}, True


def cmd_norms(cfg: RunConfig):
    m = load_spec(cfg.inputs[0])
    mn, _ = normalize(m)
    mhat, err = mult_operator(mn, cfg.level, cfg.p)
    rows = [_estimate_row("M_hat", op_norm(mhat, "exact"))]
    na, _ = split_parts(mn)
    if na.nonatomic:
        b = build_haar(na, cfg.level, cfg.p)
        # coefficients live in l^p since every element has unit norm
        seq = sequence_space(b.dim, cfg.p)
        rows.append(_estimate_row("haar_synthesis", op_norm(LpOperator(seq, b.space, b.matrix),
                                                            "both", seed=cfg.seed)))
        rows.append(_estimate_row("haar_analysis", op_norm(LpOperator(b.space, seq, b.inverse_matrix),
                                                           "both", seed=cfg.seed)))
    doc = {"p": cfg.p, "level": cfg.level, "discretization_error": err, "norms": rows}
    return rows, doc, True


def cmd_demo_nonembed(cfg: RunConfig):
    rows = nonembed_table(cfg.p, range(1, cfg.kmax + 1), cfg.op_norm)
    return rows, {"p": cfg.p, "op_norm": cfg.op_norm, "rows": rows}, True


def cmd_demo_absorb(cfg: RunConfig):
    m = load_spec(cfg.inputs[0])
    entries = cfg.entries if cfg.entries is not None else [0.25, 0.75]
    rows = cls.atom_absorb_demo(m, entries, cfg.level, cfg.p, power_kw={"restarts": 2, "max_iter": 50,
                                                                        "seed": cfg.seed})
    ok = all(r["within_target"] for r in rows)
    return rows, {"p": cfg.p, "level": cfg.level, "entries": entries, "rows": rows}, ok


HANDLERS = {
    "decompose": cmd_decompose,
    "classify": cmd_classify,
    "haar-const": cmd_haar_const,
    "norms": cmd_norms,
    "demo-nonembed": cmd_demo_nonembed,
    "demo-absorb": cmd_demo_absorb,
}


def run(cfg: RunConfig, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        cfg.validate()
        rows, doc, ok = HANDLERS[cfg.command](cfg)
    except SpecError as exc:
        stderr.write(json.dumps({"error": exc.args[0] if exc.args else str(exc), "field": exc.field}) + "\n")
        return 2
    except (ValueError, OSError) as exc:
        stderr.write(json.dumps({"error": str(exc), "field": None}) + "\n")
        return 2
    text = render(rows, doc, cfg.format)
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        stdout.write(text)
    return 0 if ok else 1


def _entries(text: str) -> list[complex | float]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if tok:
            z = complex(tok.replace("i", "j"))
            out.append(z.real if z.imag == 0 else z)
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="multop", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("inputs", nargs="*", help="measure spec JSON files")
    ap.add_argument("--p", type=float, default=2.0)
    ap.add_argument("--epsilon", type=float, default=0.5)
    ap.add_argument("--level", type=int, default=10)
    ap.add_argument("--seed", type=int, default=42)
    ap.add_argument("--out")
    ap.add_argument("--format", choices=("table", "records"), default="table")
    ap.add_argument("--entries", type=_entries, help="comma-separated points, e.g. 0.25,0.75")
    ap.add_argument("--kmax", type=int, default=8)
    ap.add_argument("--op-norm", type=float, default=1.0)
    ap.add_argument("--budget", type=int, default=16)
    return ap


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(ns.command, ns.p, ns.epsilon, ns.level, ns.seed, ns.inputs, ns.out, ns.format,
                    ns.entries, ns.kmax, ns.op_norm, ns.budget)
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
