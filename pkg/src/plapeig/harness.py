"""Cross-module checks: p-sweeps, the crossing point, the p = 2 baseline,
multiplicity clustering and large-p trends.

Verdicts on strict inequalities carry error bars. The FEM error of a
first eigenvalue is estimated by re-solving on a mesh with twice the edge
length, ``err = |lam(h) - lam(2h)|``; the radial error comes from
re-integration at a tighter tolerance. A row whose gap does not exceed the
combined error is reported as inconclusive (``None``).
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import radial
from .fem import P_FEM_MAX, P_FEM_MIN, solve_first_eig, solve_linear_eigs
from .geometry import make_sector

log = logging.getLogger(__name__)

CACHE_ENV = "PLAPEIG_CACHE_DIR"
SWEEP_HEADER = [
    "p", "tau1", "tau2", "mu2", "nu1", "nu2", "gap_holds", "tau1_lt_mu2",
    "tau2_minus_mu2", "h", "converged",
]


# ---------------------------------------------------------------------------
# results cache


def cache_key(params: dict) -> str:
    """sha256 of the canonical JSON of ``params`` (sorted keys, repr floats)."""
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


class ResultCache:
    """Directory of JSON files named by :func:`cache_key`; last writer wins."""

    def __init__(self, root: Optional[os.PathLike] = None):
        self.root = Path(root) if root is not None else None
        if self.root is not None:
            self.root.mkdir(parents=True, exist_ok=True)

    @classmethod
    def from_env(cls, default: Optional[os.PathLike] = None) -> "ResultCache":
        return cls(os.environ.get(CACHE_ENV) or default)

    def get(self, params: dict) -> Optional[dict]:
        if self.root is None:
            return None
        path = self.root / f"{cache_key(params)}.json"
        if not path.exists():
            return None
        try:
            return json.loads(path.read_text())["result"]
        except (OSError, ValueError, KeyError):
            return None

    def put(self, params: dict, result: dict) -> None:
        if self.root is None:
            return
        path = self.root / f"{cache_key(params)}.json"
        fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            json.dump({"params": params, "result": result}, fh, sort_keys=True, indent=1)
        os.replace(tmp, path)


def sector_eigenvalue(
    angle: float, p: float, h: float, R: float = 1.0, tol: float = 1e-10,
    cache: Optional[ResultCache] = None,
) -> dict:
    """First eigenvalue of a sector, cached by (kind, R, angle, p, h, tol)."""
    params = {"kind": "sector", "R": float(R), "angle": float(angle), "p": float(p), "h": float(h), "tol": float(tol)}
    if cache is not None:
        hit = cache.get(params)
        if hit is not None:
            return hit
    res = solve_first_eig(make_sector(R, angle, h), p, tol=tol)
    out = {
        "lambda": res.lam,
        "iterations": res.iterations,
        "residual": res.residual,
        "converged": bool(res.converged),
    }
    if cache is not None:
        cache.put(params, out)
    return out


def fem_with_error(angle, p, h, R=1.0, tol=1e-10, cache=None) -> Tuple[dict, float]:
    """Eigenvalue at ``h`` and its error estimate from the ``2h`` mesh."""
    fine = sector_eigenvalue(angle, p, h, R, tol, cache)
    coarse_h = min(2.0 * h, 0.5 * R)
    coarse = sector_eigenvalue(angle, p, coarse_h, R, tol, cache)
    return fine, abs(fine["lambda"] - coarse["lambda"])


# ---------------------------------------------------------------------------
# sweeps


@dataclass
class SweepRow:
    p: float
    h: float
    tau1: float = float("nan")
    tau2: float = float("nan")
    mu2: float = float("nan")
    nu1: float = float("nan")
    nu2: float = float("nan")
    tau1_err: float = float("nan")
    tau2_err: float = float("nan")
    mu2_err: float = float("nan")
    gap: float = float("nan")
    gap_margin: float = float("nan")
    residual1: float = float("nan")
    residual2: float = float("nan")
    converged: bool = False
    errors: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors and self.converged

    @property
    def gap_holds(self) -> Optional[bool]:
        if math.isnan(self.gap):
            return None
        return self.gap > self.gap_margin

    @property
    def tau2_minus_mu2(self) -> float:
        return self.tau2 - self.mu2

    @property
    def tau1_lt_mu2(self) -> Optional[bool]:
        return strict_verdict(self.mu2 - self.tau1, self.tau1_err + self.mu2_err)

    @property
    def tau2_lt_mu2(self) -> Optional[bool]:
        return strict_verdict(self.mu2 - self.tau2, self.tau2_err + self.mu2_err)

    def csv_row(self) -> List[str]:
        return [
            _fmt(self.p), _fmt(self.tau1), _fmt(self.tau2), _fmt(self.mu2), _fmt(self.nu1),
            _fmt(self.nu2), _verdict(self.gap_holds), _verdict(self.tau1_lt_mu2),
            _fmt(self.tau2_minus_mu2), _fmt(self.h), "true" if self.converged else "false",
        ]

    def to_dict(self) -> dict:
        d = asdict(self)
        d.update(
            gap_holds=self.gap_holds,
            tau1_lt_mu2=self.tau1_lt_mu2,
            tau2_minus_mu2=self.tau2_minus_mu2,
        )
        return d


def strict_verdict(gap: float, err: float) -> Optional[bool]:
    """True/False when ``|gap|`` beats the error bar, otherwise None."""
    if math.isnan(gap) or math.isnan(err):
        return None
    if gap > err:
        return True
    if gap < -err:
        return False
    return None


def _fmt(x: float) -> str:
    return "nan" if x != x else f"{x:.12g}"


def _verdict(v: Optional[bool]) -> str:
    return "inconclusive" if v is None else ("true" if v else "false")


def sweep_row(p: float, h: float = 0.05, R: float = 1.0, tol: float = 1e-10, cache: Optional[ResultCache] = None) -> SweepRow:
    """One p: tau_1, tau_2 on the half and quarter disc, mu_2 radially."""
    row = SweepRow(p=float(p), h=float(h))
    try:
        cert = radial.certify_roots(p, 2, 2)
        row.nu1, row.nu2 = (float(v) for v in cert.roots)
        row.mu2 = (row.nu2 / R) ** p
        row.mu2_err = p * row.mu2 * float(cert.errors[1]) / row.nu2
        row.gap = row.nu2 - 2.0 * row.nu1
        row.gap_margin = 10.0 * float(2.0 * cert.errors[0] + cert.errors[1])
    except (radial.RadialError, ValueError) as exc:
        row.errors.append(f"radial: {exc}")
    if P_FEM_MIN <= p <= P_FEM_MAX:
        try:
            r1, e1 = fem_with_error(math.pi, p, h, R, tol, cache)
            r2, e2 = fem_with_error(math.pi / 2, p, h, R, tol, cache)
            row.tau1, row.tau1_err, row.residual1 = r1["lambda"], e1, r1["residual"]
            row.tau2, row.tau2_err, row.residual2 = r2["lambda"], e2, r2["residual"]
            row.converged = r1["converged"] and r2["converged"]
        except Exception as exc:  # a failed row never aborts the sweep
            row.errors.append(f"fem: {exc}")
    else:
        row.errors.append(f"fem: p={p} outside [{P_FEM_MIN}, {P_FEM_MAX}]")
    return row


def _row_task(args):
    p, h, R, tol, cache_root = args
    return sweep_row(p, h, R, tol, ResultCache(cache_root) if cache_root else None)


def sweep(
    p_grid: Sequence[float], h: float = 0.05, R: float = 1.0, tol: float = 1e-10,
    cache: Optional[ResultCache] = None, workers: int = 1,
) -> List[SweepRow]:
    tasks = [(float(p), h, R, tol, str(cache.root) if cache and cache.root else None) for p in p_grid]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(_row_task, tasks))
    rows = []
    for t in tasks:
        rows.append(sweep_row(t[0], h, R, tol, cache))
        log.info("p=%g done", t[0])
    return rows


def sweep_csv(
    rows: Sequence[SweepRow], crossing: Optional["Crossing"] = None, notes: Sequence[str] = ()
) -> str:
    """CSV table; ``notes`` are appended as ``#`` comment lines."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow(r.csv_row())
    if crossing is not None:
        buf.write(f"# crossing tau2_minus_mu2 in [{crossing.p_a:.6f}, {crossing.p_b:.6f}]\n")
    for n in notes:
        buf.write(f"# {n}\n")
    return buf.getvalue()


# ---------------------------------------------------------------------------
# crossing


class NoSignChange(ValueError):
    pass


@dataclass
class Crossing:
    p_a: float
    p_b: float
    value_a: float
    value_b: float
    refinements: int

    @property
    def width(self) -> float:
        return self.p_b - self.p_a


def find_crossing(
    rows: Sequence[SweepRow],
    column: str = "tau2_minus_mu2",
    evaluate: Optional[Callable[[float], float]] = None,
    width: float = 0.01,
    max_refine: int = 10,
) -> Crossing:
    """First sign change of ``column`` along the grid, bisected by ``evaluate``."""
    pts = sorted(
        (r.p, getattr(r, column)) for r in rows if r.ok and not math.isnan(getattr(r, column))
    )
    if len(pts) < 2:
        raise ValueError("need at least two successful rows")
    for (pa, va), (pb, vb) in zip(pts, pts[1:]):
        if va == 0.0:
            return Crossing(pa, pa, va, va, 0)
        if (va < 0) != (vb < 0):
            break
    else:
        raise NoSignChange(f"{column} keeps one sign on [{pts[0][0]}, {pts[-1][0]}]")
    n = 0
    while evaluate is not None and pb - pa > width and n < max_refine:
        pm = 0.5 * (pa + pb)
        vm = evaluate(pm)
        n += 1
        if (vm < 0) == (va < 0):
            pa, va = pm, vm
        else:
            pb, vb = pm, vm
    return Crossing(pa, pb, va, vb, n)


def tau2_minus_mu2(p: float, h: float = 0.05, R: float = 1.0, tol: float = 1e-10, cache=None) -> float:
    tau2 = sector_eigenvalue(math.pi / 2, p, h, R, tol, cache)["lambda"]
    return tau2 - radial.mu_k(p, 2, 2, R).value


# ---------------------------------------------------------------------------
# multiplicity and the p = 2 baseline


@dataclass
class MultiplicityReport:
    values: List[float]
    tol: float
    clusters: List[Tuple[int, int]]  # (1-based start index l, size m)

    @property
    def pattern(self) -> List[List[int]]:
        return [list(range(l, l + m)) for l, m in self.clusters]

    def cluster_values(self, i: int) -> List[float]:
        l, m = self.clusters[i]
        return self.values[l - 1 : l - 1 + m]


def classify_multiplicity(values: Sequence[float], tol: float = 0.02) -> MultiplicityReport:
    """Greedy clustering: extend while within ``tol`` (relative) of the cluster head."""
    vals = [float(v) for v in values]
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    if any(b < a for a, b in zip(vals, vals[1:])):
        raise ValueError("values must be sorted non-decreasing")
    clusters = []
    i = 0
    while i < len(vals):
        j = i + 1
        while j < len(vals) and vals[j] - vals[i] <= tol * abs(vals[i]):
            j += 1
        clusters.append((i + 1, j - i))
        i = j
    return MultiplicityReport(vals, tol, clusters)


EXPECTED_P2_PATTERN = [(1, 1), (2, 2), (4, 2), (6, 1)]


@dataclass
class LinearGroundTruth:
    report: MultiplicityReport
    table: List[dict]
    failures: List[str]

    @property
    def passed(self) -> bool:
        return not self.failures


def verify_linear_ground_truth(h: float = 0.05, R: float = 1.0, rel: float = 0.015, cache=None) -> LinearGroundTruth:
    """Cluster the first six disc eigenvalues and compare with tau_1, tau_2, mu_2."""
    disc = make_sector(R, 2 * math.pi, h)
    eigs = [e.lam for e in solve_linear_eigs(disc, 6)]
    rep = classify_multiplicity(eigs, 0.02)
    failures = []
    if rep.clusters != EXPECTED_P2_PATTERN:
        failures.append(f"cluster pattern {rep.pattern} != (1)(2,3)(4,5)(6)")
    refs = [
        ("lambda_1 vs mu_1", radial.mu_k(2.0, 2, 1, R).value),
        ("lambda_2,3 vs tau_1", sector_eigenvalue(math.pi, 2.0, h, R, cache=cache)["lambda"]),
        ("lambda_4,5 vs tau_2", sector_eigenvalue(math.pi / 2, 2.0, h, R, cache=cache)["lambda"]),
        ("lambda_6 vs mu_2", radial.mu_k(2.0, 2, 2, R).value),
    ]
    table = []
    for i, (name, ref) in enumerate(refs):
        if i >= len(rep.clusters):
            break
        mean = float(np.mean(rep.cluster_values(i)))
        dev = abs(mean - ref) / ref
        table.append({"check": name, "cluster_mean": mean, "reference": ref, "rel_dev": dev})
        if dev > rel:
            failures.append(f"{name}: relative deviation {dev:.3%} > {rel:.1%}")
    return LinearGroundTruth(rep, table, failures)


# ---------------------------------------------------------------------------
# large-p trends


@dataclass
class TrendTable:
    R: float
    rows: List[dict]

    @property
    def nu1_decreasing(self) -> bool:
        nu = [r["nu1"] for r in self.rows]
        return all(b < a for a, b in zip(nu, nu[1:])) and all(v > 1.0 for v in nu)

    @property
    def tau_distance_decreasing(self) -> bool:
        d = [r["tau_gap"] for r in self.rows if not math.isnan(r["tau_gap"])]
        return len(d) >= 2 and all(b < a for a, b in zip(d, d[1:]))


def infinity_trend(p_list: Sequence[float], R: float = 1.0, h: float = 0.05, cache=None) -> TrendTable:
    """``mu_1^(1/p) = nu_1/R`` against ``1/R`` and ``tau_1^(1/p)`` against ``2/R``."""
    rows = []
    for p in p_list:
        nu1 = float(radial.radial_roots(p, 2, 1)[0])
        row = {
            "p": float(p),
            "nu1": nu1,
            "mu1_root": nu1 / R,
            "mu1_target": 1.0 / R,
            "tau1_root": float("nan"),
            "tau_target": 2.0 / R,
            "tau_gap": float("nan"),
        }
        if P_FEM_MIN <= p <= P_FEM_MAX:
            tau = sector_eigenvalue(math.pi, p, h * R, R, cache=cache)["lambda"]
            row["tau1_root"] = tau ** (1.0 / p)
            row["tau_gap"] = abs(row["tau1_root"] - 2.0 / R)
        rows.append(row)
    return TrendTable(float(R), rows)
