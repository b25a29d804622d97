"""Radial eigenvalues of the p-Laplacian on N-balls by shooting.

The Cauchy problem ``-(r^(N-1)|u'|^(p-2)u')' = r^(N-1)|u|^(p-2)u``,
``u(0) = 1``, ``u'(0) = 0`` is integrated in flux form
``u' = sign(w)(|w|/r^(N-1))^(1/(p-1))``, ``w' = -r^(N-1)|u|^(p-2)u``. Its
positive zeros ``nu_k`` give the radial eigenvalues of the ball of radius
``R`` as ``(nu_k / R)**p``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from .kernels import dp_integrate

P_MIN = 1.01
P_MAX = 1000.0
R0 = 1e-6
RTOL = 1e-10
ATOL = 1e-12
MAX_STEPS = 2_000_000


class RadialError(RuntimeError):
    """Integration could not deliver the requested accuracy."""


class InsufficientRange(RadialError):
    """Fewer sign changes than requested before ``r_max``."""


def _check_p(p: float) -> None:
    if not (isinstance(p, (int, float, np.floating)) and math.isfinite(p)):
        raise ValueError(f"p must be a finite number, got {p!r}")
    if p <= 1:
        raise ValueError(f"p must be > 1, got {p}")
    if not P_MIN < p <= P_MAX:
        raise RadialError(
            f"p={p} outside the supported range ({P_MIN}, {P_MAX}]: stiff regime, "
            "flux inversion is ill-conditioned"
        )


def _check_dim(n: int) -> None:
    if int(n) != n or n < 2:
        raise ValueError(f"dimension N must be an integer >= 2, got {n!r}")


def start_values(p: float, n: int, r0: float = R0):
    """Small-r series for ``(u, w)`` at the start radius."""
    c = (p - 1.0) / p * n ** (-1.0 / (p - 1.0))
    return 1.0 - c * r0 ** (p / (p - 1.0)), -(r0**n) / n


@dataclass
class RadialTrajectory:
    p: float
    N: int
    r: np.ndarray
    u: np.ndarray
    w: np.ndarray
    rtol: float = RTOL
    atol: float = ATOL
    roots: List[float] = field(default_factory=list)

    @property
    def r_max(self) -> float:
        return float(self.r[-1])

    def sign_changes(self) -> np.ndarray:
        """Sample indices ``i`` with a zero of u in ``(r[i], r[i+1]]``."""
        s = np.sign(self.u)
        return np.flatnonzero((s[:-1] > 0) & (s[1:] <= 0) | (s[:-1] < 0) & (s[1:] >= 0))

    def state_at(self, r: float):
        """Re-integrate from the last stored sample below ``r``."""
        i = int(np.searchsorted(self.r, r, side="right")) - 1
        i = max(i, 0)
        if self.r[i] == r:
            return float(self.u[i]), float(self.w[i])
        return _advance(self.p, self.N, self.r[i], self.u[i], self.w[i], r, self.rtol, self.atol)

    def to_csv(self, path: Union[str, Path]) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["r", "u", "w"])
            for row in zip(self.r, self.u, self.w):
                out.writerow([f"{v:.17g}" for v in row])
            for k, nu in enumerate(self.roots, 1):
                fh.write(f"# nu_{k}={nu:.17g}\n")


def _advance(p, n, r_a, u_a, w_a, r_b, rtol, atol):
    status, rs, us, ws, count = dp_integrate(
        float(p), float(n), float(r_a), float(u_a), float(w_a), float(r_b),
        rtol, atol, max(1e-3 * (r_b - r_a), 1e-12), MAX_STEPS, False,
    )
    if status != 0:
        raise RadialError(f"re-integration to r={r_b} failed (status {status}, p={p})")
    return float(us[count - 1]), float(ws[count - 1])


def integrate_radial(
    p: float, N: int = 2, r_max: float = 10.0, rtol: float = RTOL, atol: float = ATOL
) -> RadialTrajectory:
    """Integrate the radial Cauchy problem on ``[R0, r_max]``."""
    _check_p(p)
    _check_dim(N)
    if not r_max > 1:
        raise ValueError(f"r_max must be > 1, got {r_max}")
    u0, w0 = start_values(p, N)
    status, rs, us, ws, count = dp_integrate(
        float(p), float(N), R0, u0, w0, float(r_max), rtol, atol, 1e-4, MAX_STEPS, True
    )
    if status == 1:
        raise RadialError(f"step size underflow at r={rs[count - 1]:.6g} (p={p}, N={N}): stiff regime")
    if status == 2:
        raise RadialError(f"step budget exhausted at r={rs[count - 1]:.6g} (p={p}, N={N})")
    return RadialTrajectory(
        p, int(N), rs[:count].copy(), us[:count].copy(), ws[:count].copy(), rtol, atol
    )


def find_roots(traj: RadialTrajectory, k: int) -> np.ndarray:
    """First ``k`` positive zeros of ``u``, refined by bisection.

    Each bracket from the stored samples is halved, re-integrating from the
    bracket's left sample, until it collapses to adjacent floats or
    ``|u| <= 1e-14``.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    idx = traj.sign_changes()
    if idx.size < k:
        raise InsufficientRange(
            f"only {idx.size} sign changes of u on [0, {traj.r_max:.6g}], {k} requested"
        )
    roots = []
    for i in idx[:k]:
        a, b = float(traj.r[i]), float(traj.r[i + 1])
        ua, wa = float(traj.u[i]), float(traj.w[i])
        if traj.u[i + 1] == 0.0:
            roots.append(b)
            continue
        sa = math.copysign(1.0, ua)
        lo, hi = a, b
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            um, _ = _advance(traj.p, traj.N, a, ua, wa, mid, traj.rtol, traj.atol)
            if um == 0.0 or abs(um) <= 1e-14:
                lo = hi = mid
                break
            if math.copysign(1.0, um) == sa:
                lo = mid
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    traj.roots = roots
    return np.array(roots)


def radial_roots(
    p: float, N: int = 2, k: int = 2, rtol: float = RTOL, atol: float = ATOL, r_max: Optional[float] = None
) -> np.ndarray:
    """``find_roots`` with automatic extension of ``r_max``."""
    r_max = r_max or max(4.0 * k, 10.0)
    for _ in range(12):
        traj = integrate_radial(p, N, r_max, rtol, atol)
        try:
            return find_roots(traj, k)
        except InsufficientRange:
            r_max *= 2.0
    raise InsufficientRange(f"no {k} sign changes below r={r_max} (p={p}, N={N})")


@dataclass(frozen=True)
class CertifiedRoots:
    """Roots with an error bound from re-integration at 1/16 the tolerance."""

    p: float
    N: int
    roots: np.ndarray
    errors: np.ndarray


def certify_roots(p: float, N: int = 2, k: int = 2, rtol: float = RTOL) -> CertifiedRoots:
    coarse = radial_roots(p, N, k, rtol=rtol)
    fine = radial_roots(p, N, k, rtol=rtol / 16.0, atol=ATOL / 16.0)
    err = 2.0 * np.abs(coarse - fine) + 4.0 * np.spacing(fine) + 1e-13 * fine
    return CertifiedRoots(p, int(N), fine, err)


@dataclass(frozen=True)
class RadialEigenvalue:
    p: float
    N: int
    k: int
    R: float
    nu: float
    value: float


def mu_k(p: float, N: int = 2, k: int = 1, R: float = 1.0) -> RadialEigenvalue:
    """k-th radial eigenvalue of the ball of radius ``R``."""
    if not R > 0:
        raise ValueError(f"R must be positive, got {R}")
    nu = float(radial_roots(p, N, k)[k - 1])
    return RadialEigenvalue(float(p), int(N), int(k), float(R), nu, (nu / R) ** p)


@dataclass(frozen=True)
class GapReport:
    p: float
    N: int
    nu1: float
    nu2: float
    gap: float
    margin: float
    holds: bool


def check_gap(p: float, N: int = 2) -> GapReport:
    """Test ``2*nu_1 < nu_2`` with margin ten times the root error bound."""
    cert = certify_roots(p, N, 2)
    nu1, nu2 = (float(v) for v in cert.roots)
    margin = 10.0 * float(2.0 * cert.errors[0] + cert.errors[1])
    gap = nu2 - 2.0 * nu1
    return GapReport(float(p), int(N), nu1, nu2, gap, margin, gap > margin)
