"""Command-line entry point: ``plapeig <command> [options]``.

Exit status is 0 on success, 1 when a solver fails or a verification does
not pass, and 2 on invalid input.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional

from . import __version__, harness, radial
from .fem import P_FEM_MAX, P_FEM_MIN, FEMError, solve_first_eig
from .geometry import DomainSpec, make_disc, make_wedge
from .plot import write_svg
from .symmetry import MeshMismatch, assemble_psi_k

log = logging.getLogger("plapeig")

COMMANDS = ("radial", "eig", "tau", "psi", "sweep", "verify-p2", "trend")


class InvalidInput(ValueError):
    pass


def parse_grid(text: str) -> List[float]:
    """``start:stop:step`` (endpoints kept within half a step) or ``a,b,c``."""
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(t) for t in text.split(":"))
            if step <= 0 or stop < start:
                raise InvalidInput(f"grid {text!r}: need step > 0 and stop >= start")
            n = int(math.floor((stop - start) / step + 0.5))
            return [round(start + i * step, 12) for i in range(n + 1)]
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        if isinstance(exc, InvalidInput):
            raise
        raise InvalidInput(f"cannot parse grid {text!r}: {exc}") from exc


@dataclass
class RunConfig:
    command: str
    params: dict = field(default_factory=dict)
    out: Path = Path(".")
    formats: tuple = ()
    cache_dir: Optional[str] = None
    workers: int = 1

    def canonical(self) -> str:
        return json.dumps({"command": self.command, "params": self.params}, sort_keys=True)

    def validate(self) -> None:
        p = self.params
        if self.command not in COMMANDS:
            raise InvalidInput(f"unknown command {self.command!r}")
        _pos("h", p.get("h"), upper=p.get("R", 1.0))
        _pos("R", p.get("R"))
        _pos("tol", p.get("tol"))
        if "p" in p:
            if self.command == "radial":
                ok, rng = radial.P_MIN < p["p"] <= radial.P_MAX, f"({radial.P_MIN}, {radial.P_MAX}]"
            else:
                ok, rng = P_FEM_MIN <= p["p"] <= P_FEM_MAX, f"[{P_FEM_MIN}, {P_FEM_MAX}]"
            if not ok:
                raise InvalidInput(f"--p={p['p']} outside the valid range {rng}")
        if "k" in p and p["k"] < 1:
            raise InvalidInput(f"--k={p['k']} must be >= 1")
        if "dim" in p and p["dim"] < 2:
            raise InvalidInput(f"--dim={p['dim']} must be >= 2")
        if "roots" in p and p["roots"] < 1:
            raise InvalidInput(f"--roots={p['roots']} must be >= 1")
        if self.workers < 1:
            raise InvalidInput(f"--workers={self.workers} must be >= 1")
        for g in ("p_grid", "p_list"):
            if g in p:
                if not p[g]:
                    raise InvalidInput(f"--{g.replace('_', '-')} is empty")
                bad = [v for v in p[g] if not radial.P_MIN < v <= radial.P_MAX]
                if bad:
                    raise InvalidInput(f"--{g.replace('_', '-')} values {bad} outside ({radial.P_MIN}, {radial.P_MAX}]")


def _pos(name, value, upper=None):
    if value is None:
        return
    if not (value > 0 and math.isfinite(value)):
        raise InvalidInput(f"--{name}={value} must be a positive number")
    if upper is not None and not value < upper:
        raise InvalidInput(f"--{name}={value} must lie in (0, {upper})")


def _tag(x: float) -> str:
    return f"{x:g}".replace(".", "p")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"wrote {path}")


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_radial(cfg: RunConfig) -> int:
    p, n, k = cfg.params["p"], cfg.params["dim"], cfg.params["roots"]
    traj = radial.integrate_radial(p, n, cfg.params["r_max"])
    try:
        roots = radial.find_roots(traj, k)
    except radial.InsufficientRange:
        roots = radial.radial_roots(p, n, k)
        traj = radial.integrate_radial(p, n, float(roots[-1]) + 1.0)
        radial.find_roots(traj, k)
    print(" ".join(f"nu_{i}={v:.8f}" for i, v in enumerate(roots, 1)))
    stem = f"radial_p{_tag(p)}_N{n}"
    if "csv" in cfg.formats:
        path = cfg.out / f"{stem}.csv"
        traj.to_csv(path)
        print(f"wrote {path}")
    if "json" in cfg.formats:
        _write(cfg.out / f"{stem}.json", _dump({
            "p": p, "N": n, "roots": [float(v) for v in roots],
            "mu": [float(v) ** p for v in roots], "rtol": radial.RTOL, "atol": radial.ATOL,
        }))
    return 0


def _eig_outputs(cfg: RunConfig, res, domain: DomainSpec, stem: str, force_json=False) -> None:
    info = res.to_dict(domain.key())
    info["tol"] = cfg.params["tol"]
    if force_json or "json" in cfg.formats:
        _write(cfg.out / f"{stem}.json", _dump(info))
        path = cfg.out / f"{stem}.field.txt"
        res.field.save(path)
        print(f"wrote {path}")
    if "svg" in cfg.formats:
        path = cfg.out / f"{stem}.svg"
        write_svg(res.field, path, title=stem)
        print(f"wrote {path}")


def cmd_eig(cfg: RunConfig) -> int:
    prm = cfg.params
    kind = prm["domain"]
    if kind == "disc":
        dom = DomainSpec.disc(prm["R"])
    elif kind == "sector":
        dom = DomainSpec.sector(prm["angle"], prm["R"])
    else:
        dom = DomainSpec.annulus(prm["inner"], prm["R"])
    res = solve_first_eig(dom.mesh(prm["h"]), prm["p"], tol=prm["tol"])
    print(
        f"lambda_1={res.lam:.10g} domain={kind} p={prm['p']:g} h={prm['h']:g} "
        f"iterations={res.iterations} residual={res.residual:.3g} converged={res.converged}"
    )
    _eig_outputs(cfg, res, dom, f"eig_{kind}_p{_tag(prm['p'])}_h{_tag(prm['h'])}")
    return 0 if res.converged else 1


def cmd_tau(cfg: RunConfig) -> int:
    prm = cfg.params
    k = prm["k"]
    res = solve_first_eig(make_wedge(prm["R"], k, prm["h"]), prm["p"], tol=prm["tol"])
    print(
        f"tau_{k}={res.lam:.10g} p={prm['p']:g} h={prm['h']:g} "
        f"iterations={res.iterations} residual={res.residual:.3g} converged={res.converged}"
    )
    _eig_outputs(
        cfg, res, DomainSpec.wedge(k, prm["R"]),
        f"tau{k}_p{_tag(prm['p'])}_h{_tag(prm['h'])}", force_json=True,
    )
    return 0 if res.converged else 1


def cmd_psi(cfg: RunConfig) -> int:
    prm = cfg.params
    k, p, h, R = prm["k"], prm["p"], prm["h"], prm["R"]
    wedge = solve_first_eig(make_wedge(R, k, h), p, tol=prm["tol"])
    sym = assemble_psi_k(wedge, make_disc(R, h, order=k), k)
    print(
        f"Psi_{k}: tau_{k}={sym.tau:.10g} residual={sym.residual:.3g} "
        f"nodal_domains={sym.nodal_count} antiperiodicity_defect={sym.antiperiodicity_defect():.3g}"
    )
    stem = f"psi{k}_p{_tag(p)}_h{_tag(h)}"
    if "json" in cfg.formats:
        _write(cfg.out / f"{stem}.json", _dump({
            "k": k, "p": p, "h": h, "R": R, "tol": prm["tol"], "tau": sym.tau,
            "residual": sym.residual, "nodal_count": sym.nodal_count,
            "antiperiodicity_defect": sym.antiperiodicity_defect(),
        }))
        path = cfg.out / f"{stem}.field.txt"
        sym.field.save(path)
        print(f"wrote {path}")
    if "svg" in cfg.formats:
        path = cfg.out / f"{stem}.svg"
        write_svg(sym.field, path, title=f"Psi_{k}, p={p:g}")
        print(f"wrote {path}")
    return 0 if sym.nodal_count == 2 * k else 1


def cmd_sweep(cfg: RunConfig) -> int:
    prm = cfg.params
    cache = harness.ResultCache(cfg.cache_dir)
    rows = harness.sweep(prm["p_grid"], prm["h"], prm["R"], prm["tol"], cache, cfg.workers)
    for r in rows:
        status = "ok" if r.ok else "; ".join(r.errors) or "not converged"
        print(
            f"p={r.p:g} tau1={r.tau1:.8g} tau2={r.tau2:.8g} mu2={r.mu2:.8g} "
            f"tau2-mu2={r.tau2_minus_mu2:.6g} h={r.h:g} [{status}]"
        )
    crossing = None
    notes = [
        f"h={prm['h']:g} R={prm['R']:g} tol={prm['tol']:g} "
        f"radial_rtol={radial.RTOL:g} radial_atol={radial.ATOL:g}"
    ]
    try:
        crossing = harness.find_crossing(
            rows,
            evaluate=lambda q: harness.tau2_minus_mu2(q, prm["h"], prm["R"], prm["tol"], cache),
        )
        print(f"crossing tau2_minus_mu2 in [{crossing.p_a:.6f}, {crossing.p_b:.6f}]")
    except harness.NoSignChange as exc:
        notes.insert(0, f"crossing tau2_minus_mu2: no sign change ({exc})")
        print(notes[0])
    except ValueError as exc:
        notes.insert(0, f"crossing tau2_minus_mu2: not determined ({exc})")
        print(notes[0])
    stem = f"sweep_h{_tag(prm['h'])}"
    _write(cfg.out / f"{stem}.csv", harness.sweep_csv(rows, crossing, notes))
    if "json" in cfg.formats:
        _write(cfg.out / f"{stem}.json", _dump({
            "h": prm["h"], "R": prm["R"], "tol": prm["tol"],
            "rows": [r.to_dict() for r in rows],
            "crossing": None if crossing is None else [crossing.p_a, crossing.p_b],
        }))
    return 0 if all(r.ok for r in rows) else 1


def cmd_verify_p2(cfg: RunConfig) -> int:
    prm = cfg.params
    gt = harness.verify_linear_ground_truth(prm["h"], prm["R"], cache=harness.ResultCache(cfg.cache_dir))
    pattern = "".join("(" + ",".join(map(str, c)) + ")" for c in gt.report.pattern)
    print("eigenvalues: " + ", ".join(f"{v:.6f}" for v in gt.report.values))
    print(f"clusters (tol {gt.report.tol:.0%}): {pattern}")
    for row in gt.table:
        print(f"{row['check']}: {row['cluster_mean']:.6f} vs {row['reference']:.6f} ({row['rel_dev']:.3%})")
    for f in gt.failures:
        print(f"FAIL {f}")
    if "json" in cfg.formats:
        _write(cfg.out / f"verify_p2_h{_tag(prm['h'])}.json", _dump({
            "h": prm["h"], "R": prm["R"], "eigenvalues": gt.report.values,
            "clusters": gt.report.clusters, "table": gt.table, "failures": gt.failures,
        }))
    return 0 if gt.passed else 1


def cmd_trend(cfg: RunConfig) -> int:
    prm = cfg.params
    tt = harness.infinity_trend(prm["p_list"], prm["R"], prm["h"], cache=harness.ResultCache(cfg.cache_dir))
    cols = ["p", "nu1", "mu1_root", "mu1_target", "tau1_root", "tau_target", "tau_gap"]
    print(",".join(cols))
    for r in tt.rows:
        print(",".join(f"{r[c]:.10g}" for c in cols))
    print(f"nu1 decreasing toward 1: {tt.nu1_decreasing}; |tau1^(1/p) - 2/R| decreasing: {tt.tau_distance_decreasing}")
    stem = f"trend_R{_tag(prm['R'])}"
    if "csv" in cfg.formats:
        _write(cfg.out / f"{stem}.csv", "\n".join(
            [",".join(cols)] + [",".join(f"{r[c]:.17g}" for c in cols) for r in tt.rows]) + "\n")
    if "json" in cfg.formats:
        _write(cfg.out / f"{stem}.json", _dump({"R": prm["R"], "h": prm["h"], "rows": tt.rows}))
    return 0 if tt.nu1_decreasing else 1


HANDLERS = {
    "radial": cmd_radial,
    "eig": cmd_eig,
    "tau": cmd_tau,
    "psi": cmd_psi,
    "sweep": cmd_sweep,
    "verify-p2": cmd_verify_p2,
    "trend": cmd_trend,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=".", help="output directory (default: .)")
    common.add_argument("--cache-dir", default=None, help=f"results cache (default: ${harness.CACHE_ENV})")
    common.add_argument("--workers", type=int, default=1, help="parallel sweep rows (default 1)")
    common.add_argument("--csv", action="store_true", help="write CSV artifacts")
    common.add_argument("--json", action="store_true", help="write JSON artifacts")
    common.add_argument("--svg", action="store_true", help="write SVG plots")
    common.add_argument("-v", "--verbose", action="store_true")

    fem = argparse.ArgumentParser(add_help=False)
    fem.add_argument("--h", type=float, default=0.05, help="target mesh edge length")
    fem.add_argument("--R", type=float, default=1.0, help="disc radius")
    fem.add_argument("--tol", type=float, default=1e-10, help="relative Rayleigh decrease tolerance")

    ap = argparse.ArgumentParser(prog="plapeig", description="Dirichlet p-Laplacian eigenvalues on discs, sectors and balls.")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    s = sub.add_parser("radial", parents=[common], help="roots nu_k of the radial Cauchy problem")
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--roots", type=int, default=2)
    s.add_argument("--r-max", type=float, default=10.0)

    s = sub.add_parser("eig", parents=[common, fem], help="first eigenvalue of a disc, sector or annulus")
    s.add_argument("--p", type=float, required=True)
    s.add_argument("--domain", choices=["disc", "sector", "annulus"], default="disc")
    s.add_argument("--angle", type=float, default=math.pi, help="sector opening in radians")
    s.add_argument("--inner", type=float, default=0.5, help="annulus inner radius")

    s = sub.add_parser("tau", parents=[common, fem], help="tau_k: first eigenvalue of the wedge of opening pi/k")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--p", type=float, required=True)

    s = sub.add_parser("psi", parents=[common, fem], help="assemble the symmetric eigenfunction Psi_k")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--p", type=float, required=True)

    s = sub.add_parser("sweep", parents=[common, fem], help="tau_1, tau_2, mu_2 over a p grid")
    s.add_argument("--p-grid", required=True, help="start:stop:step or comma list")

    sub.add_parser("verify-p2", parents=[common, fem], help="p = 2 multiplicity pattern on the disc")

    s = sub.add_parser("trend", parents=[common, fem], help="large-p behaviour of nu_1 and tau_1^(1/p)")
    s.add_argument("--p-list", default="2,4,8,16,32")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    skip = {"command", "out", "cache_dir", "workers", "csv", "json", "svg", "verbose"}
    params = {k: v for k, v in vars(ns).items() if k not in skip}
    if "p_grid" in params:
        params["p_grid"] = parse_grid(params["p_grid"])
    if "p_list" in params:
        params["p_list"] = parse_grid(params["p_list"])
    formats = tuple(f for f in ("csv", "json", "svg") if getattr(ns, f))
    return RunConfig(
        ns.command, params, Path(ns.out), formats,
        ns.cache_dir or None, ns.workers,
    )


def run(cfg: RunConfig) -> int:
    try:
        cfg.validate()
    except InvalidInput as exc:
        print(f"plapeig: error: {exc}", file=sys.stderr)
        return 2
    cfg.out.mkdir(parents=True, exist_ok=True)
    if cfg.cache_dir is None:
        cfg.cache_dir = harness.ResultCache.from_env().root
    try:
        return HANDLERS[cfg.command](cfg)
    except (InvalidInput, ValueError, MeshMismatch) as exc:
        print(f"plapeig: error: {exc}", file=sys.stderr)
        return 2
    except (radial.RadialError, FEMError, RuntimeError, ArithmeticError) as exc:
        print(f"plapeig: solver failure: {exc}", file=sys.stderr)
        return 1


def main(argv: Optional[List[str]] = None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = config_from_args(ns)
    except InvalidInput as exc:
        print(f"plapeig: error: {exc}", file=sys.stderr)
        return 2
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
