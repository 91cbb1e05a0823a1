"""Command line front end: ``hhed <subcommand> --config run.toml``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import ops, verify
from .config import CHECK_NAMES, RunConfig, load_config
from .errors import HHError
from .hilbert import SectorKey, build_sector_basis
from .model import (
    check_phonon_sum_rule,
    definiteness,
    effective_interaction,
    forward_transform,
)
from .solve import (
    SolveContext,
    deflated_resolvent_apply,
    ground_spectrum,
    solve_sector,
    theta_sweep,
)

EXIT_OK, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 64
SWEEP_COLUMNS = ["parameter", "E0", "E1", "gap", "overlap", "spin", "m0", "mQ"]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hhed", description="Exact diagonalization of Holstein-Hubbard models "
                "and checks of their ground-state properties.")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    def common(sp, checks=False, threads=False):
        sp.add_argument("--config", required=True, metavar="PATH", help="TOML run configuration")
        sp.add_argument("--out", metavar="DIR", help="output directory (overrides [output])")
        sp.add_argument("--max-dim", type=int, metavar="N",
                        help="largest dimension solved densely; Lanczos above")
        if threads:
            sp.add_argument("--threads", type=int, default=1, metavar="N",
                            help="number of checks run concurrently")
        if checks:
            sp.add_argument("--check", action="append", choices=CHECK_NAMES, metavar="NAME",
                            help="check to run (repeatable): " + ", ".join(CHECK_NAMES))
        return sp

    common(sub.add_parser("check-conditions", help="validate the model and classify U_eff"))
    common(sub.add_parser("solve", help="print low-lying spectra of the spin sectors"))
    common(sub.add_parser("verify", help="run ground-state checks"), checks=True, threads=True)
    common(sub.add_parser("susceptibility", help="charge susceptibility against 1/U_eff(k)"),
           threads=True)
    sw = common(sub.add_parser("sweep", help="tabulate observables over a parameter grid"))
    sw.add_argument("--param", required=True, choices=("cutoff", "theta", "U0"))
    return p


# -- records -------------------------------------------------------------------


def _error_record(check: str, exc: Exception) -> dict:
    return {"check": check, "verdict": "error", "preconditions": {}, "measured": {},
            "tolerances": {}, "convergence": {},
            "notes": [f"{type(exc).__name__}: {exc}"]}


def exit_status(records) -> int:
    verdicts = [r["verdict"] for r in records]
    if any(v in ("fail", "error") for v in verdicts):
        return EXIT_FAIL
    if any(v == "inconclusive" for v in verdicts):
        return EXIT_INCONCLUSIVE
    return EXIT_OK


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.10g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_fmt(x)}" for k, x in v.items()) + "}"
    return str(v)


def render_summary(report: dict) -> str:
    """Human-readable summary; depends only on the JSON report."""
    lines = [f"hhed {report['command']}  model: {report['model']['description']}"]
    lines.append(f"sites: {', '.join(report['model']['sites'])}  "
                 f"sublattice: {''.join(report['model']['sublattice'])}")
    for r in report["records"]:
        lines.append("")
        lines.append(f"[{r['verdict'].upper()}] {r['check']}")
        for k, v in r["measured"].items():
            lines.append(f"  {k} = {_fmt(v)}")
        if r["tolerances"]:
            lines.append(f"  tolerances: {_fmt(r['tolerances'])}")
        conv = r["convergence"]
        if conv:
            key = "n_ph_max" if "n_ph_max" in conv else next(iter(conv))
            lines.append(f"  convergence grid {key}: {_fmt(conv[key])}")
        for note in r["notes"]:
            lines.append(f"  note: {note}")
    lines.append("")
    lines.append(f"exit status: {report['exit_status']}")
    return "\n".join(lines) + "\n"


def _model_summary(cfg: RunConfig) -> dict:
    m = cfg.model
    return {
        "style": cfg.style, "description": cfg.description or cfg.style, "sites": [str(s) for s in m.sites],
        "sublattice": list(m.sublattice), "omega": m.omega,
        "t": m.t, "U": m.U, "g": m.g, "frame": cfg.frame, "max_dim": cfg.max_dim,
    }


def write_artifacts(report: dict, cfg: RunConfig, out: Path, tables: dict | None = None) -> None:
    out.mkdir(parents=True, exist_ok=True)
    if "json" in cfg.formats:
        (out / "report.json").write_text(json.dumps(report, indent=2) + "\n", encoding="utf-8")
    if "txt" in cfg.formats:
        (out / "summary.txt").write_text(render_summary(report), encoding="utf-8")
    if "csv" in cfg.formats:
        for name, (header, rows) in (tables or {}).items():
            with open(out / name, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                for row in rows:
                    w.writerow(["" if v is None else repr(float(v)) for v in row])


# -- subcommands -----------------------------------------------------------------


def check_conditions(cfg: RunConfig) -> list[dict]:
    m = cfg.model
    u_eff = effective_interaction(m)
    cls = definiteness(u_eff)
    rule = check_phonon_sum_rule(m.g)
    measured = {
        "connected": True, "bipartite": True, "sublattice": list(m.sublattice),
        "n_A": m.n_a, "n_B": m.n_b, "even_lattice": m.n_sites % 2 == 0,
        "phonon_sum_rule": rule["holds"], "g_column_sums": rule["column_sums"],
        "u_eff_class": cls.classification.value, "u_eff_min_eigenvalue": cls.min_eigenvalue,
        "u_eff": u_eff,
    }
    notes = [f"U_eff {cls.classification.value}, lambda_min={cls.min_eigenvalue:.12g}"]
    if m.positions is not None and cfg.k_points is not None:
        try:
            measured["k"] = cfg.k_points
            measured["u_eff_k"] = forward_transform(u_eff, m.positions, cfg.k_points)
        except HHError as exc:
            notes.append(f"no U_eff(k) table: {exc}")
    ok = measured["even_lattice"] and rule["holds"]
    return [verify.VerificationReport("conditions", "pass" if ok else "fail", {}, measured,
                                      {"sum_rule": 1e-12, "definiteness": 1e-10}, {},
                                      notes).to_record()]


def solve_spectra(cfg: RunConfig, n_eigenvalues: int = 4) -> list[dict]:
    m = cfg.model
    n = m.n_sites
    twoMs = [int(round(2 * x)) for x in cfg.M] if cfg.M is not None else list(range(n % 2, n + 1, 2))
    n_ph = cfg.cutoffs[-1] if np.any(m.g) else 0
    measured = {"n_ph_max": n_ph}
    for tm in twoMs:
        ctx = solve_sector(m, SectorKey(n, tm, n_ph), n_eigenvalues, cfg.max_dim, cfg.frame)
        s = ctx.spectrum
        measured[f"M={tm / 2:g}"] = {"dimension": ctx.basis.dimension, "solver": s.solver,
                                     "eigenvalues": s.eigenvalues, "degeneracy": s.degeneracy}
    return [verify.VerificationReport("spectrum", "pass", {}, measured, {}, {}).to_record()]


def _run_check(name: str, cfg: RunConfig, cache: verify.SolveCache) -> dict:
    m = cfg.model
    kw = dict(max_dense=cfg.max_dim)
    try:
        with threadpool_limits(limits=1):
            if name == "uniqueness":
                r = verify.verify_sector_uniqueness(m, cfg.M, cfg.cutoffs, cache=cache, **kw)
            elif name in ("total_spin", "sign_pattern", "lro"):
                r = verify.CHECKS[name](m, cfg.cutoffs, cache=cache, **kw)
            elif name == "susceptibility":
                r = verify.charge_susceptibility(m, cfg.cutoffs, cfg.k_points, cache=cache, **kw)
            elif name == "adiabatic":
                r = verify.verify_adiabatic_limit(m, cfg.thetas, cfg.adiabatic_cutoffs,
                                                  frame=cfg.frame, **kw)
            else:
                r = verify.verify_heisenberg_limit(m, cfg.U0_grid, **kw)
        return r.to_record()
    except (HHError, ValueError, RuntimeError) as exc:
        return _error_record(name, exc)


def run_checks(cfg: RunConfig, checks, threads: int = 1) -> list[dict]:
    cache = verify.SolveCache(cfg.max_dim, cfg.frame)
    if threads <= 1:
        return [_run_check(c, cfg, cache) for c in checks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda c: _run_check(c, cfg, cache), checks))


def _observables(ctx, model, k_points):
    psi = ctx.spectrum.ground_vector
    s2 = float(np.real(np.vdot(psi, ops.total_spin_squared(ctx.basis) @ psi)))
    row = {"E0": ctx.spectrum.E0, "E1": float(ctx.spectrum.eigenvalues[1]),
           "gap": ctx.spectrum.gap, "spin": ops.spin_from_s2(s2),
           "m0": verify.structure_factor(ctx, "uniform", model.gamma),
           "mQ": verify.structure_factor(ctx, "staggered", model.gamma)}
    if k_points is not None and model.positions is not None:
        for i, k in enumerate(k_points):
            rhs = ops.charge_operator(-k, ctx.basis, model.positions) @ psi
            x = deflated_resolvent_apply(ctx.hamiltonian, ctx.spectrum.E0,
                                         ctx.spectrum.ground_vectors, rhs)
            row[f"chi_k{i}"] = float(np.real(np.vdot(rhs, x)))
    return row


def run_sweep(cfg: RunConfig, param: str):
    m = cfg.model
    n = m.n_sites
    ks = cfg.k_points
    columns = list(SWEEP_COLUMNS)
    if ks is not None and m.positions is not None:
        columns += [f"chi_k{i}" for i in range(len(ks))]
    rows = []
    with threadpool_limits(limits=1):
        if param == "cutoff":
            for n_ph in cfg.cutoffs:
                ctx = solve_sector(m, SectorKey(n, 0, n_ph), 2, cfg.max_dim, cfg.frame)
                rows.append({"parameter": n_ph, **_observables(ctx, m, ks)})
        elif param == "theta":
            sw = theta_sweep(m, n, 0, cfg.thetas, cfg.adiabatic_cutoffs[-1], cfg.max_dim, cfg.frame)
            for i, th in enumerate(sw.grid):
                mt = m.with_omega(th * m.omega)
                ctx = solve_sector(mt, SectorKey(n, 0, cfg.adiabatic_cutoffs[-1]), 2,
                                   cfg.max_dim, cfg.frame)
                rows.append({"parameter": th, "overlap": sw.values["overlap"][i],
                             **_observables(ctx, m, ks)})
        else:
            hub = m.with_couplings(g=np.zeros_like(m.g))
            basis = build_sector_basis(n, SectorKey(n, 0, 0))
            for U0 in cfg.U0_grid:
                U = hub.U - np.diag(np.diag(hub.U)) + U0 * np.eye(n)
                h = ops.assemble_hubbard(hub, basis, U)
                ctx = SolveContext(hub, basis, h, ground_spectrum(h, 2, cfg.max_dim))
                rows.append({"parameter": U0, **_observables(ctx, hub, ks)})
    table = [[r.get(c) for c in columns] for r in rows]
    trace = {c: [r.get(c) for r in rows] for c in columns}
    if param == "cutoff" and len(rows) >= 2 and np.any(m.g):
        a, b = rows[-2], rows[-1]
        converged = all(abs(a[c] - b[c]) <= (1e-6 if c in ("E0", "E1", "gap") else 1e-4)
                        for c in columns[1:] if a.get(c) is not None)
        verdict = "pass" if converged else "inconclusive"
    else:
        verdict = "pass"
    name = {"cutoff": "n_ph_max", "theta": "theta", "U0": "U0"}[param]
    rec = verify.VerificationReport(
        f"sweep_{param}", verdict, {}, {"parameter": name, "columns": columns,
                                        **({"k": ks} if len(columns) > len(SWEEP_COLUMNS) else {})},
        {"energy": 1e-6, "other": 1e-4}, trace).to_record()
    return [rec], {f"sweep_{param}.csv": (columns, table)}


def run(cfg: RunConfig, command: str = "verify", checks=None, out=None, threads: int = 1,
        param: str | None = None) -> tuple[int, dict]:
    """Execute ``command`` and write artifacts; returns (exit status, report)."""
    tables = None
    try:
        if command == "check-conditions":
            records = check_conditions(cfg)
        elif command == "solve":
            with threadpool_limits(limits=1):
                records = solve_spectra(cfg)
        elif command == "susceptibility":
            records = run_checks(cfg, ["susceptibility"], threads)
        elif command == "sweep":
            records, tables = run_sweep(cfg, param or "cutoff")
        else:
            records = run_checks(cfg, checks or cfg.checks, threads)
    except (HHError, ValueError, RuntimeError) as exc:
        records = [_error_record(command, exc)]
    report = {"command": command, "model": _model_summary(cfg), "records": records}
    report = verify._jsonable(report)
    report["exit_status"] = exit_status(records)
    write_artifacts(report, cfg, Path(out or cfg.output_dir), tables)
    return report["exit_status"], report


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"hhed: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HHError as exc:
        print(f"hhed: {args.config}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if args.max_dim is not None:
        cfg.max_dim = args.max_dim
    threads = getattr(args, "threads", 1)
    if threads < 1:
        parser.error("--threads must be >= 1")
    status, report = run(cfg, args.command, getattr(args, "check", None), args.out, threads,
                         getattr(args, "param", None))
    sys.stdout.write(render_summary(report))
    return status


if __name__ == "__main__":
    sys.exit(main())
