"""End-to-end acceptance checks, one test per criterion.

Each test prints a single PASS/FAIL line.  Run as a script for the same
output without pytest's capture: ``python tests/test_acceptance.py``.
"""
import itertools
import sys
import time

import numpy as np
import pytest

from hhed import cli, ops, verify
from hhed.config import parse_config
from hhed.hilbert import SectorKey, build_sector_basis, full_fock_basis
from hhed.presets import preset_model
from hhed.solve import dense_spectrum, ground_spectrum, lanczos_spectrum

STAR = dict(U0=8.0, g0=0.5, omega=1.0)
RING_CHI = dict(U0=4.0, g0=1.0, omega=2.0)


@pytest.fixture
def report(capsys):
    def emit(n, title, ok, detail=""):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {title}  {detail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def cache():
    return verify.SolveCache()


@pytest.fixture(scope="module")
def star4():
    return preset_model("star4", **STAR)


def test_criterion_01_preconditions(report):
    t = time.perf_counter()
    lams, ok = [], True
    for name in ("ring4", "star4"):
        cfg = parse_config(f'[model]\npreset = "{name}"\nU0 = 4\ng0 = 1\nomega = 2\n')
        rec = cli.check_conditions(cfg)[0]
        m = rec["measured"]
        lams.append(m["u_eff_min_eigenvalue"])
        ok &= rec["verdict"] == "pass" and m["connected"] and m["bipartite"]
        ok &= m["even_lattice"] and m["phonon_sum_rule"] and m["u_eff_class"] == "PD"
        ok &= abs(m["u_eff_min_eigenvalue"] - 3.0) <= 1e-10
    dt = time.perf_counter() - t
    report(1, "preconditions and U_eff class", ok and dt < 1.0,
           f"lambda_min={lams} time={dt:.2f}s")


def test_criterion_02_operator_algebra(report):
    t = time.perf_counter()
    worst_anti = worst_ph = 0.0
    for n in (1, 2, 3):
        fb = full_fock_basis(n)
        cs = {(x, s): ops.annihilator(x, s, fb, fb).toarray()
              for x in range(n) for s in (ops.UP, ops.DN)}
        eye = np.eye(fb.dimension)
        for (a, ca), (b, cb) in itertools.product(cs.items(), repeat=2):
            worst_anti = max(worst_anti,
                             np.max(np.abs(ca @ cb.T + cb.T @ ca - (eye if a == b else 0))),
                             np.max(np.abs(ca @ cb + cb @ ca)))
        for cutoff in (1, 2, 3):
            basis = full_fock_basis(n, cutoff)
            top = np.tile(np.array(basis.phonon_totals()) == cutoff, basis.n_fermion)
            for x in range(n):
                b = ops.phonon_annihilator(x, basis).toarray()
                comm = b @ b.T - b.T @ b
                nx = np.tile([p[x] for p in basis.phonon_states], basis.n_fermion)
                # truncated identity: 1 below the top grade, -n_x on it
                expected = np.diag(np.where(top, -nx, 1.0))
                worst_ph = max(worst_ph, np.max(np.abs(comm - expected)))
            for x, y in itertools.combinations(range(n), 2):
                bx = ops.phonon_annihilator(x, basis)
                by = ops.phonon_annihilator(y, basis)
                worst_ph = max(worst_ph, ops.max_abs(bx @ by - by @ bx))

    worst_sym, n_ham = 0.0, 0
    for name in ("dimer", "chain4", "ring4", "star4"):
        model = preset_model(name, U0=3.0, g0=0.7, omega=1.3)
        n = model.n_sites
        for cutoff, frame in itertools.product((0, 1, 2), ("bare", "displaced")):
            for twoM in range(-n, n + 1, 2):
                basis = build_sector_basis(n, SectorKey(n, twoM, cutoff))
                h = ops.assemble_hh_hamiltonian(model, basis, frame)
                scale = ops.max_abs(h)
                for op in (ops.spin_operators(basis)["S3"], ops.total_spin_squared(basis),
                           ops.number_operator(basis)):
                    c = ops.commutator_norm(h, op)
                    worst_sym = max(worst_sym, c / scale if scale else c)
                n_ham += 1
        # all fillings and spins at once: the symmetries are no longer scalars
        for cutoff in (0, 1):
            basis = full_fock_basis(n, cutoff)
            h = ops.assemble_hh_hamiltonian(model, basis, "bare")
            s = ops.spin_operators(basis)
            for op in (s["S3"], s["Stot2"], ops.number_operator(basis)):
                worst_sym = max(worst_sym, ops.commutator_norm(h, op) / ops.max_abs(h))
            n_ham += 1
    dt = time.perf_counter() - t
    ok = worst_anti <= 1e-13 and worst_ph <= 1e-13 and worst_sym <= 1e-12 and dt < 10.0
    report(2, "operator algebra", ok,
           f"anticomm={worst_anti:.1e} [b,b+]={worst_ph:.1e} "
           f"sym={worst_sym:.1e} over {n_ham} H time={dt:.1f}s")


def test_criterion_03_oracle_equivalence(report):
    t = time.perf_counter()
    worst, count = 0.0, 0
    for name in ("dimer", "chain4", "ring4", "star4", "lieb-cell"):
        model = preset_model(name, U0=4.0, g0=0.5, omega=1.0)
        n = model.n_sites
        for cutoff, frame in itertools.product(range(4), ("bare", "displaced")):
            for twoM in range(-n, n + 1, 2):
                basis = build_sector_basis(n, SectorKey(n, twoM, cutoff))
                if basis.dimension > 2000:
                    continue
                h = ops.assemble_hh_hamiltonian(model, basis, frame)
                k = min(4, basis.dimension)
                d = dense_spectrum(h, k).eigenvalues
                lz = lanczos_spectrum(h, k).eigenvalues
                m = min(len(d), len(lz))
                worst = max(worst, np.max(np.abs(d[:m] - lz[:m])))
                count += 1
    dimer = preset_model("dimer", U0=4.0)
    h = ops.assemble_hubbard(dimer, build_sector_basis(2, SectorKey(2, 0, 0)))
    e_dense = ground_spectrum(h, solver="dense").E0
    e_lanczos = ground_spectrum(h, solver="lanczos").E0
    exact = 2 - 2 * np.sqrt(2)
    dimer_err = max(abs(e_dense - exact), abs(e_lanczos - exact))
    dt = time.perf_counter() - t
    ok = worst <= 1e-10 and dimer_err <= 1e-12 and dt < 30.0
    report(3, "dense vs Lanczos", ok,
           f"max|dE|={worst:.1e} over {count} sectors, dimer err={dimer_err:.1e} time={dt:.1f}s")


def test_criterion_04_ferrimagnetic_ground_state(report, star4, cache):
    t = time.perf_counter()
    r = verify.verify_total_spin(star4, cache=cache)
    u = verify.verify_sector_uniqueness(star4, Ms=[0], cache=cache)
    m = r.measured
    E = {int(k): v for k, v in m["sector_E0"].items()}
    ok = (r.verdict == "pass" and u.verdict == "pass" and u.measured["degeneracy"][0.0] == 1
          and abs(m["S2"] - 2.0) <= 1e-6 and m["ground_degeneracy"] == 3
          and min(E[-2], E[2]) > max(E[-1], E[0], E[1])
          and max(r.convergence["n_ph_max"]) <= 6)
    dt = time.perf_counter() - t
    report(4, "star4 ground-state spin", ok and dt < 120.0,
           f"S2={m['S2']:.10f} degeneracy={m['ground_degeneracy']} time={dt:.1f}s")


def test_criterion_05_sign_pattern(report, star4, cache):
    margins, ok = [], True
    for model in (preset_model("ring4", **STAR), star4):
        r = verify.verify_sign_pattern(model, cache=cache)
        C = np.asarray(r.measured["correlations"])
        eps = np.where(np.array(model.sublattice) == "A", 1.0, -1.0)
        signed = np.outer(eps, eps) * C
        margins.append(float(signed.min()))
        ok &= r.verdict == "pass" and bool(np.all(signed > 1e-10))
    report(5, "transverse correlation signs", ok, f"min margins={margins}")


def test_criterion_06_long_range_order(report, star4, cache):
    r = verify.verify_lro_inequality(star4, cache=cache)
    m = r.measured
    ok = (r.verdict == "pass" and m["mQ"] >= m["m0"] - 1e-10 and m["m0"] > 0
          and "m0_per_site" in m)
    report(6, "staggered vs uniform order", ok,
           f"m0={m['m0']:.10f} mQ={m['mQ']:.10f} m0/|sites|={m['m0_per_site']:.10f}")


def test_criterion_07_charge_susceptibility(report):
    t = time.perf_counter()
    model = preset_model("ring4", **RING_CHI)
    r = verify.charge_susceptibility(model)
    chi = np.asarray(r.measured["chi"])
    k = np.asarray(r.measured["k"]).ravel()
    chi0 = chi[np.argmin(np.abs(k))]
    dt = time.perf_counter() - t
    ok = (r.verdict == "pass" and bool(np.all(chi <= 1 / 3 + 1e-8)) and chi0 == 0.0
          and np.allclose(r.measured["u_eff_k"], 3.0) and dt < 120.0)
    report(7, "charge susceptibility bound", ok,
           f"chi={np.round(chi, 10).tolist()} time={dt:.1f}s")


def test_criterion_08_adiabatic_limit(report):
    t = time.perf_counter()
    model = preset_model("dimer", U0=4.0, g0=0.1, omega=2.0)
    r = verify.verify_adiabatic_limit(model, thetas=(1, 2, 4, 8, 16, 32))
    m = r.measured
    ov = np.asarray(m["overlap"])
    dev = m["E0_deviation_at_max_theta"]
    ok = (r.verdict == "pass" and bool(np.all(np.diff(ov) > 0)) and ov[-1] >= 0.99
          and bool(np.all(np.asarray(m["gap"]) > 0)) and np.ptp(m["S2"]) <= 1e-8
          and abs(dev) <= 1e-3)
    dt = time.perf_counter() - t
    report(8, "adiabatic limit", ok and dt < 60.0,
           f"overlap(32)={ov[-1]:.10f} dE0(32)={dev:.2e} time={dt:.1f}s")


def test_criterion_09_heisenberg_limit(report):
    d = verify.verify_heisenberg_limit(preset_model("dimer", t0=1.0, U0=4.0))
    s = verify.verify_heisenberg_limit(preset_model("star4", **STAR))
    scaled = d.measured["scaled_gap"][-1]
    ok = (d.verdict == "pass" and abs(scaled - 4.0) <= 0.05 * 4.0
          and s.verdict == "pass" and np.allclose(s.measured["hubbard_spin"], 1.0)
          and abs(s.measured["heisenberg_spin"] - 1.0) < 1e-8)
    report(9, "strong-coupling spin model", ok,
           f"U0*gap at U0={d.measured['U0'][-1]}: {scaled:.6f}; "
           f"star4 spins={np.round(s.measured['hubbard_spin'], 10).tolist()} "
           f"/ {s.measured['heisenberg_spin']:.10f}")


def _numbers(obj, path=""):
    if isinstance(obj, dict):
        for key in sorted(obj):
            yield from _numbers(obj[key], f"{path}/{key}")
    elif isinstance(obj, (list, tuple)):
        for i, v in enumerate(obj):
            yield from _numbers(v, f"{path}[{i}]")
    else:
        yield path, obj


def test_criterion_10_reproducibility(report, tmp_path):
    text = ('[model]\npreset = "star4"\nU0 = 8\ng0 = 0.5\nomega = 1\n'
            '[run]\nchecks = ["uniqueness", "total_spin", "sign_pattern", "lro", "heisenberg"]\n')
    reports = []
    for threads, attempt in ((1, 0), (4, 0), (4, 1)):
        _, rep = cli.run(parse_config(text), out=tmp_path / f"{threads}-{attempt}",
                         threads=threads)
        reports.append(dict(_numbers(rep)))
    worst, same_keys = 0.0, True
    for other in reports[1:]:
        same_keys &= other.keys() == reports[0].keys()
        for key, a in reports[0].items():
            b = other.get(key)
            if isinstance(a, float) and isinstance(b, float):
                worst = max(worst, abs(a - b))
            elif a != b:
                worst = np.inf
    report(10, "1 vs 4 threads", same_keys and worst <= 1e-12,
           f"{len(reports[0])} fields, max diff={worst:.1e}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
