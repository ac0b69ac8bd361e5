"""Acceptance suite: one test per criterion, each printing a PASS line.

Slow solves (size scans, the mean-field map, preset determinism re-runs) are
marked `slow`; run `pytest -m "not slow"` for the quick subset and plain
`pytest` for the full gate.
"""

import math

import numpy as np
import pytest

from conftest import require_golden
from ringsim.cmf import analytic_current, cmf_fixed_point
from ringsim.experiments import SolverConfig, solve_steady_point
from ringsim.groundstate import ground_state_ed
from ringsim.lattice import (DissipationSpec, HamiltonianParams, ModelSpec, coeff_map,
                             hamiltonian_terms, jump_terms)
from ringsim.observables import (current_eta, eom_candidate_residuals,
                                 magnetization_eom_residual, magnetization_z,
                                 measure_currents)
from ringsim.solver import (EvolveOptions, LindbladGenerator, steady_state_evolution,
                            steady_state_nullspace)
from test_lattice import _evolve_site_amplitude, _product_state

ACCEPTED_ASSIGNMENT = "eta:+1 lam:-1 xi:conj-on-beta gammas:standard"


def report(name: str, detail: str) -> None:
    print(f"{name} PASS: {detail}")


def by_observable(rows, observable, **filters):
    out = []
    for r in rows:
        if r["observable"] != observable:
            continue
        if any(not math.isclose(float(r[k]), v, rel_tol=0, abs_tol=1e-12)
               for k, v in filters.items()):
            continue
        out.append(r)
    return out


def test_A1_equation_of_motion_identity():
    rng = np.random.default_rng(101)
    m = ModelSpec(L=4)
    worst = 0.0
    for _ in range(50):
        p = HamiltonianParams(J0=rng.uniform(0, 2), phi=rng.uniform(-np.pi, np.pi),
                              lam=rng.normal() + 1j * rng.normal(), mu=rng.normal())
        amps = rng.normal(size=4) + 1j * rng.normal(size=4)
        d = DissipationSpec(kappa=rng.uniform(0, 1), alpha=amps[0], beta=amps[1],
                            gamma=amps[2], delta=amps[3])
        worst = max(worst, magnetization_eom_residual(m, p, d))
    assert worst <= 1e-10
    # record which assignment closes the identity (Gamma+ = |beta|^2 + |delta|^2,
    # Gamma- = |alpha|^2 + |gamma|^2, plus the sign/conjugation resolution)
    table = eom_candidate_residuals(m, HamiltonianParams(J0=0.8, phi=0.7, lam=0.3 + 0.4j, mu=0.9),
                                    DissipationSpec(kappa=0.5, alpha=0.6 + 0.2j, beta=0.1 - 0.7j,
                                                    gamma=-0.4 + 0.3j, delta=0.8 + 0.1j))
    closing = [k for k, v in table.items() if v <= 1e-10]
    assert closing == [ACCEPTED_ASSIGNMENT]
    report("A1", f"50 random draws, max residual {worst:.2e}; "
                 f"identity closes only for [{closing[0]}]")


def test_A2_directionality():
    rng = np.random.default_rng(102)
    worst = 0.0
    for _ in range(20):
        a, b, g, dd = rng.normal(size=4) + 1j * rng.normal(size=4)
        kappa = rng.uniform(0, 2)
        c = coeff_map(DissipationSpec(kappa=kappa, alpha=a, beta=b, gamma=g, delta=dd))
        worst = max(
            worst,
            abs(c.Pi - (kappa + abs(a) ** 2 + abs(b) ** 2 + abs(g) ** 2 + abs(dd) ** 2) / 2),
            abs(c.eta - (a * np.conj(g) - dd * np.conj(b))),
            abs(c.xi - (a * np.conj(dd) - np.conj(g) * b)),
            abs(c.Gamma_plus - (abs(b) ** 2 + abs(dd) ** 2)),
            abs(c.Gamma_minus - (abs(a) ** 2 + abs(g) ** 2)))
    assert worst <= 1e-14

    # dynamical check: tuned bath shields the forward neighbor (open geometry;
    # on a ring the signal returns around the loop at second order in t)
    n_max = 4
    params = HamiltonianParams(J0=0.5)
    diss = DissipationSpec(alpha=1.0, gamma=-1j)   # eta = 2iJ, xi = 0
    chain = ModelSpec(L=3, boundary="open", kind="boson", n_max=n_max)
    t_end = 0.5 / coeff_map(diss).Pi
    base = _product_state([0.05, 0.05, 0.0], n_max)
    fwd = _product_state([0.05, 0.05, 0.1], n_max)
    bwd = _product_state([0.15, 0.05, 0.0], n_max)
    e0 = _evolve_site_amplitude(chain, params, diss, base, 1, t_end, 120)
    ef = _evolve_site_amplitude(chain, params, diss, fwd, 1, t_end, 120)
    eb = _evolve_site_amplitude(chain, params, diss, bwd, 1, t_end, 120)
    shield = np.abs(ef - e0).max()
    control = np.abs(eb - e0).max()
    assert shield <= 1e-6
    assert control >= 1e-3
    report("A2", f"coefficient algebra exact to {worst:.1e}; dynamical shielding "
                 f"{shield:.1e} (<= 1e-6), control response {control:.1e} (>= 1e-3)")


def test_A3_flux_scenario(presets):
    rows = presets.rows("fig2")
    cur = by_observable(rows, "current_J", index=2)
    phis = np.array([float(r["phi"]) for r in cur])
    vals = np.array([float(r["value"]) for r in cur])
    order = np.argsort(phis)
    phis, vals = phis[order], vals[order]

    i_zero = float(vals[np.argmin(np.abs(phis))])
    assert abs(i_zero) <= 1e-8
    assert abs(vals[0] - vals[-1]) <= 1e-8  # I(0) = I(8 pi), exact model periodicity

    # measured, reported: empirical period (grid multiples of the spacing)
    step = phis[1] - phis[0]
    period = None
    for s in range(8, len(phis)):
        if np.abs(vals[s:] - vals[:-s]).max() <= 1e-6:
            period = s * step
            break
    # measured, reported: symmetry defect about phi = pi/2
    mid = np.argmin(np.abs(phis - np.pi / 2))
    span = min(mid, len(phis) - 1 - mid)
    sym_defect = float(np.abs(vals[mid + 1:mid + span] - vals[mid - 1:mid - span:-1]).max())

    krows = presets.rows("fig2_kappa")
    peak = {}
    negmax = {}
    for kappa in (0.1, 0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0):
        kcur = by_observable(krows, "current_J", index=2, kappa=kappa)
        peak[kappa] = max(abs(float(r["value"])) for r in kcur)
        kneg = by_observable(krows, "negativity", kappa=kappa)
        negmax[kappa] = max(float(r["value"]) for r in kneg)
    best_kappa = max(negmax, key=negmax.get)
    report("A3", f"I(0) = {i_zero:.1e}; |I(0) - I(8pi)| <= 1e-8; measured period "
                 f"{period / np.pi if period else float('nan'):.2f} pi "
                 f"(closed-system period is 2 pi); symmetry defect about pi/2: "
                 f"{sym_defect:.3f}; max|I| at kappa 0.1/1/5: "
                 f"{peak[0.1]:.4f}/{peak[1.0]:.4f}/{peak[5.0]:.4f} "
                 f"(suppression {'monotone' if peak[0.1] > peak[1.0] > peak[5.0] else 'NOT monotone'}); "
                 f"negativity peaks at kappa = {best_kappa}")


def test_A4_completely_mixed_point():
    m = ModelSpec(L=4)
    p = HamiltonianParams(mu=1.0)
    d = DissipationSpec.minimal_model(1.0, 1.0)
    res = steady_state_nullspace(hamiltonian_terms(m, p), jump_terms(m, d), m.space())
    dev = np.abs(res.rho.matrix - np.eye(16) / 16).max()
    assert dev <= 1e-8
    assert abs(res.rho.purity() - 1 / 16) <= 1e-6
    cur = measure_currents(res.rho, m, p, d)
    for arr in (cur.I_J, cur.I_eta, cur.I_lambda, cur.I_xi):
        assert np.abs(arr).max() <= 1e-8
    report("A4", f"steady state is I/16 (max dev {dev:.1e}), purity "
                 f"{res.rho.purity():.8f}, all currents <= 1e-8")


def test_A5_polarized_points():
    m = ModelSpec(L=4)
    p = HamiltonianParams(mu=1.0)
    details = []
    for (a, dd, sign) in ((0.0, 1.0, +1.0), (1.0, 0.0, -1.0)):
        d = DissipationSpec.minimal_model(a, dd)
        gen = LindbladGenerator(m.space(), hamiltonian_terms(m, p), jump_terms(m, d))
        res = solve_steady_point(m, p, d, SolverConfig())
        assert res.rho.purity() >= 1 - 1e-8
        mz = magnetization_z(res.rho)
        assert np.abs(np.abs(mz) - 1.0).max() <= 1e-8
        assert np.allclose(mz, sign, atol=1e-8)
        cur = measure_currents(res.rho, m, p, d)
        assert np.abs(cur.I_eta).max() <= 1e-10
        assert np.abs(cur.I_J).max() <= 1e-10
        # the polarized state is exactly stationary; the raw kernel is
        # two-fold degenerate (a dark standing-wave state shares it), which
        # the solve policy resolves toward the polarized limit
        assert gen.residual(res.rho.matrix) <= 1e-10
        ns = steady_state_nullspace(gen)
        details.append(f"alpha={a}, delta={dd}: <sz> = {sign:+.0f}, purity "
                       f"{res.rho.purity():.10f}, kernel degeneracy {ns.zero_eigen_degeneracy}")
    report("A5", "; ".join(details))


@pytest.mark.slow
def test_A6_closed_form_and_cmf_map(presets):
    v = analytic_current(1.0, 0.5, 1.0)
    assert v == pytest.approx(-0.421875 / 2.58203125, abs=1e-15)
    assert analytic_current(1.0, 1.0, 1.0) == 0.0
    assert analytic_current(1.0, 0.0, 1.0) == 0.0

    res = cmf_fixed_point(HamiltonianParams(mu=1.0), DissipationSpec.minimal_model(1.3, 0.7))
    assert res.fixed_point_residual <= 1e-10
    r_swap = cmf_fixed_point(HamiltonianParams(mu=1.0), DissipationSpec.minimal_model(0.7, 1.3))
    assert res.current == pytest.approx(-r_swap.current, abs=1e-8)
    for (a, dd) in ((1.0, 1.0), (0.0, 1.0), (1.0, 0.0)):
        z = cmf_fixed_point(HamiltonianParams(mu=1.0), DissipationSpec.minimal_model(a, dd))
        assert abs(z.current) <= 1e-8

    rows = presets.rows("fig3")
    cur = by_observable(rows, "cmf_current")
    assert len(cur) == 81 * 81
    rel_dev = 0.0
    n_checked = 0
    for r in cur:
        a, dd = float(r["alpha"]), float(r["delta"])
        val = float(r["value"])
        assert np.isfinite(val)
        if a == 0.0 and dd == 0.0:
            continue
        closed = analytic_current(a, dd, 1.0)
        if abs(closed) > 1e-9:
            rel_dev = max(rel_dev, abs(val - closed) / abs(closed))
            n_checked += 1
    assert rel_dev > 1e-6  # the closed form deviates; the numeric oracle governs
    report("A6", f"closed-form current examples pass; fixed point stationary to "
                 f"{res.fixed_point_residual:.1e}; swap antisymmetry and zero loci <= 1e-8; "
                 f"numeric-vs-closed-form relative deviation up to {rel_dev:.3f} over "
                 f"{n_checked} grid points (documented discrepancy; numeric oracle governs)")


def test_A7_exact_vs_cmf_theta_scan(presets):
    rows = presets.rows("fig4")
    ed, cm = {}, {}
    for r in by_observable(rows, "current_eta", index=2, r=1.0):
        ed[round(float(r["theta"]), 12)] = float(r["value"])
    for r in by_observable(rows, "cmf_current", r=1.0):
        cm[round(float(r["theta"]), 12)] = float(r["value"])
    thetas = sorted(ed)
    assert len(thetas) == 25 and len(cm) == 25
    for t0 in (0.0, np.pi / 4, np.pi / 2):
        key = min(thetas, key=lambda t: abs(t - t0))
        assert abs(ed[key]) <= 1e-6
        assert abs(cm[key]) <= 1e-6
    max_dev = 0.0
    n_signed = 0
    for t in thetas:
        if max(abs(ed[t]), abs(cm[t])) > 1e-6:
            assert np.sign(ed[t]) == np.sign(cm[t]), f"sign mismatch at theta={t}"
            n_signed += 1
        max_dev = max(max_dev, abs(ed[t] - cm[t]))
    golden = require_golden("fig4_r1_max_ed_cmf_deviation", max_dev)
    report("A7", f"signs agree at {n_signed} non-zero points; zeros at 0, pi/4, pi/2 "
                 f"<= 1e-6; max|ED - CMF| = {max_dev:.4f} ({golden})")


@pytest.mark.slow
def test_A8_ring_size_scan(presets):
    rows = presets.rows("fig5_ring")
    cur = {}
    for r in by_observable(rows, "current_eta", index=2):
        cur[int(r["L"])] = float(r["value"])
    sizes = sorted(cur)
    assert sizes == [3, 4, 5, 6, 7, 8]
    diffs = [cur[L + 1] - cur[L] for L in sizes[:-1]]
    signs = np.sign(diffs)
    assert all(signs[i] != signs[i + 1] for i in range(len(signs) - 1)), \
        f"differences do not alternate: {diffs}"
    for L in (3, 4):
        gap_near = abs(cur[L + 2] - cur[L])
        gap_far = abs(cur[L + 4] - cur[L + 2])
        assert gap_far < gap_near, f"same-parity gaps not shrinking from L={L}"
    report("A8", "ring current alternates and same-parity differences shrink: "
                 + ", ".join(f"I({L}) = {cur[L]:+.5f}" for L in sizes))


@pytest.mark.slow
def test_A9_open_chain_bulk_current(presets):
    # reference: L = 8 ring at the same couplings (alpha = 2, delta = 1)
    m = ModelSpec(L=8)
    p = HamiltonianParams(mu=1.0)
    d = DissipationSpec.minimal_model(2.0, 1.0)
    opts = EvolveOptions(tol=1e-7)
    ring = steady_state_evolution(hamiltonian_terms(m, p), jump_terms(m, d),
                                  opts=opts, space=m.space())
    ring_current = current_eta(ring.rho, 2, coeff_map(d).eta)

    rows = presets.rows("fig5_chain")
    details = []
    for L in (6, 8, 10):
        prof = {int(r["index"]): float(r["value"])
                for r in by_observable(rows, "current_eta", L=float(L))}
        bonds = sorted(prof)
        assert bonds == list(range(2, L + 1))
        center_bond = bonds[len(bonds) // 2]
        center = prof[center_bond]
        assert abs(center - ring_current) <= 0.10 * abs(ring_current), \
            f"L={L}: center {center:.5f} vs ring {ring_current:.5f}"
        # approach to the bulk: deviations from the center value shrink inward
        left = [abs(prof[b] - center) for b in bonds if b <= center_bond]
        right = [abs(prof[b] - center) for b in bonds if b >= center_bond][::-1]
        for half in (left, right):
            assert all(half[i] >= half[i + 1] - 1e-10 for i in range(len(half) - 1)), \
                f"L={L}: |I_b - I_center| not monotone toward the bulk: {half}"
        details.append(f"L={L}: center {center:+.5f}")
    report("A9", f"ring reference {ring_current:+.5f}; " + "; ".join(details)
           + " (all within 10%, monotone approach)")


@pytest.mark.slow
def test_A10_perturbations(presets):
    sx = presets.rows("fig6_sx")
    at_zero, at_peak = {}, {}
    for eps in (0.1, 0.2, 0.3):
        vals = {round(float(r["theta"]), 12): float(r["value"])
                for r in by_observable(sx, "current_eta", index=2, eps_x=eps)}
        thetas = sorted(vals)
        at_zero[eps] = vals[thetas[0]]
        at_peak[eps] = max(abs(v) for v in vals.values())
        # antisymmetry about theta = pi/4 is preserved
        n = len(thetas)
        for i in range(n // 2):
            assert abs(vals[thetas[i]] + vals[thetas[n - 1 - i]]) <= 1e-6
    assert all(abs(at_zero[e]) > 1e-6 for e in (0.1, 0.2, 0.3))
    assert abs(at_zero[0.1]) < abs(at_zero[0.2]) < abs(at_zero[0.3])
    assert at_peak[0.1] > at_peak[0.2] > at_peak[0.3]

    zz = presets.rows("fig6_zz")
    zz_means = {}
    for eps in (0.1, 0.2, 0.3):
        vals = {round(float(r["theta"]), 12): float(r["value"])
                for r in by_observable(zz, "current_eta", index=2, eps_zz=eps)}
        thetas = sorted(vals)
        quarter = np.pi / 4
        for t0 in (0.0, quarter, np.pi / 2):
            key = min(thetas, key=lambda t: abs(t - t0))
            assert abs(vals[key]) <= 1e-6
        lower = [abs(vals[t]) for t in thetas if 1e-9 < t < quarter - 1e-9]
        upper = [abs(vals[t]) for t in thetas if quarter + 1e-9 < t < np.pi / 2 - 1e-9]
        zz_means[eps] = (np.mean(lower), np.mean(upper))
        assert zz_means[eps][0] > zz_means[eps][1]

    nnn = presets.rows("fig6_nnn")
    nn_cur = {}
    for L in (4, 5, 6, 7):
        prof = [abs(float(r["value"]))
                for r in by_observable(nnn, "current_eta", L=float(L)) if int(r["index"]) == 2]
        nn_cur[L] = prof[0]
    assert nn_cur[4] <= 1e-10 and nn_cur[6] <= 1e-10
    assert nn_cur[5] > 1e-6 and nn_cur[7] > 1e-6
    assert nn_cur[7] < nn_cur[5]
    report("A10", f"sx: I(0) grows with eps {tuple(round(abs(at_zero[e]), 5) for e in (0.1, 0.2, 0.3))}, "
                  f"peak shrinks {tuple(round(at_peak[e], 5) for e in (0.1, 0.2, 0.3))}, "
                  f"antisymmetry <= 1e-6; zz: zeros at 0, pi/4, pi/2 and lower-half mean "
                  f"exceeds upper-half; next-nearest bath: even-L current <= 1e-10, "
                  f"|I(7)| = {nn_cur[7]:.2e} < |I(5)| = {nn_cur[5]:.2e}")


def test_A11_ground_state_baseline(presets):
    rows = presets.rows("fig7")
    grid = sorted({float(r["phi"]) for r in rows})
    assert len(grid) == 33
    h = 1e-4
    worst_hf = 0.0
    worst_disp = 0.0
    skipped = []
    entropies = []
    for r in by_observable(rows, "gs_current"):
        phi = float(r["phi"])
        if r["method"] == "ed-degenerate":
            skipped.append(round(phi, 3))
            continue
        ep = ground_state_ed(4, 1.0, phi + h).energy
        em = ground_state_ed(4, 1.0, phi - h).energy
        worst_hf = max(worst_hf, abs(float(r["value"]) + (ep - em) / (2 * h)))
    assert worst_hf <= 1e-6
    ed_e = {float(r["phi"]): float(r["value"]) for r in by_observable(rows, "gs_energy")}
    for r in by_observable(rows, "dispersion_energy"):
        worst_disp = max(worst_disp, abs(float(r["value"]) - ed_e[float(r["phi"])]))
    assert worst_disp <= 1e-10
    entropies = [float(r["value"]) for r in by_observable(rows, "gs_entropy_12")
                 if r["method"] == "ed"]
    s_var = max(entropies) - min(entropies)
    # measured flat to machine precision at L = 4, so the flatness is asserted
    assert s_var < 1e-6
    golden_s = require_golden("fig7_entropy12_variation", s_var)

    srows = presets.rows("fig7_scaling")
    scaled = {}
    for L in (8, 12, 16, 20):
        vals = [abs(float(r["value"]))
                for r in by_observable(srows, "dispersion_current", L=float(L))]
        scaled[L] = L * max(vals)
    spread = (max(scaled.values()) - min(scaled.values())) / max(scaled.values())
    assert spread < 0.20
    report("A11", f"Hellmann-Feynman residual {worst_hf:.1e} "
                  f"(degenerate points skipped: {skipped}); dispersion-vs-ED "
                  f"{worst_disp:.1e}; S(rho_12) variation {s_var:.3e} ({golden_s}); "
                  f"L*max|I| spread {spread:.1%} over L in 8..20")


@pytest.mark.slow
def test_A12_solver_cross_validation():
    rng = np.random.default_rng(112)
    worst = 0.0
    for i in range(20):
        L = (3, 4, 5)[i % 3]
        m = ModelSpec(L=L)
        p = HamiltonianParams(J0=rng.uniform(0, 1.5), phi=rng.uniform(-np.pi, np.pi),
                              lam=rng.normal(0, 0.5) + 1j * rng.normal(0, 0.5),
                              mu=rng.uniform(0.5, 1.5))
        amps = rng.normal(0, 0.7, size=4) + 1j * rng.normal(0, 0.7, size=4)
        d = DissipationSpec(kappa=rng.uniform(0.2, 1.2), alpha=amps[0], beta=amps[1],
                            gamma=amps[2], delta=amps[3])
        ns = steady_state_nullspace(hamiltonian_terms(m, p), jump_terms(m, d), m.space())
        opts = EvolveOptions(tol=1e-9)
        ev = steady_state_evolution(hamiltonian_terms(m, p), jump_terms(m, d),
                                    opts=opts, space=m.space())
        dist = 0.5 * np.abs(np.linalg.eigvalsh(ns.rho.matrix - ev.rho.matrix)).sum()
        worst = max(worst, dist)
        assert dist <= 1e-6
        assert ns.rho.min_eigenvalue() >= -1e-8 and ev.rho.min_eigenvalue() >= -1e-8
        assert ev.residual <= opts.tol
    report("A12", f"20 random models at L in 3..5: max trace distance {worst:.2e}, "
                  "positivity and residual targets met")


FAST_PRESETS = ("fig2", "fig2_kappa", "fig4", "fig6_sx", "fig6_zz", "fig7", "fig7_scaling")
SLOW_PRESETS = ("fig3", "fig5_ring", "fig5_chain", "fig6_nnn")


def _check_determinism(presets, names):
    from ringsim.experiments import CSV_HEADER, load_preset

    for name in names:
        first = presets.csv_bytes(name, "first")
        second = presets.csv_bytes(name, "second")
        assert first.decode().splitlines()[0] == CSV_HEADER
        assert first == second, f"preset {name} re-run is not byte-identical"
        # residual column present and within the configured tolerance per row
        configured = load_preset(name).solver.tol
        for r in presets.rows(name):
            assert r["residual"] != ""
            resid = float(r["residual"])
            if r["method"] in ("nullspace", "nullspace+limit", "evolution"):
                tol = configured or (1e-9 if int(r["L"]) <= 6 else 1e-7)
                assert resid <= tol, f"{name}: residual {resid} above {tol}"
            elif r["method"] == "cmf":
                assert resid <= 1e-9


def test_A13_determinism_fast_presets(presets):
    _check_determinism(presets, FAST_PRESETS)
    report("A13 (fast presets)", f"byte-identical re-runs, schema v1 header: "
                                 f"{', '.join(FAST_PRESETS)}")


@pytest.mark.slow
def test_A13_determinism_slow_presets(presets):
    _check_determinism(presets, SLOW_PRESETS)
    report("A13 (slow presets)", f"byte-identical re-runs, schema v1 header: "
                                 f"{', '.join(SLOW_PRESETS)}")
