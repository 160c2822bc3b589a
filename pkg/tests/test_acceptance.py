"""End-to-end acceptance checks, one PASS/FAIL line per criterion.

Run with ``pytest -s tests/test_acceptance.py``; the lines are also written
with capture disabled so they show in a plain ``pytest -v`` log.
"""
import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from duotoc.amplitudes import compute_amplitudes, haar_average_z, haar_averaged_zk
from duotoc.analysis import (collapse_gap, crossing_time, early_time_report, fit_front,
                             mcs_slice_grid, screened_du_gates)
from duotoc.brute_force import (CircuitColumnSpec, FoldedColumnOperator, apply_column, otoc_exact,
                                subleading_lightcone_modulus)
from duotoc.gate_core import (PAULI_Z, haar_unitary, make_gate, perturb, random_du_gate_q2,
                              random_hermitian)
from duotoc.mcs import mcs_basis_vector, otoc_mcs_nm, projected_transfer
from duotoc.path_integral import (erf_front, front_params, gamma_decay, otoc_1step, otoc_2step,
                                  otoc_closed_xt)

Z1_VALUES = (0.05, 0.1, 0.2)


@pytest.fixture
def report(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}", flush=True)
        return ok
    return emit


def perturbed(seed, eps):
    return perturb(random_du_gate_q2(seed), random_hermitian(4, seed + 1), eps)


# -- 1: dual-unitary values --------------------------------------------------------

def dual_unitary_errors(V, ms):
    light = max(abs(otoc_exact(V, PAULI_Z, PAULI_Z, 1, m) + 1 / 3) for m in ms)
    inner = max(abs(otoc_exact(V, PAULI_Z, PAULI_Z, n, m)) for n in (2, 3) for m in ms)
    return light, inner


def test_criterion_1_dual_unitary_values(report):
    worst = [0.0, 0.0]
    lam = []
    # near-SWAP members of the family never relax and are screened out
    for _, V in screened_du_gates(5):
        light, inner = dual_unitary_errors(V, range(3, 13))
        worst = [max(worst[0], light), max(worst[1], inner)]
        lam.append(subleading_lightcone_modulus(V))
    ok = worst[0] <= 1e-10 and worst[1] <= 1e-10
    # the values are reached only after the transient set by the subleading eigenvalue
    report(1, ok, f"max |C+1/3| (n=1) = {worst[0]:.3g}, max |C| (n=2,3) = {worst[1]:.3g} "
                  f"for m in 3..12; subleading |lambda| in [{min(lam):.2f}, {max(lam):.2f}]")
    assert ok


def test_dual_unitary_values_after_transient():
    for _, V in screened_du_gates(4, max_subleading=0.935):
        light, inner = dual_unitary_errors(V, range(400, 403))
        assert light <= 1e-10 and inner <= 1e-10


# -- 2: projected matrix elements ----------------------------------------------------

def test_criterion_2_matrix_element_oracle(report):
    n = 2
    rng = np.random.default_rng(2024)
    vecs = [mcs_basis_vector(n, k, 2) for k in range(n + 1)]
    worst = 0.0
    for _ in range(20):
        seed = int(rng.integers(0, 10**6))
        U = perturbed(seed, float(rng.uniform(0.05, 1.0)))
        op = FoldedColumnOperator(U, n)
        P = np.array([[vecs[l].conj() @ apply_column(op, vecs[k]) for k in range(n + 1)]
                      for l in range(n + 1)])
        M = projected_transfer(compute_amplitudes(U, n + 1), n, 2, pad=True).M
        worst = max(worst, float(np.max(np.abs(P - M))))
    ok = worst <= 1e-10
    report(2, ok, f"max abs error over 20 gates = {worst:.3g}")
    assert ok


# -- 3: closed forms -------------------------------------------------------------------

def test_criterion_3_closed_form_exactness(report):
    one = 0.0
    for z1 in Z1_VALUES:
        for n in range(1, 21):
            for m in range(1, 201):
                one = max(one, abs(otoc_1step(z1, 2, n, m) - otoc_mcs_nm([z1], 2, n, m)))
    two = 0.0
    for z1 in Z1_VALUES:
        z2 = z1 * (1 - z1)
        for n in range(1, 16):
            for m in range(1, 151):
                ref = otoc_mcs_nm([z1, z2], 2, n, m)
                two = max(two, abs(otoc_2step(z1, z2, 2, n, m) - ref) / max(abs(ref), 1e-300))
    ok = one <= 1e-12 and two <= 1e-8
    report(3, ok, f"1-step max abs error = {one:.3g}, 2-step max rel error = {two:.3g}")
    assert ok


# -- 4: front law -----------------------------------------------------------------------

def test_criterion_4_front_law(report):
    t = 512
    parts = []
    ok = True
    for z1 in Z1_VALUES:
        fp = front_params(z1, 0.0, 2)
        fit = fit_front(mcs_slice_grid([z1], 2, t), t)
        ev = fit.v_B_hat / fp.v_B1 - 1
        eD = fit.D_hat / fp.D1 - 1
        ok &= abs(ev) <= 0.01 and abs(eD) <= 0.08
        parts.append(f"z1={z1}: dv={ev:+.2%} dD={eD:+.2%}")
    report(4, ok, "; ".join(parts))
    assert ok


# -- 5: front shape ---------------------------------------------------------------------

def front_deviation(z1, t, shift=0.0):
    fp = front_params(z1, 0.0, 2)
    half = 3 * math.sqrt(2 * fp.D1 * t)
    xs = [x for x in range(math.ceil(fp.v_B1 * t - half), math.floor(fp.v_B1 * t + half) + 1)
          if (t - x) % 2 == 0]
    c = np.array([otoc_closed_xt(x, t, z1) for x in xs])
    return float(np.max(np.abs(c - erf_front(np.array(xs) - shift, t, fp.v_B1, fp.D1))))


def test_criterion_5_front_shape(report):
    parts = []
    ok = True
    for z1 in Z1_VALUES:
        d400, d1600 = front_deviation(z1, 400), front_deviation(z1, 1600)
        ok &= d1600 <= 0.02 and d1600 < d400
        parts.append(f"z1={z1}: {d400:.4f} (t=400) -> {d1600:.4f} (t=1600)")
    report(5, ok, "max |C - erf|: " + "; ".join(parts))
    assert ok


def test_front_shape_with_fitted_offset():
    # the discrete front sits a fixed O(1) distance from v_B1 t; with that offset
    # removed the erf profile is approached at the stated tolerance
    for z1 in Z1_VALUES:
        shift = minimize_scalar(lambda s: front_deviation(z1, 1600, s), bounds=(-5, 5),
                                method="bounded").x
        d400, d1600 = front_deviation(z1, 400, shift), front_deviation(z1, 1600, shift)
        assert d1600 <= 0.02 and d1600 < d400


# -- 6: two-step renormalisation -------------------------------------------------------

def test_criterion_6_two_step_renormalisation(report):
    t = 512
    parts = []
    ok = True
    for z1 in Z1_VALUES:
        z2 = z1 * (1 - z1)
        fp = front_params(z1, z2, 2)
        fit = fit_front(mcs_slice_grid([z1, z2], 2, t), t)
        between = fp.v_B2 < fit.v_B_hat < fp.v_B1 or abs(fit.v_B_hat / fp.v_B2 - 1) <= 0.005
        ok &= between and fit.D_hat > fp.D1
        parts.append(f"z1={z1}: v_B2={fp.v_B2:.4f} v_hat={fit.v_B_hat:.4f} v_B1={fp.v_B1:.4f} "
                     f"D_hat={fit.D_hat:.4f} D1={fp.D1:.4f}")
    report(6, ok, "; ".join(parts))
    assert ok


# -- 7: amplitude bounds and Haar law ---------------------------------------------------

def gate_ensemble(count=50, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        if i % 5 == 4:
            out.append(make_gate(haar_unitary(9, rng), 3))
        elif i % 2 == 0:
            out.append(make_gate(haar_unitary(4, rng)))
        else:
            V = random_du_gate_q2(int(rng.integers(0, 10**6)))
            out.append(perturb(V, random_hermitian(4, rng), float(rng.uniform(0, 1))))
    return out


def haar_law_sigmas(U, k_max=6, samples=1000):
    mean, err = haar_average_z(U, k_max, samples, seed=1)
    z1 = compute_amplitudes(U, 1).z1
    law = np.array([haar_averaged_zk(z1, k) for k in range(1, k_max + 1)])
    return np.abs(mean - law) / np.maximum(err, 1e-300), np.abs(mean - law)


def test_criterion_7_amplitude_bounds_and_haar_law(report):
    amps = [compute_amplitudes(U, 10) for U in gate_ensemble()]
    basic = sum(bool(a.bound_violations()) for a in amps)
    zb = sum(bool(a.z_bound_violations()) for a in amps)
    lb = sum(bool(a.lower_bound_violations()) for a in amps)
    U = perturb(random_du_gate_q2(3), random_hermitian(4, 5), 0.5)
    sig, diff = haar_law_sigmas(U)
    # z_1 is invariant under dressing, so its spread is zero and the difference must vanish
    haar_ok = diff[0] <= 1e-12 and np.all(sig[1:] <= 3)
    ok = basic == 0 and zb == 0 and lb == 0 and haar_ok
    report(7, ok, f"50 gates: range/monotone violations {basic}, z-bound violations {zb}, "
                  f"B_k lower-bound violations {lb}; Haar law max deviation "
                  f"{np.max(sig[1:]):.2f} sigma")
    assert ok


def test_amplitude_range_and_haar_law():
    for U in gate_ensemble():
        assert compute_amplitudes(U, 10).bound_violations() == []
    sig, diff = haar_law_sigmas(perturb(random_du_gate_q2(3), random_hermitian(4, 5), 0.5))
    assert diff[0] <= 1e-12 and np.all(sig[1:] <= 3)


# -- 8: relaxation timescale ------------------------------------------------------------

def test_criterion_8_relaxation_timescale(report):
    eps = np.array([0.1, 0.15, 0.2, 0.3])
    slopes, gaps = [], []
    for seed, V in screened_du_gates(8):
        W = random_hermitian(4, 1000 + seed)
        times, curves = [], []
        for e in eps:
            rows = early_time_report(perturb(V, W, e), 4000)
            t = np.array([r["t"] for r in rows])
            dev = np.array([r["deviation"] for r in rows])
            times.append(crossing_time(t, dev, 0.5 * (2 / 3)))
            curves.append((t / rows[0]["tau"], dev))
        slopes.append(np.polyfit(np.log(eps), np.log(times), 1)[0])
        gaps.append(collapse_gap(curves))
    slope, gap = float(np.median(slopes)), float(np.median(gaps))
    ok = abs(slope + 2) <= 0.15 and gap < 0.1
    report(8, ok, f"median slope {slope:.3f}, median collapse gap {gap:.3f} over 8 gates")
    assert ok


# -- 9: dilute defects ------------------------------------------------------------------

def test_criterion_9_dilute_defect_convergence(report):
    widths = (2, 4, 8)
    votes = []
    for seed, V in screened_du_gates(6):
        D = perturb(V, random_hermitian(4, 50 + seed), 0.3)
        ref = otoc_mcs_nm(compute_amplitudes(D, 12), 2, 3, 24)
        err = [abs(otoc_exact(CircuitColumnSpec.dilute_defect(V, D, w), PAULI_Z, PAULI_Z, 3, 24,
                              repeats=24) - ref) for w in widths]
        votes.append(err[0] > err[1] > err[2])
    ok = sum(votes) > len(votes) / 2
    report(9, ok, f"error decreasing in w for {sum(votes)} of {len(votes)} gates")
    assert ok


# -- 10: decay exponent -----------------------------------------------------------------

def decay_rate_error(z1, t_max=400, t_min=100):
    v = 0.5 * (1 - z1) / (1 + z1)
    pts = []
    for t in range(t_min, t_max + 1):
        x = v * t
        if abs(x - round(x)) < 1e-9 and (t - round(x)) % 2 == 0:
            pts.append((t, round(x)))
    t = np.array([p[0] for p in pts], float)
    y = np.array([math.log(abs(otoc_closed_xt(x, int(tt), z1))) for tt, x in pts]) + 0.5 * np.log(t)
    rate = -np.polyfit(t, y, 1)[0]
    return rate / -math.log(gamma_decay(v, z1)) - 1, len(pts)


def test_criterion_10_decay_exponent(report):
    err, npts = decay_rate_error(0.1)
    others = "; ".join(f"z1={z}: {decay_rate_error(z)[0]:+.2%}" for z in (0.05, 0.2))
    ok = abs(err) <= 0.02
    report(10, ok, f"z1=0.1: rate error {err:+.3%} from {npts} lattice points on the ray "
                   f"(also {others})")
    assert ok
