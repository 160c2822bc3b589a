"""Front fitting and parameter scans on OTOC grids."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .amplitudes import compute_amplitudes, relaxation_timescale
from .brute_force import lightcone_floquet
from .errors import InsufficientPoints, Undefined
from .gate_core import perturb, random_hermitian
from .mcs import otoc_mcs_slice
from .path_integral import FrontParams, front_params

PROVENANCES = ("brute", "mcs", "closed1", "closed2")


@dataclass
class OtocGrid:
    parity: int
    x: np.ndarray
    t: np.ndarray
    values: np.ndarray
    provenance: str
    q: int = 2
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=int)
        self.t = np.asarray(self.t, dtype=int)
        self.values = np.asarray(self.values, dtype=float)
        if self.provenance not in PROVENANCES:
            raise ValueError(f"unknown provenance {self.provenance!r}")

    def violations(self, tol=1e-9):
        out = []
        want = 0 if self.parity > 0 else 1
        bad = np.nonzero((self.t - self.x) % 2 != want)[0]
        if bad.size:
            out.append(f"{bad.size} points with (t - x) parity inconsistent with parity {self.parity:+d}")
        # exact early-time values only obey |C| <= 1; the tighter floor holds
        # for the projected and closed-form engines
        floor = -1.0 if self.provenance == "brute" else -1.0 / (self.q**2 - 1)
        bad = np.nonzero((self.values < floor - tol) | (self.values > 1 + tol))[0]
        if bad.size:
            out.append(f"{bad.size} values outside [{floor:.6g}, 1]")
        return out

    def slice(self, t):
        sel = self.t == t
        order = np.argsort(self.x[sel])
        return self.x[sel][order], self.values[sel][order]


def mcs_slice_grid(z, q, t):
    x, v = otoc_mcs_slice(z, q, t)
    return OtocGrid(parity=+1, x=x, t=np.full(x.size, t), values=v, provenance="mcs", q=q,
                    meta={"z": list(map(float, np.atleast_1d(z)))})


def half_height(x, c, level=0.5):
    """First crossing of ``level`` by linear interpolation (x sorted ascending)."""
    above = np.nonzero(c >= level)[0]
    if above.size == 0 or above[0] == 0:
        raise InsufficientPoints("front does not cross half height inside the slice")
    i = above[0]
    x0, x1, c0, c1 = x[i - 1], x[i], c[i - 1], c[i]
    return x0 + (level - c0) * (x1 - x0) / (c1 - c0)


def variance_diffusion(x, c, t):
    """Front centre and D from the mean and variance of the discrete front derivative."""
    w = np.diff(c)
    mid = 0.5 * (x[1:] + x[:-1])
    w = np.clip(w, 0, None)
    if w.sum() <= 0:
        raise InsufficientPoints("flat slice")
    w = w / w.sum()
    mean = float(np.sum(w * mid))
    var = float(np.sum(w * (mid - mean) ** 2))
    return mean / t, var / t


@dataclass(frozen=True)
class FrontFit:
    v_B_hat: float
    D_hat: float
    cov: np.ndarray
    window: tuple
    n_points: int
    residual_rms: float
    converged: bool
    iterations: int
    v_B_var: float | None = None
    D_var: float | None = None
    reference: FrontParams | None = None

    @property
    def v_B_err(self):
        return float(np.sqrt(self.cov[0, 0]))

    @property
    def D_err(self):
        return float(np.sqrt(self.cov[1, 1]))


def _erf_model(x, t, v, D):
    u = (x - v * t) / np.sqrt(2 * D * t)
    f = 0.5 * (1 + erf(u))
    g = np.exp(-u * u) / np.sqrt(np.pi)
    J = np.stack([g * (-t / np.sqrt(2 * D * t)), g * (-u / (2 * D))], axis=1)
    return f, J


def levenberg_erf(x, y, t, v0, D0, weights=None, max_iter=200, tol=1e-13):
    """Damped Gauss-Newton for y ~ 1/2 (1 + erf((x - v t)/sqrt(2 D t))).

    Returns (v, D, cov, rms, converged, iterations).
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = np.ones_like(y) if weights is None else np.asarray(weights, float)
    sw = np.sqrt(w)
    p = np.array([v0, D0], float)
    lam = 1e-3

    def cost(p):
        f, _ = _erf_model(x, t, *p)
        return float(np.sum(w * (y - f) ** 2))

    c = cost(p)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        f, J = _erf_model(x, t, *p)
        r = sw * (y - f)
        Jw = sw[:, None] * J
        A = Jw.T @ Jw
        g = Jw.T @ r
        while True:
            step = np.linalg.solve(A + lam * np.diag(np.diag(A)), g)
            trial = p + step
            if trial[1] > 0:
                ct = cost(trial)
                if ct <= c:
                    break
            lam *= 10
            if lam > 1e16:
                break
        if lam > 1e16:
            converged = c < 1e-20
            break
        small = np.all(np.abs(step) <= tol * (np.abs(p) + tol))
        p, c = trial, ct
        lam = max(lam / 10, 1e-12)
        if small or c == 0:
            converged = True
            break
    f, J = _erf_model(x, t, *p)
    dof = max(x.size - 2, 1)
    rms = float(np.sqrt(np.mean((y - f) ** 2)))
    s2 = float(np.sum(w * (y - f) ** 2)) / dof
    Jw = np.sqrt(w)[:, None] * J
    try:
        cov = s2 * np.linalg.inv(Jw.T @ Jw)
    except np.linalg.LinAlgError:
        cov = np.full((2, 2), np.nan)
    return float(p[0]), float(p[1]), cov, rms, converged, it


def fit_front(grid, t, window_c=3.0, reference=None, min_points=8):
    """Fit the erf front to the fixed-t slice inside |x - x_half| <= window_c sqrt(t)."""
    x, c = grid.slice(t)
    if x.size < min_points:
        raise InsufficientPoints(f"slice t={t} has {x.size} points")
    xh = half_height(x, c)
    half = window_c * np.sqrt(t)
    sel = np.abs(x - xh) <= half
    if sel.sum() < min_points:
        raise InsufficientPoints(f"only {int(sel.sum())} points in the fit window (need {min_points})")
    xs, cs = x[sel], c[sel]
    slope = np.max(np.diff(cs) / np.diff(xs))
    D0 = 1.0 / (2 * np.pi * t * slope**2) if slope > 0 else 0.25
    v, D, cov, rms, ok, it = levenberg_erf(xs, cs, t, xh / t, D0)
    try:
        v_var, D_var = variance_diffusion(x, c, t)
    except InsufficientPoints:
        v_var = D_var = None
    return FrontFit(v_B_hat=v, D_hat=D, cov=cov, window=(xh - half, xh + half),
                    n_points=int(sel.sum()), residual_rms=rms, converged=ok, iterations=it,
                    v_B_var=v_var, D_var=D_var, reference=reference)


SCAN_COLUMNS = ("eps", "z1", "z2", "v_B_hat", "D_hat", "v_B1", "v_B2", "D1", "D2", "flag")


def scan_epsilon(base, w_seed, eps_list, t_fit=256, k_max=12, window_c=3.0, amp_tol=1e-9):
    """One row per perturbation strength: amplitudes, fitted front, analytic predictions.

    Failures are recorded in the row's ``flag`` column instead of aborting the scan.
    """
    q = base.q
    W = random_hermitian(q * q, w_seed)
    rows = []
    for eps in sorted(eps_list):
        row = dict.fromkeys(SCAN_COLUMNS, float("nan"))
        row["eps"] = float(eps)
        row["flag"] = ""
        try:
            U = perturb(base, W, eps)
            amps = compute_amplitudes(U, k_max)
            bad = amps.bound_violations(amp_tol)
            if bad:
                raise AssertionError("; ".join(bad))
            row["z1"], row["z2"] = float(amps.z[0]), float(amps.z[1])
            if row["z1"] < 1e-12:
                row["flag"] = "dual-unitary: no front fit (v_B = 1)"
                rows.append(row)
                continue
            fp = front_params(row["z1"], max(row["z2"], 0.0), q)
            row.update(v_B1=fp.v_B1, v_B2=fp.v_B2, D1=fp.D1, D2=fp.D2)
            fit = fit_front(mcs_slice_grid(amps.z, q, t_fit), t_fit, window_c, reference=fp)
            row["v_B_hat"], row["D_hat"] = fit.v_B_hat, fit.D_hat
            if not fit.converged:
                row["flag"] = "fit did not converge"
        except Exception as exc:  # noqa: BLE001 - a failed row is reported, not fatal
            row["flag"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


EARLY_COLUMNS = ("t", "C", "deviation", "t_over_tau", "tau")


def early_time_report(U, m_max, sigma=None):
    """Exact light-cone OTOC, its deviation from -1/(q^2-1), and t/tau."""
    q = U.q
    series = lightcone_floquet(U, m_max, sigma, sigma)
    z1 = compute_amplitudes(U, 1).z1
    try:
        tau = relaxation_timescale(z1)
    except Undefined:
        tau = float("inf")
    t = np.arange(1, m_max + 1)
    dev = np.abs(series + 1.0 / (q * q - 1))
    return [dict(t=int(ti), C=float(c), deviation=float(d), t_over_tau=float(ti / tau), tau=float(tau))
            for ti, c, d in zip(t, series, dev)]


def crossing_time(t, dev, level):
    """Time after which the deviation stays at or above ``level``, linearly interpolated.

    Using the last upward crossing skips transients at the first few steps.
    """
    t = np.asarray(t, float)
    dev = np.asarray(dev, float)
    if dev[-1] < level:
        raise InsufficientPoints(f"deviation does not settle above {level} within the series")
    below = np.nonzero(dev < level)[0]
    if below.size == 0:
        return float(t[0])
    i = below[-1] + 1
    return float(t[i - 1] + (level - dev[i - 1]) * (t[i] - t[i - 1]) / (dev[i] - dev[i - 1]))


def collapse_gap(curves, lo=0.2, hi=3.0, samples=200):
    """Largest pairwise gap between deviation curves resampled on a common t/tau axis."""
    s = np.linspace(lo, hi, samples)
    res = [np.interp(s, c[0], c[1]) for c in curves]
    gap = 0.0
    for i in range(len(res)):
        for j in range(i + 1, len(res)):
            gap = max(gap, float(np.max(np.abs(res[i] - res[j]))))
    return gap


def screened_du_gates(count, max_subleading=0.95, start_seed=0, max_tries=1000):
    """First ``count`` random qubit dual-unitary gates (by seed) with fast light-cone relaxation."""
    from .brute_force import subleading_lightcone_modulus
    from .gate_core import random_du_gate_q2

    out = []
    for seed in range(start_seed, start_seed + max_tries):
        g = random_du_gate_q2(seed)
        if subleading_lightcone_modulus(g) <= max_subleading:
            out.append((seed, g))
            if len(out) == count:
                return out
    raise InsufficientPoints(f"only {len(out)} gates passed the relaxation screen")
