"""Scattering amplitudes B_k and z_k of a two-site gate.

B_k is computed by iterating a trace-preserving channel on two-site operators
k times, starting from the identity, and taking the expectation value in the
Bell state |phi> = q^{-1/2} sum_j |jj>.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import Undefined
from .gate_core import Gate, dress, haar_unitary


def kraus_operators(U):
    """Kraus operators E[k, k'] (q^2 x q^2 each) of the B_k transfer channel.

    E_{kk'}^{aa', bb'} = q^{-1/2} sum_f U_{ka, bf} (U^dag)_{b'f, k'a'}
    """
    mat = U.elements if isinstance(U, Gate) else np.asarray(U, dtype=complex)
    q = int(round(np.sqrt(mat.shape[0])))
    u = mat.reshape(q, q, q, q)
    ud = mat.conj().T.reshape(q, q, q, q)
    E = np.einsum("kabf,cflx->klaxbc", u, ud) / np.sqrt(q)
    return E.reshape(q, q, q * q, q * q)


def bk_channel_apply(U, rho, kraus=None):
    E = kraus_operators(U) if kraus is None else kraus
    rho = np.asarray(rho, dtype=complex)
    return np.einsum("klab,bc,kldc->ad", E, rho, E.conj(), optimize=True)


def bell_state(q):
    return np.eye(q).reshape(-1) / np.sqrt(q)


@dataclass(frozen=True)
class ScatteringAmplitudes:
    q: int
    B: np.ndarray
    z: np.ndarray

    @property
    def k_max(self):
        return len(self.B)

    @property
    def z1(self):
        return float(self.z[0])

    @classmethod
    def from_B(cls, B, q):
        B = np.asarray(B, dtype=float)
        z = np.diff(np.concatenate([[1.0], B])) / (q * q - 1)
        return cls(q=q, B=B, z=z)

    @classmethod
    def from_z(cls, z, q):
        z = np.asarray(z, dtype=float)
        B = 1.0 + (q * q - 1) * np.cumsum(z)
        return cls(q=q, B=B, z=z)

    def to_json(self):
        return json.dumps({"q": self.q, "B": self.B.tolist(), "z": self.z.tolist()})

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(q=int(d["q"]), B=np.asarray(d["B"], float), z=np.asarray(d["z"], float))

    def bound_violations(self, tol=1e-9):
        """Violations of 1 <= B_k <= q^2, monotonicity and z_k >= 0."""
        q2 = self.q**2
        out = []
        B_prev = 1.0
        for k, (b, zk) in enumerate(zip(self.B, self.z), start=1):
            if b < 1 - tol or b > q2 + tol:
                out.append(f"B_{k} = {b:.12g} outside [1, q^2]")
            if b < B_prev - tol:
                out.append(f"B_{k} < B_{k - 1}")
            if zk < -tol:
                out.append(f"z_{k} = {zk:.12g} is negative")
            B_prev = b
        return out

    def lower_bound_violations(self, tol=1e-9):
        """k values with B_k below q^2 - (q^2-1)(1-z_1)^k (reported, not an invariant)."""
        return [k for k, b in enumerate(self.B, start=1)
                if b < bk_lower_bound(self.B[0], self.q, k) - tol]

    def z_bound_violations(self, tol=1e-9):
        """k values with z_k above (1-z_1)^(k-1) (reported, not an invariant).

        This bound follows from the lower bound on B_k and fails with it.
        """
        z1 = self.z1
        return [k for k, zk in enumerate(self.z, start=1) if zk > (1 - z1) ** (k - 1) + tol]


def compute_amplitudes(U, k_max=12, gates=None):
    """B_1..B_k_max for gate U.

    ``gates`` optionally supplies a distinct gate per diagonal step (used for
    disorder averages); its length must be at least k_max.
    """
    if gates is None:
        gates = [U] * k_max
    q = gates[0].q
    phi = bell_state(q)
    rho = np.eye(q * q, dtype=complex)
    cache = {}
    B = np.empty(k_max)
    for k in range(k_max):
        g = gates[k]
        if id(g) not in cache:
            cache[id(g)] = kraus_operators(g)
        rho = bk_channel_apply(g, rho, kraus=cache[id(g)])
        B[k] = float(np.real(phi.conj() @ rho @ phi))
    return ScatteringAmplitudes.from_B(B, q)


def z1_from_entanglement(E_lin, q):
    q2 = q * q
    if E_lin < -1e-12 or E_lin > 1 - 1 / q2 + 1e-12:
        raise ValueError(f"linear operator entanglement {E_lin} outside [0, 1 - 1/q^2]")
    return 1.0 - q2 * E_lin / (q2 - 1)


def bk_lower_bound(B1, q, k):
    q2 = q * q
    return q2 - (q2 - 1) * (1 - (B1 - 1) / (q2 - 1)) ** k


def haar_averaged_zk(z1, k):
    if not 0 <= z1 <= 1:
        raise ValueError("z1 must lie in [0, 1]")
    return z1 * (1 - z1) ** (k - 1)


def relaxation_timescale(z1):
    if not 0 < z1 < 1:
        raise Undefined(f"relaxation timescale needs 0 < z1 < 1, got {z1}")
    return -1.0 / np.log1p(-z1)


def haar_dressed_amplitudes(U, k_max, rng):
    """Amplitudes with independent Haar one-site unitaries around every gate."""
    q = U.q
    gates = [dress(U, *(haar_unitary(q, rng) for _ in range(4))) for _ in range(k_max)]
    return compute_amplitudes(U, k_max, gates=gates)


def haar_average_z(U, k_max, samples, seed=0):
    """Monte Carlo mean and standard error of z_k over Haar dressings."""
    rng = np.random.default_rng(seed)
    zs = np.array([haar_dressed_amplitudes(U, k_max, rng).z for _ in range(samples)])
    return zs.mean(axis=0), zs.std(axis=0, ddof=1) / np.sqrt(samples)
