"""Two-site gates: construction, reshuffling, folding and operator entanglement.

Index convention: a gate on two q-dimensional sites is stored as a q^2 x q^2
matrix with ``U[a*q + b, c*q + d] = U_{ab,cd}``, where ``(a, b)`` are the
(left, right) output indices and ``(c, d)`` the (left, right) input indices.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NonHermitian, NonUnitary

TOL_UNITARY = 1e-10

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True, eq=False)
class Gate:
    q: int
    elements: np.ndarray

    def __post_init__(self):
        self.elements.setflags(write=False)

    @property
    def tensor(self):
        """View with axes (out-left, out-right, in-left, in-right)."""
        q = self.q
        return self.elements.reshape(q, q, q, q)

    def to_json(self):
        return json.dumps({"q": self.q,
                           "re": self.elements.real.tolist(),
                           "im": self.elements.imag.tolist()})

    @classmethod
    def from_json(cls, text, tol=TOL_UNITARY):
        data = json.loads(text)
        mat = np.asarray(data["re"], dtype=float) + 1j * np.asarray(data["im"], dtype=float)
        return make_gate(mat, int(data["q"]), tol=tol)


def _max_dev(a, b):
    return float(np.max(np.abs(a - b)))


def unitarity_deviation(mat):
    mat = np.asarray(mat)
    return _max_dev(mat.conj().T @ mat, np.eye(mat.shape[0]))


def make_gate(elements, q=None, tol=TOL_UNITARY):
    mat = np.array(elements, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionMismatch(f"gate must be a square matrix, got shape {mat.shape}")
    if q is None:
        q = int(round(np.sqrt(mat.shape[0])))
    if q < 2 or q * q != mat.shape[0]:
        raise DimensionMismatch(f"matrix dimension {mat.shape[0]} is not q^2 for q={q}")
    dev = unitarity_deviation(mat)
    if dev > tol:
        raise NonUnitary(dev)
    return Gate(q=int(q), elements=mat)


def _as_matrix(U):
    if isinstance(U, Gate):
        return U.elements, U.q
    mat = np.asarray(U, dtype=complex)
    return mat, int(round(np.sqrt(mat.shape[0])))


def dual_gate(U):
    """Space-time reshuffle: dual[ab, cd] = U[db, ca]."""
    mat, q = _as_matrix(U)
    u = mat.reshape(q, q, q, q)
    return np.einsum("dbca->abcd", u).reshape(q * q, q * q)


def is_dual_unitary(U, tol=1e-10):
    return unitarity_deviation(dual_gate(U)) <= tol


def expm_hermitian(H, coeff):
    """exp(coeff * H) for Hermitian H and scalar coeff, via eigendecomposition."""
    w, v = np.linalg.eigh(H)
    return (v * np.exp(coeff * w)) @ v.conj().T


def du_gate_q2(J, u1=None, u2=None, v1=None, v2=None):
    """Qubit dual-unitary gate (u1 x u2) exp[-i(pi/4 XX + pi/4 YY + J ZZ)] (v1 x v2)."""
    eye = np.eye(2, dtype=complex)
    u1, u2, v1, v2 = (eye if g is None else np.asarray(g, dtype=complex)
                      for g in (u1, u2, v1, v2))
    H = (np.pi / 4) * (np.kron(PAULI_X, PAULI_X) + np.kron(PAULI_Y, PAULI_Y)) \
        + J * np.kron(PAULI_Z, PAULI_Z)
    core = expm_hermitian(H, -1j)
    return make_gate(np.kron(u1, u2) @ core @ np.kron(v1, v2), 2)


def haar_unitary(dim, seed):
    """Haar-distributed unitary from the QR decomposition of a Ginibre matrix."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
    qm, r = np.linalg.qr(z)
    d = np.diag(r)
    return qm * (d / np.abs(d))


def random_du_gate_q2(seed):
    """Random member of the qubit dual-unitary family (generically maximally chaotic)."""
    rng = np.random.default_rng(seed)
    J = rng.uniform(0, np.pi / 2)
    us = [haar_unitary(2, rng) for _ in range(4)]
    return du_gate_q2(J, *us)


def random_hermitian(dim, seed):
    """GUE matrix rescaled to unit spectral norm."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = (a + a.conj().T) / 2
    return h / np.linalg.norm(h, 2)


def perturb(V, W, eps, tol=1e-10):
    """U = V exp(i eps W)."""
    mat, q = _as_matrix(V)
    W = np.asarray(W, dtype=complex)
    if W.shape != mat.shape:
        raise DimensionMismatch(f"perturbation shape {W.shape} does not match gate {mat.shape}")
    if _max_dev(W, W.conj().T) > tol:
        raise NonHermitian("perturbation generator must be Hermitian")
    if eps == 0:
        return make_gate(mat.copy(), q)
    return make_gate(mat @ expm_hermitian(W, 1j * eps), q)


def dress(U, a, b, c, d):
    """(a x b) U (c x d) for one-site unitaries a, b, c, d."""
    mat, q = _as_matrix(U)
    return make_gate(np.kron(a, b) @ mat @ np.kron(c, d), q)


@dataclass(frozen=True)
class SchmidtSpectrum:
    sigma: np.ndarray
    E_lin: float


def schmidt_spectrum(U):
    """Operator-Schmidt coefficients sigma_j (sum = q^2) and linear operator entanglement."""
    mat, q = _as_matrix(U)
    # group (out-left, in-left) x (out-right, in-right)
    r = np.einsum("abcd->acbd", mat.reshape(q, q, q, q)).reshape(q * q, q * q)
    s = np.linalg.svd(r, compute_uv=False)
    sigma = np.sort(s**2)[::-1]
    e_lin = 1.0 - float(np.sum(sigma**2)) / q**4
    return SchmidtSpectrum(sigma=sigma, E_lin=e_lin)


def fold(U):
    """Folded gate (U x U* x U x U*) with legs (out-left, out-right, in-left, in-right).

    Each leg is a composite index of dimension q^4 over the copies
    (fwd, conj, fwd, conj), the first copy being the slowest index.
    """
    mat, q = _as_matrix(U)
    u = mat.reshape(q, q, q, q)
    uc = u.conj()
    f = np.einsum("abcd,efgh,ijkl,mnop->aeimbfjncgkodhlp", u, uc, u, uc, optimize=True)
    q4 = q**4
    return f.reshape(q4, q4, q4, q4)


def operator_basis(q):
    """Traceless one-site operators normalised as tr(s^dag s) = q.

    Pauli matrices for q = 2, clock-and-shift (Weyl) operators otherwise.
    """
    if q == 2:
        return [PAULI_X, PAULI_Y, PAULI_Z]
    omega = np.exp(2j * np.pi / q)
    shift = np.roll(np.eye(q), 1, axis=0)
    clock = np.diag(omega ** np.arange(q))
    ops = []
    for a in range(q):
        for b in range(q):
            if a == 0 and b == 0:
                continue
            ops.append(np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b))
    return ops
