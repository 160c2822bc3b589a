"""OTOC from the column transfer matrix projected onto the maximally chaotic subspace.

Basis vectors |k> (k = 0..n) of the subspace are the orthonormalised products
of n circle/square pairings; in that basis the projected transfer matrix is
upper triangular and fixed by the amplitudes z_1..z_n.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .amplitudes import ScatteringAmplitudes
from .brute_force import MAX_FOLDED_DIM, circle, kron_all, square
from .errors import InsufficientAmplitudes, OutOfBudget
from .gate_core import Gate


def _z_array(z):
    if isinstance(z, ScatteringAmplitudes):
        return np.asarray(z.z, dtype=float)
    return np.atleast_1d(np.asarray(z, dtype=float))


@dataclass(frozen=True)
class McsTransferMatrix:
    n: int
    q: int
    z: np.ndarray
    M: np.ndarray

    def eigenvalue_multiplicities(self, tol=1e-8):
        """Counts of Schur eigenvalues within ``tol`` of 1 and of 1 - z_1."""
        tri = scipy.linalg.schur(self.M, output="real")[0]
        ev = np.diag(tri)
        z1 = self.z[0] if self.z.size else 0.0
        return int(np.sum(np.abs(ev - 1) <= tol)), int(np.sum(np.abs(ev - (1 - z1)) <= tol))

    def check_structure(self):
        """Raise AssertionError if the matrix violates its structural invariants."""
        M, n = self.M, self.n
        assert np.all(np.tril(M, -1) == 0), "entries below the diagonal must vanish exactly"
        assert M[0, 0] == 1.0
        z1 = self.z[0] if self.z.size else 0.0
        assert np.allclose(np.diag(M)[1:], 1 - z1, rtol=0, atol=1e-15)
        for d in range(1, n):
            diag = np.diag(M, d)[1:]
            assert np.allclose(diag, diag[0] if diag.size else 0, rtol=1e-14, atol=1e-300)
        if n >= 1 and z1 > 1e-8:
            one, other = self.eigenvalue_multiplicities()
            assert (one, other) == (1, n), f"eigenvalue multiplicities {(one, other)} != (1, {n})"


def projected_transfer(z, n, q, pad=False):
    """Projected column transfer matrix for light-cone width n.

    Amplitudes beyond those supplied are treated as zero when ``pad`` is set;
    otherwise at least n of them are required.
    """
    zs = _z_array(z)
    if zs.size < n and not pad:
        raise InsufficientAmplitudes(f"need z_1..z_{n}, got {zs.size}")
    zk = np.zeros(n + 2)
    k = min(zs.size, n + 1)
    zk[1:k + 1] = zs[:k]
    q2 = float(q * q)
    d = np.arange(n + 1)
    with np.errstate(under="ignore"):
        scale = float(q) ** -d.astype(float)
    # value on the d-th superdiagonal below row 0; d = 0 gives the diagonal 1 - z_1
    band = np.empty(n + 1)
    band[0] = 1.0 - zk[1]
    band[1:] = (q2 * zk[1:n + 1] - zk[2:n + 2]) * scale[1:]
    idx = d[None, :] - d[:, None]
    M = np.where(idx >= 0, band[np.clip(idx, 0, n)], 0.0)
    M[0, 0] = 1.0
    M[0, 1:] = np.sqrt(q2 - 1) * zk[1:n + 1] * float(q) * scale[1:]
    T = McsTransferMatrix(n=n, q=q, z=zk[1:n + 1].copy() if n else zk[1:2].copy(), M=M)
    T.check_structure()
    return T


def mcs_basis_vector(n, k, q, max_dim=MAX_FOLDED_DIM):
    """Orthonormal basis vector |n, k-bar> in the q^{4n}-dimensional folded space."""
    if q ** (4 * n) > max_dim:
        raise OutOfBudget(f"q^(4n) = {q ** (4 * n)} exceeds budget {max_dim}")

    def raw(j):
        return q ** (-n) * kron_all([circle(q)] * j + [square(q)] * (n - j))

    if k == 0:
        return raw(0)
    return (q * raw(k) - raw(k - 1)) / np.sqrt(q * q - 1)


def lightcone_channel(U, sigma):
    """M_+(sigma) = q^{-1} tr_left[U (sigma x 1) U^dag]."""
    mat = U.elements if isinstance(U, Gate) else np.asarray(U, dtype=complex)
    q = int(round(np.sqrt(mat.shape[0])))
    full = mat @ np.kron(sigma, np.eye(q)) @ mat.conj().T
    return np.einsum("abad->bd", full.reshape(q, q, q, q)) / q


def lightcone_weights(U, sigma, n_max):
    """M_j(sigma) = tr[X_j X_j] / q with X_j = M_+^j(sigma), j = 0..n_max.

    The product is taken without a dagger, matching the operator insertions of
    the OTOC; for Hermitian sigma this equals tr[X_j^dag X_j] / q.
    """
    sigma = np.asarray(sigma, dtype=complex)
    q = sigma.shape[0]
    out = np.empty(n_max + 1)
    x = sigma
    for j in range(n_max + 1):
        out[j] = float(np.real(np.trace(x @ x))) / q
        x = lightcone_channel(U, x)
    return out


@dataclass(frozen=True)
class McsBoundary:
    left: np.ndarray
    right_plus: np.ndarray
    right_minus: np.ndarray | None
    sigma_beta: np.ndarray | None = None


def boundaries(n, q, sigma_alpha=None, sigma_beta=None, U=None):
    """Boundary vectors in the orthonormal subspace basis.

    right_minus needs both sigma_beta and the gate U (it depends on the
    light-cone channel); it is None otherwise.
    """
    for s in (sigma_alpha, sigma_beta):
        if s is not None and abs(np.trace(s)) > 1e-10:
            raise ValueError("boundary operators must be traceless")
    root = np.sqrt(q * q - 1)
    left = np.zeros(n + 1)
    left[0] = q ** (-n / 2)
    if n >= 1:
        left[1] = -q ** (-n / 2) / root
    right_plus = np.zeros(n + 1)
    right_plus[n] = q ** (1 - n / 2) / root
    right_minus = None
    if sigma_beta is not None and U is not None:
        w = lightcone_weights(U, sigma_beta, n + 1)
        right_minus = np.empty(n + 1)
        right_minus[0] = q ** (n / 2) * w[n]
        for k in range(1, n + 1):
            right_minus[k] = q ** (n / 2 + 1 - k) / root * (w[n - k] - w[n - k + 1])
    return McsBoundary(left=left, right_plus=right_plus, right_minus=right_minus,
                       sigma_beta=sigma_beta)


def otoc_mcs(T, b, m, parity=+1):
    """left . T^m . right (parity +) or left . T^(m-1) . right_minus (parity -)."""
    if parity > 0:
        v, steps = b.right_plus.copy(), m
    else:
        if b.right_minus is None:
            raise ValueError("odd-parity OTOC needs right_minus boundary")
        v, steps = b.right_minus.copy(), m - 1
    M = T.M
    for _ in range(steps):
        v = M @ v
    return float(b.left @ v)


def otoc_mcs_nm(z, q, n, m, parity=+1, U=None, sigma_beta=None):
    """Convenience wrapper: build matrix and boundaries for one (n, m) point."""
    T = projected_transfer(z, n, q, pad=True)
    b = boundaries(n, q, sigma_beta=sigma_beta, U=U)
    return otoc_mcs(T, b, m, parity)


def otoc_mcs_grid(z, q, t, xs):
    """Even-parity OTOC on a fixed-time slice, one projected matrix per light-cone width."""
    out = np.empty(len(xs))
    for i, x in enumerate(xs):
        if (t - x) % 2:
            raise ValueError("grid points must satisfy (t - x) even")
        if x > t:
            out[i] = 1.0
            continue
        n, m = (t - x + 2) // 2, (t + x) // 2
        out[i] = otoc_mcs_nm(z, q, n, m) if m >= 1 else 1.0
    return out


def otoc_mcs_slice(z, q, t):
    """Even-parity OTOC at all x on the time slice t (x = t+2-2n, n = 1..t).

    The projected matrix for width n is the leading (n+1) x (n+1) block of the
    matrix for any larger width, so one sweep of row-vector products serves
    every n.  Returns (x, values) ordered by increasing x.
    """
    if t < 1:
        raise ValueError("time slice needs t >= 1")
    zs = _z_array(z)
    K = min(zs.size, t)
    zk = np.zeros(K + 2)
    zk[1:K + 1] = zs[:K]
    q2 = float(q * q)
    root = np.sqrt(q2 - 1)
    # diag(q^k) T diag(q^-k): the d-th superdiagonal picks up q^-d, keeping
    # entries bounded; only the first K superdiagonals are nonzero
    d = np.arange(1, K + 1)
    band = (q2 * zk[1:K + 1] - zk[2:K + 2]) * q2 ** -d.astype(float)
    S = scipy.sparse.diags([np.full(t + 1, 1.0 - zk[1])]
                           + [np.full(t + 1 - j, band[j - 1]) for j in d],
                           [0] + list(d), format="lil")
    S[0, 0] = 1.0
    S[0, 1:K + 1] = root * zk[1:K + 1] * q * q2 ** -d.astype(float)
    ST = S.T.tocsr()
    rows = np.zeros((2, t + 1))
    rows[0, 0] = 1.0
    rows[1, 1] = 1.0
    ns = np.arange(1, t + 1)
    vals = np.empty(t)
    for m in range(1, t + 1):
        rows = (ST @ rows.T).T
        n = t + 1 - m
        vals[n - 1] = q / root * (rows[0, n] - rows[1, n] / (q * root))
    xs = t + 2 - 2 * ns
    return xs[::-1], vals[::-1]
