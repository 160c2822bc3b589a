"""Exact contraction of the folded OTOC network for small light-cone width.

The OTOC network in light-cone coordinates is an n x m array of folded gates.
It is contracted column by column: a column of n gates maps a vector on its n
right legs (dimension q^{4n}) to a vector on its n left legs.  Within a column,
gate a's input-left leg is fed by gate a+1's output-right leg; the bottom gate
sees a "square" pairing (or the sigma_beta insertion for odd parity) and the
top gate's output-right leg is closed with a "circle" pairing.

Pairings act on the four copies (fwd, conj, fwd, conj) of one leg:
circle joins copies (1,2)(3,4), square joins (1,4)(2,3).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import DimensionMismatch, OutOfBudget
from .gate_core import Gate, fold

MAX_FOLDED_DIM = 2**20


def circle(q):
    e = np.eye(q)
    return np.einsum("ab,cd->abcd", e, e).reshape(-1).astype(complex)


def square(q):
    e = np.eye(q)
    return np.einsum("ad,bc->abcd", e, e).reshape(-1).astype(complex)


def filled_circle(sigma):
    """Operator insertion on output legs: sigma[c2, c1] sigma[c4, c3]."""
    s = np.asarray(sigma, dtype=complex)
    return np.einsum("ba,dc->abcd", s, s).reshape(-1)


def filled_square(sigma):
    """Operator insertion on input legs: sigma[c1, c4] sigma[c3, c2]."""
    s = np.asarray(sigma, dtype=complex)
    return np.einsum("ad,cb->abcd", s, s).reshape(-1)


def kron_all(vectors):
    return reduce(np.kron, vectors)


def coords_from_xt(x, t):
    """Spacetime point -> (n, m, parity) light-cone coordinates."""
    if (t - x) % 2 == 0:
        return (t - x + 2) // 2, (t + x) // 2, +1
    return (t - x + 1) // 2, (t + x + 1) // 2, -1


def xt_from_coords(n, m, parity):
    if parity > 0:
        return m - n + 1, n + m - 1
    return m - n, n + m - 1


def _check_budget(n, q, max_dim):
    if q ** (4 * n) > max_dim:
        raise OutOfBudget(f"folded dimension q^(4n) = {q ** (4 * n)} exceeds budget {max_dim}")


@dataclass
class FoldedColumnOperator:
    """Matrix-free column transfer matrix T_n for a single gate."""

    gate: Gate
    n: int
    max_dim: int = MAX_FOLDED_DIM
    folded: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        _check_budget(self.n, self.gate.q, self.max_dim)
        self.folded = fold(self.gate)

    @property
    def q(self):
        return self.gate.q

    @property
    def dim(self):
        return self.q ** (4 * self.n)

    def __matmul__(self, v):
        return apply_column(self, v)


def apply_column(op, v, bottom=None):
    """T_n v, contracting the n folded gates from the bottom of the column up."""
    q, n = op.q, op.n
    q4 = q**4
    v = np.asarray(v, dtype=complex)
    if v.size != q4**n:
        raise DimensionMismatch(f"vector of size {v.size} does not match q^(4n) = {q4**n}")
    carry = square(q) if bottom is None else np.asarray(bottom, dtype=complex)
    x = np.multiply.outer(v.reshape((q4,) * n), carry)
    f = op.folded
    for a in reversed(range(n)):
        x = np.tensordot(f, x, axes=([2, 3], [n, a]))
        x = np.moveaxis(x, [0, 1], [a, n])
    x = np.tensordot(x, circle(q), axes=([n], [0]))
    return x.reshape(-1) / q


def dense_column(op):
    """Assemble T_n as a dense matrix (small n only)."""
    eye = np.eye(op.dim, dtype=complex)
    return np.stack([apply_column(op, eye[:, j]) for j in range(op.dim)], axis=1)


def left_boundary(n, q, sigma_alpha):
    return q ** (-n / 2) * kron_all([filled_circle(sigma_alpha)] + [circle(q)] * (n - 1))


def right_boundary_plus(n, q, sigma_beta):
    return q ** (-n / 2) * kron_all([square(q)] * (n - 1) + [filled_square(sigma_beta)])


def right_boundary_minus(op, sigma_beta):
    """One column whose bottom gate carries sigma_beta on its input-left leg."""
    q, n = op.q, op.n
    base = q ** (-n / 2) * kron_all([square(q)] * n)
    return apply_column(op, base, bottom=filled_square(sigma_beta))


@dataclass(frozen=True)
class CircuitColumnSpec:
    """Gate assignment along the m direction.

    ``pattern`` is a tuple of gates cycled over columns 1..m (column 1 next to
    the left boundary).  ``tail`` gates are appended after the m pattern
    columns, next to the right boundary.
    """

    pattern: tuple
    tail: tuple = ()

    @classmethod
    def floquet(cls, gate):
        return cls(pattern=(gate,))

    @classmethod
    def dilute_defect(cls, du_gate, defect_gate, width):
        """``width`` dual-unitary columns before each defect column, and after the last."""
        return cls(pattern=(du_gate,) * width + (defect_gate,), tail=(du_gate,) * width)

    @property
    def q(self):
        return self.pattern[0].q

    def columns(self, count):
        cols = [self.pattern[i % len(self.pattern)] for i in range(count)]
        return cols + list(self.tail)


def otoc_exact(spec, sigma_alpha, sigma_beta, n, m, parity=+1, max_dim=MAX_FOLDED_DIM,
               repeats=None):
    """OTOC by full contraction of the folded network.

    For a dilute-defect spec, pass ``repeats`` = number of pattern periods; the
    network then has ``repeats * len(pattern) + len(tail)`` columns.
    """
    if isinstance(spec, Gate):
        spec = CircuitColumnSpec.floquet(spec)
    q = spec.q
    _check_budget(n, q, max_dim)
    count = m if repeats is None else repeats * len(spec.pattern)
    cols = spec.columns(count)
    ops = {}

    def op_for(g):
        if id(g) not in ops:
            ops[id(g)] = FoldedColumnOperator(g, n, max_dim)
        return ops[id(g)]

    if parity > 0:
        v = right_boundary_plus(n, q, sigma_beta)
    else:
        v = right_boundary_minus(op_for(cols[-1]), sigma_beta)
        cols = cols[:-1]
    for g in reversed(cols):
        v = apply_column(op_for(g), v)
    val = np.dot(left_boundary(n, q, sigma_alpha), v)
    if abs(val.imag) > 1e-10:
        raise ArithmeticError(f"OTOC acquired an imaginary part {val.imag:.3e}")
    return float(val.real)


def lightcone_floquet(gate, m_max, sigma_alpha=None, sigma_beta=None):
    """Exact C+(t, t) = C+(n=1, m=t) for m = 1..m_max on the full q^4 column space."""
    from .gate_core import operator_basis

    q = gate.q
    sa = operator_basis(q)[-1] if sigma_alpha is None else sigma_alpha
    sb = operator_basis(q)[-1] if sigma_beta is None else sigma_beta
    T = dense_column(FoldedColumnOperator(gate, 1))
    left = left_boundary(1, q, sa)
    v = right_boundary_plus(1, q, sb)
    out = np.empty(m_max)
    for i in range(m_max):
        v = T @ v
        out[i] = np.dot(left, v).real
    return out


def otoc_statevector(gate, sigma_alpha, sigma_beta, x, t):
    """Direct Heisenberg-picture OTOC on a chain of 2t + 2 sites (tiny t only).

    The layer applied first to sigma_alpha (time t) pairs sites (0, 1); layers
    alternate parity going back in time.
    """
    U = gate.elements if isinstance(gate, Gate) else np.asarray(gate)
    q = int(round(np.sqrt(U.shape[0])))
    lo, hi = -t, t + 1
    L = hi - lo + 1
    if not lo <= x <= hi:
        raise ValueError("sigma_beta outside the simulated chain")

    def site_op(op, y):
        mats = [np.eye(q)] * L
        mats[y - lo] = op
        return kron_all(mats)

    def layer(s):
        start = (t - s) % 2
        first = lo + ((start - lo) % 2)
        mats, y = [], lo
        while y <= hi:
            if y >= first and (y - first) % 2 == 0 and y + 1 <= hi:
                mats.append(U)
                y += 2
            else:
                mats.append(np.eye(q))
                y += 1
        return kron_all(mats)

    A = site_op(sigma_alpha, 0).astype(complex)
    for s in range(t, 0, -1):
        W = layer(s)
        A = W.conj().T @ A @ W
    B = site_op(sigma_beta, x)
    return float(np.real(np.trace(A @ B @ A @ B)) / q**L)


def subleading_lightcone_modulus(gate):
    """Largest |eigenvalue| of the n = 1 column operator below the unit eigenvalues.

    For a dual-unitary gate this sets how fast the light-cone OTOC settles to
    its long-time value; values near 1 flag nearly non-chaotic (SWAP-like) gates.
    """
    ev = np.abs(np.linalg.eigvals(dense_column(FoldedColumnOperator(gate, 1))))
    rest = ev[ev < 1 - 1e-9]
    return float(rest.max()) if rest.size else 0.0
