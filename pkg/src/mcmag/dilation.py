"""Extension of the three-outcome qubit measurement to a projective one.

A rank-one triple Pi_0 = |p0><p0|, Pi_1 = |p1><p1|, Pi_? = |p?><p?|
summing to the qubit identity embeds into a three-level system (the
sensor's spare level serves as the ancilla): append an ancilla amplitude
c_k to each |p_k> so the extended vectors |e_k> = |p_k> + c_k |2> become
orthonormal, then the unitary U whose rows are <e_k| maps the
measurement onto projections along the computational levels, with the
inconclusive outcome read out on the ancilla level.  The row order is
(detector 0, detector 1, inconclusive), so

    Tr(rho_j Pi_k) = <e_k| (rho_j ⊕ 0) |e_k> = <k| U (rho_j ⊕ 0) U† |k>.

The ancilla column is the unique (up to phase) unit vector completing
the two orthonormal columns that measurement completeness provides; it
is computed as a conjugated cross product, which keeps U unitary to
machine precision even when one operator carries almost all the weight.
Its phase is fixed so the first non-negligible c_k (in outcome order
0, 1, ?) is real and >= 0; when c_0 > 0 this reproduces

    c_0 = (1 - <p0|p0>)^(1/2),   c_k = -<p0|p_k> / c_0.

Any three-level unitary further factors into at most three two-level
unitaries, each acting on one pair of levels.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qmat
from .discrim import Povm
from .errors import DilationRankError, DomainError

_RANK_TOL = 1e-10
_ZERO_WEIGHT = 1e-14
_PIN_TOL = 1e-8


@dataclass(frozen=True)
class Dilation:
    """Projective realization of a rank-one three-outcome measurement.

    ``u`` is the 3x3 unitary; row k is the bra of the extended vector
    ``e_vectors[k]``; ``pi_vectors[k]`` is the (weighted) measurement
    vector |p_k>.  Outcome order everywhere: detector 0, detector 1,
    inconclusive.  ``c0`` is real and >= 0 by the phase convention.
    """

    u: np.ndarray
    c0: complex
    c1: complex
    c2: complex
    e_vectors: np.ndarray
    pi_vectors: np.ndarray


def measurement_vector(op: np.ndarray) -> np.ndarray:
    """Weighted vector |p> with op = |p><p|; zero vector for a zero operator."""
    eigvals, eigvecs = qmat.herm_eig2(op)
    top = max(eigvals[1], 0.0)
    if eigvals[0] > _RANK_TOL * max(1.0, top):
        raise DilationRankError(
            f"operator has second eigenvalue {eigvals[0]:.3e}; rank-one required"
        )
    if top <= _ZERO_WEIGHT:
        return np.zeros(2, dtype=complex)
    return np.sqrt(top) * qmat.pin_phase(eigvecs[:, 1])


def dilate_povm(povm: Povm) -> Dilation:
    """Build the three-level unitary realizing a rank-one measurement triple."""
    total = povm.pi0 + povm.pi1 + povm.pi_inc
    if float(np.max(np.abs(total - np.eye(2)))) > 1e-9:
        raise DomainError("measurement operators do not sum to the identity")

    pis = np.zeros((3, 2), dtype=complex)
    for k, op in enumerate(povm.operators()):
        pis[k] = measurement_vector(op)

    # Columns of U over the computational levels: U[k, j] = <p_k| j >.
    b = pis.conj()
    col0 = b[:, 0]
    col1 = b[:, 1]
    anc = np.conj(np.cross(col0, col1))
    anc = anc / np.linalg.norm(anc)

    # c_k = conj(U[k, 2]); pin the first non-negligible coefficient real >= 0.
    c = np.conj(anc)
    for k in range(3):
        if abs(c[k]) > _PIN_TOL:
            phase = c[k].conjugate() / abs(c[k])
            c = c * phase
            c[k] = abs(c[k])
            break
    anc = np.conj(c)

    u = np.column_stack([col0, col1, anc])
    e_vectors = np.column_stack([pis, c])
    return Dilation(
        u=u, c0=c[0], c1=c[1], c2=c[2], e_vectors=e_vectors, pi_vectors=pis
    )


def born_residual(dilation: Dilation, povm: Povm, states) -> float:
    """Largest deviation between Tr(rho Pi_k) and the projective readout."""
    worst = 0.0
    for rho in states:
        ext = np.zeros((3, 3), dtype=complex)
        ext[:2, :2] = rho
        for k, op in enumerate(povm.operators()):
            direct = float(np.trace(rho @ op).real)
            e = dilation.e_vectors[k]
            via_u = float(np.vdot(e, ext @ e).real)
            worst = max(worst, abs(direct - via_u))
    return worst


def _two_level(block: np.ndarray, rows: tuple[int, int]) -> np.ndarray:
    out = np.eye(3, dtype=complex)
    i, j = rows
    out[i, i] = block[0, 0]
    out[i, j] = block[0, 1]
    out[j, i] = block[1, 0]
    out[j, j] = block[1, 1]
    return out


def decompose_two_level(u: np.ndarray, tol: float = 1e-10) -> list[np.ndarray]:
    """Factor a 3x3 unitary into at most three two-level unitaries.

    The ordered product of the returned factors reconstructs ``u``; each
    factor differs from the identity on exactly one pair of levels, and
    factors within ``tol`` of the identity are dropped (so the identity
    yields an empty list and a block-diagonal input a single factor).
    """
    u = np.asarray(u, dtype=complex)
    if u.shape != (3, 3):
        raise DomainError("expected a 3x3 matrix")
    if float(np.max(np.abs(u.conj().T @ u - np.eye(3)))) > tol:
        raise DomainError("input is not unitary within tolerance")

    # Right-multiply by two-level rotations clearing the bottom row; what
    # remains is a single 2x2 block on levels (0, 1).
    work = u.copy()
    right_ops: list[np.ndarray] = []
    for j, rows in ((0, (0, 2)), (1, (1, 2))):
        s = work[2, j]
        t = work[2, 2]
        n = np.hypot(abs(s), abs(t))
        if n == 0.0:
            continue
        block = np.array([[t / n, np.conj(s) / n], [-s / n, np.conj(t) / n]])
        k = _two_level(block, rows)
        work = work @ k
        right_ops.append(k)
    final = work  # block-diagonal: 2x2 on (0,1) plus a unit entry

    factors = [final]
    for k in reversed(right_ops):
        factors.append(k.conj().T)
    return [f for f in factors if float(np.max(np.abs(f - np.eye(3)))) > tol]
