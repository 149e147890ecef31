"""Dense complex linear algebra for 2x2 (and small fixed-size) operators.

Everything the rest of the package needs from linear algebra lives here:
a closed-form Hermitian eigensolver, spectral powers restricted to the
positive support, and the trace norm.  The closed forms are exact and
fully deterministic -- repeated calls on identical input return
bitwise-identical output, which the sweep tooling relies on.

Matrices are plain ``numpy`` arrays of ``complex128``; no wrapper types.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import HermiticityError, PsdViolationError

HERM_TOL = 1e-12
SUPPORT_CUTOFF = 1e-12  # relative to the largest eigenvalue
PSD_TOL = 1e-12
_PHASE_TOL = 1e-12


class EigPair2(NamedTuple):
    """Eigendecomposition of a 2x2 Hermitian matrix.

    ``eigvals`` is real and ascending; column ``i`` of ``eigvecs`` is the
    unit eigenvector of ``eigvals[i]``.  The two columns are exactly
    orthonormal by construction, and each has its first non-negligible
    component real and >= 0 (fixed phase convention).
    """

    eigvals: np.ndarray
    eigvecs: np.ndarray


def require_hermitian(m: np.ndarray, tol: float = HERM_TOL) -> np.ndarray:
    """Return ``m`` as a complex array, raising if it is not Hermitian."""
    m = np.asarray(m, dtype=complex)
    dev = np.max(np.abs(m - m.conj().T))
    if dev > tol * max(1.0, float(np.max(np.abs(m)))):
        raise HermiticityError(f"matrix deviates from Hermiticity by {dev:.3e}")
    return m


def pin_phase(vec: np.ndarray, tol: float = _PHASE_TOL) -> np.ndarray:
    """Rotate a global phase so the first non-negligible component is real >= 0."""
    vec = np.asarray(vec, dtype=complex)
    idx = 0
    for i, x in enumerate(vec):
        if abs(x) > tol:
            idx = i
            break
    else:
        return vec.copy()
    pivot = vec[idx]
    return vec * (pivot.conjugate() / abs(pivot))


def herm_eig2(m: np.ndarray) -> EigPair2:
    """Closed-form eigendecomposition of a 2x2 Hermitian matrix.

    Uses the trace/determinant discriminant rather than an iterative
    routine, so results are exact to rounding and deterministic.  The
    second eigenvector is the exact orthogonal complement of the first,
    which keeps the pair orthonormal even near degeneracy.
    """
    m = require_hermitian(m)
    a = m[0, 0].real
    c = m[1, 1].real
    b = m[0, 1]
    mean = 0.5 * (a + c)
    radius = np.hypot(0.5 * (a - c), abs(b))
    lo = mean - radius
    hi = mean + radius
    eigvals = np.array([lo, hi])

    scale = max(1.0, abs(lo), abs(hi))
    if radius <= 0.5e-12 * scale:
        # Degenerate spectrum: canonical basis under the phase convention.
        return EigPair2(eigvals, np.eye(2, dtype=complex))

    # Eigenvector of the top eigenvalue; pick the better-conditioned of the
    # two algebraic candidates, then build the bottom one as its exact
    # orthogonal complement.
    cand1 = np.array([b, hi - a], dtype=complex)
    cand2 = np.array([hi - c, np.conj(b)], dtype=complex)
    v_hi = cand1 if np.vdot(cand1, cand1).real >= np.vdot(cand2, cand2).real else cand2
    v_hi = v_hi / np.linalg.norm(v_hi)
    v_hi = pin_phase(v_hi)
    v_lo = pin_phase(np.array([-np.conj(v_hi[1]), np.conj(v_hi[0])]))

    eigvecs = np.column_stack([v_lo, v_hi])
    return EigPair2(eigvals, eigvecs)


def psd_pow(m: np.ndarray, exponent: float) -> np.ndarray:
    """Spectral power of a PSD 2x2 matrix, pseudo-inverted on its support.

    Eigenvalues below ``SUPPORT_CUTOFF`` relative to the largest one are
    treated as exactly zero; for negative exponents the null space maps
    to zero (Moore-Penrose convention).  An eigenvalue below ``-PSD_TOL``
    raises :class:`PsdViolationError`.
    """
    eigvals, eigvecs = herm_eig2(m)
    if eigvals[0] < -PSD_TOL:
        raise PsdViolationError(f"eigenvalue {eigvals[0]:.3e} below -{PSD_TOL:g}")
    top = max(eigvals[1], 0.0)
    cutoff = SUPPORT_CUTOFF * top
    powered = np.array(
        [lam**exponent if lam > cutoff else 0.0 for lam in eigvals]
    )
    out = (eigvecs * powered) @ eigvecs.conj().T
    return 0.5 * (out + out.conj().T)


def support_rank(m: np.ndarray) -> int:
    """Number of eigenvalues above the relative support cutoff."""
    eigvals, _ = herm_eig2(m)
    top = max(eigvals[1], 0.0)
    cutoff = SUPPORT_CUTOFF * top
    return int(np.sum(eigvals > cutoff))


def trace_norm_herm2(m: np.ndarray) -> float:
    """Sum of absolute eigenvalues of a 2x2 Hermitian matrix."""
    m = require_hermitian(m)
    a = m[0, 0].real
    c = m[1, 1].real
    mean = 0.5 * (a + c)
    radius = np.hypot(0.5 * (a - c), abs(m[0, 1]))
    return abs(mean - radius) + abs(mean + radius)


def is_psd(m: np.ndarray, tol: float = PSD_TOL) -> bool:
    """True when all eigenvalues of a Hermitian 2x2 matrix are >= -tol."""
    eigvals, _ = herm_eig2(m)
    return bool(eigvals[0] >= -tol)
