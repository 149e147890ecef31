"""Maximum-confidence discrimination of the two hypothesis states.

The confidence of detector j is the conditional probability that state j
was prepared given that detector j fired,

    C_j = eta_j * Tr(rho_j Pi_j) / Tr(rho Pi_j),

and the solver below maximizes both confidences simultaneously while
minimizing the probability Tr(rho Pi_?) of the explicit "don't know"
outcome.  For a pair of qubit states the optimum is closed-form:

  * form  D0 = eta0 * rho^(-1/2) rho0 rho^(-1/2)  (weighted by the prior
    of the hypothesis being detected; a grid-search test pins this
    convention) and diagonalize it,
  * the top eigenvalue is C0_max, one minus the bottom eigenvalue is
    C1_max, and the optimal detector directions are the eigenvectors
    pulled back through rho^(-1/2),
  * with r_ij the matrix elements of rho in that eigenbasis and
    c = |r_01|, the least inconclusive rate is

        1 - det(rho)/r_11   when c >= r_11   (only detector 0 kept)
        1 - det(rho)/r_00   when c >= r_00   (only detector 1 kept)
        2c                  otherwise,

    the interior weights being a = (r_00 - c) r_11 / det(rho) and
    b = (r_11 - c) r_00 / det(rho).  In the one-sided cases the
    measurement collapses to the two-outcome minimum-error projectors.

Also here: the minimum-error (Helstrom) baseline, capping of the
inconclusive rate by mixing toward the minimum-error measurement, the
conditional error of a conclusive call, and an independent brute-force
grid search used to verify all of the above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import qmat
from .channel import StatePair, build_state_pair
from .errors import DomainError, PsdViolationError, UndefinedConditionalError

_I2 = np.eye(2, dtype=complex)

#: Relative tolerance below which the transformed detector state counts as
#: scalar, i.e. the two hypotheses are operationally identical.
DEGENERACY_TOL = 1e-12

BRANCHES = ("interior", "boundary_a", "boundary_b", "degenerate")


@dataclass(frozen=True)
class Povm:
    """Three-outcome measurement (detector 0, detector 1, inconclusive).

    ``a, v`` (and ``b, w``) hold the rank-one decomposition
    ``pi0 = a |v><v|`` when one exists; they are ``None`` for operators of
    rank two (which occur only for interpolated, capped measurements).
    """

    pi0: np.ndarray
    pi1: np.ndarray
    pi_inc: np.ndarray
    a: float | None = None
    b: float | None = None
    v: np.ndarray | None = None
    w: np.ndarray | None = None

    def operators(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.pi0, self.pi1, self.pi_inc


@dataclass(frozen=True)
class McSolution:
    """Closed-form solver output.

    ``gamma`` is the eigenpair of the transformed detector state
    (ascending, per :class:`~mcmag.qmat.EigPair2`), while ``rho_g`` stores
    rho in the (top-eigenvector, bottom-eigenvector) order used by the
    branch formulas, i.e. ``rho_g[0, 0]`` belongs to the top eigenvector.
    """

    c0_max: float
    c1_max: float
    p_inc_opt: float
    povm: Povm
    branch: str
    gamma: qmat.EigPair2
    rho_g: np.ndarray


@dataclass(frozen=True)
class ThresholdResult:
    """Measurement after capping the inconclusive rate."""

    povm: Povm
    c0: float | None
    c1: float | None
    p_inc: float
    mix: float  # 0 = untouched optimum, 1 = pure minimum-error measurement


@dataclass(frozen=True)
class OracleSolution:
    """Best measurement found by the independent grid search."""

    c0: float
    c1: float
    p_inc: float
    povm: Povm


def _proj(vec: np.ndarray) -> np.ndarray:
    return np.outer(vec, vec.conj())


def _hermitize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.conj().T)


def _check_pair(pair: StatePair) -> None:
    if not isinstance(pair, StatePair):
        raise DomainError("expected a StatePair")
    if not (0.0 < pair.nu <= 1.0) or abs(pair.mu) > 1.0 + 1e-12:
        raise DomainError("state pair outside its domain")
    if not (0.0 < pair.eta0 < 1.0):
        raise DomainError("eta0 must be in (0, 1)")


def transformed_detector_state(pair: StatePair) -> np.ndarray:
    """eta0 * rho^(-1/2) rho0 rho^(-1/2), the operator whose spectrum caps C0."""
    s_inv = qmat.psd_pow(pair.rho, -0.5)
    return _hermitize(pair.eta0 * (s_inv @ pair.rho0 @ s_inv))


def _degenerate_solution(pair: StatePair, d0: np.ndarray) -> McSolution:
    # Hypotheses operationally identical: confidences fall back to the
    # priors and nothing is gained by an inconclusive outcome; report the
    # balanced projective measurement as the continuity limit.
    plus = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)
    minus = np.array([1.0, -1.0], dtype=complex) / np.sqrt(2.0)
    povm = Povm(
        pi0=_proj(plus),
        pi1=_proj(minus),
        pi_inc=np.zeros((2, 2), dtype=complex),
        a=1.0,
        b=1.0,
        v=plus,
        w=minus,
    )
    gamma = qmat.herm_eig2(d0)
    g0 = gamma.eigvecs[:, 1]
    g1 = gamma.eigvecs[:, 0]
    rho_g = np.array(
        [
            [np.vdot(g0, pair.rho @ g0), np.vdot(g0, pair.rho @ g1)],
            [np.vdot(g1, pair.rho @ g0), np.vdot(g1, pair.rho @ g1)],
        ]
    )
    return McSolution(
        c0_max=pair.eta0,
        c1_max=pair.eta1,
        p_inc_opt=0.0,
        povm=povm,
        branch="degenerate",
        gamma=gamma,
        rho_g=rho_g,
    )


def solve_max_confidence(pair: StatePair) -> McSolution:
    """Closed-form maximum-confidence measurement for a state pair."""
    _check_pair(pair)
    rho = pair.rho
    d0 = transformed_detector_state(pair)

    scale = max(1.0, float(np.max(np.abs(d0))))
    dev_from_scalar = float(np.max(np.abs(d0 - 0.5 * np.trace(d0).real * _I2)))
    if qmat.support_rank(rho) < 2 or dev_from_scalar <= DEGENERACY_TOL * scale:
        return _degenerate_solution(pair, d0)

    gamma = qmat.herm_eig2(d0)
    g_min, g_max = gamma.eigvals
    gvec0 = gamma.eigvecs[:, 1]  # top eigenvalue -> detector 0 direction
    gvec1 = gamma.eigvecs[:, 0]

    c0_max = min(max(float(g_max), 0.0), 1.0)
    c1_max = min(max(float(1.0 - g_min), 0.0), 1.0)

    r00 = float(np.vdot(gvec0, rho @ gvec0).real)
    r11 = float(np.vdot(gvec1, rho @ gvec1).real)
    r01 = complex(np.vdot(gvec0, rho @ gvec1))
    c = abs(r01)
    det_rho = float(np.linalg.det(rho).real)

    if c >= r11:
        branch = "boundary_a"
        a, b = 1.0, 0.0
        p_inc = 1.0 - det_rho / r11
    elif c >= r00:
        branch = "boundary_b"
        a, b = 0.0, 1.0
        p_inc = 1.0 - det_rho / r00
    else:
        branch = "interior"
        a = (r00 - c) * r11 / det_rho
        b = (r11 - c) * r00 / det_rho
        a = min(max(a, 0.0), 1.0)
        b = min(max(b, 0.0), 1.0)
        p_inc = 2.0 * c
    p_inc = min(max(p_inc, 0.0), 1.0)

    s_inv = qmat.psd_pow(rho, -0.5)
    v = s_inv @ gvec0
    w = s_inv @ gvec1
    v = qmat.pin_phase(v / np.linalg.norm(v))
    w = qmat.pin_phase(w / np.linalg.norm(w))

    pi0 = a * _proj(v)
    pi1 = b * _proj(w)
    pi_inc = _hermitize(_I2 - pi0 - pi1)
    if not qmat.is_psd(pi_inc, tol=1e-10):
        raise PsdViolationError("inconclusive operator lost positivity")

    povm = Povm(pi0=pi0, pi1=pi1, pi_inc=pi_inc, a=a, b=b, v=v, w=w)
    rho_g = np.array([[r00, r01], [np.conj(r01), r11]])
    return McSolution(
        c0_max=c0_max,
        c1_max=c1_max,
        p_inc_opt=p_inc,
        povm=povm,
        branch=branch,
        gamma=gamma,
        rho_g=rho_g,
    )


def achieved_confidences(
    povm: Povm, pair: StatePair, zero_tol: float = 1e-15
) -> tuple[float | None, float | None]:
    """Confidences a given measurement actually attains on a pair.

    Returns ``None`` for a detector that never fires (firing probability
    below ``zero_tol``), where the conditional probability is undefined.
    """
    out: list[float | None] = []
    for op, rho_j, eta_j in (
        (povm.pi0, pair.rho0, pair.eta0),
        (povm.pi1, pair.rho1, pair.eta1),
    ):
        fire = float(np.trace(pair.rho @ op).real)
        if fire <= zero_tol:
            out.append(None)
        else:
            conf = eta_j * float(np.trace(rho_j @ op).real) / fire
            out.append(min(max(conf, 0.0), 1.0))
    return out[0], out[1]


def min_error_probability(pair: StatePair) -> float:
    """Least average error of any two-outcome measurement (Helstrom bound)."""
    _check_pair(pair)
    diff = _hermitize(pair.eta1 * pair.rho1 - pair.eta0 * pair.rho0)
    return 0.5 * (1.0 - qmat.trace_norm_herm2(diff))


def min_error_projectors(pair: StatePair) -> Povm:
    """Two-outcome measurement attaining the minimum-error bound.

    Detector 1 collects the strictly positive eigenspace of
    eta1*rho1 - eta0*rho0; ties at zero go to detector 0.
    """
    _check_pair(pair)
    diff = _hermitize(pair.eta1 * pair.rho1 - pair.eta0 * pair.rho0)
    eigvals, eigvecs = qmat.herm_eig2(diff)
    pi1 = np.zeros((2, 2), dtype=complex)
    rank1 = 0
    wvec = None
    for i in range(2):
        if eigvals[i] > 0.0:
            vec = eigvecs[:, i]
            pi1 = pi1 + _proj(vec)
            rank1 += 1
            wvec = vec
    pi0 = _hermitize(_I2 - pi1)
    pi_inc = np.zeros((2, 2), dtype=complex)

    if rank1 == 0:
        a, v = None, None  # pi0 = identity, rank two
        b, w = 0.0, None
    elif rank1 == 1:
        b, w = 1.0, qmat.pin_phase(wvec)
        vvec = qmat.pin_phase(np.array([-np.conj(wvec[1]), np.conj(wvec[0])]))
        a, v = 1.0, vvec
    else:
        b, w = None, None  # pi1 = identity
        a, v = 0.0, None
    return Povm(pi0=pi0, pi1=pi1, pi_inc=pi_inc, a=a, b=b, v=v, w=w)


def _rank1_metadata(op: np.ndarray) -> tuple[float | None, np.ndarray | None]:
    eigvals, eigvecs = qmat.herm_eig2(op)
    if eigvals[0] > 1e-12 * max(1.0, eigvals[1]):
        return None, None
    if eigvals[1] <= 1e-14:
        return 0.0, None
    return float(eigvals[1]), qmat.pin_phase(eigvecs[:, 1])


def threshold_inconclusive(
    sol: McSolution, pair: StatePair, p_thresh: float
) -> ThresholdResult:
    """Cap the inconclusive rate at ``p_thresh``.

    When the optimum already satisfies the cap the solution passes
    through untouched.  Otherwise the measurement is mixed linearly with
    the minimum-error projectors,

        Pi_k(mix) = (1 - mix) * Pi_k_opt + mix * Pi_k_minerr,

    with mix = 1 - p_thresh / p_inc_opt; the inconclusive operator only
    shrinks, so Tr(rho Pi_?) = p_thresh holds exactly, positivity is
    automatic, and mix = 1 reproduces the minimum-error measurement.
    Confidences are re-evaluated on the mixed measurement.
    """
    _check_pair(pair)
    if not 0.0 <= p_thresh <= 1.0:
        raise DomainError("p_thresh must be in [0, 1]")
    if sol.p_inc_opt <= p_thresh:
        return ThresholdResult(
            povm=sol.povm,
            c0=sol.c0_max,
            c1=sol.c1_max,
            p_inc=sol.p_inc_opt,
            mix=0.0,
        )
    me = min_error_projectors(pair)
    if p_thresh == 0.0:
        mix = 1.0
        povm = me
    else:
        mix = 1.0 - p_thresh / sol.p_inc_opt
        pi0 = _hermitize((1.0 - mix) * sol.povm.pi0 + mix * me.pi0)
        pi1 = _hermitize((1.0 - mix) * sol.povm.pi1 + mix * me.pi1)
        pi_inc = _hermitize(_I2 - pi0 - pi1)
        a, v = _rank1_metadata(pi0)
        b, w = _rank1_metadata(pi1)
        povm = Povm(pi0=pi0, pi1=pi1, pi_inc=pi_inc, a=a, b=b, v=v, w=w)
    c0, c1 = achieved_confidences(povm, pair)
    p_inc = float(np.trace(pair.rho @ povm.pi_inc).real)
    return ThresholdResult(povm=povm, c0=c0, c1=c1, p_inc=p_inc, mix=mix)


def conditional_error(povm: Povm, pair: StatePair) -> float:
    """Probability a conclusive call is wrong, given that it was conclusive."""
    _check_pair(pair)
    wrong = pair.eta0 * float(np.trace(pair.rho0 @ povm.pi1).real) + pair.eta1 * float(
        np.trace(pair.rho1 @ povm.pi0).real
    )
    conclusive = 1.0 - float(np.trace(pair.rho @ povm.pi_inc).real)
    if conclusive <= 1e-12:
        raise UndefinedConditionalError("measurement is (almost) never conclusive")
    return wrong / conclusive


# ---------------------------------------------------------------------------
# Independent brute-force verifier
# ---------------------------------------------------------------------------


def _bloch_coeffs(m: np.ndarray) -> tuple[float, np.ndarray]:
    # m = alpha*I + beta . sigma  for Hermitian m
    alpha = 0.5 * float(np.trace(m).real)
    beta = np.array(
        [m[0, 1].real, -m[0, 1].imag, 0.5 * (m[0, 0].real - m[1, 1].real)]
    )
    return alpha, beta


def _directions(theta_lo, theta_hi, phi_lo, phi_hi, n):
    theta = np.linspace(theta_lo, theta_hi, n)
    phi = np.linspace(phi_lo, phi_hi, n, endpoint=False)
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    tt = tt.ravel()
    pp = pp.ravel()
    st = np.sin(tt)
    hats = np.column_stack([st * np.cos(pp), st * np.sin(pp), np.cos(tt)])
    return tt, pp, hats


_COARSE_GRIDS: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
_REFINE_GRID = 64  # window subdivisions per refinement round


def _coarse_directions(n):
    if n not in _COARSE_GRIDS:
        _COARSE_GRIDS[n] = _directions(0.0, np.pi, 0.0, 2.0 * np.pi, n)
    return _COARSE_GRIDS[n]


def _ket(theta: float, phi: float) -> np.ndarray:
    return np.array(
        [np.cos(theta / 2.0), np.exp(1j * phi) * np.sin(theta / 2.0)], dtype=complex
    )


def _confidence_scan(pair: StatePair, which: int, grid: int, refine: int):
    """Grid-maximize the confidence functional of one detector.

    Full-sphere scan at the requested density, then window refinement
    around the running argmax.  Returns the best value plus the sampled
    (confidence, theta, phi) tables of the coarse and final rounds for
    near-optimal pooling.
    """
    rho_j = pair.rho0 if which == 0 else pair.rho1
    eta_j = pair.eta0 if which == 0 else pair.eta1
    a_num, b_num = _bloch_coeffs(rho_j)
    a_den, b_den = _bloch_coeffs(pair.rho)

    def evaluate(tt, pp, hats):
        return eta_j * (a_num + hats @ b_num) / (a_den + hats @ b_den)

    tt, pp, hats = _coarse_directions(grid)
    conf = evaluate(tt, pp, hats)
    k = int(np.argmax(conf))
    best = (float(conf[k]), float(tt[k]), float(pp[k]))
    coarse = (conf, tt, pp)
    final = coarse

    dt = np.pi / max(grid - 1, 1)
    dp = 2.0 * np.pi / grid
    t_ctr, p_ctr = float(tt[k]), float(pp[k])
    for _ in range(refine):
        t_lo = max(0.0, t_ctr - 2 * dt)
        t_hi = min(np.pi, t_ctr + 2 * dt)
        tt, pp, hats = _directions(t_lo, t_hi, p_ctr - 2 * dp, p_ctr + 2 * dp, _REFINE_GRID)
        conf = evaluate(tt, pp, hats)
        k = int(np.argmax(conf))
        if conf[k] > best[0]:
            best = (float(conf[k]), float(tt[k]), float(pp[k]))
        final = (conf, tt, pp)
        dt = (t_hi - t_lo) / max(_REFINE_GRID - 1, 1)
        dp = 4.0 * dp / _REFINE_GRID
        t_ctr, p_ctr = float(tt[k]), float(pp[k])
    return best, coarse, final


def grid_search_povm(
    pair: StatePair,
    grid_density: int = 256,
    refine: int = 3,
    near_tol: float = 1e-3,
    pool: int = 32,
) -> OracleSolution:
    """Exhaustive-search verifier for the closed-form solver.

    Detector directions are scanned on a polar/azimuthal grid (with local
    window refinement around the running maximum), weights (a, b) on a
    grid over [0, 1] restricted to the region where the leftover
    inconclusive operator stays positive; positivity of the reported
    winner is confirmed via its eigenvalues.  Uses nothing but the
    defining confidence ratio, so it is independent of the eigenbasis
    closed forms it checks.
    """
    _check_pair(pair)
    if grid_density < 64:
        raise DomainError("grid_density must be >= 64")

    best0, _, final0 = _confidence_scan(pair, 0, grid_density, refine)
    best1, _, final1 = _confidence_scan(pair, 1, grid_density, refine)
    c0_best = best0[0]
    c1_best = best1[0]

    def near_optimal(c_best, scan):
        # Directions achieving the maximum up to grid resolution.  The
        # pool is drawn from the refined window so the P_inc search stays
        # on the maximum-confidence family instead of trading confidence
        # away for conclusiveness.
        conf, tt, pp = scan
        idx = np.nonzero(conf >= c_best - near_tol)[0]
        order = np.argsort(conf[idx], kind="stable")[::-1][: max(1, pool // 2)]
        return [(float(tt[i]), float(pp[i])) for i in idx[order]]

    vs = np.array([_ket(t, p) for (t, p) in near_optimal(c0_best, final0)])
    ws = np.array([_ket(t, p) for (t, p) in near_optimal(c1_best, final1)])

    # Vectorized weight search over every near-optimal direction pair:
    # push b to the positivity boundary of I - a|v><v| - b|w><w|
    # (det = 1 - a - b + a*b*(1-g) >= 0) and window-refine the a grid.
    qv = np.einsum("ij,jk,ik->i", vs.conj(), pair.rho, vs).real
    qw = np.einsum("ij,jk,ik->i", ws.conj(), pair.rho, ws).real
    overlap = np.abs(vs.conj() @ ws.T) ** 2
    g_flat = overlap.ravel()
    qv_flat = np.repeat(qv, ws.shape[0])
    qw_flat = np.tile(qw, vs.shape[0])

    n_pairs = g_flat.size
    rows = np.arange(n_pairs)
    base = np.linspace(0.0, 1.0, grid_density)
    lo = np.zeros(n_pairs)
    hi = np.ones(n_pairs)
    best_conc = np.full(n_pairs, -1.0)
    best_a = np.zeros(n_pairs)
    best_b = np.zeros(n_pairs)
    for _ in range(refine + 1):
        a = lo[:, None] + (hi - lo)[:, None] * base[None, :]
        denom = 1.0 - a * (1.0 - g_flat)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            b_cap = np.where(denom > 1e-15, (1.0 - a) / denom, 0.0)
        b_vals = np.clip(b_cap, 0.0, 1.0)
        conclusive = a * qv_flat[:, None] + b_vals * qw_flat[:, None]
        k = np.argmax(conclusive, axis=1)
        vals = conclusive[rows, k]
        upd = vals > best_conc
        best_conc[upd] = vals[upd]
        best_a[upd] = a[rows, k][upd]
        best_b[upd] = b_vals[rows, k][upd]
        step = (hi - lo) / max(grid_density - 1, 1)
        centers = a[rows, k]
        lo = np.maximum(0.0, centers - 2 * step)
        hi = np.minimum(1.0, centers + 2 * step)

    top = int(np.argmax(best_conc))
    best_conclusive = float(best_conc[top])
    a = float(best_a[top])
    b = float(best_b[top])
    v = vs[top // ws.shape[0]]
    w = ws[top % ws.shape[0]]
    pi0 = a * _proj(v)
    pi1 = b * _proj(w)
    pi_inc = _hermitize(_I2 - pi0 - pi1)
    lam = np.linalg.eigvalsh(pi_inc)
    if lam[0] < -1e-9:
        raise PsdViolationError("grid search produced a non-positive leftover")
    povm = Povm(pi0=pi0, pi1=pi1, pi_inc=pi_inc, a=a, b=b, v=v, w=w)
    return OracleSolution(
        c0=c0_best, c1=c1_best, p_inc=1.0 - best_conclusive, povm=povm
    )


def random_pair(
    rng: np.random.Generator,
    nu_range: tuple[float, float] = (1e-3, 1.0),
    eta_range: tuple[float, float] = (0.1, 0.9),
) -> StatePair:
    """Draw a random state pair (uniform nu, uniform |mu|<=1 disk, uniform prior)."""
    nu = rng.uniform(*nu_range)
    r = np.sqrt(rng.uniform(0.0, 1.0))
    ang = rng.uniform(0.0, 2.0 * np.pi)
    mu = r * np.exp(1j * ang)
    eta0 = rng.uniform(*eta_range)
    return build_state_pair(nu, mu, eta0)
