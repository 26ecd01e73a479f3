"""Precoder design for surface-aided and benchmark MIMO architectures.

All designs maximize or approximate the log-det rate
    R(F) = log2 |I + gamma * H F F^H H^H|
under the unit transmit-power constraint ||F||_F = 1.  Surface architectures
factor F = D T B with D a unit-modulus diagonal steering the surface, T the
fixed feed-to-surface transfer matrix, and B the digital baseband precoder.
Both surface designs restrict each sub-surface's phase pattern to the set of
channel-path responses (one candidate per path), which reduces the diagonal
search to N*L discrete choices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import LensSetup

GRAM_COND_LIMIT = 1e12
GRAM_JITTER = 1e-12


@dataclass(frozen=True)
class WaterfillResult:
    """Power fractions per eigenchannel, the water level, and the gains used."""

    allocations: np.ndarray
    threshold: float
    sigma_sq: np.ndarray


@dataclass(frozen=True)
class Precoder:
    """A designed precoder with its bookkeeping.

    `effective` is the M x Q matrix actually applied to the data streams;
    `baseband` feeds the RF chains and its squared Frobenius norm sets the
    radiated-power overhead of surface architectures.
    """

    architecture: str
    effective: np.ndarray
    rate_bpshz: float
    bnorm_sq: float
    baseband: np.ndarray | None = None
    phase_diag: np.ndarray | None = None
    analog: np.ndarray | None = None
    selected_paths: tuple[int, ...] = ()
    selected_antennas: tuple[int, ...] = ()
    flags: tuple[str, ...] = ()


@dataclass(frozen=True)
class CandidateSet:
    """Masked phase diagonals, one per (feed, path): shape (N, L, M)."""

    diagonals: np.ndarray


def waterfill(sigma_sq, gamma: float, budget: float) -> WaterfillResult:
    """Allocate `budget` across eigenchannels: z_q = max(mu - 1/(gamma*s_q), 0).

    The water level mu is found by bisection until the active set stabilizes,
    then solved exactly on that set; the returned allocations sum to the budget
    to within 1e-12.
    """
    sigma_sq = np.asarray(sigma_sq, dtype=float)
    if gamma <= 0 or budget <= 0:
        raise ValueError("gamma and budget must be positive")
    if sigma_sq.ndim != 1 or sigma_sq.size == 0:
        raise ValueError("sigma_sq must be a nonempty vector")
    if np.any(sigma_sq < 0):
        raise ValueError("sigma_sq entries must be nonnegative")
    positive = sigma_sq > 0
    if not np.any(positive):
        raise ValueError("waterfilling needs at least one usable eigenchannel")
    inv = np.full_like(sigma_sq, np.inf)
    with np.errstate(over="ignore"):
        inv[positive] = 1 / (gamma * sigma_sq[positive])
    usable = np.isfinite(inv)
    if not np.any(usable):
        # 1/(gamma*sigma^2) overflows for every channel: the water level is
        # beyond float range and only the strongest channel can drink.
        z = np.zeros_like(sigma_sq)
        z[int(np.argmax(sigma_sq))] = budget
        return WaterfillResult(allocations=z, threshold=math.inf, sigma_sq=sigma_sq)

    def total(mu):
        return float(np.sum(np.maximum(mu - inv[usable], 0.0)))

    lo, hi = 0.0, budget + float(inv[usable].min())
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if total(mid) < budget:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    # Exact solve on the bisection's active set, refined to a fixed point so
    # residual bisection slack cannot leak into the allocations.
    active = inv <= hi
    mu = hi
    for _ in range(sigma_sq.size + 1):
        mu = (budget + float(inv[active].sum())) / int(active.sum())
        refined = inv < mu
        if not refined.any() or np.array_equal(refined, active):
            break
        active = refined
    z = np.where(active, np.maximum(mu - inv, 0.0), 0.0)
    z[~positive] = 0.0
    if z.sum() == 0.0:
        # The budget is absorbed by the water level's float resolution: the
        # level differences are unrepresentable and only the best channel pours.
        z[int(np.argmin(inv))] = budget
    else:
        # Fold float cancellation from (mu - inv) at large water levels back
        # into the strongest allocation; an ulp-level nudge of mu.
        z[int(np.argmax(z))] += budget - z.sum()
    assert abs(z.sum() - budget) <= 1e-12 * max(1.0, budget)
    return WaterfillResult(allocations=z, threshold=mu, sigma_sq=sigma_sq)


def rate(h, f, gamma: float) -> float:
    """Achievable rate log2|I + gamma*H F F^H H^H| in bits/s/Hz, evaluated via SVD."""
    h = np.atleast_2d(np.asarray(h))
    f = np.atleast_2d(np.asarray(f))
    s = np.linalg.svd(math.sqrt(gamma) * (h @ f), compute_uv=False)
    return float(np.sum(np.log2(1 + s**2)))


def fd_optimal(h: np.ndarray, gamma: float, q: int) -> Precoder:
    """Unconstrained optimum: channel SVD plus waterfilling, ||F||_F = 1."""
    h = np.atleast_2d(np.asarray(h))
    if q > min(h.shape):
        raise ValueError("stream count exceeds channel dimensions")
    _, s, vh = np.linalg.svd(h)
    wf = waterfill(s[:q] ** 2, gamma, 1.0)
    f = vh.conj().T[:, :q] * np.sqrt(wf.allocations)[None, :]
    r = float(np.sum(np.log2(1 + gamma * s[:q] ** 2 * wf.allocations)))
    return Precoder(
        architecture="fd",
        effective=f,
        rate_bpshz=r,
        bnorm_sq=float(np.sum(np.abs(f) ** 2)),
        baseband=f,
    )


def _gram_isqrt(gram: np.ndarray) -> tuple[np.ndarray, list[str]]:
    """Inverse matrix square root of a Hermitian Gram matrix, with the
    regularize-and-flag policy for near-singular input."""
    flags: list[str] = []
    evals, evecs = np.linalg.eigh(gram)
    if evals[-1] <= 0:
        raise ValueError("Gram matrix has no positive eigenvalue")
    if evals[0] <= evals[-1] / GRAM_COND_LIMIT:
        jitter = GRAM_JITTER * float(np.trace(gram).real) / gram.shape[0]
        evals, evecs = np.linalg.eigh(gram + jitter * np.eye(gram.shape[0]))
        flags.append("gram_regularized")
    return (evecs * evals**-0.5) @ evecs.conj().T, flags


def _active_columns(c: np.ndarray) -> np.ndarray:
    """Columns carrying signal; structurally zero columns (e.g. not-yet-assigned
    feeds under separate illumination) are excluded rather than regularized."""
    norms = np.linalg.norm(c, axis=0)
    if not np.any(norms > 0):
        raise ValueError("effective precoding matrix has no nonzero column")
    return norms > norms.max() * 1e-14


def baseband_opt(
    h: np.ndarray, c1: np.ndarray, gamma: float, q: int
) -> tuple[np.ndarray, float, tuple[str, ...]]:
    """Rate-optimal baseband precoder for a fixed effective matrix C1 = D*T.

    Whitens the power constraint with (C1^H C1)^(-1/2), waterfills the SVD of
    the equivalent channel H*C1*(C1^H C1)^(-1/2), and returns (B, rate, flags)
    with trace(C1 B B^H C1^H) = 1.
    """
    h = np.atleast_2d(np.asarray(h))
    c1 = np.atleast_2d(np.asarray(c1))
    active = _active_columns(c1)
    c1a = c1[:, active]
    g_isqrt, flags = _gram_isqrt(c1a.conj().T @ c1a)
    h_eq = h @ c1a @ g_isqrt
    _, s, vh = np.linalg.svd(h_eq)
    n_active = c1a.shape[1]
    sig_sq = np.zeros(q)
    k = min(q, s.size)
    sig_sq[:k] = s[:k] ** 2
    wf = waterfill(sig_sq, gamma, 1.0)
    v_q = np.zeros((n_active, q), dtype=complex)
    v_q[:, : min(q, n_active)] = vh.conj().T[:, : min(q, n_active)]
    b_active = g_isqrt @ v_q * np.sqrt(wf.allocations)[None, :]
    b = np.zeros((c1.shape[1], q), dtype=complex)
    b[active] = b_active
    r = float(np.sum(np.log2(1 + gamma * sig_sq * wf.allocations)))
    return b, r, tuple(flags)


def candidate_phase_matrices(
    h_tx: np.ndarray, t: np.ndarray, partition: tuple[np.ndarray, ...]
) -> CandidateSet:
    """All masked phase diagonals exp(j(angle(H_t) - angle(T))) per (feed, path).

    Candidate (n, l), applied to sub-surface n, turns column n of T into path
    l's response restricted to that sub-surface (up to the fixed |T| taper).
    Zero entries of T contribute angle 0 by convention.
    """
    m, l_count = h_tx.shape
    n_count = t.shape[1]
    diags = np.zeros((n_count, l_count, m), dtype=complex)
    ang_h = np.angle(h_tx)
    ang_t = np.angle(t)
    for n in range(n_count):
        idx = partition[n]
        diags[n, :, idx] = np.exp(1j * (ang_h[idx, :] - ang_t[idx, n, None]))
    return CandidateSet(diagonals=diags)


def mi_precoder(
    h: np.ndarray,
    t: np.ndarray,
    partition: tuple[np.ndarray, ...],
    h_tx: np.ndarray,
    gamma: float,
    q: int,
    architecture: str = "irs-mi",
) -> Precoder:
    """Mutual-information precoder: greedy per-feed path choice, rate-optimal B.

    Outer loop over feeds, inner loop over the L path candidates for that
    feed's sub-surface; each trial evaluates the rate-optimal baseband precoder
    with all feeds assigned so far (unassigned sub-surfaces stay dark).  Ties
    break toward the lowest path index.
    """
    cands = candidate_phase_matrices(h_tx, t, partition).diagonals
    n_count, l_count, m = cands.shape
    d_acc = np.zeros(m, dtype=complex)
    chosen: list[int] = []
    b_final = None
    rate_final = -math.inf
    flags_final: tuple[str, ...] = ()
    for n in range(n_count):
        best_rate, best_l, best_b, best_flags = -math.inf, -1, None, ()
        for l in range(l_count):
            c1 = (d_acc + cands[n, l])[:, None] * t
            b, r, fl = baseband_opt(h, c1, gamma, q)
            if r > best_rate:
                best_rate, best_l, best_b, best_flags = r, l, b, fl
        d_acc = d_acc + cands[n, best_l]
        chosen.append(best_l)
        b_final, rate_final, flags_final = best_b, best_rate, best_flags
    f = (d_acc[:, None] * t) @ b_final
    return Precoder(
        architecture=architecture,
        effective=f,
        rate_bpshz=rate_final,
        bnorm_sq=float(np.sum(np.abs(b_final) ** 2)),
        baseband=b_final,
        phase_diag=d_acc,
        selected_paths=tuple(chosen),
        flags=flags_final,
    )


def _least_squares(c3: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, tuple[str, ...]]:
    """Least-squares fit of target by the active columns of c3; zero rows are
    returned for structurally dark columns."""
    active = _active_columns(c3)
    c3a = c3[:, active]
    gram = c3a.conj().T @ c3a
    rhs = c3a.conj().T @ target
    flags: list[str] = []
    evals = np.linalg.eigvalsh(gram)
    if evals[0] <= evals[-1] / GRAM_COND_LIMIT:
        jitter = GRAM_JITTER * float(np.trace(gram).real) / gram.shape[0]
        gram = gram + jitter * np.eye(gram.shape[0])
        flags.append("gram_regularized")
    x = np.linalg.solve(gram, rhs)
    b = np.zeros((c3.shape[1], target.shape[1]), dtype=complex)
    b[active] = x
    return b, tuple(flags)


def _normalized_ls(c3: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, tuple[str, ...]]:
    """Least-squares fit of target by c3, scaled so that ||c3 @ B||_F = 1."""
    b, flags = _least_squares(c3, target)
    norm = np.linalg.norm(c3 @ b)
    if norm == 0:
        raise ValueError("least-squares projection is identically zero")
    return b / norm, flags


def omp_precoder(
    h: np.ndarray,
    t: np.ndarray,
    partition: tuple[np.ndarray, ...],
    h_tx: np.ndarray,
    gamma: float,
    q: int,
    architecture: str = "irs-omp",
) -> Precoder:
    """Matching-pursuit precoder: approximates the unconstrained optimum.

    Each iteration projects the residual onto the path responses, assigns the
    best path's phase pattern to the next sub-surface, and refits the baseband
    precoder by normalized least squares.
    """
    f_opt = fd_optimal(h, gamma, q).effective
    cands = candidate_phase_matrices(h_tx, t, partition).diagonals
    n_count = cands.shape[0]
    d_acc = np.zeros(cands.shape[2], dtype=complex)
    f_res = f_opt
    chosen: list[int] = []
    flags: set[str] = set()
    b = None
    c3 = None
    for n in range(n_count):
        psi = h_tx.conj().T @ f_res
        scores = np.sum(np.abs(psi) ** 2, axis=1)
        l = int(np.argmax(scores))
        chosen.append(l)
        d_acc = d_acc + cands[n, l]
        c3 = d_acc[:, None] * t
        b, fl = _normalized_ls(c3, f_opt)
        flags.update(fl)
        f_res = f_opt - c3 @ b
    f = c3 @ b
    return Precoder(
        architecture=architecture,
        effective=f,
        rate_bpshz=rate(h, f, gamma),
        bnorm_sq=float(np.sum(np.abs(b) ** 2)),
        baseband=b,
        phase_diag=d_acc,
        selected_paths=tuple(chosen),
        flags=tuple(sorted(flags)),
    )


def fc_sparse_precoder(
    h: np.ndarray, h_tx: np.ndarray, gamma: float, n_rf: int, q: int
) -> Precoder:
    """Spatially sparse hybrid precoder: OMP over the path-response dictionary.

    The analog matrix R collects the N selected (unit-modulus) path responses;
    the digital part is the least-squares fit of the unconstrained optimum,
    normalized so ||R B||_F = 1.
    """
    if n_rf > h_tx.shape[1]:
        raise ValueError("more RF chains than dictionary columns")
    f_opt = fd_optimal(h, gamma, q).effective
    f_res = f_opt
    cols: list[int] = []
    flags: set[str] = set()
    b = None
    r_mat = None
    for _ in range(n_rf):
        psi = h_tx.conj().T @ f_res
        scores = np.sum(np.abs(psi) ** 2, axis=1)
        cols.append(int(np.argmax(scores)))
        r_mat = h_tx[:, cols]
        # Plain LS here keeps the residual orthogonal to the selected span;
        # the power normalization is applied once after the last selection.
        b, fl = _least_squares(r_mat, f_opt)
        flags.update(fl)
        f_res = f_opt - r_mat @ b
    b = b / np.linalg.norm(r_mat @ b)
    f = r_mat @ b
    return Precoder(
        architecture="fc",
        effective=f,
        rate_bpshz=rate(h, f, gamma),
        bnorm_sq=float(np.sum(np.abs(b) ** 2)),
        baseband=b,
        analog=r_mat,
        selected_paths=tuple(cols),
        flags=tuple(sorted(flags)),
    )


def connection_matrix(partition: tuple[np.ndarray, ...], num_elements: int) -> np.ndarray:
    """Binary M x N map of the partially-connected network: 1 iff antenna m is
    wired to RF chain n."""
    t = np.zeros((num_elements, len(partition)))
    for n, idx in enumerate(partition):
        t[idx, n] = 1.0
    return t


def pc_precoder(
    h: np.ndarray,
    partition: tuple[np.ndarray, ...],
    h_tx: np.ndarray,
    gamma: float,
    q: int,
) -> Precoder:
    """Partially-connected hybrid precoder: the matching-pursuit design run on
    the hard-wired binary connection matrix instead of an over-the-air T."""
    t_tilde = connection_matrix(partition, h_tx.shape[0])
    return omp_precoder(h, t_tilde, partition, h_tx, gamma, q, architecture="pc")


def la_precoder(
    h: np.ndarray,
    lens: LensSetup,
    h_tx: np.ndarray,
    gamma: float,
    n_rf: int,
    q: int,
) -> Precoder:
    """Lens-array precoder: per-chain path choice as in the matching-pursuit
    design, then selection of the focal-arc antenna whose fixed beam best
    matches that path.  Duplicate selections are kept and flagged."""
    k_count = lens.t.shape[1]
    if k_count < 1:
        raise ValueError("lens has no feed antennas")
    f_opt = fd_optimal(h, gamma, q).effective
    beams = lens.fixed_phase[:, None] * lens.t  # (M, K) fixed beam per antenna
    f_res = f_opt
    sel: list[int] = []
    chosen_paths: list[int] = []
    flags: set[str] = set()
    b = None
    c3 = None
    for _ in range(n_rf):
        psi = h_tx.conj().T @ f_res
        l = int(np.argmax(np.sum(np.abs(psi) ** 2, axis=1)))
        chosen_paths.append(l)
        k = int(np.argmax(np.abs(h_tx[:, l].conj() @ beams)))
        if k in sel:
            flags.add("duplicate_antenna")
        sel.append(k)
        c3 = beams[:, sel]
        b, fl = _normalized_ls(c3, f_opt)
        flags.update(fl)
        f_res = f_opt - c3 @ b
    f = c3 @ b
    return Precoder(
        architecture="la",
        effective=f,
        rate_bpshz=rate(h, f, gamma),
        bnorm_sq=float(np.sum(np.abs(b) ** 2)),
        baseband=b,
        phase_diag=lens.fixed_phase,
        selected_paths=tuple(chosen_paths),
        selected_antennas=tuple(sel),
        flags=tuple(sorted(flags)),
    )
