"""Linear flow ``e^{G t}`` mode by mode, decay measurement and resolvent probes."""
from __future__ import annotations

from dataclasses import dataclass, field
from math import factorial

import numpy as np
from scipy.special import logsumexp

from .block_system import BlockOperator, _as_array, _wrap

__all__ = [
    "PropagatorSet",
    "DecayFit",
    "SectorialityTable",
    "mode_expm",
    "propagators",
    "evolve_linear",
    "decay_rate",
    "sectoriality_probe",
]

_PADE_Q = 8
_PADE_C = np.array(
    [factorial(2 * _PADE_Q - j) * factorial(_PADE_Q) / (factorial(2 * _PADE_Q) * factorial(j) * factorial(_PADE_Q - j))
     for j in range(_PADE_Q + 1)]
)


def mode_expm(L, t: float = 1.0) -> np.ndarray:
    """``exp(L t)`` for a stack of small matrices (last two axes).

    Diagonal Padé [8/8] on ``L t / 2^s`` with ``||L t / 2^s||_1 <= 1`` per
    matrix, followed by ``s`` squarings.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    A = np.asarray(L, dtype=float) * t
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    n = A.shape[-1]
    eye = np.eye(n)
    if t == 0:
        return np.broadcast_to(eye, A.shape).copy()
    norm1 = np.abs(A).sum(axis=-2).max(axis=-1)
    s = np.maximum(0, np.ceil(np.log2(np.maximum(norm1, 1e-300)))).astype(int)
    A = A / np.ldexp(1.0, s)[..., None, None]
    # Horner on even/odd parts: N = U + V, D = V - U
    A2 = A @ A
    ev = np.broadcast_to(_PADE_C[8] * eye, A.shape).copy()
    for j in (6, 4, 2, 0):
        ev = ev @ A2 + _PADE_C[j] * eye
    od = np.broadcast_to(_PADE_C[7] * eye, A.shape).copy()
    for j in (5, 3, 1):
        od = od @ A2 + _PADE_C[j] * eye
    U = A @ od
    E = np.linalg.solve(ev - U, ev + U)
    for i in range(int(s.max(initial=0))):
        todo = s > i
        if np.all(todo):
            E = E @ E
        else:
            E[todo] = E[todo] @ E[todo]
    if not np.all(np.isfinite(E)):
        raise OverflowError(
            f"matrix exponential overflowed (||L t||_1 up to {norm1.max():.3e}); "
            "propagate in shorter steps and renormalise"
        )
    return E


@dataclass(frozen=True)
class PropagatorSet:
    t: float
    mats: np.ndarray = field(repr=False)


def propagators(B: BlockOperator, t: float) -> PropagatorSet:
    mats = mode_expm(B.L, t)
    mats.setflags(write=False)
    return PropagatorSet(float(t), mats)


def evolve_linear(B: BlockOperator, s, t: float):
    x = _as_array(B, s)
    E = propagators(B, t).mats
    return _wrap(np.einsum("kij,...kj->...ki", E, x), s)


# -- decay ------------------------------------------------------------------

@dataclass
class DecayFit:
    omega: float          # -(largest measured exponent), from per-mode exponent fits
    omega_lsq: float      # -(slope of log y_norm on [H/2, H])
    abscissa: float       # largest real part of the per-mode cubic roots
    decaying: bool
    matches: bool         # |omega + abscissa| <= 0.1 |abscissa|
    times: np.ndarray = field(repr=False)
    log_y_norm: np.ndarray = field(repr=False)


def _pencil_exponents(X, dt, rank_tol=1e-10, max_rank=3):
    """Exponents of a sampled vector signal that is a sum of few exponentials.

    Matrix pencil on the stacked Hankel matrices of the components.
    """
    n = X.shape[0]
    rows = n - n // 2
    H = np.concatenate(
        [np.lib.stride_tricks.sliding_window_view(X[:, c], n // 2 + 1)[:rows] for c in range(X.shape[1])],
        axis=0,
    )
    _, sv, Vh = np.linalg.svd(H, full_matrices=False)
    if sv[0] == 0:
        return np.array([-np.inf])
    r = min(max_rank, max(1, int(np.sum(sv > rank_tol * sv[0]))))
    V = Vh[:r].T
    mu = np.linalg.eigvals(np.linalg.pinv(V[:-1]) @ V[1:])
    with np.errstate(divide="ignore"):
        return np.log(mu.astype(complex)) / dt


def decay_rate(B: BlockOperator, horizon: float, samples: int = 400, s0=None) -> DecayFit:
    """Measure the exponential rate of ``e^{Gt} s0`` on ``[horizon/2, horizon]``.

    The trajectory is propagated in steps of ``horizon/samples`` with each mode
    renormalised separately, so neither overflow nor underflow limits the
    horizon.  Two rates are reported: a least-squares slope of ``log y_norm``
    and the exponent fit of every mode's own trajectory (the primary one; the
    log-norm slope is biased by oscillation when the rate is small).
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    n = B.n_modes
    x = np.ones((n, 3)) if s0 is None else np.array(_as_array(B, s0), dtype=float)
    dt = horizon / samples
    E = propagators(B, dt).mats
    logscale = np.zeros(n)
    traj = np.empty((samples + 1, n, 3))
    logs = np.empty((samples + 1, n))
    for j in range(samples + 1):
        nrm = np.linalg.norm(x, axis=-1)
        nrm[nrm == 0] = 1.0
        x = x / nrm[:, None]
        logscale = logscale + np.log(nrm)
        traj[j], logs[j] = x, logscale
        x = np.einsum("kij,kj->ki", E, x)
    times = dt * np.arange(samples + 1)
    wn2 = np.sum((traj * B.y_weights) ** 2, axis=-1)
    with np.errstate(divide="ignore"):
        log_y = 0.5 * logsumexp(2 * logs + np.log(wn2), axis=-1)
    win = times >= horizon / 2
    omega_lsq = -float(np.polyfit(times[win], log_y[win], 1)[0])

    rates = np.empty(n)
    for k in range(n):
        lk = logs[win, k]
        span = lk - lk[0]
        if span.max() > 600:
            rates[k] = float(np.polyfit(times[win], lk, 1)[0])
            continue
        sig = traj[win, k] * np.exp(span)[:, None]
        rates[k] = float(_pencil_exponents(sig, dt).real.max())
    omega = -float(rates.max())
    a_star = float(B.roots.real.max())
    matches = abs(omega + a_star) <= 0.1 * abs(a_star)
    return DecayFit(omega, omega_lsq, a_star, omega > 0, matches, times, log_y)


# -- sectoriality -----------------------------------------------------------

@dataclass
class SectorialityTable:
    angles: np.ndarray
    radii: np.ndarray
    M_raw: np.ndarray       # sup over radii and modes of |z| ||(z - L_k)^-1||_2
    M_weighted: np.ndarray  # same with the Y-weighted per-mode operator norm
    skipped: list = field(default_factory=list)  # (theta, r, mode) near the spectrum


def sectoriality_probe(B: BlockOperator, angles, radii, skip_tol: float = 1e-8) -> SectorialityTable:
    """Scaled resolvent norms of the generator along rays ``r e^{i theta}``.

    Finite, mode-independent values on a sector of half-angle beyond ``pi/2``
    around the positive axis certify that ``G = -AA`` generates an analytic
    semigroup.
    """
    angles = np.asarray(angles, dtype=float)
    radii = np.asarray(radii, dtype=float)
    W = B.y_weights
    eye = np.eye(3)
    M_raw = np.zeros(angles.size)
    M_w = np.zeros(angles.size)
    skipped = []
    for i, th in enumerate(angles):
        z = radii * np.exp(1j * th)
        dist = np.abs(B.roots[None, :, :] - z[:, None, None]).min(axis=-1)
        near = dist < skip_tol * np.maximum(1.0, np.abs(z))[:, None]
        for r_idx, k in zip(*np.nonzero(near)):
            skipped.append((float(th), float(radii[r_idx]), int(k)))
        Mz = z[:, None, None, None] * eye - B.L[None]
        Mz[near] = eye
        R = np.linalg.inv(Mz)
        raw = np.linalg.svd(R, compute_uv=False)[..., 0]
        Rw = W[None, :, :, None] * R / W[None, :, None, :]
        wtd = np.linalg.svd(Rw, compute_uv=False)[..., 0]
        raw[near] = 0.0
        wtd[near] = 0.0
        M_raw[i] = float((np.abs(z)[:, None] * raw).max())
        M_w[i] = float((np.abs(z)[:, None] * wtd).max())
    return SectorialityTable(angles, radii, M_raw, M_w, skipped)
