"""First-order block form of the third-order equation.

The state ``(u, v, w) = (u, u_t, u_tt)`` evolves by ``d/dt x = G x + F(x)``
where ``G`` acts on each eigenmode ``lambda`` through the companion block

    L = [[0, 1, 0], [0, 0, 1], [-gamma*lam, -beta*lam, -(alpha + delta*lam)]]

with characteristic polynomial ``z^3 + (alpha+delta*lam) z^2 + beta*lam z + gamma*lam``.
Statements about the positive operator (spectrum in the right half-plane,
sectoriality, fractional powers) refer to ``AA = -G``.

States are stored as arrays whose last two axes are ``(mode, component)``;
:class:`StateTriple` is the user-facing wrapper.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import gamma as gamma_fn

from .spectral_core import SpectralOperator

__all__ = [
    "MgtParams",
    "StateTriple",
    "ModeBlock",
    "BlockOperator",
    "UnstableParametersError",
    "mode_block",
    "apply_generator",
    "apply_generator_inverse",
    "spectrum",
    "spectrum_condition",
    "stability_condition",
    "routh_hurwitz",
    "resolvent_apply",
    "y_norm",
    "y_minus1_norm",
    "y_inner",
    "frac_block_power_fc",
    "frac_block_power_quad",
    "y_alpha_norm",
    "accretivity_form",
    "noncompactness_witness",
    "norm_equivalence_sample",
    "norm_equivalence_bounds",
]


class UnstableParametersError(ValueError):
    pass


_UNSTABLE_MSG = "fractional powers require Re σ(𝔸) > 0"


@dataclass(frozen=True)
class MgtParams:
    alpha: float
    beta: float
    gamma: float
    delta: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "delta"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValueError(f"{name} must be positive, got {val!r}")

    def astuple(self):
        return (self.alpha, self.beta, self.gamma, self.delta)


@dataclass(frozen=True)
class StateTriple:
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        arrs = [np.asarray(x) for x in (self.u, self.v, self.w)]
        dtype = np.result_type(float, *arrs)
        arrs = [a.astype(dtype) for a in arrs]
        if not (arrs[0].shape == arrs[1].shape == arrs[2].shape) or arrs[0].ndim != 1:
            raise ValueError("u, v, w must be 1-D arrays of equal length")
        if not all(np.all(np.isfinite(a)) for a in arrs):
            raise ValueError("state contains non-finite entries")
        for name, a in zip("uvw", arrs):
            object.__setattr__(self, name, a)

    @classmethod
    def zeros(cls, n: int) -> "StateTriple":
        return cls(np.zeros(n), np.zeros(n), np.zeros(n))

    @classmethod
    def from_array(cls, x) -> "StateTriple":
        x = np.asarray(x)
        return cls(x[:, 0], x[:, 1], x[:, 2])

    def to_array(self) -> np.ndarray:
        """``(n_modes, 3)`` array with columns ``u, v, w``."""
        return np.stack([self.u, self.v, self.w], axis=-1)

    def __len__(self):
        return self.u.size

    def __add__(self, other):
        return StateTriple.from_array(self.to_array() + other.to_array())

    def __sub__(self, other):
        return StateTriple.from_array(self.to_array() - other.to_array())

    def __mul__(self, c):
        return StateTriple.from_array(c * self.to_array())

    __rmul__ = __mul__


@dataclass(frozen=True)
class ModeBlock:
    lam: float
    L: np.ndarray


def _companion(params: MgtParams, lam):
    lam = np.asarray(lam, dtype=float)
    a, b, g, d = params.astuple()
    L = np.zeros(lam.shape + (3, 3))
    L[..., 0, 1] = 1.0
    L[..., 1, 2] = 1.0
    L[..., 2, 0] = -g * lam
    L[..., 2, 1] = -b * lam
    L[..., 2, 2] = -(a + d * lam)
    return L


def mode_block(params: MgtParams, lam: float) -> ModeBlock:
    if not lam > 0:
        raise ValueError("lambda must be positive")
    return ModeBlock(float(lam), _companion(params, lam))


def _cubic_coeffs(params: MgtParams, lam):
    """Monic cubic coefficients ``(a2, a1, a0)`` per mode."""
    a, b, g, d = params.astuple()
    lam = np.asarray(lam, dtype=float)
    return a + d * lam, b * lam, g * lam


class BlockOperator:
    """Block operator for a given spectral model and parameter set.

    Per-mode companion matrices, roots and fractional-power matrices are
    computed lazily and cached; the object is otherwise immutable.
    """

    def __init__(self, op: SpectralOperator, params: MgtParams):
        self.op = op
        self.params = params
        self._frac_cache = {}

    def __repr__(self):
        return f"BlockOperator(n_modes={self.n_modes}, params={self.params})"

    @property
    def n_modes(self) -> int:
        return self.op.n_modes

    @property
    def lambdas(self) -> np.ndarray:
        return self.op.lambdas

    @cached_property
    def L(self) -> np.ndarray:
        """``(n_modes, 3, 3)`` companion blocks."""
        L = _companion(self.params, self.lambdas)
        L.setflags(write=False)
        return L

    @property
    def blocks(self):
        return [ModeBlock(float(lam), L) for lam, L in zip(self.lambdas, self.L)]

    @cached_property
    def y_weights(self) -> np.ndarray:
        lam = self.lambdas
        return np.stack([np.sqrt(lam), np.sqrt(lam), np.ones_like(lam)], axis=-1)

    @cached_property
    def y_minus1_weights(self) -> np.ndarray:
        lam = self.lambdas
        return np.stack([np.sqrt(lam), np.sqrt(lam), 1.0 / np.sqrt(lam)], axis=-1)

    @cached_property
    def roots(self) -> np.ndarray:
        return _cubic_roots(self.params, self.lambdas)

    @property
    def is_stable(self) -> bool:
        return stability_condition(self.params, self.op.lambda0)[0]

    def check_state(self, x) -> np.ndarray:
        x = x.to_array() if isinstance(x, StateTriple) else np.asarray(x)
        if x.shape[-2:] != (self.n_modes, 3):
            raise ValueError(f"state shape {x.shape} incompatible with {self.n_modes} modes")
        return x

    def frac_matrices(self, p: float) -> np.ndarray:
        """Real per-mode matrices of ``AA^p`` (any real ``p``), cached."""
        key = float(p)
        if key not in self._frac_cache:
            mats = _frac_matrices_fc(self, key)
            mats.setflags(write=False)
            self._frac_cache[key] = mats
        return self._frac_cache[key]


def _as_array(B: BlockOperator, s):
    return B.check_state(s)


def _wrap(x, like):
    return StateTriple.from_array(x) if isinstance(like, StateTriple) else x


def _generator(B: BlockOperator, x):
    a, b, g, d = B.params.astuple()
    lam = B.lambdas
    u, v, w = x[..., 0], x[..., 1], x[..., 2]
    out = np.empty_like(x)
    out[..., 0] = v
    out[..., 1] = w
    out[..., 2] = -a * w - lam * (b * v + g * u + d * w)
    return out


def _generator_inverse(B: BlockOperator, x):
    a, b, g, d = B.params.astuple()
    lam = B.lambdas
    p, q, r = x[..., 0], x[..., 1], x[..., 2]
    out = np.empty_like(x)
    out[..., 0] = -(b * p + d * q + a * q / lam + r / lam) / g
    out[..., 1] = p
    out[..., 2] = q
    return out


def apply_generator(B: BlockOperator, s):
    """``(v, w, -alpha w - A(beta v + gamma u + delta w))``."""
    return _wrap(_generator(B, _as_array(B, s)), s)


def apply_generator_inverse(B: BlockOperator, s):
    """The explicit inverse of :func:`apply_generator`.

    Row by row: ``u' = -gamma^-1 (beta p + (delta + alpha A^-1) q + A^-1 r)``,
    ``v' = p``, ``w' = q``.
    """
    return _wrap(_generator_inverse(B, _as_array(B, s)), s)


# -- spectrum ---------------------------------------------------------------

def _cubic_roots(params: MgtParams, lam):
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    L = _companion(params, lam)
    z = np.linalg.eigvals(L)
    a2, a1, a0 = (c[:, None] for c in _cubic_coeffs(params, lam))
    # Newton polish, accepted only where it lowers the residual
    for _ in range(2):
        p = ((z + a2) * z + a1) * z + a0
        dp = (3 * z + 2 * a2) * z + a1
        with np.errstate(all="ignore"):
            znew = z - p / dp
            pnew = ((znew + a2) * znew + a1) * znew + a0
        better = np.isfinite(znew) & (np.abs(pnew) < np.abs(p))
        z = np.where(better, znew, z)
    order = np.lexsort((-z.imag, -z.real), axis=-1)
    return np.take_along_axis(z, order, axis=-1)


def cubic_residual(params: MgtParams, lam, z):
    """Relative residual ``|p(z)| / (|z|^3 + |a2 z^2| + |a1 z| + |a0|)``."""
    a2, a1, a0 = _cubic_coeffs(params, lam)
    a2, a1, a0 = (np.asarray(c)[..., None] for c in (a2, a1, a0))
    p = ((z + a2) * z + a1) * z + a0
    scale = np.abs(z) ** 3 + np.abs(a2 * z * z) + np.abs(a1 * z) + np.abs(a0)
    return np.abs(p) / np.maximum(scale, 1e-300)


def spectrum_condition(B: BlockOperator) -> np.ndarray:
    """Per-mode condition number of the eigenvector matrix of ``L_k``."""
    _, V = np.linalg.eig(B.L)
    return np.linalg.cond(V)


def spectrum(B: BlockOperator) -> np.ndarray:
    """``(n_modes, 3)`` complex roots of the per-mode cubics, largest real part first.

    Warns with the condition estimate when a mode has near-multiple roots.
    """
    z = B.roots
    res = cubic_residual(B.params, B.lambdas, z)
    if np.any(res > 1e-9):
        k = int(np.argmax(res.max(axis=-1)))
        raise ArithmeticError(f"cubic root residual {res.max():.3e} too large at mode {k}")
    gaps = np.min(np.abs(z[:, [0, 0, 1]] - z[:, [1, 2, 2]]), axis=-1)
    near = gaps < 1e-6 * np.maximum(1.0, np.abs(z).max(axis=-1))
    if np.any(near):
        cond = spectrum_condition(B)
        k = int(np.flatnonzero(near)[0])
        warnings.warn(
            f"near-multiple roots at mode {k} (eigenvector condition {cond[k]:.3e})",
            RuntimeWarning,
            stacklevel=2,
        )
    return z


def stability_condition(params: MgtParams, lambda0: float):
    """``gamma / (alpha + delta lambda0) < beta`` and the margin ``chi``.

    ``chi = beta (alpha + delta lambda0) - gamma``; the condition holds iff ``chi > 0``.
    """
    if not lambda0 > 0:
        raise ValueError("lambda0 must be positive")
    a, b, g, d = params.astuple()
    return bool(g / (a + d * lambda0) < b), b * (a + d * lambda0) - g


def routh_hurwitz(params: MgtParams, lam: float) -> bool:
    a2, a1, a0 = _cubic_coeffs(params, lam)
    return bool(a2 > 0 and a1 > 0 and a0 > 0 and a2 * a1 > a0)


def resolvent_apply(B: BlockOperator, z: complex, s):
    """Solve ``(z I - L_k) x_k = s_k`` for every mode."""
    x = _as_array(B, s)
    dist = np.abs(B.roots - z).min(axis=-1)
    bad = np.flatnonzero(dist <= 1e-12 * max(1.0, abs(z)))
    if bad.size:
        raise ZeroDivisionError(f"z = {z} is (numerically) an eigenvalue of mode {int(bad[0])}")
    M = z * np.eye(3) - B.L
    out = np.linalg.solve(M, x[..., None].astype(complex))[..., 0]
    if np.isreal(z):
        out = out.real
    return _wrap(out, s)


# -- norms ------------------------------------------------------------------

def _weighted_norm(x, w):
    return np.sqrt(np.sum(np.abs(x * w) ** 2, axis=(-2, -1)))


def y_norm(B: BlockOperator, s) -> float:
    """``||u||_{1/2}^2 + ||v||_{1/2}^2 + ||w||_0^2``, square-rooted."""
    return _weighted_norm(_as_array(B, s), B.y_weights)


def y_minus1_norm(B: BlockOperator, s) -> float:
    """Product norm of ``X^{1/2} x X^{1/2} x X^{-1/2}``."""
    return _weighted_norm(_as_array(B, s), B.y_minus1_weights)


def y_inner(B: BlockOperator, s1, s2) -> float:
    x1, x2 = _as_array(B, s1), _as_array(B, s2)
    return np.sum(B.y_weights**2 * x1 * x2, axis=(-2, -1))


def accretivity_form(B: BlockOperator, s) -> float:
    """``(G s, s)_Y`` for the displayed action ``G``."""
    x = _as_array(B, s)
    return float(y_inner(B, _generator(B, x), x))


def noncompactness_witness(B: BlockOperator, n_family: int) -> float:
    """Minimum pairwise Y-distance of ``G^-1 (u_n, 0, 0)``, ``u_n = lambda_n^{-1/2} e_n``.

    The family ``u_n`` is orthonormal in ``X^{1/2}`` and the images stay a
    fixed distance ``sqrt(2 (1 + (beta/gamma)^2))`` apart.
    """
    if not 2 <= n_family <= B.n_modes:
        raise ValueError("need 2 <= n_family <= n_modes")
    idx = np.arange(n_family)
    family = np.zeros((n_family, B.n_modes, 3))
    family[idx, idx, 0] = B.lambdas[:n_family] ** -0.5
    images = _generator_inverse(B, family)
    flat = (images * B.y_weights).reshape(n_family, -1)
    gram = flat @ flat.T
    diag = np.diag(gram)
    d2 = diag[:, None] + diag[None, :] - 2 * gram
    d2[idx, idx] = np.inf
    dmin = float(np.sqrt(d2.min()))
    expected = math.sqrt(2 * (1 + (B.params.beta / B.params.gamma) ** 2))
    if abs(dmin - expected) > 1e-10:
        raise AssertionError(f"witness distance {dmin!r} != {expected!r}")
    return dmin


def _weighted_mode_matrices(B: BlockOperator):
    """Per-mode matrix of ``G^-1`` from ``Y_(-1)`` coordinates to ``Y`` coordinates."""
    Linv = np.linalg.inv(B.L)
    return B.y_weights[:, :, None] * Linv / B.y_minus1_weights[:, None, :]


def norm_equivalence_bounds(B: BlockOperator):
    """Exact ``(c, C)`` with ``c ||s||_{-1} <= ||G^-1 s||_Y <= C ||s||_{-1}``."""
    sv = np.linalg.svd(_weighted_mode_matrices(B), compute_uv=False)
    return float(sv[:, -1].min()), float(sv[:, 0].max())


def norm_equivalence_sample(B: BlockOperator, rng: np.random.Generator, n_samples: int = 1000):
    """Ratios ``||G^-1 s||_Y / ||s||_{Y(-1)}`` over random states.

    Each sample mixes a random dense state (scaled to unit ``Y_(-1)`` weight per
    mode) with a spike on a log-uniformly chosen mode, so both the bulk and the
    individual low modes are visited.
    """
    n = B.n_modes
    ratios = np.empty(n_samples)
    for i in range(n_samples):
        x = rng.standard_normal((n, 3)) / B.y_minus1_weights
        x *= rng.uniform(0, 1) / max(y_minus1_norm(B, x), 1e-300)
        k = min(int(np.exp(rng.uniform(0, np.log(n)))), n - 1)
        x[k] += rng.standard_normal(3) / B.y_minus1_weights[k]
        ratios[i] = y_norm(B, _generator_inverse(B, x)) / y_minus1_norm(B, x)
    return ratios


# -- fractional powers ------------------------------------------------------

def _require_stable(B: BlockOperator):
    if not B.is_stable:
        raise UnstableParametersError(_UNSTABLE_MSG)


def _frac_matrices_fc(B: BlockOperator, p: float, cond_limit: float = 1e8):
    """``AA_k^p = V diag(z_i^p) V^-1`` with ``z_i`` the eigenvalues of ``-L_k``."""
    _require_stable(B)
    if p == 0:
        return np.broadcast_to(np.eye(3), B.L.shape).copy()
    if p == 1:
        return -np.array(B.L)
    if p == -1:
        return -np.linalg.inv(B.L)
    z, V = np.linalg.eig(-B.L)
    cond = np.linalg.cond(V)
    zp = np.exp(p * np.log(z.astype(complex)))  # principal branch
    M = np.einsum("kij,kj,kjl->kil", V, zp, np.linalg.inv(V))
    ill = cond > cond_limit
    if np.any(ill):
        warnings.warn(
            f"{int(ill.sum())} modes have ill-conditioned eigenvectors; using quadrature there",
            RuntimeWarning,
            stacklevel=3,
        )
        M[ill] = _frac_matrices_quad(B, p, modes=np.flatnonzero(ill))
    return _realify(M)


def _realify(M, tol=1e-10):
    scale = max(1.0, float(np.abs(M.real).max()))
    imag = float(np.abs(M.imag).max()) if np.iscomplexobj(M) else 0.0
    if imag > tol * scale:
        raise ArithmeticError(f"fractional power has imaginary residue {imag:.3e}")
    return np.ascontiguousarray(M.real)


def frac_block_power_fc(B: BlockOperator, a: float, s):
    """``AA^-a s`` by the eigen-decomposition functional calculus, ``0 < a <= 1``."""
    if not 0 < a <= 1:
        raise ValueError("a must lie in (0, 1]")
    x = _as_array(B, s)
    M = B.frac_matrices(-a)
    return _wrap(np.einsum("kij,...kj->...ki", M, x), s)


def _gl_rule(order=20):
    return np.polynomial.legendre.leggauss(order)


def _tau_panels(t_lo, t_hi, freq, width=0.5):
    """Panel edges in ``tau = log t``; panels shrink where ``freq * t`` is large."""
    edges = [math.log(t_lo)]
    top = math.log(t_hi)
    while edges[-1] < top:
        t = math.exp(edges[-1])
        h = min(width, math.log1p(6.0 / max(freq * t, 1e-300)))
        edges.append(min(edges[-1] + h, top))
    return np.array(edges)


def _frac_matrices_quad(B: BlockOperator, p: float, modes=None, tail_tol: float = 1e-10):
    """Per-mode ``AA_k^p`` for ``-1 < p < 1`` by the Gamma-weighted semigroup integral.

    ``AA^-a = Gamma(a)^-1 int_0^inf t^(a-1) e^{L t} dt`` after ``t = e^tau``;
    positive powers use ``AA^a = (-L) AA^-(1-a)``.
    """
    from .semigroup import mode_expm

    if p == 0:
        return np.broadcast_to(np.eye(3), (B.n_modes if modes is None else len(modes), 3, 3)).copy()
    modes = np.arange(B.n_modes) if modes is None else np.asarray(modes)
    L = np.asarray(B.L)[modes]
    a = -p if p < 0 else 1 - p
    if not 0 < a < 1:
        raise ValueError("quadrature route needs a fractional exponent in (-1, 1)")
    roots = B.roots[modes]
    decay = float(-roots.real.max())
    if decay <= 0:
        raise UnstableParametersError(_UNSTABLE_MSG)
    _, V = np.linalg.eig(L)
    growth = float(np.linalg.cond(V).max())
    ga = gamma_fn(a)
    # lower cut: int_0^t0 t^(a-1) ||e^{Lt}|| dt <= 2 t0^a / a
    t_lo = (tail_tol * a * ga / 2.0) ** (1.0 / a)
    # upper cut: K int_T^inf t^(a-1) e^{-c t} dt <= K T^(a-1) e^{-cT} / c
    t_hi = 1.0 / decay
    while growth * t_hi ** (a - 1) * math.exp(-decay * t_hi) / decay > tail_tol * ga:
        t_hi *= 1.25
    freq = float(np.abs(roots.imag).max())
    edges = _tau_panels(t_lo, t_hi, freq)
    xg, wg = _gl_rule()
    mid, half = 0.5 * (edges[1:] + edges[:-1]), 0.5 * (edges[1:] - edges[:-1])
    tau = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    wts = (half[:, None] * wg[None, :]).ravel() * np.exp(a * tau) / ga
    acc = np.zeros_like(L)
    for chunk in np.array_split(np.arange(tau.size), max(1, tau.size // 256)):
        E = mode_expm(L[None, :, :, :] * np.exp(tau[chunk])[:, None, None, None], 1.0)
        acc += np.einsum("c,ckij->kij", wts[chunk], E)
    if p > 0:
        acc = np.einsum("kij,kjl->kil", -L, acc)
    return acc


def frac_block_power_quad(B: BlockOperator, a: float, s):
    """``AA^-a s`` by Gauss-Legendre quadrature of the semigroup integral, ``0 < a < 1``."""
    if not 0 < a < 1:
        raise ValueError("a must lie in (0, 1)")
    _require_stable(B)
    x = _as_array(B, s)
    M = _frac_matrices_quad(B, -a)
    return _wrap(np.einsum("kij,...kj->...ki", M, x), s)


def y_alpha_norm(B: BlockOperator, a: float, s) -> float:
    """Graph norm ``||AA^a s||`` in ``Y_(-1)`` for ``0 <= a <= 1``."""
    if not 0 <= a <= 1:
        raise ValueError("a must lie in [0, 1]")
    x = _as_array(B, s)
    if a == 0:
        return y_minus1_norm(B, x)
    _require_stable(B)
    if a == 1:
        return y_minus1_norm(B, _generator(B, x))
    M = B.frac_matrices(a)
    return y_minus1_norm(B, np.einsum("kij,...kj->...ki", M, x))
