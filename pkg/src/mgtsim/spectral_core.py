"""Diagonal spectral model of a positive elliptic operator.

The operator ``A`` is represented by its eigenvalues ``lambda_k`` alone; vectors
are finite sequences of eigen-coefficients.  Fractional powers and the norms of
the spaces ``X^sigma = D(A^sigma)`` act componentwise:

    (A^sigma phi)_k = lambda_k^sigma phi_k,
    ||phi||_sigma^2 = sum_k lambda_k^(2 sigma) phi_k^2.

For the Dirichlet model (the m-th power of ``-d^2/dx^2`` on ``(0, pi)``) the
eigenfunctions are ``e_k(x) = sqrt(2/pi) sin(kx)`` and a :class:`TransformPair`
moves between coefficients and values on the interior DST-I grid.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import fft as _fft

__all__ = [
    "TransformPair",
    "SpectralOperator",
    "make_dirichlet_power_operator",
    "make_sequence_operator",
    "apply_frac_power",
    "frac_norm",
    "inner_sigma",
    "embedding_bound",
]

_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TransformPair:
    """Sine-basis synthesis/analysis on ``x_j = j*pi/(n+1)``, ``j = 1..n``.

    ``synthesize`` evaluates ``sum_k phi_k e_k(x_j)``; ``analyze`` is its exact
    inverse (the trapezoid rule with weight ``pi/(n+1)``).  Both accept arrays
    whose *last* axis holds coefficients or grid values, so whole trajectories
    can be transformed at once.
    """

    n: int
    grid: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("transform size must be >= 1")
        object.__setattr__(self, "grid", _readonly(np.arange(1, self.n + 1) * np.pi / (self.n + 1)))

    @property
    def weight(self) -> float:
        return np.pi / (self.n + 1)

    def synthesize(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape[-1] > self.n:
            raise ValueError(f"{coeffs.shape[-1]} coefficients do not fit a {self.n}-point grid")
        if coeffs.shape[-1] < self.n:
            pad = [(0, 0)] * (coeffs.ndim - 1) + [(0, self.n - coeffs.shape[-1])]
            coeffs = np.pad(coeffs, pad)
        # scipy's DST-I carries a factor 2
        return 0.5 * _SQRT_2_OVER_PI * _fft.dst(coeffs, type=1, axis=-1)

    def analyze(self, values, n_modes: int | None = None):
        values = np.asarray(values, dtype=float)
        if values.shape[-1] != self.n:
            raise ValueError(f"expected {self.n} grid values, got {values.shape[-1]}")
        coeffs = 0.5 * self.weight * _SQRT_2_OVER_PI * _fft.dst(values, type=1, axis=-1)
        return coeffs if n_modes is None else coeffs[..., :n_modes]

    def quadrature(self, values):
        """Trapezoid integral over ``(0, pi)`` of grid samples (endpoints are zero)."""
        return self.weight * np.sum(values, axis=-1)


@dataclass(frozen=True)
class SpectralOperator:
    """Positive self-adjoint operator given by a nondecreasing spectrum.

    ``transform`` is present only for the Dirichlet model; operators built from
    a bare eigenvalue list support the linear machinery but not collocation.
    """

    lambdas: np.ndarray
    order_2m: int = 2
    transform: TransformPair | None = None

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.ndim != 1 or lam.size == 0:
            raise ValueError("spectrum must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(lam)) or np.any(lam <= 0):
            raise ValueError("eigenvalues must be positive and finite")
        if np.any(np.diff(lam) < 0):
            raise ValueError("eigenvalues must be nondecreasing")
        if self.order_2m < 2 or self.order_2m % 2:
            raise ValueError("order_2m must be a positive even integer")
        object.__setattr__(self, "lambdas", _readonly(lam))

    @property
    def n_modes(self) -> int:
        return self.lambdas.size

    @property
    def lambda0(self) -> float:
        """Smallest eigenvalue."""
        return float(self.lambdas[0])

    def truncated(self, n_modes: int) -> "SpectralOperator":
        tp = TransformPair(n_modes) if self.transform is not None else None
        return SpectralOperator(self.lambdas[:n_modes], self.order_2m, tp)


def make_dirichlet_power_operator(m: int, n_modes: int) -> SpectralOperator:
    """``(-d^2/dx^2)^m`` on ``(0, pi)`` with Dirichlet conditions: ``lambda_k = k^(2m)``."""
    if m < 1:
        raise ValueError("m must be >= 1")
    if n_modes < 1:
        raise ValueError("n_modes must be >= 1")
    k = np.arange(1, n_modes + 1, dtype=float)
    return SpectralOperator(k ** (2 * m), order_2m=2 * m, transform=TransformPair(n_modes))


def make_sequence_operator(lambdas) -> SpectralOperator:
    return SpectralOperator(np.asarray(lambdas, dtype=float))


def _weights(op: SpectralOperator, sigma: float, n: int):
    if n > op.n_modes:
        raise ValueError(f"vector has {n} coefficients but operator has {op.n_modes} modes")
    return op.lambdas[:n] ** sigma


def apply_frac_power(op: SpectralOperator, sigma: float, phi):
    phi = np.asarray(phi, dtype=float)
    return _weights(op, sigma, phi.shape[-1]) * phi


def frac_norm(op: SpectralOperator, sigma: float, phi) -> float:
    phi = np.asarray(phi, dtype=float)
    return float(np.sqrt(np.sum((_weights(op, sigma, phi.shape[-1]) * phi) ** 2)))


def inner_sigma(op: SpectralOperator, sigma: float, phi, psi) -> float:
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if phi.shape != psi.shape:
        raise ValueError(f"length mismatch: {phi.shape} vs {psi.shape}")
    return float(np.sum(_weights(op, 2 * sigma, phi.shape[-1]) * phi * psi))


def embedding_bound(op: SpectralOperator, sigma1: float, sigma2: float, phi):
    """Check ``||phi||_{sigma2} <= lambda0^(sigma2-sigma1) ||phi||_{sigma1}``.

    Returns ``(lhs, rhs)``; raises ``AssertionError`` if the bound fails.
    """
    if sigma1 < sigma2:
        raise ValueError("embedding requires sigma1 >= sigma2")
    lhs = frac_norm(op, sigma2, phi)
    rhs = op.lambda0 ** (sigma2 - sigma1) * frac_norm(op, sigma1, phi)
    if lhs > rhs * (1 + 1e-12):
        raise AssertionError(f"embedding bound violated: {lhs} > {rhs}")
    return lhs, rhs
