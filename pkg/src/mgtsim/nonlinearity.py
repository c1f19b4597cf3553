"""Structured nonlinearity ``f(u, v, w) = f1(u) + f2(v) + f3(w)``.

Scalar functions come from a small gallery (or are supplied directly) and are
applied pointwise on a collocation grid; :func:`apply_F` lifts the result
into the third state component.  The probes estimate the constants of the
growth and Lipschitz estimates from samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .block_system import BlockOperator, _as_array, _wrap, y_alpha_norm, y_minus1_norm
from .spectral_core import SpectralOperator, TransformPair, frac_norm

__all__ = [
    "ScalarFn",
    "Nonlinearity",
    "GALLERY",
    "PRESETS",
    "scalar",
    "subcritical_exponent",
    "growth_check",
    "mv_lipschitz_check",
    "apply_F",
    "apply_Fbar",
    "lemma_lipschitz_probe",
    "F_local_lipschitz_probe",
]


def subcritical_exponent(N: int, m: int) -> float:
    """``(N + 2m) / (N - 2m)``; requires ``N > 2m``."""
    if N <= 2 * m:
        raise ValueError(f"supercritical dimension constraint violated: need N > 2m, got N={N}, m={m}")
    return (N + 2 * m) / (N - 2 * m)


@dataclass(frozen=True)
class ScalarFn:
    """A scalar function with its derivative and the grid factor it needs.

    ``dealias`` is the collocation-grid oversampling that keeps products
    alias-free: ``(p + 1) / 2`` for an odd polynomial of degree ``p``,
    2 for non-polynomial functions.
    """

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    dealias: float = 2.0
    lipschitz: float | None = None  # global Lipschitz constant, if any
    vanishes_at_zero: bool = True


def _pure_power(rho):
    return ScalarFn(
        f"pure_power({rho:g})",
        lambda s: s * np.abs(s) ** (rho - 1),
        lambda s: rho * np.abs(s) ** (rho - 1),
        dealias=(rho + 1) / 2 if float(rho).is_integer() and rho % 2 == 1 else 2.0,
    )


GALLERY: dict[str, Callable[[float], ScalarFn]] = {
    "zero": lambda rho: ScalarFn("zero", np.zeros_like, np.zeros_like, dealias=1.0, lipschitz=0.0),
    "linear": lambda rho: ScalarFn("linear", lambda s: 1.0 * s, np.ones_like, dealias=1.0, lipschitz=1.0),
    "pure_power": _pure_power,
    "cubic": lambda rho: ScalarFn("cubic", lambda s: -(s**3), lambda s: -3 * s**2, dealias=2.0),
    "sine": lambda rho: ScalarFn("sine", np.sin, np.cos, lipschitz=1.0),
    "saturating": lambda rho: ScalarFn(
        "saturating", lambda s: s / (1 + s**2), lambda s: (1 - s**2) / (1 + s**2) ** 2, lipschitz=1.0
    ),
    "quintic": lambda rho: ScalarFn("quintic", lambda s: s**5, lambda s: 5 * s**4, dealias=3.0),
}

# named (f1, f2, f3) combinations selectable from a config file
PRESETS: dict[str, tuple[str, str, str]] = {
    "zero": ("zero", "zero", "zero"),
    "cubic": ("cubic", "zero", "zero"),
    "pure_power": ("pure_power", "zero", "zero"),
    "full": ("cubic", "sine", "saturating"),
    "saturating": ("zero", "zero", "saturating"),
    # growth s^5 declared with a smaller rho: designed to fail the growth check
    "quintic_supercritical": ("quintic", "zero", "zero"),
}


def scalar(name: str, rho: float = 3.0) -> ScalarFn:
    try:
        return GALLERY[name](rho)
    except KeyError:
        raise ValueError(f"unknown gallery function {name!r}; choose from {sorted(GALLERY)}") from None


def _scaled(fn: ScalarFn, eps: float) -> ScalarFn:
    lip = None if fn.lipschitz is None else abs(eps) * fn.lipschitz
    return ScalarFn(f"{eps:g}*{fn.name}", lambda s: eps * fn.f(s), lambda s: eps * fn.df(s), fn.dealias, lip)


@dataclass(frozen=True)
class Nonlinearity:
    f1: ScalarFn
    f2: ScalarFn
    f3: ScalarFn
    rho: float = 3.0
    N: int = 3
    m: int = 1
    enforce_cap: bool = True
    name: str = "custom"

    def __post_init__(self):
        if not self.rho > 1:
            raise ValueError("rho must exceed 1")
        if self.enforce_cap:
            cap = subcritical_exponent(self.N, self.m)
            if self.rho > cap:
                raise ValueError(f"rho = {self.rho} exceeds the subcritical cap (N+2m)/(N-2m) = {cap:g}")
        if self.f3.lipschitz is None:
            raise ValueError(f"f3 must be globally Lipschitz; {self.f3.name!r} has no Lipschitz bound")

    @classmethod
    def from_preset(cls, name: str, rho: float = 3.0, N: int = 3, m: int = 1, scale: float = 1.0, **kw):
        try:
            names = PRESETS[name]
        except KeyError:
            raise ValueError(f"unknown nonlinearity preset {name!r}; choose from {sorted(PRESETS)}") from None
        fns = [scalar(nm, rho) for nm in names]
        if scale != 1.0:
            fns = [_scaled(fn, scale) for fn in fns]
        return cls(*fns, rho=rho, N=N, m=m, name=name, **kw)

    @property
    def funcs(self):
        return (self.f1, self.f2, self.f3)

    @property
    def dealias(self) -> float:
        return max(fn.dealias for fn in self.funcs)

    @property
    def is_zero(self) -> bool:
        return all(fn.name == "zero" for fn in self.funcs)

    def __call__(self, u, v, w):
        return self.f1.f(u) + self.f2.f(v) + self.f3.f(w)


# -- pointwise probes ---------------------------------------------------------

def _second_difference(f, s):
    h = 1e-4 * np.maximum(1.0, np.abs(s))
    return (f(s + h) - 2 * f(s) + f(s - h)) / h**2


@dataclass
class GrowthCheck:
    c: float            # max of |f''(s)| / (1 + |s|^(rho-2)) over the samples
    slope: float        # log-log slope of the ratio envelope for |s| >= 1
    flagged: bool


def growth_check(nl: Nonlinearity, which: int, sample_count: int = 2000, range_: float = 100.0) -> GrowthCheck:
    """Fit ``c`` in ``|f_i''(s)| <= c (1 + |s|^(rho-2))``.

    The ratio envelope is measured on dyadic shells of ``|s|``; a clearly
    positive log-log slope means the growth exceeds ``rho - 2`` and the
    estimate cannot hold with any constant.
    """
    if which not in (1, 2):
        raise ValueError("growth estimates apply to f1 and f2")
    fn = nl.funcs[which - 1]
    mag = np.geomspace(1e-3, range_, sample_count // 2)
    s = np.concatenate([-mag[::-1], mag])
    with np.errstate(all="ignore"):
        ratio = np.abs(_second_difference(fn.f, s)) / (1 + np.abs(s) ** (nl.rho - 2))
    if not np.all(np.isfinite(ratio)):
        return GrowthCheck(float("inf"), float("inf"), True)
    shells = np.arange(0, math.floor(math.log2(range_)))
    env, centers = [], []
    for j in shells:
        sel = (np.abs(s) >= 2.0**j) & (np.abs(s) < 2.0 ** (j + 1))
        if sel.any():
            env.append(ratio[sel].max())
            centers.append(2.0**j * 1.5)
    slope = 0.0
    if len(env) >= 3 and min(env) > 0:
        slope = float(np.polyfit(np.log(centers), np.log(env), 1)[0])
    return GrowthCheck(float(ratio.max()), slope, slope > 0.25)


def mv_lipschitz_check(nl: Nonlinearity, which: int, pairs: int = 2000,
                       rng: np.random.Generator | None = None, range_: float = 20.0) -> float:
    """Max of ``|f(s1)-f(s2)| / ((1 + |s1|^(rho-1) + |s2|^(rho-1)) |s1-s2|)``; equal pairs are skipped."""
    rng = np.random.default_rng(0) if rng is None else rng
    fn = nl.funcs[which - 1]
    s1 = rng.uniform(-range_, range_, pairs) * rng.uniform(0, 1, pairs) ** 2
    s2 = np.where(rng.uniform(size=pairs) < 0.5, rng.uniform(-range_, range_, pairs), s1 + rng.normal(0, 1e-2, pairs))
    d = np.abs(s1 - s2)
    keep = d > 0
    num = np.abs(fn.f(s1[keep]) - fn.f(s2[keep]))
    den = (1 + np.abs(s1[keep]) ** (nl.rho - 1) + np.abs(s2[keep]) ** (nl.rho - 1)) * d[keep]
    return float(np.max(num / den)) if keep.any() else 0.0


# -- collocation ---------------------------------------------------------------

def _dealias_transform(op: SpectralOperator, nl: Nonlinearity, grid_factor: float | None = None):
    if op.transform is None:
        raise ValueError("nonlinear dynamics require a collocation model")
    factor = nl.dealias if grid_factor is None else grid_factor
    return TransformPair(max(op.n_modes, math.ceil(factor * op.n_modes)))


def _collocate(B: BlockOperator, nl: Nonlinearity, x, grid_factor=None):
    tp = _dealias_transform(B.op, nl, grid_factor)
    grid_vals = tp.synthesize(np.moveaxis(x, -1, -2))  # (..., 3, M)
    return tp, grid_vals


def apply_F(B: BlockOperator, nl: Nonlinearity, s, grid_factor: float | None = None):
    """``(0, 0, P_n f(u, v, w))`` by collocation on an oversampled sine grid."""
    x = _as_array(B, s)
    out = np.zeros_like(x, dtype=float)
    if nl.is_zero:
        if B.op.transform is None:
            raise ValueError("nonlinear dynamics require a collocation model")
        return _wrap(out, s)
    tp, g = _collocate(B, nl, x, grid_factor)
    vals = nl(g[..., 0, :], g[..., 1, :], g[..., 2, :])
    out[..., 2] = tp.analyze(vals, B.n_modes)
    return _wrap(out, s)


def apply_Fbar(B: BlockOperator, nl: Nonlinearity, x4):
    """Time derivative of ``f`` along a 4-component state ``(u, v, w, z)``.

    ``f1'(u) v + f2'(v) w + f3'(w) z`` projected onto the modes; ``x4`` has
    shape ``(..., n_modes, 4)``.
    """
    tp = _dealias_transform(B.op, nl)
    g = tp.synthesize(np.moveaxis(np.asarray(x4), -1, -2))
    u, v, w, z = (g[..., i, :] for i in range(4))
    vals = nl.f1.df(u) * v + nl.f2.df(v) * w + nl.f3.df(w) * z
    return tp.analyze(vals, B.n_modes)


# -- function-space probes -------------------------------------------------------

def _smooth_coeffs(rng, n, n_active, size, decay=2.0):
    k = np.arange(1, n + 1)
    c = rng.standard_normal(size + (n,)) * k ** (-decay)
    c[..., n_active:] = 0.0
    return c


@dataclass
class ProbeResult:
    c: float
    at: dict = field(default_factory=dict)


def _lp_norm(tp: TransformPair, vals, p):
    return tp.quadrature(np.abs(vals) ** p) ** (1.0 / p)


def lemma_lipschitz_probe(B: BlockOperator, nl: Nonlinearity, pairs: int = 200,
                          rng: np.random.Generator | None = None, max_norm: float = 5.0,
                          n_active: int = 8, which=(1, 2)) -> ProbeResult:
    """Sampled constant of the ``L^p``/``H^m`` Lipschitz estimate, ``p = 2N/(N+2m)``.

    The ``H^m`` norm is the ``sigma = 1/2`` spectral norm; the ``L^p`` norm is
    grid quadrature on the operator's collocation grid.  Pairs are smooth
    (``n_active`` decaying modes) so the result is comparable across grids.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    tp = B.op.transform
    if tp is None:
        raise ValueError("nonlinear dynamics require a collocation model")
    p = 2 * nl.N / (nl.N + 2 * nl.m)
    best = ProbeResult(0.0)
    n_active = min(n_active, B.n_modes)
    for _ in range(pairs):
        c1, c2 = _smooth_coeffs(rng, B.n_modes, n_active, (2,))
        if rng.uniform() < 0.5:
            c2 = c1 + 1e-2 * c2
        for c in (c1, c2):
            c *= rng.uniform(0, max_norm) / max(frac_norm(B.op, 0.5, c), 1e-300)
        diff = frac_norm(B.op, 0.5, c1 - c2)
        if diff == 0:
            continue
        g1, g2 = tp.synthesize(c1), tp.synthesize(c2)
        h1, h2 = frac_norm(B.op, 0.5, c1), frac_norm(B.op, 0.5, c2)
        for i in which:
            fn = nl.funcs[i - 1]
            num = _lp_norm(tp, fn.f(g1) - fn.f(g2), p)
            ratio = num / ((1 + h1 ** (nl.rho - 1) + h2 ** (nl.rho - 1)) * diff)
            if ratio > best.c:
                best = ProbeResult(float(ratio), {"f": i, "norm_u1": h1, "norm_u2": h2, "norm_diff": diff})
    return best


def random_smooth_state(B: BlockOperator, rng: np.random.Generator, radius: float, alpha_space: float,
                        n_active: int = 8, decay: float = 3.0) -> np.ndarray:
    """Random state with ``y_alpha_norm == radius`` supported on the first modes."""
    n_active = min(n_active, B.n_modes)
    x = np.moveaxis(_smooth_coeffs(rng, B.n_modes, n_active, (3,), decay), 0, -1)
    return x * (radius / y_alpha_norm(B, alpha_space, x))


def F_local_lipschitz_probe(B: BlockOperator, nl: Nonlinearity, radius: float, pairs: int = 200,
                            rng: np.random.Generator | None = None, alpha_space: float = 0.75) -> ProbeResult:
    """Max of ``||F(s1) - F(s2)||_{Y(-1)} / ||s1 - s2||_{Y^alpha(-1)}`` inside the radius ball."""
    rng = np.random.default_rng(0) if rng is None else rng
    best = ProbeResult(0.0)
    for _ in range(pairs):
        x1 = random_smooth_state(B, rng, radius * rng.uniform(0, 1), alpha_space)
        if rng.uniform() < 0.5:
            x2 = random_smooth_state(B, rng, radius * rng.uniform(0, 1), alpha_space)
        else:
            x2 = x1 + random_smooth_state(B, rng, 1e-3 * radius, alpha_space)
            x2 *= min(1.0, radius / y_alpha_norm(B, alpha_space, x2))
        den = y_alpha_norm(B, alpha_space, x1 - x2)
        if den == 0:
            continue
        num = y_minus1_norm(B, apply_F(B, nl, x1) - apply_F(B, nl, x2))
        if num / den > best.c:
            best = ProbeResult(float(num / den), {"norm_s1": y_alpha_norm(B, alpha_space, x1),
                                                  "norm_s2": y_alpha_norm(B, alpha_space, x2)})
    return best
