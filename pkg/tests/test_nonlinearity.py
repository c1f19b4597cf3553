import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from mgtsim.block_system import BlockOperator, MgtParams, y_alpha_norm
from mgtsim.nonlinearity import (
    PRESETS,
    F_local_lipschitz_probe,
    Nonlinearity,
    ScalarFn,
    apply_F,
    apply_Fbar,
    growth_check,
    lemma_lipschitz_probe,
    mv_lipschitz_check,
    random_smooth_state,
    scalar,
    subcritical_exponent,
)
from mgtsim.spectral_core import make_sequence_operator

from conftest import dirichlet_block

ZERO = scalar("zero")
C = np.sqrt(2 / np.pi)


def only(fn, slot=1, **kw):
    fns = [ZERO, ZERO, ZERO]
    fns[slot - 1] = fn
    return Nonlinearity(*fns, **kw)


def sine_projection(g, n):
    return np.array([quad(lambda t: g(t) * C * np.sin(k * t), 0, np.pi, epsabs=1e-14, limit=200)[0]
                     for k in range(1, n + 1)])


def test_subcritical_exponent():
    assert subcritical_exponent(3, 1) == 5
    assert subcritical_exponent(5, 2) == 9
    with pytest.raises(ValueError, match="supercritical dimension constraint violated"):
        subcritical_exponent(2, 1)


def test_nonlinearity_invariants():
    with pytest.raises(ValueError, match="rho must exceed 1"):
        Nonlinearity.from_preset("cubic", rho=1.0)
    with pytest.raises(ValueError, match="cap"):
        Nonlinearity.from_preset("cubic", rho=5.5)
    Nonlinearity.from_preset("cubic", rho=5.5, enforce_cap=False)
    with pytest.raises(ValueError, match="globally Lipschitz"):
        Nonlinearity(ZERO, ZERO, scalar("cubic"))
    with pytest.raises(ValueError, match="unknown"):
        Nonlinearity.from_preset("nope")
    for name in PRESETS:
        nl = Nonlinearity.from_preset(name)
        assert all(fn.f(np.zeros(1))[0] == 0 for fn in nl.funcs)


# -- pointwise probes -----------------------------------------------------------

@pytest.mark.parametrize("rho", [1.5, 2.0, 3.0, 4.5])
def test_growth_pure_power(rho):
    g = growth_check(Nonlinearity.from_preset("pure_power", rho=rho), 1)
    assert not g.flagged
    assert g.c <= rho * (rho - 1) * (1 + 1e-3)
    # the supremum of |f''| / (1 + |s|^(rho-2)) is reached at 0 or infinity, except rho = 2 where both terms are 1
    expected = rho * (rho - 1) / (2 if rho == 2 else 1)
    assert g.c >= 0.9 * expected


def test_growth_sine_and_supercritical():
    g = growth_check(only(scalar("sine"), rho=2.0), 1)
    assert g.c <= 1 and not g.flagged
    g = growth_check(Nonlinearity.from_preset("quintic_supercritical", rho=3.0), 1)
    assert g.flagged
    with pytest.raises(ValueError):
        growth_check(Nonlinearity.from_preset("cubic"), 3)


def test_mean_value_lipschitz(rng):
    for rho in (2.0, 3.0, 4.0):
        c = mv_lipschitz_check(Nonlinearity.from_preset("pure_power", rho=rho), 1, rng=rng)
        assert 0 < c <= 2**rho * rho
    # equal pairs are excluded rather than counted as 0/0
    nl = only(scalar("saturating"), slot=1)
    assert np.isfinite(mv_lipschitz_check(nl, 1, pairs=10, rng=rng))


def test_saturating_bound_is_global(rng):
    nl = only(scalar("saturating"), slot=3)
    s = np.linspace(-1e4, 1e4, 100001)
    assert np.max(np.abs(np.diff(nl.f3.f(s)) / np.diff(s))) <= nl.f3.lipschitz


# -- collocation -----------------------------------------------------------------

def test_apply_F_structure(B16, rng):
    nl = Nonlinearity.from_preset("full")
    x = random_smooth_state(B16, rng, 1.0, 0.75)
    F = apply_F(B16, nl, x)
    assert not F[:, :2].any()
    assert np.array_equal(F, apply_F(B16, nl, x))


def test_apply_F_zero_and_identity(B16, rng):
    x = rng.standard_normal((16, 3))
    assert not apply_F(B16, Nonlinearity.from_preset("zero"), x).any()
    F = apply_F(B16, only(scalar("linear")), x)
    np.testing.assert_allclose(F[:, 2], x[:, 0], atol=1e-10)


def test_apply_F_needs_collocation():
    B = BlockOperator(make_sequence_operator([1.0, 2.0]), MgtParams(1, 2, 1, 1))
    with pytest.raises(ValueError, match="nonlinear dynamics require a collocation model"):
        apply_F(B, Nonlinearity.from_preset("cubic"), np.zeros((2, 3)))


def test_cubic_single_mode_exact(B16):
    x = np.zeros((16, 3))
    x[0, 0] = 1.0
    F = apply_F(B16, Nonlinearity.from_preset("cubic"), x)[:, 2]
    oracle = sine_projection(lambda t: -(C * np.sin(t)) ** 3, 16)
    np.testing.assert_allclose(F, oracle, atol=1e-13)


def test_square_single_mode_aliasing_bound(B16):
    """Even powers are not band-limited in the sine basis: coefficients decay like k^-3.

    On the 3/2 grid the projection error is a few 1e-5 and falls like M^-4 with grid size M.
    """
    sq = ScalarFn("square", lambda s: s**2, lambda s: 2 * s, dealias=1.5)
    nl = only(sq)
    x = np.zeros((16, 3))
    x[0, 0] = 1.0
    oracle = sine_projection(lambda t: (C * np.sin(t)) ** 2, 16)
    err = {g: np.abs(apply_F(B16, nl, x, grid_factor=g)[:, 2] - oracle).max() for g in (1.5, 4, 16)}
    assert err[1.5] < 1e-4
    assert err[4] < err[1.5] / 50 and err[16] < err[4] / 100
    assert err[16] < 1e-8


@pytest.mark.parametrize("preset", ["cubic", "pure_power", "quintic_supercritical"])
def test_polynomial_dealiasing_exact(preset, rng):
    B = dirichlet_block(24)
    nl = Nonlinearity.from_preset(preset)
    x = rng.standard_normal((24, 3)) * 0.3
    a = apply_F(B, nl, x)
    b = apply_F(B, nl, x, grid_factor=4 * nl.dealias)
    np.testing.assert_allclose(a, b, atol=1e-12 * max(1, np.abs(b).max()))


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(sorted(PRESETS)), st.integers(0, 2**32 - 1))
def test_grid_extension_invariance_smooth_data(preset, seed):
    B = dirichlet_block(32)
    nl = Nonlinearity.from_preset(preset)
    x = random_smooth_state(B, np.random.default_rng(seed), 1.0, 0.75)
    a = apply_F(B, nl, x)
    b = apply_F(B, nl, x, grid_factor=3 * nl.dealias)
    assert np.abs(a - b).max() <= 1e-9


def test_apply_Fbar_chain_rule(B16, rng):
    nl = Nonlinearity.from_preset("full")
    x = random_smooth_state(B16, rng, 0.5, 0.75)
    z = rng.standard_normal(16) * np.arange(1, 17) ** -3.0
    dxdt = np.stack([x[:, 1], x[:, 2], z], axis=-1)
    h = 1e-6
    fd = (apply_F(B16, nl, x + h * dxdt)[:, 2] - apply_F(B16, nl, x - h * dxdt)[:, 2]) / (2 * h)
    x4 = np.concatenate([x, z[:, None]], axis=-1)
    np.testing.assert_allclose(apply_Fbar(B16, nl, x4), fd, atol=1e-8)


# -- function-space probes ---------------------------------------------------------

def test_lemma_probe(rng):
    B = dirichlet_block(32)
    c = lemma_lipschitz_probe(B, Nonlinearity.from_preset("pure_power", rho=3.0), pairs=200, rng=rng, max_norm=5)
    assert np.isfinite(c.c) and c.c > 0
    assert {"norm_u1", "norm_u2", "norm_diff"} <= set(c.at)
    # linear f: the ratio is the L^p / H^m comparison on the grid, at most |Omega|^(1/p - 1/2) / sqrt(lambda0)
    lin = lemma_lipschitz_probe(B, only(scalar("linear")), pairs=100, rng=rng, which=(1,))
    p = 2 * 3 / (3 + 2)
    assert lin.c <= np.pi ** (1 / p - 0.5) * (1 + 1e-9)


def test_lemma_probe_stable_under_grid_doubling():
    nl = Nonlinearity.from_preset("pure_power", rho=3.0)
    c32 = lemma_lipschitz_probe(dirichlet_block(32), nl, pairs=200, rng=np.random.default_rng(5)).c
    c64 = lemma_lipschitz_probe(dirichlet_block(64), nl, pairs=200, rng=np.random.default_rng(5)).c
    assert abs(c64 / c32 - 1) <= 0.2


def test_F_local_probe_f3_only(rng):
    B = dirichlet_block(16)
    nl = only(scalar("saturating"), slot=3)
    c = F_local_lipschitz_probe(B, nl, 1.0, pairs=60, rng=rng)
    assert np.isfinite(c.c) and c.c <= nl.f3.lipschitz * 10


def test_F_local_probe_growth_with_radius():
    B = dirichlet_block(16)
    nl = Nonlinearity.from_preset("full")
    c1 = F_local_lipschitz_probe(B, nl, 1.0, pairs=60, rng=np.random.default_rng(1)).c
    c4 = F_local_lipschitz_probe(B, nl, 4.0, pairs=60, rng=np.random.default_rng(1)).c
    assert c4 / c1 <= 3 * (1 + 4.0 ** (nl.rho - 1)) / 2


def test_random_smooth_state_radius(B16, rng):
    x = random_smooth_state(B16, rng, 2.5, 0.75)
    assert y_alpha_norm(B16, 0.75, x) == pytest.approx(2.5, rel=1e-12)
    assert not x[8:].any()
