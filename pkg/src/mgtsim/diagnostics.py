"""Property-suite runner: every structural claim about the model as one pass/fail report."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import block_system as bs
from .block_system import BlockOperator, MgtParams, UnstableParametersError
from .config import RunConfig
from .mild_solver import augmented_solve, picard_solve, reference_integrate
from .nonlinearity import (
    F_local_lipschitz_probe,
    growth_check,
    lemma_lipschitz_probe,
    mv_lipschitz_check,
    random_smooth_state,
)
from .semigroup import decay_rate, evolve_linear, sectoriality_probe
from .spectral_core import apply_frac_power, embedding_bound, frac_norm, inner_sigma, make_sequence_operator

__all__ = [
    "Entry",
    "Report",
    "run_suite",
    "CHECKS",
    "random_stability_draw",
    "stability_ensemble",
    "PROBE_ANGLES",
    "PROBE_RADII",
]

PROBE_ANGLES = np.array([0.0, 0.25, 0.5, 0.55]) * np.pi
PROBE_RADII = np.geomspace(1e-3, 1e6, 61)


@dataclass(frozen=True)
class Entry:
    name: str
    anchor: str          # the mathematical statement checked, or "plumbing"
    status: str          # pass | fail | skip
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in ("pass", "fail", "skip"):
            raise ValueError(f"bad status {self.status!r}")
        if not self.anchor:
            raise ValueError("every entry needs an anchor")


@dataclass
class Report:
    entries: list
    seed: int
    config_digest: str

    @property
    def passed(self) -> bool:
        return all(e.status != "fail" for e in self.entries)

    @property
    def failures(self):
        return [e for e in self.entries if e.status == "fail"]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "config_digest": self.config_digest,
            "passed": self.passed,
            "entries": [
                {"name": e.name, "anchor": e.anchor, "status": e.status, "values": _jsonable(e.values)}
                for e in self.entries
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, allow_nan=True) + "\n"


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, complex):
        return [v.real, v.imag]
    return v


def _status(ok: bool) -> str:
    return "pass" if ok else "fail"


def _random_states(B, rng, count):
    return rng.standard_normal((count, B.n_modes, 3)) / B.y_weights


# -- stability ensemble (shared with the acceptance tests) ---------------------

def random_stability_draw(rng: np.random.Generator, max_modes: int = 5):
    """Random parameters and a short ``lambda0 k^2`` spectrum; both regimes occur."""
    p = np.exp(rng.uniform(np.log(0.1), np.log(10.0), 4))
    lam0 = math.exp(rng.uniform(math.log(0.2), math.log(5.0)))
    nm = int(rng.integers(1, max_modes + 1))
    lams = lam0 * np.arange(1, nm + 1, dtype=float) ** 2
    return MgtParams(*p), lams


def stability_ensemble(rng: np.random.Generator, draws: int, horizon: float = 50.0, max_modes: int = 5):
    """Run the four stability tests on random draws.

    Returns one record per draw with the condition, Routh-Hurwitz, root-sign
    and measured-decay verdicts, plus the fit error for single-mode draws.
    """
    out = []
    for _ in range(draws):
        params, lams = random_stability_draw(rng, max_modes)
        B = BlockOperator(make_sequence_operator(lams), params)
        cond, chi = bs.stability_condition(params, lams[0])
        rh = all(bs.routh_hurwitz(params, lam) for lam in lams)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            roots = bs.spectrum(B)
        re_neg = bool(roots.real.max() < 0)
        fit = decay_rate(B, horizon)
        rel = abs(fit.omega + fit.abscissa) / abs(fit.abscissa) if fit.abscissa != 0 else math.inf
        out.append({
            "condition": bool(cond), "chi": chi, "routh_hurwitz": rh, "roots_negative": re_neg,
            "decays": bool(fit.decaying), "n_modes": lams.size, "rel_error": rel,
        })
    return out


# -- checks -------------------------------------------------------------------

def _operator_invariants(cfg, B, nl, rng):
    op = B.op
    phi = rng.standard_normal((20, op.n_modes)) * np.arange(1, op.n_modes + 1) ** -1.5
    emb_ok = True
    for x in phi:
        try:
            embedding_bound(op, 1.0, 0.5, x)
            embedding_bound(op, 0.5, 0.0, x)
        except AssertionError:
            emb_ok = False
    inner_err = max(abs(inner_sigma(op, 0.5, x, x) - frac_norm(op, 0.5, x) ** 2) / frac_norm(op, 0.5, x) ** 2
                    for x in phi)
    vals = {"embedding_holds": emb_ok, "inner_vs_norm": inner_err}
    ok = emb_ok and inner_err < 1e-12
    if op.transform is not None:
        rt = np.abs(op.transform.analyze(op.transform.synthesize(phi)) - phi).max()
        vals["transform_roundtrip"] = float(rt)
        ok = ok and rt < 1e-12
    return Entry("operator_invariants", "spaces X^sigma are nested with ||.||_s2 <= lambda0^(s2-s1) ||.||_s1",
                 _status(ok), vals)


def _fractional_power_laws(cfg, B, nl, rng):
    op = B.op
    x = rng.standard_normal(op.n_modes) * np.arange(1, op.n_modes + 1) ** -2.0
    s, t = 0.3, 0.45
    lhs = apply_frac_power(op, s, apply_frac_power(op, t, x))
    scal = float(np.abs(lhs - apply_frac_power(op, s + t, x)).max() / np.abs(lhs).max())
    vals = {"scalar_semigroup_law": scal}
    if not B.is_stable:
        return Entry("fractional_power_laws", "A^s A^t = A^(s+t); block powers need Re sigma > 0",
                     _status(scal < 1e-12), {**vals, "block": "unstable regime, block powers undefined"})
    xs = _random_states(B, rng, 4)
    comp = B.frac_matrices(-0.25) @ B.frac_matrices(-0.5) - B.frac_matrices(-0.75)
    comp_err = float(np.abs(np.einsum("kij,skj->ski", comp, xs)).max() / np.abs(xs).max())
    # AA = -G, so AA^-1 = -G^-1
    ginv = bs.apply_generator_inverse(B, xs[0])
    inv_err = float(np.abs(bs.frac_block_power_fc(B, 1.0, xs[0]) + ginv).max() / np.abs(ginv).max())
    vals.update(composition=comp_err, a1_vs_inverse=inv_err)
    return Entry("fractional_power_laws", "AA^-a AA^-b = AA^-(a+b); AA^-1 is the inverse of AA",
                 _status(scal < 1e-12 and comp_err < 1e-8 and inv_err < 1e-10), vals)


def _inverse_identities(cfg, B, nl, rng):
    xs = _random_states(B, rng, 100)
    back = bs._generator(B, bs._generator_inverse(B, xs))
    err = float(np.max(np.abs(back - xs)) / np.max(np.abs(xs)))
    u = rng.standard_normal(B.n_modes)
    img = bs.apply_generator_inverse(B, bs.StateTriple(u, np.zeros_like(u), np.zeros_like(u)))
    a, b, g, d = B.params.astuple()
    eps = np.finfo(float).eps
    img_exact = bool(np.all(np.abs(img.u + (b / g) * u) <= 2 * eps * (b / g) * np.abs(u))
                     and np.array_equal(img.v, u) and not img.w.any())
    return Entry("inverse_identities", "zero is in the resolvent set; G^-1 (u,0,0) = (-beta/gamma u, u, 0)",
                 _status(err < 1e-12 and img_exact), {"G_Ginv_minus_I": err, "image_formula_exact": img_exact})


def _stability_equivalence(cfg, B, nl, rng):
    params = B.params
    cond, chi = bs.stability_condition(params, B.op.lambda0)
    rh = all(bs.routh_hurwitz(params, lam) for lam in B.lambdas)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        re_neg = bool(bs.spectrum(B).real.max() < 0)
    fit = decay_rate(B, 50.0)
    own = [cond, rh, re_neg, fit.decaying]
    ens = stability_ensemble(rng, 60)
    agree = sum(len({r["condition"], r["routh_hurwitz"], r["roots_negative"], r["decays"]}) == 1 for r in ens)
    regime = "stable" if cond else "unstable regime"
    vals = {
        "regime": regime, "chi": chi, "condition": cond, "routh_hurwitz": rh, "roots_negative": re_neg,
        "decays": fit.decaying, "omega": fit.omega, "abscissa": fit.abscissa,
        "ensemble_agree": agree, "ensemble_size": len(ens),
        "ensemble_unstable": sum(not r["condition"] for r in ens),
    }
    ok = len(set(own)) == 1 and agree == len(ens)
    return Entry("stability_equivalence",
                 "exponentially stable iff chi = beta(alpha + delta lambda0) - gamma > 0", _status(ok), vals)


def _non_accretivity(cfg, B, nl, rng):
    alpha = B.params.alpha
    worst = -math.inf
    for _ in range(100):
        w = rng.standard_normal(B.n_modes)
        s = bs.StateTriple(np.zeros_like(w), np.zeros_like(w), w)
        form = bs.accretivity_form(B, s)
        bound = -alpha * float(w @ w)
        worst = max(worst, (form - bound) / max(1.0, abs(bound)))
    return Entry("non_accretivity", "(G s, s)_Y <= -alpha ||w||^2 on (0,0,w): AA is not accretive in Y",
                 _status(worst <= 1e-12), {"max_excess": worst})


def _non_compactness(cfg, B, nl, rng):
    sizes = sorted({2, min(8, B.n_modes), B.n_modes})
    dists = {}
    ok = True
    for n in sizes:
        try:
            dists[n] = bs.noncompactness_witness(B, n)
        except AssertionError:
            ok = False
    b, g = B.params.beta, B.params.gamma
    return Entry("non_compact_resolvent", "G^-1 maps a bounded X^1/2 family to a separated set: no compact resolvent",
                 _status(ok), {"min_distance": dists, "expected": math.sqrt(2 * (1 + (b / g) ** 2))})


def _norm_equivalence(cfg, B, nl, rng):
    c, C = bs.norm_equivalence_bounds(B)
    r = bs.norm_equivalence_sample(B, rng)
    inside = bool(np.all(r >= c * (1 - 1e-10)) and np.all(r <= C * (1 + 1e-10)))
    ok = inside and 0 < c and math.isfinite(C)
    vals = {
        "sample_min": float(r.min()), "sample_max": float(r.max()), "c_exact": c, "C_exact": C,
        "c_times_sqrt_lambda_max": c * math.sqrt(B.lambdas[-1]),
    }
    return Entry("norm_equivalence",
                 "||G^-1 s||_Y and ||s||_Y(-1) are equivalent on the truncated space (lower constant ~ lambda_max^-1/2)",
                 _status(ok), vals)


def _frac_cross_validation(cfg, B, nl, rng):
    if not B.is_stable:
        return Entry("fractional_block_power_cross_validation", "Gamma-weighted semigroup integral equals functional calculus",
                     "skip", {"reason": "unstable regime"})
    xs = _random_states(B, rng, 3)
    dis = {}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for a in (0.25, 0.5, 0.75):
            fc = bs.frac_block_power_fc(B, a, xs)
            qd = bs.frac_block_power_quad(B, a, xs)
            dis[a] = float(np.abs(fc - qd).max() / np.abs(fc).max())
    return Entry("fractional_block_power_cross_validation",
                 "AA^-a = Gamma(a)^-1 int_0^inf t^(a-1) e^(-AA t) dt agrees with the eigen-decomposition route",
                 _status(max(dis.values()) < 1e-6), {"max_rel_disagreement": dis})


def _sectoriality(cfg, B, nl, rng):
    if not B.is_stable:
        return Entry("sectoriality", "G generates an analytic semigroup", "skip", {"reason": "unstable regime"})
    full = sectoriality_probe(B, PROBE_ANGLES, PROBE_RADII)
    half = sectoriality_probe(bs.BlockOperator(B.op.truncated(max(2, B.n_modes // 2)), B.params),
                              PROBE_ANGLES, PROBE_RADII)
    finite = bool(np.all(np.isfinite(full.M_weighted)))
    drift = float(np.max(np.abs(full.M_weighted / half.M_weighted - 1)))
    return Entry("sectoriality", "|z| ||(z - G)^-1||_Y bounded on a sector beyond pi/2: analytic semigroup",
                 _status(finite and drift < 0.05),
                 {"angles_over_pi": PROBE_ANGLES / np.pi, "M": full.M_weighted, "M_half_modes": half.M_weighted,
                  "relative_drift": drift, "skipped": len(full.skipped)})


def _nonlinearity_probes(cfg, B, nl, rng):
    if B.op.transform is None:
        return Entry("nonlinearity_probes", "growth and Lipschitz estimates of f", "skip",
                     {"reason": "no collocation grid for a plain eigenvalue list"})
    g = {i: growth_check(nl, i) for i in (1, 2)}
    mv = {i: mv_lipschitz_check(nl, i, rng=rng) for i in (1, 2)}
    Bs = bs.BlockOperator(B.op.truncated(min(64, B.n_modes)), B.params)
    lemma = lemma_lipschitz_probe(Bs, nl, pairs=100, rng=rng)
    vals = {
        "growth_c": {i: g[i].c for i in g}, "growth_slope": {i: g[i].slope for i in g},
        "growth_flagged": {i: g[i].flagged for i in g}, "mean_value_lipschitz": mv, "lemma_constant": lemma.c,
    }
    ok = not any(x.flagged for x in g.values()) and all(math.isfinite(v) for v in mv.values()) \
        and math.isfinite(lemma.c)
    if B.is_stable:
        F = F_local_lipschitz_probe(Bs, nl, cfg.solver.r, pairs=50, rng=rng, alpha_space=cfg.solver.alpha_space)
        vals["F_local_lipschitz"] = F.c
        ok = ok and math.isfinite(F.c)
    return Entry("nonlinearity_probes",
                 "|f''(s)| <= c(1 + |s|^(rho-2)); f is Lipschitz from H^m balls into L^p, p = 2N/(N+2m)",
                 _status(ok), vals)


def _picard_vs_reference(cfg, B, nl, rng):
    if not B.is_stable:
        return Entry("picard_vs_reference", "mild solution exists locally and is unique", "skip",
                     {"reason": "unstable regime: Y^alpha norms undefined"})
    if B.op.transform is None:
        return Entry("picard_vs_reference", "mild solution exists locally and is unique", "skip",
                     {"reason": "no collocation grid"})
    scfg = cfg.solver_config()
    # the explicit reference integrator is stiffness-limited; compare on the leading modes
    B = bs.BlockOperator(B.op.truncated(min(64, B.n_modes)), B.params)
    x0 = random_smooth_state(B, rng, scfg.r, scfg.alpha_space)
    tr = picard_solve(B, nl, x0, scfg)
    ref = reference_integrate(B, nl, x0, tr.T0, tol=1e-10, times=tr.times, alpha_space=scfg.alpha_space)
    dev = float(np.max(bs.y_norm(B, tr.states - ref.states)))
    lin = float(np.max(np.abs(evolve_linear(B, x0, tr.T0) - ref.states[-1]))) if nl.is_zero else None
    ratio = tr.info["contraction_ratio"]
    vals = {"n_modes": B.n_modes, "T0": tr.T0, "iterations": tr.info["iterations"], "contraction_ratio": ratio, "sup_y_deviation": dev}
    if lin is not None:
        vals["linear_flow_deviation"] = lin
    return Entry("picard_vs_reference", "the mild solution exists on [0, T0] and is unique",
                 _status(ratio < 1 and dev < 1e-4 and not tr.blowup), vals)


def _augmented_consistency(cfg, B, nl, rng):
    if B.op.transform is None:
        return Entry("augmented_consistency", "solutions are C^2 in time", "skip", {"reason": "no collocation grid"})
    Bs = bs.BlockOperator(B.op.truncated(min(32, B.n_modes)), B.params)
    x0 = random_smooth_state(Bs, rng, 0.1 * cfg.solver.r, cfg.solver.alpha_space) if Bs.is_stable else \
        np.moveaxis(rng.standard_normal((3, Bs.n_modes)) * 1e-2 * (np.arange(Bs.n_modes) < 8), 0, -1)
    times, aug, rep = augmented_solve(Bs, nl, x0, T=0.5, dt=1e-3)
    u0, v0, w0 = x0.T
    a, b, g, d = Bs.params.astuple()
    lam = Bs.lambdas
    from .nonlinearity import apply_F
    z0_line = -a * w0 - lam * (b * v0 + g * u0 + d * w0) + apply_F(Bs, nl, x0)[:, 2]
    z0_err = float(np.abs(rep["z0"] - z0_line).max())
    return Entry("augmented_consistency", "z = d/dt w along the differentiated system; solutions are C^2 in time",
                 _status(rep["fd_residual"] <= 1e-4 and z0_err <= 1e-12 * max(1.0, np.abs(z0_line).max())),
                 {"fd_residual": rep["fd_residual"], "rhs_residual": rep["rhs_residual"], "z0_error": z0_err})


CHECKS = [
    ("operator_invariants", _operator_invariants),
    ("fractional_power_laws", _fractional_power_laws),
    ("inverse_identities", _inverse_identities),
    ("stability_equivalence", _stability_equivalence),
    ("non_accretivity", _non_accretivity),
    ("non_compact_resolvent", _non_compactness),
    ("norm_equivalence", _norm_equivalence),
    ("fractional_block_power_cross_validation", _frac_cross_validation),
    ("sectoriality", _sectoriality),
    ("nonlinearity_probes", _nonlinearity_probes),
    ("picard_vs_reference", _picard_vs_reference),
    ("augmented_consistency", _augmented_consistency),
]


def run_suite(cfg: RunConfig | None = None, only=None) -> Report:
    """Run the checks in their fixed order; each gets its own child of one seeded stream."""
    cfg = RunConfig() if cfg is None else cfg
    B = cfg.block_operator()
    nl = cfg.nonlinearity_model(enforce_cap=False)
    children = np.random.SeedSequence(cfg.seed).spawn(len(CHECKS))
    entries = []
    for (name, fn), ss in zip(CHECKS, children):
        if only is not None and name not in only:
            continue
        rng = np.random.default_rng(ss)
        try:
            entry = fn(cfg, B, nl, rng)
        except (UnstableParametersError, ArithmeticError, RuntimeError, ValueError) as e:
            entry = Entry(name, "plumbing", "fail", {"error": f"{type(e).__name__}: {e}"})
        entries.append(entry)
    return Report(entries, cfg.seed, cfg.digest())
