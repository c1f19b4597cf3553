"""Run configuration: TOML loading, validation and key overrides."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .block_system import BlockOperator, MgtParams
from .mild_solver import SolverConfig
from .nonlinearity import GALLERY, PRESETS, Nonlinearity, subcritical_exponent
from .spectral_core import make_dirichlet_power_operator, make_sequence_operator

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "apply_overrides"]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


@dataclass(frozen=True)
class OperatorSection:
    m: int = 1
    n_modes: int = 256
    lambda_file: str | None = None


@dataclass(frozen=True)
class ParamsSection:
    alpha: float = 1.0
    beta: float = 2.0
    gamma: float = 1.0
    delta: float = 1.0


@dataclass(frozen=True)
class NonlinearitySection:
    gallery: str = "cubic"
    rho: float = 3.0
    N: int = 3
    m: int | None = None  # defaults to operator.m
    scale: float = 1.0


@dataclass(frozen=True)
class SolverSection:
    T: float = 1.0
    dt: float = 0.01
    picard_tol: float = 1e-8
    picard_max: int = 60
    alpha_space: float = 0.75
    r: float = 1.0
    blowup_threshold: float = 1e6
    horizon: float = 10.0


@dataclass(frozen=True)
class OutputSection:
    path: str | None = None
    format: str = "csv"
    full_coefficients: bool = False


_SECTIONS = {
    "operator": OperatorSection,
    "params": ParamsSection,
    "nonlinearity": NonlinearitySection,
    "solver": SolverSection,
    "output": OutputSection,
}


@dataclass(frozen=True)
class RunConfig:
    operator: OperatorSection = field(default_factory=OperatorSection)
    params: ParamsSection = field(default_factory=ParamsSection)
    nonlinearity: NonlinearitySection = field(default_factory=NonlinearitySection)
    solver: SolverSection = field(default_factory=SolverSection)
    output: OutputSection = field(default_factory=OutputSection)
    seed: int = 42
    base_dir: str = field(default=".", compare=False)

    # -- builders ---------------------------------------------------------
    def spectral_operator(self):
        if self.operator.lambda_file is not None:
            path = Path(self.base_dir, self.operator.lambda_file)
            lams = load_lambda_file(path)[: self.operator.n_modes]
            return make_sequence_operator(lams)
        return make_dirichlet_power_operator(self.operator.m, self.operator.n_modes)

    def mgt_params(self) -> MgtParams:
        p = self.params
        return MgtParams(p.alpha, p.beta, p.gamma, p.delta)

    def block_operator(self) -> BlockOperator:
        return BlockOperator(self.spectral_operator(), self.mgt_params())

    def nonlinearity_model(self, enforce_cap: bool = True) -> Nonlinearity:
        nl = self.nonlinearity
        m = self.operator.m if nl.m is None else nl.m
        return Nonlinearity.from_preset(nl.gallery, rho=nl.rho, N=nl.N, m=m, scale=nl.scale,
                                        enforce_cap=enforce_cap)

    def solver_config(self) -> SolverConfig:
        s = self.solver
        return SolverConfig(T=s.T, dt=s.dt, picard_tol=s.picard_tol, picard_max=s.picard_max,
                            alpha_space=s.alpha_space, r=s.r, blowup_threshold=s.blowup_threshold)

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d

    def digest(self) -> str:
        """Hash of everything that affects results (the output section does not)."""
        d = self.as_dict()
        d.pop("output")
        blob = json.dumps(d, sort_keys=True, default=repr).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def load_lambda_file(path) -> list[float]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"operator.lambda_file: cannot read {str(path)!r}: {e.strerror}") from None
    vals = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            vals.append(float(line))
        except ValueError:
            raise ConfigError(f"operator.lambda_file line {lineno}: not a number: {line!r}") from None
    if not vals:
        raise ConfigError("operator.lambda_file: no eigenvalues found")
    return vals


# -- validation -------------------------------------------------------------

def _type_name(t):
    return {int: "an integer", float: "a number", str: "a string", bool: "a boolean"}[t]


def _coerce(key, value, annotation):
    optional = "None" in annotation
    base = annotation.replace(" | None", "")
    t = {"int": int, "float": float, "str": str, "bool": bool}[base]
    if value is None and optional:
        return None
    if t is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if t is int and isinstance(value, float) and value.is_integer():
        return int(value)
    if not isinstance(value, t) or (t is not bool and isinstance(value, bool)):
        raise ConfigError(f"{key} must be {_type_name(t)}, got {value!r}")
    return value


def _check(cond, key, constraint):
    if not cond:
        raise ConfigError(f"{key} must {constraint}")


def _validate(cfg: RunConfig) -> None:
    op, p, nl, s, out = cfg.operator, cfg.params, cfg.nonlinearity, cfg.solver, cfg.output
    _check(op.m >= 1, "operator.m", "be >= 1")
    _check(op.n_modes >= 2, "operator.n_modes", "be >= 2")
    for name in ("alpha", "beta", "gamma", "delta"):
        v = getattr(p, name)
        _check(math.isfinite(v) and v > 0, f"params.{name}", "be positive")
    _check(nl.gallery in PRESETS, "nonlinearity.gallery", f"be one of {sorted(PRESETS)}")
    _check(nl.N >= 1, "nonlinearity.N", "be >= 1")
    m = op.m if nl.m is None else nl.m
    _check(m == op.m, "nonlinearity.m", f"equal operator.m = {op.m}")
    _check(nl.rho > 1, "nonlinearity.rho", "exceed 1")
    if nl.N <= 2 * m:
        raise ConfigError(f"nonlinearity.N must exceed 2m = {2 * m} for a subcritical exponent to exist")
    cap = subcritical_exponent(nl.N, m)
    if nl.rho > cap:
        raise ConfigError(
            f"nonlinearity.rho = {nl.rho:g} exceeds the subcritical cap (N+2m)/(N-2m) = "
            f"({nl.N}+{2 * m})/({nl.N}-{2 * m}) = {cap:g}"
        )
    _check(math.isfinite(nl.scale), "nonlinearity.scale", "be finite")
    _check(s.T > 0, "solver.T", "be positive")
    _check(0 < s.dt <= s.T, "solver.dt", "satisfy 0 < dt <= T")
    _check(s.picard_tol > 0, "solver.picard_tol", "be positive")
    _check(s.picard_max >= 1, "solver.picard_max", "be >= 1")
    _check(0 < s.alpha_space < 1, "solver.alpha_space", "lie in (0, 1)")
    _check(s.r > 0, "solver.r", "be positive")
    _check(s.blowup_threshold > 0, "solver.blowup_threshold", "be positive")
    _check(s.horizon > 0, "solver.horizon", "be positive")
    _check(out.format in ("csv", "json"), "output.format", "be 'csv' or 'json'")
    _check(cfg.seed >= 0, "seed", "be a nonnegative integer")
    if op.lambda_file is not None:
        try:
            make_sequence_operator(load_lambda_file(Path(cfg.base_dir, op.lambda_file)))
        except ValueError as e:
            raise ConfigError(f"operator.lambda_file: {e}") from None


def _build(data: dict, base_dir: str) -> RunConfig:
    kwargs = {}
    for key, value in data.items():
        if key == "seed":
            kwargs["seed"] = _coerce("seed", value, "int")
            continue
        if key not in _SECTIONS:
            raise ConfigError(f"unknown key {key!r}; expected one of {sorted(_SECTIONS) + ['seed']}")
        if not isinstance(value, dict):
            raise ConfigError(f"{key} must be a section")
        cls = _SECTIONS[key]
        fields = {f.name: f.type for f in dataclasses.fields(cls)}
        sec = {}
        for k, v in value.items():
            if k not in fields:
                raise ConfigError(f"unknown key {key}.{k}; expected one of {sorted(fields)}")
            sec[k] = _coerce(f"{key}.{k}", v, fields[k])
        kwargs[key] = cls(**sec)
    cfg = RunConfig(**kwargs, base_dir=base_dir)
    _validate(cfg)
    return cfg


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text  # bare strings


def apply_overrides(data: dict, overrides) -> dict:
    """Apply ``section.key=value`` strings (values in TOML syntax) to raw config data."""
    data = {k: dict(v) if isinstance(v, dict) else v for k, v in data.items()}
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form section.key=value")
        path, text = item.split("=", 1)
        parts = path.strip().split(".")
        value = _parse_value(text.strip())
        if len(parts) == 1:
            data[parts[0]] = value
        elif len(parts) == 2:
            sec = data.setdefault(parts[0], {})
            if not isinstance(sec, dict):
                raise ConfigError(f"{parts[0]} must be a section")
            sec[parts[1]] = value
        else:
            raise ConfigError(f"override key {path!r} must be 'key' or 'section.key'")
    return data


def parse_config(path=None, overrides=None) -> RunConfig:
    """Load and validate a TOML run configuration; ``None`` gives all defaults."""
    if path is None:
        data, base = {}, "."
    else:
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as e:
            raise ConfigError(f"cannot read config {str(path)!r}: {e.strerror}") from None
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from None
        base = str(path.parent)
    return _build(apply_overrides(data, overrides), base)


def load_config(text: str, overrides=None) -> RunConfig:
    """Parse configuration from a TOML string."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(str(e)) from None
    return _build(apply_overrides(data, overrides), ".")


__all__ += ["OperatorSection", "ParamsSection", "NonlinearitySection", "SolverSection", "OutputSection",
            "load_lambda_file", "GALLERY"]
