"""Run configuration: JSON in, validated dataclass out, canonical JSON back."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .groups import Group, GroupSpec, weyl_a1


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending field."""


@dataclass
class Truncation:
    jet_order: int = 0
    laurent_neg: int = 0  # 0: use deg P_i
    laurent_pos: int = 0
    frobenius_order: int = 16


@dataclass
class Tolerances:
    commutator: float = 1e-8
    regularity: float = 1e-8
    fit: float = 1e-6
    conservation: float = 1e-6


@dataclass
class RunConfig:
    m: int
    n: int
    kind: str = "G"  # "G" or "A1"
    tau: complex | None = None
    parameters: dict[str, complex] = field(default_factory=dict)
    truncation: Truncation = field(default_factory=Truncation)
    tolerances: Tolerances = field(default_factory=Tolerances)
    seed: int = 0
    samples: int = 2

    # -- construction ------------------------------------------------------

    def spec(self) -> GroupSpec:
        if self.kind == "A1":
            return weyl_a1(self.tau)
        return GroupSpec(self.m, self.n, self.tau)

    def group(self) -> Group:
        return Group(self.spec())

    def rng(self, stream: int = 0) -> np.random.Generator:
        return np.random.default_rng([self.seed, stream])

    # -- serialisation -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "group": {"m": self.m, "n": self.n, "kind": self.kind},
            "tau": None if self.tau is None else _pair(self.tau),
            "parameters": {k: _pair(v) for k, v in sorted(self.parameters.items())},
            "truncation": asdict(self.truncation),
            "tolerances": asdict(self.tolerances),
            "seed": self.seed,
            "samples": self.samples,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:12]


def _pair(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _complex(value, where: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, (list, tuple)) and len(value) == 2 and all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        return complex(value[0], value[1])
    raise ConfigError(f"{where}: expected a number or an [re, im] pair, got {value!r}")


def _section(raw: dict, name: str, cls):
    data = raw.get(name, {})
    if not isinstance(data, dict):
        raise ConfigError(f"{name}: expected an object")
    allowed = set(cls.__dataclass_fields__)
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"{name}: unknown field(s) {sorted(unknown)}")
    out = cls()
    for key, value in data.items():
        default = getattr(out, key)
        if isinstance(default, int):
            if not isinstance(value, int) or isinstance(value, bool) or value < 0:
                raise ConfigError(f"{name}.{key}: expected a non-negative integer")
        elif not isinstance(value, (int, float)) or isinstance(value, bool) or value <= 0:
            raise ConfigError(f"{name}.{key}: expected a positive number")
        setattr(out, key, type(default)(value))
    return out


def parse_config(raw: dict) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("top level: expected an object")
    unknown = set(raw) - {"group", "tau", "parameters", "truncation", "tolerances", "seed",
                          "samples"}
    if unknown:
        raise ConfigError(f"top level: unknown field(s) {sorted(unknown)}")
    grp = raw.get("group")
    if not isinstance(grp, dict) or "m" not in grp or "n" not in grp:
        raise ConfigError("group: expected {\"m\": int, \"n\": int}")
    m, n, kind = grp["m"], grp["n"], grp.get("kind", "G")
    if not all(isinstance(v, int) and not isinstance(v, bool) for v in (m, n)):
        raise ConfigError("group.m / group.n: expected integers")
    if kind not in ("G", "A1"):
        raise ConfigError(f"group.kind: expected 'G' or 'A1', got {kind!r}")
    if kind == "A1" and (m, n) != (2, 1):
        raise ConfigError("group: the A1 root system has m = 2, n = 1")
    tau = None if raw.get("tau") is None else _complex(raw["tau"], "tau")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise ConfigError("seed: expected a 64-bit non-negative integer")
    samples = raw.get("samples", 2)
    if not isinstance(samples, int) or isinstance(samples, bool) or samples < 1:
        raise ConfigError("samples: expected a positive integer")
    cfg = RunConfig(m, n, kind, tau, {}, _section(raw, "truncation", Truncation),
                    _section(raw, "tolerances", Tolerances), seed, samples)
    try:
        group = cfg.group()
    except ValueError as exc:
        raise ConfigError(f"group: {exc}") from exc
    if cfg.tau is None:
        cfg.tau = complex(group.spec.tau)
    labels = set(group.parameter_labels)
    params = raw.get("parameters", "zero")
    if params == "zero":
        cfg.parameters = {lab: 0j for lab in labels}
    elif params == "random":
        from .dunkl import default_parameters

        cfg.parameters = default_parameters(group, cfg.rng(99), 0.5)
        if kind == "A1":
            # single coupling at the origin: the Lame case
            cfg.parameters = {k: (v if k == "pt:0:j1" else 0j) for k, v in cfg.parameters.items()}
    elif isinstance(params, dict):
        unknown = set(params) - labels
        if unknown:
            raise ConfigError(f"parameters: unknown orbit label(s) {sorted(unknown)}; "
                              f"expected {sorted(labels)}")
        missing = labels - set(params)
        if missing:
            raise ConfigError(f"parameters: missing orbit label(s) {sorted(missing)}")
        cfg.parameters = {k: _complex(v, f"parameters.{k}") for k, v in params.items()}
    else:
        raise ConfigError("parameters: expected an object, \"zero\" or \"random\"")
    return cfg


def load_config(path: str) -> RunConfig:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}") from exc
    return parse_config(raw)


def default_config(m: int = 3, n: int = 2, seed: int = 0) -> RunConfig:
    """Random (seeded) parameters for G(m,1,n)."""
    return parse_config({"group": {"m": m, "n": n}, "parameters": "random", "seed": seed})
