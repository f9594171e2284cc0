"""JSON run configuration: one structure, a sample box, a seed, tolerances.

Unknown keys anywhere are an error. Example (rank 2)::

    {
      "kind": "rank2",
      "mu": "1", "xi1": "x", "xi2": "y", "psi_hat": "u^2 + v^2",
      "domain": {"min": [0.5, 0.5, -1], "max": [2, 2, 1]},
      "samples": 1000,
      "seed": 42,
      "tolerances": {"residual": 1e-10}
    }
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .errors import ConfigError, ExprSyntaxError
from .exprcalc import parse
from .sampling import SampleDomain
from .structures import JacobiStructure, build_custom, build_poisson, build_rank2, build_rank3

KIND_FIELDS = {
    "rank3": ("A",),
    "rank2": ("mu", "xi1", "xi2", "psi_hat"),
    "poisson": ("mu", "psi"),
    "custom": ("A", "E"),
}
VECTOR_KEYS = ("A", "E")
COMMON_KEYS = ("kind", "domain", "samples", "seed", "tolerances")

DEFAULT_TOLERANCES = {
    "residual": 1e-10,       # scaled Jacobi-equation residual
    "jacobi": 1e-8,          # nested-bracket cyclic sum
    "first_order": 1e-10,
    "contact": 1e-10,
    "poisson4": 1e-10,
    "casimir": 1e-4,         # normalized Casimir-condition residual
    "conservation": 1e-8,    # psi / H drift
    "casimir_drift": 1e-5,
    "divergence": 1e-10,
    "energy": 1e-6,
    "lie": 1e-8,
}


@dataclass(frozen=True)
class StructureConfig:
    kind: str
    fields: dict
    domain: SampleDomain
    samples: int
    seed: int
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def sha256(self) -> str:
        return config_hash(self.raw)

    def tol(self, name: str) -> float:
        return self.tolerances[name]


def config_hash(obj) -> str:
    canonical = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def load_config(path: str) -> StructureConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from exc
    return parse_config(obj)


def _expr_text(key, value, alphabet):
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise ConfigError(f"{key}: expected an expression string, got {type(value).__name__}")
    text = value if isinstance(value, str) else repr(value)
    try:
        parse(text, alphabet)
    except ExprSyntaxError as exc:
        raise ConfigError(f"{key}: {exc}") from exc
    return text


def _triple(key, value, convert):
    if not isinstance(value, list) or len(value) != 3:
        raise ConfigError(f"{key}: expected a list of three entries")
    return [convert(f"{key}[{i}]", v) for i, v in enumerate(value)]


def _number(key, v) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number")
    return float(v)


def parse_config(obj) -> StructureConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config must be a JSON object")
    kind = obj.get("kind")
    if kind not in KIND_FIELDS:
        raise ConfigError(f"kind must be one of {sorted(KIND_FIELDS)}, got {kind!r}")
    allowed = set(COMMON_KEYS) | set(KIND_FIELDS[kind])
    unknown = sorted(set(obj) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys for kind {kind!r}: {unknown}")
    for key in ("domain",) + KIND_FIELDS[kind]:
        if key not in obj:
            raise ConfigError(f"missing key {key!r}")

    fields = {}
    for key in KIND_FIELDS[kind]:
        if key in VECTOR_KEYS:
            fields[key] = _triple(key, obj[key], lambda k, v: _expr_text(k, v, ("x", "y", "z")))
        elif key == "psi_hat":
            fields[key] = _expr_text(key, obj[key], ("u", "v"))
        else:
            fields[key] = _expr_text(key, obj[key], ("x", "y", "z"))

    dom = obj["domain"]
    if not isinstance(dom, dict) or set(dom) != {"min", "max"}:
        raise ConfigError("domain must be an object with exactly the keys 'min' and 'max'")
    lo, hi = _triple("domain.min", dom["min"], _number), _triple("domain.max", dom["max"], _number)
    if not all(a < b for a, b in zip(lo, hi)):
        raise ConfigError(f"domain.min {lo} must be below domain.max {hi} componentwise")

    samples = obj.get("samples", 1000)
    if isinstance(samples, bool) or not isinstance(samples, int) or samples < 1:
        raise ConfigError("samples must be a positive integer")
    seed = obj.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or not -2**63 <= seed < 2**64:
        raise ConfigError("seed must be a 64-bit integer")
    seed %= 2**64

    tolerances = dict(DEFAULT_TOLERANCES)
    given = obj.get("tolerances", {})
    if not isinstance(given, dict):
        raise ConfigError("tolerances must be an object")
    unknown = sorted(set(given) - set(DEFAULT_TOLERANCES))
    if unknown:
        raise ConfigError(f"unknown tolerance names {unknown}; known: {sorted(DEFAULT_TOLERANCES)}")
    for k, v in given.items():
        val = _number(f"tolerances.{k}", v)
        if not val > 0:
            raise ConfigError(f"tolerances.{k} must be positive")
        tolerances[k] = val

    domain = SampleDomain(tuple(lo), tuple(hi), samples, seed)
    return StructureConfig(kind, fields, domain, samples, seed, tolerances, obj)


def build_structure(cfg: StructureConfig, check_domain: bool = True) -> JacobiStructure:
    """Construct the configured structure; construction errors propagate."""
    f = cfg.fields
    dom = cfg.domain if check_domain else None
    if cfg.kind == "rank3":
        J = build_rank3(f["A"], dom)
    elif cfg.kind == "rank2":
        J = build_rank2(f["mu"], f["xi1"], f["xi2"], f["psi_hat"], dom)
    elif cfg.kind == "poisson":
        J = build_poisson(f["mu"], f["psi"], dom)
    else:
        J = build_custom(f["A"], f["E"], dom)
    if dom is None:
        # keep the sampler around even when preconditions were not checked
        object.__setattr__(J, "domain", cfg.domain)
    return J
