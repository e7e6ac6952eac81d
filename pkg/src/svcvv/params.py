"""Model parameter sets, presets and their plain-text file format."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .core import SvcError


@dataclass(frozen=True)
class ParameterSet:
    K_a: float = 0.1
    K_omega: float = 0.1
    K_omega_c: float = 10.0
    K_ac: float = 0.5
    K_vc: float = 5.0
    K_vvc: float = 0.0
    tau: float = 2.0  # s, otolith-canal low-pass
    tau_a: float = 190.0  # s, canal adaptation
    tau_d: float = 7.0  # s, canal dynamics
    b: float = 0.5  # m/s², Hill normalisation
    tau_I: float = 720.0  # s, MSI lag
    P: float = 85.0  # %, MSI gain

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not np.isfinite(v):
                raise SvcError(f"parameter {f.name} must be a finite number, got {v!r}")
            object.__setattr__(self, f.name, float(v))
        for name in ("tau", "tau_a", "tau_d", "tau_I"):
            if getattr(self, name) <= 0:
                raise SvcError(f"time constant {name} must be positive")
        if self.b <= 0:
            raise SvcError("b must be positive")
        if not 0 < self.P <= 100:
            raise SvcError("P must lie in (0, 100]")

    def with_overrides(self, **overrides) -> "ParameterSet":
        unknown = set(overrides) - set(FIELD_NAMES)
        if unknown:
            raise SvcError(f"unknown parameter(s): {', '.join(sorted(unknown))}")
        return replace(self, **overrides)

    def as_array(self) -> np.ndarray:
        """Packed order used by the simulation kernel (see ``svc_model``)."""
        return np.array([getattr(self, n) for n in FIELD_NAMES], dtype=np.float64)

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


FIELD_NAMES = tuple(f.name for f in fields(ParameterSet))

PRESETS = {
    "svc": ParameterSet(),
    "svc-vv": ParameterSet(K_vc=2.5, K_vvc=2.5),
}


def preset(name: str) -> ParameterSet:
    try:
        return PRESETS[name]
    except KeyError:
        raise SvcError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def parse_params(doc: dict | None, default: str = "svc") -> ParameterSet:
    """Build a parameter set from a mapping of field names.

    An optional ``preset`` key selects the base values; every other key must
    be a ``ParameterSet`` field.
    """
    doc = dict(doc or {})
    base = preset(str(doc.pop("preset", default)))
    return base.with_overrides(**doc)


def load_params(path: str | Path, default: str = "svc") -> ParameterSet:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise SvcError(f"parameter file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise SvcError(f"cannot parse parameter file {path}: {exc}") from None
    if doc is not None and not isinstance(doc, dict):
        raise SvcError(f"parameter file {path} must contain key: value pairs")
    return parse_params(doc, default)


def save_params(params: ParameterSet, path: str | Path) -> None:
    Path(path).write_text(yaml.safe_dump(asdict(params), sort_keys=False))
