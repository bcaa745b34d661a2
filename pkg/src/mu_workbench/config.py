"""Run configuration and the report envelope shared by all CLI commands."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

from . import __version__
from .tensor import DENSE_BUDGET, EXACT_TOL


@dataclass(frozen=True)
class RunConfig:
    """Everything that can change a report; hashed into every report."""

    tolerances: dict = field(default_factory=lambda: {"exact": EXACT_TOL})
    seed: int = 0
    probes: int = 64
    bulk_probes: int = 8
    k_dim: int = 8
    grid_n: int = 64
    grid_len: float = 16.0
    budget: int = DENSE_BUDGET
    outputs: dict = field(default_factory=dict)

    def __post_init__(self):
        bad = {k: v for k, v in self.tolerances.items() if not v > 0}
        if bad:
            raise ValueError(f"tolerances must be positive: {bad}")
        if self.probes < 1 or self.bulk_probes < 1:
            raise ValueError("probe counts must be at least 1")
        if self.grid_len <= 0:
            raise ValueError("grid length must be positive")
        if self.budget < 1:
            raise ValueError("dense budget must be positive")

    @property
    def tol(self) -> float:
        return self.tolerances.get("exact", EXACT_TOL)

    def to_dict(self) -> dict:
        return asdict(self)

    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def envelope(command: str, config: RunConfig, body: dict, inputs: dict | None = None) -> dict:
    """Wrap a report body with the tool version and config hash."""
    return {"tool": "mu-workbench", "version": __version__, "command": command,
            "config": config.to_dict(), "config_hash": config.hash(),
            "inputs": inputs or {}, **body}


def dumps(report: dict) -> str:
    """Canonical JSON: sorted keys, fixed indentation, trailing newline."""
    return json.dumps(report, sort_keys=True, indent=2, default=_default) + "\n"


def _default(obj):
    if hasattr(obj, "tolist"):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"cannot serialize {type(obj).__name__}")
