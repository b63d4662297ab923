"""Run configuration: precision, tolerances, budgets, constants, seed.

A single JSON file (overridable per-flag on the command line) drives every
command; the canonical-JSON hash of the effective configuration is embedded
in all outputs so that byte-identical runs are checkable.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace

from .errors import DomainError


@dataclass(frozen=True)
class RunConfig:
    precision: int = 256
    seed: int = 0
    # tolerances
    tol_root_isolation_pow: int = 2      # roots certified to 2^-(P/2)
    tol_mean_zero_pow: int = 4           # mean-zero checked at 2^-(P/4)
    tol_fit: float = 0.1
    # budgets
    word_length_budget: int = 10 ** 7
    trace_step_budget: int = 20_000
    enumeration_budget: int = 2_000_000
    eta_scan_budget: int = 8_000_000
    tile_budget: int = 200_000
    # constants of the bound machinery (calibrated, never silently reused
    # across substitutions; see the calibration routines)
    lam: float = 0.5
    C1: float = 8.0
    C5: float = 1.0
    c2: float | None = None              # None -> calibrate on demand
    beta: float = 1.0
    gamma: float = 4.0
    Upsilon: float = 24.0
    k0: int = 1

    def __post_init__(self):
        if self.precision < 64:
            raise DomainError("precision must be at least 64 bits")
        if not 0 < self.lam < 1:
            raise DomainError("lambda must lie in (0, 1)")
        for name in ("C1", "C5"):
            if getattr(self, name) <= 0:
                raise DomainError("%s must be positive" % name)
        if self.c2 is not None and self.c2 <= 0:
            raise DomainError("c2 must be positive when given")
        if self.beta <= 0:
            raise DomainError("beta must be positive")
        if self.gamma < 1:
            raise DomainError("gamma must be at least 1")
        if self.Upsilon < 1:
            raise DomainError("Upsilon must be at least 1")
        for name in ("word_length_budget", "trace_step_budget", "enumeration_budget",
                     "eta_scan_budget", "tile_budget"):
            if getattr(self, name) <= 0:
                raise DomainError("%s must be positive" % name)

    def with_overrides(self, **kwargs):
        kwargs = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **kwargs) if kwargs else self

    def canonical_json(self):
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    def hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()


def load_config(path=None, **overrides):
    if path is None:
        base = RunConfig()
    else:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        base = RunConfig(**data)
    return base.with_overrides(**overrides)
