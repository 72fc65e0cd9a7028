"""Diagnostic reports: named residuals with tolerances and verdicts."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class CheckRecord:
    """One named check.

    ``relation`` is ``"<"`` when the value must stay below the tolerance
    (residuals) and ``">"`` when it must exceed it (positivity margins).
    """

    name: str
    value: float
    tolerance: float
    relation: str = "<"
    detail: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        v = float(self.value)
        if math.isnan(v):
            return False
        return v < self.tolerance if self.relation == "<" else v > self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "max_residual" if self.relation == "<" else "min_value": _clean(self.value),
            "tolerance": self.tolerance,
            "pass": self.passed,
            **({"detail": _clean(self.detail)} if self.detail else {}),
        }


@dataclass
class DiagnosticReport:
    name: str
    checks: list[CheckRecord] = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def add(self, name, value, tolerance, relation="<", **detail) -> CheckRecord:
        rec = CheckRecord(name, float(value), float(tolerance), relation, detail)
        self.checks.append(rec)
        return rec

    def extend(self, other: "DiagnosticReport", prefix: str = ""):
        for c in other.checks:
            self.checks.append(
                CheckRecord(prefix + c.name, c.value, c.tolerance, c.relation, c.detail)
            )
        for k, v in other.flags.items():
            self.flags[prefix + k] = v

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name) -> CheckRecord:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def __contains__(self, name):
        return any(c.name == name for c in self.checks)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "pass": self.passed,
            "checks": [c.to_dict() for c in self.checks],
            "flags": _clean(self.flags),
        }

    def summary(self) -> str:
        lines = [f"{self.name}: {'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            lines.append(
                f"  {'ok ' if c.passed else 'BAD'} {c.name}: {c.value:.3e} {c.relation} {c.tolerance:.1e}"
            )
        return "\n".join(lines)


def _clean(obj):
    """Convert numpy scalars/arrays into plain JSON-friendly values."""
    import numpy as np

    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, list | tuple):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.bool_ | bool):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, float | np.floating):
        v = float(obj)
        if math.isnan(v) or math.isinf(v):
            return str(v)
        return v
    return obj
