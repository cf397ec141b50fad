"""Result records shared by the preliminary tests."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

LEVELS = (0.01, 0.05, 0.1)


def _plain(value):
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        v = float(value)
        return None if math.isnan(v) else v
    if isinstance(value, np.bool_):
        return bool(value)
    return value


@dataclass(frozen=True)
class TestReport:
    """Outcome of one hypothesis test.

    ``p_bracket`` is set when the p-value is only known to lie in an
    interval (critical-value tables); ``p_value`` is then a representative
    point inside it, chosen so that ``decision_at`` agrees with the table at
    the tabulated levels.
    """

    __test__ = False  # not a pytest class

    name: str
    statistic: float
    p_value: float
    null: str
    settings: dict = field(default_factory=dict)
    p_bracket: tuple[float, float] | None = None

    def __post_init__(self):
        p = float(self.p_value)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value {p} outside [0, 1]")
        object.__setattr__(self, "p_value", p)
        object.__setattr__(self, "statistic", float(self.statistic))

    def decision_at(self, alpha: float) -> bool:
        """True when the null is rejected at level ``alpha``."""
        return self.p_value < alpha

    @property
    def decisions(self) -> dict[float, str]:
        return {a: ("reject" if self.decision_at(a) else "fail") for a in LEVELS}

    def to_dict(self) -> dict:
        return _plain({"name": self.name, "statistic": self.statistic, "p_value": self.p_value,
                       "p_bracket": self.p_bracket, "null": self.null,
                       "decisions": {str(k): v for k, v in self.decisions.items()},
                       "settings": self.settings})

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def reports_to_text(reports) -> str:
    """Structured-text document with one record per report."""
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


def format_p(p: float) -> str:
    """Threshold-style p-value text: ``p < 0.01`` or ``p > 0.23``."""
    for cut in (0.001, 0.01, 0.05, 0.1):
        if p < cut:
            return f"p < {cut:g}"
    return f"p > {math.floor(p * 100) / 100:.2f}"
