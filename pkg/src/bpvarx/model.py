"""Model specification shared by the design builder and the estimators."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

YEAR_EFFECTS = ("none", "dummies", "trend")


@dataclass(frozen=True)
class ModelSpec:
    """Which variables enter a pooled VARX system and how.

    Parameters
    ----------
    endogenous : sequence of str
        Endogenous variables. The order is also the default Cholesky
        ordering for orthogonalized impulse responses.
    exogenous : sequence of str
        Contemporaneous controls.
    lags : int
        Lag length ``L`` applied to every endogenous variable.
    intercept : bool
        Append a constant column to the exogenous block.
    categorical : sequence of str
        Exogenous variables that enter as dummy blocks (first level dropped)
        instead of a single numeric column.
    firm_effects : bool
        Within-firm demeaning of every block before estimation. The
        intercept and any firm-constant control are dropped when set.
    year_effects : {"none", "dummies", "trend"}
        Optional calendar-time controls.
    transforms : mapping
        Informational record of how each variable was derived.
    """

    endogenous: tuple[str, ...]
    exogenous: tuple[str, ...] = ()
    lags: int = 5
    intercept: bool = True
    categorical: tuple[str, ...] = ()
    firm_effects: bool = False
    year_effects: str = "none"
    transforms: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "endogenous", tuple(self.endogenous))
        object.__setattr__(self, "exogenous", tuple(self.exogenous))
        object.__setattr__(self, "categorical", tuple(self.categorical))
        if not self.endogenous:
            raise ValueError("at least one endogenous variable is required")
        if len(set(self.endogenous)) != len(self.endogenous):
            raise ValueError("endogenous variables must be distinct")
        overlap = set(self.endogenous) & set(self.exogenous)
        if overlap:
            raise ValueError(f"variables both endogenous and exogenous: {sorted(overlap)}")
        if int(self.lags) != self.lags or self.lags < 1:
            raise ValueError("lag length must be an integer >= 1")
        unknown = set(self.categorical) - set(self.exogenous)
        if unknown:
            raise ValueError(f"categorical variables must be exogenous: {sorted(unknown)}")
        if self.year_effects not in YEAR_EFFECTS:
            raise ValueError(f"year_effects must be one of {YEAR_EFFECTS}")

    @property
    def n_endog(self) -> int:
        return len(self.endogenous)

    @property
    def variables(self) -> tuple[str, ...]:
        return self.endogenous + self.exogenous

    def replace(self, **changes) -> "ModelSpec":
        from dataclasses import replace

        if "exogenous" in changes and "categorical" not in changes:
            keep = set(changes["exogenous"])
            changes["categorical"] = tuple(c for c in self.categorical if c in keep)
        return replace(self, **changes)

    def without_exogenous(self, names) -> "ModelSpec":
        drop = set(names)
        return self.replace(exogenous=tuple(x for x in self.exogenous if x not in drop))
