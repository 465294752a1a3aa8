"""Alarm risk: asset value x event priority x event reliability / 25, in [0, 10]."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..errors import OutOfRange

ASSET_RANGE = (0, 5)
PRIORITY_RANGE = (0, 5)
RELIABILITY_RANGE = (0, 10)


@dataclass(frozen=True)
class RiskParams:
    asset_value: int
    event_priority: int
    event_reliability: int

    def __post_init__(self):
        for name, value, (lo, hi) in (("asset_value", self.asset_value, ASSET_RANGE),
                                      ("event_priority", self.event_priority, PRIORITY_RANGE),
                                      ("event_reliability", self.event_reliability, RELIABILITY_RANGE)):
            if not lo <= value <= hi:
                raise OutOfRange(f"{name}={value} outside [{lo}, {hi}]")


def risk_fraction(p: RiskParams) -> Fraction:
    return Fraction(p.asset_value) * p.event_priority * p.event_reliability / 25


def compute_risk(asset_value, event_priority=None, event_reliability=None) -> float:
    """Risk rounded to one decimal; exact rational arithmetic up to the rounding.

    Accepts a :class:`RiskParams` or the three values positionally.
    """
    p = asset_value if isinstance(asset_value, RiskParams) else \
        RiskParams(asset_value, event_priority, event_reliability)
    return float(round(risk_fraction(p), 1))
