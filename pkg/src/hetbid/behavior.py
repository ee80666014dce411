"""User decision models: objective (EUT) and Prelec-weighted (PT) guarantees."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import market
from .errors import InvalidParameterError

IDENTITY = "identity"
PRELEC = "prelec"


def prelec(p, alpha: float):
    """Prelec weighting ``exp(-(-ln p) ** alpha)``, extended by w(0)=0, w(1)=1."""
    if not 0 < alpha < 1:
        raise InvalidParameterError(f"Prelec alpha must lie in (0, 1), got {alpha}")
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)):
        raise InvalidParameterError("probabilities must lie in [0, 1]")
    with np.errstate(divide="ignore"):
        out = np.exp(-((-np.log(p)) ** alpha))
    out = np.where(p == 0, 0.0, np.where(p == 1, 1.0, out))
    return out[()]


@dataclass(frozen=True)
class WeightingFn:
    kind: str = IDENTITY
    alpha: float | None = None

    def __post_init__(self):
        if self.kind == PRELEC:
            if self.alpha is None or not 0 < self.alpha < 1:
                raise InvalidParameterError(f"Prelec alpha must lie in (0, 1), got {self.alpha}")
        elif self.kind != IDENTITY:
            raise InvalidParameterError(f"unknown weighting kind {self.kind!r}")

    def __call__(self, p):
        if self.kind == IDENTITY:
            return p
        return prelec(p, self.alpha)

    @property
    def is_identity(self) -> bool:
        return self.kind == IDENTITY


EUT = WeightingFn()


def prelec_weighting(alpha: float) -> WeightingFn:
    return WeightingFn(PRELEC, alpha)


def weighting_for(alpha: float | None) -> WeightingFn:
    """Identity when ``alpha`` is None or 1, otherwise Prelec(alpha)."""
    if alpha is None or alpha == 1:
        return EUT
    return prelec_weighting(alpha)


def perceive(bid: market.Bid | None, weighting: WeightingFn) -> market.Bid | None:
    """Replace the bid's guarantee by its subjectively weighted value."""
    if bid is None or weighting.is_identity:
        return bid
    return dataclasses.replace(bid, guarantee=float(weighting(bid.guarantee)))


def decide(user, bid_c, bid_w, weighting: WeightingFn) -> market.UserStrategy:
    """The user's Max1 response to the bids as they perceive them."""
    return market.solve_max1(perceive(bid_c, weighting), perceive(bid_w, weighting), user)


def standalone_accepts(user, rates, prices, guarantees, weighting: WeightingFn) -> np.ndarray:
    """Vectorized ``decide`` for single bids judged on their own.

    A lone bid is taken when its perceived rate reaches ``b_min`` and the
    user's utility from it is non-negative, exactly as in the four-strategy
    enumeration with the other bid missing.
    """
    rates = np.asarray(rates, dtype=float)
    perceived = rates * np.asarray(weighting(np.asarray(guarantees, dtype=float)), dtype=float)
    feasible = perceived >= user.b_min * (1.0 - market.RATE_RTOL)
    with np.errstate(divide="ignore", invalid="ignore"):
        gain = np.where(perceived > 0, user.delta * np.power(perceived, 1.0 / user.theta), 0.0)
    return feasible & (gain - np.asarray(prices, dtype=float) >= 0)
