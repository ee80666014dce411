"""Stackelberg bidding game between service providers (leaders) and a user.

Each SP offers a bid ``(rate, price, bandwidth)`` whose service guarantee
follows from the link's fading model.  The user picks one of four binary
strategies (Max1); SPs pick their bid anticipating acceptance (Max2/Max3),
searching only along the curve where the minimum-rate constraint binds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np

from .errors import InvalidParameterError
from .guarantee import RayleighGuarantee

# Relative slack on the minimum-rate check; a bid built exactly on the
# binding curve must not be rejected for rounding noise.
RATE_RTOL = 1e-9


@dataclass(frozen=True)
class PricingParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise InvalidParameterError("pricing alpha must be positive")
        if not self.beta > 1:
            raise InvalidParameterError("pricing beta must exceed 1")

    def __call__(self, b):
        return self.alpha * np.power(b, self.beta)


@dataclass(frozen=True)
class CostParams:
    c_rate: float
    c_bw: float

    def __post_init__(self):
        if self.c_rate < 0 or self.c_bw < 0:
            raise InvalidParameterError("cost coefficients must be non-negative")

    def __call__(self, b, bw):
        return self.c_rate * b + self.c_bw * bw


def price(b, params: PricingParams):
    """Convex price ``alpha * b ** beta``."""
    return params(b)


def sp_cost(b, bw, params: CostParams):
    """Linear service cost ``c_rate * b + c_bw * bw``."""
    return params(b, bw)


@dataclass(frozen=True)
class Bid:
    sp_id: int
    rate: float
    price: float
    bandwidth: float
    guarantee: float

    def __post_init__(self):
        if self.rate < 0 or self.price < 0 or self.bandwidth < 0:
            raise InvalidParameterError(f"bid fields must be non-negative: {self}")
        if not 0.0 <= self.guarantee <= 1.0:
            raise InvalidParameterError(f"guarantee must lie in [0, 1]: {self}")


def make_bid(sp_id: int, rate: float, bandwidth: float, pricing: PricingParams, model) -> Bid:
    """Build a bid whose guarantee is derived from ``model``."""
    g = float(model.survival(rate, bandwidth)) if bandwidth > 0 else float(rate == 0)
    return Bid(sp_id, float(rate), float(pricing(rate)), float(bandwidth), g)


class UserStrategy(NamedTuple):
    p_c: int
    p_w: int


NO_SERVICE = UserStrategy(0, 0)
STRATEGIES = (UserStrategy(0, 0), UserStrategy(0, 1), UserStrategy(1, 0), UserStrategy(1, 1))


def _w(weighting, g):
    return g if weighting is None else float(weighting(g))


def joint_rate(bid_c: Bid | None, bid_w: Bid | None, strategy: UserStrategy, weighting=None) -> float:
    """Expected aggregate rate ``sum b * w(g) * p`` over accepted bids."""
    total = 0.0
    if strategy.p_c and bid_c is not None:
        total += bid_c.rate * _w(weighting, bid_c.guarantee)
    if strategy.p_w and bid_w is not None:
        total += bid_w.rate * _w(weighting, bid_w.guarantee)
    return total


def total_price(bid_c: Bid | None, bid_w: Bid | None, strategy: UserStrategy) -> float:
    paid = 0.0
    if strategy.p_c and bid_c is not None:
        paid += bid_c.price
    if strategy.p_w and bid_w is not None:
        paid += bid_w.price
    return paid


def benefit(rate: float, user) -> float:
    return user.delta * rate ** (1.0 / user.theta) if rate > 0 else 0.0


def user_utility(bid_c, bid_w, strategy: UserStrategy, user, weighting=None) -> float:
    """``delta * B_joint ** (1/theta)`` minus the prices of accepted bids."""
    return benefit(joint_rate(bid_c, bid_w, strategy, weighting), user) - total_price(bid_c, bid_w, strategy)


def solve_max1(bid_c: Bid | None, bid_w: Bid | None, user, weighting=None) -> UserStrategy:
    """User best response by enumeration of the four binary strategies.

    A strategy is feasible when its joint rate reaches ``b_min`` and its
    utility is non-negative.  A missing bid forces the matching decision to 0.
    If nothing is feasible the user stays unserved, ``(0, 0)``.  Ties go to
    the cheaper strategy, then to the lexicographically smaller one.
    """
    best = NO_SERVICE
    best_key = None
    for s in STRATEGIES[1:]:
        if (s.p_c and bid_c is None) or (s.p_w and bid_w is None):
            continue
        rate = joint_rate(bid_c, bid_w, s, weighting)
        if rate < user.b_min * (1.0 - RATE_RTOL):
            continue
        u = benefit(rate, user) - total_price(bid_c, bid_w, s)
        if u < 0:
            continue
        key = (-u, total_price(bid_c, bid_w, s), s)
        if best_key is None or key < best_key:
            best, best_key = s, key
    return best


class BestResponse(NamedTuple):
    rate: float
    bandwidth: float
    profit: float


def solve_sp_best_response(
    pricing: PricingParams,
    cost: CostParams,
    model: RayleighGuarantee,
    bw_max: float,
    b_max: float,
    b_min: float,
    rate_grid_size: int = 512,
) -> BestResponse | None:
    """SP bid maximizing ``price - cost`` assuming the user accepts.

    The bandwidth is pinned to the value at which ``b * guarantee == b_min``,
    which reduces the search to rates on a uniform grid over
    ``(b_min, b_max]``.  Returns None (no bid) when no grid rate fits inside
    ``bw_max`` or the best candidate loses money.
    """
    if bw_max <= 0 or b_max <= b_min or model.mean_snr <= 0:
        return None
    rates = b_min + (b_max - b_min) * np.arange(1, rate_grid_size + 1) / rate_grid_size
    bws = rates * math.log(2.0) / np.log1p(model.mean_snr * np.log(rates / b_min))
    ok = bws <= bw_max
    if not ok.any():
        return None
    profit = np.where(ok, pricing(rates) - cost(rates, bws), -np.inf)
    k = int(np.argmax(profit))
    if profit[k] < 0:
        return None
    return BestResponse(float(rates[k]), float(bws[k]), float(profit[k]))


@dataclass(frozen=True)
class SpContext:
    """What an SP knows about one user: its station, link and budgets."""

    station: object
    link: object
    bw_max: float
    b_max: float

    @property
    def model(self) -> RayleighGuarantee:
        return RayleighGuarantee(self.link.mean_snr)


@dataclass
class GameOutcome:
    bid_c: Bid | None
    bid_w: Bid | None
    strategy: UserStrategy
    user_utility: float
    sp_utilities: dict = field(default_factory=dict)
    offered: Sequence[Bid] = ()

    @property
    def feasible(self) -> bool:
        return self.strategy != NO_SERVICE

    @property
    def accepted_bids(self) -> list[Bid]:
        out = []
        if self.strategy.p_c and self.bid_c is not None:
            out.append(self.bid_c)
        if self.strategy.p_w and self.bid_w is not None:
            out.append(self.bid_w)
        return out

    @property
    def presented_bids(self) -> list[Bid]:
        return [b for b in (self.bid_c, self.bid_w) if b is not None]


Bidder = Callable[[SpContext], Optional[Bid]]


def stackelberg_round(user, cellular: SpContext | None, wifis: Sequence[SpContext], weighting, bidder: Bidder) -> GameOutcome:
    """One leader-follower round for a single user.

    ``bidder`` turns an SP context into that SP's bid (or None to abstain);
    the experiment mode decides whether this is the EUT best response or a
    DPOB-optimized bid.  Among WiFi bids the user keeps the one with the
    highest stand-alone perceived utility; ties keep the earlier station.
    An SP earns ``price - cost`` when its bid is accepted and 0 otherwise.
    """
    bid_c = bidder(cellular) if cellular is not None else None
    wifi_bids = [b for b in (bidder(ctx) for ctx in wifis) if b is not None]
    bid_w = None
    best_u = -math.inf
    for b in wifi_bids:
        u = user_utility(None, b, UserStrategy(0, 1), user, weighting)
        if u > best_u:
            bid_w, best_u = b, u

    strategy = solve_max1(bid_c, bid_w, user, weighting)
    u_user = user_utility(bid_c, bid_w, strategy, user, weighting)

    contexts = {ctx.station.id: ctx for ctx in ([cellular] if cellular else []) + list(wifis)}
    sp_utils = {sid: 0.0 for sid in contexts}
    for accepted in (strategy.p_c and bid_c, strategy.p_w and bid_w):
        if accepted:
            st = contexts[accepted.sp_id].station
            sp_utils[accepted.sp_id] = accepted.price - float(st.cost(accepted.rate, accepted.bandwidth))

    offered = ([bid_c] if bid_c is not None else []) + wifi_bids
    return GameOutcome(bid_c, bid_w, strategy, u_user, sp_utils, offered)
