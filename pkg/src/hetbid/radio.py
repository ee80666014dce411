"""Physical layer: Hata path loss, link budgets, bandwidth budgets, rate caps.

Units: distances in meters (Hata itself takes km), frequencies in MHz,
powers in dBm, bandwidth in MHz and rates in Mbps.  The noise variance is a
linear quantity in mW so that ``mean_snr = P_mW * gain / noise``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Iterable

from .errors import InvalidParameterError, NoDemandError

if TYPE_CHECKING:
    from .market import CostParams, PricingParams

FOOT = 0.3048  # meters per foot

# Hata is undefined at d = 0; users closer than this are evaluated here.
MIN_DISTANCE_M = 1.0

MACRO = "macro"
WIFI = "wifi"


@dataclass(frozen=True)
class Station:
    id: int
    kind: str
    x: float
    y: float
    tx_power_dbm: float
    freq_mhz: float
    antenna_height: float
    total_bandwidth: float
    alloc_gain: float
    coverage_radius: float
    pricing: PricingParams
    cost: CostParams

    def __post_init__(self):
        if self.kind not in (MACRO, WIFI):
            raise InvalidParameterError(f"unknown station kind {self.kind!r}")
        if not self.total_bandwidth > 0:
            raise InvalidParameterError("total_bandwidth must be positive")
        if not 0 < self.alloc_gain <= 1:
            raise InvalidParameterError("alloc_gain must lie in (0, 1]")
        if not math.isfinite(self.tx_power_dbm):
            raise InvalidParameterError("tx_power_dbm must be finite")


@dataclass(frozen=True)
class UserNode:
    id: int
    x: float
    y: float
    b_min: float
    delta: float
    theta: float
    active: bool = True
    antenna_height: float = 1.5

    def __post_init__(self):
        if not self.b_min > 0:
            raise InvalidParameterError("b_min must be positive")
        if not self.delta > 0:
            raise InvalidParameterError("delta must be positive")
        if not self.theta > 1:
            raise InvalidParameterError("theta must exceed 1")


@dataclass(frozen=True)
class LinkBudget:
    path_loss: float
    mean_channel_gain: float
    noise_variance: float
    mean_snr: float
    covered: bool
    distance: float = field(default=0.0, compare=False)

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.mean_snr) if self.mean_snr > 0 else -math.inf


def hata_path_loss(f: float, h_b: float, h_m: float, d: float) -> float:
    """Urban Okumura-Hata median path loss in dB.

    Uses the small/medium-city mobile antenna correction.  The classical
    validity range (150-1500 MHz, 30-200 m base height, 1-20 km) is not
    enforced; the formula is evaluated as-is outside of it.

    Parameters
    ----------
    f : carrier frequency in MHz
    h_b : base station antenna height in m
    h_m : mobile antenna height in m
    d : link distance in km
    """
    if not f > 0:
        raise InvalidParameterError(f"frequency must be positive, got {f}")
    if not d > 0:
        raise InvalidParameterError(f"distance must be positive, got {d}")
    if not (h_b > 0 and h_m > 0):
        raise InvalidParameterError("antenna heights must be positive")
    log_f = math.log10(f)
    a_hm = (1.1 * log_f - 0.7) * h_m - (1.56 * log_f - 0.8)
    return (
        69.55
        + 26.16 * log_f
        - 13.82 * math.log10(h_b)
        - a_hm
        + (44.9 - 6.55 * math.log10(h_b)) * math.log10(d)
    )


def dbm_to_mw(p_dbm: float) -> float:
    return 10.0 ** (p_dbm / 10.0)


def link_budget(
    station: Station, user: UserNode, noise_variance: float, sinr_threshold_db: float = 0.0
) -> LinkBudget:
    """Assemble mean channel gain, mean SNR and the coverage flag for one link.

    Coverage is inclusive at the threshold.  The station's coverage radius is
    not consulted here; see :func:`within_radius`.
    """
    distance = math.hypot(user.x - station.x, user.y - station.y)
    d_km = max(distance, MIN_DISTANCE_M) / 1000.0
    pl = hata_path_loss(station.freq_mhz, station.antenna_height, user.antenna_height, d_km)
    gain = 10.0 ** (-pl / 10.0)
    snr = dbm_to_mw(station.tx_power_dbm) * gain / noise_variance
    snr_db = 10.0 * math.log10(snr) if snr > 0 else -math.inf
    return LinkBudget(
        path_loss=pl,
        mean_channel_gain=gain,
        noise_variance=noise_variance,
        mean_snr=snr,
        covered=snr_db >= sinr_threshold_db,
        distance=distance,
    )


def within_radius(station: Station, user: UserNode) -> bool:
    return math.hypot(user.x - station.x, user.y - station.y) <= station.coverage_radius


def bw_per_user(station: Station, users: Iterable[tuple[bool | int, bool | int]]) -> float:
    """Proportional-fair per-user bandwidth cap ``G_BA * BW / sum(a_j * c_j)``.

    ``users`` is an iterable of ``(active, covered)`` flags.
    """
    served = sum(int(bool(a)) * int(bool(c)) for a, c in users)
    if served == 0:
        raise NoDemandError(f"station {station.id} has no active covered users")
    return station.alloc_gain * station.total_bandwidth / served


def max_rate(bw_max: float, link: LinkBudget, active: bool | int = 1, covered: bool | int | None = None) -> float:
    """Shannon rate cap in Mbps, ``bw_max * log2(1 + snr * a_j * c_j)``."""
    if bw_max < 0:
        raise InvalidParameterError("bw_max must be non-negative")
    if covered is None:
        covered = link.covered
    snr = link.mean_snr * int(bool(active)) * int(bool(covered))
    return bw_max * math.log2(1.0 + snr)
