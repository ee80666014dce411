"""Probabilistic service guarantee of a bid and its Theorem-1 inverse.

The realized rate is modeled as ``B = BW * log2(1 + snr * X)`` with ``X`` a
unit-mean exponential (Rayleigh power fading).  Its tail probability has the
closed form

    Pr(B >= b | BW) = exp(-(2**(b / BW) - 1) / snr)

which is decreasing in ``b`` and increasing in ``BW``.  Solving
``b * Pr(B >= b | BW) = b_min`` for ``BW`` gives the bandwidth at which the
minimum-rate constraint binds.

Both functions broadcast over numpy arrays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleError, InvalidParameterError

LN2 = float(np.log(2.0))


@dataclass(frozen=True)
class RayleighGuarantee:
    mean_snr: float

    def survival(self, b, bw):
        b = np.asarray(b, dtype=float)
        bw = np.asarray(bw, dtype=float)
        if np.any(bw <= 0):
            raise InvalidParameterError("bandwidth must be positive")
        if np.any(b < 0):
            raise InvalidParameterError("rate must be non-negative")
        if self.mean_snr <= 0:
            return np.where(b == 0, 1.0, 0.0)[()]
        with np.errstate(over="ignore"):
            excess = np.expm1(LN2 * b / bw)
        return np.exp(-excess / self.mean_snr)[()]

    def tight_bandwidth(self, b, b_min):
        b = np.asarray(b, dtype=float)
        if b_min <= 0:
            raise InvalidParameterError("b_min must be positive")
        if np.any(b <= b_min):
            raise InfeasibleError("advertised rate must exceed b_min")
        s = self.mean_snr * np.log(b / b_min)
        if np.any(s <= 0):
            raise InfeasibleError("non-positive SNR cannot meet the rate constraint")
        return (b * LN2 / np.log1p(s))[()]


# Kept as the public name of the model type; other fading laws can expose
# the same two methods.
GuaranteeModel = RayleighGuarantee


def service_guarantee(model, b, bw):
    """``Pr(B >= b | BW)`` under ``model``."""
    return model.survival(b, bw)


def min_bw_for_rate_constraint(model, b, b_min):
    """Bandwidth at which ``b * service_guarantee(model, b, BW) == b_min``."""
    return model.tight_bandwidth(b, b_min)
