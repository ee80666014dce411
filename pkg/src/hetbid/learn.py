"""Linear soft-margin SVM that predicts whether a user accepts a bid.

Features are the bid triple ``(rate, price, bandwidth)``.  They are
standardized with training statistics before solving, since the raw scales
(Mbps, currency, MHz) differ by orders of magnitude.

The dual problem

    max  sum(a) - 1/2 |sum(a_i y_i x_i)|^2
    s.t. 0 <= a_i <= C_i,  sum(a_i y_i) = 0

is solved with SMO using second-order working-set selection; the bias is
unregularized.  Training stops once the relative primal-dual gap falls below
``tolerance``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateDataError, InvalidDataError, InvalidParameterError

log = logging.getLogger(__name__)

MODEL_FORMAT = "hetbid-svm/1"


class Sample(NamedTuple):
    x: tuple[float, float, float]
    y: int


@dataclass(frozen=True)
class SvmConfig:
    C: float = 1.0
    tolerance: float = 1e-6
    max_iterations: int = 100_000
    seed: int = 0
    class_weight: str | None = None  # None or "balanced"
    reject_weight: float = 1.0  # extra slack penalty on reject samples

    def __post_init__(self):
        if not self.C > 0:
            raise InvalidParameterError("C must be positive")
        if not self.tolerance > 0:
            raise InvalidParameterError("tolerance must be positive")
        if not self.reject_weight > 0:
            raise InvalidParameterError("reject_weight must be positive")
        if self.class_weight not in (None, "balanced"):
            raise InvalidParameterError(f"unknown class_weight {self.class_weight!r}")

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class SvmModel:
    w: tuple[float, ...]
    b: float
    mean: tuple[float, ...]
    scale: tuple[float, ...]
    config: SvmConfig = field(default_factory=SvmConfig)
    iterations: int = 0
    duality_gap: float = 0.0
    objective_trace: tuple[float, ...] = field(default=(), repr=False, compare=False)

    def decision_function(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        Z = (X - np.asarray(self.mean)) / np.asarray(self.scale)
        return Z @ np.asarray(self.w) + self.b

    def predict(self, X) -> np.ndarray:
        """Boolean accept decisions; a score of exactly 0 counts as accept."""
        return self.decision_function(X) >= 0.0

    __call__ = predict


def collect_samples(history: Iterable[tuple]) -> list[Sample]:
    """Turn ``(bid, accepted)`` pairs into labeled feature triples."""
    return [
        Sample((float(bid.rate), float(bid.price), float(bid.bandwidth)), 1 if accepted else -1)
        for bid, accepted in history
    ]


def _as_arrays(samples: Sequence[Sample]) -> tuple[np.ndarray, np.ndarray]:
    if len(samples) == 0:
        raise DegenerateDataError("no training samples")
    X = np.array([s.x for s in samples], dtype=float).reshape(len(samples), -1)
    y = np.array([s.y for s in samples], dtype=float)
    if not np.all(np.isfinite(X)):
        raise InvalidDataError("features must be finite")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise InvalidDataError("labels must be +1 or -1")
    if np.all(y == 1) or np.all(y == -1):
        raise DegenerateDataError("training data must contain both classes")
    return X, y


def _bias(score, alpha, y, upper):
    # score = -y*grad equals the bias at every free support vector.
    free = (alpha > 0) & (alpha < upper)
    if free.any():
        return float(score[free].mean())
    up, low = _index_sets(alpha, y, upper)
    hi = score[up].max() if up.any() else 0.0
    lo = score[low].min() if low.any() else 0.0
    return float(0.5 * (hi + lo))


def _index_sets(alpha, y, upper):
    pos = y > 0
    below = alpha < upper
    above = alpha > 0
    up = (pos & below) | (~pos & above)
    low = (pos & above) | (~pos & below)
    return up, low


def train_svm(samples: Sequence[Sample], config: SvmConfig = SvmConfig()) -> SvmModel:
    X, y = _as_arrays(samples)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale <= 1e-12] = 1.0
    Z = (X - mean) / scale
    n = len(y)

    upper = np.full(n, config.C)
    if config.class_weight == "balanced":
        for label in (-1.0, 1.0):
            mask = y == label
            upper[mask] = config.C * n / (2.0 * mask.sum())
    upper[y < 0] *= config.reject_weight

    sq = np.einsum("ij,ij->i", Z, Z)
    alpha = np.zeros(n)
    w = np.zeros(Z.shape[1])
    trace = []
    gap = math.inf
    it = 0
    b = 0.0
    while True:
        yzw = y * (Z @ w)
        ys = y * (1.0 - yzw)  # -y * gradient of the dual
        b = _bias(ys, alpha, y, upper)
        ww = float(w @ w)
        dual = float(alpha.sum()) - 0.5 * ww
        primal = 0.5 * ww + float(upper @ np.maximum(0.0, 1.0 - yzw - y * b))
        trace.append(-dual)
        gap = primal - dual
        if gap <= config.tolerance * max(1.0, abs(primal)):
            break
        if it >= config.max_iterations:
            log.warning("SVM stopped at max_iterations with relative gap %.3g", gap / max(1.0, abs(primal)))
            break

        up, low = _index_sets(alpha, y, upper)
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(ys[up])])
        viol = ys[i] - ys
        cand = low & (viol > 0)
        if not cand.any():
            break  # KKT satisfied; remaining gap is bias rounding
        dist = sq[i] + sq - 2.0 * (Z @ Z[i])
        dist = np.where(dist > 1e-12, dist, 1e-12)
        gain = np.where(cand, viol * viol / dist, -np.inf)
        j = int(np.argmax(gain))

        # move y_i*a_i up and y_j*a_j down by t; sum(a*y) is preserved
        t_max = min(
            upper[i] - alpha[i] if y[i] > 0 else alpha[i],
            alpha[j] if y[j] > 0 else upper[j] - alpha[j],
        )
        t = min(viol[j] / dist[j], t_max)
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        np.clip(alpha, 0.0, upper, out=alpha)
        w += t * (Z[i] - Z[j])
        it += 1

    return SvmModel(
        w=tuple(float(v) for v in w),
        b=float(b),
        mean=tuple(float(v) for v in mean),
        scale=tuple(float(v) for v in scale),
        config=config,
        iterations=it,
        duality_gap=float(gap),
        objective_trace=tuple(trace),
    )


def classify(model: SvmModel, x) -> tuple[float, int]:
    """Score and binary decision (1 accept, 0 reject) for one feature triple."""
    score = float(model.decision_function(x)[0])
    return score, int(score >= 0.0)


def accuracy(model: SvmModel, samples: Sequence[Sample]) -> float:
    if not samples:
        return float("nan")
    X = np.array([s.x for s in samples], dtype=float)
    y = np.array([s.y for s in samples]) > 0
    return float(np.mean(model.predict(X) == y))


# Field order of the saved record: format, w, b, mean, scale, config,
# fingerprint, iterations, duality_gap.
def model_to_dict(model: SvmModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "w": list(model.w),
        "b": model.b,
        "mean": list(model.mean),
        "scale": list(model.scale),
        "config": asdict(model.config),
        "fingerprint": model.config.fingerprint(),
        "iterations": model.iterations,
        "duality_gap": model.duality_gap,
    }


def model_from_dict(record: dict) -> SvmModel:
    if record.get("format") != MODEL_FORMAT:
        raise InvalidDataError(f"unsupported model format {record.get('format')!r}")
    config = SvmConfig(**record["config"])
    if record.get("fingerprint") not in (None, config.fingerprint()):
        raise InvalidDataError("model config fingerprint mismatch")
    scale = tuple(float(v) for v in record["scale"])
    if any(s <= 0 for s in scale):
        raise InvalidDataError("standardizer scale must be positive")
    return SvmModel(
        w=tuple(float(v) for v in record["w"]),
        b=float(record["b"]),
        mean=tuple(float(v) for v in record["mean"]),
        scale=scale,
        config=config,
        iterations=int(record.get("iterations", 0)),
        duality_gap=float(record.get("duality_gap", 0.0)),
    )


def save_model(model: SvmModel, path) -> None:
    with open(path, "w") as fh:
        json.dump(model_to_dict(model), fh, indent=2)
        fh.write("\n")


def load_model(path) -> SvmModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))
