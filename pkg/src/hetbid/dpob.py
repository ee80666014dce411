"""Optimized bidding over a quantized (rate, bandwidth) grid.

States are grid bids; an action jumps from the initial bid to any state, and
with a zero discount the reward of that jump is the SP utility of the
destination bid when the classifier predicts acceptance:

    R(s_j) = d(s_j) * (price(b_j) - cost(b_j, BW_j))

DPOB samples actions at random and prunes the action set using the
dominance structure of bids: once a bid is predicted accepted, no bid with a
lower-or-equal rate and higher-or-equal bandwidth can earn more; once a bid
is predicted rejected, every bid with a higher-or-equal rate and
lower-or-equal bandwidth is rejected as well.

A classifier here is any callable mapping an ``(n, 3)`` array of
``(rate, price, bandwidth)`` rows to ``n`` booleans.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidParameterError
from .market import CostParams, PricingParams

Classifier = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class BidGrid:
    rates: np.ndarray
    bandwidths: np.ndarray

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float)
        bws = np.asarray(self.bandwidths, dtype=float)
        if rates.ndim != 1 or bws.ndim != 1 or rates.size == 0 or bws.size == 0:
            raise InvalidParameterError("grid needs at least one rate and one bandwidth")
        if np.any(rates <= 0) or np.any(bws <= 0):
            raise InvalidParameterError("grid values must be positive")
        if np.any(np.diff(rates) <= 0) or np.any(np.diff(bws) <= 0):
            raise InvalidParameterError("grid values must be strictly increasing")
        object.__setattr__(self, "rates", rates)
        object.__setattr__(self, "bandwidths", bws)

    @classmethod
    def uniform(cls, b_min: float, b_max: float, bw_max: float, m: int = 32, n: int = 32) -> "BidGrid":
        """``m`` rates evenly over ``(b_min, b_max]`` and ``n`` bandwidths over ``(0, bw_max]``."""
        rates = b_min + (b_max - b_min) * np.arange(1, m + 1) / m
        bws = bw_max * np.arange(1, n + 1) / n
        return cls(rates, bws)

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rates), len(self.bandwidths)

    @property
    def size(self) -> int:
        return len(self.rates) * len(self.bandwidths)

    def flat(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-state rate and bandwidth arrays; state ``i = m * N + n``."""
        m, n = self.shape
        return np.repeat(self.rates, n), np.tile(self.bandwidths, m)

    def state(self, index: int) -> "State":
        n = len(self.bandwidths)
        return State(int(index), float(self.rates[index // n]), float(self.bandwidths[index % n]))

    def snap(self, rate: float, bandwidth: float) -> "State":
        """Nearest grid state in range-normalized coordinates; ties go to the lower index."""
        def norm(values, v):
            span = values[-1] - values[0]
            return (values - v) / span if span > 0 else values - v

        dr = norm(self.rates, rate)
        dw = norm(self.bandwidths, bandwidth)
        dist = (dr[:, None] ** 2 + dw[None, :] ** 2).ravel()
        return self.state(int(np.argmin(dist)))


class State(NamedTuple):
    index: int
    rate: float
    bandwidth: float


@dataclass(frozen=True)
class MdpConfig:
    gamma: float = 0.0
    seed: int = 0
    tie_break: str = "latest"  # "latest": replace incumbent on >=; "earliest": on >

    def __post_init__(self):
        if self.gamma != 0.0:
            raise InvalidParameterError("only a zero discount factor is supported")
        if self.tie_break not in ("latest", "earliest"):
            raise InvalidParameterError(f"unknown tie_break {self.tie_break!r}")


class TraceRow(NamedTuple):
    iteration: int
    state: int
    rate: float
    bandwidth: float
    reward: float
    decision: int
    remaining: int


@dataclass
class DpobResult:
    best: State | None
    utility: float
    iterations: int
    initial: State | None = None
    trace: list[TraceRow] = field(default_factory=list)


def features(rates, bandwidths, pricing: PricingParams) -> np.ndarray:
    rates = np.asarray(rates, dtype=float)
    return np.column_stack([rates, pricing(rates), np.asarray(bandwidths, dtype=float)])


def reward(dest: State, classifier: Classifier, pricing: PricingParams, cost: CostParams) -> float:
    """Immediate reward of moving to ``dest``: predicted decision times SP profit."""
    d = bool(classifier(features([dest.rate], [dest.bandwidth], pricing))[0])
    if not d:
        return 0.0
    return float(pricing(dest.rate) - cost(dest.rate, dest.bandwidth))


def dpob(
    grid: BidGrid,
    initial: State | int | None,
    classifier: Classifier,
    pricing: PricingParams,
    cost: CostParams,
    config: MdpConfig = MdpConfig(),
) -> DpobResult:
    """Random-action search with dominance pruning.

    The first action visits the initial (previous) bid; later actions are
    drawn uniformly from the surviving action set.  The incumbent starts at
    the no-bid sentinel with utility 0 and is replaced by a predicted-accepted
    destination whose reward is at least the incumbent's (strictly greater
    with ``tie_break="earliest"``).
    """
    if grid.size == 0:
        raise InvalidParameterError("empty grid")
    rng = np.random.default_rng(config.seed)
    b, bw = grid.flat()
    alive = np.ones(grid.size, dtype=bool)
    n_alive = grid.size
    if isinstance(initial, (int, np.integer)):
        initial = grid.state(int(initial))

    # d(s) for every state in one vectorized call; same values as per-visit calls
    decisions = np.asarray(classifier(features(b, bw, pricing)), dtype=bool)
    profit = pricing(b) - cost(b, bw)

    best: State | None = None
    best_u = 0.0
    trace: list[TraceRow] = []
    j = initial.index if initial is not None else None
    while n_alive:
        if j is None or not alive[j]:
            j = int(rng.choice(np.flatnonzero(alive)))
        accepted = bool(decisions[j])
        r = float(profit[j]) if accepted else 0.0
        if accepted and (r >= best_u if config.tie_break == "latest" else r > best_u):
            best, best_u = State(j, float(b[j]), float(bw[j])), r
        if accepted:
            alive &= ~((b <= b[j]) & (bw >= bw[j]))
        else:
            alive &= ~((b >= b[j]) & (bw <= bw[j]))
        n_alive = int(alive.sum())
        trace.append(TraceRow(len(trace) + 1, j, float(b[j]), float(bw[j]), r, int(accepted), n_alive))
        j = None
    return DpobResult(best, best_u, len(trace), initial, trace)


def brute_force_best_bid(
    grid: BidGrid, classifier: Classifier, pricing: PricingParams, cost: CostParams
) -> tuple[State | None, float]:
    """Exhaustive maximum of the reward over the grid, against the no-bid value 0.

    Ties prefer the larger rate, then the larger bandwidth.  Returns
    ``(None, 0.0)`` when no predicted-accepted state earns at least 0.
    """
    b, bw = grid.flat()
    d = np.asarray(classifier(features(b, bw, pricing)), dtype=bool)
    rewards = np.where(d, pricing(b) - cost(b, bw), -np.inf)
    if not d.any() or rewards.max() < 0:
        return None, 0.0
    top = rewards.max()
    ties = np.flatnonzero(rewards == top)
    k = max(ties, key=lambda i: (b[i], bw[i]))
    return grid.state(int(k)), float(top)


def trace_to_csv(result: DpobResult, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["iteration", "state", "rate", "bandwidth", "reward", "decision", "remaining"])
        for row in result.trace:
            writer.writerow([row.iteration, row.state, repr(row.rate), repr(row.bandwidth), repr(row.reward), row.decision, row.remaining])


class LinearThreshold:
    """Monotone classifier on the normalized grid: accept iff
    ``cos(phi) * (bw - bw0) - sin(phi) * (b - b0) >= 0``.

    With ``phi`` in ``[0, pi/2]`` acceptance is upward-closed in bandwidth and
    downward-closed in rate.
    """

    def __init__(self, grid: BidGrid, phi: float, b0: float, bw0: float):
        self.lo = np.array([grid.rates[0], grid.bandwidths[0]])
        span = np.array([grid.rates[-1] - grid.rates[0], grid.bandwidths[-1] - grid.bandwidths[0]])
        self.span = np.where(span > 0, span, 1.0)
        self.phi, self.b0, self.bw0 = phi, b0, bw0

    def __call__(self, X):
        X = np.atleast_2d(X)
        u = (X[:, 0] - self.lo[0]) / self.span[0]
        v = (X[:, 2] - self.lo[1]) / self.span[1]
        return math.cos(self.phi) * (v - self.bw0) - math.sin(self.phi) * (u - self.b0) >= 0

    @classmethod
    def random(cls, grid: BidGrid, rng: np.random.Generator) -> "LinearThreshold":
        """Random orientation in the monotone quadrant, boundary through a
        uniformly drawn point of the normalized grid."""
        phi = rng.uniform(0.0, math.pi / 2)
        b0, bw0 = rng.uniform(size=2)
        return cls(grid, phi, b0, bw0)


class ConvergenceRow(NamedTuple):
    states: int
    trials: int
    mean_iterations: float
    max_iterations: int
    log_bound: float  # log_{4/3} |S|


def measure_convergence(grid_sizes: Sequence[int | tuple[int, int]], trials: int = 100, seed: int = 0) -> list[ConvergenceRow]:
    """Mean and max DPOB iterations over random monotone classifiers.

    Square sizes (64, 256, ...) are laid out as ``sqrt x sqrt`` grids; pairs
    ``(M, N)`` are taken as-is.  Each trial draws a fresh classifier and a
    uniformly random initial state.
    """
    if trials < 1:
        raise InvalidParameterError("trials must be positive")
    pricing = PricingParams(1.0, 2.0)
    cost = CostParams(0.0, 0.0)
    rows = []
    ss = np.random.SeedSequence(seed)
    for size, child in zip(grid_sizes, ss.spawn(len(grid_sizes))):
        if isinstance(size, tuple):
            m, n = size
        else:
            m = math.isqrt(size)
            if m * m != size:
                raise InvalidParameterError(f"{size} is not a perfect square; pass (M, N)")
            n = m
        grid = BidGrid(np.arange(1, m + 1, dtype=float), np.arange(1, n + 1, dtype=float))
        rng = np.random.default_rng(child)
        counts = []
        for _ in range(trials):
            clf = LinearThreshold.random(grid, rng)
            init = int(rng.integers(grid.size))
            res = dpob(grid, init, clf, pricing, cost, MdpConfig(seed=int(rng.integers(2**32))))
            counts.append(res.iterations)
        total = m * n
        rows.append(
            ConvergenceRow(total, trials, float(np.mean(counts)), int(max(counts)), math.log(total) / math.log(4 / 3) if total > 1 else 0.0)
        )
    return rows
