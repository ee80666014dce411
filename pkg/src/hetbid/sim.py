"""HetNet scenarios, training-data bootstrap, load sweeps and metrics.

One macro station sits at the origin and ``wifi_count`` WiFi stations sit on
a ring inside the macro cell.  For each load ``U`` a fresh user population
is drawn (seeded by the master seed and ``U``, so every mode sees the same
users), per-station bandwidth budgets are split over covered users, and one
independent Stackelberg round is played per user.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
import yaml

from . import behavior, dpob as dp, learn, market, radio
from .errors import ConfigError, DegenerateDataError, NoDemandError
from .market import CostParams, PricingParams, SpContext

MODES = ("eut", "pt_deviation", "dpob")
# "global": one classifier over the pooled history of every user and SP.
# "per_link": each SP learns each user's decisions from that pair's own history.
SCOPES = ("global", "per_link")
DEFAULT_LOADS = tuple(range(50, 501, 50))


@dataclass(frozen=True)
class StationClass:
    tx_power_dbm: float
    freq_mhz: float
    antenna_height: float
    bandwidth: float
    alloc_gain: float
    coverage_radius: float
    pricing: PricingParams
    cost: CostParams


# Defaults for the radio and market parameters.
DEFAULT_MACRO = StationClass(
    tx_power_dbm=46.0,
    freq_mhz=900.0,
    antenna_height=30.0,
    bandwidth=60.0,
    alloc_gain=0.9,
    coverage_radius=1000 * radio.FOOT,
    pricing=PricingParams(0.5, 2.0),
    cost=CostParams(0.5, 2.0),
)
DEFAULT_WIFI = StationClass(
    tx_power_dbm=36.0,
    freq_mhz=2400.0,
    antenna_height=10.0,
    bandwidth=10.0,
    alloc_gain=0.9,
    coverage_radius=300 * radio.FOOT,
    pricing=PricingParams(0.5, 2.0),
    cost=CostParams(0.5, 2.0),
)


@dataclass(frozen=True)
class ScenarioConfig:
    users: int = 200
    seed: int = 1
    macro_radius: float = 1000 * radio.FOOT
    wifi_count: int = 8
    wifi_ring_fraction: float = 0.6
    noise_dbm: float = -80.0
    sinr_threshold_db: float = 0.0
    b_min: float = 1.0
    user_delta: float = 100.0
    user_theta: float = 2.0
    user_antenna_height: float = 1.5
    activity_probability: float = 1.0
    macro: StationClass = DEFAULT_MACRO
    wifi: StationClass = DEFAULT_WIFI

    @property
    def noise_variance(self) -> float:
        return radio.dbm_to_mw(self.noise_dbm)


@dataclass(frozen=True)
class ExperimentConfig:
    mode: str = "eut"
    prelec_alpha: float = 0.8
    loads: tuple[int, ...] = DEFAULT_LOADS
    grid: tuple[int, int] = (32, 32)
    rate_grid_size: int = 512
    # Per-link training sets are nearly separable: a looser gap is enough,
    # and a heavier reject penalty keeps DPOB bids off the boundary.
    svm: learn.SvmConfig = learn.SvmConfig(tolerance=1e-3, reject_weight=2.0)
    bootstrap_bids_per_user: int = 50
    bootstrap_users: int = 20
    classifier_scope: str = "per_link"
    link_history_bids: int = 400

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.mode != "eut" and not 0 < self.prelec_alpha < 1:
            raise ConfigError("prelec_alpha must lie in (0, 1)")
        if any(u < 0 for u in self.loads):
            raise ConfigError("loads must be non-negative")
        if self.grid[0] < 1 or self.grid[1] < 1:
            raise ConfigError("grid sizes must be positive")
        if self.bootstrap_bids_per_user < 1 or self.link_history_bids < 1:
            raise ConfigError("bid counts must be positive")
        if self.classifier_scope not in SCOPES:
            raise ConfigError(f"unknown classifier_scope {self.classifier_scope!r}")

    @property
    def weighting(self) -> behavior.WeightingFn:
        return behavior.EUT if self.mode == "eut" else behavior.prelec_weighting(self.prelec_alpha)


@dataclass
class Scenario:
    config: ScenarioConfig
    stations: list[radio.Station]
    users: list[radio.UserNode]
    seed: int

    @property
    def macro(self) -> radio.Station:
        return next(s for s in self.stations if s.kind == radio.MACRO)


@dataclass
class MetricsRow:
    U: int
    mode: str
    alpha: float
    sum_sp_utility: float
    sum_user_utility: float
    acceptance_rate: float
    connected_users: int
    offered_bids: int
    median_guarantee: float
    mean_dpob_iterations: float
    seed: int


CSV_HEADER = [f.name for f in dataclasses.fields(MetricsRow)]


# --------------------------------------------------------------- scenario ---

def _station(sid: int, kind: str, x: float, y: float, cls: StationClass) -> radio.Station:
    return radio.Station(
        id=sid,
        kind=kind,
        x=x,
        y=y,
        tx_power_dbm=cls.tx_power_dbm,
        freq_mhz=cls.freq_mhz,
        antenna_height=cls.antenna_height,
        total_bandwidth=cls.bandwidth,
        alloc_gain=cls.alloc_gain,
        coverage_radius=cls.coverage_radius,
        pricing=cls.pricing,
        cost=cls.cost,
    )


def make_stations(config: ScenarioConfig) -> list[radio.Station]:
    stations = [_station(0, radio.MACRO, 0.0, 0.0, config.macro)]
    ring = config.wifi_ring_fraction * config.macro_radius
    for k in range(config.wifi_count):
        phi = 2 * math.pi * k / config.wifi_count
        stations.append(_station(k + 1, radio.WIFI, ring * math.cos(phi), ring * math.sin(phi), config.wifi))
    return stations


def draw_users(config: ScenarioConfig, n: int, seed) -> list[radio.UserNode]:
    """``n`` users uniform over the macro disc."""
    rng = np.random.default_rng(seed)
    r = config.macro_radius * np.sqrt(rng.uniform(size=n))
    phi = rng.uniform(0, 2 * math.pi, size=n)
    active = rng.uniform(size=n) < config.activity_probability
    return [
        radio.UserNode(
            id=i,
            x=float(r[i] * math.cos(phi[i])),
            y=float(r[i] * math.sin(phi[i])),
            b_min=config.b_min,
            delta=config.user_delta,
            theta=config.user_theta,
            active=bool(active[i]),
            antenna_height=config.user_antenna_height,
        )
        for i in range(n)
    ]


def load_seed(master: int, U: int, stream: int = 0) -> np.random.SeedSequence:
    return np.random.SeedSequence([master, U, stream])


def generate_scenario(config: ScenarioConfig = ScenarioConfig(), seed: int | None = None, n_users: int | None = None) -> Scenario:
    seed = config.seed if seed is None else seed
    n = config.users if n_users is None else n_users
    return Scenario(config, make_stations(config), draw_users(config, n, load_seed(seed, n)), seed)


def with_load(scenario: Scenario, U: int, stream: int = 0) -> Scenario:
    """Same stations and master seed, a fresh population of ``U`` users."""
    users = draw_users(scenario.config, U, load_seed(scenario.seed, U, stream))
    return Scenario(scenario.config, scenario.stations, users, scenario.seed)


# ----------------------------------------------------------- link layer ---

@dataclass
class UserLinks:
    user: radio.UserNode
    cellular: SpContext | None
    wifis: list[SpContext]

    @property
    def contexts(self) -> list[SpContext]:
        return ([self.cellular] if self.cellular else []) + self.wifis


def attach(scenario: Scenario) -> list[UserLinks]:
    """Link budgets, bandwidth budgets and rate caps for every user."""
    cfg = scenario.config
    links = {}
    for st in scenario.stations:
        for u in scenario.users:
            lb = radio.link_budget(st, u, cfg.noise_variance, cfg.sinr_threshold_db)
            covered = lb.covered and radio.within_radius(st, u)
            links[st.id, u.id] = (lb, covered)

    bw_max = {}
    for st in scenario.stations:
        flags = [(u.active, links[st.id, u.id][1]) for u in scenario.users]
        try:
            bw_max[st.id] = radio.bw_per_user(st, flags)
        except NoDemandError:
            bw_max[st.id] = 0.0

    out = []
    for u in scenario.users:
        cellular, wifis = None, []
        for st in scenario.stations:
            lb, covered = links[st.id, u.id]
            if not (covered and u.active):
                continue
            ctx = SpContext(st, lb, bw_max[st.id], radio.max_rate(bw_max[st.id], lb, u.active, covered))
            if st.kind == radio.MACRO:
                cellular = ctx
            else:
                wifis.append(ctx)
        out.append(UserLinks(u, cellular, wifis))
    return out


# -------------------------------------------------------------- bidders ---

def eut_response(ctx: SpContext, b_min: float, rate_grid_size: int = 512) -> market.BestResponse | None:
    st = ctx.station
    return market.solve_sp_best_response(st.pricing, st.cost, ctx.model, ctx.bw_max, ctx.b_max, b_min, rate_grid_size)


def eut_bidder(b_min: float, rate_grid_size: int = 512):
    def bid(ctx: SpContext) -> market.Bid | None:
        br = eut_response(ctx, b_min, rate_grid_size)
        if br is None:
            return None
        return market.make_bid(ctx.station.id, br.rate, br.bandwidth, ctx.station.pricing, ctx.model)

    return bid


def bid_grid(ctx: SpContext, b_min: float, grid: tuple[int, int]) -> dp.BidGrid | None:
    if ctx.bw_max <= 0 or ctx.b_max <= b_min:
        return None
    return dp.BidGrid.uniform(b_min, ctx.b_max, ctx.bw_max, *grid)


class DpobBidder:
    """Bids chosen by DPOB against a learned acceptance classifier.

    ``classifier`` is either a feature classifier shared by every SP, or,
    with ``per_context=True``, a function of the SP context returning one
    (None means the SP abstains).
    """

    def __init__(self, classifier, b_min: float, grid: tuple[int, int], seed: int, U: int, user_id: int, rate_grid_size: int = 512, per_context: bool = False):
        self.classifier = classifier
        self.per_context = per_context
        self.b_min = b_min
        self.grid = grid
        self.seed = seed
        self.U = U
        self.user_id = user_id
        self.rate_grid_size = rate_grid_size
        self.iterations: list[int] = []

    def __call__(self, ctx: SpContext) -> market.Bid | None:
        grid = bid_grid(ctx, self.b_min, self.grid)
        if grid is None:
            return None
        st = ctx.station
        clf = self.classifier(ctx) if self.per_context else self.classifier
        if clf is None:
            return None
        prev = eut_response(ctx, self.b_min, self.rate_grid_size)
        initial = grid.snap(prev.rate, prev.bandwidth) if prev is not None else grid.snap(self.b_min, ctx.bw_max)
        seed = int(np.random.SeedSequence([self.seed, self.U, self.user_id, st.id, 7]).generate_state(1)[0])
        res = dp.dpob(grid, initial, clf, st.pricing, st.cost, dp.MdpConfig(seed=seed))
        self.iterations.append(res.iterations)
        if res.best is None:
            # Nothing predicted accepted: a rejected bid costs nothing, so
            # keep offering the previous bid rather than walking away.
            if prev is None:
                return None
            return market.make_bid(st.id, prev.rate, prev.bandwidth, st.pricing, ctx.model)
        return market.make_bid(st.id, res.best.rate, res.best.bandwidth, st.pricing, ctx.model)


# ------------------------------------------------------------ bootstrap ---

def _standalone_decision(user, ctx: SpContext, bid: market.Bid, weighting) -> bool:
    if ctx.station.kind == radio.MACRO:
        return behavior.decide(user, bid, None, weighting).p_c == 1
    return behavior.decide(user, None, bid, weighting).p_w == 1


def bootstrap_history(
    scenario: Scenario,
    alpha: float | None,
    bids_per_user: int = 50,
    seed: int = 0,
    grid: tuple[int, int] = (32, 32),
    max_users: int | None = None,
) -> list[tuple[market.Bid, bool]]:
    """Past (bid, decision) pairs from PT users answering random grid bids.

    Each covered user receives ``bids_per_user`` bids; each bid comes from a
    uniformly chosen covering station and a uniformly chosen point of that
    station's bid grid, and is judged on its own.  ``alpha=None`` gives EUT
    users.  With ``max_users`` only a random subset of users is polled.
    """
    rng = np.random.default_rng(seed)
    b_min = scenario.config.b_min
    pool = [ul for ul in attach(scenario) if any(bid_grid(c, b_min, grid) for c in ul.contexts)]
    if max_users is not None and len(pool) > max_users:
        keep = np.sort(rng.choice(len(pool), size=max_users, replace=False))
        pool = [pool[k] for k in keep]
    return poll_users(pool, b_min, behavior.weighting_for(alpha), bids_per_user, rng, grid)


def poll_users(pool: Sequence[UserLinks], b_min: float, weighting, bids_per_user: int, rng, grid) -> list[tuple[market.Bid, bool]]:
    if bids_per_user < 1:
        raise ValueError("bids_per_user must be at least 1")
    history = []
    for ul in pool:
        options = [(c, g) for c in ul.contexts if (g := bid_grid(c, b_min, grid)) is not None]
        if not options:
            continue
        for _ in range(bids_per_user):
            ctx, g = options[int(rng.integers(len(options)))]
            s = g.state(int(rng.integers(g.size)))
            bid = market.make_bid(ctx.station.id, s.rate, s.bandwidth, ctx.station.pricing, ctx.model)
            history.append((bid, _standalone_decision(ul.user, ctx, bid, weighting)))
    return history


def training_history(scenario: Scenario, config: ExperimentConfig, alpha: float | None) -> list[tuple[market.Bid, bool]]:
    """Bootstrap pooled over the sweep loads, on populations independent of
    the evaluation users."""
    history = []
    for U in config.loads:
        if U == 0:
            continue
        train = with_load(scenario, U, stream=1)
        seed = int(load_seed(scenario.seed, U, 2).generate_state(1)[0])
        history += bootstrap_history(train, alpha, config.bootstrap_bids_per_user, seed, config.grid, config.bootstrap_users)
    return history


def train_classifier(scenario: Scenario, config: ExperimentConfig) -> learn.SvmModel:
    samples = learn.collect_samples(training_history(scenario, config, config.prelec_alpha))
    return learn.train_svm(samples, config.svm)


# ----------------------------------------------------------- experiment ---

@dataclass
class LoadResult:
    row: MetricsRow
    links: list[UserLinks]
    outcomes: list[market.GameOutcome]


def evaluate_load(scenario: Scenario, config: ExperimentConfig, U: int, model: learn.SvmModel | None = None) -> LoadResult:
    """One load point: a fresh population of ``U`` users on the scenario's stations."""
    return evaluate_population(with_load(scenario, U), config, model)


def evaluate_population(population: Scenario, config: ExperimentConfig, model: learn.SvmModel | None = None) -> LoadResult:
    """Play one round per user of ``population`` and aggregate the metrics."""
    if config.mode == "dpob" and config.classifier_scope == "global" and model is None:
        raise ConfigError("dpob with the global classifier scope needs a trained model")
    U = len(population.users)
    weighting = config.weighting
    b_min = population.config.b_min
    links = attach(population)
    outcomes = []
    iterations: list[int] = []
    per_link = config.mode == "dpob" and config.classifier_scope == "per_link"
    for ul in links:
        if config.mode == "dpob":
            if per_link:
                clf = _link_classifier_factory(population, ul, config)
            else:
                clf = model.predict
            bidder = DpobBidder(clf, b_min, config.grid, population.seed, U, ul.user.id, config.rate_grid_size, per_link)
        else:
            bidder = eut_bidder(b_min, config.rate_grid_size)
        outcomes.append(market.stackelberg_round(ul.user, ul.cellular, ul.wifis, weighting, bidder))
        if config.mode == "dpob":
            iterations += bidder.iterations

    presented = [b for o in outcomes for b in o.presented_bids]
    accepted = sum(len(o.accepted_bids) for o in outcomes)
    row = MetricsRow(
        U=U,
        mode=config.mode,
        alpha=1.0 if config.mode == "eut" else config.prelec_alpha,
        sum_sp_utility=float(sum(sum(o.sp_utilities.values()) for o in outcomes)),
        sum_user_utility=float(sum(o.user_utility for o in outcomes)),
        acceptance_rate=accepted / len(presented) if presented else 0.0,
        connected_users=sum(o.feasible for o in outcomes),
        offered_bids=len(presented),
        median_guarantee=float(np.median([b.guarantee for b in presented])) if presented else float("nan"),
        mean_dpob_iterations=float(np.mean(iterations)) if iterations else 0.0,
        seed=population.seed,
    )
    return LoadResult(row, links, outcomes)


def link_history(ul: UserLinks, ctx: SpContext, b_min: float, weighting, n_bids: int, rng, grid: tuple[int, int]) -> list[tuple[market.Bid, bool]]:
    """Decisions of one user on ``n_bids`` uniform grid bids from one SP."""
    g = bid_grid(ctx, b_min, grid)
    if g is None:
        return []
    rates, bws = g.flat()
    picks = rng.integers(g.size, size=n_bids)
    b, bw = rates[picks], bws[picks]
    prices = ctx.station.pricing(b)
    guarantees = ctx.model.survival(b, bw)
    accepted = behavior.standalone_accepts(ul.user, b, prices, guarantees, weighting)
    return [
        (market.Bid(ctx.station.id, float(b[k]), float(prices[k]), float(bw[k]), float(guarantees[k])), bool(accepted[k]))
        for k in range(n_bids)
    ]


def constant_classifier(accept: bool):
    def clf(X):
        return np.full(len(np.atleast_2d(X)), accept, dtype=bool)

    return clf


def train_link_classifier(history: Sequence[tuple[market.Bid, bool]], svm: learn.SvmConfig):
    """SVM on one link's history; a single-class history yields the constant
    classifier for that class."""
    if not history:
        return None
    labels = {accepted for _, accepted in history}
    if len(labels) == 1:
        return constant_classifier(labels.pop())
    return learn.train_svm(learn.collect_samples(history), svm).predict


def _link_classifier_factory(population: Scenario, ul: UserLinks, config: ExperimentConfig):
    weighting = behavior.weighting_for(config.prelec_alpha)
    b_min = population.config.b_min

    def for_context(ctx: SpContext):
        ss = np.random.SeedSequence([population.seed, len(population.users), ul.user.id, ctx.station.id, 3])
        history = link_history(ul, ctx, b_min, weighting, config.link_history_bids, np.random.default_rng(ss), config.grid)
        return train_link_classifier(history, config.svm)

    return for_context


def run_experiment(scenario: Scenario, config: ExperimentConfig, model: learn.SvmModel | None = None) -> list[MetricsRow]:
    """Metrics for every load of the sweep under one mode.

    In DPOB mode with the global scope a classifier is trained from a
    bootstrap of PT-user decisions when no ``model`` is given; with the
    per-link scope every SP trains on its own history with each user.
    """
    if config.mode == "dpob" and config.classifier_scope == "global" and model is None:
        model = train_classifier(scenario, config)
    return [evaluate_load(scenario, config, U, model).row for U in config.loads]


def sweep_report(rows: Sequence[MetricsRow]) -> str:
    """CSV text with one row per (mode, U), sorted by mode then load."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in sorted(rows, key=lambda r: (r.mode, r.U, r.alpha)):
        writer.writerow([_fmt(getattr(r, name)) for name in CSV_HEADER])
    return buf.getvalue()


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


# -------------------------------------------------------- configuration ---

def _build(cls, data: dict, nested: dict | None = None):
    data = dict(data or {})
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {sorted(unknown)}")
    for key, builder in (nested or {}).items():
        if key in data:
            data[key] = builder(data[key])
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {cls.__name__}: {exc}") from exc


def _station_class(data: dict, default: StationClass) -> StationClass:
    merged = dataclasses.asdict(default)
    data = dict(data)
    for key in ("pricing", "cost"):
        if key in data:
            merged[key].update(data.pop(key))
    merged.update(data)
    merged["pricing"] = _build(PricingParams, merged["pricing"])
    merged["cost"] = _build(CostParams, merged["cost"])
    return _build(StationClass, merged)


def scenario_config_from_dict(data: dict) -> ScenarioConfig:
    return _build(
        ScenarioConfig,
        data,
        {
            "macro": lambda d: _station_class(d, DEFAULT_MACRO),
            "wifi": lambda d: _station_class(d, DEFAULT_WIFI),
        },
    )


def experiment_config_from_dict(data: dict) -> ExperimentConfig:
    return _build(
        ExperimentConfig,
        data,
        {
            "loads": lambda v: tuple(int(u) for u in v),
            "grid": lambda v: (int(v[0]), int(v[1])),
            "svm": lambda d: _build(learn.SvmConfig, d),
        },
    )


def load_config(path) -> tuple[ScenarioConfig, ExperimentConfig]:
    """Read a YAML file with optional ``scenario`` and ``experiment`` sections."""
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config root must be a mapping")
    unknown = set(data) - {"scenario", "experiment"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    return scenario_config_from_dict(data.get("scenario") or {}), experiment_config_from_dict(data.get("experiment") or {})


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "seed": scenario.seed,
        "config": dataclasses.asdict(scenario.config),
        "stations": [dataclasses.asdict(s) for s in scenario.stations],
        "users": [dataclasses.asdict(u) for u in scenario.users],
    }


def scenario_from_dict(data: dict) -> Scenario:
    try:
        config = scenario_config_from_dict(data["config"])
        stations = [
            radio.Station(**{**s, "pricing": PricingParams(**s["pricing"]), "cost": CostParams(**s["cost"])})
            for s in data["stations"]
        ]
        users = [radio.UserNode(**u) for u in data["users"]]
        return Scenario(config, stations, users, int(data["seed"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed scenario: {exc}") from exc


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    try:
        with open(path) as fh:
            return scenario_from_dict(json.load(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed scenario {path}: {exc}") from exc
