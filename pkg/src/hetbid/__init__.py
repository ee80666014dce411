"""Behavior-aware bidding for service providers in cellular/WiFi networks.

Modules, bottom up: ``radio`` (path loss and budgets), ``guarantee``
(fading-based service guarantees), ``market`` (the leader-follower game),
``behavior`` (probability weighting of users), ``learn`` (acceptance SVM),
``dpob`` (grid bid optimization), ``sim`` (scenarios and sweeps) and ``cli``.
"""

from .behavior import EUT, WeightingFn, prelec, prelec_weighting
from .dpob import BidGrid, MdpConfig, brute_force_best_bid, measure_convergence
from .errors import (
    ConfigError,
    DegenerateDataError,
    HetbidError,
    InfeasibleError,
    InvalidDataError,
    InvalidParameterError,
    NoDemandError,
)
from .guarantee import RayleighGuarantee, min_bw_for_rate_constraint, service_guarantee
from .learn import SvmConfig, SvmModel, train_svm
from .market import Bid, CostParams, PricingParams, solve_max1, solve_sp_best_response, stackelberg_round
from .radio import Station, UserNode, hata_path_loss, link_budget
from .sim import ExperimentConfig, MetricsRow, ScenarioConfig, generate_scenario, run_experiment, sweep_report

__version__ = "0.1.0"
