"""Command-line entry point: ``hetbid <command> [options]``.

Exit codes: 0 success, 2 configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import sys
from contextlib import contextmanager

from . import dpob, learn, market, sim
from .errors import ConfigError, DegenerateDataError, HetbidError, InvalidDataError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3

log = logging.getLogger("hetbid")


class UsageError(ConfigError):
    """Bad command-line values."""


# ------------------------------------------------------------- parsing ---

def parse_loads(text: str) -> tuple[int, ...]:
    """``"50,100,150"`` or an inclusive range ``"50:500:50"``."""
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) != 3 or parts[2] <= 0:
                raise ValueError
            start, stop, step = parts
            loads = tuple(range(start, stop + 1, step))
        else:
            loads = tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise UsageError(f"bad --loads value {text!r}; use 50,100 or 50:500:50") from None
    if not loads or any(u < 0 for u in loads):
        raise UsageError(f"bad --loads value {text!r}")
    return loads


def parse_grid(text: str) -> tuple[int, int]:
    try:
        m, n = (int(p) for p in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"bad --grid value {text!r}; use MxN such as 32x32") from None
    if m < 1 or n < 1:
        raise UsageError("grid sizes must be positive")
    return m, n


def parse_modes(text: str) -> tuple[str, ...]:
    modes = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in modes if m not in sim.MODES]
    if bad or not modes:
        raise UsageError(f"unknown modes {bad}; choose from {', '.join(sim.MODES)}")
    return modes


def parse_sizes(text: str) -> list:
    sizes = []
    for part in text.split(","):
        part = part.strip().lower()
        try:
            sizes.append(tuple(int(v) for v in part.split("x")) if "x" in part else int(part))
        except ValueError:
            raise UsageError(f"bad grid size {part!r}") from None
    return sizes


# ------------------------------------------------------------- helpers ---

def _configs(args) -> tuple[sim.ScenarioConfig, sim.ExperimentConfig]:
    if args.config:
        scen_cfg, exp_cfg = sim.load_config(args.config)
    else:
        scen_cfg, exp_cfg = sim.ScenarioConfig(), sim.ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        scen_cfg = dataclasses.replace(scen_cfg, seed=args.seed)
    changes = {}
    if getattr(args, "alpha", None) is not None:
        changes["prelec_alpha"] = args.alpha
    if getattr(args, "grid", None) is not None:
        changes["grid"] = args.grid
    if getattr(args, "loads", None) is not None:
        changes["loads"] = args.loads
    if changes:
        try:
            exp_cfg = dataclasses.replace(exp_cfg, **changes)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    return scen_cfg, exp_cfg


def _scenario(args, scen_cfg: sim.ScenarioConfig) -> sim.Scenario:
    if getattr(args, "scenario", None):
        scenario = sim.load_scenario(args.scenario)
        if args.seed is not None:
            scenario = dataclasses.replace(scenario, seed=args.seed)
        return scenario
    return sim.generate_scenario(scen_cfg)


def _load_model(path) -> learn.SvmModel:
    try:
        return learn.load_model(path)
    except OSError as exc:
        raise InvalidDataError(f"cannot read model {path}: {exc}") from exc
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InvalidDataError(f"malformed model {path}: {exc}") from exc


@contextmanager
def _output(path, newline=""):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline=newline) as fh:
            yield fh


def _with_mode(exp_cfg: sim.ExperimentConfig, mode: str) -> sim.ExperimentConfig:
    try:
        return dataclasses.replace(exp_cfg, mode=mode)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _dpob_model(args, exp_cfg, modes):
    """The global model for dpob runs; a given ``--model`` selects the global scope."""
    if "dpob" not in modes:
        return exp_cfg, None
    if args.model:
        return dataclasses.replace(exp_cfg, classifier_scope="global"), _load_model(args.model)
    if exp_cfg.classifier_scope == "global":
        raise UsageError("dpob with classifier_scope: global requires --model")
    return exp_cfg, None


HISTORY_HEADER = ["sp_id", "rate", "price", "bandwidth", "guarantee", "accepted"]


def write_history(history, fh) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(HISTORY_HEADER)
    for bid, accepted in history:
        writer.writerow([bid.sp_id, repr(bid.rate), repr(bid.price), repr(bid.bandwidth), repr(bid.guarantee), int(accepted)])


def read_history(path) -> list[tuple[market.Bid, bool]]:
    try:
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames != HISTORY_HEADER:
                raise InvalidDataError(f"{path}: expected columns {HISTORY_HEADER}")
            return [
                (
                    market.Bid(int(r["sp_id"]), float(r["rate"]), float(r["price"]), float(r["bandwidth"]), float(r["guarantee"])),
                    r["accepted"] == "1",
                )
                for r in reader
            ]
    except OSError as exc:
        raise InvalidDataError(f"cannot read history {path}: {exc}") from exc
    except (ValueError, KeyError) as exc:
        raise InvalidDataError(f"malformed history {path}: {exc}") from exc


# ------------------------------------------------------------ commands ---

def cmd_gen_scenario(args) -> int:
    scen_cfg, _ = _configs(args)
    scenario = sim.generate_scenario(scen_cfg, n_users=args.users)
    with _output(args.out) as fh:
        json.dump(sim.scenario_to_dict(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")
    log.info("scenario: %d stations, %d users, seed %d", len(scenario.stations), len(scenario.users), scenario.seed)
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    scen_cfg, exp_cfg = _configs(args)
    scenario = _scenario(args, scen_cfg)
    history = sim.bootstrap_history(scenario, exp_cfg.prelec_alpha, args.bids_per_user or exp_cfg.bootstrap_bids_per_user, scenario.seed, exp_cfg.grid)
    with _output(args.out) as fh:
        write_history(history, fh)
    log.info("%d labeled bids, %d accepted", len(history), sum(a for _, a in history))
    return EXIT_OK


def cmd_train(args) -> int:
    scen_cfg, exp_cfg = _configs(args)
    if args.history:
        history = read_history(args.history)
    else:
        scenario = _scenario(args, scen_cfg)
        history = sim.bootstrap_history(scenario, exp_cfg.prelec_alpha, args.bids_per_user or exp_cfg.bootstrap_bids_per_user, scenario.seed, exp_cfg.grid)
    samples = learn.collect_samples(history)
    model = learn.train_svm(samples, exp_cfg.svm)
    accepted = sum(s.y > 0 for s in samples)
    print(f"samples: {len(samples)} (accepted {accepted}, rejected {len(samples) - accepted})")
    print(f"training accuracy: {learn.accuracy(model, samples):.4f}")
    print(f"iterations: {model.iterations}, duality gap: {model.duality_gap:.3g}")
    if args.out:
        learn.save_model(model, args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    scen_cfg, exp_cfg = _configs(args)
    scenario = _scenario(args, scen_cfg)
    exp_cfg, model = _dpob_model(args, exp_cfg, args.modes)
    rows = [sim.evaluate_population(scenario, _with_mode(exp_cfg, m), model).row for m in args.modes]
    with _output(args.out) as fh:
        fh.write(sim.sweep_report(rows))
    return EXIT_OK


def cmd_sweep(args) -> int:
    scen_cfg, exp_cfg = _configs(args)
    scenario = _scenario(args, scen_cfg)
    exp_cfg, model = _dpob_model(args, exp_cfg, args.modes)
    rows = []
    for m in args.modes:
        rows += sim.run_experiment(scenario, _with_mode(exp_cfg, m), model)
    with _output(args.out) as fh:
        fh.write(sim.sweep_report(rows))
    return EXIT_OK


def cmd_convergence(args) -> int:
    rows = dpob.measure_convergence(args.sizes, trials=args.trials, seed=args.seed if args.seed is not None else 0)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(dpob.ConvergenceRow._fields)
    for r in rows:
        writer.writerow([r.states, r.trials, repr(r.mean_iterations), r.max_iterations, repr(r.log_bound)])
    with _output(args.out) as fh:
        fh.write(buf.getvalue())
    return EXIT_OK


# -------------------------------------------------------------- parser ---

def _typed(fn):
    def parse(text):
        try:
            return fn(text)
        except UsageError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    parse.__name__ = fn.__name__
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetbid", description="Behavior-aware bidding in cellular/WiFi networks.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    def common(p, scenario=True):
        p.add_argument("--config", help="YAML file with scenario and experiment sections")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--out", help="output path (default: stdout)")
        if scenario:
            p.add_argument("--scenario", help="scenario JSON written by gen-scenario")

    p = sub.add_parser("gen-scenario", help="draw stations and users and write them as JSON")
    common(p, scenario=False)
    p.add_argument("--users", type=int, help="number of users (default from config)")
    p.set_defaults(func=cmd_gen_scenario)

    for name, func, text in (
        ("bootstrap", cmd_bootstrap, "record PT-user decisions on random grid bids as CSV"),
        ("train", cmd_train, "train the acceptance SVM and write it as JSON"),
    ):
        p = sub.add_parser(name, help=text)
        common(p)
        p.add_argument("--alpha", type=float, help="Prelec alpha of the polled users")
        p.add_argument("--grid", type=_typed(parse_grid), help="bid grid as MxN")
        p.add_argument("--bids-per-user", type=int, help="bids shown to each covered user")
        if name == "train":
            p.add_argument("--history", help="train on a bootstrap CSV instead of polling the scenario")
        p.set_defaults(func=func)

    for name, func, text in (
        ("simulate", cmd_simulate, "play one round per scenario user and write a metrics row per mode"),
        ("sweep", cmd_sweep, "run the load sweep and write the metrics CSV"),
    ):
        p = sub.add_parser(name, help=text)
        common(p)
        p.add_argument("--modes", type=_typed(parse_modes), default=sim.MODES, help="comma list of eut, pt_deviation, dpob")
        p.add_argument("--alpha", type=float, help="Prelec alpha for pt_deviation and dpob")
        p.add_argument("--grid", type=_typed(parse_grid), help="DPOB grid as MxN")
        p.add_argument("--model", help="trained model JSON; selects the global classifier scope")
        if name == "sweep":
            p.add_argument("--loads", type=_typed(parse_loads), help="loads as 50,100 or 50:500:50")
        p.set_defaults(func=func)

    p = sub.add_parser("convergence", help="mean DPOB iterations on random monotone classifiers")
    p.add_argument("--sizes", type=_typed(parse_sizes), default=[64, 256, 1024, 4096], help="grid sizes, squares or MxN")
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output path (default: stdout)")
    p.set_defaults(func=cmd_convergence)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (InvalidDataError, DegenerateDataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (HetbidError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
