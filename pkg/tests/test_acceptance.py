"""End-to-end acceptance checks.

Each test prints one ``criterion N: PASS|FAIL`` line (collected again in the
terminal summary).  Measured figures that carry no pass/fail tolerance are
printed next to them.
"""

import math
import time

import numpy as np
import pytest

from hetbid import behavior, dpob as dp, learn, market, sim
from hetbid.guarantee import RayleighGuarantee, min_bw_for_rate_constraint
from hetbid.market import CostParams, PricingParams
from hetbid.sim import ExperimentConfig, ScenarioConfig

REPORT: list[str] = []
PAIRED_SEEDS = range(1, 21)
# headline SP and user utility factors of the original study, reported for comparison
REFERENCE_SP_FACTOR = 3.27
REFERENCE_USER_FACTOR = 1.65


def record(n, ok, detail, started):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - started:.1f}s) {detail}"
    REPORT.append(line)
    print(line)
    return ok


def test_criterion_1_prelec_shape():
    t = time.perf_counter()
    rng = np.random.default_rng(1)
    p = rng.uniform(0.0, 1.0, size=1000)
    p = p[np.abs(p - 1 / math.e) > 1e-9]
    fixed, over, under = 0.0, True, True
    for alpha in [k / 10 for k in range(1, 10)]:
        fixed = max(fixed, abs(behavior.prelec(1 / math.e, alpha) - 1 / math.e))
        w = behavior.prelec(p, alpha)
        low = (p > 0) & (p < 1 / math.e)
        over &= bool(np.all(w[low] > p[low]))
        under &= bool(np.all(w[p > 1 / math.e] < p[p > 1 / math.e]))
    ok = fixed <= 1e-12 and over and under
    record(1, ok, f"max |w(1/e)-1/e| = {fixed:.1e}, overweighting below 1/e: {over}, underweighting above: {under}", t)
    assert ok


def _max2_instance(rng):
    model = RayleighGuarantee(rng.uniform(0.5, 500.0))
    bw_max = rng.uniform(0.5, 20.0)
    b_max = bw_max * math.log2(1 + model.mean_snr)
    pricing = PricingParams(rng.uniform(0.1, 3.0), rng.uniform(1.2, 3.0))
    cost = CostParams(rng.uniform(0.0, 0.5), rng.uniform(0.0, 0.5))
    return model, bw_max, b_max, pricing, cost


def test_criterion_2_binding_rate_constraint():
    t = time.perf_counter()
    rng = np.random.default_rng(2)
    b_min, n = 1.0, 200
    checked, slack_ok, utility_ok = 0, 0, 0
    while checked < 100:
        model, bw_max, b_max, pricing, cost = _max2_instance(rng)
        br = market.solve_sp_best_response(pricing, cost, model, bw_max, b_max, b_min)
        rates = b_min + (b_max - b_min) * np.arange(1, n + 1) / n
        bws = bw_max * np.arange(1, n + 1) / n
        B, W = np.meshgrid(rates, bws, indexing="ij")
        expected = B * model.survival(B, W)
        profit = np.where(expected >= b_min, pricing(B) - cost(B, W), -np.inf)
        i, j = np.unravel_index(np.argmax(profit), profit.shape)
        if br is None or not np.isfinite(profit[i, j]) or profit[i, j] < 0:
            continue
        checked += 1
        # one grid step of the constraint: its change over one bandwidth step
        below = expected[i, j - 1] if j > 0 else 0.0
        slack_ok += expected[i, j] - b_min <= expected[i, j] - below
        step = (pricing(rates[-1]) - pricing(rates[-2])) + cost.c_rate * (rates[1] - rates[0]) + cost.c_bw * (bws[1] - bws[0])
        utility_ok += abs(br.profit - profit[i, j]) <= step
    ok = slack_ok == checked and utility_ok == checked
    record(2, ok, f"binding within one step: {slack_ok}/{checked}, 1-D utility within one step: {utility_ok}/{checked}", t)
    assert ok


def test_criterion_3_guarantee_round_trip():
    t = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(10_000):
        model = RayleighGuarantee(10 ** rng.uniform(-2, 4))
        b_min = 10 ** rng.uniform(-1, 1.5)
        b = b_min * (1 + 10 ** rng.uniform(-3, 1.5))
        bw = min_bw_for_rate_constraint(model, b, b_min)
        worst = max(worst, abs(b * model.survival(b, bw) - b_min) / b_min)
    ok = worst <= 1e-9
    record(3, ok, f"10000 triples, worst relative error {worst:.1e}", t)
    assert ok


def test_criterion_4_dpob_matches_exhaustive_search():
    t = time.perf_counter()
    rng = np.random.default_rng(4)
    trials, equal = 200, 0
    for k in range(trials):
        m, n = rng.integers(1, 33, size=2)
        grid = dp.BidGrid.uniform(1.0, rng.uniform(2.0, 40.0), rng.uniform(1.0, 20.0), int(m), int(n))
        clf = dp.LinearThreshold.random(grid, rng)
        pricing = PricingParams(rng.uniform(0.2, 2.0), rng.uniform(1.1, 3.0))
        cost = CostParams(rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0))
        res = dp.dpob(grid, int(rng.integers(grid.size)), clf, pricing, cost, dp.MdpConfig(seed=k))
        equal += res.utility == dp.brute_force_best_bid(grid, clf, pricing, cost)[1]
    ok = equal == trials
    record(4, ok, f"{equal}/{trials} trials equal", t)
    assert ok


def test_criterion_5_iteration_growth():
    t = time.perf_counter()
    rows = dp.measure_convergence([64, 256, 1024, 4096], trials=100, seed=5)
    within = [r.mean_iterations <= 3 * r.log_bound for r in rows]
    ratio = rows[-1].mean_iterations / rows[0].mean_iterations
    ok = all(within) and ratio < 8
    detail = ", ".join(f"|S|={r.states}: {r.mean_iterations:.1f} vs {3 * r.log_bound:.1f}" for r in rows)
    record(5, ok, f"{detail}; growth 4096/64 = {ratio:.2f} (< 8)", t)
    assert ratio < 8
    assert all(within), detail


def test_criterion_6_svm_accuracy():
    t = time.perf_counter()
    perfect = 0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        w = rng.normal(size=3)
        X = rng.normal(size=(800, 3)) * [2.0, 50.0, 0.5] + [5.0, 30.0, 1.0]
        s = ((X - X.mean(0)) / X.std(0)) @ (w / np.linalg.norm(w))
        keep = np.abs(s) > 0.2
        data = [learn.Sample(tuple(x), 1 if v > 0 else -1) for x, v in zip(X[keep][:200], s[keep][:200])]
        perfect += learn.accuracy(learn.train_svm(data), data) == 1.0

    cfg = ExperimentConfig()
    weighting = behavior.prelec_weighting(cfg.prelec_alpha)
    held_out, pooled = [], []
    for seed in range(5):
        population = sim.with_load(sim.generate_scenario(ScenarioConfig(), seed=seed), 200)
        rng = np.random.default_rng(seed)
        hits = total = 0
        for ul in sim.attach(population)[:30]:
            for ctx in ul.contexts:
                history = sim.link_history(ul, ctx, population.config.b_min, weighting, 1000, rng, cfg.grid)
                if not history:
                    continue
                clf = sim.train_link_classifier(history[:500], cfg.svm)
                X = np.array([[b.rate, b.price, b.bandwidth] for b, _ in history[500:]])
                y = np.array([d for _, d in history[500:]])
                hits += int(np.sum(clf(X) == y))
                total += len(y)
        held_out.append(hits / total)
        # one classifier shared by all users, for comparison only
        train = sim.bootstrap_history(population, cfg.prelec_alpha, 25, seed, cfg.grid, max_users=20)
        test = sim.bootstrap_history(population, cfg.prelec_alpha, 25, seed + 100, cfg.grid, max_users=20)
        model = learn.train_svm(learn.collect_samples(train[:500]), cfg.svm)
        pooled.append(learn.accuracy(model, learn.collect_samples(test)))
    ok = perfect == 10 and min(held_out) >= 0.90
    record(
        6,
        ok,
        f"separable sets at 100%: {perfect}/10; per-link held-out accuracy {', '.join(f'{a:.3f}' for a in held_out)}"
        f"; single shared classifier {', '.join(f'{a:.3f}' for a in pooled)} (not gated)",
        t,
    )
    assert ok


@pytest.fixture(scope="module")
def paired_sweeps():
    t = time.perf_counter()
    rows = {}
    for seed in PAIRED_SEEDS:
        scenario = sim.generate_scenario(ScenarioConfig(), seed=seed)
        for mode in sim.MODES:
            rows[seed, mode] = sim.run_experiment(scenario, ExperimentConfig(mode=mode))
    return rows, t


def _matrix(rows, mode, field):
    return np.array([[getattr(r, field) for r in rows[s, mode]] for s in PAIRED_SEEDS])


def test_criterion_7_directional_reproduction(paired_sweeps):
    rows, t = paired_sweeps
    per_sweep = (time.perf_counter() - t) / len(PAIRED_SEEDS)
    loads = [r.U for r in rows[PAIRED_SEEDS[0], "eut"]]
    sp = {m: _matrix(rows, m, "sum_sp_utility").mean(0) for m in sim.MODES}
    users = {m: _matrix(rows, m, "sum_user_utility").mean(0) for m in sim.MODES}
    median_g = _matrix(rows, "eut", "median_guarantee").mean(0)

    high = median_g > 1 / math.e
    a_fail = [U for U, h, e, p in zip(loads, high, sp["eut"], sp["pt_deviation"]) if h and e < p]
    b_fail_sp = [U for U, d, p in zip(loads, sp["dpob"], sp["pt_deviation"]) if d < p]
    b_fail_user = [U for U, d, p in zip(loads, users["dpob"], users["pt_deviation"]) if d < p]
    sp_ratio = sp["dpob"].mean() / sp["eut"].mean()
    user_ratio = users["dpob"].mean() / users["eut"].mean()
    a_ok = bool(high.any()) and not a_fail
    b_ok = not b_fail_sp and not b_fail_user
    c_ok = sp_ratio >= 1.0
    fast = per_sweep < 300
    ok = a_ok and b_ok and c_ok and fast

    for k, U in enumerate(loads):
        print(
            f"  U={U:3d} median g={median_g[k]:.3f}  SP eut/pt/dpob {sp['eut'][k]:8.1f} {sp['pt_deviation'][k]:8.1f} {sp['dpob'][k]:8.1f}"
            f"  users {users['eut'][k]:8.0f} {users['pt_deviation'][k]:8.0f} {users['dpob'][k]:8.0f}"
        )
    record(
        7,
        ok,
        f"{len(PAIRED_SEEDS)} paired seeds; (a) eut>=pt at high load {'ok' if a_ok else f'fails at U={a_fail}'}"
        f"; (b) dpob>=pt {'ok' if b_ok else f'SP fails at U={b_fail_sp}, users fail at U={b_fail_user}'}"
        f"; (c) dpob/eut SP {sp_ratio:.3f} (reference {REFERENCE_SP_FACTOR}), users {user_ratio:.3f} (reference {REFERENCE_USER_FACTOR})"
        f"; {per_sweep:.0f}s per three-mode sweep",
        t,
    )
    assert a_ok, f"eut < pt_deviation at high load U={a_fail}"
    assert c_ok, f"sweep-average dpob/eut SP ratio {sp_ratio:.3f}"
    assert fast
    assert b_ok, f"dpob < pt_deviation: SP at U={b_fail_sp}, users at U={b_fail_user}"


def test_criterion_8_weighting_intensity():
    t = time.perf_counter()
    strong_sp, mild_sp, strong_user, mild_user = [], [], [], []
    for seed in PAIRED_SEEDS:
        scenario = sim.generate_scenario(ScenarioConfig(), seed=seed)
        eut = sim.run_experiment(scenario, ExperimentConfig(mode="eut"))
        gaps = {}
        for alpha in (0.5, 0.8):
            pt = sim.run_experiment(scenario, ExperimentConfig(mode="pt_deviation", prelec_alpha=alpha))
            gaps[alpha] = (
                sum(abs(e.sum_sp_utility - p.sum_sp_utility) for e, p in zip(eut, pt)),
                sum(abs(e.sum_user_utility - p.sum_user_utility) for e, p in zip(eut, pt)),
            )
        strong_sp.append(gaps[0.5][0])
        mild_sp.append(gaps[0.8][0])
        strong_user.append(gaps[0.5][1])
        mild_user.append(gaps[0.8][1])
    ok = np.mean(strong_sp) >= np.mean(mild_sp) and np.mean(strong_user) >= np.mean(mild_user)
    seeds_ok = np.mean(np.array(strong_sp) >= np.array(mild_sp))
    record(
        8,
        ok,
        f"mean sweep |eut-pt| SP: {np.mean(strong_sp):.1f} at alpha 0.5 vs {np.mean(mild_sp):.1f} at 0.8"
        f"; users: {np.mean(strong_user):.0f} vs {np.mean(mild_user):.0f}; SP gap larger on {seeds_ok:.0%} of seeds",
        t,
    )
    assert ok


def test_criterion_9_byte_identical_sweeps():
    t = time.perf_counter()

    def sweep():
        scenario = sim.generate_scenario(ScenarioConfig(), seed=1)
        rows = []
        for mode in sim.MODES:
            rows += sim.run_experiment(scenario, ExperimentConfig(mode=mode))
        return sim.sweep_report(rows).encode()

    first, second = sweep(), sweep()
    ok = first == second and len(first.splitlines()) == 1 + 3 * len(sim.DEFAULT_LOADS)
    record(9, ok, f"{len(first)} bytes, identical: {first == second}", t)
    assert ok
