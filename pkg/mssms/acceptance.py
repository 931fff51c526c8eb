import itertools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Dict, List, Optional

import numpy as np
from tqdm import tqdm

from .config import DEFAULT_CONFIG
from .generators import (
    compositions,
    det_lb_value,
    g_value,
    gen_coupon_collector,
    gen_harmonic_line,
    gen_integrality_gap,
    gen_nested,
    gen_random,
    gen_wfa_counterexamples,
    phase_fault_bound,
)
from .harness import adversary_game, run_trials
from .hitting import SetSystem, brute_force_min_hitting_sets, enumerate_min_hitting_sets
from .metric import (
    MetricSpace,
    config_distance,
    config_distance_bruteforce,
    explicit_space,
    format_fraction,
    line_space,
    uniform_space,
)
from .offline import (
    Instance,
    build_lp,
    opt_bruteforce,
    opt_dp,
    opt_kserver_flow,
    opt_mss_path,
    round_to_kl,
    solve_lp,
    solve_lp_float,
    verify_schedule,
)
from .online import HittingSetAlgorithm, get_algorithm, harmonic_expected_cost, simulate, skew_pattern_holds
from .workfunction import wf_quasiconvex_check, wf_replay, wf_support

logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


Check = Callable[[Dict[str, Any]], CheckResult]


def _settings(config: Dict[str, Any], suite: str) -> Dict[str, Any]:
    return (config.get("acceptance") or {}).get(suite) or {}


def _harmonic_number(n: int) -> Fraction:
    return sum((Fraction(1, i) for i in range(1, n + 1)), Fraction(0))


def harmonic_line_cost(m: int) -> Fraction:
    """Expected Harmonic cost on the line instance: 1 + 2 * sum_{i=1..m} 1/(i+1)."""
    return 1 + 2 * sum((Fraction(1, i + 1) for i in range(1, m + 1)), Fraction(0))


# --- bounds -----------------------------------------------------------------


def check_hs_phase_bound(config: Dict[str, Any]) -> CheckResult:
    settings = _settings(config, "bounds")
    cases = settings.get("hs_cases", 200)
    max_m = settings.get("hs_max_m", 200)
    rng = np.random.default_rng(settings.get("seed", 0))
    for case in tqdm(range(cases), desc="hs phase bound", leave=False):
        k, l = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        n = int(rng.integers(l + 1, 11))
        m = int(rng.integers(1, max_m + 1))
        inst = gen_random({"kind": "uniform", "n": n}, k, l, m, rng)
        online = HittingSetAlgorithm(inst.space, inst.initial)
        trace = simulate(online, inst.requests)
        worst = max(trace.phase_fault_counts().values(), default=0)
        if worst > phase_fault_bound(k, l):
            return CheckResult("hs_phase_bound", False, f"case {case}: {worst} faults, k={k}, l={l}")
        if not skew_pattern_holds(trace):
            return CheckResult("hs_phase_bound", False, f"case {case}: skew pattern broken")
    return CheckResult("hs_phase_bound", True, f"{cases} instances")


def check_lower_bound_values(config: Dict[str, Any]) -> CheckResult:
    expected = [(det_lb_value(2, 2), 7), (phase_fault_bound(2, 2), 5)]
    expected += [(det_lb_value(1, l), l) for l in range(1, 6)]
    expected += [(det_lb_value(k, 1), k) for k in range(1, 6)]
    for k, l in itertools.product(range(1, 5), repeat=2):
        expected.append((sum(g_value(c) for c in compositions(k, l)), det_lb_value(k, l)))
    bad = [pair for pair in expected if pair[0] != pair[1]]
    return CheckResult("lower_bound_values", not bad, f"mismatches: {bad}" if bad else "h(2,2)=7")


def check_adversary_game(config: Dict[str, Any]) -> CheckResult:
    settings = _settings(config, "bounds")
    max_requests = settings.get("adversary_requests", config.get("adversary", {}).get("max_requests", 2000))
    report = adversary_game("greedy", 2, 2, phases=10**9, max_requests=max_requests)
    detail = (
        f"online {format_fraction(report.online_cost)} vs {report.h} x "
        f"{format_fraction(report.min_reference_cost)}"
    )
    passed = report.ratio_certified and report.total_reference_cost <= report.reference_bound
    return CheckResult("adversary_game", passed, detail)


# --- oracles ----------------------------------------------------------------


def _random_small(rng, k_max, l_max, n_max, m_max, k=None, l=None) -> Instance:
    k = k or int(rng.integers(1, k_max + 1))
    l = l or int(rng.integers(1, l_max + 1))
    n = int(rng.integers(max(l, 2), n_max + 1))
    m = int(rng.integers(0, m_max + 1))
    if rng.random() < 0.5:
        descriptor = {"kind": "uniform", "n": n}
    else:
        descriptor = {"kind": "line", "coords": sorted(int(c) for c in rng.choice(20, size=n, replace=False))}
    return gen_random(descriptor, k, l, m, rng)


def check_dp_vs_bruteforce(config: Dict[str, Any]) -> CheckResult:
    settings = _settings(config, "oracles")
    cases = settings.get("bruteforce_cases", 500)
    rng = np.random.default_rng(settings.get("seed", 1))
    done = 0
    while done < cases:
        inst = _random_small(rng, 3, 3, 7, 6)
        if (inst.k * inst.l) ** inst.m > 10**5:
            continue
        dp_cost, schedule = opt_dp(inst)
        if dp_cost != opt_bruteforce(inst) or verify_schedule(inst, schedule) != dp_cost:
            return CheckResult("dp_vs_bruteforce", False, f"case {done}: {inst.requests}")
        done += 1
    return CheckResult("dp_vs_bruteforce", True, f"{cases} instances")


def check_dp_vs_flow(config: Dict[str, Any]) -> CheckResult:
    settings = _settings(config, "oracles")
    cases = settings.get("flow_cases", 200)
    rng = np.random.default_rng(settings.get("seed", 1) + 1)
    for case in range(cases):
        inst = _random_small(rng, 3, 1, 8, 8, l=1)
        flow_cost, schedule = opt_kserver_flow(inst)
        if flow_cost != opt_dp(inst)[0] or verify_schedule(inst, schedule) != flow_cost:
            return CheckResult("dp_vs_flow", False, f"case {case}: {inst.requests}")
    return CheckResult("dp_vs_flow", True, f"{cases} instances")


def check_dp_vs_path(config: Dict[str, Any]) -> CheckResult:
    settings = _settings(config, "oracles")
    cases = settings.get("path_cases", 200)
    rng = np.random.default_rng(settings.get("seed", 1) + 2)
    for case in range(cases):
        inst = _random_small(rng, 1, 3, 8, 10, k=1)
        if opt_mss_path(inst) != opt_dp(inst)[0]:
            return CheckResult("dp_vs_path", False, f"case {case}: {inst.requests}")
    return CheckResult("dp_vs_path", True, f"{cases} instances")


def _hitting_count_ok(system: SetSystem, cap: int) -> bool:
    found = enumerate_min_hitting_sets(system, cap)
    oracle = brute_force_min_hitting_sets(system, cap)
    if found != oracle:
        return False
    if found is None:
        return True
    size = len(found[0])
    return len(found) <= system.l**size


def check_hitting_set_counts(config: Dict[str, Any]) -> CheckResult:
    """Counts stay within l^s: exhaustive on small ground sets, sampled up to 7 points and l = 3."""
    settings = _settings(config, "oracles")
    checked = 0
    for ground in range(1, settings.get("exhaustive_ground", 5) + 1):
        for l in range(1, min(2, ground) + 1):
            edges = list(itertools.combinations(range(ground), l))
            for mask in range(1, 2 ** len(edges)):
                system = SetSystem.of(e for bit, e in enumerate(edges) if mask >> bit & 1)
                if not _hitting_count_ok(system, ground):
                    return CheckResult("hitting_set_counts", False, f"{system.sets}")
                checked += 1
    rng = np.random.default_rng(settings.get("seed", 1) + 3)
    for _ in range(settings.get("random_systems", 300)):
        ground, l = int(rng.integers(3, 8)), int(rng.integers(1, 4))
        l = min(l, ground)
        edges = list(itertools.combinations(range(ground), l))
        chosen = rng.choice(len(edges), size=int(rng.integers(1, min(len(edges), 12) + 1)), replace=False)
        system = SetSystem.of(edges[i] for i in chosen)
        if not _hitting_count_ok(system, ground):
            return CheckResult("hitting_set_counts", False, f"{system.sets}")
        checked += 1
    for l in range(1, 4):
        for s in range(1, 4):
            disjoint = SetSystem.of(range(b * l, (b + 1) * l) for b in range(s))
            if len(enumerate_min_hitting_sets(disjoint, s)) != l**s:
                return CheckResult("hitting_set_counts", False, f"disjoint l={l}, s={s}")
    return CheckResult("hitting_set_counts", True, f"{checked} systems")


def check_config_distance(config: Dict[str, Any]) -> CheckResult:
    rng = np.random.default_rng(_settings(config, "oracles").get("seed", 1) + 4)
    for _ in range(200):
        n, k = int(rng.integers(2, 8)), int(rng.integers(1, 5))
        coords = sorted(int(c) for c in rng.choice(30, size=n, replace=False))
        inst = gen_random({"kind": "line", "coords": coords}, k, 1, 0, rng)
        other = tuple(sorted(int(p) for p in rng.choice(n, size=k)))
        if config_distance(inst.space, inst.initial, other) != config_distance_bruteforce(
            inst.space, inst.initial, other
        ):
            return CheckResult("config_distance", False, f"{inst.initial} vs {other}")
    return CheckResult("config_distance", True, "200 pairs")


# --- lp ---------------------------------------------------------------------


def check_integrality_gap(config: Dict[str, Any]) -> CheckResult:
    rounds = _settings(config, "lp").get("gap_rounds", 3)
    inst = gen_integrality_gap(2, 2, rounds)
    model = build_lp(inst)
    sol = solve_lp(model)
    integral, _ = opt_dp(inst)
    rounded = round_to_kl(inst, sol, model)
    verify_schedule(rounded.instance, rounded.schedule)
    verify_schedule(inst, rounded.schedule, initial=list(inst.initial) * inst.l)
    passed = (
        sol.objective <= 2
        and integral >= rounds
        and rounded.cost <= inst.l * sol.objective
    )
    detail = (
        f"LP {format_fraction(sol.objective)}, OPT {format_fraction(integral)}, "
        f"rounded {format_fraction(rounded.cost)}"
    )
    return CheckResult("integrality_gap", passed, detail)


def check_lp_random(config: Dict[str, Any]) -> CheckResult:
    settings = _settings(config, "lp")
    cases = settings.get("random_cases", 100)
    rng = np.random.default_rng(settings.get("seed", 2))
    for case in tqdm(range(cases), desc="lp random", leave=False):
        inst = _random_small(rng, 2, 2, 5, 5)
        model = build_lp(inst)
        sol = solve_lp(model)
        if not sol.verify(model):
            return CheckResult("lp_random", False, f"case {case}: solution fails verification")
        if abs(solve_lp_float(model) - float(sol.objective)) > 1e-6:
            return CheckResult("lp_random", False, f"case {case}: float solver disagrees")
        opt, _ = opt_dp(inst)
        rounded = round_to_kl(inst, sol, model)
        verify_schedule(inst, rounded.schedule, initial=list(inst.initial) * inst.l)
        if sol.objective > opt or rounded.cost > inst.l * sol.objective:
            return CheckResult("lp_random", False, f"case {case}: LP {sol.objective}, OPT {opt}")
    return CheckResult("lp_random", True, f"{cases} instances")


# --- counterexamples --------------------------------------------------------


def check_quasiconvex(config: Dict[str, Any]) -> CheckResult:
    inst = gen_wfa_counterexamples("quasiconvex")
    w = wf_replay(inst.space, inst.initial, inst.requests)
    X, Y = (2, 4), (3, 5)
    others_above = all(v > 2 for C, v in w.values.items() if C not in (X, Y))
    report = wf_quasiconvex_check(w, X, Y)
    passed = w(X) == 2 and w(Y) == 2 and others_above and not report.holds
    return CheckResult("wfa_quasiconvex", passed, f"w(X)={w(X)}, w(Y)={w(Y)}")


def check_support(config: Dict[str, Any]) -> CheckResult:
    m = _settings(config, "counterexamples").get("support_m", 3)
    inst = gen_wfa_counterexamples("support", m)
    w = wf_replay(inst.space, inst.initial, inst.requests)
    last = {2 * m, 2 * m + 1}
    expected = {
        (a, b) for a, b in itertools.combinations(range(inst.space.n), 2) if len(last & {a, b}) == 1
    }
    support = set(wf_support(w))
    return CheckResult("wfa_support", support == expected, f"|support|={len(support)}, expected {len(expected)}")


def check_k1_support(config: Dict[str, Any]) -> CheckResult:
    rng = np.random.default_rng(_settings(config, "counterexamples").get("seed", 3))
    for _ in range(100):
        inst = _random_small(rng, 1, 3, 7, 6, k=1)
        if not inst.requests:
            continue
        w = wf_replay(inst.space, inst.initial, inst.requests)
        if any(X[0] not in inst.requests[-1] for X in wf_support(w)):
            return CheckResult("k1_support", False, f"{inst.requests}")
    return CheckResult("k1_support", True, "100 instances")


def check_harmonic_exact(config: Dict[str, Any]) -> CheckResult:
    for m in range(1, _settings(config, "counterexamples").get("harmonic_max_m", 20) + 1):
        inst = gen_harmonic_line(m)
        exact = harmonic_expected_cost(inst.space, inst.initial, inst.requests)
        if exact != harmonic_line_cost(m) or exact != 2 * _harmonic_number(m + 1) - 1:
            return CheckResult("harmonic_exact", False, f"m={m}: {exact}")
        if opt_mss_path(inst) != 1:
            return CheckResult("harmonic_exact", False, f"m={m}: OPT is not 1")
    # 2 H_10 - 1 is reached with nine {-1, i} requests before the final {-1}
    value = float(harmonic_line_cost(9))
    return CheckResult("harmonic_exact", abs(value - 4.857936) < 1e-6, f"m=9 -> {value:.6f}")


def _wfa_spaces(n: int, count: int, rng: np.random.Generator) -> List[MetricSpace]:
    """A uniform space, then `count` random line spaces and `count` random L1 grid spaces."""
    spaces = [uniform_space(n)]
    for _ in range(count):
        spaces.append(line_space(sorted(int(c) for c in rng.choice(10 * n, size=n, replace=False))))
    for _ in range(count):
        grid = [tuple(int(c) for c in rng.integers(0, 6, size=2)) for _ in range(n)]
        while len(set(grid)) < n:
            grid = [tuple(int(c) for c in rng.integers(0, 6, size=2)) for _ in range(n)]
        spaces.append(explicit_space([[abs(a[0] - b[0]) + abs(a[1] - b[1]) for b in grid] for a in grid]))
    return spaces


def check_wfa_kserver(config: Dict[str, Any]) -> CheckResult:
    """WFA cost <= (2k-1) OPT on every singleton sequence over small uniform, line and grid spaces."""
    settings = _settings(config, "counterexamples")
    n, k, max_m = settings.get("wfa_n", 4), 2, settings.get("wfa_max_m", 4)
    rng = np.random.default_rng(settings.get("seed", 5))
    checked = 0
    for space in _wfa_spaces(n, settings.get("wfa_random_spaces", 2), rng):
        for initial in itertools.combinations(range(n), k):
            for m in range(1, max_m + 1):
                for points in itertools.product(range(n), repeat=m):
                    inst = Instance.build(space, initial, [(p,) for p in points], l=1)
                    online = get_algorithm("wfa", space, initial)
                    cost = simulate(online, inst.requests).total_cost
                    opt, _ = opt_dp(inst)
                    if cost > (2 * k - 1) * opt:
                        detail = f"{space.kind} {initial} {points}: {cost} vs {opt}"
                        return CheckResult("wfa_kserver", False, detail)
                    checked += 1
    return CheckResult("wfa_kserver", True, f"{checked} sequences")


# --- randomized -------------------------------------------------------------


def check_rhs_subphases(config: Dict[str, Any]) -> CheckResult:
    settings = _settings(config, "randomized")
    trials = settings.get("trials", 10_000)
    workers = int(config.get("montecarlo", {}).get("workers", 1))
    for k, l in itertools.product(range(1, settings.get("max_k", 3) + 1), range(1, settings.get("max_l", 3) + 1)):
        inst = gen_nested(k, l, settings.get("phases", 2))
        outcomes = run_trials(inst, "rhs", settings.get("seed", 4), trials, config.get("algorithms"), workers)
        per_s: Dict[int, List[int]] = {}
        for outcome in outcomes:
            for (_, s), faults in outcome.subphase_faults.items():
                per_s.setdefault(s, []).append(faults)
        for s, counts in per_s.items():
            values = np.array(counts, dtype=float)
            sigma = values.std(ddof=1) / math.sqrt(len(values)) if len(values) > 1 else 0.0
            bound = 1 + float(_harmonic_number(l**s)) + 3 * sigma
            if values.mean() > bound:
                return CheckResult("rhs_subphases", False, f"k={k}, l={l}, s={s}: {values.mean():.3f} > {bound:.3f}")
    return CheckResult("rhs_subphases", True, f"{trials} trials per (k,l)")


def check_coupon_collector(config: Dict[str, Any]) -> CheckResult:
    """
    Mean length matches C(k+l,l) H(kl) - 1 and OPT <= 1, with OPT = 1 exactly
    when the complement of the starting servers is requested.
    """
    settings = _settings(config, "randomized")
    draws = settings.get("coupon_draws", 10_000)
    rng = np.random.default_rng(settings.get("seed", 4) + 1)
    lengths = []
    for _ in tqdm(range(draws), desc="coupon collector", leave=False):
        draw = gen_coupon_collector(2, 2, rng)
        lengths.append(draw.length)
        opt, _ = opt_dp(draw.instance)
        outside = tuple(p for p in range(4) if p not in draw.instance.initial)
        if opt != (1 if outside in draw.instance.requests else 0):
            return CheckResult("coupon_collector", False, f"OPT {opt} on {draw.instance.requests}")
    mean = float(np.mean(lengths))
    return CheckResult("coupon_collector", abs(mean - 11.5) <= 0.3, f"mean length {mean:.3f}")


def check_harmonic_montecarlo(config: Dict[str, Any]) -> CheckResult:
    settings = _settings(config, "randomized")
    trials = settings.get("harmonic_trials", 20_000)
    workers = int(config.get("montecarlo", {}).get("workers", 1))
    inst = gen_harmonic_line(10)
    outcomes = run_trials(inst, "harmonic", settings.get("seed", 4) + 2, trials, workers=workers)
    costs = np.array([float(o.cost) for o in outcomes])
    sigma = costs.std(ddof=1) / math.sqrt(trials)
    exact = float(harmonic_line_cost(10))
    return CheckResult(
        "harmonic_montecarlo", abs(costs.mean() - exact) <= 3 * sigma, f"mean {costs.mean():.4f} vs {exact:.4f}"
    )


SUITES: Dict[str, List[Check]] = {
    "bounds": [check_hs_phase_bound, check_lower_bound_values, check_adversary_game],
    "oracles": [
        check_dp_vs_bruteforce,
        check_dp_vs_flow,
        check_dp_vs_path,
        check_hitting_set_counts,
        check_config_distance,
    ],
    "lp": [check_integrality_gap, check_lp_random],
    "counterexamples": [
        check_quasiconvex,
        check_support,
        check_k1_support,
        check_harmonic_exact,
        check_wfa_kserver,
    ],
    "randomized": [check_rhs_subphases, check_coupon_collector, check_harmonic_montecarlo],
}


def run_suite(name: str, config: Optional[Dict[str, Any]] = None) -> List[CheckResult]:
    """Runs every check of a suite; a crashing check counts as a failure."""
    if name not in SUITES:
        raise ValueError(f"Unknown acceptance suite: '{name}'")
    config = config or DEFAULT_CONFIG
    results = []
    for check in SUITES[name]:
        try:
            result = check(config)
        except Exception as e:
            logging.error(f"Check {check.__name__} crashed: {e}", exc_info=True)
            result = CheckResult(check.__name__.removeprefix("check_"), False, f"error: {e}")
        logging.info(f"[{name}] {result.name}: {'PASS' if result.passed else 'FAIL'} {result.detail}")
        results.append(result)
    return results
