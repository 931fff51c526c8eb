import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from tqdm import tqdm

from .config import DEFAULT_CONFIG, get_budget
from .generators import (
    AdversaryState,
    adversary_account,
    adversary_next,
    default_phase_count,
    det_lb_value,
    phase_threshold,
)
from .online import ALGORITHMS, LazyAdapter, get_algorithm, simulate, verify_trace
from .offline import BudgetExceededError, Instance, opt_dp
from .reporting import RunReport

logging.basicConfig(
    level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s"
)


@dataclass
class TrialOutcome:
    cost: Fraction
    faults: int
    phases: int
    phase_faults: Dict[int, int]
    subphase_faults: Dict[Tuple[int, int], int]


def run_trial(
    inst: Instance,
    algorithm: str,
    seed: int,
    trial: int,
    options: Optional[Dict[str, Dict[str, Any]]] = None,
) -> TrialOutcome:
    """One serve loop, reproducible from (seed, trial); the cost is re-verified."""
    rng = np.random.default_rng([seed, trial])
    online = get_algorithm(algorithm, inst.space, inst.initial, rng=rng, options=options)
    trace = simulate(online, inst.requests)
    verified = verify_trace(inst.space, inst.initial, trace)
    if verified != online.cost:
        raise RuntimeError(f"{algorithm}: recorded cost {online.cost} but trace replays to {verified}")
    return TrialOutcome(
        verified, trace.faults, trace.phases, trace.phase_fault_counts(), trace.subphase_fault_counts()
    )


def _run_trial_args(args) -> TrialOutcome:
    return run_trial(*args)


def run_trials(
    inst: Instance,
    algorithm: str,
    seed: int,
    trials: int,
    options: Optional[Dict[str, Dict[str, Any]]] = None,
    workers: int = 1,
) -> List[TrialOutcome]:
    """Runs the trials in order, fanned out to worker processes when workers > 1."""
    jobs = [(inst, algorithm, seed, trial, options) for trial in range(trials)]
    desc = f"{algorithm} trials"
    if workers > 1 and trials > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunk = max(1, trials // (4 * workers))
            return list(tqdm(pool.map(_run_trial_args, jobs, chunksize=chunk), total=trials, desc=desc, leave=False))
    return [_run_trial_args(job) for job in tqdm(jobs, desc=desc, leave=False, disable=trials == 1)]


def compute_opt(inst: Instance, config: Optional[Dict[str, Any]] = None) -> Optional[Fraction]:
    """Exact OPT via the configuration DP, or None when it does not fit the budget."""
    try:
        cost, _ = opt_dp(inst, budget=get_budget(config))
        return cost
    except BudgetExceededError as e:
        logging.warning(f"OPT not computed for {inst.name or 'instance'}: {e}")
        return None


def run_algorithm(
    inst: Instance,
    algorithm: str,
    seed: int = 0,
    trials: Optional[int] = None,
    config: Optional[Dict[str, Any]] = None,
    workers: Optional[int] = None,
    with_opt: bool = True,
) -> RunReport:
    """
    Runs an online algorithm on an instance. Randomized algorithms are averaged
    over `trials` runs and report the mean cost with its sample stddev.
    """
    config = config or DEFAULT_CONFIG
    montecarlo = config.get("montecarlo", {})
    if algorithm not in ALGORITHMS:
        raise ValueError(f"Unknown algorithm: '{algorithm}'")
    randomized = ALGORITHMS[algorithm].randomized
    if not randomized:
        trials = 1
    elif trials is None:
        trials = int(montecarlo.get("trials", 10_000))
    workers = int(montecarlo.get("workers", 1)) if workers is None else workers

    logging.info(f"Running {algorithm} on {inst.name or 'instance'} ({trials} trial(s))")
    outcomes = run_trials(inst, algorithm, seed, trials, config.get("algorithms"), workers)
    opt = compute_opt(inst, config) if with_opt else None

    report = RunReport(
        algorithm=algorithm,
        instance_id=inst.name,
        seed=seed,
        k=inst.k,
        l=inst.l,
        n=inst.space.n,
        m=inst.m,
        cost=outcomes[0].cost,
        opt=opt,
        phases=outcomes[0].phases if outcomes[0].phases else None,
        faults=outcomes[0].faults,
        trials=trials,
        phase_breakdown=outcomes[0].phase_faults,
    )
    if randomized:
        costs = np.array([float(o.cost) for o in outcomes])
        report.cost = float(costs.mean())
        report.cost_stddev = float(costs.std(ddof=1)) if trials > 1 else 0.0
        report.faults = float(np.mean([o.faults for o in outcomes]))
        phases = [o.phases for o in outcomes]
        report.phases = float(np.mean(phases)) if any(phases) else None
        report.phase_breakdown = {}
    return report


@dataclass
class AdversaryReport:
    algorithm: str
    k: int
    l: int
    D: Fraction
    h: int
    phases: int
    requests: int
    online_cost: Fraction
    reference_costs: Dict[str, Fraction] = field(default_factory=dict)
    establishment_cost: Fraction = Fraction(0)
    threshold: Optional[int] = None

    @property
    def min_reference_cost(self) -> Fraction:
        return min(self.reference_costs.values())

    @property
    def total_reference_cost(self) -> Fraction:
        return sum(self.reference_costs.values(), Fraction(0))

    @property
    def ratio_certified(self) -> bool:
        """online cost >= h(k,l) times the cheapest reference algorithm."""
        return self.online_cost >= self.h * self.min_reference_cost

    @property
    def reference_bound(self) -> Fraction:
        """kDh + r l h + (m - r)."""
        r, m = self.phases, self.requests
        return self.k * self.D * self.h + r * self.l * self.h + (m - r)

    def to_run_report(self, seed: Optional[int] = None) -> RunReport:
        return RunReport(
            algorithm=f"{self.algorithm}+adversary",
            instance_id=f"adversary-k{self.k}-l{self.l}-D{self.D}",
            seed=seed,
            k=self.k,
            l=self.l,
            n=self.l * (self.k + 1),
            m=self.requests,
            cost=self.online_cost,
            opt=self.min_reference_cost,
            phases=self.phases,
            faults=self.requests,
            reference_costs=dict(self.reference_costs),
        )


def adversary_game(
    algorithm: str,
    k: int,
    l: int,
    phases: Optional[int] = None,
    D=None,
    max_requests: Optional[int] = None,
    seed: int = 0,
    options: Optional[Dict[str, Dict[str, Any]]] = None,
) -> AdversaryReport:
    """
    Plays the cluster-space adversary against a lazy-wrapped online algorithm
    until `phases` phase changes or `max_requests` requests. Without `phases`
    the game is long enough for the ratio certificate to apply.
    """
    if max_requests is None:
        max_requests = DEFAULT_CONFIG["adversary"]["max_requests"]
    state = AdversaryState.create(k, l, D)
    if phases is None:
        phases = default_phase_count(k, l, state.D)
        if phases is None:
            phases = max_requests
        logging.info(f"Playing for up to {phases} phase change(s)")
    initial = list(state.online)
    inner = get_algorithm(algorithm, state.space, initial, rng=np.random.default_rng(seed), options=options)
    online = LazyAdapter(inner)
    with tqdm(total=max_requests, desc=f"adversary vs {algorithm}", leave=False) as bar:
        while state.phase < phases and state.requests_issued < max_requests:
            request = adversary_next(state, online.positions)
            moves = online.serve(request)
            adversary_account(state, moves)
            bar.update(1)
    replayed = verify_trace(state.space, initial, online.trace)
    if replayed != state.online_cost:
        raise RuntimeError(f"adversary mirror cost {state.online_cost} differs from trace {replayed}")
    if state.phase < phases:
        logging.info(f"{algorithm} made {state.phase} phase change(s) in {state.requests_issued} requests")
    costs = {f"{ref[0]}#{ref[1] + 1}": cost for ref, cost in sorted(state.costs.items())}
    return AdversaryReport(
        algorithm=algorithm,
        k=k,
        l=l,
        D=state.D,
        h=det_lb_value(k, l),
        phases=state.phase,
        requests=state.requests_issued,
        online_cost=state.online_cost,
        reference_costs=costs,
        establishment_cost=state.establishment_cost,
        threshold=phase_threshold(k, l, state.D),
    )
