import logging

import click
import numpy as np

from . import acceptance, config, generators, harness, instance_io, offline, reporting
from .hitting import SetSystem
from .metric import format_fraction
from .simplex import LPError
from .workfunction import wf_replay, wf_support

DOMAIN_ERRORS = (ValueError, offline.BudgetExceededError, LPError, generators.AdversaryError)


class AppContext:
    def __init__(self, config_path: str = "config.yaml"):
        self.config_path = config_path
        self._config = None

    @property
    def config(self):
        """Configuration, loaded on first access."""
        if self._config is None:
            self._config = config.load_config(self.config_path)
        return self._config

    def report_sink(self, path=None):
        return reporting.get_report_sink(self.config, path)


def _fail(ctx, message: str):
    click.echo(f"Error: {message}", err=True)
    ctx.exit(1)


def _with_wfa_lazy(cfg, wfa_lazy):
    """Configuration with algorithms.wfa.lazy overridden by the command line."""
    if wfa_lazy is None:
        return cfg
    return config.merge_config(cfg, {"algorithms": {"wfa": {"lazy": wfa_lazy == "on"}}})


def _parse_edges(text: str):
    try:
        return SetSystem.of(
            [int(v) for v in edge.split(",")] for edge in text.split(";") if edge.strip()
        )
    except ValueError:
        raise click.BadParameter(f"expected edges like '1,2;2,3', got '{text}'") from None


@click.group()
@click.option("--config", "config_path", default="config.yaml", show_default=True, help="Configuration file.")
@click.option("--verbose", is_flag=True, help="Log at DEBUG level.")
@click.pass_context
def cli(ctx, config_path, verbose):
    """Metrical service systems with multiple servers: algorithms, solvers and bounds."""
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    ctx.obj = AppContext(config_path)


@cli.command()
@click.argument(
    "kind",
    type=click.Choice(
        ["random", "gap", "vc", "harmonic", "wfa-support", "wfa-quasiconvex", "coupon", "nested"]
    ),
)
@click.option("-o", "--output", type=click.Path(dir_okay=False), help="Write here instead of stdout.")
@click.option("--k", "k", type=int, default=2, show_default=True)
@click.option("--l", "l", type=int, default=2, show_default=True)
@click.option("--m", "m", type=int, default=10, show_default=True)
@click.option("--n", "n", type=int, default=6, show_default=True, help="Points of the space (random).")
@click.option(
    "--space", "space_kind", type=click.Choice(["uniform", "line"]), default="uniform", show_default=True,
    help="Metric for 'random'; line points get distinct integer coordinates below 4n.",
)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--edges", default="1,2;2,3;3,1", show_default=True, help="Hyperedges for 'vc'.")
@click.option("--reps", type=int, default=3, show_default=True, help="Repetitions for 'vc'.")
@click.option("--phases", type=int, default=2, show_default=True, help="Phases for 'nested'.")
@click.pass_context
def gen(ctx, kind, output, k, l, m, n, space_kind, seed, edges, reps, phases):
    """Generates an instance file."""
    rng = np.random.default_rng(seed)
    try:
        if kind == "random":
            if space_kind == "line":
                descriptor = {"kind": "line", "coords": sorted(int(c) for c in rng.choice(4 * n, size=n, replace=False))}
            else:
                descriptor = {"kind": "uniform", "n": n}
            inst = generators.gen_random(descriptor, k, l, m, rng)
        elif kind == "gap":
            inst = generators.gen_integrality_gap(k, l, m)
        elif kind == "vc":
            inst = generators.gen_vc_reduction(_parse_edges(edges), k, reps)
        elif kind == "harmonic":
            inst = generators.gen_harmonic_line(m)
        elif kind == "wfa-support":
            inst = generators.gen_wfa_counterexamples("support", m)
        elif kind == "wfa-quasiconvex":
            inst = generators.gen_wfa_counterexamples("quasiconvex")
        elif kind == "coupon":
            draw = generators.gen_coupon_collector(k, l, rng)
            inst = draw.instance
            click.echo(f"# withheld request: {' '.join(str(p + 1) for p in draw.withheld)}", err=True)
        else:
            inst = generators.gen_nested(k, l, phases)
    except DOMAIN_ERRORS as e:
        _fail(ctx, str(e))
    if output:
        instance_io.write_instance_file(output, inst)
        click.echo(f"Wrote {inst.name} (n={inst.space.n}, k={inst.k}, l={inst.l}, m={inst.m}) to {output}")
    else:
        click.echo(instance_io.emit_instance(inst), nl=False)


def _load(ctx, path):
    try:
        return instance_io.read_instance_file(path)
    except offline.InstanceError as e:
        _fail(ctx, f"{path}: {e}")


@cli.command()
@click.argument("instance", type=click.Path(exists=True, dir_okay=False))
@click.option("--algorithm", "-a", default="hs", show_default=True, help="hs, rhs, harmonic, wfa or greedy.")
@click.option("--seed", type=int, default=None, help="Defaults to montecarlo.seed.")
@click.option("--trials", type=int, default=None, help="Defaults to montecarlo.trials.")
@click.option("--workers", type=int, default=None, help="Defaults to montecarlo.workers.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False), help="CSV file for the report row.")
@click.option("--no-opt", is_flag=True, help="Skip the exact optimum.")
@click.option("--wfa-lazy", type=click.Choice(["on", "off"]), default=None, help="Overrides algorithms.wfa.lazy.")
@click.pass_context
def run(ctx, instance, algorithm, seed, trials, workers, csv_path, no_opt, wfa_lazy):
    """Runs an online algorithm on an instance file and reports cost against OPT."""
    inst = _load(ctx, instance)
    cfg = _with_wfa_lazy(ctx.obj.config, wfa_lazy)
    seed = cfg["montecarlo"]["seed"] if seed is None else seed
    try:
        report = harness.run_algorithm(inst, algorithm, seed, trials, cfg, workers, with_opt=not no_opt)
    except DOMAIN_ERRORS as e:
        _fail(ctx, str(e))
    if report.opt is None and not no_opt:
        click.echo("OPT not computed: state budget exceeded.", err=True)
    ctx.obj.report_sink(csv_path).write([report])
    if report.phase_breakdown:
        breakdown = ", ".join(f"{p}:{f}" for p, f in sorted(report.phase_breakdown.items()))
        click.echo(f"Faults per phase: {breakdown}", err=True)


@cli.command()
@click.argument("instance", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--method",
    type=click.Choice(["dp", "bruteforce", "flow", "path"]),
    default="dp",
    show_default=True,
)
@click.option("--prune", is_flag=True, help="Drop dominated DP states.")
@click.option("--schedule", "show_schedule", is_flag=True, help="Print the optimal configurations.")
@click.pass_context
def opt(ctx, instance, method, prune, show_schedule):
    """Computes the exact offline optimum."""
    inst = _load(ctx, instance)
    budget = config.get_budget(ctx.obj.config)
    schedule = None
    try:
        if method == "dp":
            cost, schedule = offline.opt_dp(inst, budget=budget, prune=prune)
        elif method == "bruteforce":
            cost = offline.opt_bruteforce(inst, budget=config.get_budget(ctx.obj.config, "bruteforce_leaves"))
        elif method == "flow":
            cost, schedule = offline.opt_kserver_flow(inst)
        else:
            cost = offline.opt_mss_path(inst)
    except DOMAIN_ERRORS as e:
        _fail(ctx, str(e))
    click.echo(f"OPT ({method}): {format_fraction(cost)}")
    if show_schedule and schedule is not None:
        for i, config_after in enumerate(schedule.configurations(), start=1):
            click.echo(f"{i:>4} | {' '.join(str(p + 1) for p in config_after)}")


@cli.command()
@click.argument("instance", type=click.Path(exists=True, dir_okay=False))
@click.option("--dump", is_flag=True, help="Print the LP in p/q form.")
@click.option("--float-check", is_flag=True, help="Cross-check the optimum with scipy's HiGHS.")
@click.pass_context
def lp(ctx, instance, dump, float_check):
    """Solves the LP relaxation exactly."""
    inst = _load(ctx, instance)
    model = offline.build_lp(inst)
    if dump:
        click.echo(model.dump())
    try:
        sol = offline.solve_lp(model)
    except DOMAIN_ERRORS as e:
        _fail(ctx, str(e))
    click.echo(f"LP optimum: {format_fraction(sol.objective)} ({model.n_vars} variables)")
    if float_check:
        value = offline.solve_lp_float(model)
        click.echo(f"HiGHS optimum: {value:.9f}")
        if abs(value - float(sol.objective)) > 1e-6:
            _fail(ctx, "floating-point optimum disagrees with the exact one")


@cli.command(name="round")
@click.argument("instance", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
def round_command(ctx, instance):
    """Rounds the LP optimum to a kl-server schedule."""
    inst = _load(ctx, instance)
    try:
        model = offline.build_lp(inst)
        sol = offline.solve_lp(model)
        result = offline.round_to_kl(inst, sol, model)
        offline.verify_schedule(inst, result.schedule, initial=list(inst.initial) * inst.l)
    except DOMAIN_ERRORS as e:
        _fail(ctx, str(e))
    click.echo(f"LP optimum:      {format_fraction(sol.objective)}")
    click.echo(f"kl-server cost:  {format_fraction(result.cost)} (bound {format_fraction(inst.l * sol.objective)})")
    click.echo("Chosen points:   " + " ".join(str(p + 1) for p in result.chosen))


@cli.command()
@click.option("--algorithm", "-a", default="greedy", show_default=True)
@click.option("--k", "k", type=int, default=2, show_default=True)
@click.option("--l", "l", type=int, default=2, show_default=True)
@click.option("--phases", type=int, default=None, help="Stop after this many phase changes; defaults to ceil(kDh/(D-lh))+1.")
@click.option("--D", "D", default=None, help="Cluster distance; defaults to l*h(k,l)+1.")
@click.option("--max-requests", type=int, default=None, help="Defaults to adversary.max_requests.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--wfa-lazy", type=click.Choice(["on", "off"]), default=None, help="Overrides algorithms.wfa.lazy.")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False))
@click.pass_context
def adversary(ctx, algorithm, k, l, phases, D, max_requests, seed, csv_path, wfa_lazy):
    """Plays the cluster-space lower-bound adversary against an online algorithm."""
    cfg = _with_wfa_lazy(ctx.obj.config, wfa_lazy)
    if max_requests is None:
        max_requests = cfg["adversary"]["max_requests"]
    try:
        result = harness.adversary_game(
            algorithm, k, l, phases, D=D, max_requests=max_requests, seed=seed, options=cfg.get("algorithms")
        )
    except DOMAIN_ERRORS as e:
        _fail(ctx, str(e))
    click.echo(f"--- Adversary vs {algorithm} (k={k}, l={l}, D={format_fraction(result.D)}) ---", err=True)
    click.echo(f"h(k,l):               {result.h}", err=True)
    click.echo(f"Phase changes:        {result.phases} (threshold {result.threshold})", err=True)
    click.echo(f"Requests:             {result.requests}", err=True)
    click.echo(f"Online cost:          {format_fraction(result.online_cost)}", err=True)
    click.echo(f"Min reference cost:   {format_fraction(result.min_reference_cost)}", err=True)
    click.echo(f"Total reference cost: {format_fraction(result.total_reference_cost)}", err=True)
    for name, cost in result.reference_costs.items():
        click.echo(f"  {name:<16} | {format_fraction(cost)}", err=True)
    click.echo(f"online >= h * min reference: {result.ratio_certified}", err=True)
    ctx.obj.report_sink(csv_path).write([result.to_run_report(seed)])


@cli.command(name="acceptance")
@click.argument("suite", type=click.Choice(sorted(acceptance.SUITES) + ["all"]))
@click.pass_context
def acceptance_command(ctx, suite):
    """Runs an acceptance suite; exits non-zero if any check fails."""
    names = sorted(acceptance.SUITES) if suite == "all" else [suite]
    failed = 0
    for name in names:
        click.echo(f"--- {name} ---")
        for result in acceptance.run_suite(name, ctx.obj.config):
            status = "PASS" if result.passed else "FAIL"
            failed += not result.passed
            click.echo(f"{result.name:<22} | {status} | {result.detail}")
    if failed:
        _fail(ctx, f"{failed} check(s) failed")


@cli.command()
@click.argument("instance", type=click.Path(exists=True, dir_okay=False))
@click.option("--support", "support_only", is_flag=True, help="Only list the support.")
@click.pass_context
def wf(ctx, instance, support_only):
    """Prints the final work function table, marking the support."""
    inst = _load(ctx, instance)
    w = wf_replay(inst.space, inst.initial, inst.requests)
    support = set(wf_support(w))
    click.echo(f"--- Work function after {w.requests_seen} request(s), min {format_fraction(w.optimum())} ---")
    for X in w.configurations:
        if support_only and X not in support:
            continue
        marker = "*" if X in support else " "
        click.echo(f"{marker} {' '.join(str(p + 1) for p in X):<12} | {format_fraction(w(X))}")
