import pytest
from click.testing import CliRunner

from mssms import harness
from mssms.acceptance import CheckResult
from mssms.cli import cli

UNIFORM = "metric uniform 6\nservers 1 2\nrequest 3 4\nrequest 5 6\nrequest 3 6\n"
SINGLETONS = "metric line 0 1 3 7\nservers 1 4\nrequest 2\nrequest 3\nrequest 1\n"


@pytest.fixture
def runner():
    """Fixture to provide a CliRunner instance."""
    return CliRunner()


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "uniform.txt"
    path.write_text(UNIFORM)
    return str(path)


@pytest.fixture
def config_file(tmp_path):
    """Configuration without files on disk for reports."""
    path = tmp_path / "config.yaml"
    path.write_text("reports:\n  active_sink: csv\n")
    return str(path)


def test_gen_to_stdout(runner):
    """Test generating an instance onto stdout."""
    result = runner.invoke(cli, ["gen", "harmonic", "--m", "3"])
    assert result.exit_code == 0
    assert "metric line -1 0 1 2 3" in result.output
    assert result.output.count("request") == 4


def test_gen_to_file(runner, tmp_path):
    """Test generating a random instance into a file."""
    out = tmp_path / "random.txt"
    result = runner.invoke(cli, ["gen", "random", "--m", "5", "--seed", "3", "-o", str(out)])
    assert result.exit_code == 0
    assert out.read_text().startswith("# random-uniform-k2-l2-m5\nmetric uniform 6\n")


def test_gen_vc_bad_edges(runner):
    """Test that malformed hyperedges are rejected."""
    result = runner.invoke(cli, ["gen", "vc", "--edges", "1,a"])
    assert result.exit_code != 0
    assert "1,a" in result.output


def test_gen_invalid_parameters(runner):
    """Test a domain error from a generator."""
    result = runner.invoke(cli, ["gen", "gap", "--k", "1"])
    assert result.exit_code == 1
    assert "Error:" in result.output


def test_run_command_writes_csv(runner, instance_file, config_file, tmp_path):
    """Test that 'run' writes one report row."""
    out = tmp_path / "runs.csv"
    result = runner.invoke(
        cli, ["--config", config_file, "run", instance_file, "--algorithm", "hs", "--csv", str(out)]
    )
    assert result.exit_code == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("run_id,algorithm,seed")
    assert ",hs,0,2,2,6,3," in lines[1]


def test_run_command_uses_harness(runner, instance_file, config_file, mocker):
    """Test that trial and seed options reach the harness."""
    mock_run = mocker.patch("mssms.harness.run_algorithm")
    mock_run.return_value.phase_breakdown = {}
    mock_run.return_value.opt = 1
    mock_sink = mocker.patch("mssms.reporting.get_report_sink").return_value
    result = runner.invoke(
        cli, ["--config", config_file, "run", instance_file, "-a", "rhs", "--seed", "4", "--trials", "10"]
    )
    assert result.exit_code == 0
    args = mock_run.call_args.args
    assert args[1:4] == ("rhs", 4, 10)
    mock_sink.write.assert_called_once()


def test_run_unknown_algorithm(runner, instance_file, config_file):
    """Test that an unknown algorithm exits with an error."""
    result = runner.invoke(cli, ["--config", config_file, "run", instance_file, "-a", "oracle"])
    assert result.exit_code == 1
    assert "Unknown algorithm" in result.output


def test_run_reports_malformed_instance(runner, tmp_path, config_file):
    """Test that parse errors show their line number."""
    bad = tmp_path / "bad.txt"
    bad.write_text("metric uniform 4\nservers 1\nrequest 2 9\n")
    result = runner.invoke(cli, ["--config", config_file, "run", str(bad)])
    assert result.exit_code == 1
    assert "line 3" in result.output


@pytest.mark.parametrize("method, expected", [("dp", "OPT (dp): 2"), ("bruteforce", "OPT (bruteforce): 2")])
def test_opt_command(runner, instance_file, method, expected):
    """Test the exact optimum through two solvers."""
    result = runner.invoke(cli, ["opt", instance_file, "--method", method])
    assert result.exit_code == 0
    assert expected in result.output


def test_opt_flow_and_schedule(runner, tmp_path):
    """Test the flow solver and the schedule listing."""
    path = tmp_path / "singletons.txt"
    path.write_text(SINGLETONS)
    result = runner.invoke(cli, ["opt", str(path), "--method", "flow", "--schedule"])
    assert result.exit_code == 0
    assert "OPT (flow): 6" in result.output
    assert result.output.count(" | ") == 3


def test_opt_flow_rejects_wide_requests(runner, instance_file):
    """Test that the flow solver refuses wide requests."""
    result = runner.invoke(cli, ["opt", instance_file, "--method", "flow"])
    assert result.exit_code == 1
    assert "Error:" in result.output


def test_lp_and_round_commands(runner, tmp_path):
    """Test the LP and rounding commands on the smallest gap instance."""
    path = tmp_path / "gap.txt"
    assert runner.invoke(cli, ["gen", "gap", "--m", "1", "-o", str(path)]).exit_code == 0
    result = runner.invoke(cli, ["lp", str(path), "--float-check"])
    assert result.exit_code == 0
    assert "LP optimum: " in result.output
    assert "HiGHS optimum: " in result.output
    result = runner.invoke(cli, ["round", str(path)])
    assert result.exit_code == 0
    assert "kl-server cost:" in result.output


def test_lp_dump(runner, instance_file):
    """Test the p/q dump of the LP."""
    result = runner.invoke(cli, ["lp", instance_file, "--dump"])
    assert result.exit_code == 0
    assert "min: " in result.output
    assert "cover3:" in result.output


def test_wf_command(runner, tmp_path):
    """Test the work function table and its support."""
    path = tmp_path / "support.txt"
    assert runner.invoke(cli, ["gen", "wfa-support", "--m", "1", "-o", str(path)]).exit_code == 0
    result = runner.invoke(cli, ["wf", str(path), "--support"])
    assert result.exit_code == 0
    assert result.output.count("* ") == 4


def test_adversary_command(runner, config_file, tmp_path):
    """Test the adversary game report."""
    out = tmp_path / "adversary.csv"
    result = runner.invoke(
        cli,
        ["--config", config_file, "adversary", "--max-requests", "50", "--csv", str(out)],
    )
    assert result.exit_code == 0
    assert "h(k,l):               7" in result.output
    assert "greedy+adversary" in out.read_text()


def test_acceptance_command_exit_codes(runner, mocker):
    """Test that the exit code reflects the check results."""
    run_suite = mocker.patch("mssms.acceptance.run_suite")
    run_suite.return_value = [CheckResult("ok", True, "fine")]
    result = runner.invoke(cli, ["acceptance", "lp"])
    assert result.exit_code == 0
    assert "ok" in result.output and "PASS" in result.output

    run_suite.return_value = [CheckResult("bad", False, "broken")]
    result = runner.invoke(cli, ["acceptance", "all"])
    assert result.exit_code == 1
    assert "FAIL" in result.output
    assert run_suite.call_count == 1 + 5


def test_gen_random_line_space(runner):
    """Test generating a random instance on a line."""
    result = runner.invoke(cli, ["gen", "random", "--space", "line", "--n", "5", "--m", "4", "--seed", "2"])
    assert result.exit_code == 0
    assert result.output.startswith("# random-line-k2-l2-m4\nmetric line ")
    coords = [int(c) for c in result.output.splitlines()[1].split()[2:]]
    assert len(coords) == 5
    assert coords == sorted(set(coords))
    assert all(0 <= c < 20 for c in coords)


@pytest.mark.parametrize("flag, expected", [("on", True), ("off", False)])
def test_run_wfa_lazy_option(runner, instance_file, config_file, mocker, flag, expected):
    """Test that --wfa-lazy overrides the configured WFA variant."""
    mock_run = mocker.patch("mssms.harness.run_algorithm")
    mock_run.return_value.phase_breakdown = {}
    mocker.patch("mssms.reporting.get_report_sink")
    result = runner.invoke(
        cli, ["--config", config_file, "run", instance_file, "-a", "wfa", "--wfa-lazy", flag]
    )
    assert result.exit_code == 0
    cfg = mock_run.call_args.args[4]
    assert cfg["algorithms"]["wfa"]["lazy"] is expected


def test_run_without_wfa_lazy_keeps_config(runner, instance_file, config_file, mocker):
    """Test that the configured WFA variant is used when the flag is absent."""
    mock_run = mocker.patch("mssms.harness.run_algorithm")
    mock_run.return_value.phase_breakdown = {}
    mocker.patch("mssms.reporting.get_report_sink")
    result = runner.invoke(cli, ["--config", config_file, "run", instance_file, "-a", "wfa"])
    assert result.exit_code == 0
    assert mock_run.call_args.args[4]["algorithms"]["wfa"]["lazy"] is False


def test_adversary_defaults_and_wfa_lazy(runner, config_file, tmp_path, mocker):
    """Test that the adversary leaves the phase count to the harness and passes --wfa-lazy on."""
    game = mocker.spy(harness, "adversary_game")
    out = tmp_path / "adversary.csv"
    result = runner.invoke(
        cli,
        [
            "--config", config_file, "adversary", "-a", "wfa", "--wfa-lazy", "on",
            "--max-requests", "5", "--csv", str(out),
        ],
    )
    assert result.exit_code == 0
    args, kwargs = game.call_args
    assert args[3] is None
    assert kwargs["options"]["wfa"]["lazy"] is True
    assert "(threshold 211)" in result.output
