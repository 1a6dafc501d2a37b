"""Benchmark harness: trial running, aggregation, the grid shortest-path
oracle, CSV round trips, and the command line interface."""

import math

import numpy as np
import pytest

from bitkomo.bench import (
    AggregateSeries,
    ContractError,
    OracleResult,
    TrialRecord,
    UnreachableError,
    aggregate,
    best_cost_at,
    emit_aggregate_csv,
    emit_csv,
    first_solution_time,
    grid_oracle,
    log_time_grid,
    parse_csv,
    run_trials,
)
from bitkomo.cli import main
from bitkomo.cspace import Box, Disc, DiscRobot, Scenario, serialize_scenario
from bitkomo.planner import PlanEvent, PlannerParams, TerminationCondition


# ---------------------------------------------------------------------------
# trials and aggregation


def test_run_trials_seed_order_and_determinism(one_disc_square):
    params = PlannerParams()
    ptc = TerminationCondition(budget_s=30.0, max_batches=2)
    a = run_trials(one_disc_square, params, ptc, 3, base_seed=10)
    b = run_trials(one_disc_square, params, ptc, 3, base_seed=10)
    assert [r.seed for r in a] == [10, 11, 12]
    for ra, rb in zip(a, b):
        assert [(e.kind, e.cost) for e in ra.events] == [
            (e.kind, e.cost) for e in rb.events
        ]
    with pytest.raises(ContractError):
        run_trials(one_disc_square, params, ptc, 0, base_seed=0)


def _synthetic_record(seed, firsts_and_improvements):
    events = []
    for i, (t, c) in enumerate(firsts_and_improvements):
        events.append(PlanEvent(t, "first_solution" if i == 0 else "improvement", c))
    return TrialRecord(scenario="synth", mode="bitkomo", seed=seed, events=events)


def test_best_cost_and_first_solution_time():
    rec = _synthetic_record(0, [(1.0, 5.0), (2.0, 3.0)])
    assert math.isinf(best_cost_at(rec, 0.5))
    assert best_cost_at(rec, 1.0) == 5.0
    assert best_cost_at(rec, 1.5) == 5.0
    assert best_cost_at(rec, 9.0) == 3.0
    assert first_solution_time(rec) == 1.0
    empty = TrialRecord(scenario="synth", mode="bitkomo", seed=1, events=[])
    assert math.isinf(first_solution_time(empty))


def test_aggregate_success_monotone_and_quantiles():
    records = [
        _synthetic_record(0, [(0.5, 4.0), (2.0, 2.0)]),
        _synthetic_record(1, [(1.5, 6.0)]),
        TrialRecord(scenario="synth", mode="bitkomo", seed=2, events=[]),
    ]
    grid = np.array([0.1, 1.0, 1.6, 3.0])
    series = aggregate(records, grid)
    np.testing.assert_allclose(series.success_rate, [0.0, 1 / 3, 2 / 3, 2 / 3])
    assert all(a <= b for a, b in zip(series.success_rate, series.success_rate[1:]))
    assert math.isnan(series.cost_median[0])
    assert series.cost_median[1] == 4.0
    assert series.cost_median[2] == 5.0  # median of {4, 6}
    assert series.cost_median[3] == 4.0  # median of {2, 6}
    with pytest.raises(ContractError):
        aggregate([], grid)


def test_log_time_grid_endpoints():
    grid = log_time_grid(10.0, points=50)
    assert len(grid) == 50
    assert grid[0] == pytest.approx(0.01)
    assert grid[-1] == pytest.approx(10.0)
    assert all(a < b for a, b in zip(grid, grid[1:]))


# ---------------------------------------------------------------------------
# grid oracle


def test_oracle_empty_box():
    s = Scenario(
        name="empty", lo=[0.0, 0.0], hi=[1.0, 1.0], obstacles=(),
        robot=DiscRobot(radius=0.05), start=[0.1, 0.1], goal=[0.9, 0.9],
    )
    exact = 0.8 * math.sqrt(2.0)
    result = grid_oracle(s, cell=0.01)
    assert exact - 1e-12 <= result.cost <= exact + result.error_bound


def test_oracle_detour_around_wall():
    # wall splits the square with a gap at the top: the optimum detours
    wall = Box(lo=(0.48, 0.0), hi=(0.52, 0.7))
    s = Scenario(
        name="wall", lo=[0.0, 0.0], hi=[1.0, 1.0], obstacles=(wall,),
        robot=DiscRobot(radius=0.02), start=[0.1, 0.1], goal=[0.9, 0.1],
    )
    result = grid_oracle(s, cell=0.01)
    straight = 0.8
    assert result.cost > straight + 0.5  # the detour is substantial
    # loose geometric upper bound via the corner waypoints
    upper = sum(
        math.dist(a, b)
        for a, b in zip(
            [(0.1, 0.1), (0.46, 0.74), (0.54, 0.74)],
            [(0.46, 0.74), (0.54, 0.74), (0.9, 0.1)],
        )
    )
    assert result.cost <= upper + result.error_bound


def test_oracle_blocked_corridor_unreachable():
    wall = Box(lo=(0.45, 0.0), hi=(0.55, 1.0))  # full-height wall
    s = Scenario(
        name="blocked", lo=[0.0, 0.0], hi=[1.0, 1.0], obstacles=(wall,),
        robot=DiscRobot(radius=0.02), start=[0.1, 0.5], goal=[0.9, 0.5],
    )
    with pytest.raises(UnreachableError):
        grid_oracle(s, cell=0.02)


def test_oracle_rejects_arm(arm_scenario):
    with pytest.raises(ContractError):
        grid_oracle(arm_scenario)


def test_oracle_refines_with_cell_size(one_disc_square):
    coarse = grid_oracle(one_disc_square, cell=0.04)
    fine = grid_oracle(one_disc_square, cell=0.01)
    assert fine.error_bound < coarse.error_bound
    # both bracket the true optimum from above within their bounds
    assert abs(coarse.cost - fine.cost) <= coarse.error_bound + fine.error_bound


# ---------------------------------------------------------------------------
# CSV round trips


def test_trial_csv_round_trip():
    records = [
        TrialRecord(
            scenario="synth", mode="bitkomo", seed=0,
            events=[
                PlanEvent(0.0123456789, "batch_added", math.inf),
                PlanEvent(0.5, "first_solution", 1.4142135623730951),
                PlanEvent(0.75, "optimizer_failure", 1.39),
                PlanEvent(0.9, "improvement", 1.2),
            ],
        ),
        TrialRecord(
            scenario="synth", mode="bitstar", seed=1,
            events=[PlanEvent(1.0, "first_solution", 2.0)],
        ),
    ]
    text = emit_csv(records)
    lines = text.splitlines()
    assert lines[0] == "scenario,mode,seed,elapsed_s,event,cost"
    assert lines[1].endswith("batch_added,")  # costless event: empty column
    back = parse_csv(text)
    assert len(back) == 2
    for orig, rec in zip(records, back):
        assert (rec.scenario, rec.mode, rec.seed) == (
            orig.scenario, orig.mode, orig.seed
        )
        for a, b in zip(orig.events, rec.events):
            assert a.kind == b.kind
            # %.9g survives the round trip to ~1e-9 relative
            assert b.elapsed_s == pytest.approx(a.elapsed_s, rel=1e-8)
            if math.isfinite(a.cost) and a.kind != "batch_added":
                assert b.cost == pytest.approx(a.cost, rel=1e-8)
            else:
                assert math.isinf(b.cost)
    # emitting the parsed records reproduces the text exactly
    assert emit_csv(back).splitlines()[1:] == lines[1:]
    with pytest.raises(ContractError):
        parse_csv("bad,header\n1,2\n")


def test_aggregate_csv_nan_as_empty():
    series = AggregateSeries(
        times=np.array([0.1, 1.0]),
        success_rate=np.array([0.0, 0.5]),
        cost_median=np.array([np.nan, 2.5]),
        cost_q25=np.array([np.nan, 2.0]),
        cost_q75=np.array([np.nan, 3.0]),
    )
    text = emit_aggregate_csv(series)
    lines = text.splitlines()
    assert lines[0] == "t,success_rate,cost_median,cost_q25,cost_q75"
    assert lines[1] == "0.1,0,,,"
    assert lines[2] == "1,0.5,2.5,2,3"


# ---------------------------------------------------------------------------
# command line interface


@pytest.fixture
def scenario_file(tmp_path, one_disc_square):
    path = tmp_path / "scene.yaml"
    path.write_text(serialize_scenario(one_disc_square))
    return str(path)


def test_cli_plan_success(scenario_file, tmp_path, capsys):
    out = tmp_path / "trials.csv"
    code = main([
        "plan", "--scenario", scenario_file, "--time-limit", "2.0",
        "--seed", "0", "--out", str(out),
    ])
    assert code == 0
    records = parse_csv(out.read_text())
    assert len(records) == 1
    assert math.isfinite(first_solution_time(records[0]))


def test_cli_plan_to_stdout_and_aggregate(scenario_file, tmp_path, capsys):
    code = main(["plan", "--scenario", scenario_file, "--time-limit", "1.0"])
    assert code == 0
    csv_text = capsys.readouterr().out
    infile = tmp_path / "trials.csv"
    infile.write_text(csv_text)
    outfile = tmp_path / "agg.csv"
    code = main(["aggregate", "--in", str(infile), "--out", str(outfile),
                 "--points", "20"])
    assert code == 0
    lines = outfile.read_text().splitlines()
    assert lines[0] == "t,success_rate,cost_median,cost_q25,cost_q75"
    assert len(lines) == 21
    assert lines[-1].split(",")[1] == "1"  # success by the horizon


def test_cli_plan_mode_alias(scenario_file, capsys):
    code = main(["plan", "--scenario", scenario_file, "--mode", "komo",
                 "--time-limit", "1.0"])
    assert code in (0, 3)
    out = capsys.readouterr().out
    assert ",komo_restarts," in out


def test_cli_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["plan"])  # missing --scenario
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main([])  # missing subcommand
    assert exc.value.code == 1


def test_cli_scenario_error(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("name: broken\n")
    with pytest.raises(SystemExit) as exc:
        main(["plan", "--scenario", str(bad), "--time-limit", "1.0"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["plan", "--scenario", str(tmp_path / "missing.yaml"),
              "--time-limit", "1.0"])
    assert exc.value.code == 2


def test_cli_no_solution_exit_code(tmp_path, capsys):
    ring = tuple(
        Disc(center=c, radius=0.08)
        for c in [(0.8, 0.9), (0.9, 0.8), (0.8, 0.7), (0.7, 0.8)]
    )
    sealed = Scenario(
        name="sealed", lo=[0.0, 0.0], hi=[1.0, 1.0],
        obstacles=ring, robot=DiscRobot(radius=0.01),
        start=[0.1, 0.1], goal=[0.8, 0.8],
    )
    path = tmp_path / "sealed.yaml"
    path.write_text(serialize_scenario(sealed))
    code = main(["plan", "--scenario", str(path), "--time-limit", "1.0"])
    assert code == 3


def test_cli_oracle(scenario_file, capsys):
    code = main(["oracle", "--scenario", scenario_file, "--cell", "0.02"])
    assert code == 0
    out = capsys.readouterr().out
    assert out.startswith("cost ")
    cost = float(out.split()[1])
    assert cost >= 0.8 * math.sqrt(2.0) - 1e-9
