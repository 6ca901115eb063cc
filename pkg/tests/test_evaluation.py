import math

import pytest

from tracktuner.controller import GainSet
from tracktuner.evaluation import (
    REPORT_HEADER,
    eval_duration,
    evaluate_gains,
    grid_compare,
    run_circuit,
    trajectory_mse,
    write_comparison_csv,
    write_mse_report_csv,
    write_mse_report_json,
)
from tracktuner.paths import Maneuver, make_lane_change_path
from tracktuner.sim import LogSample, NoiseModel, Outcome, TrajectoryLog
from tracktuner.supervisor import GainSchedule, SpeedLimit

LANE = GainSet(3.0, 21.0, 21.0, 0.7)
NO_NOISE = NoiseModel(enabled=False)


def synthetic_log(errors, outcome=Outcome.GOAL_REACHED):
    samples = [
        LogSample(0.01 * k, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, bex, bey, 0.0,
                  1.0, 0.0, 0.0)
        for k, (bex, bey) in enumerate(errors)
    ]
    return TrajectoryLog(samples, outcome)


class TestTrajectoryMse:
    def test_worked_example(self):
        # every sample (1, 1): per-sample (1 + 1) / 2 = 1
        log = synthetic_log([(1.0, 1.0)] * 7)
        assert trajectory_mse(log) == pytest.approx(1.0)

    def test_longitudinal_only(self):
        log = synthetic_log([(2.0, 0.0)] * 3)
        assert trajectory_mse(log) == pytest.approx(2.0)

    def test_mean_over_samples(self):
        log = synthetic_log([(1.0, 0.0), (0.0, 3.0)])
        # (0.5 + 4.5) / 2
        assert trajectory_mse(log) == pytest.approx(2.5)

    def test_empty_log_raises(self):
        with pytest.raises(ValueError):
            trajectory_mse(synthetic_log([]))


class TestEvalDuration:
    def test_formula(self):
        path = make_lane_change_path()  # 50 m
        length = float(path.ss[-1])
        assert eval_duration(path, 4.0) == pytest.approx(length / 4.0 * 1.2 + 2.0)

    def test_slower_reference_runs_longer(self):
        path = make_lane_change_path()
        assert eval_duration(path, 2.0) > eval_duration(path, 4.0)


class TestEvaluateGains:
    def test_noise_off_runs_are_identical(self):
        report = evaluate_gains(LANE, Maneuver.LANE_CHANGE, NO_NOISE, runs=3)
        assert len(report.per_run_mse) == 3
        assert len(set(report.per_run_mse)) == 1
        assert report.reported_mse == report.per_run_mse[0]

    def test_reported_is_max(self):
        noise = NoiseModel(enabled=True, seed=11)
        report = evaluate_gains(LANE, Maneuver.LANE_CHANGE, noise, runs=4)
        assert report.reported_mse == max(report.per_run_mse)
        assert len(set(report.per_run_mse)) > 1

    def test_seeds_increment_from_base(self):
        noise = NoiseModel(enabled=True, seed=100)
        report = evaluate_gains(LANE, Maneuver.LANE_CHANGE, noise, runs=3)
        assert report.seeds == [100, 101, 102]

    def test_explicit_seeds_must_be_distinct(self):
        with pytest.raises(ValueError):
            evaluate_gains(LANE, Maneuver.LANE_CHANGE, NO_NOISE, runs=2,
                           seeds=[5, 5])

    def test_goal_reached_with_good_gains(self):
        report = evaluate_gains(LANE, Maneuver.LANE_CHANGE, NO_NOISE, runs=1)
        assert report.outcomes == [Outcome.GOAL_REACHED]

    def test_keep_logs(self):
        report = evaluate_gains(LANE, Maneuver.LANE_CHANGE, NO_NOISE, runs=2,
                                keep_logs=True)
        assert report.logs is not None and len(report.logs) == 2


class TestGridCompare:
    def test_sorted_by_clean_mse(self):
        sets = [GainSet(0.5, 2.0, 2.0, 0.8), LANE]
        entries = grid_compare(sets, Maneuver.LANE_CHANGE, runs=1, base_seed=0)
        assert entries[0].gains == LANE
        assert (entries[0].report_off.reported_mse
                <= entries[1].report_off.reported_mse)
        for e in entries:
            assert not e.report_off.noise_enabled
            assert e.report_on.noise_enabled


class TestRunCircuit:
    def test_supervised_circuit_completes(self):
        schedule = GainSchedule(
            entries={Maneuver.LANE_CHANGE: LANE,
                     Maneuver.ROUNDABOUT: GainSet(3.4, 21.0, 1.0, 0.84)},
            default=LANE,
        )
        log, report = run_circuit(schedule, SpeedLimit(4.0), NO_NOISE)
        assert log.outcome is Outcome.GOAL_REACHED
        assert report.maneuver == "circuit"
        assert report.reported_mse == pytest.approx(trajectory_mse(log))
        assert max(s.v for s in log.samples) <= 4.0


class TestReportWriters:
    def make_report(self):
        return evaluate_gains(LANE, Maneuver.LANE_CHANGE, NO_NOISE, runs=2)

    def test_csv_layout(self, tmp_path):
        f = tmp_path / "report.csv"
        write_mse_report_csv([self.make_report()], f, {"base_seed": 0})
        lines = f.read_text().splitlines()
        assert lines[0] == "# base_seed=0"
        assert lines[1] == ",".join(REPORT_HEADER)
        data = [line.split(",") for line in lines[2:]]
        assert len(data) == 3  # 2 runs + 1 summary
        run_rows, summary = data[:-1], data[-1]
        assert [r[6] for r in run_rows] == ["0", "1"]
        assert summary[6] == ""  # summary row carries no run index
        assert float(summary[7]) == self.make_report().reported_mse

    def test_json_layout(self, tmp_path):
        import json

        f = tmp_path / "report.json"
        write_mse_report_json([self.make_report()], f, {"base_seed": 0})
        payload = json.loads(f.read_text())
        assert payload["meta"]["base_seed"] == 0
        entry = payload["reports"][0]
        assert entry["reported_mse"] == self.make_report().reported_mse
        assert entry["maneuver"] == "lane_change"
        assert len(entry["per_run_mse"]) == 2

    def test_comparison_csv_rows(self, tmp_path):
        sets = [LANE, GainSet(0.5, 2.0, 2.0, 0.8)]
        entries = grid_compare(sets, Maneuver.LANE_CHANGE, runs=1, base_seed=0)
        f = tmp_path / "cmp.csv"
        write_comparison_csv(entries, f, {"base_seed": 0})
        lines = f.read_text().splitlines()
        data = [line.split(",") for line in lines if not line.startswith("#")][1:]
        # one off row and one on row per gain set, off first
        assert len(data) == 4
        assert [row[5] for row in data] == ["off", "on", "off", "on"]
