"""Python smoke tests for the _fsosim extension module."""

import math
import os

import pytest

import fsosim


def test_distance_and_movement():
    assert fsosim.distance((0, 0), (3, 4)) == pytest.approx(5.0)
    pos, arrived = fsosim.move_toward((0, 0), (10, 0), 1.0)
    assert pos == pytest.approx((1.0, 0.0))
    assert not arrived
    pos, arrived = fsosim.move_toward((0, 0), (0.5, 0), 1.0)
    assert arrived


def test_mutualism_checks():
    action_map = {"a1": "b1", "a2": "b2"}
    x = {"a1": 0, "a2": 1}
    y = {"b1": 1, "b2": 0}
    assert fsosim.check_mutualistic_precondition(x, y, action_map)
    costly_x = {"a1": -1, "a2": 1}
    costly_y = {"b1": 1, "b2": -1}
    assert not fsosim.check_mutualistic_precondition(costly_x, costly_y, action_map)
    assert fsosim.check_extended_precondition(costly_x, costly_y, action_map)


def test_group_merging():
    groups = fsosim.merge_group_activity(
        [(1, "walk", True), (2, "walk", True), (3, "walk", False)]
    )
    assert groups == [("walk", [1, 2])]


def test_falls_run_identities_and_determinism():
    row = fsosim.run_falls(seed=5, ticks=2000, informal_carers=10)
    assert row["reqs_handled"] > 0
    assert row["avg_ma_cost"] == pytest.approx(
        row["csc_ambulances"] / row["reqs_handled"]
    )
    assert row["avg_wt"] == pytest.approx(row["cwt"] / row["reqs_handled"])
    assert row["fn_ratio"] == pytest.approx(row["fn"] / (row["fn"] + row["tn"]))
    again = fsosim.run_falls(seed=5, ticks=2000, informal_carers=10)
    assert row == again


def test_second_device_raises_sensitivity():
    one = fsosim.run_falls(seed=3, ticks=6000, device_count=1)
    two = fsosim.run_falls(seed=3, ticks=6000, device_count=2)
    assert two["sensitivity"] > one["sensitivity"]


def test_city_strategies_resolve_requests():
    rows = {
        name: fsosim.run_city(seed=2, ticks=1200, individuals=60, strategy=name)
        for name in ("fso", "perfect_oracle", "traditional")
    }
    for row in rows.values():
        assert row["requests_resolved"] == row["treated"] + row["died"]
    assert rows["fso"]["son_inter_community_count"] >= 0
    assert rows["perfect_oracle"]["son_inter_community_count"] == 0
    assert rows["fso"]["treated"] >= rows["traditional"]["treated"]


def test_fire_collaboration_helps():
    with_fso = fsosim.run_fire(seed=4, ticks=1500, collaboration=True)
    without = fsosim.run_fire(seed=4, ticks=1500, collaboration=False)
    assert with_fso["fully_burned_houses"] <= without["fully_burned_houses"]


def test_run_experiment_writes_csv(tmp_path):
    config = "\n".join(
        [
            "[experiment]",
            "scenario = falls",
            "seed = 7",
            "replications = 2",
            "[world]",
            "ticks = 400",
            "[falls]",
            "ic_counts = 0,5",
            "device_counts = 1",
        ]
    )
    result = fsosim.run_experiment(config, out_dir=str(tmp_path), jobs=2)
    assert result["runs"] == 4
    assert len(result["csv_files"]) == 1
    csv_path = result["csv_files"][0]
    assert os.path.exists(csv_path)
    with open(csv_path) as f:
        header = f.readline()
    assert header.startswith("scenario,ic_count,seed,")
    assert os.path.exists(result["manifest"])


def test_validation_errors_surface_as_python_exceptions():
    with pytest.raises(fsosim.FsosimError):
        fsosim.run_falls(device_count=3)
    with pytest.raises(fsosim.FsosimError):
        fsosim.run_experiment("[experiment]\nscenario = warp\n")


def test_list_defaults_round_trips():
    text = fsosim.list_defaults("falls")
    assert "elderly = 30" in text
    assert "p_false_positive = 0.002" in text
    assert not math.isnan(fsosim.run_falls(ticks=100)["avg_fp_per_tick"])
