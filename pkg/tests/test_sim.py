"""Deterministic simulator: scripts, assertions, canned scenarios."""

import json
import os

import pytest

from meshmem.errors import ScriptError
from meshmem.sim import (
    Scenario,
    run,
    scenario_echo_loop,
    scenario_restart_recall,
    scenario_role_divergence,
)

from conftest import texts

SCENARIO_DIR = os.path.join(
    os.path.dirname(os.path.abspath(__file__)), "..", "scenarios"
)

FIELDS = {name.value: text for name, text in texts("sim").items()}


def tiny_scenario(script, nodes=({"id": "A"}, {"id": "B"})):
    return Scenario(name="tiny", nodes=tuple(nodes), script=tuple(script))


class TestRunner:
    def test_empty_script(self, tmp_path):
        assert run(tiny_scenario([]), str(tmp_path)) == []

    def test_observe_changes_digest(self, tmp_path):
        trace = run(
            tiny_scenario([{"op": "observe", "node": "A", "fields": FIELDS}]),
            str(tmp_path),
        )
        assert len(trace) == 1
        # A now holds one observation, B is still empty
        assert trace[0]["digests"]["A"] != trace[0]["digests"]["B"]

    def test_deliver_and_assert(self, tmp_path):
        script = [
            {"op": "observe", "node": "A", "fields": FIELDS, "label": "c"},
            {"op": "deliver", "frame": "c", "to": "B"},
            {"op": "assert", "check": "last_outcome", "equals": "stored"},
            {"op": "assert", "check": "store_size", "node": "B", "equals": 1},
        ]
        trace = run(tiny_scenario(script), str(tmp_path))
        assert trace[1]["outcome"] == "stored"
        assert trace[2]["ok"] is True

    def test_failed_assertion_carries_step_index(self, tmp_path):
        script = [
            {"op": "observe", "node": "A", "fields": FIELDS},
            {"op": "assert", "check": "store_size", "node": "A", "equals": 9},
        ]
        with pytest.raises(ScriptError) as err:
            run(tiny_scenario(script), str(tmp_path))
        assert err.value.step_index == 1

    def test_unknown_op(self, tmp_path):
        with pytest.raises(ScriptError) as err:
            run(tiny_scenario([{"op": "teleport"}]), str(tmp_path))
        assert err.value.step_index == 0

    def test_unknown_node(self, tmp_path):
        with pytest.raises(ScriptError):
            run(
                tiny_scenario([{"op": "observe", "node": "Z", "fields": FIELDS}]),
                str(tmp_path),
            )

    def test_determinism(self, tmp_path):
        scenario = scenario_role_divergence()
        (tmp_path / "run1").mkdir()
        (tmp_path / "run2").mkdir()
        t1 = run(scenario, str(tmp_path / "run1"))
        t2 = run(scenario, str(tmp_path / "run2"))
        assert t1 == t2

    def test_restart_reloads_persistence(self, tmp_path):
        script = [
            {"op": "observe", "node": "A", "fields": FIELDS},
            {"op": "snapshot", "node": "A", "name": "pre"},
            {"op": "restart", "node": "A"},
            {"op": "assert", "check": "digest_equals_snapshot", "node": "A",
             "name": "pre"},
        ]
        run(tiny_scenario(script), str(tmp_path))

    def test_advance_clock(self, tmp_path):
        trace = run(
            tiny_scenario([{"op": "advance_clock", "ms": 5000}]), str(tmp_path)
        )
        assert trace[0]["clock"] == 1_700_000_000_000 + 5000


class TestScenarioSerialization:
    def test_round_trip(self):
        scenario = scenario_echo_loop()
        assert Scenario.from_dict(scenario.to_dict()) == scenario

    @pytest.mark.parametrize(
        "filename,builder",
        [
            ("echo-loop.json", scenario_echo_loop),
            ("restart-recall.json", scenario_restart_recall),
            ("role-divergence.json", scenario_role_divergence),
        ],
    )
    def test_data_files_match_builders(self, filename, builder):
        scenario = Scenario.from_file(os.path.join(SCENARIO_DIR, filename))
        assert scenario == builder()


class TestCannedScenarios:
    @pytest.mark.parametrize(
        "builder",
        [scenario_echo_loop, scenario_restart_recall, scenario_role_divergence],
        ids=lambda b: b.__name__,
    )
    def test_runs_clean(self, builder, tmp_path):
        trace = run(builder(), str(tmp_path))
        assert trace  # every embedded assertion passed
