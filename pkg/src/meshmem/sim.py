"""Deterministic in-memory multi-node simulator.

Scenarios are data: a node list and an ordered step script executed against
the real store/gate/lineage code (no mocks), under a virtual clock. Delivery
goes through the wire codec exactly as the daemon path does, minus sockets.
Identical (scenario, seed) input yields identical traces.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from typing import Any, Optional

from .cat7 import FIELD_ORDER, FieldName
from .errors import ScriptError
from .store import MeshMem
from .svaf import RoleProfile, Thresholds
from .wire import decode_frame, encode_frame

BASE_CLOCK_MS = 1_700_000_000_000


@dataclass(frozen=True)
class Scenario:
    name: str
    nodes: tuple[dict[str, Any], ...]
    script: tuple[dict[str, Any], ...]
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "seed": self.seed,
            "nodes": list(self.nodes),
            "script": list(self.script),
        }

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "Scenario":
        return cls(
            name=obj["name"],
            nodes=tuple(obj["nodes"]),
            script=tuple(obj["script"]),
            seed=int(obj.get("seed", 0)),
        )

    @classmethod
    def from_file(cls, path: str) -> "Scenario":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class SimNode:
    node_id: str
    role_name: str
    profile: RoleProfile
    thresholds: Thresholds
    beta: float
    persistence_path: str
    store: MeshMem = None  # type: ignore[assignment]
    drops: dict[str, int] = field(
        default_factory=lambda: {"echo": 0, "redundant": 0, "rejected": 0}
    )
    frames_delivered: int = 0

    def boot(self) -> None:
        self.store = MeshMem.load(
            self.persistence_path,
            node_id=self.node_id,
            role_name=self.role_name,
            profile=self.profile,
            thresholds=self.thresholds,
            beta=self.beta,
        )


def _build_node(spec: dict[str, Any], workdir: str) -> SimNode:
    node_id = spec["id"]
    role = spec.get("role", node_id)
    raw_alpha = spec.get("alpha")
    if raw_alpha:
        alpha = {name: float(raw_alpha.get(name.value, 0.0)) for name in FIELD_ORDER}
    else:
        alpha = {name: 1.0 for name in FIELD_ORDER}
    profile = RoleProfile(
        node_role=role,
        alpha=alpha,
        lambda_decay=float(spec.get("lambda_decay", RoleProfile.uniform().lambda_decay)),
    )
    raw_th = spec.get("thresholds") or {}
    thresholds = Thresholds(
        t_red=float(raw_th.get("t_red", Thresholds().t_red)),
        t_aln=float(raw_th.get("t_aln", Thresholds().t_aln)),
        t_grd=float(raw_th.get("t_grd", Thresholds().t_grd)),
    )
    node = SimNode(
        node_id=node_id,
        role_name=role,
        profile=profile,
        thresholds=thresholds,
        beta=float(spec.get("beta", 0.5)),
        persistence_path=os.path.join(workdir, f"{node_id}.meshmem.log"),
    )
    node.boot()
    return node


class _Runner:
    def __init__(self, scenario: Scenario, workdir: str):
        self.scenario = scenario
        self.workdir = workdir
        self.clock = BASE_CLOCK_MS
        self.nodes: dict[str, SimNode] = {}
        for spec in scenario.nodes:
            self.nodes[spec["id"]] = _build_node(spec, workdir)
        self.labels: dict[str, Any] = {}  # label -> CMB
        self.snapshots: dict[str, dict[str, Any]] = {}
        self.step_results: list[dict[str, Any]] = []
        self.trace: list[dict[str, Any]] = []

    def node(self, node_id: str, idx: int) -> SimNode:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise ScriptError(f"unknown node {node_id!r}", step_index=idx) from None

    def run(self) -> list[dict[str, Any]]:
        for idx, step in enumerate(self.scenario.script):
            op = step.get("op")
            handler = getattr(self, f"_op_{op}", None)
            if handler is None:
                raise ScriptError(f"unknown op {op!r}", step_index=idx)
            result = handler(step, idx) or {}
            self.clock += 1
            self.step_results.append(result)
            row = {
                "step": idx,
                "op": op,
                **result,
                "digests": {nid: n.store.digest() for nid, n in self.nodes.items()},
            }
            self.trace.append(row)
        return self.trace

    # --- ops ---

    def _op_observe(self, step, idx):
        node = self.node(step["node"], idx)
        texts = {
            FieldName(name): text for name, text in step["fields"].items()
        }
        mood = tuple(step.get("mood", (0.0, 0.0)))
        entry = node.store.observe(texts, mood, step.get("body"), self.clock)
        if "label" in step:
            self.labels[step["label"]] = entry.cmb
        return {"node": node.node_id, "key": entry.key}

    def _op_deliver(self, step, idx):
        cmb = self.labels.get(step["frame"])
        if cmb is None:
            raise ScriptError(f"unknown frame label {step['frame']!r}", step_index=idx)
        node = self.node(step["to"], idx)
        payload = encode_frame(cmb, self.clock)
        if step.get("strip_lineage"):
            obj = json.loads(payload)
            obj["cmb"]["lineage"] = {"parents": [], "ancestors": [], "method": None}
            payload = json.dumps(obj, separators=(",", ":")).encode()
        frame = decode_frame(payload, d=node.store.d)
        outcome = node.store.receive(frame.cmb, self.clock)
        node.frames_delivered += 1
        if outcome.kind != "stored":
            kind = outcome.kind.removesuffix("_dropped")
            if kind in node.drops:
                node.drops[kind] += 1
        if outcome.stored and "label" in step:
            self.labels[step["label"]] = outcome.entry.cmb
        result: dict[str, Any] = {"node": node.node_id, "outcome": outcome.kind}
        if outcome.svaf is not None:
            result["decision"] = outcome.svaf.decision.value
            result["total_drift"] = outcome.svaf.total_drift
        return result

    def _op_restart(self, step, idx):
        node = self.node(step["node"], idx)
        node.boot()  # drop in-memory state, reload persistence
        node.frames_delivered = 0
        return {"node": node.node_id}

    def _op_advance_clock(self, step, idx):
        self.clock += int(step["ms"])
        return {"clock": self.clock}

    def _op_snapshot(self, step, idx):
        node = self.node(step["node"], idx)
        self.snapshots[step["name"]] = {
            "digest": node.store.digest(),
            "recall": [e.key for e in node.store.recall(limit=step.get("limit", 100))],
        }
        return {"node": node.node_id, "name": step["name"]}

    # --- assertions ---

    def _op_assert(self, step, idx):
        check = step.get("check")
        handler = getattr(self, f"_check_{check}", None)
        if handler is None:
            raise ScriptError(f"unknown check {check!r}", step_index=idx)
        ok, detail = handler(step, idx)
        if not ok:
            raise ScriptError(f"assertion {check} failed: {detail}", step_index=idx)
        return {"check": check, "ok": True}

    def _check_store_size(self, step, idx):
        node = self.node(step["node"], idx)
        size = len(node.store.entries)
        return size == step["equals"], f"size {size} != {step['equals']}"

    def _check_drops(self, step, idx):
        node = self.node(step["node"], idx)
        count = node.drops.get(step["kind"], 0)
        return count == step["equals"], f"{step['kind']}={count} != {step['equals']}"

    def _check_last_outcome(self, step, idx):
        for result in reversed(self.step_results):
            if "outcome" in result:
                want = step["equals"]
                if step.get("negate"):
                    return result["outcome"] != want, f"outcome {result['outcome']}"
                return result["outcome"] == want, f"outcome {result['outcome']}"
        return False, "no deliver step yet"

    def _check_last_decision(self, step, idx):
        for result in reversed(self.step_results):
            if "decision" in result:
                return (
                    result["decision"] == step["equals"],
                    f"decision {result['decision']}",
                )
        return False, "no evaluated deliver step yet"

    def _check_totals_differ(self, step, idx):
        a, b = step["steps"]
        ta = self.step_results[a].get("total_drift")
        tb = self.step_results[b].get("total_drift")
        if ta is None or tb is None:
            return False, f"steps {a},{b} carry no total_drift"
        return ta != tb, f"totals equal: {ta}"

    def _check_digest_equals_snapshot(self, step, idx):
        node = self.node(step["node"], idx)
        snap = self.snapshots.get(step["name"])
        if snap is None:
            return False, f"no snapshot {step['name']!r}"
        return (
            node.store.digest() == snap["digest"],
            "digest changed since snapshot",
        )

    def _check_recall_matches_snapshot(self, step, idx):
        node = self.node(step["node"], idx)
        snap = self.snapshots.get(step["name"])
        if snap is None:
            return False, f"no snapshot {step['name']!r}"
        before = set(snap["recall"])
        after = set(e.key for e in node.store.recall(limit=step.get("limit", 100)))
        if not before <= after:
            return False, "snapshot entries missing after restart"
        new = len(after - before)
        allow = step.get("allow_new", 0)
        return new <= allow, f"{new} new entries > allowed {allow}"

    def _check_frames_delivered(self, step, idx):
        node = self.node(step["node"], idx)
        return (
            node.frames_delivered == step["equals"],
            f"delivered {node.frames_delivered} != {step['equals']}",
        )

    def _check_origin_remix_total(self, step, idx):
        origin = self.labels.get(step["origin"])
        if origin is None:
            return False, f"unknown origin label {step['origin']!r}"
        total = 0
        for node in self.nodes.values():
            for entry in node.store.entries.values():
                lineage = entry.cmb.lineage
                if origin.key in lineage.ancestors or origin.key in lineage.parents:
                    total += 1
        return total <= step["max"], f"{total} remixes of origin > {step['max']}"


def run(scenario: Scenario, workdir: str) -> list[dict[str, Any]]:
    """Execute a scenario in the given (empty) working directory and return
    its trace. Raises ScriptError, with the step index, on any failed
    assertion or malformed step."""
    return _Runner(scenario, workdir).run()


# --- canned coordination scenarios ---

def _texts(prefix: str, mood: str = "steady") -> dict[str, str]:
    return {
        "focus": f"{prefix}-focus",
        "issue": f"{prefix}-issue",
        "intent": f"{prefix}-intent",
        "motivation": f"{prefix}-motivation",
        "commitment": f"{prefix}-commitment",
        "perspective": f"{prefix}-perspective",
        "mood": mood,
    }


def scenario_echo_loop() -> Scenario:
    """A block returning to its origin through one or two hops is dropped as
    an echo; with lineage stripped the echo goes uncaught (negative
    control showing lineage is load-bearing)."""
    script = [
        {"op": "observe", "node": "A", "fields": _texts("ring-task"),
         "mood": [0.2, 0.3], "label": "c0"},
        {"op": "assert", "check": "store_size", "node": "A", "equals": 1},
        # two-node loop: A -> B -> A
        {"op": "deliver", "frame": "c0", "to": "B", "label": "c1"},
        {"op": "assert", "check": "last_outcome", "equals": "stored"},
        {"op": "snapshot", "node": "A", "name": "a-before-echo"},
        {"op": "deliver", "frame": "c1", "to": "A"},
        {"op": "assert", "check": "last_outcome", "equals": "echo_dropped"},
        {"op": "assert", "check": "drops", "node": "A", "kind": "echo", "equals": 1},
        {"op": "assert", "check": "store_size", "node": "A", "equals": 1},
        {"op": "assert", "check": "digest_equals_snapshot", "node": "A",
         "name": "a-before-echo"},
        # three-node ring: A -> B -> C -> A
        {"op": "deliver", "frame": "c1", "to": "C", "label": "c2"},
        {"op": "assert", "check": "last_outcome", "equals": "stored"},
        {"op": "deliver", "frame": "c2", "to": "A"},
        {"op": "assert", "check": "last_outcome", "equals": "echo_dropped"},
        {"op": "assert", "check": "drops", "node": "A", "kind": "echo", "equals": 2},
        {"op": "assert", "check": "store_size", "node": "A", "equals": 1},
        {"op": "assert", "check": "origin_remix_total", "origin": "c0", "max": 2},
        # negative control on a fresh chain: with lineage stripped, the
        # returning block is not recognized as an echo
        {"op": "observe", "node": "A", "fields": _texts("control-task"),
         "mood": [0.0, 0.1], "label": "d0"},
        {"op": "deliver", "frame": "d0", "to": "B", "label": "d1"},
        {"op": "assert", "check": "last_outcome", "equals": "stored"},
        {"op": "deliver", "frame": "d1", "to": "A", "strip_lineage": True},
        {"op": "assert", "check": "last_outcome", "equals": "echo_dropped",
         "negate": True},
        {"op": "assert", "check": "drops", "node": "A", "kind": "echo", "equals": 2},
    ]
    return Scenario(
        name="echo-loop",
        nodes=(
            {"id": "A", "role": "origin"},
            {"id": "B", "role": "relay-b"},
            {"id": "C", "role": "relay-c"},
        ),
        script=tuple(script),
    )


def scenario_restart_recall() -> Scenario:
    """Nodes resume coordination after a restart from their own persisted
    remix memory: digests survive reload, recovery consumes exactly one wake
    frame per restarted node, and no history is replayed."""
    commitment_heavy = {
        "focus": 2.0, "issue": 1.0, "intent": 1.0, "motivation": 1.0,
        "commitment": 6.0, "perspective": 1.0, "mood": 1.0,
    }
    perspective_heavy = {
        "focus": 1.0, "issue": 1.0, "intent": 1.0, "motivation": 6.0,
        "commitment": 1.0, "perspective": 2.0, "mood": 1.0,
    }
    # The wake block carries task context close to wave 2, so both restarted
    # receivers admit it; only the focus field is new.
    wake_fields = dict(_texts("sprint-wave-2"), focus="sprint-wave-3-refresh")
    script = [
        # several coordination rounds before the restart
        {"op": "observe", "node": "A", "fields": _texts("sprint-wave-1"),
         "mood": [0.2, 0.3], "label": "w1"},
        {"op": "deliver", "frame": "w1", "to": "B"},
        {"op": "deliver", "frame": "w1", "to": "C"},
        {"op": "advance_clock", "ms": 60000},
        {"op": "observe", "node": "A", "fields": _texts("sprint-wave-2"),
         "mood": [0.1, 0.4], "label": "w2"},
        {"op": "deliver", "frame": "w2", "to": "B"},
        {"op": "deliver", "frame": "w2", "to": "C"},
        {"op": "observe", "node": "B",
         "fields": _texts("review-notes", mood="attentive"),
         "mood": [0.0, 0.2]},
        {"op": "observe", "node": "C",
         "fields": _texts("audit-notes", mood="wary"),
         "mood": [-0.1, 0.3]},
        {"op": "snapshot", "node": "B", "name": "b-pre"},
        {"op": "snapshot", "node": "C", "name": "c-pre"},
        # both peers restart into fresh memory, reloading persistence
        {"op": "restart", "node": "B"},
        {"op": "restart", "node": "C"},
        {"op": "assert", "check": "digest_equals_snapshot", "node": "B",
         "name": "b-pre"},
        {"op": "assert", "check": "digest_equals_snapshot", "node": "C",
         "name": "c-pre"},
        # a single wake broadcast carries task context, not peer state
        {"op": "observe", "node": "A", "fields": wake_fields,
         "mood": [0.2, 0.3], "label": "wake"},
        {"op": "deliver", "frame": "wake", "to": "B"},
        {"op": "assert", "check": "last_outcome", "equals": "stored"},
        {"op": "deliver", "frame": "wake", "to": "C"},
        {"op": "assert", "check": "last_outcome", "equals": "stored"},
        # different role weights see the same wake block differently
        {"op": "assert", "check": "totals_differ", "steps": [16, 18]},
        {"op": "assert", "check": "recall_matches_snapshot", "node": "B",
         "name": "b-pre", "allow_new": 1},
        {"op": "assert", "check": "recall_matches_snapshot", "node": "C",
         "name": "c-pre", "allow_new": 1},
        # exactly one frame reached each restarted node during recovery
        {"op": "assert", "check": "frames_delivered", "node": "B", "equals": 1},
        {"op": "assert", "check": "frames_delivered", "node": "C", "equals": 1},
    ]
    return Scenario(
        name="restart-recall",
        nodes=(
            {"id": "A", "role": "executor"},
            {"id": "B", "role": "compliance", "alpha": commitment_heavy},
            {"id": "C", "role": "quality-review", "alpha": perspective_heavy},
        ),
        script=tuple(script),
    )


def scenario_role_divergence() -> Scenario:
    """The same block is admitted at one receiver and rejected at another
    purely through role weights; swapping the profiles swaps the decisions."""
    probe_fields = {
        "focus": "shared-task-focus",
        "issue": "fresh-divergent-issue",
        "intent": "fresh-divergent-intent",
        "motivation": "fresh-divergent-motivation",
        "commitment": "fresh-divergent-commitment",
        "perspective": "probe-origin",
        "mood": "methodical",
    }
    # X weights the fields the probe matches; Y weights the fields it misses.
    match_heavy = {
        "focus": 10.0, "issue": 0.1, "intent": 0.1, "motivation": 0.1,
        "commitment": 0.1, "perspective": 0.1, "mood": 10.0,
    }
    miss_heavy = {
        "focus": 0.1, "issue": 10.0, "intent": 10.0, "motivation": 10.0,
        "commitment": 10.0, "perspective": 0.1, "mood": 0.1,
    }
    seed_fields = dict(probe_fields)
    seed_fields.update(
        issue="established-issue",
        intent="established-intent",
        motivation="established-motivation",
        commitment="established-commitment",
        perspective="seed-origin",
    )
    script = [
        # identical seed memory at X, Y, and the swapped-profile pair
        {"op": "observe", "node": "S", "fields": seed_fields,
         "mood": [0.1, 0.1], "label": "seed"},
        {"op": "deliver", "frame": "seed", "to": "X"},
        {"op": "deliver", "frame": "seed", "to": "Y"},
        {"op": "deliver", "frame": "seed", "to": "X2"},
        {"op": "deliver", "frame": "seed", "to": "Y2"},
        {"op": "observe", "node": "S", "fields": probe_fields,
         "mood": [0.1, 0.1], "label": "probe"},
        {"op": "deliver", "frame": "probe", "to": "X"},
        {"op": "assert", "check": "last_decision", "equals": "aligned"},
        {"op": "assert", "check": "last_outcome", "equals": "stored"},
        {"op": "deliver", "frame": "probe", "to": "Y"},
        {"op": "assert", "check": "last_decision", "equals": "rejected"},
        {"op": "assert", "check": "last_outcome", "equals": "rejected_dropped"},
        {"op": "assert", "check": "store_size", "node": "X", "equals": 2},
        {"op": "assert", "check": "store_size", "node": "Y", "equals": 1},
        # swap profiles and the decisions swap
        {"op": "deliver", "frame": "probe", "to": "X2"},
        {"op": "assert", "check": "last_decision", "equals": "rejected"},
        {"op": "deliver", "frame": "probe", "to": "Y2"},
        {"op": "assert", "check": "last_decision", "equals": "aligned"},
    ]
    return Scenario(
        name="role-divergence",
        nodes=(
            {"id": "S", "role": "probe-origin"},
            {"id": "X", "role": "receiver-x", "alpha": match_heavy},
            {"id": "Y", "role": "receiver-y", "alpha": miss_heavy},
            {"id": "X2", "role": "receiver-x-swapped", "alpha": miss_heavy},
            {"id": "Y2", "role": "receiver-y-swapped", "alpha": match_heavy},
        ),
        script=tuple(script),
    )
