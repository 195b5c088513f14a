"""Scenario files: load, validate and replay a timestamped action script.

A scenario is a JSON document (``schemaVersion`` 1) naming a topology, the
difficulty, a seed, JC parameters and a list of actions with strictly
increasing ``at`` times.  Running it drives a :class:`~contractacl.peers.Framework`
and produces a line-oriented run log plus a chain snapshot.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

from .chain import Block, save_snapshot
from .errors import ContractError, PeerError, RequestFailed, ScenarioError, StepFailed
from .peers import AccessOutcome, Framework, Network, PolicySpec, Topology

log = logging.getLogger(__name__)

SCENARIO_SCHEMA_VERSION = 1

ACTION_KINDS = (
    "deployJC",
    "registerMethod",
    "updateMethod",
    "deleteMethod",
    "policyAdd",
    "policyUpdate",
    "policyDelete",
    "request",
    "expect",
)

_REQUIRED = {
    "deployJC": (),
    "registerMethod": ("method", "subject", "object"),
    "updateMethod": ("method",),
    "deleteMethod": ("method",),
    "policyAdd": ("method", "resource", "action", "permission", "minInterval", "threshold"),
    "policyUpdate": ("method", "resource", "action"),
    "policyDelete": ("method", "resource", "action"),
    "request": ("method", "resource", "action"),
    "expect": (),
}


@dataclass
class JudgeParams:
    base: int = 2
    interval: int = 3
    penalty_unit: int = 60


@dataclass
class Scenario:
    topology: Topology
    difficulty: int
    seed: int
    actions: list[dict]
    jc: JudgeParams = field(default_factory=JudgeParams)
    registry: Optional[str] = None
    strict_time: bool = False


def bundled_scenario(name: str = "casestudy.scn") -> Path:
    return Path(str(resources.files("contractacl") / "scenarios" / name))


def _policy_intervals(action: dict) -> list[int]:
    kind = action["kind"]
    if kind in ("registerMethod", "updateMethod"):
        return [int(p.get("minInterval", 100)) for p in action.get("policies", [])]
    if kind in ("policyAdd", "policyUpdate") and "minInterval" in action:
        return [int(action["minInterval"])]
    return []


def parse_scenario(data: dict, base_dir: Union[str, Path] = ".") -> Scenario:
    if data.get("schemaVersion") != SCENARIO_SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schemaVersion {data.get('schemaVersion')!r}")
    topo_ref = data.get("topology")
    try:
        if isinstance(topo_ref, dict):
            topology = Topology.from_dict(topo_ref)
        elif isinstance(topo_ref, str):
            topology = Topology.load(Path(base_dir) / topo_ref)
        else:
            raise ScenarioError("topology must be a path or an inline object")
    except (OSError, KeyError, ValueError) as exc:
        raise ScenarioError(f"bad topology: {exc}") from exc

    seed = int(data.get("seed", topology.seed))
    topology = Topology(seed, topology.peers)
    names = {p.name for p in topology.peers}
    actions = list(data.get("actions", []))
    last = None
    intervals: list[int] = []
    first_request: Optional[int] = None
    for i, action in enumerate(actions):
        kind = action.get("kind")
        if kind not in ACTION_KINDS:
            raise ScenarioError(f"action {i}: unknown kind {kind!r}")
        at = action.get("at")
        if type(at) is not int:
            raise ScenarioError(f"action {i}: 'at' must be an integer")
        if last is not None and at <= last:
            raise ScenarioError(f"action {i}: times must be strictly increasing ({at} after {last})")
        last = at
        actor = action.get("actor")
        if kind != "expect" and actor not in names:
            raise ScenarioError(f"action {i}: unknown actor {actor!r}")
        for key in _REQUIRED[kind]:
            if key not in action:
                raise ScenarioError(f"action {i}: {kind} needs {key!r}")
        for key in ("subject", "object", "via"):
            if key in action and action[key] not in names:
                raise ScenarioError(f"action {i}: unknown peer {action[key]!r}")
        intervals.extend(_policy_intervals(action))
        if kind == "request" and first_request is None:
            first_request = at
    if first_request is not None and intervals and first_request <= max(intervals):
        raise ScenarioError(
            f"first request at {first_request} must exceed every policy minInterval (max {max(intervals)})"
        )

    registry = data.get("registry")
    if registry is not None and registry not in names:
        raise ScenarioError(f"unknown registry peer {registry!r}")
    jc = data.get("jcParams", {})
    return Scenario(
        topology=topology,
        difficulty=int(data.get("difficulty", 8)),
        seed=seed,
        actions=actions,
        jc=JudgeParams(int(jc.get("base", 2)), int(jc.get("interval", 3)), int(jc.get("penaltyUnitSeconds", 60))),
        registry=registry,
        strict_time=bool(data.get("strictTime", False)),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from exc
    return parse_scenario(data, path.parent)


@dataclass
class RunResult:
    records: list[dict]
    failures: list[str]
    network: Network
    framework: Framework
    outcomes: list[AccessOutcome] = field(default_factory=list)
    runlog_path: Optional[Path] = None
    snapshot_path: Optional[Path] = None

    @property
    def ok(self) -> bool:
        return not self.failures

    def runlog_text(self) -> str:
        return "".join(json.dumps(r, sort_keys=True, separators=(",", ":")) + "\n" for r in self.records)


def _echo(index: int, action: dict) -> str:
    return f"{index}:{action['kind']}"


class _Runner:
    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.network = Network(scenario.topology, difficulty=scenario.difficulty)
        self.framework = Framework(self.network)
        self.records: list[dict] = []
        self.failures: list[str] = []
        self.outcomes: list[AccessOutcome] = []
        self.methods: list[str] = []
        self._by_tx: dict[str, dict] = {}
        self._current = ("setup", 0)
        self._last: dict[str, Any] = {}
        self._unexpected: Optional[str] = None
        self.network.block_listeners.append(self._on_block)

    def _on_block(self, block: Block) -> None:
        echo, at = self._current
        node = self.network.reference_node
        for tx, receipt in node.receipts_at(block.height):
            record = {
                "at": at,
                "action": echo,
                "height": block.height,
                "txId": tx.tx_id.hex(),
                "abi": tx.abi_name,
                "status": receipt.status,
                "events": [e.to_json() for e in receipt.events],
                "outcome": None,
            }
            self._by_tx[record["txId"]] = record
            self.records.append(record)

    def run(self) -> None:
        sc = self.scenario
        if not sc.actions:
            return
        registry = sc.registry or self.network.miners[0].name
        self.framework.deploy_register(registry, 0)
        for index, action in enumerate(sc.actions):
            self._current = (_echo(index, action), action["at"])
            if action["kind"] == "expect":
                self._expect(index, action)
                continue
            if self._unexpected is not None:
                self.failures.append(self._unexpected)
                self._unexpected = None
            self._last = self._perform(index, action)
            self._check_dangling(index, action)
        if self._unexpected is not None:
            self.failures.append(self._unexpected)

    def _perform(self, index: int, action: dict) -> dict:
        fw, at, kind = self.framework, action["at"], action["kind"]
        actor = action.get("actor")
        try:
            if kind == "deployJC":
                jc = self.scenario.jc
                fw.deploy_judge(
                    actor,
                    int(action.get("base", jc.base)),
                    int(action.get("interval", jc.interval)),
                    int(action.get("penaltyUnitSeconds", jc.penalty_unit)),
                    at,
                )
            elif kind == "registerMethod":
                policies = [PolicySpec.from_dict(p) for p in action.get("policies", [])]
                fw.register_access_control_method(
                    actor, action["subject"], action["object"], action["method"], policies, at,
                    strict_time=self.scenario.strict_time,
                )
                self.methods.append(action["method"])
            elif kind == "updateMethod":
                policies = [PolicySpec.from_dict(p) for p in action.get("policies", [])]
                fw.update_access_control_method(actor, action["method"], policies, at, strict_time=self.scenario.strict_time)
            elif kind == "deleteMethod":
                fw.delete_access_control_method(actor, action["method"], at)
                self.methods.remove(action["method"])
            elif kind == "policyAdd":
                fw.add_policy(actor, action["method"], PolicySpec.from_dict(action), at)
            elif kind == "policyUpdate":
                fw.update_policy(
                    actor, action["method"], action["resource"], action["action"],
                    action.get("permission"), action.get("minInterval"), action.get("threshold"), at,
                )
            elif kind == "policyDelete":
                fw.delete_policy(actor, action["method"], action["resource"], action["action"], at)
            elif kind == "request":
                outcome = fw.request_access(actor, action["method"], action["resource"], action["action"], at, action.get("via"))
                self.outcomes.append(outcome)
                self._by_tx[outcome.tx_id.hex()]["outcome"] = outcome.to_json()
                return {"status": "ok", "result": outcome.result, "penalty": outcome.penalty}
        except (StepFailed, RequestFailed) as exc:
            status = exc.status if isinstance(exc, StepFailed) else exc.receipt.status
            return self._failed(index, action, status, str(exc))
        except ContractError as exc:
            return self._failed(index, action, exc.code, str(exc))
        except PeerError as exc:
            return self._failed(index, action, type(exc).__name__, str(exc))
        return {"status": "ok"}

    def _failed(self, index: int, action: dict, status: str, detail: str) -> dict:
        self.records.append({"at": action["at"], "action": _echo(index, action), "status": status, "error": detail})
        self._unexpected = f"action {_echo(index, action)} failed: {status}"
        return {"status": status}

    def _expect(self, index: int, action: dict) -> None:
        wanted = {k: action[k] for k in ("status", "result", "penalty") if k in action}
        if "status" in wanted and wanted["status"] == self._last.get("status"):
            self._unexpected = None
        actual = {k: self._last.get(k) for k in wanted}
        ok = actual == wanted
        self.records.append({"at": action["at"], "action": _echo(index, action), "expect": wanted, "actual": actual, "ok": ok})
        if not ok:
            self.failures.append(f"expectation {_echo(index, action)} failed: wanted {wanted}, got {actual}")

    def _check_dangling(self, index: int, action: dict) -> None:
        world = self.network.reference_node.world
        for method in self.methods:
            try:
                address, _ = self.framework.get_contract(self.network.miners[0], method)
            except ContractError:
                continue
            if not world.is_alive(address):
                log.warning("method %s points at destroyed contract %s", method, address)
                self.records.append({"at": action["at"], "action": _echo(index, action), "warning": f"dangling method {method}"})


def run_scenario(
    source: Union[str, Path, Scenario],
    difficulty: Optional[int] = None,
    seed: Optional[int] = None,
    out_dir: Union[str, Path, None] = None,
    strict_time: Optional[bool] = None,
) -> RunResult:
    """Replay a scenario; writes ``runlog.jsonl`` and ``snapshot.json`` into ``out_dir`` when given."""
    scenario = source if isinstance(source, Scenario) else load_scenario(source)
    if difficulty is not None:
        scenario.difficulty = difficulty
    if seed is not None:
        scenario.seed = seed
        scenario.topology = Topology(seed, scenario.topology.peers)
    if strict_time is not None:
        scenario.strict_time = strict_time
    runner = _Runner(scenario)
    runner.run()
    result = RunResult(runner.records, runner.failures, runner.network, runner.framework, runner.outcomes)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.runlog_path = out / "runlog.jsonl"
        result.runlog_path.write_text(result.runlog_text())
        result.snapshot_path = save_snapshot(runner.network.reference_node, out / "snapshot.json")
    return result
