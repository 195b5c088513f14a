import json

import pytest

from contractacl import cli
from contractacl.chain import load_snapshot, verify_snapshot
from contractacl.errors import ScenarioError
from contractacl.scenario import bundled_scenario, load_scenario, parse_scenario, run_scenario
from conftest import CASESTUDY_TOPOLOGY

POLICY = {"resource": "file A", "action": "read", "permission": "allow", "minInterval": 100, "threshold": 2}


def scenario(actions, **extra):
    data = {"schemaVersion": 1, "topology": CASESTUDY_TOPOLOGY, "difficulty": 4, "seed": 5, "actions": actions}
    data.update(extra)
    return data


def setup_actions():
    return [
        {"at": 10, "actor": "desktop", "kind": "deployJC"},
        {"at": 20, "actor": "piObject", "kind": "registerMethod", "method": "Method 1",
         "subject": "piSubject", "object": "sensorB", "policies": [POLICY]},
    ]


def request(at, **kw):
    action = {"at": at, "actor": "piSubject", "kind": "request", "method": "Method 1", "resource": "file A", "action": "read"}
    action.update(kw)
    return action


def expect(at, **kw):
    return {"at": at, "kind": "expect", **kw}


@pytest.fixture(scope="module")
def casestudy_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    return run_scenario(bundled_scenario(), difficulty=4, out_dir=out), out


# -- running ----------------------------------------------------------------------


def test_casestudy_passes(casestudy_run):
    result, _ = casestudy_run
    assert result.ok, result.failures
    penalties = [o.penalty for o in result.outcomes if o.penalty]
    assert penalties == [60, 60, 120, 120, 120, 240]


def test_empty_actions(tmp_path):
    result = run_scenario(parse_scenario(scenario([])), out_dir=tmp_path)
    assert result.ok and result.records == []
    assert (tmp_path / "runlog.jsonl").read_text() == ""
    assert verify_snapshot(tmp_path / "snapshot.json")


def test_runlog_byte_identical(tmp_path):
    a = run_scenario(bundled_scenario(), difficulty=4, out_dir=tmp_path / "a")
    b = run_scenario(bundled_scenario(), difficulty=4, out_dir=tmp_path / "b")
    assert a.runlog_path.read_bytes() == b.runlog_path.read_bytes()
    assert a.snapshot_path.read_bytes() == b.snapshot_path.read_bytes()


def test_seed_changes_runlog():
    a = run_scenario(bundled_scenario(), difficulty=0, seed=1)
    b = run_scenario(bundled_scenario(), difficulty=0, seed=2)
    assert a.ok and b.ok
    assert a.runlog_text() != b.runlog_text()


def test_runlog_records_one_line_per_record(casestudy_run):
    result, _ = casestudy_run
    lines = result.runlog_path.read_text().splitlines()
    assert len(lines) == len(result.records)
    tx_records = [json.loads(line) for line in lines if '"txId"' in line]
    assert all({"height", "txId", "action", "status", "events", "outcome"} <= set(r) for r in tx_records)
    with_outcome = [r for r in tx_records if r["outcome"]]
    assert len(with_outcome) == len(result.outcomes)


def test_failed_expectation_fails_run():
    data = scenario(setup_actions() + [request(1000), expect(1001, result=False, penalty=0)])
    result = run_scenario(parse_scenario(data))
    assert not result.ok
    assert "expectation" in result.failures[0]


def test_failing_action_can_be_expected():
    actions = setup_actions() + [
        {"at": 30, "actor": "desktop", "kind": "policyAdd", "method": "Method 1", **POLICY, "resource": "file B"},
        expect(31, status="permission-denied"),
    ]
    assert run_scenario(parse_scenario(scenario(actions))).ok
    unexpected = run_scenario(parse_scenario(scenario(actions[:-1])))
    assert not unexpected.ok


def test_lifecycle_actions_and_dangling_warning():
    actions = setup_actions() + [
        {"at": 30, "actor": "piObject", "kind": "policyUpdate", "method": "Method 1", "resource": "file A",
         "action": "read", "permission": "deny"},
        request(1000),
        expect(1001, result=False, penalty=0),
        {"at": 1100, "actor": "piObject", "kind": "updateMethod", "method": "Method 1", "policies": [POLICY]},
        request(1300),
        expect(1301, result=True, penalty=0),
        {"at": 1400, "actor": "piObject", "kind": "policyDelete", "method": "Method 1", "resource": "file A", "action": "read"},
        request(1500),
        expect(1501, result=False, penalty=0),
        {"at": 1600, "actor": "piObject", "kind": "deleteMethod", "method": "Method 1"},
        request(1700),
        expect(1701, status="no-such-method"),
    ]
    result = run_scenario(parse_scenario(scenario(actions)))
    assert result.ok, result.failures
    assert not any("warning" in r for r in result.records)


def test_strict_time_flag():
    result = run_scenario(bundled_scenario(), difficulty=0, strict_time=True)
    assert result.ok, result.failures


# -- validation -------------------------------------------------------------------


@pytest.mark.parametrize(
    "mutate",
    [
        lambda d: d.update(schemaVersion=2),
        lambda d: d.update(topology=7),
        lambda d: d.update(registry="nobody"),
        lambda d: d["actions"].append({"at": 5, "actor": "desktop", "kind": "deployJC"}),
        lambda d: d["actions"].append({"at": 50, "actor": "ghost", "kind": "deployJC"}),
        lambda d: d["actions"].append({"at": 50, "actor": "desktop", "kind": "fly"}),
        lambda d: d["actions"].append({"at": 50, "actor": "desktop", "kind": "deleteMethod"}),
        lambda d: d["actions"].append({"at": "50", "actor": "desktop", "kind": "deployJC"}),
        lambda d: d["actions"].append(request(90)),
    ],
)
def test_schema_errors(mutate):
    data = scenario(setup_actions())
    mutate(data)
    with pytest.raises(ScenarioError):
        parse_scenario(data)


def test_topology_reference_resolved(tmp_path):
    (tmp_path / "topo.json").write_text(json.dumps(CASESTUDY_TOPOLOGY))
    (tmp_path / "s.scn").write_text(json.dumps(scenario([], topology="topo.json", seed=11)))
    sc = load_scenario(tmp_path / "s.scn")
    assert sc.seed == sc.topology.seed == 11
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.scn")


# -- verify -----------------------------------------------------------------------


def test_verify_untouched(casestudy_run):
    _, out = casestudy_run
    assert verify_snapshot(out / "snapshot.json")


def _mutated(out, tmp_path, mutate):
    data = json.loads((out / "snapshot.json").read_text())
    mutate(data)
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    return path


def _bump_request_time(data):
    for block in data["blocks"]:
        for tx in block["txs"]:
            if tx["abi"] == "accessControl":
                tx["args"][2][1] += 1
                return


def test_verify_tampered_argument(casestudy_run, tmp_path):
    _, out = casestudy_run
    assert not verify_snapshot(_mutated(out, tmp_path, _bump_request_time))


def test_verify_truncated(casestudy_run, tmp_path):
    _, out = casestudy_run
    assert not verify_snapshot(_mutated(out, tmp_path, lambda d: d["blocks"].pop()))


def test_snapshot_fields(casestudy_run):
    _, out = casestudy_run
    snap = load_snapshot(out / "snapshot.json")
    assert snap.config.difficulty == 4
    assert len(snap.blocks) == len(snap.recorded_hashes) > 0


# -- command line -----------------------------------------------------------------


def test_cli_run_and_verify(tmp_path, capsys):
    assert cli.main(["run", "--difficulty", "2", "--out", str(tmp_path)]) == cli.EXIT_OK
    assert capsys.readouterr().out.startswith("ok:")
    assert cli.main(["verify", str(tmp_path / "snapshot.json")]) == cli.EXIT_OK
    assert capsys.readouterr().out.strip() == "valid"


def test_cli_failed_run(tmp_path):
    path = tmp_path / "s.scn"
    path.write_text(json.dumps(scenario(setup_actions() + [request(1000), expect(1001, result=False)])))
    assert cli.main(["run", str(path), "--out", str(tmp_path / "o")]) == cli.EXIT_FAILED


def test_cli_bad_input(tmp_path):
    bad = tmp_path / "bad.scn"
    bad.write_text("{not json")
    assert cli.main(["run", str(bad), "--out", str(tmp_path / "o")]) == cli.EXIT_BAD_INPUT
    assert cli.main(["verify", str(tmp_path / "nope.json")]) == cli.EXIT_BAD_INPUT
    assert cli.main(["verify", str(bad)]) == cli.EXIT_BAD_INPUT


def test_cli_invalid_snapshot(casestudy_run, tmp_path):
    _, out = casestudy_run
    path = _mutated(out, tmp_path, lambda d: d["blocks"].pop())
    assert cli.main(["verify", str(path)]) == cli.EXIT_FAILED


def test_cli_help_lists_flags(capsys):
    with pytest.raises(SystemExit):
        cli.main(["run", "--help"])
    text = capsys.readouterr().out
    for flag in ("--difficulty", "--seed", "--out", "--strict-time"):
        assert flag in text
