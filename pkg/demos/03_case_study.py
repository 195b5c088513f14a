"""Replay the bundled IoT case study end to end.

Five peers share a chain: two user devices that mine, a subject-side gateway,
an object-side gateway and the sensor it fronts. The subject keeps making
bursts of three requests; penalties escalate from 1 to 2 to 4 minutes at the
1st, 3rd and 6th misbehavior.
"""
import tempfile

from contractacl import bundled_scenario, run_scenario

with tempfile.TemporaryDirectory() as out:
    result = run_scenario(bundled_scenario(), difficulty=8, out_dir=out)
    print(f"expectations ok: {result.ok}; blocks: {result.network.reference_node.height}")
    misbehavior = 0
    for outcome in result.outcomes:
        note = ""
        if outcome.penalty:
            misbehavior += 1
            note = f"  <- misbehavior {misbehavior}, blocked {outcome.penalty // 60} min"
        print(f"t={outcome.time:5d} result={str(outcome.result):5s} penalty={outcome.penalty:3d}{note}")
    roots = {node.state_root.hex()[:16] for node in result.network.nodes.values()}
    print("replica state roots:", roots)
