"""Acceptance criteria 1-10, each driven by its bundled scenario through the batch runner.

Every criterion prints one summary line. A criterion fails when any of its checks fails;
failing checks are listed with their measured values.
"""

import pytest

from oschydro.cli import run_scenario

CRITERIA = {
    1: ("free-packet-omega-sweep", 300.0),
    2: ("fast-fidelity", None),
    3: ("averaging-identities", None),
    4: ("quantum-potential-decomposition", None),
    5: ("ponderomotive-identity", None),
    6: ("harmonic-stationarity", None),
    7: ("em-reduction", None),
    8: ("many-body", 600.0),
    9: ("pinball", None),
    10: ("action-residuals", None),
}


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.3g}"
    if isinstance(v, list):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    return str(v)


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, tmp_path, capsys):
    scenario, time_limit = CRITERIA[number]
    m = run_scenario(scenario, tmp_path)
    checks = m.get("checks", [])
    if time_limit is not None:
        checks = checks + [{"name": "runtime_seconds", "value": m.get("wall_time_seconds"), "relation": "<=",
                            "bound": time_limit, "passed": m.get("wall_time_seconds", 1e99) <= time_limit}]
    failed = [c for c in checks if not c["passed"]]
    ok = m["status"] == "pass" and not failed
    detail = "; ".join(f"{c['name']}={_fmt(c['value'])} (need {c['relation']} {_fmt(c['bound'])})"
                       for c in failed) or f"{len(checks)} checks"
    if m["status"] == "error":
        detail = m["error"]
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} [{scenario}] {detail}")
    assert m["status"] != "error", m.get("error")
    assert not failed, detail
