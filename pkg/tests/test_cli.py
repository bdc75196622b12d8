import json
import shutil
import subprocess

import pytest
from hypothesis import given, settings, strategies as st

from oschydro.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_PASS, OUT_ENV, compare_runs, main, manifest_hash, run_scenario
from oschydro.config import ConfigError, Scenario, blob_hash, bundled_scenarios, parse_value

SMALL_RUN = """
[scenario]
name = small-run
experiment = hydro_run
system = scalar

[grid]
extents = 16.0
points = 64

[potential]
kind = free

[initial]
state = gaussian_packet
background = 1e-3

[oscillation]
omegas = {omegas}

[run]
duration = 0.2
reference = true
reference_dt = 1e-3
"""


def test_list_and_validate_bundled_scenarios(capsys):
    assert main(["list-scenarios"]) == EXIT_PASS
    listed = capsys.readouterr().out
    for name in bundled_scenarios():
        assert name in listed
        assert main(["validate", "--config", name]) == EXIT_PASS


def _write(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_negative_omega_is_a_located_config_error(tmp_path, capsys):
    p = _write(tmp_path, SMALL_RUN.format(omegas="-100"))
    with pytest.raises(ConfigError) as err:
        Scenario.load(p)
    assert err.value.section == "oscillation" and err.value.key == "omegas"
    assert err.value.line == SMALL_RUN.format(omegas="-100").splitlines().index("omegas = -100") + 1
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "out")]) == EXIT_CONFIG
    assert "omegas" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


@pytest.mark.parametrize("bad, fragment", [
    ("[bogus]\nx = 1\n", "unknown section"),
    ("[grid]\nthis line has no separator\n", "malformed"),
    ("x = 1\n", "before the first"),
])
def test_malformed_files_are_rejected(tmp_path, bad, fragment):
    with pytest.raises(ConfigError, match=fragment):
        Scenario.load(_write(tmp_path, SMALL_RUN.format(omegas="100") + bad if "[" in bad else bad))


@given(st.lists(st.integers(-10 ** 6, 10 ** 6), min_size=2, max_size=5))
def test_comma_lists_parse_to_numbers(values):
    assert parse_value(", ".join(map(str, values))) == values


@pytest.mark.parametrize("payload", [b"", b"hello\n", bytes(range(256))])
def test_blob_hash_matches_git(tmp_path, payload):
    git = shutil.which("git")
    if git is None:
        pytest.skip("git not available")
    p = tmp_path / "blob"
    p.write_bytes(payload)
    out = subprocess.run([git, "hash-object", str(p)], capture_output=True, text=True, check=True)
    assert blob_hash(payload) == out.stdout.strip()


def test_rerun_reproduces_manifest_hash(tmp_path):
    a = run_scenario("ponderomotive-identity", tmp_path / "a")
    b = run_scenario("ponderomotive-identity", tmp_path / "b")
    assert a["status"] == "pass"
    assert a["manifest_hash"] == b["manifest_hash"] == manifest_hash(a)
    on_disk = json.loads((tmp_path / "a" / "ponderomotive-identity" / "run_manifest.json").read_text())
    assert on_disk["manifest_hash"] == a["manifest_hash"]


def test_seed_override_renumbers_seeds():
    sc = Scenario.load(bundled_scenarios()["pinball"])
    keys = sorted(sc.sections["seeds"])
    sc.override_seeds(100)
    assert [sc.sections["seeds"][k] for k in keys] == list(range(100, 100 + len(keys)))


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    m = run_scenario(_write(tmp_path, SMALL_RUN.format(omegas="100")))
    assert (tmp_path / "env" / "small-run" / "run_manifest.json").is_file()
    assert m["status"] == "pass"


def test_compare_self_mismatch_and_exit_codes(tmp_path, capsys):
    out = tmp_path / "out"
    for tag, omegas in (("one", "100, 200"), ("two", "100")):
        text = SMALL_RUN.format(omegas=omegas).replace("small-run", tag)
        assert main(["run", "--config", str(_write(tmp_path, text, tag + ".cfg")), "--out", str(out)]) == EXIT_PASS
    run_a = out / "one" / "omega_100"
    ref_a = out / "one" / "reference_omega_100"
    rows, summary = compare_runs(run_a, run_a, "L1", tmp_path / "self.csv")
    assert summary == 0.0 and len(rows) > 1
    rows, summary = compare_runs(run_a, ref_a, "Linf")
    assert 0 < summary < 1e-2
    assert main(["compare", str(run_a), str(out / "one" / "omega_200"), "--out", str(tmp_path / "x.csv")]) \
        == EXIT_CONFIG
    assert main(["compare", str(run_a), str(tmp_path / "missing")]) == EXIT_CONFIG
    assert main(["compare", str(run_a), str(out / "two" / "omega_100"), "--out", str(tmp_path / "y.csv")]) \
        == EXIT_PASS
    text = (tmp_path / "y.csv").read_text()
    assert "summary_max" in text


def test_failing_checks_exit_one(tmp_path):
    cfg = bundled_scenarios()["ponderomotive-identity"].read_text().replace("relative = 1e-10", "relative = 1e-20")
    p = _write(tmp_path, cfg)
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "out")]) == EXIT_FAIL
    m = json.loads((tmp_path / "out" / "ponderomotive-identity" / "run_manifest.json").read_text())
    assert m["status"] == "fail" and m["exit_code"] == EXIT_FAIL
