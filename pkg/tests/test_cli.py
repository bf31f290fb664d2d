import json
import math
import subprocess
import sys

import pytest

from rpesim.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_hardy_json(capsys):
    code, out, _ = run_cli(capsys, "run", "hardy", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["probabilities"]["p_detector_d"] == pytest.approx(0.125, abs=1e-15)
    for key in ("scenario", "config", "probabilities", "conditional_states", "chsh",
                "concurrence", "samples", "provenance"):
        assert key in doc
    rows = doc["conditional_states"]["detector_d"]
    assert {r["ket"] for r in rows} == {"d=1 z1=+ z2=+", "d=1 z1=- z2=-"}


def test_mzi_bs_out_text(capsys):
    code, out, _ = run_cli(capsys, "run", "mzi", "--bs", "out")
    assert code == 0
    assert "P(C)=0.5 P(D)=0.5" in out


def test_unite_and_spin_with_sampling(capsys):
    code, out, _ = run_cli(capsys, "run", "rpe-coherent", "--erasure", "unite_and_spin",
                           "--shots", "100000", "--seed", "42", "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["chsh"]["value"] == pytest.approx(2 * math.sqrt(2), abs=1e-9)
    est = doc["samples"]["chsh"]
    assert abs(est["value"] - 2 * math.sqrt(2)) < 5 * est["sigma"]
    assert doc["samples"]["seed"] == 42
    assert sum(doc["samples"]["counts"].values()) == 100000


def test_scenario_flag_and_aliases(capsys):
    _, a, _ = run_cli(capsys, "run", "--scenario", "ifm", "--blocker", "--format", "json", "--deterministic")
    _, b, _ = run_cli(capsys, "run", "two_source_ifm", "--blocker", "--format", "json", "--deterministic")
    assert a == b
    assert json.loads(a)["config"]["blocker"] is True


def test_list(capsys):
    code, out, _ = run_cli(capsys, "list")
    assert code == 0
    lines = out.strip().splitlines()
    assert len(lines) == 6
    assert all("fig." in line for line in lines)
    _, again, _ = run_cli(capsys, "list")
    assert again == out


def test_deterministic_output_is_byte_identical(capsys):
    args = ("run", "hardy", "--shots", "1000", "--seed", "7", "--format", "json", "--deterministic")
    _, a, _ = run_cli(capsys, *args)
    _, b, _ = run_cli(capsys, *args)
    assert a == b
    assert "timestamp" not in json.loads(a)["provenance"]
    _, c, _ = run_cli(capsys, *args[:-1])
    assert "timestamp" in json.loads(c)["provenance"]


def test_json_round_trip(capsys):
    _, out, _ = run_cli(capsys, "run", "rpe-incoherent", "--format", "json", "--deterministic")
    assert json.dumps(json.loads(out), indent=2) == out.rstrip("\n")


def test_prep_aliases(capsys):
    _, a, _ = run_cli(capsys, "run", "hardy", "--prep", "eq8", "--format", "json", "--deterministic")
    _, b, _ = run_cli(capsys, "run", "hardy", "--prep", "i_down", "--format", "json", "--deterministic")
    assert a == b
    assert json.loads(a)["config"]["prep"] == "i_down"


@pytest.mark.parametrize("argv", [
    ["run", "nonsense"],
    ["run", "hardy", "--phase", "abc"],
    ["run", "hardy", "--erasure", "unite"],
    ["run", "mzi", "--nmax", "3"],
    ["run", "hardy", "--seed", "5"],
    ["run"],
    [],
    ["run", "hardy", "--shots", "0"],
    ["run", "hardy", "--phase", "nan"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run_cli(capsys, *argv)
    assert code == 2
    assert err


def test_physics_error(capsys):
    code, out, err = run_cli(capsys, "run", "rpe-incoherent", "--epsilon", "0")
    assert code == 3
    assert out == ""
    assert "physics error" in err


def test_config_file(tmp_path, capsys):
    _, ref, _ = run_cli(capsys, "run", "hardy", "--format", "json", "--deterministic")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(json.loads(ref)["config"]))
    _, out, _ = run_cli(capsys, "run", "--config", str(cfg), "--format", "json", "--deterministic")
    assert out == ref
    # command-line flags override the file
    _, over, _ = run_cli(capsys, "run", "--config", str(cfg), "--bs", "out", "--format", "json")
    assert json.loads(over)["config"]["bs_present"] is False


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"scenario": "hardy", "wavelength": 780}))
    code, _, _ = run_cli(capsys, "run", "--config", str(cfg))
    assert code == 2
    code, _, _ = run_cli(capsys, "run", "--config", str(tmp_path / "missing.json"))
    assert code == 2


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "rpesim.cli", "run", "mzi"],
                         capture_output=True, text=True, check=True)
    assert "P(C)=1 P(D)=0" in out.stdout
