"""CLI exit codes, byte determinism and golden reports.

Regenerate the golden files with ``python tests/test_cli.py`` after an intended
output change.
"""
import io
import json
import sys
from pathlib import Path

import pytest

from ergolab.cli import EXIT_BUDGET, EXIT_INVALID, EXIT_OK, EXIT_STRICT, run

GOLDEN_DIR = Path(__file__).parent / "golden"

GOLDEN = {
    "seminorm_zshift8": ["seminorm", "compute", "--system", "zshift:8", "--fn", "pm1:seed=1", "--order", "2",
                         "--full-cycle"],
    "average_rot1_fejer": ["average", "multi", "--system", "rot1:golden", "--fn", "fejer:2", "--k", "2",
                           "--schedule", "16,64"],
    "ap_multiples": ["ap", "count", "--set", "multiples:3:30", "--k", "2"],
    "decompose_catmap_vn": ["decompose", "--system", "catmap", "--fn", "e:1,0+const:1", "--kind", "vn",
                            "--schedule", "64"],
    "correspondence_small": ["correspondence", "--set", "1,2,3,5,8", "--k-max", "2"],
    "recurrence_z6": ["recurrence", "check", "--system", "zshift:6", "--fn", "indicator:0,3", "--k", "2",
                      "--schedule", "3,6"],
}


def call(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(list(argv), stdout=out, stderr=err)
    return code, out.getvalue(), err.getvalue()


@pytest.mark.parametrize("name", sorted(GOLDEN))
def test_golden_reports(name):
    code, out, _ = call(*GOLDEN[name])
    assert code == EXIT_OK
    assert out == (GOLDEN_DIR / f"{name}.txt").read_text()


def test_systems_list():
    code, out, _ = call("systems", "list")
    assert code == EXIT_OK and "catmap" in out and "anzai:golden" in out


@pytest.mark.parametrize("argv", [
    ["seminorm", "compute", "--system", "nope", "--fn", "const:1"],
    ["average", "multi", "--system", "zshift:4", "--fn", "const:1", "--schedule", "8,4"],
    ["average", "multi", "--system", "zshift:4", "--fn", "bogus:1"],
    ["decompose", "--system", "zshift:4", "--fn", "const:1", "--kind", "other"],
    ["--config", "/nonexistent.json", "systems", "list"],
    ["--threads", "0", "systems", "list"],
    ["recurrence", "check", "--system", "rot1:golden", "--fn", "e:1", "--k", "2"],
    ["frobnicate"],
])
def test_invalid_input_exit_code(argv):
    code, out, err = call(*argv)
    assert code == EXIT_INVALID and out == ""


def test_budget_exit_code(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"support_cap": 5}))
    code, _, err = call("--config", str(cfg), "average", "multi", "--system", "catmap", "--fn", "random:seed=1",
                        "--k", "3", "--schedule", "32")
    assert code == EXIT_BUDGET and "error" in err
    code, _, _ = call("seminorm", "compute", "--system", "zshift:64", "--fn", "pm1:seed=0", "--order", "3",
                      "--method", "cube-oracle", "--full-cycle")
    assert code == EXIT_BUDGET


def test_strict_exit_code():
    argv = ["gvn", "--system", "anzai:golden", "--fn", "e:1,0", "--fn", "e:1,0", "--schedule", "64", "--slack", "-5"]
    assert call(*argv)[0] == EXIT_OK
    assert call("--strict", *argv)[0] == EXIT_STRICT


def test_byte_determinism_across_runs_and_threads():
    argv = ["average", "multi", "--system", "anzai:golden", "--fn", "random:seed=3", "--k", "3", "--schedule",
            "256,1024,2048"]
    a = call("--threads", "1", *argv)[1]
    b = call("--threads", "8", *argv)[1]
    c = call("--threads", "8", *argv)[1]
    assert a == b == c
    assert "threads" not in a


def test_env_thread_fallback(monkeypatch):
    monkeypatch.setenv("ERGOLAB_THREADS", "3")
    from ergolab import config
    assert config.default_threads() == 3


def test_out_flag_and_config_defaults(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"system": "zshift:6", "fn": ["indicator:0,3"], "k": 2, "schedule": [6]}))
    dest = tmp_path / "r.csv"
    code, out, _ = call("--config", str(cfg), "--out", str(dest), "recurrence", "check")
    assert code == EXIT_OK and out == ""
    assert dest.read_text().strip().endswith("6,0.1111111111111111,0.1111111111111111")


def test_seed_changes_random_functions():
    base = ["seminorm", "compute", "--system", "zshift:8", "--fn", "random", "--order", "2", "--full-cycle"]
    assert call("--seed", "1", *base)[1] != call("--seed", "2", *base)[1]
    assert call("--seed", "1", *base)[1] == call("--seed", "1", *base)[1]


def test_bench_report_fields():
    code, out, _ = call("bench", "gowers", "--n", "16", "--repeat", "1")
    rep = json.loads(out)
    assert code == EXIT_OK and rep["abs_difference"] < 1e-10 and "provenance" in rep


if __name__ == "__main__":
    GOLDEN_DIR.mkdir(exist_ok=True)
    for name, argv in GOLDEN.items():
        code, out, err = call(*argv)
        if code != EXIT_OK:
            sys.exit(f"{name}: exit {code}: {err}")
        (GOLDEN_DIR / f"{name}.txt").write_text(out)
        print("wrote", name)
