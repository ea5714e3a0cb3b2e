import json
import subprocess
import sys

import numpy as np
import pytest

from ezgreedy.cli import build_options, main

SMALL = {
    "run": ("deep_sea", {"episodes": 20, "trials": 3, "eval_every": 5}),
    "sweep": ("chain_zeta", {"trials": 2, "values": [1.5, 2, 6]}),
    "first-visit": ("grid_world", {"trials": 4, "steps": 300}),
    "cover-time": ("open_grid", {"trials": 3, "budget": 20000, "env": {"kind": "open_grid", "width": 5, "height": 5}}),
    "coverage": ("chain_multiples", {}),
}


def invoke(tmp_path, command, name, workers=1, extra=()):
    preset, cfg = SMALL[command]
    path = tmp_path / f"{command}.json"
    path.write_text(json.dumps(cfg))
    out = tmp_path / name
    code = main([command, "--preset", preset, "--config", str(path), "--out", str(out),
                 "--workers", str(workers), *extra])
    return code, out


def snapshot(out):
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())}


class TestCommands:
    def test_run_outputs(self, tmp_path):
        code, out = invoke(tmp_path, "run", "r")
        assert code == 0
        assert {"learning_curves.csv", "resolved_config.json", "summary.json"} <= set(snapshot(out))
        rows = (out / "learning_curves.csv").read_text().splitlines()
        assert len(rows) == 1 + 3 * 20

    def test_sweep_rows(self, tmp_path):
        code, out = invoke(tmp_path, "sweep", "s")
        assert code == 0
        assert len((out / "sweep.csv").read_text().splitlines()) == 4

    def test_first_visit_grid_world(self, tmp_path):
        code, out = invoke(tmp_path, "first-visit", "f")
        assert code == 0
        for policy in ("eps_greedy", "ez_greedy"):
            lines = (out / f"first_visit_{policy}.csv").read_text().splitlines()
            assert len(lines) == 24 and len(lines[1].split(",")) == 23
            assert (out / f"first_visit_{policy}.pgm").read_bytes().startswith(b"P5\n23 23\n255\n")
            assert json.loads((out / f"first_visit_{policy}.json").read_text())["trials"] == 4

    def test_coverage_counterexample(self, tmp_path):
        code, out = invoke(tmp_path, "coverage", "c")
        assert code == 0
        doc = json.loads((out / "coverage.json").read_text())
        assert doc["unreachable"] and not doc["full_coverage"]

    def test_cover_time_reports(self, tmp_path):
        code, out = invoke(tmp_path, "cover-time", "t")
        assert code == 0
        doc = json.loads((out / "cover_time.json").read_text())
        assert set(doc) == {"eps_greedy", "ez_greedy"}
        assert all(len(d["times"]) == 3 for d in doc.values())

    @pytest.mark.parametrize("command", sorted(SMALL))
    def test_reproducible_across_workers(self, tmp_path, command):
        snaps = []
        for i, w in enumerate((1, 1, 8)):
            code, out = invoke(tmp_path, command, f"{command}-{i}", workers=w)
            assert code == 0
            snaps.append(snapshot(out))
        assert snaps[0] == snaps[1] == snaps[2]

    def test_seed_flag_changes_output(self, tmp_path):
        _, a = invoke(tmp_path, "run", "a")
        _, b = invoke(tmp_path, "run", "b", extra=("--seed", "7"))
        assert (a / "learning_curves.csv").read_bytes() != (b / "learning_curves.csv").read_bytes()
        assert json.loads((b / "resolved_config.json").read_text())["seed"] == 7


class TestErrors:
    def test_invalid_config(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps({"episodes": -1}))
        assert main(["run", "--preset", "grid_world", "--config", str(p), "--out", str(tmp_path)]) == 2
        assert "episodes" in capsys.readouterr().err

    def test_missing_config(self, tmp_path, capsys):
        assert main(["run", "--config", str(tmp_path / "nope.json")]) == 2
        assert "cannot read config" in capsys.readouterr().err

    def test_needs_preset_or_config(self, capsys):
        assert main(["run"]) == 2

    @pytest.mark.parametrize("command", ["first-visit", "cover-time", "coverage", "sweep", "run"])
    def test_unknown_preset(self, command, tmp_path):
        assert main([command, "--preset", "nope", "--out", str(tmp_path)]) == 2

    def test_bad_workers(self):
        assert main(["run", "--preset", "chain", "--workers", "0"]) == 2

    def test_divergence_exit(self, tmp_path, capsys):
        p = tmp_path / "div.json"
        p.write_text(json.dumps({"learner": {"alpha": 1e300}, "episodes": 3, "env": {"max_episode_steps": 50}}))
        with np.errstate(all="ignore"):
            code = main(["run", "--preset", "cartpole", "--config", str(p), "--out", str(tmp_path)])
        assert code == 1 and "diverged" in capsys.readouterr().err

    def test_console_script(self, tmp_path):
        r = subprocess.run([sys.executable, "-m", "ezgreedy.cli", "coverage", "--preset", "grid_world_primitive",
                            "--out", str(tmp_path)], capture_output=True, text=True)
        assert r.returncode == 0, r.stderr
        assert json.loads((tmp_path / "coverage.json").read_text())["full_coverage"] is True


def test_build_options():
    assert len(build_options({"kind": "primitive"}, 3)) == 3
    assert {o.length for o in build_options({"kind": "fixed_length", "length": 4}, 2)} == {4}
    assert len(build_options({"kind": "repeat", "distribution": {"kind": "uniform", "N": 3, "cap": 5}}, 2)) == 6
    assert build_options([{"action": 1, "beta": 0.5}], 2)[0].beta == 0.5
