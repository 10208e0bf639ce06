import csv
import json
import subprocess
import sys

import pytest

from fraclab.cli import main
from fraclab.config import SCHEMA, default_experiments, load_config, parse_config
from fraclab.errors import ConfigError
from fraclab.grid import BallLadder, GridSpec

SMALL = """
# small geometry so the report runs in seconds
[grid]
dim = 2
N = 32
margin = 12

[ladder]
r_min = 0.0625
ratio = 1.4
count = 2
stride = 2

[run]
resolutions = 32, 64

[experiment.inclusion]
kind = inclusion
p = 2
gamma = -0.5

[experiment.hls]
kind = hls
alpha = 0.5
p = 1.5
route = riesz
"""


class TestParse:
    def test_empty_is_defaults(self):
        cfg = parse_config("")
        assert cfg.grid == GridSpec(2, 1.0, 64, 24)
        assert cfg.ladder == BallLadder(0.046875, 2.0, 2, 2)
        assert cfg.quad is None and cfg.kernel == "heat" and cfg.seed == 0
        assert cfg.resolutions == (64, 128)
        assert cfg.task == {k: v for k, (_, v) in SCHEMA["task"].items()}
        assert [e.name for e in cfg.experiments] == [e.name for e in default_experiments(2)]

    def test_sections_and_dotted_keys_agree(self):
        a = parse_config("[grid]\nN = 128\nmargin = 48\n[run]\nseed = 7\n")
        b = parse_config("grid.N = 128\ngrid.margin = 48\nrun.seed = 7\n")
        assert a == b

    def test_bad_N(self):
        with pytest.raises(ConfigError, match="N must be a power of two") as info:
            parse_config("# header\n[grid]\nN = 100\n")
        assert info.value.key == "grid.N" and info.value.line == 3

    def test_index_window_delegated(self):
        text = "[experiment.c]\nkind = commutator\nalpha = 0.5\np1 = 4\nbeta1 = -0.25\np2 = 2\nbeta2 = -0.4\n"
        with pytest.raises(ConfigError, match="β₂ < −α violated") as info:
            parse_config(text)
        assert info.value.key == "experiment.c.beta2" and info.value.line == 7

    @pytest.mark.parametrize(
        "text, key, line",
        [
            ("[grid]\ncolour = 3\n", "grid.colour", 2),
            ("[grid]\nN = sixty\n", "grid.N", 2),
            ("[grid]\nN = 64\nN = 128\n", "grid.N", 3),
            ("[run]\nresolutions = 64, 96\n", "run.resolutions", 2),
            ("[kernel]\nname = cauchy\n", "kernel.name", 2),
            ("[quad]\ns_min = -20\n", "quad.s_max", 2),
            ("[experiment.x]\nkind = sweep\n", "experiment.x.kind", 2),
        ],
    )
    def test_first_error_key_and_line(self, text, key, line):
        with pytest.raises(ConfigError) as info:
            parse_config(text)
        assert (info.value.key, info.value.line) == (key, line)

    def test_unknown_section(self):
        with pytest.raises(ConfigError, match="unknown section"):
            parse_config("[plots]\nx = 1\n")

    def test_overrides(self, tmp_path):
        path = tmp_path / "c.ini"
        path.write_text("[grid]\nN = 64\n", encoding="utf-8")
        cfg = load_config(str(path), ["grid.N=128", "grid.margin=48"])
        assert cfg.grid.N == 128 and cfg.grid.margin == 48
        with pytest.raises(ConfigError, match="override"):
            parse_config("", ["N=128"])


def run_cli(args, tmp_path, monkeypatch):
    monkeypatch.setenv("FRACLAB_OUTPUT_DIR", str(tmp_path))
    return main(args)


class TestCli:
    def test_evolve_margin_error(self, tmp_path, monkeypatch, capsys):
        code = run_cli(["evolve", "-s", "task.t=0.1"], tmp_path, monkeypatch)
        assert code == 2
        assert "margin too small for this t" in capsys.readouterr().err

    def test_evolve_writes_grid_csv(self, tmp_path, monkeypatch):
        assert run_cli(["evolve", "-s", "grid.N=32", "-s", "grid.margin=12", "-s", "ladder.r_min=0.0625",
                        "-s", "task.t=0.002"],
                       tmp_path, monkeypatch) == 0
        assert (tmp_path / "evolve" / "evolve-32.csv").exists()

    @pytest.mark.parametrize("sub", ["fracint", "commutator"])
    def test_operators(self, sub, tmp_path, monkeypatch):
        args = [sub, "-s", "grid.N=32", "-s", "grid.margin=12", "-s", "ladder.r_min=0.0625",
                "-s", "ladder.ratio=1.4", "-s", "task.route=riesz"]
        assert run_cli(args, tmp_path, monkeypatch) == 0
        assert (tmp_path / sub / f"{sub}-32.csv").exists()

    def test_norm_json(self, tmp_path, monkeypatch):
        args = ["norm", "-s", "grid.N=32", "-s", "grid.margin=12", "-s", "ladder.r_min=0.0625",
                "-s", "ladder.ratio=1.4"]
        assert run_cli(args, tmp_path, monkeypatch) == 0
        d = json.loads((tmp_path / "norm" / "norm-32.json").read_text())
        assert d["norm"] == "campanato_L" and d["value"] > 0

    def test_kernel_profile(self, tmp_path, monkeypatch):
        assert run_cli(["kernel-profile"], tmp_path, monkeypatch) == 0
        with open(tmp_path / "kernel-profile" / "kernel-profile-64.csv") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["r", "riesz", "k_alpha", "ratio"]
        assert len(rows) == 49
        assert all(abs(float(r[3]) - 1) < 1e-8 for r in rows[1:])

    def test_unknown_member(self, tmp_path, monkeypatch, capsys):
        assert run_cli(["fracint", "-s", "task.f=nope"], tmp_path, monkeypatch) == 2
        assert "unknown corpus member" in capsys.readouterr().err

    def test_verify(self, tmp_path, monkeypatch, capsys):
        assert run_cli(["verify"], tmp_path, monkeypatch) == 0
        d = json.loads((tmp_path / "verify" / "summary.json").read_text())
        assert d["suite"] == "verify"
        assert all(c["pass"] for c in d["checks"])
        assert set(d["checks"][0]) == {"name", "pass", "observed", "budget"}
        assert "FAIL" not in capsys.readouterr().out

    def test_report_deterministic(self, tmp_path, monkeypatch):
        cfg = tmp_path / "small.ini"
        cfg.write_text(SMALL, encoding="utf-8")
        outs = []
        for k in range(2):
            d = tmp_path / f"run{k}"
            assert main(["report", "-c", str(cfg), "-o", str(d)]) in (0, 1)
            outs.append({p.name: p.read_bytes() for p in sorted((d / "report").iterdir())})
        assert outs[0] == outs[1]
        assert set(outs[0]) == {"inclusion-32.csv", "inclusion-64.csv", "hls-32.csv", "hls-64.csv", "summary.json"}
        summary = json.loads(outs[0]["summary.json"])
        assert summary["suite"] == "report"
        assert [c["name"] for c in summary["checks"]] == ["inclusion", "hls"]

    def test_output_precedence(self, tmp_path, monkeypatch):
        monkeypatch.setenv("FRACLAB_OUTPUT_DIR", str(tmp_path / "env"))
        main(["kernel-profile", "-o", str(tmp_path / "flag")])
        assert (tmp_path / "flag" / "kernel-profile").is_dir()
        assert not (tmp_path / "env").exists()

    def test_module_entry_point(self, tmp_path):
        proc = subprocess.run(
            [sys.executable, "-m", "fraclab", "evolve", "-s", "grid.N=100", "-o", str(tmp_path)],
            capture_output=True, text=True,
        )
        assert proc.returncode == 2
        assert proc.stderr.startswith("error: key 'grid.N'")
