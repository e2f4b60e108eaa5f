import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from gridprune import SceneSpec, generate, save_field, save_high_res
from gridprune.cli import main

from conftest import make_field


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write_scene(tmp_path, seed=1, name="scene", grid=24, embed_dim=16):
    field, mask = generate(SceneSpec(grid, grid, embed_dim, "uniform_noise", seed=seed))
    d = tmp_path / name
    save_field(field, d)
    return d, field


def tree_hash(root: Path) -> str:
    digest = hashlib.sha256()
    for path in sorted(root.rglob("*")):
        if path.is_file():
            digest.update(str(path.relative_to(root)).encode())
            digest.update(path.read_bytes())
    return digest.hexdigest()


class TestFlops:
    def test_prints_reference_value(self, capsys):
        code, out, err = run_cli(
            capsys, "flops", "--tokens", "576", "--layers", "32",
            "--hidden", "4096", "--ffn", "11008",
        )
        assert code == 0
        assert out == "3.82\n"
        assert err.startswith("config: ")

    def test_other_reference_values(self, capsys):
        for tokens, want in (("192", "1.25"), ("2880", "20.83"), ("320", "2.10")):
            code, out, _ = run_cli(
                capsys, "flops", "--tokens", tokens, "--layers", "32",
                "--hidden", "4096", "--ffn", "11008",
            )
            assert code == 0 and out == want + "\n"


class TestPrune:
    def test_writes_selection_json(self, tmp_path, capsys):
        d, field = write_scene(tmp_path)
        out = tmp_path / "sel.json"
        code, stdout, _ = run_cli(
            capsys, "prune", "--input", str(d), "--keep", "192",
            "--block-size", "2", "--alpha", "0.8", "--out", str(out),
        )
        assert code == 0
        assert "kept 192 of 576" in stdout
        doc = json.loads(out.read_text())
        assert len(doc["kept_indices"]) == 192
        assert doc["num_tokens"] == 576
        assert doc["config"] == {"k": 192, "block_size": 2, "alpha": 0.8}
        assert sum(doc["budgets"]) == 192

    def test_keep_exceeds_token_count(self, tmp_path, capsys):
        d, _ = write_scene(tmp_path, grid=4)
        code, _, err = run_cli(
            capsys, "prune", "--input", str(d), "--keep", "17",
            "--out", str(tmp_path / "x.json"),
        )
        assert code == 1
        assert "keep exceeds token count" in err

    def test_preset_flag(self, tmp_path, capsys):
        d, _ = write_scene(tmp_path)
        out = tmp_path / "sel.json"
        code, _, err = run_cli(
            capsys, "prune", "--input", str(d), "--keep", "64",
            "--preset", "llava15-11", "--out", str(out),
        )
        assert code == 0
        assert '"preset": "llava15-11"' in err

    def test_missing_input_dir_is_validation_error(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "prune", "--input", str(tmp_path / "nope"), "--keep", "4",
            "--out", str(tmp_path / "x.json"),
        )
        assert code == 1
        assert "manifest.json" in err

    def test_unreadable_output_is_io_error(self, tmp_path, capsys):
        d, _ = write_scene(tmp_path, grid=4)
        code, _, err = run_cli(
            capsys, "prune", "--input", str(d), "--keep", "4",
            "--out", str(tmp_path / "no_such_dir" / "x.json"),
        )
        assert code == 2
        assert err.strip().splitlines()[-1].startswith("io error:")


class TestUsage:
    def test_unknown_flag_one_line_diagnostic(self, capsys):
        code, _, err = run_cli(capsys, "flops", "--tokens", "1", "--bogus", "2")
        assert code == 1
        lines = [ln for ln in err.splitlines() if ln.startswith("error:")]
        assert len(lines) == 1
        assert "--bogus" in lines[0]

    def test_missing_required_flag(self, capsys):
        code, _, err = run_cli(capsys, "flops", "--tokens", "1")
        assert code == 1
        assert "--layers" in err

    def test_unknown_subcommand(self, capsys):
        code, _, err = run_cli(capsys, "shrink")
        assert code == 1
        assert "error:" in err


class TestConfigOverlay:
    def test_flags_win_over_config(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"tokens": 192, "layers": 32, "hidden": 4096, "ffn": 11008}))
        code, out, err = run_cli(
            capsys, "flops", "--config", str(cfg), "--tokens", "576",
        )
        assert code == 0
        assert out == "3.82\n"
        assert '"tokens": 576' in err

    def test_toml_config(self, tmp_path, capsys):
        cfg = tmp_path / "run.toml"
        cfg.write_text("tokens = 192\nlayers = 32\nhidden = 4096\nffn = 11008\n")
        code, out, _ = run_cli(capsys, "flops", "--config", str(cfg))
        assert code == 0
        assert out == "1.25\n"

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        cfg = tmp_path / "run.json"
        cfg.write_text(json.dumps({"tokens": 1, "layers": 1, "hidden": 1, "ffn": 1, "oops": 3}))
        code, _, err = run_cli(capsys, "flops", "--config", str(cfg))
        assert code == 1
        assert "oops" in err


class TestAllocate:
    def test_round_trips_arrays(self, tmp_path, capsys):
        zr = tmp_path / "zr.json"
        caps = tmp_path / "caps.json"
        zr.write_text(json.dumps([0.5, -0.5, 0.0, 0.25]))
        caps.write_text(json.dumps([4, 4, 4, 4]))
        code, out, _ = run_cli(
            capsys, "allocate", "--zone-rel", str(zr), "--capacities", str(caps),
            "--keep", "8",
        )
        assert code == 0
        doc = json.loads(out)
        assert sum(doc["budgets"]) == 8
        assert all(b <= 4 for b in doc["budgets"])
        assert doc["k"] == 8

    def test_overbudget_is_validation_error(self, tmp_path, capsys):
        (tmp_path / "zr.json").write_text("[0.0]")
        (tmp_path / "caps.json").write_text("[2]")
        code, _, err = run_cli(
            capsys, "allocate", "--zone-rel", str(tmp_path / "zr.json"),
            "--capacities", str(tmp_path / "caps.json"), "--keep", "3",
        )
        assert code == 1
        assert "capacity" in err


class TestSynth:
    def test_seeded_runs_are_tree_identical(self, tmp_path, capsys):
        args = ["synth", "--pattern", "centered_object", "--count", "3",
                "--seed", "42", "--grid-h", "8", "--grid-w", "8",
                "--embed-dim", "8"]
        code1, _, _ = run_cli(capsys, *args, "--out", str(tmp_path / "a"))
        code2, _, _ = run_cli(capsys, *args, "--out", str(tmp_path / "b"))
        assert code1 == code2 == 0
        assert tree_hash(tmp_path / "a") == tree_hash(tmp_path / "b")

    def test_scene_layout(self, tmp_path, capsys):
        code, _, _ = run_cli(
            capsys, "synth", "--pattern", "sink_tail", "--count", "2",
            "--seed", "7", "--grid-h", "6", "--grid-w", "6",
            "--embed-dim", "4", "--out", str(tmp_path / "c"),
        )
        assert code == 0
        scene = tmp_path / "c" / "scene_00000"
        assert (scene / "manifest.json").is_file()
        planted = json.loads((scene / "planted.json").read_text())
        assert planted["pattern"] == "sink_tail"
        assert planted["seed"] == 7
        assert (tmp_path / "c" / "scene_00001").is_dir()

    def test_rect_flag(self, tmp_path, capsys):
        code, _, _ = run_cli(
            capsys, "synth", "--pattern", "centered_object", "--count", "1",
            "--seed", "1", "--grid-h", "8", "--grid-w", "8", "--embed-dim", "4",
            "--rect", "1,1,2,3", "--out", str(tmp_path / "r"),
        )
        assert code == 0
        planted = json.loads((tmp_path / "r" / "scene_00000" / "planted.json").read_text())
        assert len(planted["planted_indices"]) == 6

    def test_bad_rect_flag(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "synth", "--pattern", "centered_object", "--count", "1",
            "--seed", "1", "--rect", "1,2", "--out", str(tmp_path / "r"),
        )
        assert code == 1
        assert "--rect" in err


class TestBias:
    def test_prune_then_bias_round_trip(self, tmp_path, capsys):
        sel_dir = tmp_path / "sels"
        sel_dir.mkdir()
        for i in range(3):
            d, _ = write_scene(tmp_path, seed=i, name=f"s{i}", grid=8, embed_dim=8)
            code, _, _ = run_cli(
                capsys, "prune", "--input", str(d), "--keep", "16",
                "--out", str(sel_dir / f"sel_{i}.json"),
            )
            assert code == 0
        out = tmp_path / "bias.json"
        tsv = tmp_path / "bias.tsv"
        code, stdout, _ = run_cli(
            capsys, "bias", "--selections", str(sel_dir / "*.json"),
            "--tokens", "64", "--out", str(out), "--tsv", str(tsv),
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["sample_count"] == 3
        assert doc["total_kept"] == 48
        assert sum(doc["histogram"]) == 48
        assert len(tsv.read_text().strip().split("\n")) == 64
        assert "aggregated 3 selections" in stdout

    def test_mixed_tokens_rejected(self, tmp_path, capsys):
        d, _ = write_scene(tmp_path, grid=8, embed_dim=8)
        sel = tmp_path / "sel.json"
        code, _, _ = run_cli(
            capsys, "prune", "--input", str(d), "--keep", "4", "--out", str(sel)
        )
        assert code == 0
        code, _, err = run_cli(
            capsys, "bias", "--selections", str(sel), "--tokens", "576",
            "--out", str(tmp_path / "b.json"),
        )
        assert code == 1
        assert "num_tokens" in err

    def test_no_matches_is_error(self, tmp_path, capsys):
        code, _, err = run_cli(
            capsys, "bias", "--selections", str(tmp_path / "*.json"),
            "--tokens", "4", "--out", str(tmp_path / "b.json"),
        )
        assert code == 1
        assert "no selection files" in err


class TestPruneHighRes:
    def test_end_to_end(self, tmp_path, capsys):
        rng = np.random.Generator(np.random.PCG64(8))
        text = rng.standard_normal(8).astype(np.float32)
        from dataclasses import replace

        fields = [
            replace(make_field(rng, grid_h=4, grid_w=4, embed_dim=8), text_embedding=text)
            for _ in range(3)
        ]
        save_high_res(fields, ["t0", "t1", "g"], tmp_path / "hr")
        out = tmp_path / "hr.json"
        code, stdout, _ = run_cli(
            capsys, "prune-hr", "--input", str(tmp_path / "hr"), "--keep", "4",
            "--block-size", "2", "--alpha", "0.5", "--out", str(out),
        )
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["total_kept"] == 12
        assert [s["sub_image"] for s in doc["sub_images"]] == ["t0", "t1", "g"]
        assert "kept 12 tokens over 3 sub-images" in stdout

    def test_keep_exceeds_smallest_sub_image(self, tmp_path, capsys):
        rng = np.random.Generator(np.random.PCG64(9))
        text = rng.standard_normal(4).astype(np.float32)
        from dataclasses import replace

        fields = [
            replace(make_field(rng, grid_h=2, grid_w=2, embed_dim=4), text_embedding=text)
        ]
        save_high_res(fields, ["only"], tmp_path / "hr")
        code, _, err = run_cli(
            capsys, "prune-hr", "--input", str(tmp_path / "hr"), "--keep", "5",
            "--out", str(tmp_path / "o.json"),
        )
        assert code == 1
        assert "keep exceeds token count" in err


class TestCompare:
    def test_markdown_table(self, tmp_path, capsys):
        code, _, _ = run_cli(
            capsys, "synth", "--pattern", "sink_tail", "--count", "4",
            "--seed", "3", "--grid-h", "8", "--grid-w", "8", "--embed-dim", "8",
            "--out", str(tmp_path / "corpus"),
        )
        assert code == 0
        out = tmp_path / "cmp.json"
        code, stdout, _ = run_cli(
            capsys, "compare", "--methods", "gridprune,global_topk,tail_k",
            "--corpus", str(tmp_path / "corpus"), "--keep", "16",
            "--alpha", "1.0", "--out", str(out),
        )
        assert code == 0
        assert stdout.startswith("| method |")
        assert "tail_k" in stdout
        doc = json.loads(out.read_text())
        assert [m["name"] for m in doc["methods"]] == ["gridprune", "global_topk", "tail_k"]

    def test_unknown_method(self, tmp_path, capsys):
        code, _, _ = run_cli(
            capsys, "synth", "--pattern", "uniform_noise", "--count", "1",
            "--seed", "1", "--grid-h", "4", "--grid-w", "4", "--embed-dim", "4",
            "--out", str(tmp_path / "corpus"),
        )
        assert code == 0
        code, _, err = run_cli(
            capsys, "compare", "--methods", "magic", "--corpus",
            str(tmp_path / "corpus"), "--keep", "4",
        )
        assert code == 1
        assert "magic" in err


def test_console_entry_point_subprocess(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "gridprune", "flops", "--tokens", "576",
         "--layers", "32", "--hidden", "4096", "--ffn", "11008"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout == "3.82\n"


def test_threads_env_does_not_change_output(tmp_path, capsys, monkeypatch):
    args = ["synth", "--pattern", "multi_object", "--count", "4", "--seed", "5",
            "--grid-h", "8", "--grid-w", "8", "--embed-dim", "8"]
    monkeypatch.setenv("GRIDPRUNE_THREADS", "1")
    assert run_cli(capsys, *args, "--out", str(tmp_path / "one"))[0] == 0
    monkeypatch.setenv("GRIDPRUNE_THREADS", "4")
    assert run_cli(capsys, *args, "--out", str(tmp_path / "four"))[0] == 0
    assert tree_hash(tmp_path / "one") == tree_hash(tmp_path / "four")
