"""CLI behaviour: output text, exit codes, and byte-level reproducibility.

Every command runs through ``main()`` against the in-process service,
exactly as a user without --server gets it.
"""

import numpy as np
import pytest
from PIL import Image as PILImage

from dahaze.cli import main

from conftest import read_dir_bytes, write_corpus


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_pair_prints_seed_and_summary(corpus, tmp_path, capsys):
    clear_dir, depth_dir = corpus
    out = tmp_path / "manifest.tsv"
    code, stdout, _ = run(
        capsys, "pair", "--clear", str(clear_dir), "--depth", str(depth_dir),
        "-o", str(out), "--n", "2", "--seed", "0x2A", "--test-count", "2",
    )
    assert code == 0
    lines = stdout.splitlines()
    assert lines[0] == "# seed=42"  # hex seed echoed in decimal
    assert lines[1] == f"manifest written: {out}"
    assert lines[2].startswith(
        "corpus_size=6 n=2 records=10 train=8 test=2 fixed_points="
    )
    assert out.exists()


def test_pair_is_byte_deterministic(corpus, tmp_path, capsys):
    clear_dir, depth_dir = corpus
    outs = []
    for name in ("one.tsv", "two.tsv"):
        out = tmp_path / name
        code, _, _ = run(
            capsys, "pair", "--clear", str(clear_dir), "--depth", str(depth_dir),
            "-o", str(out), "--n", "3", "--seed", "77", "--strict",
        )
        assert code == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_pair_strict_eliminates_fixed_points(corpus, tmp_path, capsys):
    clear_dir, depth_dir = corpus
    code, stdout, _ = run(
        capsys, "pair", "--clear", str(clear_dir), "--depth", str(depth_dir),
        "-o", str(tmp_path / "m.tsv"), "--strict", "--seed", "5",
    )
    assert code == 0
    assert "fixed_points=0" in stdout


def test_pair_usage_error_exits_2(corpus, tmp_path, capsys):
    clear_dir, depth_dir = corpus
    code, _, stderr = run(
        capsys, "pair", "--clear", str(clear_dir), "--depth", str(depth_dir),
        "-o", str(tmp_path / "m.tsv"), "--n", "0",
    )
    assert code == 2
    assert "error (usage):" in stderr


def test_pair_missing_dir_exits_3(tmp_path, capsys):
    code, _, stderr = run(
        capsys, "pair", "--clear", str(tmp_path / "missing"),
        "--depth", str(tmp_path / "missing"), "-o", str(tmp_path / "m.tsv"),
    )
    assert code == 3
    assert "error (io):" in stderr


def test_pair_duplicate_stems_exit_4(tmp_path, capsys):
    clear_dir = tmp_path / "clear"
    depth_dir = tmp_path / "depth"
    clear_dir.mkdir()
    depth_dir.mkdir()
    img = PILImage.fromarray(np.zeros((4, 4, 3), dtype=np.uint8), mode="RGB")
    img.save(clear_dir / "a.png")
    img.save(clear_dir / "a.PNG", format="PNG")
    img.save(depth_dir / "a.png")
    img.save(depth_dir / "b.png")
    code, _, stderr = run(
        capsys, "pair", "--clear", str(clear_dir), "--depth", str(depth_dir),
        "-o", str(tmp_path / "m.tsv"),
    )
    assert code == 4
    assert "error (invariant):" in stderr


def test_missing_required_argument_exits_2(capsys):
    code = main(["pair", "--clear", "somewhere"])
    capsys.readouterr()
    assert code == 2


def test_version_flag(capsys):
    code = main(["--version"])
    out = capsys.readouterr().out
    assert code == 0
    assert out.startswith("dahaze ")


def test_synthesize_missing_manifest_exits_3(tmp_path, capsys):
    code, _, stderr = run(
        capsys, "synthesize", "--manifest", str(tmp_path / "no.tsv"),
        "-o", str(tmp_path / "out"),
    )
    assert code == 3
    assert "error (io):" in stderr


def test_synthesize_reruns_are_byte_identical(corpus, tmp_path, capsys):
    clear_dir, depth_dir = corpus
    manifest = tmp_path / "manifest.tsv"
    code, _, _ = run(
        capsys, "pair", "--clear", str(clear_dir), "--depth", str(depth_dir),
        "-o", str(manifest), "--seed", "13", "--n", "2",
    )
    assert code == 0

    runs = []
    for out_name, workers in (("out1", "1"), ("out2", "4")):
        out_dir = tmp_path / out_name
        code, stdout, _ = run(
            capsys, "synthesize", "--manifest", str(manifest),
            "-o", str(out_dir), "--workers", workers,
        )
        assert code == 0
        assert "synthesized=12 failures=0" in stdout
        runs.append(read_dir_bytes(out_dir))
    assert runs[0] == runs[1]
    assert len(runs[0]) == 12


def test_synthesize_aligned_without_catalogs_exits_2(tmp_path, capsys):
    code, _, stderr = run(
        capsys, "synthesize", "--aligned", "-o", str(tmp_path / "out"),
    )
    assert code == 2
    assert "error (usage):" in stderr


def _write_flat_png(path, offset_count, delta, size=64):
    """A constant 128 image with `delta` added to the first samples."""
    arr = np.full(size * size * 3, 128, dtype=np.uint8)
    arr[:offset_count] += delta
    PILImage.fromarray(arr.reshape(size, size, 3), mode="RGB").save(path)


def test_evaluate_report_matches_reference_discrepancy(tmp_path, capsys):
    gt_dir = tmp_path / "gt"
    a_dir = tmp_path / "method_a"
    b_dir = tmp_path / "method_b"
    for d in (gt_dir, a_dir, b_dir):
        d.mkdir()
    _write_flat_png(gt_dir / "x.png", 0, 0)
    # error energy planted to land on two published set means
    _write_flat_png(a_dir / "x.png", 11332, 3)
    _write_flat_png(b_dir / "x.png", 11810, 6)

    code, stdout, _ = run(
        capsys, "evaluate",
        "--set", str(a_dir), str(gt_dir),
        "--set", str(b_dir), str(gt_dir),
    )
    assert code == 0
    lines = stdout.splitlines()
    assert len(lines) == 3
    fields_a = dict(kv.split("=") for kv in lines[0].split("\t")[1:])
    fields_b = dict(kv.split("=") for kv in lines[1].split("\t")[1:])
    assert lines[0].startswith("method_a\t")
    assert lines[1].startswith("method_b\t")
    assert float(fields_a["psnr"]) == pytest.approx(38.94, abs=0.01)
    assert float(fields_b["psnr"]) == pytest.approx(32.74, abs=0.01)
    assert fields_a["count"] == "1" and fields_b["count"] == "1"
    assert lines[2].startswith("discrepancy=")
    assert float(lines[2].split("=")[1]) == pytest.approx(9.61, abs=0.01)


def test_evaluate_identical_dirs_report(corpus, capsys):
    clear_dir, _ = corpus
    code, stdout, _ = run(
        capsys, "evaluate", "--set", str(clear_dir), str(clear_dir),
    )
    assert code == 0
    lines = stdout.splitlines()
    assert len(lines) == 1  # no discrepancy line for a single set
    assert "psnr=inf" in lines[0]
    assert "ssim=1.0" in lines[0]
    assert "count=6" in lines[0]


def test_evaluate_without_matches_exits_3(tmp_path, capsys):
    a = tmp_path / "a"
    b = tmp_path / "b"
    a.mkdir()
    b.mkdir()
    code, _, stderr = run(capsys, "evaluate", "--set", str(a), str(b))
    assert code == 3
    assert "error (io):" in stderr


def test_fusion_bench_report(capsys):
    code, first, _ = run(capsys, "fusion-bench", "--seed", "7", "--steps", "5")
    assert code == 0
    code, second, _ = run(capsys, "fusion-bench", "--seed", "7", "--steps", "5")
    assert code == 0
    assert first == second

    lines = first.splitlines()
    assert lines[0] == "# seed=7"
    assert lines[1] == "fusion\tparams\tflops\tgrad_check_max_rel_err\tfinal_demo_loss"
    rows = {line.split("\t")[0]: line.split("\t") for line in lines[2:]}
    assert set(rows) == {"add", "concat", "csc"}
    params = {name: int(r[1]) for name, r in rows.items()}
    assert params["add"] < params["csc"] < params["concat"]
    assert all(float(r[3]) <= 1e-4 for r in rows.values())
    assert all(float(r[4]) > 0 for r in rows.values())


def test_diff_identical_dirs_writes_black(corpus, tmp_path, capsys):
    clear_dir, _ = corpus
    out = tmp_path / "diffs"
    code, stdout, _ = run(
        capsys, "diff", "--a", str(clear_dir), "--b", str(clear_dir),
        "-o", str(out),
    )
    assert code == 0
    assert stdout.strip() == f"diffs written: 6 -> {out}"
    for png in out.glob("*.png"):
        assert np.all(np.asarray(PILImage.open(png)) == 0)
