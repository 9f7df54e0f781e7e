import csv
import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noiseaware.imagecore import radial_gradient, read_pgm, write_pgm
from noiseaware.noisegen import NoiseKind
from noiseaware.pipeline import commands
from noiseaware.pipeline.cli import main
from noiseaware.pipeline.config import ConfigError, PipelineConfig, parse_config
from noiseaware.pipeline.corpus import (
    IntegrityError,
    Manifest,
    assign_splits,
    derive_seed,
    largest_remainder,
    noisy_castings,
)

TINY = """
[run]
seed = 7
detector = rule
[corpus]
n_images = 30
[denoiser]
n_pairs = 12
epochs = 1
enc_channels = 4, 8, 8
[noiseclf]
n_images = 30
epochs = 1
conv_channels = 4, 8, 8
[defectclf]
epochs = 2
conv_channels = 4, 8, 8
[lift]
seeds = 1, 2
n_images = 12
"""


def tiny_config(out, **kw) -> PipelineConfig:
    return parse_config(TINY).with_overrides(out=str(out), **kw)


def tree_bytes(root: Path) -> dict:
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def test_largest_remainder_examples():
    assert largest_remainder(1233, (0.7, 0.15, 0.15)) == [863, 185, 185]
    assert largest_remainder(1250, (0.6, 0.2, 0.2)) == [750, 250, 250]
    assert largest_remainder(588, (0.85, 0.15)) == [500, 88]
    assert largest_remainder(3, (1 / 3, 1 / 3, 1 / 3)) == [1, 1, 1]


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 5000), st.lists(st.integers(0, 20), min_size=1, max_size=5).filter(any))
def test_largest_remainder_properties(n, weights):
    ratios = [w / sum(weights) for w in weights]
    counts = largest_remainder(n, ratios)
    assert sum(counts) == n
    for c, r in zip(counts, ratios):
        assert abs(c - n * r) < 1.0


def test_assign_splits_disjoint_and_seeded():
    a = assign_splits(100, (0.7, 0.15, 0.15), 3)
    assert [a.count(s) for s in ("train", "val", "test")] == [70, 15, 15]
    assert a == assign_splits(100, (0.7, 0.15, 0.15), 3)
    assert a != assign_splits(100, (0.7, 0.15, 0.15), 4)


def test_derive_seed():
    assert derive_seed(1, "a") == derive_seed(1, "a")
    assert len({derive_seed(1, "a"), derive_seed(1, "b"), derive_seed(2, "a"), derive_seed(1, "a", 0)}) == 4


def test_config_roundtrip_and_overrides():
    cfg = PipelineConfig()
    assert parse_config(cfg.to_ini()) == cfg
    assert parse_config("") == cfg
    cfg2 = parse_config(TINY)
    assert cfg2.n_images == 30 and cfg2.denoiser.enc_channels == (4, 8, 8)
    assert cfg2.with_overrides(seed=9, method=None).seed == 9
    assert cfg.digest() == cfg.with_overrides(out="elsewhere").digest()
    assert cfg.digest() != cfg.with_overrides(seed=1).digest()


@pytest.mark.parametrize(
    "text",
    [
        "[corpus]\nsplit = 0.7, 0.2, 0.2\n",
        "[denoiser]\nsplit = 0.8, 0.1\n",
        "[run]\nkernel = 4\n",
        "[run]\ndetector = magic\n",
        "[run]\nbogus = 1\n",
        "[nonsense]\nx = 1\n",
        "[corpus]\nn_images = many\n",
        "[denoiser]\nenc_channels = 4, 8, 8, 8, 8, 8, 8\n",
    ],
)
def test_config_errors(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_noisy_castings_balanced():
    cfg = parse_config(TINY)
    samples = noisy_castings(cfg, 30, 5)
    kinds = [s.kind for s in samples]
    assert all(kinds.count(k) == 10 for k in NoiseKind)
    for s in samples:
        assert s.noisy.shape == s.clean.shape == (64, 64)
        assert np.array_equal(np.round(s.noisy * 255), s.noisy * 255)
        if s.kind is NoiseKind.PERIODIC:
            assert np.hypot(s.params.freq_u, s.params.freq_v) >= cfg.detect.exclusion_radius


def test_synth_contract_and_determinism(tmp_path):
    m = commands.cmd_synth(tiny_config(tmp_path / "a"))
    commands.cmd_synth(tiny_config(tmp_path / "b"))
    assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")
    back = Manifest.read(m.root)
    assert back.entries == m.entries and back.seed == 7
    assert len(m.entries) == 60
    paths = [e.path for e in m.entries]
    assert len(set(paths)) == len(paths)
    for e in m.entries:
        img = back.load(e)
        if e.clean_path:
            assert back.load(e, clean=True).shape == img.shape
            clean_entry = next(c for c in m.entries if c.path == e.clean_path)
            assert clean_entry.split == e.split and clean_entry.defect_label == e.defect_label
    clean = m.select(noisy=False)
    counts = [len([e for e in clean if e.split == s]) for s in ("train", "val", "test")]
    assert counts == largest_remainder(30, (0.7, 0.15, 0.15))


def test_integrity_check(tmp_path):
    cfg = tiny_config(tmp_path)
    m = commands.cmd_synth(cfg)
    victim = m.select("test", noisy=True)[0]
    write_pgm(m.root / victim.clean_path, np.zeros((64, 64)))
    with pytest.raises(IntegrityError):
        commands.cmd_run(cfg)
    assert main(["run", "--config", _ini(tmp_path, cfg)]) == 2


def _ini(tmp_path, cfg) -> str:
    path = tmp_path / "cfg.ini"
    path.write_text(cfg.to_ini())
    return str(path)


def test_salt_pepper_only_routes_to_median(tmp_path):
    cfg = tiny_config(tmp_path).with_overrides(kinds=(NoiseKind.SALT_PEPPER,))
    commands.cmd_synth(cfg)
    summary = commands.cmd_run(cfg)
    with open(tmp_path / "run" / "per_image.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and {r["route"] for r in rows} == {"median"}
    assert summary["detection_accuracy"] == 1.0
    assert all(float(r["ssim_denoised"]) > float(r["ssim_noisy"]) for r in rows)


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipe")
    cfg = tiny_config(root)
    commands.cmd_synth(cfg)
    for kind in commands.AE_KINDS:
        commands.cmd_train_denoiser(cfg, kind)
    commands.cmd_train_noiseclf(cfg)
    commands.cmd_train_defectclf(cfg)
    return cfg


def test_run_outputs(trained):
    summary = commands.cmd_run(trained)
    out = trained.out_dir / "run"
    rows = list(csv.DictReader(open(out / "per_image.csv")))
    assert len(rows) == summary["images"]
    assert [int(r["index"]) for r in rows] == sorted(int(r["index"]) for r in rows)
    for r in rows:
        expected = {"salt_pepper": "median", "gaussian": "denoiser_gaussian", "periodic": "denoiser_periodic"}
        assert r["route"] == expected[r["detected_kind"]]
        assert read_pgm(out / "denoised" / Path(r["path"]).name).shape == (64, 64)
    assert "Avg SSIM for" in (out / "report.txt").read_text()
    learned = commands.cmd_run(trained.with_overrides(detector="learned"))
    assert learned["detector"] == "learned"


def test_lift_identity_control(trained):
    cfg = trained.with_overrides(method="identity", out=str(trained.out_dir / "ident"), models=str(trained.models_dir))
    summary = commands.cmd_lift(cfg)
    assert all(row["delta"] == 0.0 for row in summary["seeds"])
    assert summary["mean_delta"] == 0.0
    report = json.loads((cfg.out_dir / "lift" / "seed_1" / "after.json").read_text())
    for key in ("precision", "recall", "f1", "support", "sensitivity", "specificity", "accuracy", "confusion"):
        assert key in report
    roc = list(csv.DictReader(open(cfg.out_dir / "lift" / "seed_1" / "roc.csv")))
    assert {r["stage"] for r in roc} == {"before", "after"}


def test_report_collects(trained):
    commands.cmd_run(trained)
    text = commands.cmd_report(trained)
    assert "Test Accuracy" in text and "Avg SSIM" in text


def test_cli_single_image_commands(tmp_path, capsys):
    src, noisy, out = tmp_path / "a.pgm", tmp_path / "n.pgm", tmp_path / "d.pgm"
    write_pgm(src, radial_gradient(64, 64))
    assert main(["addnoise", str(src), str(noisy), "--kind", "salt_pepper", "--density", "0.1", "--seed", "3"]) == 0
    assert main(["detect", str(noisy), "--detector", "rule"]) == 0
    assert capsys.readouterr().out.strip().endswith("salt_pepper")
    assert main(["denoise", str(noisy), str(out), "--detector", "rule", "--kernel", "3"]) == 0
    assert "median" in capsys.readouterr().out
    assert read_pgm(out).shape == (64, 64)
    assert main(["addnoise", str(src), str(noisy), "--kind", "purple"]) == 1
    assert main(["detect", str(tmp_path / "missing.pgm"), "--detector", "rule"]) == 2
    assert main(["denoise", str(noisy), str(out), "--detector", "learned", "--out", str(tmp_path)]) == 2


def test_cli_exit_codes(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[corpus]\nsplit = 0.5, 0.5, 0.5\n")
    assert main(["synth", "--config", str(bad)]) == 1
    assert main(["synth", "--config", str(tmp_path / "nope.ini")]) == 2
    assert main(["run", "--out", str(tmp_path / "empty")]) == 2
    assert main(["synth", "--kernel", "2", "--out", str(tmp_path)]) == 1


def test_cli_lift_gate(trained, tmp_path):
    ini = _ini(tmp_path, trained.with_overrides(models=str(trained.models_dir), out=str(tmp_path / "o")))
    assert main(["lift", "--config", ini, "--method", "identity"]) == 0
