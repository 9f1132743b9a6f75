"""End-to-end CLI contracts on synthetic data."""

import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from tsgan import data_io, synthetic
from tsgan.cli import main
from tsgan.containers import PathBundle
from tsgan.data_io import PriceSeries

TRAIN_FLAGS = [
    "--window", "16", "--rfs", "9", "--hidden", "8", "--attn-layers", "2",
    "--heads", "2", "--attn-size", "8", "--mlp-hidden", "8",
    "--iters", "2", "--batch", "4", "--critic-steps", "1",
]


@pytest.fixture(scope="module")
def price_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "prices.csv"
    returns = synthetic.garch_returns(600, seed=1)
    prices = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(returns)]))
    data_io.save_price_csv(path, PriceSeries(
        dates=[f"{i:06d}" for i in range(len(prices))], prices=prices))
    return path


@pytest.fixture(scope="module")
def surface_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "surfaces.csv"
    data_io.save_surface_csv(path, synthetic.synthetic_surface_grid(220, seed=2))
    return path


def test_bad_path_exits_2(tmp_path):
    code = main(["train", "--data", str(tmp_path / "missing.csv"),
                 "--out", str(tmp_path / "out")] + TRAIN_FLAGS)
    assert code == 2


def test_train_generate_evaluate_cycle(tmp_path, price_csv):
    run = tmp_path / "run"
    assert main(["train", "--data", str(price_csv), "--mode", "index",
                 "--out", str(run), "--seed", "3"] + TRAIN_FLAGS) == 0
    assert (run / "generator.ckpt").exists()
    assert (run / "history.jsonl").exists()
    assert (run / "manifest.json").exists()

    bundle_file = tmp_path / "paths.bin"
    assert main(["generate", "--model", str(run), "--n-paths", "4",
                 "--length", "256", "--seed", "5", "--out", str(bundle_file)]) == 0
    bundle = data_io.load_bundle(bundle_file)
    assert bundle.paths.shape == (4, 256, 1)

    report_file = tmp_path / "report.json"
    plot_dir = tmp_path / "plots"
    assert main(["evaluate", "--data", str(price_csv), "--mode", "index",
                 "--bundle", str(bundle_file), "--delta", "10",
                 "--out", str(report_file), "--plots", str(plot_dir)]) == 0
    report = json.loads(report_file.read_text())
    assert list(report["scores"]) == [
        "W_1^(1)", "W_1^(5)", "W_1^(20)", "W_1^(100)", "W_1^(200)",
        "skewness", "kurtosis", "ACF", "ACF^(abs)", "ACF^(sq)", "Lev"]
    for png in ("density.png", "acf.png"):
        assert (plot_dir / png).stat().st_size > 0

    out_dir = tmp_path / "summary"
    assert main(["report", "--history", str(run / "history.jsonl"),
                 "--scores", str(report_file), "--out", str(out_dir)]) == 0
    assert (out_dir / "losses.png").stat().st_size > 0
    assert "W_1^(1)" in (out_dir / "summary.txt").read_text()


def test_train_seed_repeat_identical_history(tmp_path, price_csv):
    digests = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["train", "--data", str(price_csv), "--out", str(out),
                     "--seed", "7"] + TRAIN_FLAGS) == 0
        digests.append(hashlib.sha256((out / "history.jsonl").read_bytes()).hexdigest())
    assert digests[0] == digests[1]


def test_generate_seed_repeat_identical_bundle(tmp_path, price_csv):
    run = tmp_path / "run"
    assert main(["train", "--data", str(price_csv), "--out", str(run),
                 "--seed", "11"] + TRAIN_FLAGS) == 0
    files = [tmp_path / "a.bin", tmp_path / "b.bin"]
    for f in files:
        assert main(["generate", "--model", str(run), "--n-paths", "2",
                     "--length", "20", "--seed", "13", "--out", str(f)]) == 0
    assert files[0].read_bytes() == files[1].read_bytes()


def test_evaluate_real_vs_real_zero(tmp_path, price_csv):
    returns = data_io.to_log_returns(data_io.load_price_csv(price_csv))
    bundle = PathBundle(paths=np.repeat(returns[None, :, None], 8, axis=0))
    bundle_file = tmp_path / "real.bin"
    data_io.save_bundle(bundle_file, PathBundle(
        paths=bundle.paths.astype(np.float32), seed=0, model_id="real"))
    # float32 storage quantizes; evaluate against the quantized series so the
    # real-vs-real report is exactly zero
    quantized = bundle.paths.astype(np.float32)[0, :, 0].astype(np.float64)
    px = 100.0 * np.exp(np.concatenate([[0.0], np.cumsum(quantized)]))
    px_file = tmp_path / "quantized.csv"
    data_io.save_price_csv(px_file, PriceSeries(
        dates=[f"{i:06d}" for i in range(len(px))], prices=px))
    report_file = tmp_path / "report.json"
    assert main(["evaluate", "--data", str(px_file), "--bundle", str(bundle_file),
                 "--delta", "10", "--out", str(report_file)]) == 0
    report = json.loads(report_file.read_text())
    assert all(v < 1e-9 for v in report["scores"].values())


def test_surface_train_with_pca_and_repair(tmp_path, surface_csv):
    run = tmp_path / "run"
    assert main(["train", "--data", str(surface_csv), "--mode", "surface",
                 "--pca", "3", "--out", str(run), "--seed", "17",
                 "--noise-channels", "2"] + TRAIN_FLAGS) == 0
    manifest = json.loads((run / "manifest.json").read_text())
    assert len(manifest["pca"]["singular_values"]) == 3

    bundle_file = tmp_path / "surf.bin"
    assert main(["generate", "--model", str(run), "--n-paths", "2",
                 "--length", "24", "--seed", "19", "--out", str(bundle_file)]) == 0
    bundle = data_io.load_bundle(bundle_file)
    assert bundle.channels == 28

    clean_file = tmp_path / "clean.bin"
    assert main(["repair-arbitrage", "--bundle", str(bundle_file),
                 "--data", str(surface_csv), "--out", str(clean_file)]) == 0
    summary = json.loads(open(str(clean_file) + ".summary.json").read())
    assert 0.0 <= summary["arbitrage_rate"] <= 1.0

    # repairing an already-clean bundle is a rate-zero no-op
    rerun_file = tmp_path / "clean2.bin"
    assert main(["repair-arbitrage", "--bundle", str(clean_file),
                 "--data", str(surface_csv), "--out", str(rerun_file)]) == 0
    summary2 = json.loads(open(str(rerun_file) + ".summary.json").read())
    assert summary2["arbitrage_rate"] == 0.0
    assert data_io.load_bundle(rerun_file).paths.tobytes() == \
        data_io.load_bundle(clean_file).paths.tobytes()


def test_surface_evaluate(tmp_path, surface_csv):
    grid = data_io.load_surface_csv(surface_csv)
    bundle = PathBundle(paths=np.repeat(grid.data[None], 2, axis=0).astype(np.float32))
    bundle_file = tmp_path / "surf.bin"
    data_io.save_bundle(bundle_file, bundle)
    report_file = tmp_path / "report.json"
    plot_dir = tmp_path / "plots"
    assert main(["evaluate", "--data", str(surface_csv), "--mode", "surface",
                 "--bundle", str(bundle_file), "--delta", "8",
                 "--out", str(report_file), "--plots", str(plot_dir)]) == 0
    report = json.loads(report_file.read_text())
    assert list(report["scores"]) == [
        "W_1^(1)", "skewness", "kurtosis", "ACF", "ACF^(r)",
        "cross-corr", "arbitrage rate"]
    assert (plot_dir / "crosscorr.png").stat().st_size > 0


def test_config_file_defaults_flags_win(tmp_path, price_csv):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"window": 16, "rfs": 9, "hidden": 8,
                               "attn_layers": 2, "heads": 2, "attn_size": 8,
                               "mlp_hidden": 8, "iters": 2, "batch": 4,
                               "critic_steps": 1, "seed": 23}))
    out = tmp_path / "out"
    assert main(["train", "--data", str(price_csv), "--config", str(cfg),
                 "--iters", "1", "--out", str(out)]) == 0
    history = (out / "history.jsonl").read_text().strip().splitlines()
    assert len(history) == 1  # flag --iters 1 beat the config's 2


def test_console_entry_point(tmp_path):
    result = subprocess.run([sys.executable, "-m", "tsgan.cli", "--help"],
                            capture_output=True, text=True)
    assert result.returncode == 0
    assert "repair-arbitrage" in result.stdout
