"""Command-line interface.

Subcommands: ``train``, ``generate``, ``evaluate``, ``repair-arbitrage``,
``report``.  A JSON config file supplies defaults; explicit flags win.  The
``TSGAN_THREADS`` environment variable caps torch's thread count (training is
only bit-reproducible single-threaded).

Every command is deterministic given its inputs and ``--seed`` and exits
nonzero on error: 2 for missing/invalid files and arguments, 1 for runtime
failures such as divergent training.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import torch

from tsgan import data_io, metrics, networks, plots, surfaces, training
from tsgan.containers import PathBundle, ScoreReport, SurfaceGrid
from tsgan.losses import LossConfig
from tsgan.networks import DiscriminatorSpec, GeneratorSpec
from tsgan.training import TrainConfig, TrainingDiverged

PRESETS = {
    "desk": {"iters": 2000, "batch": 32},
    "paper": {"iters": 20_000, "batch": 64},
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", type=Path, help="JSON file of flag defaults")
    p.add_argument("--out", type=Path, required=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tsgan",
                                     description="attention-GAN market simulators")
    sub = parser.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a generator/discriminator pair")
    _add_common(t)
    t.add_argument("--data", type=Path, required=True, help="price or surface CSV")
    t.add_argument("--mode", choices=("index", "surface"), default="index")
    t.add_argument("--family", choices=("tagan", "ttgan"), default="ttgan")
    t.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    t.add_argument("--loss", choices=("original", "wgan_gp"), default="wgan_gp")
    t.add_argument("--augment", choices=networks.AUGMENT_MODES, default="none")
    t.add_argument("--window", type=int, default=128)
    t.add_argument("--rfs", type=int, default=127)
    t.add_argument("--hidden", type=int, default=64)
    t.add_argument("--noise-channels", type=int, default=3)
    t.add_argument("--kernel-size", type=int, default=3)
    t.add_argument("--blocks-before", type=int, default=3)
    t.add_argument("--blocks-after", type=int, default=3)
    t.add_argument("--attn-layers", type=int, default=5)
    t.add_argument("--heads", type=int, default=4)
    t.add_argument("--attn-size", type=int, default=32)
    t.add_argument("--mlp-hidden", type=int)
    t.add_argument("--norm", choices=("batch", "layer"), default="batch")
    t.add_argument("--start-channels", type=int, default=32)
    t.add_argument("--max-channels", type=int, default=128)
    t.add_argument("--iters", type=int, help="override the preset iteration count")
    t.add_argument("--batch", type=int, help="override the preset batch size")
    t.add_argument("--critic-steps", type=int)
    t.add_argument("--lr", type=float, default=1e-4)
    t.add_argument("--gp-weight", type=float, default=10.0)
    t.add_argument("--pca", type=int, default=0,
                   help="surface mode: train on this many principal components")
    t.add_argument("--eval-every", type=int, default=0)
    t.set_defaults(func=cmd_train)

    g = sub.add_parser("generate", help="sample paths from a trained model")
    _add_common(g)
    g.add_argument("--model", type=Path, required=True,
                   help="training output directory (with manifest.json)")
    g.add_argument("--n-paths", type=int, default=512)
    g.add_argument("--length", type=int, default=2560)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="score a bundle against real data")
    _add_common(e)
    e.add_argument("--data", type=Path, required=True)
    e.add_argument("--mode", choices=("index", "surface"), default="index")
    e.add_argument("--bundle", type=Path, required=True)
    e.add_argument("--delta", type=int, help="correlation lag horizon "
                   "(default 250 for index, 64 for surface)")
    e.add_argument("--plots", type=Path, help="directory for plot files")
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("repair-arbitrage", help="repair a bundle of surfaces")
    _add_common(r)
    r.add_argument("--bundle", type=Path, required=True)
    r.add_argument("--data", type=Path, required=True,
                   help="surface CSV defining the strike/maturity grid")
    r.set_defaults(func=cmd_repair)

    p = sub.add_parser("report", help="render a training history")
    _add_common(p)
    p.add_argument("--history", type=Path, required=True)
    p.add_argument("--scores", type=Path, help="optional score-report JSON")
    p.set_defaults(func=cmd_report)
    return parser


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_train(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    iters = args.iters if args.iters is not None else PRESETS[args.preset]["iters"]
    batch = args.batch if args.batch is not None else PRESETS[args.preset]["batch"]

    manifest = {"mode": args.mode, "family": args.family, "augment": args.augment}
    if args.mode == "index":
        series = data_io.to_log_returns(data_io.load_price_csv(args.data))[:, None]
        stats = data_io.dataset_stats(series)
        manifest["stats"] = vars(stats)
    else:
        grid = data_io.load_surface_csv(args.data)
        manifest["grid"] = {"strikes": grid.strikes.tolist(),
                            "maturities": grid.maturities.tolist()}
        series = grid.data
        if args.pca:
            model, comps = surfaces.pca_fit(grid.data, args.pca)
            manifest["pca"] = {"basis": model.basis.tolist(),
                               "singular_values": model.singular_values.tolist()}
            series = comps

    channels = series.shape[1]
    gspec = GeneratorSpec(
        family=args.family, length=args.window, rfs=args.rfs,
        noise_channels=args.noise_channels, data_channels=channels,
        hidden_channels=args.hidden, kernel_size=args.kernel_size,
        blocks_before=args.blocks_before, blocks_after=args.blocks_after,
        attn_layers=args.attn_layers, mlp_hidden=args.mlp_hidden,
        num_heads=args.heads, attn_size=args.attn_size, norm=args.norm)
    dspec = DiscriminatorSpec(
        family=args.family, length=args.window, data_channels=channels,
        augment=args.augment, start_channels=args.start_channels,
        max_channels=args.max_channels, kernel_size=args.kernel_size,
        blocks_before=args.blocks_before, blocks_after=args.blocks_after,
        hidden_channels=args.hidden, attn_layers=args.attn_layers,
        mlp_hidden=args.mlp_hidden,
        num_heads=args.heads if args.family == "tagan" else max(args.heads, 4),
        attn_size=args.attn_size, norm=args.norm)

    generator = networks.build_generator(gspec, args.seed)
    discriminator = networks.build_discriminator(dspec, args.seed + 1)
    cfg = TrainConfig(
        window_length=args.window, batch_size=batch, total_iters=iters,
        critic_steps=args.critic_steps, lr_generator=args.lr,
        lr_discriminator=args.lr,
        loss=LossConfig(kind=args.loss, gp_weight=args.gp_weight),
        seed=args.seed, augment=args.augment, eval_every=args.eval_every,
        snapshot_dir=str(out / "diverged"))
    history = training.train(generator, discriminator,
                             training.make_windows(series, args.window), cfg)

    networks.save_checkpoint(generator, out / "generator.ckpt")
    networks.save_checkpoint(discriminator, out / "discriminator.ckpt")
    training.save_history(history, out / "history.jsonl")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    print(f"trained {args.family} ({args.mode}) for {iters} iterations -> {out}")
    return 0


def _load_model_dir(model_dir: Path):
    manifest = json.loads((model_dir / "manifest.json").read_text())
    generator = networks.load_checkpoint(model_dir / "generator.ckpt")
    return manifest, generator


def cmd_generate(args) -> int:
    manifest, generator = _load_model_dir(Path(args.model))
    bundle = training.sample_paths(generator, args.n_paths, args.length,
                                   seed=args.seed,
                                   model_id=manifest.get("family", ""))
    if manifest.get("pca"):
        model = surfaces.PcaModel(
            basis=np.asarray(manifest["pca"]["basis"]),
            singular_values=np.asarray(manifest["pca"]["singular_values"]))
        flat = bundle.paths.reshape(-1, model.n_components)
        restored = surfaces.pca_invert(model, flat)
        bundle = PathBundle(paths=restored.reshape(args.n_paths, args.length, -1),
                            seed=bundle.seed, model_id=bundle.model_id)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    data_io.save_bundle(args.out, bundle)
    print(f"wrote {bundle.n_paths} paths of length {bundle.length} "
          f"({bundle.channels} channels) -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    bundle = data_io.load_bundle(args.bundle)
    if args.mode == "index":
        real = data_io.to_log_returns(data_io.load_price_csv(args.data))
        delta = args.delta or metrics.INDEX_DELTA
        report = metrics.index_scores(real, bundle, delta=delta)
    else:
        grid = data_io.load_surface_csv(args.data)
        delta = args.delta or metrics.SURFACE_DELTA
        report = metrics.surface_scores(grid, bundle, delta=delta)
    args.out.parent.mkdir(parents=True, exist_ok=True)
    args.out.write_text(report.to_json())
    for name, value in report.scores.items():
        print(f"{name}: {value:.6g}")
    if args.plots:
        args.plots.mkdir(parents=True, exist_ok=True)
        if args.mode == "index":
            plots.density_overlay(real, bundle, args.plots / "density.png")
            plots.acf_overlay(real, bundle, args.plots / "acf.png",
                              delta=min(delta, 100))
        else:
            plots.density_overlay(grid.data[:, 0], bundle, args.plots / "density.png")
            plots.acf_overlay(grid.data[:, 0], bundle, args.plots / "acf.png",
                              delta=min(delta, 50), kinds=("acf", "acf_r"))
            plots.crosscorr_heatmap(grid.data, bundle, args.plots / "crosscorr.png")
    return 0


def cmd_repair(args) -> int:
    bundle = data_io.load_bundle(args.bundle)
    grid = data_io.load_surface_csv(args.data)
    clean, flags = surfaces.repair_pipeline(bundle, grid)
    rate = float(flags.mean())
    args.out.parent.mkdir(parents=True, exist_ok=True)
    data_io.save_bundle(args.out, clean)
    summary = {"arbitrage_rate": rate, "n_violated": int(flags.sum()),
               "n_surfaces": int(flags.size)}
    Path(str(args.out) + ".summary.json").write_text(json.dumps(summary, indent=2))
    print(f"arbitrage rate: {rate:.4%} ({summary['n_violated']}/{summary['n_surfaces']})")
    return 0


def cmd_report(args) -> int:
    history = training.load_history(args.history)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if history:
        plots.loss_curves(history, out / "losses.png")
    lines = [f"iterations: {len(history)}"]
    if history:
        lines.append(f"final loss_G: {history[-1]['loss_G']:.6g}")
        lines.append(f"final loss_D: {history[-1]['loss_D']:.6g}")
    if args.scores:
        report = ScoreReport.from_json(Path(args.scores).read_text())
        lines.extend(f"{k}: {v:.6g}" for k, v in report.scores.items())
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """Load --config JSON as parser defaults; explicit flags still win."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    config = json.loads(Path(argv[idx + 1]).read_text())
    for sub_action in parser._subparsers._group_actions[0].choices.values():
        known = {a.dest for a in sub_action._actions}
        sub_action.set_defaults(**{k: v for k, v in config.items() if k in known})
    return argv


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    threads = os.environ.get("TSGAN_THREADS")
    if threads:
        torch.set_num_threads(max(1, int(threads)))
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
