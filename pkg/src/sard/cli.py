"""Command line front end.

Subcommands: simulate, build-dataset, train, despeckle, evaluate,
compare.  Every command writes its resolved run_config.json next to its
outputs; re-running with ``--config run_config.json`` reproduces the
outputs bit-identically.

Exit codes: 0 success, 2 validation error, 3 runtime/data error.
"""

import os

# Cap worker/BLAS parallelism before numpy is imported.
_threads = os.environ.get("SARD_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import argparse
import json
import sys

import numpy as np

from . import __version__, dataset, filters, metrics, sarg
from .grid import ImageGrid, NormalizationParams, to_png
from .nn import TrainConfig, despeckle, load_checkpoint, train
from .nn.kernels import backend_name
from .nn.model import CheckpointError
from .nn.optim import DivergenceError
from .speckle import (SpeckleConfig, apply_multiplicative, sample_field,
                      sample_gamma_speckle, sample_nakagami_speckle)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


def _parse_size(text: str) -> tuple[int, int]:
    """'256' -> (256, 256); '320x256' -> (320, 256) as (W, H)."""
    parts = text.lower().split("x")
    try:
        if len(parts) == 1:
            n = int(parts[0])
            wh = (n, n)
        elif len(parts) == 2:
            wh = (int(parts[0]), int(parts[1]))
        else:
            raise ValueError
    except ValueError:
        raise ValueError(f"bad --size {text!r}, expected N or WxH") from None
    if min(wh) < 1:
        raise ValueError(f"--size must be positive, got {text!r}")
    return wh


def _parse_region(text: str) -> tuple[int, int, int, int]:
    try:
        x, y, w, h = (int(v) for v in text.split(","))
    except ValueError:
        raise ValueError(f"bad --region {text!r}, expected x,y,w,h") from None
    return x, y, w, h


def _write_run_config(out_dir, command: str, args: argparse.Namespace) -> None:
    os.makedirs(out_dir, exist_ok=True)
    payload = {
        "tool": "sard",
        "version": __version__,
        "command": command,
        "backend": backend_name(),
        "args": {k: v for k, v in vars(args).items()
                 if k not in ("func", "command", "config") and v is not None},
    }
    with open(os.path.join(out_dir, "run_config.json"), "w") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)


def cmd_simulate(args) -> int:
    w, h = _parse_size(args.size)
    model = {"gamma": "gamma_intensity", "nakagami": "nakagami_amplitude"}.get(args.model)
    if model is None:
        raise ValueError(f"unknown --model {args.model!r}")
    cfg = SpeckleConfig(model=model, looks=args.looks, seed=args.seed)
    field = sample_field(cfg, w, h, args.channels)
    os.makedirs(args.out, exist_ok=True)
    sarg.write_image(os.path.join(args.out, "field.sarg"), field)
    if args.png:
        to_png(field, os.path.join(args.out, "field.png"), stretch=(0.0, 2.0))
    if args.input:
        img = sarg.read_image(args.input)
        noisy = apply_multiplicative(img, sample_field(cfg, img.width, img.height, img.channels))
        sarg.write_image(os.path.join(args.out, "speckled.sarg"), noisy)
    _write_run_config(args.out, "simulate", args)
    print(f"wrote {args.out}/field.sarg ({args.channels}x{h}x{w}, model={args.model}, "
          f"looks={args.looks}, seed={args.seed})")
    return EXIT_OK


def cmd_build_dataset(args) -> int:
    w, h = _parse_size(args.size)
    if w != h:
        raise ValueError("archives use square patches; pass a single --size value")
    if args.stacks is None and args.count is None:
        raise ValueError("either --count (synthetic) or --stacks DIR is required")

    if args.stacks is not None:
        names = sorted(f for f in os.listdir(args.stacks) if f.endswith(".sarg"))
        if not names:
            raise ValueError(f"no .sarg stacks found in {args.stacks}")
        truths, errors = [], []
        for name in names:
            try:
                frames = sarg.read_stack(os.path.join(args.stacks, name))
                truths.append(dataset.temporal_average(dataset.TimeSeriesStack(frames)))
            except (sarg.SargError, OSError, ValueError) as exc:
                errors.append(f"{name}: {exc}")
        if errors:
            for line in errors:
                print(f"error: {line}", file=sys.stderr)
            raise sarg.SargError(f"{len(errors)} of {len(names)} stacks unreadable")
        archive = dataset.build_synthetic_archive(
            args.out, len(truths), size=w, looks=args.looks, seed=args.seed,
            clip_p=args.clip_percentile, truth_fn=lambda i: truths[i],
            split_spec=dataset.SplitSpec(seed=args.seed))
    else:
        if args.count < 3:
            raise ValueError("--count must be at least 3")
        archive = dataset.build_synthetic_archive(
            args.out, args.count, size=w, channels=args.channels, looks=args.looks,
            seed=args.seed, clip_p=args.clip_percentile,
            split_spec=dataset.SplitSpec(seed=args.seed))
    _write_run_config(args.out, "build-dataset", args)
    sizes = {k: len(v) for k, v in archive.splits.items()}
    print(f"archive {args.out}: {archive.manifest['count']} pairs, "
          f"split {sizes['train']}/{sizes['val']}/{sizes['test']}, "
          f"range [{archive.normalization.min:.4g}, {archive.normalization.max:.4g}]")
    return EXIT_OK


def cmd_train(args) -> int:
    archive = dataset.read_archive(args.archive)
    cfg = TrainConfig(epochs=args.epochs, batch_size=args.batch, lr0=args.lr,
                      looks=args.looks, seed=args.seed,
                      fresh_speckle=not args.frozen_inputs)
    _write_run_config(args.out, "train", args)
    _, history = train(archive, cfg, out_dir=args.out,
                       log_fn=(None if args.quiet else
                               lambda row: print(f"epoch {row['epoch']:3d}  lr {row['lr']:.6f}  "
                                                 f"loss {row['train_loss']:.4f}  "
                                                 f"val psnr {row['val_psnr']:.2f}  "
                                                 f"ssim {row['val_ssim']:.4f}")))
    print(f"trained {cfg.epochs} epochs -> {args.out}/checkpoint.sarm "
          f"(final val psnr {history[-1]['val_psnr']:.2f} dB)")
    return EXIT_OK


def cmd_despeckle(args) -> int:
    model, header = load_checkpoint(args.checkpoint)
    norm_dict = header.get("normalization")
    if not norm_dict:
        raise CheckpointError(f"{args.checkpoint}: no normalization params stored")
    norm = NormalizationParams.from_dict(norm_dict)
    img = sarg.read_image(args.input)
    filtered = despeckle(model, img, norm, clip_p=header.get("clip_percentile", 90.0),
                         tile=args.tile, overlap=args.overlap)
    os.makedirs(args.out, exist_ok=True)
    sarg.write_image(os.path.join(args.out, "filtered.sarg"), filtered)
    if args.png:
        lo, hi = np.percentile(filtered.data, [2, 98])
        to_png(filtered, os.path.join(args.out, "filtered.png"), stretch=(lo, hi))
    if args.region:
        region = _parse_region(args.region)
        enl_report = {
            "region": list(region),
            "enl_input": metrics.enl(img, region),
            "enl_filtered": metrics.enl(filtered, region),
        }
        with open(os.path.join(args.out, "enl.json"), "w") as fh:
            json.dump(enl_report, fh, indent=1, sort_keys=True)
        print(f"region ENL: input {enl_report['enl_input']:.2f} -> "
              f"filtered {enl_report['enl_filtered']:.2f}")
    _write_run_config(args.out, "despeckle", args)
    print(f"wrote {args.out}/filtered.sarg")
    return EXIT_OK


def _load_model_and_norm(path):
    model, header = load_checkpoint(path)
    norm_dict = header.get("normalization")
    if not norm_dict:
        raise CheckpointError(f"{path}: no normalization params stored")
    return model, NormalizationParams.from_dict(norm_dict), header.get("clip_percentile", 90.0)


def cmd_evaluate(args) -> int:
    archive = dataset.read_archive(args.archive)
    model, norm, clip_p = _load_model_and_norm(args.checkpoint)
    pairs = archive.pairs_for(args.split)
    if not pairs:
        raise ValueError(f"archive has no {args.split!r} samples")
    region = _parse_region(args.region) if args.region else None
    rows = []
    for i, pair in zip(archive.indices(args.split), pairs):
        filtered = despeckle(model, pair.input, norm, clip_p=None)
        rows.append(metrics.evaluate_pair(i, pair.truth, pair.input, filtered,
                                          region=region, ssim_window=args.ssim_window))
    os.makedirs(args.out, exist_ok=True)
    agg = metrics.write_report(os.path.join(args.out, "metrics.csv"), rows)
    _write_run_config(args.out, "evaluate", args)
    print(f"{len(rows)} images: psnr {agg['psnr_noisy']:.2f} -> {agg['psnr_filtered']:.2f} dB, "
          f"ssim {agg['ssim_noisy']:.4f} -> {agg['ssim_filtered']:.4f}")
    return EXIT_OK


def compare_methods(pairs, model=None, norm=None, clip_p=90.0, methods=None,
                    region=None, ssim_window=None):
    """Mean PSNR/SSIM/ENL per method and parameter set over the pairs.

    Returns a list of result dicts, one per (method, params), the
    trained model first when given.  Baselines run on the archived
    (already clipped) inputs; the model path mirrors evaluate.
    """
    chosen = list(filters.FILTERS) if methods is None else list(methods)
    unknown = [m for m in chosen if m not in filters.FILTERS and m != "model"]
    if unknown:
        raise ValueError(f"unknown methods: {', '.join(unknown)}")
    results = []

    def _mean_scores(outputs):
        ps, ss, es = [], [], []
        for pair, out in zip(pairs, outputs):
            ps.append(metrics.psnr(pair.truth, out))
            ss.append(metrics.ssim(pair.truth, out, ssim_window))
            es.append(metrics.enl(out, region))
        return {"psnr": float(np.mean(ps)), "ssim": float(np.mean(ss)),
                "enl": float(np.mean(es))}

    if model is not None:
        outputs = [despeckle(model, p.input, norm, clip_p=None) for p in pairs]
        results.append({"method": "model", "params": "", **_mean_scores(outputs)})
    for name in chosen:
        if name == "model":
            continue
        fn, sweeps = filters.FILTERS[name]
        for params in sweeps:
            outputs = [fn(p.input, **params) for p in pairs]
            label = ",".join(f"{k}={v}" for k, v in params.items())
            results.append({"method": name, "params": label, **_mean_scores(outputs)})
    return results


def cmd_compare(args) -> int:
    archive = dataset.read_archive(args.archive)
    pairs = archive.pairs_for(args.split)
    if not pairs:
        raise ValueError(f"archive has no {args.split!r} samples")
    model = norm = None
    clip_p = 90.0
    if args.checkpoint:
        model, norm, clip_p = _load_model_and_norm(args.checkpoint)
    methods = args.methods.split(",") if args.methods else None
    region = _parse_region(args.region) if args.region else None
    results = compare_methods(pairs, model=model, norm=norm, clip_p=clip_p,
                              methods=methods, region=region, ssim_window=args.ssim_window)
    results.sort(key=lambda r: r["psnr"], reverse=True)
    os.makedirs(args.out, exist_ok=True)
    import csv as _csv
    with open(os.path.join(args.out, "compare.csv"), "w", newline="") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["method", "params", "psnr", "ssim", "enl"])
        for row in results:
            writer.writerow([row["method"], row["params"], f"{row['psnr']:.4f}",
                             f"{row['ssim']:.4f}", f"{row['enl']:.4f}"])
    _write_run_config(args.out, "compare", args)
    for row in results:
        label = f"{row['method']}({row['params']})" if row["params"] else row["method"]
        print(f"{label:24s} psnr {row['psnr']:7.2f}  ssim {row['ssim']:.4f}  enl {row['enl']:8.2f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sard", description="SAR despeckling toolkit: simulate, train, filter, evaluate.")
    parser.add_argument("--version", action="version", version=f"sard {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate speckle fields / speckled images")
    p.add_argument("--model", default="gamma", help="gamma | nakagami")
    p.add_argument("--looks", type=int, default=4)
    p.add_argument("--size", default="256", help="N or WxH")
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--input", default=None, help="optional SARG image to speckle")
    p.add_argument("--png", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("build-dataset", help="build a training archive")
    p.add_argument("--count", type=int, default=None, help="synthetic truth count")
    p.add_argument("--stacks", default=None, help="directory of SARG time-series stacks")
    p.add_argument("--size", default="96")
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--looks", type=int, default=4)
    p.add_argument("--clip-percentile", type=float, default=90.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_build_dataset)

    p = sub.add_parser("train", help="train the residual despeckler")
    p.add_argument("--archive", required=True)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--lr", type=float, default=0.002)
    p.add_argument("--looks", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frozen-inputs", action="store_true",
                   help="reuse archived inputs instead of fresh speckle per epoch")
    p.add_argument("--quiet", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("despeckle", help="filter a SARG image with a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--tile", type=int, default=96)
    p.add_argument("--overlap", type=int, default=8)
    p.add_argument("--region", default=None, help="x,y,w,h rectangle for ENL")
    p.add_argument("--png", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_despeckle)

    p = sub.add_parser("evaluate", help="metrics for a trained model on an archive split")
    p.add_argument("--archive", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--region", default=None)
    p.add_argument("--ssim-window", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="model vs classical baselines on frozen pairs")
    p.add_argument("--archive", required=True)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--methods", default=None, help="comma list, default all baselines")
    p.add_argument("--region", default=None)
    p.add_argument("--ssim-window", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    # --config loads a persisted run_config.json as argument defaults
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, rest = pre.parse_known_args(argv if argv is not None else sys.argv[1:])
    if known.config:
        try:
            with open(known.config) as fh:
                stored = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot read --config {known.config}: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        command = stored.get("command")
        choices = parser._subparsers._group_actions[0].choices
        if command not in choices:
            print(f"error: --config {known.config} names unknown command {command!r}",
                  file=sys.stderr)
            return EXIT_VALIDATION
        rest = [command] + rest
        sp = choices[command]
        stored_args = stored.get("args", {})
        sp.set_defaults(**stored_args)
        # Stored values satisfy required options; flags given on the command
        # line still override the stored defaults.
        for action in sp._actions:
            if action.required and action.dest in stored_args:
                action.required = False
    try:
        args = parser.parse_args(rest)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (sarg.SargError, CheckpointError, DivergenceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
