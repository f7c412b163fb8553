"""Command-line entry point.

Subcommands: synth, train, eval, noise-bench, dwt, gradcheck. Every command
is deterministic given its config (seeds included). Exit codes: 0 success,
1 runtime failure, 2 usage error.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from .config import ConfigError, load_config
from .data import load_manifest, load_split, load_split_raw
from .gradcheck import standard_checks
from .model import build_model, load_checkpoint
from .metrics import confusion, metrics
from .noise import noise_bench, noise_csv_text
from .pgm import ImageGray, read_pgm, write_pgm
from .synth import synth_generate
from .tensor import Tensor, no_grad
from .train import SplitData, evaluate, train
from .wavelet import WaveletSubbands, haar_dwt2d, haar_idwt2d


def _load_model(run_cfg, checkpoint_path):
    model = build_model(run_cfg.model_config(), run_cfg["train.seed"])
    model.load_values(load_checkpoint(checkpoint_path))
    return model


def _require_manifest(run_cfg):
    path = run_cfg["data.manifest"]
    if not path:
        raise ConfigError("data.manifest is not set in the config")
    return load_manifest(path)


def cmd_synth(args):
    run_cfg = load_config(args.config)
    synth_cfg = run_cfg.synth_config()
    if args.seed is not None:
        synth_cfg.seed = args.seed
    manifest = synth_generate(synth_cfg, args.out)
    print(os.path.join(manifest.root, "manifest.tsv"))
    return 0


def cmd_train(args):
    run_cfg = load_config(args.config)
    manifest = _require_manifest(run_cfg)
    size = run_cfg["model.input_size"]
    train_x, train_y = load_split_raw(manifest, "train", size)
    val_x, val_y = load_split_raw(manifest, "val", size)
    data = SplitData(train_x, train_y, val_x, val_y)

    def progress(row):
        print(f"epoch {row['epoch']:3d}  lr {row['lr']:.2e}  loss {row['train_loss']:.4f}  "
              f"train_acc {row['train_acc']:.4f}  val_acc {row['val_acc']:.4f}")

    result = train(run_cfg.model_config(), data, run_cfg.train_config(),
                   run_cfg.augment_config(), out_dir=args.out, progress=progress)
    last = result.history[-1]
    print(f"trained {len(result.history)} epochs ({result.steps} steps)")
    print(f"best val acc {result.best_val_acc:.4f} at epoch {result.best_epoch}")
    print(f"final train acc {last['train_acc']:.4f}")
    print(f"history: {result.history_path}")
    print(f"checkpoint: {result.checkpoint_path}")
    return 0


def cmd_eval(args):
    run_cfg = load_config(args.config)
    manifest = _require_manifest(run_cfg)
    model = _load_model(run_cfg, args.checkpoint)
    images, labels = load_split(manifest, args.split, run_cfg["model.input_size"])
    _, acc, preds = evaluate(model, images, labels)
    k = run_cfg["model.num_classes"]
    cm = confusion(preds, labels, k)
    report = metrics(cm)

    os.makedirs(args.out, exist_ok=True)
    json_path = os.path.join(args.out, f"metrics_{args.split}.json")
    with open(json_path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")
    csv_path = os.path.join(args.out, f"confusion_{args.split}.csv")
    names = manifest.class_names
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write("true_class," + ",".join(names) + "\n")
        for ci, row in enumerate(cm):
            fh.write(names[ci] + "," + ",".join(str(int(v)) for v in row) + "\n")

    print(f"{args.split} accuracy {report.accuracy:.4f} macro_f1 {report.macro_f1:.4f}")
    print(f"metrics: {json_path}")
    print(f"confusion: {csv_path}")
    return 0


def cmd_noise_bench(args):
    run_cfg = load_config(args.config)
    manifest = _require_manifest(run_cfg)
    model = _load_model(run_cfg, args.checkpoint)
    images, labels = load_split_raw(manifest, "test", run_cfg["model.input_size"])
    rows = noise_bench(model, images, labels, ladder=run_cfg["noise.psnr_ladder"],
                       seed=run_cfg["noise.seed"], tol_db=run_cfg["noise.tol_db"])
    text = noise_csv_text(rows)
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(text)
    for row in rows:
        target = "clean" if math.isinf(row["level_db_target"]) else f"{row['level_db_target']:.2f}dB"
        print(f"{target:>9}  achieved={row['level_db_achieved']:.2f}  acc={row['accuracy']:.4f}")
    print(f"csv: {args.out}")
    return 0


def _subband_to_pgm(band, level, kind):
    # orthonormal coefficients grow by 2 per level; details are re-centered at 128
    scale = float(2**level)
    if kind == "ll":
        disp = band / scale
    else:
        disp = (band / scale + 255.0) / 2.0
    return np.clip(np.rint(disp), 0, 255).astype(np.uint8)


def cmd_dwt(args):
    img = read_pgm(getattr(args, "in"))
    os.makedirs(args.out, exist_ok=True)
    x = Tensor(img.pixels.astype(np.float64)[None, None])
    written = []
    with no_grad():
        stack = []
        current = x
        for level in range(1, args.levels + 1):
            h, w = current.data.shape[2], current.data.shape[3]
            if h % 2 or w % 2:
                raise ValueError(
                    f"cannot decompose level {level}: size {h}x{w} is odd; use an even-sized image"
                )
            bands = haar_dwt2d(current)
            stack.append(bands)
            for kind in ("lh", "hl", "hh"):
                arr = _subband_to_pgm(getattr(bands, kind).data[0, 0], level, kind)
                path = os.path.join(args.out, f"{kind}_{level}.pgm")
                write_pgm(ImageGray(arr.shape[1], arr.shape[0], arr), path)
                written.append(path)
            current = bands.ll
        arr = _subband_to_pgm(current.data[0, 0], args.levels, "ll")
        path = os.path.join(args.out, "ll.pgm")
        write_pgm(ImageGray(arr.shape[1], arr.shape[0], arr), path)
        written.append(path)

        if args.reconstruct:
            recon = current
            for bands in reversed(stack):
                recon = haar_idwt2d(WaveletSubbands(recon, bands.lh, bands.hl, bands.hh))
            arr = np.clip(np.rint(recon.data[0, 0]), 0, 255).astype(np.uint8)
            path = os.path.join(args.out, "reconstructed.pgm")
            write_pgm(ImageGray(arr.shape[1], arr.shape[0], arr), path)
            written.append(path)
    for path in written:
        print(path)
    return 0


def cmd_gradcheck(args):
    checks = standard_checks()
    known = [name for name, _ in checks]
    if args.corrupt is not None and args.corrupt not in known:
        raise ValueError(f"--corrupt must name one of {known}")
    failed = []
    for name, runner in checks:
        report = runner(corrupt=(args.corrupt == name))
        status = "PASS" if report.passed else "FAIL"
        print(f"{name:>14}  max_rel_err={report.max_rel_err:.3e}  {status}")
        if not report.passed:
            failed.append(name)
    if failed:
        print(f"gradient check FAILED for: {', '.join(failed)}", file=sys.stderr)
        return 1
    print("all gradient checks passed")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="wavesf",
        description="Wavelet spatial-frequency classifier: data synthesis, training, "
        "evaluation, noise robustness, wavelet inspection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate the synthetic 8-class dataset")
    p.add_argument("--config", default=None, help="run config file (defaults apply if omitted)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, default=None, help="override data.seed")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train a model; writes history.csv and best.ckpt")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="output directory for artifacts")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint; writes metrics JSON + confusion CSV")
    p.add_argument("--config", default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", default="test", choices=("train", "val", "test"))
    p.add_argument("--out", default=".", help="directory for metrics/confusion files")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("noise-bench", help="accuracy across the calibrated PSNR ladder")
    p.add_argument("--config", default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", default="noise_bench.csv")
    p.set_defaults(func=cmd_noise_bench)

    p = sub.add_parser("dwt", help="decompose a PGM image into Haar subband PGMs")
    p.add_argument("--in", required=True, help="input binary PGM (P5)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--levels", type=int, default=1)
    p.add_argument("--reconstruct", action="store_true",
                   help="also write reconstructed.pgm from the float subbands")
    p.set_defaults(func=cmd_dwt)

    p = sub.add_parser("gradcheck", help="finite-difference check of every module")
    p.add_argument("--corrupt", default=None, help=argparse.SUPPRESS)  # test hook
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
