"""Command-line surface: verify | train | eval | transmit | count-macs | gen-data.

Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 I/O error. Every subcommand is reproducible byte-for-byte in its file
outputs given the same config and seed.
"""

import argparse
import os
import sys

from . import verify as verify_mod
from .codec import (CheckpointError, Codec, ConfigError, desk_config,
                    eval_clamp, load_checkpoint, full_scale_config,
                    save_checkpoint)
from .config import load_run_config
from .dataset import generate_corpus, load_dataset
from .macs import count_macs, count_params
from .metrics import msssim_db, msssim_value, psnr
from .ppm import PpmError, read_ppm, write_ppm
from .tensor import Rng, Tensor, no_grad
from .training import evaluate, train
from .channel import transmit as channel_transmit


def _add_common(p):
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")


def build_parser():
    root = argparse.ArgumentParser(
        prog="gssmjscc",
        description="State-space-model joint source-channel coding toolkit")
    sub = root.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the verification suites")
    p.add_argument("--suite", default="all",
                   choices=sorted(verify_mod.SUITES) + ["all"])
    _add_common(p)

    p = sub.add_parser("train", help="train a codec from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--data", default=None, help="dataset dir override")
    p.add_argument("--out", default="checkpoint.mjsc")
    p.add_argument("--log", default=None, help="default: <out>.log")
    _add_common(p)

    p = sub.add_parser("eval", help="metric sweep over SNRs")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--snr", default="1,4,7,10,13,16,19",
                   help="comma-separated dB list")
    p.add_argument("--channel", default="awgn",
                   choices=["awgn", "rayleigh", "none"])
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--inject-snr", type=float, default=None,
                   help="override the CSI value fed to the model")
    p.add_argument("--no-csi-rest", action="store_true",
                   help="disable state injection at inference")
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    _add_common(p)

    p = sub.add_parser("transmit", help="send one PPM image through the link")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("image")
    p.add_argument("--snr", type=float, default=10.0)
    p.add_argument("--channel", default="awgn",
                   choices=["awgn", "rayleigh", "none"])
    p.add_argument("--inject-snr", type=float, default=None)
    p.add_argument("--no-csi-rest", action="store_true")
    p.add_argument("--out", default="reconstruction.ppm")
    _add_common(p)

    p = sub.add_parser("count-macs", help="complexity accounting table")
    p.add_argument("--config", default=None)
    p.add_argument("--full-scale", action="store_true",
                   help="use the full-size reference config")

    p = sub.add_parser("gen-data", help="write a synthetic PPM corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--train-count", type=int, default=24)
    p.add_argument("--test-count", type=int, default=8)
    p.add_argument("--size", type=int, default=32)
    _add_common(p)

    return root


def cmd_verify(args):
    ok = verify_mod.run(args.suite, args.seed if args.seed is not None else 0)
    return 0 if ok else 1


def cmd_train(args):
    cfg = load_run_config(args.config)
    if args.seed is not None:
        cfg.model.seed = args.seed
    data_dir = args.data or cfg.dataset_dir
    if not data_dir:
        raise ConfigError("no dataset directory (config [train] dataset or --data)")
    if not os.path.isdir(data_dir):
        raise FileNotFoundError(f"dataset directory {data_dir} does not exist")
    images = load_dataset(data_dir)
    P, W = cfg.model.image_size
    if images.shape[1:] != (3, P, W):
        raise ConfigError(
            f"dataset images are {images.shape[1:]}, config wants (3, {P}, {W})")

    start = 0
    if os.path.exists(args.out):
        codec, start = load_checkpoint(args.out)
        print(f"resuming from {args.out} at step {start}")
    else:
        codec = Codec(cfg.model)
    if start >= cfg.steps:
        print(f"checkpoint already at step {start}, nothing to train")
        save_checkpoint(args.out, codec, step=start)
        return 0

    lines = train(
        codec, images, steps=cfg.steps, lr=cfg.lr,
        batch_size=cfg.batch_size, loss_kind=cfg.loss_kind,
        channel_kind=cfg.channel_kind, snr_db=cfg.snr_db,
        snr_range=cfg.snr_range, seed=cfg.model.seed + start,
        start_step=start, block_len=cfg.block_len)
    log_path = args.log or args.out + ".log"
    with open(log_path, "a") as f:
        for line in lines:
            f.write(line + "\n")
    save_checkpoint(args.out, codec, step=cfg.steps)
    print(f"trained {len(lines)} steps; checkpoint {args.out}, log {log_path}")
    return 0


def cmd_eval(args):
    codec, _ = load_checkpoint(args.checkpoint)
    images = load_dataset(args.data)
    snrs = [float(s) for s in args.snr.split(",") if s.strip()]
    seed = args.seed if args.seed is not None else 0
    rows = ["snr_db,psnr_db,msssim,msssim_db,mse"]
    for snr in snrs:
        report = evaluate(
            codec, images, channel_kind=args.channel, snr_db=snr,
            trials=args.trials, seed=seed, inject_snr=args.inject_snr,
            csi_override=False if args.no_csi_rest else None)
        rows.append(f"{snr:g},{report.mean_psnr_db:.4f},"
                    f"{report.mean_msssim:.6f},{report.mean_msssim_db:.4f},"
                    f"{report.mean_mse:.8f}")
    text = "\n".join(rows) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_transmit(args):
    codec, _ = load_checkpoint(args.checkpoint)
    img = read_ppm(args.image)
    P, W = codec.cfg.image_size
    if img.shape != (3, P, W):
        raise ConfigError(
            f"image is {img.shape[1]}x{img.shape[2]}, model wants {P}x{W}")
    seed = args.seed if args.seed is not None else 0
    told = args.inject_snr if args.inject_snr is not None else args.snr
    csi = codec.cfg.csi
    if args.no_csi_rest:
        from .gssm import CsiRestConfig
        codec.cfg.csi = CsiRestConfig(csi.refresh_interval, False,
                                      csi.snr_scale)
    with no_grad():
        x = Tensor(img[None])
        signal = codec.encode(x, told)
        received, _ = channel_transmit(signal.symbols, args.channel,
                                       args.snr, Rng(seed))
        recon = eval_clamp(codec.decode(received, told))[0]
    codec.cfg.csi = csi
    write_ppm(args.out, recon)
    m = msssim_value(img[None], recon[None])
    print(f"psnr_db={psnr(img, recon):.4f} msssim={m:.6f} "
          f"msssim_db={msssim_db(m):.4f}")
    print(f"wrote {args.out}")
    return 0


def cmd_count_macs(args):
    if args.full_scale:
        cfg = full_scale_config(image=256)
    elif args.config:
        cfg = load_run_config(args.config).model
    else:
        cfg = desk_config()
    on = count_macs(cfg, csi_enabled=True)
    off = count_macs(cfg, csi_enabled=False)
    p_on = count_params(cfg, csi_enabled=True)
    p_off = count_params(cfg, csi_enabled=False)
    width = max(len(k) for k in on.per_module)
    print(f"{'module':<{width}} {'macs(csi on)':>14} {'macs(csi off)':>14}")
    for k in on.per_module:
        print(f"{k:<{width}} {on.per_module[k]:>14} {off.per_module[k]:>14}")
    print(f"{'total':<{width}} {on.total:>14} {off.total:>14}")
    print(f"total macs: {on.total / 1e9:.4f}G (csi on) / "
          f"{off.total / 1e9:.4f}G (csi off)")
    print(f"parameters: {p_on} (csi on) / {p_off} (csi off) "
          f"= {p_on / 1e6:.4f}M")
    return 0


def cmd_gen_data(args):
    seed = args.seed if args.seed is not None else 0
    train_dir, test_dir = generate_corpus(
        args.out, args.train_count, args.test_count, args.size, seed)
    print(f"wrote {args.train_count} train images to {train_dir}")
    print(f"wrote {args.test_count} test images to {test_dir}")
    return 0


_COMMANDS = {
    "verify": cmd_verify,
    "train": cmd_train,
    "eval": cmd_eval,
    "transmit": cmd_transmit,
    "count-macs": cmd_count_macs,
    "gen-data": cmd_gen_data,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (PpmError, CheckpointError, FileNotFoundError, OSError) as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
