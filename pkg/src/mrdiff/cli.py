"""Command-line pipeline: simulate, train, reconstruct, evaluate.

Every command is deterministic under a fixed ``--seed``. Exit codes:
0 success, 2 usage or configuration problems, 3 numerical or checkpoint
failures.
"""

import argparse
import json
import os
import sys
import time

import numpy as np

from .errors import CheckpointError, ConfigError, ContractError, FormatError
from .metrics import psnr, ssim
from .network import Label, NetConfig
from .phantom import shepp_logan, synth_coils
from .physics import encode, gen_gaussian_mask, zero_filled
from .sampler import reconstruct
from .schedule import build_schedule
from .selfsup import SliceData, TrainConfig, restore_checkpoint, train_loop
from .storage import KIND_COILS, KIND_IMAGE, KIND_KSPACE, KIND_MASK, load_array, save_array

MANIFEST = "manifest.json"


def _dump(args, keys):
    for k in keys:
        print(f"{k}={getattr(args, k)}")


def _size(text):
    try:
        h, w = (int(p) for p in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected H,W: {text!r}")
    return h, w


# -- dataset I/O -----------------------------------------------------------

def _slice_paths(out_dir, i):
    return {
        "gt": f"gt_{i:03d}.mrk",
        "coils": f"coils_{i:03d}.mrk",
        "mask": f"mask_{i:03d}.mrk",
        "y": f"y_{i:03d}.mrk",
    }


def load_dataset(data_dir):
    """Read a simulated dataset directory into SliceData records."""
    path = os.path.join(data_dir, MANIFEST)
    if not os.path.exists(path):
        raise ConfigError(f"no {MANIFEST} in {data_dir}")
    with open(path) as fh:
        man = json.load(fh)
    slices = []
    for entry in man["entries"]:
        files = entry["files"]
        y, _ = load_array(os.path.join(data_dir, files["y"]))
        mask, _ = load_array(os.path.join(data_dir, files["mask"]))
        coils, _ = load_array(os.path.join(data_dir, files["coils"]))
        gt, _ = load_array(os.path.join(data_dir, files["gt"]))
        if y.ndim == 2:
            y = y[None]
        label = Label(accel=man["accel"], contrast=entry["contrast"], n_contrasts=man["contrasts"])
        slices.append(SliceData(y=y, mask=mask, coils=coils, label=label, truth=gt))
    return man, slices


def cmd_simulate(args):
    if args.dump_config:
        _dump(args, ["size", "coils", "accel", "slices", "contrasts", "seed", "variant_offset", "out"])
    h, w = args.size
    if args.accel < 1 or args.slices < 1 or args.contrasts < 1 or args.coils < 1:
        raise ConfigError("accel, slices, contrasts, and coils must all be >= 1")
    os.makedirs(args.out, exist_ok=True)
    entries = []
    for i in range(args.slices):
        rng = np.random.default_rng([args.seed, i])
        variant = args.variant_offset + i
        img = shepp_logan(h, w, variant)
        coils = synth_coils(h, w, args.coils, seed=int(rng.integers(2**63)))
        mask = gen_gaussian_mask(h, w, args.accel, seed=int(rng.integers(2**63)))
        y = encode(img, coils, mask)
        files = _slice_paths(args.out, i)
        save_array(os.path.join(args.out, files["gt"]), img, KIND_IMAGE)
        save_array(os.path.join(args.out, files["coils"]), coils, KIND_COILS)
        save_array(os.path.join(args.out, files["mask"]), mask, KIND_MASK)
        save_array(os.path.join(args.out, files["y"]), y, KIND_KSPACE)
        entries.append({"index": i, "variant": variant, "contrast": variant % args.contrasts, "files": files})
    man = {
        "h": h,
        "w": w,
        "coils": args.coils,
        "accel": args.accel,
        "slices": args.slices,
        "contrasts": args.contrasts,
        "seed": args.seed,
        "entries": entries,
    }
    with open(os.path.join(args.out, MANIFEST), "w") as fh:
        json.dump(man, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {args.slices} slices to {args.out}")
    return 0


def cmd_train(args):
    if args.dump_config:
        _dump(args, ["data", "steps", "blocks", "channels", "tokens", "ckpt_every", "lr", "rho", "T", "seed", "out"])
    man, dataset = load_dataset(args.data)
    os.makedirs(args.out, exist_ok=True)
    cfg = TrainConfig(
        steps=args.steps,
        lr=args.lr,
        rho=args.rho,
        T=args.T,
        channels=args.channels,
        blocks=args.blocks,
        tokens=args.tokens,
        seed=args.seed,
        ckpt_every=args.ckpt_every,
    )
    params = state = None
    start_step = 0
    if args.resume:
        params, state, ck_cfg, start_step = restore_checkpoint(args.resume)
        for key in ("channels", "blocks", "tokens"):
            if int(ck_cfg[key]) != getattr(cfg, key):
                raise CheckpointError(f"--{key} {getattr(cfg, key)} != checkpoint {key} {ck_cfg[key]}")
    trace_path = os.path.join(args.out, "loss_trace.txt")
    train_loop(dataset, cfg, params=params, state=state, start_step=start_step, ckpt_dir=args.out, trace_path=trace_path)
    print(f"trained {cfg.steps - start_step} steps; checkpoint in {args.out}")
    return 0


def cmd_reconstruct(args):
    if args.dump_config:
        _dump(args, ["ckpt", "input", "steps", "seed", "out"])
    params, _, ck_cfg, _ = restore_checkpoint(args.ckpt)
    man, dataset = load_dataset(args.input)
    if int(ck_cfg["contrasts"]) != man["contrasts"]:
        raise CheckpointError(f"checkpoint contrasts {ck_cfg['contrasts']} != dataset contrasts {man['contrasts']}")
    sched = build_schedule(int(ck_cfg.get("T", 1000)))
    os.makedirs(args.out, exist_ok=True)
    for i, sl in enumerate(dataset):
        res = reconstruct(sl.y, sl.mask, sl.coils, sl.label, params, sched, S=args.steps, seed=args.seed + i)
        save_array(os.path.join(args.out, f"recon_{i:03d}.mrk"), res.image, KIND_IMAGE)
        print(f"slice {i:03d}: {res.seconds:.3f} s")
    return 0


def cmd_evaluate(args):
    if args.dump_config:
        _dump(args, ["recon", "truth", "out"])
    man, dataset = load_dataset(args.truth)
    recons = sorted(f for f in os.listdir(args.recon) if f.startswith("recon_") and f.endswith(".mrk"))
    if len(recons) != len(dataset):
        raise ConfigError(f"{len(recons)} reconstructions vs {len(dataset)} ground-truth slices")
    lines = []
    vals = {"psnr": [], "ssim": [], "zf_psnr": [], "zf_ssim": []}
    for i, (fname, sl) in enumerate(zip(recons, dataset)):
        recon, _ = load_array(os.path.join(args.recon, fname))
        truth = np.abs(sl.truth)
        zf = np.abs(zero_filled(sl.y, sl.coils))
        rec = np.abs(recon)
        metrics = {
            "psnr": psnr(rec, truth),
            "ssim": ssim(rec, truth),
            "zf_psnr": psnr(zf, truth),
            "zf_ssim": ssim(zf, truth),
        }
        for k, v in metrics.items():
            vals[k].append(v)
            lines.append(f"slice{i:03d}.{k}\t{v}")
    for k, v in vals.items():
        lines.append(f"mean.{k}\t{np.mean(v)}")
    report = "\n".join(lines)
    print(report)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report + "\n")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="mrdiff", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="write a synthetic undersampled dataset")
    sim.add_argument("--size", type=_size, default=(64, 64), help="image extents H,W")
    sim.add_argument("--coils", type=int, default=1)
    sim.add_argument("--accel", type=float, default=4.0)
    sim.add_argument("--slices", type=int, default=4)
    sim.add_argument("--contrasts", type=int, default=1)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--variant-offset", type=int, default=0, help="first phantom variant index")
    sim.add_argument("--out", required=True)
    sim.set_defaults(func=cmd_simulate)

    tr = sub.add_parser("train", help="self-supervised training on a dataset")
    tr.add_argument("--data", required=True)
    tr.add_argument("--steps", type=int, default=2000)
    tr.add_argument("--blocks", type=int, default=4)
    tr.add_argument("--channels", type=int, default=32)
    tr.add_argument("--tokens", type=int, default=16)
    tr.add_argument("--ckpt-every", type=int, default=0)
    tr.add_argument("--lr", type=float, default=0.002)
    tr.add_argument("--rho", type=float, default=0.05)
    tr.add_argument("--T", type=int, default=1000)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--resume", default=None, help="checkpoint to continue from")
    tr.add_argument("--out", required=True)
    tr.set_defaults(func=cmd_train)

    rc = sub.add_parser("reconstruct", help="few-step reconstruction from a checkpoint")
    rc.add_argument("--ckpt", required=True)
    rc.add_argument("--input", required=True)
    rc.add_argument("--steps", type=int, default=5)
    rc.add_argument("--seed", type=int, default=0)
    rc.add_argument("--out", required=True)
    rc.set_defaults(func=cmd_reconstruct)

    ev = sub.add_parser("evaluate", help="PSNR/SSIM report against ground truth")
    ev.add_argument("--recon", required=True)
    ev.add_argument("--truth", required=True)
    ev.add_argument("--out", default=None, help="also write the report here")
    ev.set_defaults(func=cmd_evaluate)

    for s in (sim, tr, rc, ev):
        s.add_argument("--dump-config", action="store_true", help="print resolved settings")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 0
    try:
        return args.func(args)
    except (ConfigError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ContractError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
