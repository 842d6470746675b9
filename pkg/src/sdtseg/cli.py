"""Command-line surface for the segmentation pipeline.

Subcommands: phantom, sdt, fuse, train, infer, postprocess, evaluate.
Every failure maps to a documented exit code and prints a single
machine-parseable line ``error[<class>]: <message>`` on stderr.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import json
import sys
from dataclasses import replace
from math import ceil
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig, config_from_dict, dump_config, load_config
from .errors import (ConfigError, DegenerateInputError, GeometryError, NiftiError,
                     SdtSegError, TrainingDivergedError)
from .loss import LossConfig
from .metrics import evaluate_pair
from .model import (NetConfig, infer, load_checkpoint, save_checkpoint, train)
from .morphology import fill_holes, largest_component
from .nifti import read_mask, read_volume, write_volume
from .phantom import PhantomSpec, generate
from .report import metrics_rows, write_metrics_report, write_training_report
from .sdt import SDTVolume, signed_distance, threshold_to_mask
from .staple import RaterStack, staple_fuse
from .volume import downsample2, downsample2_mask, normalize_intensities

EXIT_CODES = {
    "ok": 0,
    "internal": 1,
    "usage": 2,
    "missing-file": 3,
    "config": 4,
    "geometry": 5,
    "volume-io": 6,
    "degenerate-input": 7,
    "diverged": 8,
}

_EXIT_HELP = """exit codes:
  0  success
  1  unexpected internal error
  2  bad command-line usage
  3  missing or unreadable input file
  4  malformed or out-of-range configuration
  5  grid geometry mismatch
  6  malformed or unsupported volume file
  7  degenerate input (constant volume, empty mask, ...)
  8  training diverged (non-finite loss)
"""


def _classify(exc: BaseException) -> str:
    if isinstance(exc, (FileNotFoundError, IsADirectoryError, PermissionError)):
        return "missing-file"
    if isinstance(exc, ConfigError):
        return "config"
    if isinstance(exc, GeometryError):
        return "geometry"
    if isinstance(exc, NiftiError):
        return "volume-io"
    if isinstance(exc, (DegenerateInputError, ValueError)):
        return "degenerate-input"
    if isinstance(exc, TrainingDivergedError):
        return "diverged"
    return "internal"


def _load_pipeline_config(args) -> PipelineConfig:
    cfg = load_config(args.config) if args.config else config_from_dict({})
    loss_over = {k: getattr(args, k) for k in ("alpha", "beta", "weight_source")
                 if getattr(args, k, None) is not None}
    net_over = {k: getattr(args, a) for k, a in
                (("depth", "depth"), ("start_channels", "channels"), ("seed", "seed"))
                if getattr(args, a, None) is not None}
    train_over = {k: getattr(args, k) for k in ("lr", "batch", "epochs")
                  if getattr(args, k, None) is not None}
    if loss_over:
        cfg = replace(cfg, loss=replace(cfg.loss, **loss_over))
    if net_over:
        cfg = replace(cfg, net=replace(cfg.net, **net_over))
    if train_over:
        cfg = replace(cfg, train=replace(cfg.train, **train_over))
    if getattr(args, "tau", None) is not None:
        cfg = replace(cfg, tau=args.tau)
    return cfg


# ---------------------------------------------------------------- phantom

def _cmd_phantom(args) -> int:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    n = args.size
    records = []
    for i in range(args.count):
        if args.primitive == "mix":
            primitive = ("sphere", "ellipsoid")[int(rng.integers(2))]
        else:
            primitive = args.primitive
        margin = args.radius_max + 3
        center = tuple(float(c) for c in rng.uniform(margin, n - 1 - margin, size=3))
        if primitive == "ellipsoid":
            radii = (tuple(float(r) for r in
                           rng.uniform(args.radius_min, args.radius_max, size=3)),)
            centers = (center,)
        elif primitive == "sphere":
            radii = (float(rng.uniform(args.radius_min, args.radius_max)),)
            centers = (center,)
        else:  # two-blob
            c2 = tuple(float(c) for c in rng.uniform(margin, n - 1 - margin, size=3))
            radii = (float(rng.uniform(args.radius_min, args.radius_max)),
                     float(rng.uniform(args.radius_min, args.radius_max)))
            centers = (center, c2)
        spec = PhantomSpec(shape=(n, n, n), spacing=tuple(args.spacing),
                           primitive=primitive, centers=centers, radii=radii,
                           fg_mean=args.fg_mean, bg_mean=args.bg_mean,
                           noise_std=args.noise_std, seed=args.seed + 1000 + i)
        vol, mask = generate(spec)
        img_path = out / f"img_{i:03d}.nii.gz"
        msk_path = out / f"msk_{i:03d}.nii.gz"
        write_volume(vol, img_path)
        write_volume(mask, msk_path)
        records.append({
            "image": img_path.name, "mask": msk_path.name,
            "primitive": spec.primitive, "centers": spec.centers,
            "radii": spec.radii, "fg_mean": spec.fg_mean, "bg_mean": spec.bg_mean,
            "noise_std": spec.noise_std, "seed": spec.seed,
            "shape": spec.shape, "spacing": spec.spacing,
        })
    (out / "phantoms.json").write_text(json.dumps(records, indent=2) + "\n")
    print(f"wrote {args.count} phantom(s) to {out}")
    return 0


# -------------------------------------------------------------------- sdt

def _cmd_sdt(args) -> int:
    if args.recover:
        vol = read_volume(args.input)
        mask = threshold_to_mask(vol, args.tau)
        write_volume(mask, args.output)
        print(f"recovered mask ({mask.count()} voxels) -> {args.output}")
        return 0
    mask = read_mask(args.input)
    if args.downsample2:
        mask = downsample2_mask(mask)
    s = signed_distance(mask)
    write_volume(s.to_volume(), args.output)
    lo, hi = float(s.data.min()), float(s.data.max())
    print(f"signed distances in [{lo:.2f}, {hi:.2f}] voxels -> {args.output}")
    return 0


# ------------------------------------------------------------------- fuse

def _cmd_fuse(args) -> int:
    cfg = _load_pipeline_config(args)
    masks = tuple(read_mask(p) for p in args.masks)
    names = tuple(Path(p).name for p in args.masks)
    stack = RaterStack(masks, names)
    prior = args.prior if args.prior is not None else cfg.staple.prior
    result = staple_fuse(stack, prior=prior,
                         max_iters=args.max_iters or cfg.staple.max_iters,
                         tol=args.tol or cfg.staple.tol)
    prefix = Path(args.out_prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    write_volume(result.consensus_prob, f"{prefix}_prob.nii.gz")
    write_volume(result.consensus_mask, f"{prefix}_mask.nii.gz")
    sidecar = {
        "raters": list(names),
        "sensitivities": [float(x) for x in result.sensitivities],
        "specificities": [float(x) for x in result.specificities],
        "iterations": result.iterations,
        "converged": result.converged,
    }
    Path(f"{prefix}_staple.json").write_text(json.dumps(sidecar, indent=2) + "\n")
    print(f"fused {len(masks)} raters in {result.iterations} iteration(s), "
          f"converged={result.converged}")
    return 0


# ------------------------------------------------------------------ train

def _load_pair(entry, base: Path):
    img = read_volume(base / entry["image"])
    target = read_volume(base / entry["sdt"])
    sdt_vol = SDTVolume.from_volume(target)
    img = normalize_intensities(img)
    if img.shape == target.shape:
        return img, sdt_vol
    if tuple(ceil(d / 2) for d in img.shape) == target.shape:
        return downsample2(img), sdt_vol
    raise GeometryError(
        f"image {entry['image']} shape {img.shape} matches neither the target "
        f"grid {target.shape} nor its doubled grid"
    )


def _cmd_train(args) -> int:
    cfg = _load_pipeline_config(args)
    manifest_path = Path(args.manifest)
    manifest = json.loads(manifest_path.read_text())
    if "train" not in manifest or not manifest["train"]:
        raise ConfigError(f"{manifest_path}: manifest needs a non-empty 'train' list")
    base = manifest_path.parent
    train_pairs = [_load_pair(e, base) for e in manifest["train"]]
    val_pairs = [_load_pair(e, base) for e in manifest.get("val", [])] or None

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, out / "effective_config.json")

    def log_row(row):
        print(f"epoch {row['epoch']:4d}  loss {row['train_loss']:.6f}  "
              f"val_dice {row['val_dice']:.4f}", flush=True)

    state = train(cfg.net, train_pairs, loss_cfg=cfg.loss,
                  epochs=cfg.train.epochs, lr=cfg.train.lr,
                  batch_size=cfg.train.batch, val_dataset=val_pairs,
                  log_fn=log_row if not args.quiet else None)
    save_checkpoint(state, out / "checkpoint.npz")
    write_training_report(state.history, out)
    print(f"best validation Dice {state.best_validation_dice:.4f}; "
          f"checkpoint -> {out / 'checkpoint.npz'}")
    return 0


# ------------------------------------------------------------------ infer

def _cmd_infer(args) -> int:
    state = load_checkpoint(args.checkpoint)
    vol = read_volume(args.input)
    tau = args.tau if args.tau is not None else 0.0
    mask = infer(state, vol, tau=tau)
    write_volume(mask, args.output)
    print(f"mask with {mask.count()} voxels -> {args.output}")
    return 0


# ------------------------------------------------------------ postprocess

def _cmd_postprocess(args) -> int:
    mask = read_mask(args.input)
    mask = largest_component(mask, connectivity=args.fg_connectivity)
    mask = fill_holes(mask, connectivity=args.bg_connectivity)
    write_volume(mask, args.output)
    print(f"post-processed mask ({mask.count()} voxels) -> {args.output}")
    return 0


# --------------------------------------------------------------- evaluate

def _eval_one(entry, base: Path):
    pred = read_mask(base / entry["pred"])
    ref = read_mask(base / entry["ref"])
    return entry.get("id", Path(entry["pred"]).name), evaluate_pair(pred, ref)


def _cmd_evaluate(args) -> int:
    if args.manifest:
        manifest_path = Path(args.manifest)
        entries = json.loads(manifest_path.read_text())
        if isinstance(entries, dict):
            entries = entries.get("pairs", [])
        base = manifest_path.parent
    else:
        if not args.pred or not args.ref or len(args.pred) != len(args.ref):
            raise ConfigError("evaluate needs --manifest, or matching --pred/--ref lists")
        entries = [{"id": Path(p).name, "pred": p, "ref": r}
                   for p, r in zip(args.pred, args.ref)]
        base = Path(".")
    if not entries:
        raise ConfigError("no evaluation pairs given")

    if args.workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=args.workers) as ex:
            results = list(ex.map(lambda e: _eval_one(e, base), entries))
    else:
        results = [_eval_one(e, base) for e in entries]

    rows = metrics_rows(results)
    doc = write_metrics_report(rows, args.out_dir, method=args.method)
    agg = doc["aggregate"]
    print(f"n={len(rows)}  DSC {agg['dsc_pct']['mean']:.1f}±{agg['dsc_pct']['std']:.1f}%  "
          f"ASSD {agg['assd_mm']['mean']:.2f}±{agg['assd_mm']['std']:.2f}mm  "
          f"HD95 {agg['hd95_mm']['mean']:.2f}±{agg['hd95_mm']['std']:.2f}mm")
    return 0


# ------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sdtseg",
        description="Signed-distance-transform segmentation pipeline",
        epilog=_EXIT_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"sdtseg {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    q = sub.add_parser("phantom", help="generate synthetic phantoms with ground truth")
    q.add_argument("--out-dir", required=True)
    q.add_argument("--count", type=int, default=1)
    q.add_argument("--size", type=int, default=32, help="cubic grid size (default 32)")
    q.add_argument("--spacing", type=float, nargs=3, default=(1.0, 1.0, 1.0))
    q.add_argument("--primitive", choices=("sphere", "ellipsoid", "two-blob", "mix"),
                   default="mix")
    q.add_argument("--radius-min", type=float, default=8.0)
    q.add_argument("--radius-max", type=float, default=11.0)
    q.add_argument("--fg-mean", type=float, default=0.8)
    q.add_argument("--bg-mean", type=float, default=0.2)
    q.add_argument("--noise-std", type=float, default=0.05)
    q.add_argument("--seed", type=int, default=0)
    q.set_defaults(func=_cmd_phantom)

    q = sub.add_parser("sdt", help="mask -> signed distance volume (or recover a mask)")
    q.add_argument("input")
    q.add_argument("output")
    q.add_argument("--downsample2", action="store_true",
                   help="downsample the mask by 2 before the transform")
    q.add_argument("--recover", action="store_true",
                   help="treat input as a real-valued volume and threshold it")
    q.add_argument("--tau", type=float, default=0.0, help="recovery threshold")
    q.set_defaults(func=_cmd_sdt)

    q = sub.add_parser("fuse", help="STAPLE-fuse rater masks into a consensus")
    q.add_argument("masks", nargs="+")
    q.add_argument("--out-prefix", required=True)
    q.add_argument("--prior", type=float, default=None)
    q.add_argument("--max-iters", type=int, default=None)
    q.add_argument("--tol", type=float, default=None)
    q.add_argument("--config", default=None)
    q.set_defaults(func=_cmd_fuse)

    q = sub.add_parser("train", help="train the network on (image, target SDT) pairs")
    q.add_argument("--manifest", required=True)
    q.add_argument("--out-dir", required=True)
    q.add_argument("--config", default=None)
    q.add_argument("--epochs", type=int, default=None)
    q.add_argument("--lr", type=float, default=None)
    q.add_argument("--batch", type=int, default=None)
    q.add_argument("--depth", type=int, default=None)
    q.add_argument("--channels", type=int, default=None)
    q.add_argument("--seed", type=int, default=None)
    q.add_argument("--alpha", type=float, default=None)
    q.add_argument("--beta", type=float, default=None)
    q.add_argument("--weight-source", dest="weight_source",
                   choices=("target", "prediction"), default=None)
    q.add_argument("--quiet", action="store_true")
    q.set_defaults(func=_cmd_train)

    q = sub.add_parser("infer", help="checkpoint + image -> post-processed mask")
    q.add_argument("--checkpoint", required=True)
    q.add_argument("--input", required=True)
    q.add_argument("--output", required=True)
    q.add_argument("--tau", type=float, default=None)
    q.add_argument("--config", default=None)
    q.set_defaults(func=_cmd_infer)

    q = sub.add_parser("postprocess", help="keep largest component, fill holes")
    q.add_argument("input")
    q.add_argument("output")
    q.add_argument("--fg-connectivity", type=int, choices=(6, 26), default=26)
    q.add_argument("--bg-connectivity", type=int, choices=(6, 26), default=6)
    q.set_defaults(func=_cmd_postprocess)

    q = sub.add_parser("evaluate", help="DSC/ASSD/HD95 report for mask pairs")
    q.add_argument("--manifest", default=None,
                   help="JSON list of {id, pred, ref} entries")
    q.add_argument("--pred", action="append", default=None)
    q.add_argument("--ref", action="append", default=None)
    q.add_argument("--out-dir", required=True)
    q.add_argument("--method", default="proposed")
    q.add_argument("--workers", type=int, default=1)
    q.set_defaults(func=_cmd_evaluate)

    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single exit point for exit codes
        kind = _classify(exc)
        msg = str(exc).replace("\n", " ")
        print(f"error[{kind}]: {msg}", file=sys.stderr)
        return EXIT_CODES[kind]


if __name__ == "__main__":
    sys.exit(main())
