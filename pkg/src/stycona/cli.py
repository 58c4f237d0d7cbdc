"""Command-line entry point: ``stycona <subcommand> ...``.

Exit status is 0 on success, 1 for usage errors (bad flags, mismatched
inputs, malformed config) and 2 for runtime failures (I/O, corrupt files,
numerical failure).
"""

from __future__ import annotations

import argparse
import os
import shutil
import sys
from pathlib import Path

import numpy as np

from . import imagio
from .augmentation import AugmentConfig, augment_batch, write_records
from .decomposition import content_maps, decompose, style_swap
from .errors import InvalidInput, StyconaError
from .metrics import asd, dsc, format_value, histogram_distance, segmentation_report, style_shift

DEFAULT_T = 16
DEFAULT_SIZE = 256


class UsageError(Exception):
    pass


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    def _get_help_string(self, action):
        if action.default is None or action.default is False:
            return action.help
        return super()._get_help_string(action)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _size(text: str):
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError("size must be >= 0")
    return n


def _target(size: int):
    return None if size == 0 else (size, size)


def _seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("STYCONA_SEED")
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"STYCONA_SEED must be an integer, got {env!r}") from None


def _viewable(m: np.ndarray) -> np.ndarray:
    lo, hi = float(m.min()), float(m.max())
    if hi - lo <= 0:
        return np.zeros_like(m)
    return (m - lo) / (hi - lo)


def cmd_decompose(args) -> int:
    img = imagio.load_image(args.input, _target(args.size))
    if not 0 <= args.channel < img.shape[0]:
        raise UsageError(f"--channel {args.channel} out of range for {img.shape[0]} channel(s)")
    if args.top_k < 0:
        raise UsageError("--top-k must be >= 0")
    sc = decompose(img)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    f = sc.factors[args.channel]
    top = min(args.top_k, f.k)
    for r, m in enumerate(content_maps(sc, args.channel, range(top))):
        imagio.save_image(_viewable(m)[None], out / f"map_{r:03d}.png")
    (out / "style_code.csv").write_text(",".join(f"{s:.9g}" for s in f.sigma) + "\n", encoding="utf-8")
    if args.tensor:
        maps = np.stack(content_maps(sc, args.channel, range(f.k)))
        imagio.save_tensor(maps, out / "content_maps.styc", dtype="float64")
    print(f"R {f.rank()}")
    return 0


def cmd_style_swap(args) -> int:
    a = imagio.load_image(args.a, _target(args.size))
    b = imagio.load_image(args.b, _target(args.size))
    if a.shape != b.shape:
        raise UsageError(f"images differ in shape: {a.shape} vs {b.shape}")
    out_a, out_b = style_swap(a, b)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    imagio.save_image(out_a, out / "a_with_b_style.png")
    imagio.save_image(out_b, out / "b_with_a_style.png")
    return 0


def _weight(text: str | None, fallback):
    if text is None:
        return fallback
    parts = [float(p) for p in text.split(",")]
    if len(parts) == 1:
        return parts[0]
    if len(parts) == 2:
        return (parts[0], parts[1])
    raise UsageError(f"expected a value or 'low,high', got {text!r}")


def cmd_augment(args) -> int:
    src_root = Path(args.input_dir)
    paths = imagio.scan_images(src_root)
    if len(paths) < 2:
        raise UsageError(f"need at least 2 images under {src_root}, found {len(paths)}")
    try:
        cfg = AugmentConfig(
            t=args.t,
            alpha=_weight(args.alpha, (0.0, 1.0)),
            beta=_weight(args.beta, (0.0, 1.0)),
            apply_prob=args.apply_prob,
            uv_choice=args.uv_choice,
            index_mode=args.index_mode,
            seed=_seed(args),
        )
    except InvalidInput as exc:
        raise UsageError(str(exc)) from exc
    raws = [imagio.read_raw(p) for p in paths]
    images = [imagio.load_image(p, _target(args.size)) for p in paths]
    shapes = {x.shape for x in images}
    if len(shapes) != 1:
        raise UsageError(f"images differ in shape {sorted(shapes)}; pass --size to resize")

    out_root = Path(args.out_dir)
    records = []
    for p, (raw, bits), (img, rec) in zip(paths, raws, augment_batch(images, cfg, workers=args.workers)):
        rel = p.relative_to(src_root)
        dest = out_root / rel
        dest.parent.mkdir(parents=True, exist_ok=True)
        rec.source = rel.as_posix()
        records.append(rec)
        if not rec.applied:
            shutil.copyfile(p, dest)
            continue
        # back to the native grid so masks copied alongside stay aligned
        if img.shape[1:] != raw.shape[1:]:
            img = np.clip(imagio.resize_bilinear(img, raw.shape[1:]), 0.0, 1.0)
        imagio.save_image(img, dest, bits=bits)
    for dirpath, _, files in os.walk(src_root):
        for name in files:
            p = Path(dirpath) / name
            if p.suffix.lower() in imagio.IMAGE_SUFFIXES and imagio.is_mask_path(p):
                dest = out_root / p.relative_to(src_root)
                dest.parent.mkdir(parents=True, exist_ok=True)
                shutil.copyfile(p, dest)
    rec_path = Path(args.records) if args.records else out_root / "augment_records.jsonl"
    rec_path.parent.mkdir(parents=True, exist_ok=True)
    write_records(records, rec_path)
    applied = sum(r.applied for r in records)
    print(f"augmented {applied} of {len(records)} images (t={cfg.t}, seed={cfg.seed})")
    return 0


def cmd_metrics(args) -> int:
    kind = args.kind
    if kind in ("dsc", "asd"):
        pred = imagio.load_mask(args.first)
        gt = imagio.load_mask(args.second)
        if pred.shape != gt.shape:
            raise UsageError(f"masks differ in shape: {pred.shape} vs {gt.shape}")
        if args.cls is not None:
            value = (dsc if kind == "dsc" else asd)(pred, gt, args.cls)
        else:
            n = int(max(pred.max(initial=0), gt.max(initial=0))) + 1
            rep = segmentation_report(pred, gt, max(n, 2))
            value = rep.mean_dsc if kind == "dsc" else rep.mean_asd
        print(f"{kind.upper()} {format_value(value, 2)}")
        return 0
    a = imagio.load_image(args.first, _target(args.size))
    b = imagio.load_image(args.second, _target(args.size))
    if kind == "hist":
        if a.shape[0] != b.shape[0]:
            raise UsageError("images differ in channel count")
        print(f"{histogram_distance(a, b, bins=args.bins):.6f}")
    else:
        if a.shape != b.shape:
            raise UsageError(f"images differ in shape: {a.shape} vs {b.shape}")
        print(f"{style_shift(a, b):.6f}")
    return 0


def cmd_bench(args) -> int:
    from .deskbench import default_config_path, load_config, run_matrix

    path = Path(args.config) if args.config else default_config_path()
    if not path.is_file():
        raise imagio.ImageIOError(f"config file not found: {path}")
    cfg = load_config(path)
    report = run_matrix(cfg, out_dir=args.out_dir, workers=args.workers)
    print(report["table"], end="")
    print(f"report written to {Path(args.out_dir) / 'report.json'} ({report['seconds']:.1f} s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    fmt = _HelpFormatter
    parser = _Parser(prog="stycona", description="SVD style/content decomposition and augmentation.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def size_flag(p):
        p.add_argument("--size", type=_size, default=DEFAULT_SIZE,
                       help="resize inputs to SIZE x SIZE (bilinear) before processing; 0 keeps native size")

    p = sub.add_parser("decompose", formatter_class=fmt, help="write content maps and the style code of an image")
    p.add_argument("--input", required=True, help="PNG or PGM image")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--top-k", type=int, default=8, help="number of leading content maps to export as PNG")
    p.add_argument("--channel", type=int, default=0, help="channel whose maps are exported")
    p.add_argument("--tensor", action="store_true",
                   help="also write all scaled content maps to content_maps.styc (float64)")
    size_flag(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("style-swap", formatter_class=fmt, help="exchange the style codes of two images")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out-dir", required=True)
    size_flag(p)
    p.set_defaults(func=cmd_style_swap)

    p = sub.add_parser("augment", formatter_class=fmt, help="StyCona-augment every image in a directory tree")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--t", type=int, default=DEFAULT_T, help="number of perturbed content maps")
    p.add_argument("--apply-prob", type=float, default=0.5, help="probability that an image is augmented")
    p.add_argument("--seed", type=int, default=None, help="master seed (falls back to $STYCONA_SEED, then 0)")
    p.add_argument("--alpha", default=None, help="fixed style weight or 'low,high' range (default 0,1)")
    p.add_argument("--beta", default=None, help="fixed content weight or 'low,high' range (default 0,1)")
    p.add_argument("--uv-choice", default="coin", choices=["coin", "left", "right", "both"],
                   help="which singular vectors are mixed per selected index")
    p.add_argument("--index-mode", default="shared", choices=["shared", "independent"],
                   help="draw one index set for both images or one each")
    p.add_argument("--records", default=None, help="record log path (default OUT_DIR/augment_records.jsonl)")
    p.add_argument("--workers", type=int, default=1, help="worker threads; output does not depend on it")
    size_flag(p)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("metrics", formatter_class=fmt, help="segmentation metrics and domain-shift proxies")
    p.add_argument("kind", choices=["dsc", "asd", "hist", "style-shift"])
    p.add_argument("first", help="prediction mask (dsc/asd) or first image")
    p.add_argument("second", help="ground-truth mask (dsc/asd) or second image")
    p.add_argument("--class", dest="cls", type=int, default=None,
                   help="class label for dsc/asd; default averages all foreground classes")
    p.add_argument("--bins", type=int, default=64, help="histogram bins for hist")
    size_flag(p)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench", formatter_class=fmt, help="run the desk-scale ablation benchmark")
    p.add_argument("--config", default=None, help="experiment JSON (default: the frozen packaged config)")
    p.add_argument("--out-dir", default="bench_out", help="where report.json and report.txt go")
    p.add_argument("--workers", type=int, default=1, help="parallel (arm, seed) processes")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, InvalidInput) as exc:
        print(f"stycona {args.command}: error: {exc}", file=sys.stderr)
        return 1
    except (StyconaError, OSError) as exc:
        print(f"stycona {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
