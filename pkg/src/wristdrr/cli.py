"""Command-line entry point: ``wristdrr <subcommand> ...``.

Exit status is 0 on success, 1 if any item failed, 2 on usage or
configuration errors.  Progress goes to stderr; results go to files.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import io as wio
from .augment import AugmentConfig, apply_augmentation, derive_seed, sample_params
from .dataset import DatasetConfig, DatasetManifest, export_training_layout, generate, item_name
from .exceptions import ConfigError, IoFailure, WristDRRError
from .labelproj import LabelMask
from .metrics import evaluate
from .phantom import PhantomSpec, make_phantom
from .projection import ProjectionConfig, Radiograph, simulate_view

log = logging.getLogger("wristdrr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_help(sys.stderr)
        self.exit(2, f"\n{self.prog}: error: {message}\n")


def _load_toml(path):
    from .dataset import tomllib

    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _projection_config(path):
    if path is None:
        return ProjectionConfig()
    data = _load_toml(path)
    return ProjectionConfig.from_dict(data.get("projection", data))


def _require_file(path, what):
    if not Path(path).is_file():
        raise UsageError(f"{what} not found: {path}")


def _write_jsonl(path, rows):
    Path(path).write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))


# ---------------------------------------------------------------- commands


def cmd_phantom(args):
    _require_file(args.spec, "phantom spec")
    spec = PhantomSpec.from_json(args.spec)
    ct, labels = make_phantom(spec, args.seed)
    out = Path(args.out)
    wio.save_raw_json(ct, out / "ct.json")
    wio.save_raw_json(labels, out / "labels.json")
    log.info("wrote %s and %s", out / "ct.json", out / "labels.json")
    return 0


def cmd_simulate(args):
    _require_file(args.ct, "CT volume")
    _require_file(args.labels, "label volume")
    config = _projection_config(args.config)
    ct, labels = wio.load_pair(args.ct, args.labels)
    img, mask = simulate_view(ct, labels, args.angle, config)
    out = Path(args.out)
    name = item_name(Path(args.ct).stem, args.angle, 0)
    row = {
        "volume": Path(args.ct).stem,
        "subject": Path(args.ct).stem,
        "source": str(args.ct),
        "angle": float(args.angle),
        "copy": 0,
        "image": f"images/{name}.png",
        "mask": f"masks/{name}.png",
        "alpha": img.alpha,
        "error": None,
    }
    wio.save_image_png(img.data, out / row["image"])
    wio.save_mask_png(mask.data, out / row["mask"])
    row["image_sha256"] = wio.sha256_file(out / row["image"])
    row["mask_sha256"] = wio.sha256_file(out / row["mask"])
    _write_jsonl(out / "manifest.jsonl", [row])
    wio.write_legend(out / "legend.json")
    log.info("wrote %s", out / row["image"])
    return 0


def cmd_augment(args):
    _require_file(args.image, "image")
    _require_file(args.mask, "mask")
    config = AugmentConfig(copies_per_image=args.copies)
    img = Radiograph(wio.load_image_png(args.image), stage="resized")
    mask = LabelMask(wio.load_mask_png(args.mask))
    out = Path(args.out)
    stem = Path(args.image).stem
    rows = []
    for c in range(config.copies_per_image):
        seed = derive_seed(args.seed, stem, 0, c)
        params = sample_params(seed, config)
        a_img, a_mask = apply_augmentation(img, mask, params)
        row = {
            "volume": stem,
            "subject": stem,
            "angle": 0.0,
            "copy": c,
            "seed": seed,
            "params": params.to_dict(),
            "image": f"images/{stem}_c{c:02d}.png",
            "mask": f"masks/{stem}_c{c:02d}.png",
            "error": None,
        }
        wio.save_image_png(a_img.data, out / row["image"])
        wio.save_mask_png(a_mask.data, out / row["mask"])
        row["image_sha256"] = wio.sha256_file(out / row["image"])
        row["mask_sha256"] = wio.sha256_file(out / row["mask"])
        rows.append(row)
    _write_jsonl(out / "manifest.jsonl", rows)
    return 0


def cmd_generate(args):
    _require_file(args.config, "config")
    config, jobs = DatasetConfig.from_toml(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.out is not None:
        config = replace(config, output_dir=Path(args.out))
    jobs = args.jobs if args.jobs is not None else jobs

    def progress(done, total):
        print(f"[generate] {done}/{total} volumes", file=sys.stderr)

    log.info("generating %d items into %s with %d job(s)", config.n_items, config.output_dir, jobs)
    manifest = generate(config, jobs=jobs, resume=args.resume, progress=progress)
    failed = manifest.failed
    print(f"[generate] {len(manifest)} items, {len(failed)} failed", file=sys.stderr)
    for it in failed[:10]:
        print(f"  {it['volume']} angle={it['angle']} copy={it['copy']}: {it['error']}", file=sys.stderr)
    return 1 if failed else 0


def cmd_evaluate(args):
    _require_file(args.pred, "prediction manifest")
    _require_file(args.gt, "ground-truth manifest")
    pred = DatasetManifest.load(args.pred)
    gt = DatasetManifest.load(args.gt)

    def loader(item, side):
        m = pred if side == "pred" else gt
        return wio.load_mask_png(m.path_of(item, "mask"))

    report = evaluate(pred, gt, loader, spacing=args.spacing)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.to_csv(out)
    report.to_json(out.with_suffix(".json"))
    print(f"[evaluate] {sum(report.item_count.values())} items in {len(report.bins)} bins -> {out}",
          file=sys.stderr)
    return 0


def cmd_export(args):
    _require_file(args.manifest, "manifest")
    manifest = DatasetManifest.load(args.manifest)
    export_training_layout(manifest, args.out, args.layout)
    print(f"[export] {len(manifest) - len(manifest.failed)} pairs -> {args.out}", file=sys.stderr)
    return 0


def build_parser():
    parser = _Parser(prog="wristdrr", description="Simulate radiographs and bone masks from CT volumes.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("phantom", help="voxelize a phantom spec to raw+json volumes")
    p.add_argument("--spec", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_phantom)

    p = sub.add_parser("simulate", help="simulate one view of one volume")
    p.add_argument("--in", dest="ct", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--angle", type=float, default=0.0)
    p.add_argument("--config", default=None, help="TOML with a [projection] table")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("augment", help="augment one image/mask pair")
    p.add_argument("--image", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--copies", type=int, default=7)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("generate", help="generate a dataset from a TOML config")
    p.add_argument("--config", required=True)
    p.add_argument("--jobs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None, help="override output_dir")
    p.add_argument("--resume", action="store_true")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("evaluate", help="Dice/ASD report from two manifests")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--spacing", type=float, default=None, help="mm per pixel")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("export", help="copy a dataset into a trainer folder layout")
    p.add_argument("--manifest", required=True)
    p.add_argument("--layout", default="paired-folders", choices=["paired-folders"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"wristdrr {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except WristDRRError as exc:
        print(f"wristdrr {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
