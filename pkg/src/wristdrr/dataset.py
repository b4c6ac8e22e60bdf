"""End-to-end dataset generation: volumes x view angles x augmentation copies.

Every item is a pure function of (config, volume, angle, copy), so the manifest
and the file tree are identical for any worker count or completion order.
"""
from __future__ import annotations

import json
import logging
import shutil
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .augment import AugmentConfig, apply_augmentation, derive_seed, sample_params
from .exceptions import ConfigError, IoFailure
from .io import legend, load_pair, save_image_png, save_mask_png, sha256_file
from .phantom import wrist_phantom
from .projection import ProjectionConfig, simulate_view
from .volume import BONE_NAMES, resample_isotropic, resample_labels

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"


@dataclass(frozen=True)
class VolumeSource:
    """One CT scan: either files on disk or a seeded synthetic phantom."""

    volume_id: str
    subject: str
    split: str = "train"
    ct: str | None = None
    labels: str | None = None
    format: str | None = None
    phantom_seed: int | None = None
    phantom_dims: tuple = (64, 64, 64)
    phantom_spacing: tuple = (0.5, 0.5, 0.5)

    def __post_init__(self):
        if self.phantom_seed is None and (self.ct is None or self.labels is None):
            raise ConfigError(f"volume {self.volume_id!r} needs ct and labels paths or a phantom_seed")
        object.__setattr__(self, "phantom_dims", tuple(int(d) for d in self.phantom_dims))
        object.__setattr__(self, "phantom_spacing", tuple(float(s) for s in self.phantom_spacing))

    @property
    def source(self):
        if self.phantom_seed is not None:
            return f"phantom:seed={self.phantom_seed}"
        return str(self.ct)

    def load(self):
        if self.phantom_seed is not None:
            return wrist_phantom(self.phantom_seed, self.phantom_dims, self.phantom_spacing)
        return load_pair(self.ct, self.labels, self.format)


@dataclass
class DatasetConfig:
    volumes: list
    output_dir: str | Path = "dataset"
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    seed: int = 0
    resample_mm: float | None = None

    def __post_init__(self):
        self.volumes = [v if isinstance(v, VolumeSource) else VolumeSource(**v) for v in self.volumes]
        ids = [v.volume_id for v in self.volumes]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ConfigError(f"duplicate volume ids: {dupes}")
        split_of = {}
        for v in self.volumes:
            if split_of.setdefault(v.subject, v.split) != v.split:
                raise ConfigError(f"subject {v.subject!r} appears in more than one split")
        self.output_dir = Path(self.output_dir)

    @property
    def n_items(self):
        return len(self.volumes) * len(self.projection.view_angles) * self.augment.copies_per_image

    @classmethod
    def from_dict(cls, d, base_dir="."):
        d = dict(d)
        base = Path(base_dir)
        vols = []
        for v in d.pop("volumes", []):
            v = dict(v)
            v.setdefault("volume_id", v.pop("id", None))
            for key in ("ct", "labels"):
                if v.get(key) is not None:
                    v[key] = str(base / v[key])
            vols.append(VolumeSource(**v))
        synth = d.pop("synthetic", None)
        if synth:
            vols.extend(synthetic_sources(**synth))
        if not vols:
            raise ConfigError("dataset config lists no volumes")
        proj = ProjectionConfig.from_dict(d.pop("projection", {}))
        aug = AugmentConfig.from_dict(d.pop("augment", {}))
        out = d.pop("output_dir", "dataset")
        d.pop("jobs", None)
        return cls(vols, base / out, proj, aug, **d)

    @classmethod
    def from_toml(cls, path):
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                data = tomllib.load(fh)
        except OSError as exc:
            raise IoFailure(f"cannot read {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        jobs = data.get("jobs", 1)
        cfg = cls.from_dict(data, base_dir=path.parent)
        return cfg, jobs


def synthetic_sources(count, subjects=None, dims=(64, 64, 64), spacing=(0.5, 0.5, 0.5),
                      split="train", seed_offset=0, prefix="phantom"):
    """``count`` seeded phantom volumes spread round-robin over ``subjects``."""
    subjects = subjects or count
    return [
        VolumeSource(
            volume_id=f"{prefix}{i:03d}",
            subject=f"{prefix}-s{i % subjects:02d}",
            split=split,
            phantom_seed=seed_offset + i,
            phantom_dims=tuple(dims),
            phantom_spacing=tuple(spacing),
        )
        for i in range(count)
    ]


def format_angle(angle):
    a = float(angle)
    if a == int(a):
        return f"{int(a):+04d}"
    return f"{a:+08.3f}".replace(".", "p")


def item_name(volume_id, angle, copy):
    return f"{volume_id}_a{format_angle(angle)}_c{copy:02d}"


@dataclass
class DatasetManifest:
    items: list
    root: Path = Path(".")

    def __len__(self):
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @property
    def failed(self):
        return [it for it in self.items if it.get("error")]

    def path_of(self, item, key):
        return self.root / item[key]

    def dumps(self):
        return "".join(json.dumps(it, sort_keys=True) + "\n" for it in self.items)

    def save(self, path=None):
        path = Path(path) if path else self.root / MANIFEST_NAME
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(self.dumps())
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc
        return path

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            lines = path.read_text().splitlines()
        except OSError as exc:
            raise IoFailure(f"cannot read {path}: {exc}") from exc
        return cls([json.loads(line) for line in lines if line.strip()], path.parent)


def _sort_key(item):
    return (item["subject"], item["volume"], float(item["angle"]), int(item["copy"]))


def _valid_existing(item, root):
    if item.get("error"):
        return False
    for key in ("image", "mask"):
        p = root / item[key]
        if not p.is_file() or sha256_file(p) != item[f"{key}_sha256"]:
            return False
    return True


def _run_volume(task):
    """Generate every (angle, copy) item of one volume; never raises."""
    vol_src, config, existing = task
    root = config.output_dir
    angles = config.projection.view_angles
    copies = config.augment.copies_per_image
    rows = []

    def base_row(ai, angle, c):
        name = item_name(vol_src.volume_id, angle, c)
        return {
            "volume": vol_src.volume_id,
            "subject": vol_src.subject,
            "split": vol_src.split,
            "source": vol_src.source,
            "angle": float(angle),
            "angle_index": ai,
            "copy": c,
            "seed": derive_seed(config.seed, vol_src.volume_id, ai, c),
            "image": f"images/{name}.png",
            "mask": f"masks/{name}.png",
            "error": None,
        }

    todo = []
    for ai, angle in enumerate(angles):
        for c in range(copies):
            key = (vol_src.volume_id, float(angle), c)
            if key in existing:
                rows.append(existing[key])
            else:
                todo.append((ai, angle, c))
    if not todo:
        return rows

    try:
        ct, labels = vol_src.load()
        if config.resample_mm:
            ct = resample_isotropic(ct, config.resample_mm)
            labels = resample_labels(labels, config.resample_mm)
    except Exception as exc:  # recorded per item, generation continues
        for ai, angle, c in todo:
            row = base_row(ai, angle, c)
            row["error"] = f"load: {type(exc).__name__}: {exc}"
            rows.append(row)
        return rows

    view_cache = {}
    for ai, angle, c in todo:
        row = base_row(ai, angle, c)
        try:
            if ai not in view_cache:
                view_cache.clear()
                view_cache[ai] = simulate_view(ct, labels, angle, config.projection)
            img, mask = view_cache[ai]
            params = sample_params(row["seed"], config.augment)
            row["params"] = params.to_dict()
            aug_img, aug_mask = apply_augmentation(img, mask, params)
            save_image_png(aug_img.data, root / row["image"])
            save_mask_png(aug_mask.data, root / row["mask"])
            row["image_sha256"] = sha256_file(root / row["image"])
            row["mask_sha256"] = sha256_file(root / row["mask"])
        except Exception as exc:  # recorded per item, generation continues
            row["error"] = f"{type(exc).__name__}: {exc}"
        rows.append(row)
    return rows


def generate(config, jobs=1, resume=False, progress=None):
    """Produce every item of ``config`` and write ``manifest.jsonl``.

    With ``resume`` set, items already in the manifest whose files still
    match their checksums are kept instead of regenerated.
    """
    root = Path(config.output_dir)
    try:
        (root / "images").mkdir(parents=True, exist_ok=True)
        (root / "masks").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {root}: {exc}") from exc

    existing = {}
    manifest_path = root / MANIFEST_NAME
    if resume and manifest_path.is_file():
        for item in DatasetManifest.load(manifest_path):
            if _valid_existing(item, root):
                existing[(item["volume"], float(item["angle"]), int(item["copy"]))] = item
        log.info("resume: reusing %d verified item(s)", len(existing))

    tasks = []
    for v in config.volumes:
        mine = {k: it for k, it in existing.items() if k[0] == v.volume_id}
        tasks.append((v, config, mine))

    results = []
    if jobs <= 1:
        for i, t in enumerate(tasks):
            results.extend(_run_volume(t))
            if progress:
                progress(i + 1, len(tasks))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for i, rows in enumerate(pool.map(_run_volume, tasks)):
                results.extend(rows)
                if progress:
                    progress(i + 1, len(tasks))

    results.sort(key=_sort_key)
    manifest = DatasetManifest(results, root)
    manifest.save(manifest_path)
    (root / "legend.json").write_text(json.dumps(legend(), indent=2) + "\n")
    return manifest


def plan(config):
    """(volume_id, angle, copy) keys ``generate`` would emit, in manifest order."""
    keys = [
        (v.subject, v.volume_id, float(a), c)
        for v in config.volumes
        for a in config.projection.view_angles
        for c in range(config.augment.copies_per_image)
    ]
    keys.sort()
    return [k[1:] for k in keys]


def export_training_layout(manifest, out_dir, layout="paired-folders"):
    """Copy manifest items into ``images/`` + ``labels/`` with identical names.

    Writes ``dataset.json`` listing class IDs, names and the item pairs.
    Items with an error are left out.
    """
    if layout != "paired-folders":
        raise ValueError(f"unknown layout {layout!r}")
    out = Path(out_dir)
    entries = []
    try:
        (out / "images").mkdir(parents=True, exist_ok=True)
        (out / "labels").mkdir(parents=True, exist_ok=True)
        for item in manifest:
            if item.get("error"):
                continue
            name = Path(item["image"]).name
            shutil.copyfile(manifest.path_of(item, "image"), out / "images" / name)
            shutil.copyfile(manifest.path_of(item, "mask"), out / "labels" / name)
            entries.append({
                "image": f"images/{name}",
                "label": f"labels/{name}",
                "split": item.get("split", "train"),
                "angle": item["angle"],
                "subject": item["subject"],
            })
        descriptor = {
            "channel_names": {"0": "X-ray"},
            "labels": {"background": 0, **{name: lab for lab, name in BONE_NAMES.items()}},
            "file_ending": ".png",
            "numTraining": sum(e["split"] == "train" for e in entries),
            "numTest": sum(e["split"] == "test" for e in entries),
            "items": entries,
        }
        (out / "dataset.json").write_text(json.dumps(descriptor, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoFailure(f"export to {out} failed: {exc}") from exc
    return out
