"""Per-bone Dice and average surface distance with angle-pooled reporting."""
from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .exceptions import DimensionMismatch, EmptyRegion, PairingMismatch
from .volume import BONE_NAMES

BONE_LABELS = tuple(BONE_NAMES)
_FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)


def _as_array(mask):
    return np.asarray(getattr(mask, "data", mask))


def _pair(pred, gt):
    p, g = _as_array(pred), _as_array(gt)
    if p.shape != g.shape:
        raise DimensionMismatch(f"prediction {p.shape} and ground truth {g.shape} differ")
    return p, g


def dice(pred, gt, label):
    """Dice overlap for one class; 1.0 when both masks lack the label."""
    p, g = _pair(pred, gt)
    p, g = p == label, g == label
    total = int(p.sum()) + int(g.sum())
    if total == 0:
        return 1.0
    return 2.0 * int(np.logical_and(p, g).sum()) / total


def boundary(region):
    """Foreground pixels with a 4-neighbour outside the region (or the image)."""
    # border_value=0 treats pixels beyond the image edge as background
    interior = ndimage.binary_erosion(region, structure=_FOUR_CONNECTED, border_value=0)
    return region & ~interior


def _directed_mean(src_edge, dst_edge, sampling):
    dist = ndimage.distance_transform_edt(~dst_edge, sampling=sampling)
    return float(dist[src_edge].mean())


def asd(pred, gt, label, spacing=None):
    """Symmetric average surface distance between the label's boundaries.

    Mean nearest-boundary distance from prediction to ground truth, averaged
    with the reverse direction.  ``spacing`` (scalar or (row, col) mm per
    pixel) converts pixels to mm.  Raises EmptyRegion when the label is
    missing from either mask.
    """
    p, g = _pair(pred, gt)
    p, g = p == label, g == label
    if not p.any() or not g.any():
        raise EmptyRegion(f"label {label} absent from {'prediction' if not p.any() else 'ground truth'}")
    if spacing is None:
        sampling = (1.0, 1.0)
    else:
        sampling = tuple(np.broadcast_to(np.asarray(spacing, dtype=float), (2,)))
    bp, bg = boundary(p), boundary(g)
    return 0.5 * (_directed_mean(bp, bg, sampling) + _directed_mean(bg, bp, sampling))


def score_pair(pred, gt, labels=BONE_LABELS, spacing=None):
    """Per-label (dice, asd) for one item; labels absent from both masks are skipped.

    ASD is NaN when the label is missing from exactly one mask.
    """
    p, g = _pair(pred, gt)
    present = set(np.unique(p).tolist()) | set(np.unique(g).tolist())
    out = {}
    for label in labels:
        if label not in present:
            continue
        try:
            d = asd(p, g, label, spacing)
        except EmptyRegion:
            d = math.nan
        out[label] = (dice(p, g, label), d)
    return out


def angle_bin(angle):
    """Pool signed view angles: -30 and +30 share the 30 bin."""
    a = abs(float(angle))
    return int(a) if a == int(a) else a


@dataclass
class MetricsReport:
    bins: list
    dice: dict = field(default_factory=dict)
    asd: dict = field(default_factory=dict)
    dice_count: dict = field(default_factory=dict)
    asd_count: dict = field(default_factory=dict)
    item_count: dict = field(default_factory=dict)
    unit: str = "pixel"
    labels: tuple = BONE_LABELS

    def average(self, metric, b):
        table = getattr(self, metric)
        vals = [table[(lab, b)] for lab in self.labels if (lab, b) in table and not math.isnan(table[(lab, b)])]
        return float(np.mean(vals)) if vals else math.nan

    def rows(self, metric):
        """Table rows: one per bone in label order, then the cross-bone average."""
        table = getattr(self, metric)
        out = []
        for lab in self.labels:
            out.append((BONE_NAMES[lab], [table.get((lab, b), math.nan) for b in self.bins]))
        out.append(("Average", [self.average(metric, b) for b in self.bins]))
        return out

    def to_csv(self, path=None, digits=4):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", "bone"] + [f"{b}deg" for b in self.bins])
        for metric, name in (("dice", "Dice"), ("asd", f"ASD ({self.unit})")):
            for bone, values in self.rows(metric):
                writer.writerow([name, bone] + ["" if math.isnan(v) else f"{v:.{digits}f}" for v in values])
        writer.writerow(["items", "count"] + [self.item_count.get(b, 0) for b in self.bins])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_dict(self):
        def table(metric, counts):
            t = getattr(self, metric)
            c = getattr(self, counts)
            return {
                BONE_NAMES[lab]: {
                    str(b): {"mean": _none_if_nan(t.get((lab, b), math.nan)), "n": c.get((lab, b), 0)}
                    for b in self.bins
                }
                for lab in self.labels
            }

        return {
            "unit": self.unit,
            "bins": list(self.bins),
            "items_per_bin": {str(b): self.item_count.get(b, 0) for b in self.bins},
            "dice": table("dice", "dice_count"),
            "asd": table("asd", "asd_count"),
            "average": {
                "dice": {str(b): _none_if_nan(self.average("dice", b)) for b in self.bins},
                "asd": {str(b): _none_if_nan(self.average("asd", b)) for b in self.bins},
            },
        }

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _none_if_nan(v):
    return None if math.isnan(v) else v


def evaluate_masks(items, labels=BONE_LABELS, spacing=None, bins=None):
    """Aggregate ``(angle, pred, gt)`` triples into an angle-pooled report.

    Bins default to the pooled angles present in ``items``.
    """
    dice_vals = defaultdict(list)
    asd_vals = defaultdict(list)
    item_count = defaultdict(int)
    for angle, pred, gt in items:
        b = angle_bin(angle)
        item_count[b] += 1
        for label, (d, s) in score_pair(pred, gt, labels, spacing).items():
            dice_vals[(label, b)].append(d)
            if not math.isnan(s):
                asd_vals[(label, b)].append(s)
    if bins is None:
        bins = sorted(item_count)
    report = MetricsReport(
        bins=list(bins),
        unit="pixel" if spacing is None else "mm",
        labels=tuple(labels),
        item_count=dict(item_count),
    )
    for key, vals in dice_vals.items():
        report.dice[key] = float(np.mean(vals))
        report.dice_count[key] = len(vals)
    for key, vals in asd_vals.items():
        report.asd[key] = float(np.mean(vals))
        report.asd_count[key] = len(vals)
    return report


def item_key(item):
    return (item["volume"], float(item["angle"]), int(item["copy"]))


def pair_manifests(pred_items, gt_items):
    """Match prediction and ground-truth manifest rows by (volume, angle, copy)."""
    pred = {}
    for it in pred_items:
        k = item_key(it)
        if k in pred:
            raise PairingMismatch(f"duplicate prediction key {k}")
        pred[k] = it
    gt = {}
    for it in gt_items:
        k = item_key(it)
        if k in gt:
            raise PairingMismatch(f"duplicate ground-truth key {k}")
        gt[k] = it
    if pred.keys() != gt.keys():
        missing = sorted(gt.keys() - pred.keys())[:3]
        extra = sorted(pred.keys() - gt.keys())[:3]
        raise PairingMismatch(f"manifest keys differ; missing {missing}, unexpected {extra}")
    return [(pred[k], gt[k]) for k in sorted(gt)]


def evaluate(pred_manifest, gt_manifest, loader, labels=BONE_LABELS, spacing=None):
    """Score paired manifests; ``loader(item, side)`` returns a 2D mask array.

    ``side`` is ``"pred"`` or ``"gt"``.  Rows with a recorded error are paired
    but skipped.
    """
    pairs = pair_manifests(pred_manifest, gt_manifest)

    def triples():
        for p, g in pairs:
            if p.get("error") or g.get("error"):
                continue
            yield g["angle"], loader(p, "pred"), loader(g, "gt")

    return evaluate_masks(triples(), labels, spacing)
