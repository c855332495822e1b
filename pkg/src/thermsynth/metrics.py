"""Detection metrics: IoU, greedy matching, COCO-style AP, mAP50 and mAP50-95."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataset_io import Annotation, AnnotationSet, read_label_file
from .errors import DataError
from .geometry import ccw, clip_convex, polygon_area

COCO_IOU_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
_RECALL_POINTS = np.arange(101) / 100.0


def iou_aabb(a, b) -> float:
    """IoU of two ``(cx, cy, w, h)`` boxes."""
    ax0, ax1 = a[0] - a[2] / 2, a[0] + a[2] / 2
    ay0, ay1 = a[1] - a[3] / 2, a[1] + a[3] / 2
    bx0, bx1 = b[0] - b[2] / 2, b[0] + b[2] / 2
    by0, by1 = b[1] - b[3] / 2, b[1] + b[3] / 2
    iw = min(ax1, bx1) - max(ax0, bx0)
    ih = min(ay1, by1) - max(ay0, by0)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = a[2] * a[3] + b[2] * b[3] - inter
    return inter / union if union > 0 else 0.0


def _corners(box) -> np.ndarray:
    c = getattr(box, "corners", box)
    return ccw(np.asarray(c, dtype=np.float64).reshape(-1, 2))


def iou_obb(a, b) -> float:
    """IoU of two convex quadrilaterals (``OrientedBox`` or 4x2 corners)."""
    pa, pb = _corners(a), _corners(b)
    inter_poly = clip_convex(pa, pb)
    inter = polygon_area(inter_poly) if len(inter_poly) >= 3 else 0.0
    union = polygon_area(pa) + polygon_area(pb) - inter
    return inter / union if union > 0 else 0.0


def _geometry(ann: Annotation, geometry: str):
    if geometry == "aabb":
        return ann.bounding_aabb()
    if ann.obb is not None:
        return ann.obb
    cx, cy, w, h = ann.bounding_aabb()
    return ((cx - w / 2, cy - h / 2), (cx + w / 2, cy - h / 2), (cx + w / 2, cy + h / 2), (cx - w / 2, cy + h / 2))


def _iou_fn(geometry: str):
    if geometry not in ("aabb", "obb"):
        raise ValueError(f"unknown geometry {geometry!r}")
    return iou_aabb if geometry == "aabb" else iou_obb


def _sorted_predictions(preds: Mapping[str, AnnotationSet], class_id: int):
    items = []
    for image_id in sorted(preds):
        for idx, p in enumerate(preds[image_id]):
            if p.class_id != class_id:
                continue
            if p.confidence is None:
                raise DataError(f"{image_id}: prediction {idx} has no confidence")
            items.append((-p.confidence, image_id, idx, p))
    items.sort(key=lambda t: (t[0], t[1], t[2]))
    return items


def match_predictions(
    gts: Mapping[str, AnnotationSet],
    preds: Mapping[str, AnnotationSet],
    iou_threshold: float,
    class_id: int,
    geometry: str = "aabb",
) -> tuple[list[tuple[float, bool]], int]:
    """Greedy confidence-ordered matching for one class.

    Each prediction claims the still-unmatched ground truth of its class with
    the highest IoU, if that IoU reaches ``iou_threshold``. Returns
    ``[(confidence, is_true_positive), ...]`` in descending confidence and the
    ground-truth count.
    """
    iou = _iou_fn(geometry)
    gt_by_image = {
        k: [_geometry(a, geometry) for a in v if a.class_id == class_id] for k, v in gts.items()
    }
    gt_count = sum(len(v) for v in gt_by_image.values())
    taken = {k: np.zeros(len(v), dtype=bool) for k, v in gt_by_image.items()}
    out = []
    for neg_conf, image_id, _, p in _sorted_predictions(preds, class_id):
        cands = gt_by_image.get(image_id, [])
        best, best_j = -1.0, -1
        pg = _geometry(p, geometry)
        for j, g in enumerate(cands):
            if taken[image_id][j]:
                continue
            v = iou(pg, g)
            if v > best:
                best, best_j = v, j
        if best_j >= 0 and best >= iou_threshold:
            taken[image_id][best_j] = True
            out.append((-neg_conf, True))
        else:
            out.append((-neg_conf, False))
    return out, gt_count


def _pr_curve(matches: Sequence[tuple[float, bool]], gt_count: int):
    order = sorted(range(len(matches)), key=lambda i: -matches[i][0])
    tp = np.array([matches[i][1] for i in order], dtype=np.float64)
    ctp = np.cumsum(tp)
    cfp = np.cumsum(1.0 - tp)
    recall = ctp / gt_count if gt_count else np.zeros_like(ctp)
    precision = ctp / np.maximum(ctp + cfp, 1e-300)
    return precision, recall


def average_precision(matches: Sequence[tuple[float, bool]], gt_count: int) -> float | None:
    """101-point interpolated AP; None when there is no ground truth."""
    if gt_count <= 0:
        return None
    if not matches:
        return 0.0
    precision, recall = _pr_curve(matches, gt_count)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    idx = np.searchsorted(recall, _RECALL_POINTS, side="left")
    sampled = np.where(idx < len(envelope), envelope[np.minimum(idx, len(envelope) - 1)], 0.0)
    return float(sampled.mean())


def f1_operating_point(matches: Sequence[tuple[float, bool]], gt_count: int) -> tuple[float, float, float]:
    """(precision, recall, confidence) at the cutoff with maximal F1."""
    if not matches or gt_count <= 0:
        return 0.0, 0.0, 0.0
    precision, recall = _pr_curve(matches, gt_count)
    f1 = 2 * precision * recall / np.maximum(precision + recall, 1e-300)
    k = int(np.argmax(f1))
    confs = sorted((m[0] for m in matches), reverse=True)
    return float(precision[k]), float(recall[k]), float(confs[k])


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    ap50: float
    ap50_95: float
    gt_count: int = 0
    image_count: int = 0


@dataclass
class EvalReport:
    per_class: dict[int, ClassMetrics] = field(default_factory=dict)
    overall: ClassMetrics | None = None
    image_count: int = 0
    iou_thresholds: tuple[float, ...] = COCO_IOU_THRESHOLDS

    def to_dict(self) -> dict:
        return {
            "image_count": self.image_count,
            "iou_thresholds": list(self.iou_thresholds),
            "overall": asdict(self.overall) if self.overall else None,
            "per_class": {str(k): asdict(v) for k, v in sorted(self.per_class.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def table(self, class_names: Mapping[int, str] | None = None) -> str:
        names = class_names or {}
        head = f"{'Class':>14} {'Images':>8} {'Instances':>10} {'P':>7} {'R':>7} {'mAP50':>7} {'mAP50-95':>9}"
        lines = [head]

        def row(name, m: ClassMetrics):
            return (f"{name:>14} {m.image_count:>8d} {m.gt_count:>10d} {m.precision:>7.3f} {m.recall:>7.3f}"
                    f" {m.ap50:>7.3f} {m.ap50_95:>9.3f}")

        if self.overall is not None:
            lines.append(row("all", self.overall))
        for cid, m in sorted(self.per_class.items()):
            lines.append(row(names.get(cid, str(cid)), m))
        return "\n".join(lines)


def evaluate_sets(
    gts: Mapping[str, AnnotationSet],
    preds: Mapping[str, AnnotationSet],
    iou_thresholds: Sequence[float] = COCO_IOU_THRESHOLDS,
    primary_iou: float = 0.5,
    geometry: str = "aabb",
) -> EvalReport:
    """Per-class P/R/AP over in-memory label sets keyed by image id.

    P and R are taken at the F1-optimal confidence on the ``primary_iou``
    curve; ``ap50`` is AP at ``primary_iou`` and ``ap50_95`` the mean AP
    over ``iou_thresholds``. Images with predictions but no ground truth
    only contribute false positives.
    """
    thresholds = tuple(iou_thresholds)
    classes = sorted({a.class_id for s in gts.values() for a in s} | {a.class_id for s in preds.values() for a in s})
    report = EvalReport(image_count=len(set(gts) | set(preds)), iou_thresholds=thresholds)
    for cid in classes:
        matches, gt_count = match_predictions(gts, preds, primary_iou, cid, geometry)
        if gt_count == 0:
            continue
        ap_primary = average_precision(matches, gt_count)
        aps = []
        for t in thresholds:
            m_t = matches if t == primary_iou else match_predictions(gts, preds, t, cid, geometry)[0]
            aps.append(average_precision(m_t, gt_count))
        p, r, _ = f1_operating_point(matches, gt_count)
        images = sum(1 for s in gts.values() if any(a.class_id == cid for a in s))
        report.per_class[cid] = ClassMetrics(p, r, ap_primary, float(np.mean(aps)), gt_count, images)
    if report.per_class:
        vals = list(report.per_class.values())
        report.overall = ClassMetrics(
            precision=float(np.mean([v.precision for v in vals])),
            recall=float(np.mean([v.recall for v in vals])),
            ap50=float(np.mean([v.ap50 for v in vals])),
            ap50_95=float(np.mean([v.ap50_95 for v in vals])),
            gt_count=sum(v.gt_count for v in vals),
            image_count=sum(1 for s in gts.values() if len(s)),
        )
    return report


def _read_tree(root: Path, with_confidence: bool) -> dict[str, AnnotationSet]:
    out = {}
    for path in sorted(root.rglob("*.txt")):
        key = path.relative_to(root).with_suffix("").as_posix()
        out[key] = read_label_file(path, "mixed", with_confidence=with_confidence)
    return out


def evaluate(
    gt_dir,
    pred_dir,
    iou_thresholds: Sequence[float] = COCO_IOU_THRESHOLDS,
    primary_iou: float = 0.5,
    geometry: str = "aabb",
) -> EvalReport:
    """Evaluate a prediction label tree against a ground-truth tree.

    Files are paired by relative path. Prediction lines carry a trailing
    confidence field. Raises ``ParseError`` on malformed files.
    """
    gt_dir, pred_dir = Path(gt_dir), Path(pred_dir)
    if not gt_dir.is_dir():
        raise FileNotFoundError(f"ground-truth directory {gt_dir} not found")
    gts = _read_tree(gt_dir, with_confidence=False)
    preds = _read_tree(pred_dir, with_confidence=True) if pred_dir.is_dir() else {}
    return evaluate_sets(gts, preds, iou_thresholds, primary_iou, geometry)
