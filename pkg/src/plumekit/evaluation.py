"""ROC curves and AUC under the three-class ground-truth convention.

Pixels labelled boundary are ignored. A pixel counts as detected at threshold
``tau`` when its score is ``>= tau``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, IoFailure, MalformedHeader, NoNegatives, NoPositives
from .hypercube_io import BACKGROUND, PLUME, validate_mask


@dataclass
class RocCurve:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float
    n_pos: int
    n_neg: int

    @property
    def points(self):
        return list(zip(self.thresholds.tolist(), self.fpr.tolist(), self.tpr.tolist()))


def _evaluated(scores, gt):
    scores = np.asarray(scores, dtype=np.float64)
    gt = validate_mask(gt)
    if scores.shape != gt.shape:
        raise DimensionMismatch(f"scores {scores.shape} vs ground truth {gt.shape}")
    pos = scores[gt == PLUME]
    neg = scores[gt == BACKGROUND]
    if pos.size == 0:
        raise NoPositives("ground truth has no plume pixels")
    if neg.size == 0:
        raise NoNegatives("ground truth has no background pixels")
    return pos, neg


def confusion_at(scores, gt, tau):
    """Return ``(tp, fp, tn, fn)`` at threshold `tau`, ignoring boundary pixels."""
    pos, neg = _evaluated(scores, gt)
    tp = int(np.count_nonzero(pos >= tau))
    fp = int(np.count_nonzero(neg >= tau))
    return tp, fp, neg.size - fp, pos.size - tp


def trapezoid_auc(fpr, tpr):
    fpr = np.asarray(fpr, dtype=np.float64)
    tpr = np.asarray(tpr, dtype=np.float64)
    return float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))


def roc(scores, gt):
    """Exact ROC curve over the unique scores of the evaluated pixels.

    The first point uses a threshold above every score, giving (0, 0); the
    last uses the minimum score, giving (1, 1).
    """
    pos, neg = _evaluated(scores, gt)
    values = np.concatenate([pos, neg])
    is_pos = np.concatenate([np.ones(pos.size, bool), np.zeros(neg.size, bool)])

    order = np.argsort(-values, kind="stable")
    values, is_pos = values[order], is_pos[order]
    tp = np.cumsum(is_pos)
    fp = np.cumsum(~is_pos)
    # last index of every run of equal scores
    last = np.flatnonzero(np.r_[values[1:] != values[:-1], True])

    top = values[0] + 1.0
    if top <= values[0]:
        top = np.nextafter(values[0], np.inf)
    thresholds = np.r_[top, values[last]]
    tpr = np.r_[0.0, tp[last] / pos.size]
    fpr = np.r_[0.0, fp[last] / neg.size]
    return RocCurve(thresholds, fpr, tpr, trapezoid_auc(fpr, tpr), pos.size, neg.size)


def auc_of(curve):
    return trapezoid_auc(curve.fpr, curve.tpr)


def auc_score(scores, gt):
    return roc(scores, gt).auc


def roc_to_csv(curve, path, log_x=False):
    """Write ``tau,fpr,tpr`` rows and a trailing ``# auc=`` comment.

    ``log_x`` only adds a leading ``# xscale=log`` plotting hint.
    """
    lines = []
    if log_x:
        lines.append("# xscale=log")
    lines.append("tau,fpr,tpr")
    for tau, f, t in curve.points:
        lines.append(f"{tau:.17g},{f:.17g},{t:.17g}")
    lines.append(f"# auc={curve.auc:.17g}")
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_roc_csv(path):
    """Parse a file written by :func:`roc_to_csv`.

    Returns ``(points, auc, hints)`` where ``hints`` collects ``key=value``
    comment lines other than the AUC.
    """
    points, auc, hints = [], None, {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                if key == "auc":
                    auc = float(value)
                else:
                    hints[key] = value
            elif line != "tau,fpr,tpr":
                try:
                    points.append(tuple(float(x) for x in line.split(",")))
                except ValueError as exc:
                    raise MalformedHeader(f"{path}: bad row {line!r}") from exc
    return points, auc, hints
