"""
Pre- and post-processing around the classifiers.

``prep`` removes the global mean spectrum from every pixel and then strips
each centred spectrum of its 1-D trend, keeping only the oscillatory
components. ``postp`` removes the first 2-D IMF from a detection map, which
suppresses isolated high-frequency misclassifications while keeping the
plume shape. ``run_pipeline`` chains PreP -> classifier -> reversal -> PostP
-> ROC.
"""

import hashlib
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import classifiers, evaluation
from .errors import PlumekitError
from .hypercube_io import check_signature, validate_cube, validate_map, write_detection_map
from .mif import SiftParams, decompose_rows, if_decompose_1d, mif_decompose_2d


@dataclass
class PipelineReport:
    imf_counts: np.ndarray = None
    degenerate_pixel_count: int = 0
    timing: dict = field(default_factory=dict)

    def imf_histogram(self):
        counts = np.asarray(self.imf_counts).ravel()
        return np.bincount(counts) if counts.size else np.zeros(0, dtype=int)


def default_threads():
    env = os.environ.get("PLUMEKIT_THREADS")
    if env:
        return max(int(env), 1)
    return os.cpu_count() or 1


def _detrend_rows(rows, params):
    residual, counts, _ = decompose_rows(rows, params)
    return rows - residual, counts


def prep(cube, params=None, threads=1):
    """Global mean removal followed by per-pixel trend removal.

    Returns ``(cube_out, report)``; ``cube_out[i, j]`` is the sum of the IMFs of
    the centred spectrum of pixel (i, j). Spectra with fewer than two extrema
    are pure trend and come out as zeros. ``threads=None`` means
    :func:`default_threads`.
    """
    params = params or SiftParams()
    cube = validate_cube(cube)
    h, v, d = cube.shape
    if d < 3:
        raise ValueError("prep needs at least 3 bands")
    t0 = time.perf_counter()
    centered = center_cube(cube)
    t1 = time.perf_counter()

    pixels = centered.reshape(-1, d)
    threads = default_threads() if threads is None else max(int(threads), 1)
    if threads == 1:
        out, counts = _detrend_rows(pixels, params)
    else:
        # fixed chunking; every pixel is independent so the result does not depend on threads
        chunks = np.array_split(np.arange(len(pixels)), threads * 4)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda idx: _detrend_rows(pixels[idx], params), chunks))
        out = np.concatenate([p[0] for p in parts])
        counts = np.concatenate([p[1] for p in parts])
    t2 = time.perf_counter()

    report = PipelineReport(imf_counts=counts.reshape(h, v),
                            timing={"prep_center": t1 - t0, "prep_detrend": t2 - t1})
    return out.reshape(h, v, d), report


def center_cube(cube):
    """Subtract the mean spectrum over all pixels.

    The mean is accumulated relative to the first pixel, so a cube of
    identical pixels centres to exact zeros.
    """
    cube = validate_cube(cube)
    pixels = cube.reshape(-1, cube.shape[2])
    ref = pixels[0]
    mean = ref + (pixels - ref).mean(axis=0)
    return cube - mean


def postp(scores, params=None):
    """Remove the first 2-D IMF from a detection map.

    Returns ``(map_out, report)``. A map with too few extrema to yield an IMF
    is returned unchanged.
    """
    params = replace(params or SiftParams(), max_imfs=1)
    scores = validate_map(scores)
    if min(scores.shape) < 3:
        raise ValueError("postp needs a map of at least 3x3")
    t0 = time.perf_counter()
    stack = mif_decompose_2d(scores, params)
    report = PipelineReport(imf_counts=np.array([len(stack.imfs)]),
                            timing={"postp": time.perf_counter() - t0})
    return stack.residual, report


def first_imf_removed_1d(x, params):
    stack = if_decompose_1d(x, replace(params, max_imfs=1))
    return stack.residual


@dataclass
class RowColReport:
    """Relative L2 distances of the two 1-D orderings from the 2-D PostP result."""

    row_then_col: float
    col_then_row: float
    postp_hash: str


def _rel_dist(a, b):
    nb = np.linalg.norm(b)
    if nb == 0:
        return 0.0 if not np.any(a) else float("inf")
    return float(np.linalg.norm(a - b) / nb)


def rowcol_postp_check(scores, params=None):
    """Compare 2-D PostP against 1-D first-IMF removal along rows then columns, and vice versa."""
    params = params or SiftParams()
    scores = validate_map(scores)
    ref, _ = postp(scores, params)

    def along_rows(m):
        return np.array([first_imf_removed_1d(r, params) for r in m])

    rc = along_rows(along_rows(scores).T).T
    cr = along_rows(along_rows(scores.T).T)
    digest = hashlib.sha256(np.ascontiguousarray(ref).tobytes()).hexdigest()
    return RowColReport(_rel_dist(rc, ref), _rel_dist(cr, ref), digest)


# -- end to end ----------------------------------------------------------------

@dataclass(frozen=True)
class PipelineConfig:
    method: str = "ace"
    prep: bool = False
    postp: bool = False
    reverse: bool = False
    sift: SiftParams = SiftParams()
    threads: int = 1

    def __post_init__(self):
        if self.method not in classifiers.METHODS:
            raise ValueError(f"method must be one of {classifiers.METHODS}")


@dataclass
class PipelineResult:
    scores: np.ndarray
    roc: evaluation.RocCurve = None
    artifacts: dict = field(default_factory=dict)
    report: PipelineReport = field(default_factory=PipelineReport)


class StageError(PlumekitError):
    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage!r} failed: {cause}")


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except Exception as exc:
        raise StageError(name, exc) from exc


def run_pipeline(cube, target, config=None, mask=None, out=None, out_format="binary"):
    """Run PreP -> classify -> (reverse) -> PostP -> ROC.

    Parameters
    ----------
    cube : ndarray (h, v, d)
    target : ndarray (d,)
    config : PipelineConfig
    mask : optional ground-truth mask; selects the background pixels for MF/ACE
        statistics and enables the ROC.
    out : optional path; the final detection map is written there.

    Any stage failure is re-raised as :class:`StageError` naming the stage.
    """
    config = config or PipelineConfig()
    cube = _stage("input", validate_cube, cube)
    target = _stage("input", check_signature, target, cube)
    report = PipelineReport()
    artifacts = {}

    if config.prep:
        cube, prep_report = _stage("prep", prep, cube, config.sift, config.threads)
        report.imf_counts = prep_report.imf_counts
        report.timing.update(prep_report.timing)
        artifacts["prep_cube"] = cube

    t0 = time.perf_counter()
    stats = None
    if config.method != "cos":
        stats = _stage("background", classifiers.estimate_background, cube, mask)
    result = _stage("classify", classifiers.classify, cube, target, config.method, stats,
                    config.reverse)
    report.degenerate_pixel_count = result.degenerate
    report.timing["classify"] = time.perf_counter() - t0
    scores = result.scores
    artifacts["raw_scores"] = scores

    if config.postp:
        scores, post_report = _stage("postp", postp, scores, config.sift)
        report.timing.update(post_report.timing)
        artifacts["postp_imf_count"] = int(post_report.imf_counts[0])

    curve = None
    if mask is not None:
        curve = _stage("evaluate", evaluation.roc, scores, mask)
    if out is not None:
        _stage("write", write_detection_map, scores, out, out_format)
    return PipelineResult(scores, curve, artifacts, report)
