"""
Pixel scoring: cosine similarity (COS), matched filter (MF) and adaptive
cosine estimator (ACE), plus background statistics and whitening.

For a pixel signature ``s``, target signature ``t``, background mean ``mu``
and covariance ``C``::

    COS = (s.t)^2 / (s.s * t.t)
    MF  = [(s-mu)' C^-1 t]^2 / (t' C^-1 t)
    ACE = [(s-mu)' C^-1 t]^2 / (t' C^-1 t * (s-mu)' C^-1 (s-mu))

ACE equals COS evaluated on whitened, mean-centred data
(``C^-1/2 (s - mu)`` against ``C^-1/2 t``). All inverses are applied through
a Cholesky factorisation of ``C + eps*I``.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import (DegeneratePixel, DimensionMismatch, EmptySelection,
                     SingularCovariance, ZeroDenominator, ZeroVector)
from .hypercube_io import BACKGROUND, validate_cube

METHODS = ("cos", "mf", "ace")


@dataclass(frozen=True)
class BackgroundStats:
    """Background mean, sample covariance and the diagonal loading ``eps``.

    The Cholesky factor of ``cov + eps*I`` is computed once at construction;
    failure raises :class:`SingularCovariance`.
    """

    mean: np.ndarray
    cov: np.ndarray
    eps: float
    _chol: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        d = mean.shape[0]
        if cov.shape != (d, d):
            raise DimensionMismatch(f"covariance shape {cov.shape} vs mean length {d}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        try:
            chol = linalg.cho_factor(self.regularized(), lower=True)
        except linalg.LinAlgError as exc:
            raise SingularCovariance(str(exc)) from exc
        object.__setattr__(self, "_chol", chol)

    @property
    def d(self):
        return self.mean.shape[0]

    def regularized(self):
        return self.cov + self.eps * np.eye(self.d)

    def solve(self, b):
        """Return ``(cov + eps*I)^-1 b``."""
        return linalg.cho_solve(self._chol, b)

    def whitening_matrix(self):
        """Symmetric inverse square root of ``cov + eps*I``."""
        evals, evecs = np.linalg.eigh(self.regularized())
        evals = np.maximum(evals, self.eps)
        return (evecs / np.sqrt(evals)) @ evecs.T


def _loading(cov, mean):
    d = cov.shape[0]
    return max(1e-8 * np.trace(cov) / d, 1e-12 * (1.0 + np.max(np.abs(mean))))


def make_stats(mean, cov):
    """Build :class:`BackgroundStats` with the standard diagonal loading."""
    mean = np.asarray(mean, dtype=np.float64)
    cov = np.asarray(cov, dtype=np.float64)
    return BackgroundStats(mean, cov, _loading(cov, mean))


def estimate_background(cube, mask=None):
    """Mean and sample covariance (divisor n-1) of the background pixels.

    With a ground-truth mask only pixels labelled background are used,
    otherwise every pixel.
    """
    cube = validate_cube(cube)
    pixels = cube.reshape(-1, cube.shape[2])
    if mask is not None:
        mask = np.asarray(mask)
        if mask.shape != cube.shape[:2]:
            raise DimensionMismatch(f"mask shape {mask.shape} vs cube {cube.shape[:2]}")
        pixels = pixels[mask.ravel() == BACKGROUND]
    n = pixels.shape[0]
    if n == 0:
        raise EmptySelection("mask selects no background pixels")
    mean = pixels.mean(axis=0)
    centered = pixels - mean
    if n > 1:
        cov = centered.T @ centered / (n - 1)
    else:
        cov = np.zeros((cube.shape[2], cube.shape[2]))
    cov = 0.5 * (cov + cov.T)
    return make_stats(mean, cov)


# -- single-pixel scores -------------------------------------------------------

def cos_score(s, target):
    s = np.asarray(s, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    ss, tt = s @ s, target @ target
    if ss == 0 or tt == 0:
        raise ZeroVector("cosine score of a zero vector")
    return float(np.clip((s @ target) ** 2 / (ss * tt), 0.0, 1.0))


def _target_terms(target, stats):
    q = stats.solve(np.asarray(target, dtype=np.float64))
    denom = float(target @ q)
    if not denom > 0:
        raise ZeroDenominator("target has zero Mahalanobis norm")
    return q, denom


def mf_score(s, target, stats):
    q, denom = _target_terms(target, stats)
    r = np.asarray(s, dtype=np.float64) - stats.mean
    return float((r @ q) ** 2 / denom)


def ace_score(s, target, stats):
    q, denom = _target_terms(target, stats)
    r = np.asarray(s, dtype=np.float64) - stats.mean
    if not r.any():
        raise DegeneratePixel("pixel equals the background mean")
    rr = float(r @ stats.solve(r))
    return float(np.clip((r @ q) ** 2 / (denom * rr), 0.0, 1.0))


def whiten(x, stats, center=True):
    """Whiten signatures (last axis) with ``C^-1/2 (x - mu)``.

    ``center=False`` skips the mean subtraction, as used for the target
    signature.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != stats.d:
        raise DimensionMismatch(f"signature length {x.shape[-1]} vs stats {stats.d}")
    if center:
        x = x - stats.mean
    return x @ stats.whitening_matrix()


def whiten_target(target, stats):
    return whiten(target, stats, center=False)


# -- whole-cube classification -------------------------------------------------

@dataclass
class Classification:
    """Detection map plus the count of pixels scored 0 because they were degenerate."""

    scores: np.ndarray
    degenerate: int = 0


def reverse_scores(scores):
    """Flip scores within their observed range: ``x -> max + min - x``."""
    scores = np.asarray(scores, dtype=np.float64)
    return scores.max() + scores.min() - scores


def classify(cube, target, method="cos", stats=None, reverse=False):
    """Score every pixel of `cube` against `target`.

    Returns a :class:`Classification`. Pixels where the score is 0/0 (zero
    signature for COS, pixel equal to the background mean for ACE) get score 0
    and are counted in ``degenerate``.
    """
    cube = validate_cube(cube)
    h, v, d = cube.shape
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (d,):
        raise DimensionMismatch(f"signature length {target.shape} vs cube bands {d}")
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    pixels = cube.reshape(-1, d)

    if method == "cos":
        tt = target @ target
        if tt == 0:
            raise ZeroVector("target signature is zero")
        ss = np.einsum("ij,ij->i", pixels, pixels)
        dead = ss == 0
        num = (pixels @ target) ** 2
        scores = np.zeros(len(pixels))
        scores[~dead] = np.clip(num[~dead] / (ss[~dead] * tt), 0.0, 1.0)
    else:
        if stats is None:
            raise ValueError(f"method {method!r} needs background stats")
        if stats.d != d:
            raise DimensionMismatch(f"stats have {stats.d} bands, cube has {d}")
        q, denom = _target_terms(target, stats)
        r = pixels - stats.mean
        num = (r @ q) ** 2
        if method == "mf":
            scores = num / denom
            dead = np.zeros(len(pixels), dtype=bool)
        else:
            rr = np.einsum("ij,ji->i", r, stats.solve(r.T))
            dead = ~r.any(axis=1)
            scores = np.zeros(len(pixels))
            scores[~dead] = np.clip(num[~dead] / (denom * rr[~dead]), 0.0, 1.0)

    ndead = int(np.count_nonzero(dead))
    scores = scores.reshape(h, v)
    if reverse:
        scores = reverse_scores(scores)
    return Classification(scores, ndead)
