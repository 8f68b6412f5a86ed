"""
Deterministic synthetic plume scenes.

The background is a smooth mean spectrum plus a Gaussian clutter field that is
correlated both spatially and spectrally. Inside a soft-edged elliptical plume
with membership ``m(i, j)`` in [0, 1] each pixel becomes
``s - alpha * m * target``; a negative ``alpha`` gives an additive plume.

Random numbers come from a counter-based generator (splitmix64 mixing of
``seed`` and the element index, then Box-Muller), so a scene depends only on
its spec and never on global RNG state or evaluation order.
"""

from dataclasses import dataclass, fields, replace

import numpy as np

from .errors import (DimensionMismatch, IoFailure, MissingKey, UnknownKey,
                     UnparseableValue)
from .hypercube_io import BACKGROUND, BOUNDARY, PLUME

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 2.0 ** -53


def _mix64(z):
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def counter_uniform(seed, stream, counters):
    """Uniform doubles in [0, 1) addressed by ``(seed, stream, counter)``."""
    with np.errstate(over="ignore"):
        key = _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ _mix64(np.uint64(stream) * _GAMMA))
        state = key + (np.asarray(counters, dtype=np.uint64) + np.uint64(1)) * _GAMMA
    return (_mix64(state) >> np.uint64(11)).astype(np.float64) * _TWO_M53


def counter_normal(seed, stream, shape):
    """Standard normals of the given shape, one Box-Muller pair slot per element."""
    n = int(np.prod(shape))
    idx = np.arange(n, dtype=np.uint64) * np.uint64(2)
    u1 = 1.0 - counter_uniform(seed, stream, idx)  # (0, 1]
    u2 = counter_uniform(seed, stream, idx + np.uint64(1))
    return (np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)).reshape(shape)


def _box_smooth(x, width, axis):
    # 'valid' moving sum scaled by 1/sqrt(width) so unit-variance white noise stays unit variance
    if width <= 1:
        return x
    c = np.cumsum(x, axis=axis)
    zero = np.zeros_like(np.take(c, [0], axis=axis))
    c = np.concatenate([zero, c], axis=axis)
    n = x.shape[axis] - width + 1
    hi = np.take(c, np.arange(width, width + n), axis=axis)
    lo = np.take(c, np.arange(0, n), axis=axis)
    return (hi - lo) / np.sqrt(width)


@dataclass(frozen=True)
class SceneSpec:
    h: int
    v: int
    d: int
    seed: int
    center_row: float = None
    center_col: float = None
    radius_row: float = None
    radius_col: float = None
    edge_width: float = 4.0
    alpha: float = 1.0
    mean_level: float = 10.0
    mean_tilt: float = 0.4
    spatial_corr: int = 2
    spectral_corr: int = 4
    clutter_sigma: float = 0.25
    noise_sigma: float = 0.2
    boundary_width: float = 2.0

    def __post_init__(self):
        if min(self.h, self.v, self.d) < 1:
            raise ValueError("scene dimensions must be positive")
        defaults = {
            "center_row": (self.h - 1) / 2.0,
            "center_col": (self.v - 1) / 2.0,
            "radius_row": self.h / 5.0,
            "radius_col": self.v / 4.0,
        }
        for key, value in defaults.items():
            if getattr(self, key) is None:
                object.__setattr__(self, key, value)
        if not max(self.radius_row, self.radius_col) < min(self.h, self.v) / 2.0:
            raise ValueError("plume radii must be below min(h, v) / 2")
        if min(self.radius_row, self.radius_col) <= 0:
            raise ValueError("plume radii must be positive")
        if self.noise_sigma < 0 or self.clutter_sigma < 0:
            raise ValueError("noise levels must be nonnegative")
        if self.edge_width < 0 or self.boundary_width < 0:
            raise ValueError("edge and boundary widths must be nonnegative")
        if self.spatial_corr < 1 or self.spectral_corr < 1:
            raise ValueError("correlation lengths must be at least 1")


def default_scene_spec(seed=0, **overrides):
    """The 64x64x40 benchmark scene with alpha = 1."""
    return replace(SceneSpec(h=64, v=64, d=40, seed=seed), **overrides)


def default_signature(d=40):
    """A positive target spectrum with a few narrow absorption-like features."""
    b = np.arange(d, dtype=np.float64)
    centers = np.array([0.22, 0.47, 0.71]) * (d - 1)
    widths = np.array([1.2, 1.8, 1.4]) * max(d / 40.0, 0.25)
    heights = np.array([1.0, 0.7, 0.85])
    sig = np.zeros(d)
    for c, w, a in zip(centers, widths, heights):
        sig += a * np.exp(-0.5 * ((b - c) / w) ** 2)
    return sig


def mean_profile(spec):
    """Smooth background mean spectrum: a tilted line with a gentle bow."""
    x = np.linspace(-0.5, 0.5, spec.d)
    return spec.mean_level * (1.0 + spec.mean_tilt * x - 0.3 * x ** 2)


def plume_membership(spec):
    """Soft plume membership in [0, 1]; exactly 0.5 on the ellipse outline.

    With ``edge_width == 0`` the plume is hard-edged (1 inside, 0 outside).
    Also returns the approximate signed distance (pixels) outside the outline.
    """
    i = np.arange(spec.h, dtype=np.float64)[:, None]
    j = np.arange(spec.v, dtype=np.float64)[None, :]
    r = np.sqrt(((i - spec.center_row) / spec.radius_row) ** 2
                + ((j - spec.center_col) / spec.radius_col) ** 2)
    dist = (r - 1.0) * min(spec.radius_row, spec.radius_col)
    if spec.edge_width == 0:
        m = (r <= 1.0).astype(np.float64)
    else:
        m = np.clip(0.5 - dist / spec.edge_width, 0.0, 1.0)
    return m, dist


def ground_truth(spec):
    m, dist = plume_membership(spec)
    mask = np.full((spec.h, spec.v), BACKGROUND, dtype=np.uint8)
    mask[(m > 0) & (m < 0.5) & (dist <= spec.boundary_width)] = BOUNDARY
    mask[m >= 0.5] = PLUME
    return mask


def background(spec):
    """Noise-free mean plus correlated clutter plus white sensor noise, shape (h, v, d)."""
    a, b = spec.spatial_corr, spec.spectral_corr
    raw = counter_normal(spec.seed, 1, (spec.h + 2 * (a - 1), spec.v + 2 * (a - 1), spec.d + b - 1))
    clutter = raw
    for axis in (0, 1):
        clutter = _box_smooth(_box_smooth(clutter, a, axis), a, axis)
    clutter = _box_smooth(clutter, b, 2)
    white = counter_normal(spec.seed, 2, (spec.h, spec.v, spec.d))
    return (mean_profile(spec)
            + spec.clutter_sigma * clutter
            + spec.noise_sigma * white)


def generate(spec, target):
    """Return ``(cube, mask)`` for the scene; cube has shape (h, v, d)."""
    target = np.asarray(target, dtype=np.float64)
    if target.shape != (spec.d,):
        raise DimensionMismatch(f"signature length {target.shape} vs scene bands {spec.d}")
    m, _ = plume_membership(spec)
    cube = background(spec) - spec.alpha * m[:, :, None] * target
    return cube, ground_truth(spec)


# -- spec files ----------------------------------------------------------------

_REQUIRED = ("h", "v", "d", "seed")


def parse_key_values(text, source="<text>"):
    """Parse ``key = value`` lines; ``#`` starts a comment. Returns a dict of strings."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise UnparseableValue(f"{source}:{lineno}", line)
        out[key.strip()] = value.strip()
    return out


def spec_from_dict(values):
    """Build a :class:`SceneSpec` from a mapping of string values."""
    types = {f.name: f.type for f in fields(SceneSpec)}
    for key in values:
        if key not in types:
            raise UnknownKey(key)
    for key in _REQUIRED:
        if key not in values:
            raise MissingKey(key)
    kwargs = {}
    for key, text in values.items():
        conv = int if types[key] in (int, "int") else float
        try:
            kwargs[key] = conv(text)
        except ValueError:
            raise UnparseableValue(key, text) from None
    return SceneSpec(**kwargs)


def spec_from_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return spec_from_dict(parse_key_values(text, str(path)))


def spec_to_text(spec):
    return "".join(f"{f.name} = {getattr(spec, f.name)}\n" for f in fields(SceneSpec))
