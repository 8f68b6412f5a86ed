"""
Iterative Filtering (1-D) and Multidimensional Iterative Filtering (2-D).

A signal is split into intrinsic mode functions (IMFs) plus a trend::

    signal = imfs[0] + imfs[1] + ... + residual

Each IMF is obtained by repeatedly subtracting a local moving average,
``s <- s - w * s``, where ``w`` is a smooth, compactly supported low-pass
kernel whose width adapts to the density of extrema in the current signal.
Sifting stops once the relative change ``||s_new - s|| / ||s||`` drops below
``SiftParams.sd_threshold``; extraction stops when the remaining signal has
fewer than two extrema on average.

Example
-------
>>> t = np.arange(512) / 512
>>> stack = if_decompose_1d(np.sin(2 * np.pi * 8 * t) + 0.5 * t)
>>> len(stack.imfs)
1
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import fft as sp_fft
from scipy import ndimage
from scipy import signal as sps

from .errors import NoExtremaAnywhere, TooFewExtrema

SUPPORT_SHAPES = ("ellipsoidal", "spherical")
CONVOLUTION_METHODS = ("auto", "direct", "fft")


@dataclass(frozen=True)
class SiftParams:
    sd_threshold: float = 0.001
    max_inner_iters: int = 200
    max_imfs: int = 16
    support_shape: str = "ellipsoidal"
    convolution: str = "auto"

    def __post_init__(self):
        if not self.sd_threshold > 0:
            raise ValueError("sd_threshold must be positive")
        if self.max_inner_iters < 1 or self.max_imfs < 1:
            raise ValueError("max_inner_iters and max_imfs must be at least 1")
        if self.support_shape not in SUPPORT_SHAPES:
            raise ValueError(f"support_shape must be one of {SUPPORT_SHAPES}")
        if self.convolution not in CONVOLUTION_METHODS:
            raise ValueError(f"convolution must be one of {CONVOLUTION_METHODS}")


@dataclass
class ImfStack:
    """IMFs and trend of a decomposition, plus per-IMF diagnostics.

    ``supports[k]`` is the kernel half-length used for ``imfs[k]`` (an int in
    1-D, a ``(rows, cols)`` tuple in 2-D) and ``inner_iters[k]`` the number of
    sifting steps it took.
    """

    imfs: list
    residual: np.ndarray
    supports: list = field(default_factory=list)
    inner_iters: list = field(default_factory=list)

    def __len__(self):
        return len(self.imfs)

    def reconstruct(self):
        total = self.residual.copy()
        for imf in self.imfs:
            total += imf
        return total


def _round_half_up(x):
    return int(np.floor(x + 0.5))


# -- kernels -----------------------------------------------------------------

def _triangle(half_length):
    # discrete triangle on [-l/2, l/2], sampled at the integers it covers
    m = half_length // 2
    k = np.arange(-m, m + 1)
    return np.maximum(half_length / 2.0 - np.abs(k), 0.0)


def build_kernel_1d(half_length):
    """Smooth compactly supported low-pass kernel with 2*half_length + 1 taps.

    The kernel is the self-convolution of a discrete triangle of half-width
    ``half_length / 2``, i.e. a C1 piecewise-cubic bump, zero-padded to the
    full support and normalised to unit sum. Both end taps are zero.
    """
    half_length = int(half_length)
    if half_length < 1:
        raise ValueError("half_length must be >= 1")
    tri = _triangle(half_length)
    bump = np.convolve(tri, tri)
    w = np.zeros(2 * half_length + 1)
    c = half_length
    m = len(bump) // 2
    w[c - m:c + m + 1] = bump
    w[0] = w[-1] = 0.0
    if not w.any():
        w[c] = 1.0
    w = 0.5 * (w + w[::-1])
    return w / w.sum()


def build_kernel_2d(half_lengths):
    """Separable bump restricted to the ellipse (t_r/l_r)^2 + (t_c/l_c)^2 <= 1."""
    lr, lc = (int(x) for x in half_lengths)
    if lr < 1 or lc < 1:
        raise ValueError("half lengths must be >= 1")
    w = np.outer(build_kernel_1d(lr), build_kernel_1d(lc))
    tr = np.arange(-lr, lr + 1)[:, None] / lr
    tc = np.arange(-lc, lc + 1)[None, :] / lc
    w[tr ** 2 + tc ** 2 > 1.0] = 0.0
    return w / w.sum()


# -- extrema and supports ----------------------------------------------------

def count_extrema_1d(signal):
    """Number of strict local maxima and minima, one per plateau.

    Endpoints never count.
    """
    d = np.diff(np.asarray(signal, dtype=np.float64))
    d = np.sign(d[d != 0])
    return int(np.count_nonzero(d[1:] != d[:-1]))


def count_extrema_rows(image):
    """Extrema count of every row of a 2-D array."""
    image = np.asarray(image, dtype=np.float64)
    d = np.sign(np.diff(image, axis=1))
    counts = np.empty(image.shape[0], dtype=int)
    for i, row in enumerate(d):
        row = row[row != 0]
        counts[i] = np.count_nonzero(row[1:] != row[:-1])
    return counts


def _support_from_count(n, k):
    return max(_round_half_up(4.0 * n / k), 1)


def compute_support_1d(signal):
    """Kernel half-length ``round(4N/K)``.

    N is the signal length and K its number of extrema, so for K >= 2 the
    half-length never exceeds 2N. Raises :class:`TooFewExtrema` when K < 2;
    such a signal is pure trend.
    """
    k = count_extrema_1d(signal)
    if k < 2:
        raise TooFewExtrema(f"signal has {k} extrema")
    return _support_from_count(len(signal), k)


def _axis_support(image):
    # mean of 4n/K over rows with at least two extrema, or None if there are none
    counts = count_extrema_rows(image)
    good = counts >= 2
    if not good.any():
        return None
    return float(np.mean(4.0 * image.shape[1] / counts[good]))


def compute_support_2d(image, support_shape="ellipsoidal"):
    """Kernel half-lengths ``(l_r, l_c)`` for a 2-D signal.

    ``l_c`` averages 4v/K over the rows with K >= 2 extrema and ``l_r`` does
    the same over columns. An axis with no such line is trend along that axis
    and gets half-length dim / 2. For ``support_shape='spherical'`` both are
    replaced by their geometric mean. Results are at least 1.
    """
    image = np.asarray(image, dtype=np.float64)
    h, v = image.shape
    lc = _axis_support(image)
    lr = _axis_support(image.T)
    if lc is None and lr is None:
        raise NoExtremaAnywhere("no row or column has two extrema")
    lr = h / 2.0 if lr is None else lr
    lc = v / 2.0 if lc is None else lc
    if support_shape == "spherical":
        lr = lc = np.sqrt(lr * lc)
    elif support_shape != "ellipsoidal":
        raise ValueError(f"unknown support shape {support_shape!r}")
    return max(_round_half_up(lr), 1), max(_round_half_up(lc), 1)


def mean_extrema(image):
    """Average extrema count over rows and over columns."""
    image = np.asarray(image, dtype=np.float64)
    return float(count_extrema_rows(image).mean()), float(count_extrema_rows(image.T).mean())


# -- moving average ----------------------------------------------------------

@lru_cache(maxsize=256)
def _reflect_plan(n, width, ndim, axis):
    # Odd reflection about both ends, repeated, is the odd-periodic extension
    #   ext(-j) = 2 x[0] - x[j],  ext(j + 2(n-1)) = ext(j) + 2 (x[n-1] - x[0])
    # so every padded sample is  sign * x[idx] + a * x[0] + b * x[n-1]
    # (interior samples: sign 1, a = b = 0).
    period = 2 * (n - 1)
    j = np.arange(-width, n + width)
    q = np.floor_divide(j + (n - 1), period)
    r = j - q * period
    shape = (-1,) + (1,) * (ndim - axis - 1)
    sign = np.where(r < 0, -1.0, 1.0).reshape(shape)
    a = (np.where(r < 0, 2.0, 0.0) - 2.0 * q).reshape(shape)
    b = (2.0 * q).reshape(shape)
    return np.abs(r), sign, a, b


def _pad_axis(x, width, axis):
    if width == 0:
        return x
    n = x.shape[axis]
    if n < 2:
        return np.repeat(x, n + 2 * width, axis=axis)
    idx, sign, a, b = _reflect_plan(n, width, x.ndim, axis)
    lead = (slice(None),) * axis
    return (sign * x.take(idx, axis=axis) + a * x[lead + (slice(0, 1),)]
            + b * x[lead + (slice(n - 1, n),)])


def _pad(x, widths):
    """Extend `x` by point reflection about its edge samples.

    Point (odd) reflection keeps constants and linear trends intact; an axis
    with a single sample is extended by repetition.
    """
    for axis, (before, after) in enumerate(widths):
        if before != after:
            raise ValueError("only symmetric padding is supported")
        x = _pad_axis(x, before, axis)
    return x


class _FftFilter:
    """'valid' convolution through the FFT with the kernel spectrum computed once.

    A circular transform of length >= the padded length is enough: wrap-around
    only reaches the first ``K - 1`` outputs, which 'valid' discards.
    """

    def __init__(self, padded_shape, kernel, axes):
        self.axes = tuple(axes)
        self.kshape = [kernel.shape[i] for i in range(kernel.ndim)]
        self.lengths = [sp_fft.next_fast_len(padded_shape[ax], real=True) for ax in self.axes]
        self.spectrum = sp_fft.rfftn(kernel, self.lengths, axes=self.axes)

    def __call__(self, padded):
        if len(self.axes) == 1:
            ax, n = self.axes[0], self.lengths[0]
            full = sp_fft.irfft(sp_fft.rfft(padded, n, axis=ax) * self.spectrum, n, axis=ax)
        else:
            full = sp_fft.irfftn(sp_fft.rfftn(padded, self.lengths, axes=self.axes) * self.spectrum,
                                 self.lengths, axes=self.axes)
        index = [slice(None)] * padded.ndim
        for ax in self.axes:
            index[ax] = slice(self.kshape[ax] - 1, padded.shape[ax])
        return full[tuple(index)]


def _prefer_fft(taps, out_size, padded_size):
    # rough cost model, calibrated on direct shift-and-add vs the FFT path
    return 0.3 * taps * out_size > padded_size * np.log2(max(padded_size, 2))


def _row_filter(n, kernel, method):
    """Moving average applied to each row of an (m, n) batch.

    Every row is filtered on its own, so a row's result never depends on the
    batch it was sifted in.
    """
    ell = len(kernel) // 2
    if method == "auto":
        if n <= _OPERATOR_MAX_LEN:
            op = _smoothing_operator(n, ell)
            return lambda rows: np.einsum("ij,jk->ik", rows, op)
        method = "fft" if _prefer_fft(2 * ell + 1, n, n + 2 * ell) else "direct"
    widths = ((0, 0), (ell, ell))
    if method == "fft":
        fft = _FftFilter((1, n + 2 * ell), kernel[None, :], axes=(1,))
        return lambda rows: fft(_pad(rows, widths))

    def direct(rows):
        out = ndimage.correlate1d(_pad(rows, widths), kernel, axis=1, mode="constant")
        return out[:, ell:ell + n]
    return direct


def _image_filter(shape, kernel, method):
    widths = [(k // 2, k // 2) for k in kernel.shape]
    padded_shape = tuple(n + 2 * w[0] for n, w in zip(shape, widths))
    if method == "auto":
        taps = np.count_nonzero(kernel)
        method = "fft" if _prefer_fft(taps, np.prod(shape), np.prod(padded_shape)) else "direct"
    if method == "fft":
        fft = _FftFilter(padded_shape, kernel, axes=(0, 1))
        return lambda x: fft(_pad(x, widths))
    return lambda x: direct_convolve_2d(_pad(x, widths), kernel)


def moving_average(x, kernel, method="auto"):
    """Convolve `x` with the (symmetric) kernel under odd-reflective extension.

    Works for 1-D signals with a 1-D kernel and 2-D arrays with a 2-D kernel.
    ``method`` is "direct" (explicit summation, the reference), "fft", or
    "auto", which picks by a cost estimate that depends only on the shapes,
    so a given input always takes the same path.
    """
    x = np.asarray(x, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if x.ndim != kernel.ndim:
        raise ValueError("signal and kernel dimensions differ")
    if method not in CONVOLUTION_METHODS:
        raise ValueError(f"method must be one of {CONVOLUTION_METHODS}")
    if x.ndim == 1:
        return _row_filter(len(x), kernel, method)(x[None, :])[0]
    return _image_filter(x.shape, kernel, method)(x)


def direct_convolve_2d(padded, kernel):
    """'valid' 2-D convolution by explicit summation over the nonzero taps.

    Taps are visited in a fixed order, so the result is reproducible bit for bit.
    """
    kr, kc = kernel.shape
    rows, cols = padded.shape[0] - kr + 1, padded.shape[1] - kc + 1
    out = np.zeros((rows, cols))

    def window(a, b):
        r0, c0 = kr - 1 - a, kc - 1 - b
        return padded[r0:r0 + rows, c0:c0 + cols]

    if not np.array_equal(kernel, kernel[::-1, ::-1]):
        for a, b in zip(*np.nonzero(kernel)):
            out += kernel[a, b] * window(a, b)
        return out
    # point-symmetric kernel: each tap shares its weight with its mirror image
    for a, b in zip(*np.nonzero(kernel)):
        ma, mb = kr - 1 - a, kc - 1 - b
        if (a, b) < (ma, mb):
            out += kernel[a, b] * (window(a, b) + window(ma, mb))
        elif (a, b) == (ma, mb):
            out += kernel[a, b] * window(a, b)
    return out


# In "auto" mode short signals (spectra) are filtered with a precomputed N x N
# operator: the extension is linear in the signal, so extension plus convolution
# fold into one matrix. einsum keeps each output row independent of the rest of
# the batch (BLAS matmul does not guarantee that).
_OPERATOR_MAX_LEN = 256


@lru_cache(maxsize=128)
def _smoothing_operator(n, ell):
    kernel = build_kernel_1d(ell)
    basis = _pad(np.eye(n), ((ell, ell), (0, 0)))
    if (2 * ell + 1) * n * (n + 2 * ell) > 2e7:
        op = _FftFilter(basis.shape, kernel[:, None], axes=(0,))(basis)
    else:
        op = ndimage.correlate1d(basis, kernel, axis=0, mode="constant")[ell:ell + n]
    op = np.ascontiguousarray(op.T)
    op.flags.writeable = False
    return op


# -- sifting -----------------------------------------------------------------

def _row_norms(rows):
    return np.sqrt(np.add.reduce(rows * rows, axis=1))


# an iterate whose norm has cancelled to this fraction of the starting norm is
# rounding noise (e.g. a constant minus its own average) and is taken as zero
_ZERO_FLOOR = 64 * np.finfo(np.float64).eps


def _sift_rows(rows, kernel, params):
    """Sift every row of `rows` with its own stopping test; returns (imfs, iterations)."""
    out = np.array(rows, dtype=np.float64)
    iters = np.full(len(out), params.max_inner_iters)
    smooth = _row_filter(out.shape[1], np.asarray(kernel, dtype=np.float64), params.convolution)
    idx = np.arange(len(out))
    cur = out
    floor = _ZERO_FLOOR * _row_norms(out)
    for n in range(params.max_inner_iters):
        norm = _row_norms(cur)
        step = smooth(cur)
        zero = norm <= floor
        done = zero | (_row_norms(step) < params.sd_threshold * norm)
        new = cur - step
        if done.any():
            new[zero] = 0.0
            out[idx[done]] = new[done]
            iters[idx[done]] = np.where(zero[done], n, n + 1)
            keep = ~done
            idx, new, floor = idx[keep], new[keep], floor[keep]
            if idx.size == 0:
                break
        cur = new
    else:
        out[idx] = cur
    return out, iters


def sift_with_count(signal, kernel, params=None):
    """Like :func:`sift` but also returns the number of inner iterations."""
    params = params or SiftParams()
    s = np.array(signal, dtype=np.float64)
    kernel = np.asarray(kernel, dtype=np.float64)
    if s.ndim == 1:
        imf, iters = _sift_rows(s[None, :], kernel, params)
        return imf[0], int(iters[0])
    smooth = _image_filter(s.shape, kernel, params.convolution)
    floor = _ZERO_FLOOR * np.linalg.norm(s)
    for n in range(params.max_inner_iters):
        norm = np.linalg.norm(s)
        if norm <= floor:
            return np.zeros_like(s), n
        step = smooth(s)
        s = s - step
        if np.linalg.norm(step) < params.sd_threshold * norm:
            return s, n + 1
    return s, params.max_inner_iters


def sift(signal, kernel, params=None):
    """Extract one IMF from `signal` using a fixed kernel.

    Iterates ``s <- s - moving_average(s)`` until the relative change
    ``||s_new - s|| / ||s||`` falls below ``params.sd_threshold`` or
    ``params.max_inner_iters`` is reached. An iterate that is zero, or has
    cancelled down to rounding noise of the input (a constant minus its own
    average), ends the loop and is returned as exact zeros.
    """
    return sift_with_count(signal, kernel, params)[0]


# -- decompositions ----------------------------------------------------------

def decompose_rows(rows, params=None, keep=False):
    """Iterative Filtering of every row of a 2-D array.

    Returns ``(residuals, imf_counts, details)``. With ``keep=True``,
    ``details[i]`` is a list of ``(imf, support, iterations)`` for row i,
    otherwise it is None. Rows sharing the same kernel are sifted together;
    the result for each row equals decomposing that row alone.
    """
    params = params or SiftParams()
    s = np.array(rows, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError("decompose_rows expects a 2-D array")
    n_rows, n = s.shape
    counts = np.zeros(n_rows, dtype=int)
    details = [[] for _ in range(n_rows)] if keep else None
    live = np.ones(n_rows, dtype=bool)
    for _ in range(params.max_imfs):
        idx = np.flatnonzero(live)
        if idx.size == 0:
            break
        k = count_extrema_rows(s[idx])
        live[idx[k < 2]] = False
        idx, k = idx[k >= 2], k[k >= 2]
        supports = np.array([_support_from_count(n, kk) for kk in k], dtype=int)
        for ell in np.unique(supports):
            group = idx[supports == ell]
            imfs, iters = _sift_rows(s[group], build_kernel_1d(ell), params)
            moved = imfs.any(axis=1)
            live[group[~moved]] = False
            group, imfs, iters = group[moved], imfs[moved], iters[moved]
            s[group] -= imfs
            counts[group] += 1
            if keep:
                for g, imf, it in zip(group, imfs, iters):
                    details[g].append((imf, int(ell), int(it)))
    return s, counts, details


def if_decompose_1d(signal, params=None):
    """Iterative Filtering decomposition of a 1-D signal into an :class:`ImfStack`."""
    s = np.asarray(signal, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError("if_decompose_1d expects a 1-D signal")
    residual, _, details = decompose_rows(s[None, :], params, keep=True)
    parts = details[0]
    return ImfStack(imfs=[p[0] for p in parts], residual=residual[0],
                    supports=[p[1] for p in parts], inner_iters=[p[2] for p in parts])


def mif_decompose_2d(image, params=None):
    """Multidimensional Iterative Filtering of a 2-D array into an :class:`ImfStack`.

    Extraction continues while the row-average or the column-average number of
    extrema is at least two.
    """
    params = params or SiftParams()
    s = np.array(image, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError("mif_decompose_2d expects a 2-D array")
    stack = ImfStack(imfs=[], residual=s)
    while len(stack.imfs) < params.max_imfs and max(mean_extrema(s)) >= 2:
        support = compute_support_2d(s, params.support_shape)
        imf, iters = sift_with_count(s, build_kernel_2d(support), params)
        if not imf.any():
            break
        stack.imfs.append(imf)
        stack.supports.append(support)
        stack.inner_iters.append(iters)
        s = s - imf
    stack.residual = s
    return stack
