"""
Command-line interface: ``plumekit <subcommand> ...``.

Subcommands
-----------
decompose   1-D or 2-D Iterative Filtering of a signal / image into IMF files
classify    score a cube against a signature (optional PreP / PostP / reversal)
pipeline    same as classify, configured from a ``key = value`` file plus flags
roc         ROC curve and AUC of a detection map against a ground-truth mask
synth       write a synthetic scene (cube, mask and optionally the signature)
reverse     flip a detection map within its range (x -> max + min - x)

Results go to stdout as ``key=value`` lines; progress and errors go to stderr.
Exit status: 0 success, 2 usage or input parsing problem (including dimension
mismatches), 3 numeric or runtime failure.
"""

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import classifiers, evaluation, hypercube_io as hio, pipelines, synth
from .errors import (DimensionMismatch, EmptyFile, IllegalLabel, IoFailure, MalformedHeader,
                     MissingKey, NonFiniteValue, PlumekitError, TruncatedData, UnknownKey,
                     UnparseableLine, UnparseableValue)
from .mif import CONVOLUTION_METHODS, SUPPORT_SHAPES, SiftParams, if_decompose_1d, mif_decompose_2d

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3

_INPUT_ERRORS = (MalformedHeader, TruncatedData, NonFiniteValue, EmptyFile, UnparseableLine,
                 IllegalLabel, DimensionMismatch, UnknownKey, MissingKey, UnparseableValue,
                 IoFailure)

_SIFT = SiftParams()

# defaults shared by `classify` and `pipeline`; the key names double as the
# pipeline config-file keys
PIPELINE_DEFAULTS = {
    "cube": None,
    "sig": None,
    "mask": None,
    "out": None,
    "format": "binary",
    "method": "ace",
    "prep": False,
    "postp": False,
    "reverse": False,
    "roc_out": None,
    "log_x": False,
    "threads": None,
    "sd": _SIFT.sd_threshold,
    "max_inner_iters": _SIFT.max_inner_iters,
    "max_imfs": _SIFT.max_imfs,
    "support_shape": _SIFT.support_shape,
    "convolution": _SIFT.convolution,
}


class UsageError(Exception):
    pass


def _log(msg):
    print(f"plumekit: {msg}", file=sys.stderr)


# -- argument types ------------------------------------------------------------

def _positive_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not value > 0 or not np.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text!r}")
    return value


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {text!r}")
    return value


def _boolean(text):
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _resolve_threads(value):
    if value is not None:
        return value
    try:
        return pipelines.default_threads()
    except ValueError:
        raise UsageError(f"PLUMEKIT_THREADS must be a positive integer, "
                         f"got {os.environ.get('PLUMEKIT_THREADS')!r}") from None


def _add_sift_flags(p, merged=False):
    # with `merged` the flags default to None so an explicit flag can be told
    # apart from a config-file value; the help text shows the effective default
    def default(value):
        return None if merged else value

    g = p.add_argument_group("sifting")

    def shown(value):
        # "%(default)s" keeps ArgumentDefaultsHelpFormatter from appending it a second time
        return "%(default)s" if not merged else value

    g.add_argument("--sd", type=_positive_float, default=default(_SIFT.sd_threshold),
                   help=f"relative-change stopping threshold (default: {shown(_SIFT.sd_threshold)})")
    g.add_argument("--max-inner-iters", type=_positive_int, default=default(_SIFT.max_inner_iters),
                   help=f"sifting iteration cap per IMF (default: {shown(_SIFT.max_inner_iters)})")
    g.add_argument("--max-imfs", type=_positive_int, default=default(_SIFT.max_imfs),
                   help=f"maximum number of IMFs (default: {shown(_SIFT.max_imfs)})")
    g.add_argument("--support-shape", choices=SUPPORT_SHAPES, default=default(_SIFT.support_shape),
                   help=f"2-D kernel support (default: {shown(_SIFT.support_shape)})")
    g.add_argument("--convolution", choices=CONVOLUTION_METHODS, default=default(_SIFT.convolution),
                   help=f"convolution method (default: {shown(_SIFT.convolution)})")


def _sift_params(values):
    return SiftParams(sd_threshold=values["sd"], max_inner_iters=values["max_inner_iters"],
                      max_imfs=values["max_imfs"], support_shape=values["support_shape"],
                      convolution=values["convolution"])


# -- input helpers -------------------------------------------------------------

def _magic(path):
    try:
        with open(path, "rb") as fh:
            return fh.read(4)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _read_map_any(path):
    magic = _magic(path)
    if magic == hio.DMP1_MAGIC:
        return hio.read_detection_map(path)
    if magic == hio.HSC1_MAGIC:
        cube = hio.read_hypercube(path)
        if cube.shape[2] != 1:
            raise DimensionMismatch(f"{path}: expected a single-band cube, got shape {cube.shape}")
        return cube[:, :, 0]
    return hio.read_map_csv(path)


def _read_decompose_input(path, dims):
    magic = _magic(path)
    if dims == 2:
        return _read_map_any(path)
    if magic == hio.HSC1_MAGIC:
        cube = hio.read_hypercube(path)
        if cube.shape[:2] != (1, 1):
            raise DimensionMismatch(f"{path}: 1-D input needs a 1x1xd cube, got shape {cube.shape}")
        return cube[0, 0]
    if magic == hio.DMP1_MAGIC:
        m = hio.read_detection_map(path)
        if min(m.shape) != 1:
            raise DimensionMismatch(f"{path}: 1-D input needs a 1xn or nx1 map, got shape {m.shape}")
        return m.ravel()
    return hio.read_signature(path)


# -- decompose -----------------------------------------------------------------

def _write_component(x, path, fmt):
    if x.ndim == 1:
        if fmt == "csv":
            hio.write_signature(x, path)
        else:
            hio.write_detection_map(x[None, :], path, "binary")
    else:
        hio.write_detection_map(x, path, "csv" if fmt == "csv" else "binary")


def _read_component(path, fmt, ndim):
    if fmt == "csv":
        return hio.read_signature(path) if ndim == 1 else hio.read_map_csv(path)
    m = hio.read_detection_map(path)
    return m.ravel() if ndim == 1 else m


def _support_text(support):
    return "x".join(str(int(s)) for s in np.atleast_1d(support))


def cmd_decompose(args):
    x = _read_decompose_input(args.input, args.dims)
    if x.size < 3:
        raise DimensionMismatch(f"need at least 3 samples, got shape {x.shape}")
    if args.dims == 2 and min(x.shape) < 3:
        raise DimensionMismatch(f"2-D input needs both dimensions >= 3, got shape {x.shape}")
    params = _sift_params(vars(args))
    _log(f"decomposing {args.dims}-D input of shape {x.shape}")
    try:
        stack = if_decompose_1d(x, params) if args.dims == 1 else mif_decompose_2d(x, params)
    except PlumekitError as exc:
        raise RuntimeError(f"stage 'decompose': {exc}") from exc

    ext = "csv" if args.format == "csv" else "dmp"
    prefix = args.out_prefix
    base = os.path.basename(prefix)
    lines = ["# plumekit decomposition manifest",
             f"dims = {args.dims}",
             f"shape = {'x'.join(str(n) for n in x.shape)}",
             f"format = {args.format}",
             f"sd = {params.sd_threshold!r}",
             f"max_inner_iters = {params.max_inner_iters}",
             f"max_imfs = {params.max_imfs}",
             f"imf_count = {len(stack)}"]
    for k, (imf, support, iters) in enumerate(zip(stack.imfs, stack.supports, stack.inner_iters), 1):
        name = f"{prefix}_imf_{k}.{ext}"
        _write_component(imf, name, args.format)
        lines += [f"imf_{k}_file = {base}_imf_{k}.{ext}",
                  f"imf_{k}_support = {_support_text(support)}",
                  f"imf_{k}_iterations = {iters}"]
    _write_component(stack.residual, f"{prefix}_residual.{ext}", args.format)
    lines.append(f"residual_file = {base}_residual.{ext}")
    manifest = f"{prefix}_manifest.txt"
    try:
        with open(manifest, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {manifest}: {exc}") from exc

    print(f"imf_count={len(stack)}")
    print(f"manifest={manifest}")
    if args.verify:
        ok, err, tol = verify_manifest(manifest, x)
        print(f"verify={'ok' if ok else 'failed'} max_abs_err={err:.3e} tol={tol:.3e}")
        if not ok:
            raise RuntimeError("stage 'verify': IMF files do not sum to the input")
    return EXIT_OK


def verify_manifest(manifest, original):
    """Re-read the files listed in a manifest and check they sum to `original`.

    Returns ``(ok, max_abs_err, tolerance)``; the tolerance accounts for the
    float32 rounding of binary component files.
    """
    with open(manifest, encoding="utf-8") as fh:
        info = synth.parse_key_values(fh.read(), manifest)
    folder = os.path.dirname(manifest)
    ndim = int(info["dims"])
    fmt = info["format"]
    files = [info[f"imf_{k}_file"] for k in range(1, int(info["imf_count"]) + 1)]
    files.append(info["residual_file"])
    parts = [_read_component(os.path.join(folder, f), fmt, ndim) for f in files]
    total = np.sum(parts, axis=0)
    scale = max(float(np.max(np.abs(original))), np.finfo(float).tiny)
    if fmt == "csv":
        tol = 1e-9 * scale
    else:
        # every stored component is rounded to float32
        tol = 2.0 ** -23 * sum(float(np.max(np.abs(p))) for p in parts) + 1e-9 * scale
    err = float(np.max(np.abs(total - original)))
    return err <= tol, err, tol


# -- classify / pipeline -------------------------------------------------------

def _parse_config_file(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    raw = synth.parse_key_values(text, str(path))
    out = {}
    for key, text in raw.items():
        key = key.replace("-", "_")
        if key not in PIPELINE_DEFAULTS:
            raise UnknownKey(key)
        try:
            if key in ("prep", "postp", "reverse", "log_x"):
                out[key] = _boolean(text)
            elif key == "sd":
                out[key] = _positive_float(text)
            elif key in ("max_inner_iters", "max_imfs", "threads"):
                out[key] = _positive_int(text)
            elif key == "method" and text not in classifiers.METHODS:
                raise ValueError(text)
            elif key == "support_shape" and text not in SUPPORT_SHAPES:
                raise ValueError(text)
            elif key == "convolution" and text not in CONVOLUTION_METHODS:
                raise ValueError(text)
            elif key == "format" and text not in ("binary", "csv", "pgm16"):
                raise ValueError(text)
            else:
                out[key] = text
        except (ValueError, argparse.ArgumentTypeError):
            raise UnparseableValue(key, text) from None
    return out


def _merge(args, config):
    values = dict(PIPELINE_DEFAULTS)
    values.update(config)
    for key in PIPELINE_DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return values


def _run_classification(values, require_out=True):
    for key in ("cube", "sig") + (("out",) if require_out else ()):
        if values[key] is None:
            raise UsageError(f"missing required flag --{key.replace('_', '-')}")
    threads = _resolve_threads(values["threads"])
    cube = hio.read_hypercube(values["cube"])
    sig = hio.read_signature(values["sig"])
    hio.check_signature(sig, cube)
    mask = None
    if values["mask"] is not None:
        mask = hio.read_mask(values["mask"])
        if mask.shape != cube.shape[:2]:
            raise DimensionMismatch(f"mask shape {mask.shape} vs cube shape {cube.shape[:2]}")
    config = pipelines.PipelineConfig(method=values["method"], prep=values["prep"],
                                      postp=values["postp"], reverse=values["reverse"],
                                      sift=_sift_params(values), threads=threads)
    _log(f"classifying {cube.shape} cube with {config.method}"
         f"{' +prep' if config.prep else ''}{' +postp' if config.postp else ''}"
         f"{' reversed' if config.reverse else ''} ({threads} threads)")
    result = pipelines.run_pipeline(cube, sig, config, mask=mask, out=values["out"],
                                    out_format=values["format"])
    report = result.report
    print(f"degenerate_pixels={report.degenerate_pixel_count}")
    if report.imf_counts is not None:
        hist = report.imf_histogram()
        print("prep_imf_histogram=" + ",".join(str(int(c)) for c in hist))
    if "postp_imf_count" in result.artifacts:
        print(f"postp_imf_count={result.artifacts['postp_imf_count']}")
    for stage, seconds in report.timing.items():
        print(f"time_{stage}={seconds:.6f}")
    if result.roc is not None:
        if values.get("roc_out"):
            evaluation.roc_to_csv(result.roc, values["roc_out"], values["log_x"])
        print(f"auc={_auc_text(result.roc.auc)}")
    if values["out"] is not None:
        print(f"out={values['out']}")
    return EXIT_OK


def cmd_classify(args):
    return _run_classification(_merge(args, {}))


def cmd_pipeline(args):
    config = _parse_config_file(args.config) if args.config else {}
    return _run_classification(_merge(args, config))


# -- roc / synth / reverse -----------------------------------------------------

def _auc_text(auc):
    text = f"{auc:.17g}"
    return text if any(c in text for c in ".en") else text + ".0"


def cmd_roc(args):
    scores = _read_map_any(args.scores)
    mask = hio.read_mask(args.gt)
    if scores.shape != mask.shape:
        raise DimensionMismatch(f"scores shape {scores.shape} vs mask shape {mask.shape}")
    curve = evaluation.roc(scores, mask)
    if args.out:
        evaluation.roc_to_csv(curve, args.out, args.log_x)
    print(f"n_pos={curve.n_pos}")
    print(f"n_neg={curve.n_neg}")
    print(f"points={len(curve.thresholds)}")
    print(f"AUC={_auc_text(curve.auc)}")
    return EXIT_OK


def cmd_synth(args):
    spec = synth.spec_from_file(args.spec) if args.spec else synth.default_scene_spec(args.seed or 0)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.alpha is not None:
        overrides["alpha"] = args.alpha
    if overrides:
        spec = replace(spec, **overrides)
    if args.sig:
        sig = hio.read_signature(args.sig)
        if sig.shape != (spec.d,):
            raise DimensionMismatch(f"signature length {sig.shape[0]} vs spec bands d={spec.d}")
    else:
        sig = synth.default_signature(spec.d)
    _log(f"generating {spec.h}x{spec.v}x{spec.d} scene, seed {spec.seed}, alpha {spec.alpha}")
    cube, mask = synth.generate(spec, sig)
    hio.write_hypercube(cube, args.out_cube)
    hio.write_mask(mask, args.out_mask)
    if args.out_sig:
        hio.write_signature(sig, args.out_sig)
    print(f"shape={spec.h}x{spec.v}x{spec.d}")
    print(f"plume_pixels={int(np.count_nonzero(mask == hio.PLUME))}")
    print(f"boundary_pixels={int(np.count_nonzero(mask == hio.BOUNDARY))}")
    return EXIT_OK


def cmd_reverse(args):
    scores = _read_map_any(args.scores)
    hio.write_detection_map(classifiers.reverse_scores(scores), args.out, args.format)
    print(f"out={args.out}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def _add_classify_flags(p, from_config=False):
    d = PIPELINE_DEFAULTS
    g = p.add_argument_group("inputs and outputs")
    g.add_argument("--cube", help="input hypercube (HSC1, or ENVI with a .hdr sidecar)"
                   + (" (default: from config)" if from_config else ""))
    g.add_argument("--sig", help="target signature CSV")
    g.add_argument("--mask", help="ground-truth mask (GTM1); selects background pixels and "
                   "enables the AUC (default: none, all pixels are background)")
    g.add_argument("--out", help="detection map output path")
    g.add_argument("--format", choices=("binary", "csv", "pgm16"),
                   help=f"detection map format (default: {d['format']})")
    g.add_argument("--roc-out", help="with --mask, also write the ROC curve CSV here (default: none)")
    g.add_argument("--log-x", action=argparse.BooleanOptionalAction,
                   help=f"mark the ROC CSV for a log-scaled x axis (default: {d['log_x']})")
    g = p.add_argument_group("detection")
    g.add_argument("--method", choices=classifiers.METHODS,
                   help=f"detector (default: {d['method']})")
    g.add_argument("--prep", action=argparse.BooleanOptionalAction,
                   help=f"mean removal plus per-pixel trend removal first (default: {d['prep']})")
    g.add_argument("--postp", action=argparse.BooleanOptionalAction,
                   help=f"remove the first 2-D IMF from the map (default: {d['postp']})")
    g.add_argument("--reverse", action=argparse.BooleanOptionalAction,
                   help=f"flip scores within their range (default: {d['reverse']})")
    g.add_argument("--threads", type=_positive_int,
                   help="worker threads for PreP (default: $PLUMEKIT_THREADS, else all CPUs)")
    _add_sift_flags(p, merged=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="plumekit", description=__doc__.split("\n\n")[0].strip(),
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("decompose", help="Iterative Filtering of a 1-D signal or 2-D image",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--input", required=True,
                   help="1-D signature CSV, DMP1 map, CSV map (2-D) or HSC1 cube")
    p.add_argument("--dims", type=int, choices=(1, 2), default=1, help="decomposition dimension")
    p.add_argument("--out-prefix", required=True,
                   help="output path prefix; writes <prefix>_imf_<k>, <prefix>_residual "
                   "and <prefix>_manifest.txt")
    p.add_argument("--format", choices=("csv", "binary"), default="csv",
                   help="component file format (csv keeps full double precision)")
    p.add_argument("--verify", action="store_true",
                   help="re-read the written files and check that they sum to the input")
    _add_sift_flags(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("classify", help="score a cube against a target signature",
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    _add_classify_flags(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("pipeline", help="classify, configured from a key = value file",
                       formatter_class=argparse.RawDescriptionHelpFormatter,
                       description="Every flag can also be given as a 'key = value' line in "
                       "the --config file (flag names with underscores); flags win.")
    p.add_argument("--config", help="pipeline config file (default: none)")
    _add_classify_flags(p, from_config=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("roc", help="ROC curve and AUC of a detection map",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--scores", required=True, help="detection map (DMP1, single-band HSC1 or CSV)")
    p.add_argument("--gt", required=True, help="ground-truth mask (GTM1)")
    p.add_argument("--out", help="ROC curve CSV output path")
    p.add_argument("--log-x", action="store_true", help="mark the CSV for a log-scaled x axis")
    p.set_defaults(func=cmd_roc)

    p = sub.add_parser("synth", help="generate a synthetic scene",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--spec", help="scene spec file (key = value); default is the 64x64x40 scene")
    p.add_argument("--sig", help="target signature CSV; default is the built-in signature")
    p.add_argument("--seed", type=int, help="override the seed in the scene spec")
    p.add_argument("--alpha", type=float, help="override the plume strength")
    p.add_argument("--out-cube", required=True, help="HSC1 output path")
    p.add_argument("--out-mask", required=True, help="GTM1 output path")
    p.add_argument("--out-sig", help="also write the signature used")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("reverse", help="flip a detection map within its range",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    p.add_argument("--scores", required=True, help="detection map (DMP1, single-band HSC1 or CSV)")
    p.add_argument("--out", required=True, help="output path")
    p.add_argument("--format", choices=("binary", "csv", "pgm16"), default="binary")
    p.set_defaults(func=cmd_reverse)
    return parser


def _unwrap(exc):
    while isinstance(exc, pipelines.StageError):
        exc = exc.cause
    return exc


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        _log(f"{args.command}: {exc}")
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 -- mapped onto the exit-code contract
        stage = getattr(exc, "stage", None)
        cause = _unwrap(exc)
        where = f" (stage '{stage}')" if stage else ""
        _log(f"{args.command}{where}: {type(cause).__name__}: {cause}")
        if isinstance(cause, _INPUT_ERRORS):
            return EXIT_USAGE
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
