"""
plumekit: gas plume detection in hyperspectral cubes.

Iterative Filtering decompositions (1-D and 2-D) used as a spectral
pre-processing step (PreP) and a detection-map post-processing step (PostP)
around the COS, MF and ACE detectors, plus ROC evaluation, binary file
formats and a deterministic synthetic scene generator.
"""

from . import classifiers, evaluation, hypercube_io, mif, pipelines, synth
from .classifiers import (BackgroundStats, ace_score, classify, cos_score, estimate_background,
                          mf_score, whiten)
from .errors import PlumekitError
from .evaluation import RocCurve, auc_of, confusion_at, roc
from .mif import ImfStack, SiftParams, if_decompose_1d, mif_decompose_2d
from .pipelines import PipelineConfig, postp, prep, run_pipeline
from .synth import SceneSpec, default_scene_spec, default_signature, generate

__version__ = "0.1.0"

__all__ = [
    "classifiers", "evaluation", "hypercube_io", "mif", "pipelines", "synth",
    "BackgroundStats", "ace_score", "classify", "cos_score", "estimate_background",
    "mf_score", "whiten", "PlumekitError", "RocCurve", "auc_of", "confusion_at", "roc",
    "ImfStack", "SiftParams", "if_decompose_1d", "mif_decompose_2d",
    "PipelineConfig", "postp", "prep", "run_pipeline",
    "SceneSpec", "default_scene_spec", "default_signature", "generate",
]
