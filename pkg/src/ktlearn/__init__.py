"""Sparse feature extraction via transform learning.

Three fit paths share one alternation core: a plain square transform on
raw samples, the same transform learned over a kernel Gram matrix, and a
reduced-rank kernel variant that never touches an N x N matrix after one
eigendecomposition.  A k-NN harness, fit timer, binary model format, and
CLI round the package out.
"""

from .datasets import (Dataset, PreprocessConfig, SynthGroundTruth, load_csv,
                       load_idx, load_idx_file, preprocess, synth_dataset)
from .ektl import (AdmmState, EigFactors, admm_code_update, fit_ektl,
                   truncated_eig)
from .errors import KtlearnError
from .evaluate import (EvalResult, TimingReport, accuracy, bench_fit,
                       confusion_matrix, evaluate_features, knn_classify)
from .kernels import (GramMatrix, KernelSpec, cross_gram, gram, kernel_value,
                      parse_kernel_spec)
from .ktl import KtlModel, fit_ktl, ktl_encode
from .model_io import load_model, save_model
from .transform import (FitReport, TlConfig, TransformModel, fit_transform,
                        hard_threshold, tl_encode, tl_gradient_T, tl_objective,
                        transform_update)

__version__ = "0.1.0"

__all__ = [
    "AdmmState", "Dataset", "EigFactors", "EvalResult", "FitReport",
    "GramMatrix", "KernelSpec", "KtlModel", "KtlearnError", "PreprocessConfig",
    "SynthGroundTruth", "TimingReport", "TlConfig", "TransformModel",
    "accuracy", "admm_code_update", "bench_fit", "confusion_matrix",
    "cross_gram", "evaluate_features", "fit_ektl", "fit_ktl", "fit_transform",
    "gram", "hard_threshold", "kernel_value", "knn_classify", "load_csv",
    "load_idx", "load_idx_file", "load_model", "parse_kernel_spec",
    "preprocess", "save_model", "synth_dataset", "tl_encode", "tl_gradient_T",
    "tl_objective", "transform_update", "truncated_eig", "ktl_encode",
    "__version__",
]
