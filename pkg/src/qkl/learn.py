"""Kernel ridge regression and alignment diagnostics."""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .exceptions import InvalidArgumentError, SingularSystemError, UndefinedAlignmentError
from .kernels import Entangler, FeatureMapConfig, KernelMatrix, center_gram, gram

__all__ = [
    "DEFAULT_REGULARIZATION",
    "FALLBACK_REGULARIZATION",
    "KernelRidgeModel",
    "AlignmentReport",
    "krr_fit",
    "krr_fit_with_fallback",
    "krr_predict",
    "mse",
    "kernel_target_alignment",
    "task_model_alignment",
    "alignment_report",
    "QuantumKernelRidge",
]

logger = logging.getLogger(__name__)

DEFAULT_REGULARIZATION = {"k": 1e-3, "quantum": 1e-3, "rbf": 1e-3, "q": 0.0, "qw": 0.0}
FALLBACK_REGULARIZATION = 1e-10
MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class KernelRidgeModel:
    """Dual weights of a fitted ridge regressor plus the separately fit mean."""

    dual_coef: np.ndarray
    mean_offset: float
    reg: float


@dataclass(frozen=True, eq=False)
class AlignmentReport:
    kta: float
    curve: np.ndarray


def _values(K):
    return K.values if isinstance(K, KernelMatrix) else np.asarray(K, dtype=float)


def krr_fit(K, y, reg):
    """Solve ``(K + reg id) alpha = y - mean(y)`` by Cholesky.

    Raises
    ------
    SingularSystemError
        If ``reg == 0`` and ``K`` has condition number above 1e12, or if the
        regularized matrix is not positive definite.
    """
    K = _values(K)
    y = np.asarray(y, dtype=float).ravel()
    n = K.shape[0]
    if K.shape != (n, n):
        raise InvalidArgumentError(f"kernel matrix must be square, got {K.shape}")
    if y.size != n:
        raise InvalidArgumentError(f"{y.size} labels for a {n}x{n} kernel matrix")
    reg = float(reg)
    if not reg >= 0:
        raise InvalidArgumentError(f"regularization must be >= 0, got {reg}")
    K = (K + K.T) / 2
    if reg == 0:
        evals = np.linalg.eigvalsh(K)
        if evals[0] <= 0 or evals[-1] / evals[0] > MAX_CONDITION:
            raise SingularSystemError(
                "kernel matrix is numerically singular; use a positive regularization"
            )
    offset = float(y.mean())
    try:
        factor = cho_factor(K + reg * np.eye(n), lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("regularized kernel matrix is not positive definite") from exc
    return KernelRidgeModel(cho_solve(factor, y - offset), offset, reg)


def krr_fit_with_fallback(K, y, reg):
    """:func:`krr_fit`, retrying with a tiny ridge when ``reg == 0`` is refused.

    Returns the model; ``model.reg`` records the ridge actually used.
    """
    try:
        return krr_fit(K, y, reg)
    except SingularSystemError:
        if reg != 0:
            raise
        logger.info("singular system at reg=0, refitting with reg=%g", FALLBACK_REGULARIZATION)
        return krr_fit(K, y, FALLBACK_REGULARIZATION)


def krr_predict(model, K_cross):
    """``K_cross @ alpha + mean`` for ``K_cross`` of shape (n_test, n_train)."""
    K_cross = _values(K_cross)
    if K_cross.ndim != 2 or K_cross.shape[1] != model.dual_coef.size:
        raise InvalidArgumentError(
            f"cross-kernel shape {K_cross.shape} does not match {model.dual_coef.size} training points"
        )
    return K_cross @ model.dual_coef + model.mean_offset


def mse(pred, truth):
    pred = np.asarray(pred, dtype=float).ravel()
    truth = np.asarray(truth, dtype=float).ravel()
    if pred.size != truth.size:
        raise InvalidArgumentError(f"length mismatch: {pred.size} vs {truth.size}")
    return float(np.mean((pred - truth) ** 2))


def kernel_target_alignment(K, y, centered=False):
    """Empirical alignment ``<K, y y^T>_F / (||K||_F ||y y^T||_F)``.

    With ``centered=True`` the kernel matrix is double-centered and the mean
    of ``y`` removed first (both are no-ops on already centered inputs).
    """
    if centered and not (isinstance(K, KernelMatrix) and K.centered):
        K = center_gram(K)
    K = _values(K)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != K.shape[0]:
        raise InvalidArgumentError(f"{y.size} labels for a kernel matrix of size {K.shape[0]}")
    if centered:
        y = y - y.mean()
    y_norm2 = float(y @ y)
    k_norm = float(np.linalg.norm(K))
    if y_norm2 <= 1e-300 or k_norm == 0.0:
        raise UndefinedAlignmentError("alignment undefined for a vanishing target or kernel")
    return float(y @ K @ y) / (k_norm * y_norm2)


def task_model_alignment(K, y):
    """Cumulative share ``C(i)`` of the target captured by the top ``i`` components.

    ``K`` and ``y`` are expected to be centered already.  ``C[i - 1]`` is
    ``C(i)``; the curve is non-decreasing and ends at 1.
    """
    K = _values(K)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != K.shape[0] or y.size < 2:
        raise InvalidArgumentError("need at least two labels matching the kernel size")
    evals, evecs = np.linalg.eigh((K + K.T) / 2)
    coef2 = (evecs[:, np.argsort(evals)[::-1]].T @ y) ** 2
    total = coef2.sum()
    if total <= 1e-300:
        raise UndefinedAlignmentError("task-model alignment undefined for a zero target")
    return np.minimum(np.cumsum(coef2) / total, 1.0)


def alignment_report(K, y):
    """Centered kernel-target alignment and task-model curve of ``(K, y)``."""
    Kc = K if isinstance(K, KernelMatrix) and K.centered else center_gram(K)
    yc = np.asarray(y, dtype=float).ravel()
    yc = yc - yc.mean()
    return AlignmentReport(kernel_target_alignment(Kc, yc, centered=True), task_model_alignment(Kc, yc))


class QuantumKernelRidge(RegressorMixin, BaseEstimator):
    """Kernel ridge regression with quantum or classical kernels.

    The label mean is fit separately and the ridge acts on the centered
    labels only.

    Parameters
    ----------
    kernel : {"q", "qw", "k", "quantum", "rbf"}, default="q"
        See :func:`qkl.kernels.gram`.
    reg : float or None, default=None
        Ridge strength; ``None`` selects 1e-3 for ``k``/``rbf`` and 0 for
        the biased kernels.  A refused ``reg=0`` falls back to 1e-10.
    feature_map : FeatureMapConfig or None, default=None
        Explicit feature map.  When None one is built at fit time from
        ``entangler``, ``depth`` and ``random_state``.
    entangler : {"none", "haar", "layers"}, default="haar"
    depth : int or None, default=None
    random_state : int or None, default=None

    Attributes
    ----------
    dual_coef_ : ndarray of shape (n_samples,)
    intercept_ : float
    reg_ : float
        Ridge strength actually used.
    X_fit_ : ndarray of shape (n_samples, n_features)
    feature_map_ : FeatureMapConfig or None
    """

    def __init__(self, kernel="q", reg=None, feature_map=None, entangler="haar", depth=None,
                 random_state=None):
        self.kernel = kernel
        self.reg = reg
        self.feature_map = feature_map
        self.entangler = entangler
        self.depth = depth
        self.random_state = random_state

    def _config(self, num_qubits):
        if self.kernel in ("k", "rbf"):
            return None
        if self.feature_map is not None:
            if self.feature_map.num_qubits != num_qubits:
                raise InvalidArgumentError("feature_map qubit count does not match X")
            return self.feature_map
        return FeatureMapConfig(num_qubits, Entangler(self.entangler, self.random_state, self.depth))

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=float, y_numeric=True)
        self.feature_map_ = self._config(X.shape[1])
        K = gram(X, self.kernel, self.feature_map_)
        reg = DEFAULT_REGULARIZATION[self.kernel] if self.reg is None else self.reg
        model = krr_fit_with_fallback(K, y, reg)
        self.dual_coef_ = model.dual_coef
        self.intercept_ = model.mean_offset
        self.reg_ = model.reg
        self.X_fit_ = X
        return self

    def predict(self, X):
        check_is_fitted(self, "dual_coef_")
        X = validate_data(self, X, dtype=float, reset=False)
        K_cross = gram(X, self.kernel, self.feature_map_, Y=self.X_fit_)
        return krr_predict(KernelRidgeModel(self.dual_coef_, self.intercept_, self.reg_), K_cross)
