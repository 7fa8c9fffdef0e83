"""Feature maps and kernel functions.

The feature map sends an angle vector ``x`` to the state
``V (x)_i R_X(x_i)|0>`` and optionally reduces it to a subset of qubits.
Kernels are Hilbert-Schmidt inner products of these (reduced) density
matrices; the un-projected kernel coincides with the classical product of
``cos^2`` terms whatever ``V`` is.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from ._validation import check_angles, check_points, check_qubit_indices
from .exceptions import InvalidArgumentError
from .quantum import (
    haar_random_unitary,
    pauli_basis,
    product_states,
    random_layers_unitary,
    reduced_density_matrices,
)

__all__ = [
    "Entangler",
    "FeatureMapConfig",
    "KernelMatrix",
    "KERNEL_KINDS",
    "cosine_kernel",
    "rbf_kernel",
    "embed",
    "embed_batch",
    "embed_states",
    "kernel_value",
    "gram",
    "center_gram",
    "shot_estimate",
    "ReducedDensityEmbedding",
]


@dataclass(frozen=True)
class Entangler:
    """Recipe for the unitary ``V`` applied after the angle encoding.

    ``kind`` is ``"none"`` (identity), ``"haar"`` or ``"layers"``.  For
    ``"layers"`` the default depth is ``d**2``.
    """

    kind: str = "none"
    seed: int | None = None
    depth: int | None = None

    def __post_init__(self):
        if self.kind not in ("none", "haar", "layers"):
            raise InvalidArgumentError(f"unknown entangler kind {self.kind!r}")

    def unitary(self, num_qubits):
        if self.kind == "none":
            return None
        rng = np.random.default_rng(self.seed)
        if self.kind == "haar":
            return haar_random_unitary(2**num_qubits, rng)
        depth = num_qubits**2 if self.depth is None else self.depth
        return random_layers_unitary(num_qubits, depth, rng)


@dataclass(frozen=True)
class FeatureMapConfig:
    """Angle-encoding feature map on ``num_qubits`` qubits.

    Attributes
    ----------
    num_qubits : int
    entangler : Entangler
    projection : tuple of int or None
        Kept qubits for the projected kernel, ``None`` for the full state.
    """

    num_qubits: int
    entangler: Entangler = field(default_factory=Entangler)
    projection: tuple | None = None

    def __post_init__(self):
        if int(self.num_qubits) < 1:
            raise InvalidArgumentError("num_qubits must be >= 1")
        if self.projection is not None:
            proj = tuple(sorted(check_qubit_indices(self.projection, self.num_qubits)))
            object.__setattr__(self, "projection", proj)

    @classmethod
    def haar(cls, num_qubits, seed, projection=None):
        return cls(num_qubits, Entangler("haar", seed), projection)

    @classmethod
    def layers(cls, num_qubits, seed, depth=None, projection=None):
        return cls(num_qubits, Entangler("layers", seed, depth), projection)

    def with_projection(self, projection):
        """Same map and same ``V``; a different set of kept qubits."""
        cfg = FeatureMapConfig(self.num_qubits, self.entangler, projection)
        if "unitary" in self.__dict__:
            cfg.__dict__["unitary"] = self.__dict__["unitary"]
        return cfg

    @cached_property
    def unitary(self):
        return self.entangler.unitary(self.num_qubits)

    @property
    def effective_qubits(self):
        return self.num_qubits if self.projection is None else len(self.projection)


KERNEL_KINDS = {"k": "full", "quantum": "full", "q": "biased", "qw": "biased_wrong", "rbf": "rbf"}


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Gram matrix with a tag for the kernel that produced it."""

    values: np.ndarray
    kind: str
    centered: bool = False

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def shape(self):
        return self.values.shape


def _as_values(K):
    return K.values if isinstance(K, KernelMatrix) else np.asarray(K, dtype=float)


def cosine_kernel(x, y):
    """``prod_i cos^2((x_i - y_i) / 2)`` in O(d)."""
    x, y = check_angles(x), check_angles(y)
    if x.shape != y.shape:
        raise InvalidArgumentError(f"length mismatch: {x.size} vs {y.size}")
    return float(np.prod(np.cos((x - y) / 2) ** 2))


def rbf_kernel(x, y):
    """``exp(-||x - y||^2 / 2)``."""
    x, y = np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float))
    if x.shape != y.shape:
        raise InvalidArgumentError(f"length mismatch: {x.size} vs {y.size}")
    return float(np.exp(-np.sum((x - y) ** 2) / 2))


def embed_states(X, cfg):
    """Statevectors ``V (x)_i R_X(x_i)|0>`` for every row of ``X``."""
    X = check_points(X, cfg.num_qubits)
    states = product_states(X)
    u = cfg.unitary
    if u is not None:
        states = states @ u.T
    return states


def embed_batch(X, cfg):
    """Density matrices of every row of ``X``, reduced if ``cfg.projection``.

    Returns an array of shape (n, 2**q, 2**q) with ``q`` the effective qubit
    count.
    """
    states = embed_states(X, cfg)
    if cfg.projection is None:
        return np.einsum("ni,nj->nij", states, states.conj())
    return reduced_density_matrices(states, cfg.projection)


def embed(x, cfg):
    """Density matrix of a single angle vector."""
    x = check_angles(x, cfg.num_qubits)
    return embed_batch(x[None, :], cfg)[0]


def _flat(rhos):
    return rhos.reshape(rhos.shape[0], -1)


def kernel_value(x, y, cfg):
    """``Tr[rho(x) rho(y)]`` under the (possibly projected) feature map."""
    x = check_angles(x, cfg.num_qubits)
    y = check_angles(y, cfg.num_qubits)
    rhos = _flat(embed_batch(np.stack([x, y]), cfg))
    return float(np.real(np.vdot(rhos[1], rhos[0])))


def _quantum_gram(X, Y, cfg):
    # each point is simulated once; entries come from the cached embeddings
    if cfg.projection is None:
        sx = embed_states(X, cfg)
        sy = sx if Y is None else embed_states(Y, cfg)
        return np.abs(sx @ sy.conj().T) ** 2
    rx = _flat(embed_batch(X, cfg))
    ry = rx if Y is None else _flat(embed_batch(Y, cfg))
    return np.real(rx @ ry.conj().T)


def _cosine_gram(X, Y):
    diff = X[:, None, :] - Y[None, :, :]
    return np.prod(np.cos(diff / 2) ** 2, axis=2)


def _rbf_gram(X, Y):
    sq = np.sum(X**2, 1)[:, None] + np.sum(Y**2, 1)[None, :] - 2 * X @ Y.T
    return np.exp(-np.maximum(sq, 0.0) / 2)


def gram(X, kernel, cfg=None, Y=None):
    """Assemble a kernel matrix.

    Parameters
    ----------
    X : array of shape (n, d)
    kernel : {"k", "quantum", "q", "qw", "rbf"}
        ``"k"`` is the analytic cosine product kernel, ``"quantum"`` simulates
        ``cfg`` as given, ``"q"`` and ``"qw"`` simulate ``cfg`` projected onto
        qubit 0 and qubit 1 respectively, ``"rbf"`` is the unit-bandwidth
        Gaussian kernel.
    cfg : FeatureMapConfig, optional
        Required for the simulated kernels.
    Y : array of shape (m, d), optional
        Second argument; defaults to ``X`` and yields a symmetric matrix.

    Returns
    -------
    KernelMatrix
        ``values`` has shape (n, m).
    """
    if kernel not in KERNEL_KINDS:
        raise InvalidArgumentError(f"unknown kernel {kernel!r}")
    X = check_points(X)
    Yp = None if Y is None else check_points(Y, X.shape[1])
    kind = KERNEL_KINDS[kernel]
    if kernel == "k":
        K = _cosine_gram(X, X if Yp is None else Yp)
    elif kernel == "rbf":
        K = _rbf_gram(X, X if Yp is None else Yp)
    else:
        if cfg is None:
            raise InvalidArgumentError(f"kernel {kernel!r} needs a FeatureMapConfig")
        if kernel == "q":
            cfg = cfg.with_projection((0,))
        elif kernel == "qw":
            if cfg.num_qubits < 2:
                raise InvalidArgumentError("kernel 'qw' needs at least two qubits")
            cfg = cfg.with_projection((1,))
        elif cfg.projection is not None:
            kind = "biased"
        K = _quantum_gram(X, Yp, cfg)
    if Yp is None:
        K = (K + K.T) / 2
    return KernelMatrix(K, kind)


def center_gram(K):
    """Double centering ``H K H`` with ``H = id - 1 1^T / n``."""
    kind = K.kind if isinstance(K, KernelMatrix) else "unknown"
    K = _as_values(K)
    Kc = K - K.mean(axis=0, keepdims=True)
    Kc = Kc - Kc.mean(axis=1, keepdims=True)
    return KernelMatrix((Kc + Kc.T) / 2, kind, centered=True)


def shot_estimate(x, y, cfg, shots, rng=None):
    """Finite-shot estimate of the full quantum kernel.

    The kernel value is the probability of reading all zeros after running
    ``U(x)`` then ``U(y)^dagger``; ``shots`` Bernoulli draws with that success
    probability are averaged.
    """
    shots = int(shots)
    if shots < 1:
        raise InvalidArgumentError(f"shots must be >= 1, got {shots}")
    if cfg.projection is not None:
        raise InvalidArgumentError("shot estimation is defined for the full kernel only")
    p = min(max(kernel_value(x, y, cfg), 0.0), 1.0)
    rng = np.random.default_rng(rng)
    return rng.binomial(shots, p) / shots


class ReducedDensityEmbedding(TransformerMixin, BaseEstimator):
    """Map angle vectors to real coordinates of their reduced density matrix.

    The output columns are ``Tr[rho(x) P]`` for the normalized Pauli basis on
    the kept qubits, so the linear kernel on the output equals the projected
    quantum kernel.  Composes with any scikit-learn estimator.

    Parameters
    ----------
    entangler : {"none", "haar", "layers"}, default="haar"
    projection : tuple of int or None, default=(0,)
        Kept qubits; ``None`` keeps the full state (4**d features).
    depth : int or None, default=None
        Circuit depth for ``entangler="layers"`` (``d**2`` when None).
    random_state : int or None, default=None
        Seed for ``V``.
    """

    def __init__(self, entangler="haar", projection=(0,), depth=None, random_state=None):
        self.entangler = entangler
        self.projection = projection
        self.depth = depth
        self.random_state = random_state

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=float)
        self.config_ = FeatureMapConfig(
            X.shape[1],
            Entangler(self.entangler, self.random_state, self.depth),
            None if self.projection is None else tuple(self.projection),
        )
        self.basis_ = pauli_basis(self.config_.effective_qubits)
        return self

    def transform(self, X):
        check_is_fitted(self, "config_")
        X = validate_data(self, X, dtype=float, reset=False)
        rhos = embed_batch(X, self.config_)
        return np.real(np.einsum("nab,kba->nk", rhos, self.basis_))
