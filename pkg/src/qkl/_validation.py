"""Small input-validation helpers shared by the modules."""

import numpy as np

from .exceptions import InvalidArgumentError

HERMITIAN_TOL = 1e-10


def num_qubits_of(dim):
    """Return ``q`` such that ``dim == 2**q`` or raise."""
    dim = int(dim)
    if dim < 1 or dim & (dim - 1):
        raise InvalidArgumentError(f"dimension {dim} is not a power of two")
    return dim.bit_length() - 1


def check_square(matrix, name="matrix"):
    matrix = np.asarray(matrix)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidArgumentError(f"{name} must be square, got shape {matrix.shape}")
    return matrix


def check_hermitian(matrix, name="matrix", atol=HERMITIAN_TOL):
    matrix = check_square(matrix, name)
    if not np.allclose(matrix, matrix.conj().T, atol=atol, rtol=0.0):
        raise InvalidArgumentError(f"{name} is not Hermitian")
    return matrix


def check_angles(x, num_qubits=None):
    """Validate an angle vector (one angle per qubit)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1 or x.size == 0:
        raise InvalidArgumentError("angle vector must be one-dimensional and nonempty")
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("angle vector contains non-finite entries")
    if num_qubits is not None and x.size != num_qubits:
        raise InvalidArgumentError(f"expected {num_qubits} angles, got {x.size}")
    return x


def check_points(X, num_qubits=None):
    """Validate a 2-D array of angle vectors, one row per point."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise InvalidArgumentError(f"points must form a nonempty 2-D array, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("points contain non-finite entries")
    if num_qubits is not None and X.shape[1] != num_qubits:
        raise InvalidArgumentError(f"points have {X.shape[1]} coordinates, expected {num_qubits}")
    return X


def check_qubit_indices(indices, num_qubits, *, allow_empty=False):
    """Return a tuple of distinct, in-range qubit indices (order preserved)."""
    indices = tuple(int(i) for i in indices)
    if not indices and not allow_empty:
        raise InvalidArgumentError("qubit index set must be nonempty")
    if len(set(indices)) != len(indices):
        raise InvalidArgumentError(f"qubit indices {indices} are not distinct")
    for i in indices:
        if not 0 <= i < num_qubits:
            raise InvalidArgumentError(f"qubit index {i} out of range for {num_qubits} qubits")
    return indices
