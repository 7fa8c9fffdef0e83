"""Dense statevector and density-matrix linear algebra.

Conventions
-----------
Qubit 0 is the leftmost tensor factor, i.e. the most significant bit of the
amplitude index.  States are plain complex ``numpy`` arrays; density matrices
and unitaries are square complex arrays.  Every function returns new arrays
and never mutates its inputs.
"""

import numpy as np

from ._validation import (
    check_angles,
    check_hermitian,
    check_qubit_indices,
    check_square,
    num_qubits_of,
)
from .exceptions import InvalidArgumentError

__all__ = [
    "PAULI_I",
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "CNOT",
    "rx_gate",
    "ry_gate",
    "rz_gate",
    "apply_gate",
    "haar_random_unitary",
    "random_layers_unitary",
    "zero_state",
    "product_state",
    "product_states",
    "density_matrix",
    "partial_trace",
    "reduced_density_matrices",
    "purity",
    "hs_inner",
    "expectation",
    "pauli_basis",
]

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def _check_angle(angle):
    angle = float(angle)
    if not np.isfinite(angle):
        raise InvalidArgumentError(f"rotation angle must be finite, got {angle}")
    return angle


def rx_gate(angle):
    """Return ``exp(-i angle/2 X)``."""
    a = _check_angle(angle) / 2
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry_gate(angle):
    a = _check_angle(angle) / 2
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_gate(angle):
    a = _check_angle(angle) / 2
    return np.array([[np.exp(-1j * a), 0], [0, np.exp(1j * a)]], dtype=complex)


def _apply_to_tensor(tensor, gate, targets, num_qubits):
    # tensor has shape (2,)*num_qubits + batch_shape
    k = len(targets)
    g = gate.reshape((2,) * (2 * k))
    out = np.tensordot(g, tensor, axes=(list(range(k, 2 * k)), list(targets)))
    # contracted axes come first in the result; move them back into place
    return np.moveaxis(out, list(range(k)), list(targets))


def apply_gate(state, gate, targets):
    """Apply ``gate`` to the qubits ``targets`` of a statevector.

    Parameters
    ----------
    state : array of shape (2**d,)
    gate : array of shape (2**k, 2**k)
        Unitary acting on the ordered ``targets``; the first target is the
        most significant qubit of the gate's index.
    targets : sequence of int
        ``k`` distinct qubit indices.

    Returns
    -------
    ndarray of shape (2**d,)
    """
    state = np.asarray(state, dtype=complex)
    if state.ndim != 1:
        raise InvalidArgumentError("state must be a 1-D amplitude vector")
    d = num_qubits_of(state.size)
    if d == 0:
        raise InvalidArgumentError("state must hold at least one qubit")
    gate = check_square(np.asarray(gate, dtype=complex), "gate")
    targets = check_qubit_indices(targets, d)
    if gate.shape[0] != 2 ** len(targets):
        raise InvalidArgumentError(
            f"gate of dimension {gate.shape[0]} does not act on {len(targets)} qubits"
        )
    out = _apply_to_tensor(state.reshape((2,) * d), gate, targets, d)
    return out.reshape(-1)


def _apply_to_columns(matrix, gate, targets, num_qubits):
    dim = 2**num_qubits
    t = matrix.reshape((2,) * num_qubits + (dim,))
    return _apply_to_tensor(t, gate, targets, num_qubits).reshape(dim, dim)


def _haar_batch(dim, count, rng):
    z = rng.standard_normal((count, dim, dim)) + 1j * rng.standard_normal((count, dim, dim))
    q, r = np.linalg.qr(z / np.sqrt(2))
    diag = np.diagonal(r, axis1=1, axis2=2)
    # rescale column j by the phase of R_jj; plain QR is not Haar distributed
    return q * (diag / np.abs(diag))[:, None, :]


def haar_random_unitary(dim, rng=None):
    """Sample a unitary from the Haar measure on U(dim).

    Uses a complex Ginibre matrix, its QR factorization and the phase
    correction by the diagonal of R.
    """
    dim = int(dim)
    if dim < 1:
        raise InvalidArgumentError(f"dimension must be positive, got {dim}")
    rng = np.random.default_rng(rng)
    return _haar_batch(dim, 1, rng)[0]


_ROTATIONS = (rx_gate, ry_gate, rz_gate)


def random_layers_unitary(num_qubits, num_layers, rng=None):
    """Random layered circuit unitary on ``num_qubits`` qubits.

    Each layer applies one rotation about a uniformly chosen axis in
    {X, Y, Z} with a uniform angle in [0, 2pi) on a uniformly chosen qubit,
    followed by a CNOT on a uniformly chosen ordered qubit pair (omitted for
    a single qubit).  The result depends only on the seed.
    """
    num_qubits = int(num_qubits)
    num_layers = int(num_layers)
    if num_qubits < 1:
        raise InvalidArgumentError("num_qubits must be >= 1")
    if num_layers < 0:
        raise InvalidArgumentError("num_layers must be >= 0")
    rng = np.random.default_rng(rng)
    dim = 2**num_qubits
    u = np.eye(dim, dtype=complex)
    for _ in range(num_layers):
        axis = int(rng.integers(3))
        angle = float(rng.uniform(0.0, 2 * np.pi))
        qubit = int(rng.integers(num_qubits))
        u = _apply_to_columns(u, _ROTATIONS[axis](angle), (qubit,), num_qubits)
        if num_qubits > 1:
            control, target = (int(i) for i in rng.choice(num_qubits, size=2, replace=False))
            u = _apply_to_columns(u, CNOT, (control, target), num_qubits)
    return u


def zero_state(num_qubits):
    state = np.zeros(2 ** int(num_qubits), dtype=complex)
    state[0] = 1.0
    return state


def product_states(X):
    """Batched ``R_X`` angle encoding: row ``x`` maps to ``(x) R_X(x_i)|0>``.

    ``X`` has shape (n, d); the result has shape (n, 2**d).
    """
    X = np.asarray(X, dtype=float)
    half = X / 2
    # single-qubit amplitudes cos(x/2)|0> - i sin(x/2)|1>
    local = np.stack([np.cos(half), -1j * np.sin(half)], axis=-1)
    out = local[:, 0, :]
    for i in range(1, X.shape[1]):
        out = (out[:, :, None] * local[:, i, None, :]).reshape(X.shape[0], -1)
    return out


def product_state(x):
    """Statevector ``R_X(x_0) |0> (x) ... (x) R_X(x_{d-1}) |0>``."""
    x = check_angles(x)
    return product_states(x[None, :])[0]


def density_matrix(state):
    state = np.asarray(state, dtype=complex)
    return np.outer(state, state.conj())


def _split_kept(state_batch, keep, num_qubits):
    # reorder qubits to (keep..., rest...) and flatten into (n, 2^m, 2^(d-m))
    n = state_batch.shape[0]
    rest = [q for q in range(num_qubits) if q not in keep]
    t = state_batch.reshape((n,) + (2,) * num_qubits)
    t = np.transpose(t, [0] + [1 + q for q in keep] + [1 + q for q in rest])
    return t.reshape(n, 2 ** len(keep), -1)


def reduced_density_matrices(states, keep):
    """Reduced density matrices of a batch of pure states.

    Parameters
    ----------
    states : array of shape (n, 2**d)
    keep : iterable of int
        Kept qubits; they appear in ascending order in the result.

    Returns
    -------
    ndarray of shape (n, 2**m, 2**m)
    """
    states = np.asarray(states, dtype=complex)
    d = num_qubits_of(states.shape[1])
    keep = tuple(sorted(check_qubit_indices(keep, d)))
    psi = _split_kept(states, keep, d)
    rho = np.einsum("nar,nbr->nab", psi, psi.conj())
    return (rho + np.conj(np.swapaxes(rho, 1, 2))) / 2


def partial_trace(dm, keep):
    """Trace out every qubit not in ``keep``.

    ``keep`` is treated as a set: the kept qubits appear in ascending order
    in the reduced matrix.  The result is symmetrized to remove round-off
    asymmetry.
    """
    dm = check_square(np.asarray(dm, dtype=complex), "density matrix")
    d = num_qubits_of(dm.shape[0])
    keep = tuple(sorted(check_qubit_indices(keep, d)))
    rest = [q for q in range(d) if q not in keep]
    m = len(keep)
    t = dm.reshape((2,) * (2 * d))
    perm = list(keep) + rest + [d + q for q in keep] + [d + q for q in rest]
    t = np.transpose(t, perm).reshape(2**m, 2 ** (d - m), 2**m, 2 ** (d - m))
    rho = np.einsum("arbr->ab", t)
    return (rho + rho.conj().T) / 2


def purity(dm):
    """``Tr[rho^2]``."""
    dm = check_square(np.asarray(dm, dtype=complex), "density matrix")
    return float(np.real(np.vdot(dm.conj().T, dm)))


def hs_inner(a, b):
    """Hilbert-Schmidt inner product ``Tr[a b]`` of two density matrices."""
    a = check_square(np.asarray(a, dtype=complex), "a")
    b = check_square(np.asarray(b, dtype=complex), "b")
    if a.shape != b.shape:
        raise InvalidArgumentError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(np.real(np.sum(a * b.T)))


def expectation(dm, obs):
    """``Tr[rho M]`` for a Hermitian observable ``M``."""
    dm = check_square(np.asarray(dm, dtype=complex), "density matrix")
    obs = check_hermitian(np.asarray(obs, dtype=complex), "observable")
    if dm.shape != obs.shape:
        raise InvalidArgumentError(f"dimension mismatch: {dm.shape} vs {obs.shape}")
    return float(np.real(np.sum(dm * obs.T)))


def pauli_basis(num_qubits):
    """Hilbert-Schmidt orthonormal basis of Hermitian ``2**q x 2**q`` matrices.

    Returns an array of shape (4**q, 2**q, 2**q) of normalized Pauli strings
    ``P / sqrt(2**q)``, ordered lexicographically in (I, X, Y, Z) with qubit 0
    varying slowest.  The first element is the scaled identity.
    """
    num_qubits = int(num_qubits)
    basis = np.ones((1, 1, 1), dtype=complex)
    singles = np.stack([PAULI_I, PAULI_X, PAULI_Y, PAULI_Z])
    for _ in range(num_qubits):
        basis = np.einsum("aij,bkl->abikjl", basis, singles)
        k, dim = basis.shape[0] * 4, basis.shape[2] * 2
        basis = basis.reshape(k, dim, dim)
    return basis / np.sqrt(2**num_qubits)
