"""Spectra of kernel integral operators.

For a feature map ``x -> rho(x)`` the integral operator of
``k(x, y) = Tr[rho(x) rho(y)]`` acts on ``f_M(x) = Tr[rho(x) M]`` through
``M -> int rho(y) Tr[rho(y) M] mu(dy)``.  In row-major vectorization this is
the matrix ``A_mu = int vec(rho) vec(rho)^H mu(dy)``; its Hermitian
eigenmatrices ``A_i`` give the eigenfunctions ``Tr[rho(x) A_i]``.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._validation import check_angles, check_hermitian, check_points
from .exceptions import CapacityError, InvalidArgumentError
from .kernels import KernelMatrix, embed_batch, embed_states
from .quantum import pauli_basis, purity, reduced_density_matrices

__all__ = [
    "MeasureSpec",
    "SpectralDecomposition",
    "PurityBoundReport",
    "mean_density",
    "second_moment_operator",
    "operator_spectrum",
    "eigenfunction_eval",
    "purity_bound_check",
    "product_spectrum",
    "gram_spectrum",
    "closed_form_checks",
]

ZERO_CLIP = 1e-12
DEGENERACY_GAP = 1e-9
MAX_OPERATOR_QUBITS = 5


@dataclass(frozen=True, eq=False)
class MeasureSpec:
    """Data distribution together with the rule used to integrate over it.

    Use the constructors :meth:`uniform_box`, :meth:`point_mass` and
    :meth:`empirical` rather than the raw fields.
    """

    kind: str
    dim: int
    lo: float = 0.0
    hi: float = 2 * np.pi
    points: np.ndarray | None = None
    quadrature: str = "monte_carlo"
    samples: int = 4096
    seed: int = 0
    nodes: int = 64

    @classmethod
    def uniform_box(cls, lo, hi, d, quadrature="monte_carlo", samples=4096, seed=0, nodes=64):
        if quadrature not in ("monte_carlo", "gauss_legendre"):
            raise InvalidArgumentError(f"unknown quadrature {quadrature!r}")
        if quadrature == "gauss_legendre" and d > 2:
            raise InvalidArgumentError("Gauss-Legendre quadrature is limited to d <= 2")
        if not hi > lo:
            raise InvalidArgumentError("empty box")
        return cls("uniform_box", int(d), float(lo), float(hi), None, quadrature,
                   int(samples), int(seed), int(nodes))

    @classmethod
    def point_mass(cls, x):
        x = check_angles(x)
        return cls("point_mass", x.size, points=x[None, :])

    @classmethod
    def empirical(cls, points):
        points = check_points(points)
        return cls("empirical", points.shape[1], points=points)

    def nodes_weights(self):
        """Integration nodes of shape (N, d) and weights summing to one."""
        if self.kind != "uniform_box":
            n = self.points.shape[0]
            return self.points, np.full(n, 1.0 / n)
        if self.quadrature == "monte_carlo":
            rng = np.random.default_rng(self.seed)
            pts = rng.uniform(self.lo, self.hi, size=(self.samples, self.dim))
            return pts, np.full(self.samples, 1.0 / self.samples)
        t, w = np.polynomial.legendre.leggauss(self.nodes)
        t = self.lo + (t + 1) * (self.hi - self.lo) / 2
        w = w / 2
        grids = np.meshgrid(*([t] * self.dim), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        wts = np.ones(1)
        for _ in range(self.dim):
            wts = np.outer(wts, w).ravel()
        return pts, wts


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues in non-increasing order with matching eigen-objects.

    ``eigenobjects[i]`` is either a vector (Gram spectra) or a Hermitian
    matrix (operator spectra) belonging to ``eigenvalues[i]``.
    """

    eigenvalues: np.ndarray
    eigenobjects: np.ndarray
    trace_normalized: bool

    def cluster(self, index, gap=DEGENERACY_GAP):
        """Indices of all eigenvalues degenerate with ``eigenvalues[index]``."""
        ev = self.eigenvalues
        return np.flatnonzero(np.abs(ev - ev[index]) < gap)

    def projector(self, index, gap=DEGENERACY_GAP):
        """Orthogonal projector onto the eigenspace containing ``index``.

        Acts on flattened eigen-objects, so for operator spectra it projects
        row-major vectorized matrices.
        """
        members = self.cluster(index, gap)
        vecs = self.eigenobjects[members].reshape(len(members), -1)
        return vecs.T @ vecs.conj()


@dataclass(frozen=True)
class PurityBoundReport:
    gamma_max: float
    bound: float
    holds: bool


def _measure_points(cfg, measure):
    if measure.dim != cfg.num_qubits:
        raise InvalidArgumentError(
            f"measure lives in dimension {measure.dim}, feature map has {cfg.num_qubits} qubits"
        )
    return measure.nodes_weights()


def _chunks(n, size=512):
    for start in range(0, n, size):
        yield slice(start, min(start + size, n))


def mean_density(cfg, measure):
    """Mean density matrix ``int rho(y) mu(dy)`` of the (reduced) embedding."""
    pts, w = _measure_points(cfg, measure)
    q = cfg.effective_qubits
    out = np.zeros((2**q, 2**q), dtype=complex)
    for sl in _chunks(len(w)):
        states = embed_states(pts[sl], cfg)
        if cfg.projection is None:
            out += (states * w[sl, None]).T @ states.conj()
        else:
            rhos = reduced_density_matrices(states, cfg.projection)
            out += np.einsum("n,nab->ab", w[sl], rhos)
    return (out + out.conj().T) / 2


def second_moment_operator(cfg, measure):
    """``A_mu = int vec(rho(y)) vec(rho(y))^H mu(dy)`` (row-major ``vec``).

    Has shape (4**q, 4**q) with ``q`` the effective number of qubits.
    """
    q = cfg.effective_qubits
    if q > MAX_OPERATOR_QUBITS:
        raise CapacityError(
            f"second-moment operator on {q} qubits exceeds the {MAX_OPERATOR_QUBITS}-qubit cap"
        )
    pts, w = _measure_points(cfg, measure)
    out = np.zeros((4**q, 4**q), dtype=complex)
    for sl in _chunks(len(w), 256):
        v = embed_batch(pts[sl], cfg).reshape(sl.stop - sl.start, -1)
        out += (v * w[sl, None]).T @ v.conj()
    return (out + out.conj().T) / 2


def operator_spectrum(A_mu, atol=1e-8):
    """Eigendecomposition of ``A_mu`` into Hermitian eigenmatrices.

    ``A_mu`` is rewritten in the orthonormal Pauli basis, where a
    Hermiticity-preserving operator becomes a real symmetric matrix; its
    eigenvectors then map back to Hermitian matrices that are orthonormal
    under ``Tr[A_i A_j]``.  Eigenvalues below 1e-12 in magnitude are set to 0.
    """
    A_mu = check_hermitian(np.asarray(A_mu, dtype=complex), "A_mu", atol=atol)
    dim2 = A_mu.shape[0]
    q = round(math.log(dim2, 4))
    if 4**q != dim2:
        raise InvalidArgumentError(f"A_mu has size {dim2}, not a power of four")
    basis = pauli_basis(q)
    B = basis.reshape(dim2, dim2).T
    real_form = B.conj().T @ A_mu @ B
    scale = max(1.0, np.abs(real_form).max())
    if np.abs(real_form.imag).max() > atol * scale:
        raise InvalidArgumentError("A_mu does not preserve Hermitian matrices")
    real_form = (real_form.real + real_form.real.T) / 2
    evals, evecs = np.linalg.eigh(real_form)
    order = np.argsort(evals)[::-1]
    evals, evecs = evals[order], evecs[:, order]
    evals = np.where(np.abs(evals) < ZERO_CLIP, 0.0, evals)
    mats = np.einsum("ki,kab->iab", evecs, basis)
    mats = (mats + np.conj(np.swapaxes(mats, 1, 2))) / 2
    return SpectralDecomposition(evals, mats, bool(abs(evals.sum() - 1) <= 1e-6))


def eigenfunction_eval(A, x, cfg):
    """``Tr[rho(x) A]``; ``x`` may be one angle vector or a 2-D batch."""
    A = check_hermitian(np.asarray(A, dtype=complex), "A")
    q = cfg.effective_qubits
    if A.shape != (2**q, 2**q):
        raise InvalidArgumentError(f"matrix of shape {A.shape} does not act on {q} qubits")
    x = np.asarray(x, dtype=float)
    single = x.ndim <= 1
    rhos = embed_batch(np.atleast_2d(x), cfg)
    vals = np.real(np.einsum("nab,ba->n", rhos, A))
    return float(vals[0]) if single else vals


def purity_bound_check(cfg, measure, gram_spec):
    """Compare the top Gram eigenvalue with ``sqrt(Tr[rho_mu^2])``.

    ``gram_spec`` holds eigenvalues of ``K / n``; a sampling slack of
    ``3 / sqrt(n)`` is allowed.
    """
    n = len(gram_spec.eigenvalues)
    gamma_max = float(gram_spec.eigenvalues[0])
    bound = math.sqrt(purity(mean_density(cfg, measure)))
    return PurityBoundReport(gamma_max, bound, gamma_max <= bound + 3 / math.sqrt(n))


def product_spectrum(eigenvalues, d, rtol=1e-12):
    """Eigenvalues of a d-fold product kernel from the one-factor spectrum.

    Returns ``[(value, multiplicity), ...]`` with equal products merged,
    sorted by decreasing value.
    """
    ev = np.asarray(eigenvalues, dtype=float).ravel()
    d = int(d)
    if d < 1:
        raise InvalidArgumentError("d must be >= 1")
    terms = []
    for combo in itertools.combinations_with_replacement(range(ev.size), d):
        counts = np.bincount(combo, minlength=ev.size)
        mult = math.factorial(d)
        for c in counts:
            mult //= math.factorial(int(c))
        terms.append((float(np.prod(ev[list(combo)])), mult))
    terms.sort(key=lambda t: -t[0])
    merged = []
    for value, mult in terms:
        if merged and math.isclose(value, merged[-1][0], rel_tol=rtol, abs_tol=1e-300):
            merged[-1] = (merged[-1][0], merged[-1][1] + mult)
        else:
            merged.append((value, mult))
    return merged


def gram_spectrum(K):
    """Eigenpairs of ``K / n`` (empirical integral-operator spectrum)."""
    values = K.values if isinstance(K, KernelMatrix) else np.asarray(K, dtype=float)
    n = values.shape[0]
    evals, evecs = np.linalg.eigh((values + values.T) / (2 * n))
    order = np.argsort(evals)[::-1]
    evals = evals[order]
    evals = np.where(np.abs(evals) < ZERO_CLIP, 0.0, evals)
    return SpectralDecomposition(evals, evecs[:, order].T, bool(abs(evals.sum() - 1) <= 1e-6))


ONE_QUBIT_OPERATOR = np.array(
    [[3, 0, 0, 1], [0, 1, -1, 0], [0, -1, 1, 0], [1, 0, 0, 3]], dtype=complex
) / 8
ONE_QUBIT_EIGENVALUES = np.array([0.5, 0.25, 0.25, 0.0])


def closed_form_checks(grid_points=50):
    """Closed-form spectral facts of the one-qubit cosine embedding.

    Uses the uniform measure on [-pi, pi] with 64-node Gauss-Legendre
    quadrature.  Eigenfunctions are checked through the eigenspace
    projectors, so degenerate eigenvalues and eigenvector signs do not
    matter.  Returns ``[(name, passed, detail), ...]``.
    """
    from .kernels import FeatureMapConfig
    from .quantum import PAULI_I, PAULI_X, PAULI_Z

    cfg = FeatureMapConfig(1)
    measure = MeasureSpec.uniform_box(-np.pi, np.pi, 1, quadrature="gauss_legendre", nodes=64)
    A = second_moment_operator(cfg, measure)
    spec = operator_spectrum(A)
    checks = []
    err = float(np.abs(A - ONE_QUBIT_OPERATOR).max())
    checks.append(("second-moment operator equals (1/8)[[3,0,0,1],...]", err <= 1e-8, f"max err {err:.2e}"))
    err = float(np.abs(spec.eigenvalues - ONE_QUBIT_EIGENVALUES).max())
    checks.append(("eigenvalues (1/2, 1/4, 1/4, 0)", err <= 1e-6,
                   "eigenvalues " + ", ".join(f"{v:.6g}" for v in spec.eigenvalues)))
    x = np.linspace(-np.pi, np.pi, grid_points)
    h3 = np.array([[0, 1j], [-1j, 0]])
    refs = [
        ("f1(x) = 1", PAULI_I, 0, lambda v: np.ones_like(v), False),
        ("f2(x) = cos x", PAULI_Z, 1, np.cos, False),
        ("|f3(x)| = |sin x|", h3, 1, np.sin, True),
        ("f4(x) = 0", PAULI_X, 3, np.zeros_like, False),
    ]
    for name, H, index, expected, use_abs in refs:
        P = spec.projector(index)
        vec = H.reshape(-1)
        inside = float(np.abs(P @ vec - vec).max())
        Hp = (P @ vec).reshape(2, 2)
        Hp = (Hp + Hp.conj().T) / 2
        f = eigenfunction_eval(Hp, x[:, None], cfg)
        target = expected(x)
        if use_abs:
            f, target = np.abs(f), np.abs(target)
        err = max(float(np.abs(f - target).max()), inside)
        checks.append((name, err <= 1e-6, f"max err {err:.2e}"))
    return checks
