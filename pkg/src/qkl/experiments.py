"""Seeded data generation and experiment runners.

Every runner returns plain lists of row dicts, sorted by their key columns, so
results are independent of execution order.  Randomness for the cell
``(d, seed_index)`` comes from ``SeedSequence(master_seed,
spawn_key=(stream, d, seed_index, ...))``; data-driven runners share the
dataset stream, so the generalization, spectrum and alignment runs at the
same cell see the same ``V`` and the same samples.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateTargetError, InvalidArgumentError
from .kernels import Entangler, FeatureMapConfig, center_gram, embed_batch, gram
from .learn import (
    DEFAULT_REGULARIZATION,
    kernel_target_alignment,
    krr_fit_with_fallback,
    krr_predict,
    mse,
    task_model_alignment,
)
from .quantum import PAULI_Z, _haar_batch, product_states, reduced_density_matrices
from .spectral import gram_spectrum

__all__ = [
    "KERNEL_TAGS",
    "Dataset",
    "ExperimentConfig",
    "HaarMomentReport",
    "lambda_grid",
    "dataset_seed",
    "generate_dataset",
    "regenerate_dataset",
    "train_test_split",
    "run_generalization",
    "run_spectrum",
    "run_alignment",
    "haar_first_moment",
    "haar_second_moment",
    "verify_haar_moments",
    "verify_concentration",
    "measure_shot_cost",
]

KERNEL_TAGS = ("q", "qw", "k", "rbf")
DATASET_STREAM = 0
MAX_REDRAWS = 10


def lambda_grid():
    """15 log-spaced ridge values from 1e-6 to 1e4."""
    return np.logspace(-6, 4, 15)


def _num_workers():
    raw = os.environ.get("QKL_THREADS", "0").strip() or "0"
    n = int(raw)
    if n <= 0:
        return os.cpu_count() or 1
    return n


def _map_cells(fn, cells):
    workers = min(_num_workers(), max(len(cells), 1))
    if workers <= 1:
        return [fn(c) for c in cells]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, cells))


@dataclass(frozen=True, eq=False)
class Dataset:
    """Inputs in ``[0, 2pi]^d``, noisy labels and the recipe that made them.

    ``clean`` holds the noiseless scaled target ``c f*(x)``.  ``meta`` is
    enough to regenerate the dataset bit for bit.
    """

    X: np.ndarray
    y: np.ndarray
    clean: np.ndarray
    feature_map: FeatureMapConfig
    meta: dict = field(default_factory=dict)


def dataset_seed(master_seed, d, seed_index):
    return np.random.SeedSequence(int(master_seed), spawn_key=(DATASET_STREAM, int(d), int(seed_index)))


def _target(X, cfg):
    rhos = embed_batch(X, cfg.with_projection((0,)))
    return np.real(np.einsum("nab,ba->n", rhos, PAULI_Z))


def generate_dataset(d, n, entangler="haar", seed=None, noise_variance=1e-4, depth=None):
    """Draw a regression task whose target is a first-qubit observable.

    Parameters
    ----------
    d : int
        Number of qubits (and input dimension).
    n : int
        Number of samples.
    entangler : {"none", "haar", "layers"} or Entangler
        A bare kind draws the seed of ``V`` from ``seed``.
    seed : int, SeedSequence or None
        Seeds the ``V`` draw, the inputs and the noise.
    noise_variance : float
    depth : int or None
        Depth of the layered circuit (``d**2`` when None).

    Returns
    -------
    Dataset
        ``f*(x) = Tr[rho_1(x) Z]`` on qubit 0, labels ``c f*(x) + eps`` with
        ``c`` normalizing the sample variance of ``f*`` to one.
    """
    d, n = int(d), int(n)
    if d < 1 or n < 2:
        raise InvalidArgumentError("need d >= 1 and n >= 2")
    if noise_variance < 0:
        raise InvalidArgumentError("noise variance must be non-negative")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng = np.random.default_rng(ss)
    X = rng.uniform(0.0, 2 * np.pi, size=(n, d))
    kind = entangler.kind if isinstance(entangler, Entangler) else entangler
    depth = entangler.depth if isinstance(entangler, Entangler) else depth
    redraws = 0
    while True:
        if isinstance(entangler, Entangler) and redraws == 0:
            ent = entangler
        else:
            ent = Entangler(kind, int(rng.integers(2**63)), depth)
        cfg = FeatureMapConfig(d, ent)
        f_star = _target(X, cfg)
        var = float(np.var(f_star))
        if var >= 1e-12:
            break
        if kind == "none" or redraws >= MAX_REDRAWS:
            raise DegenerateTargetError(f"target variance {var:.3g} after {redraws} redraws")
        redraws += 1
    scale = 1.0 / math.sqrt(var)
    clean = scale * f_star
    y = clean + rng.normal(0.0, math.sqrt(noise_variance), size=n)
    meta = {
        "seed_entropy": ss.entropy,
        "spawn_key": tuple(ss.spawn_key),
        "d": d,
        "n": n,
        "entangler": {"kind": ent.kind, "seed": ent.seed, "depth": ent.depth},
        "requested_entangler": entangler.kind if isinstance(entangler, Entangler) else entangler,
        "requested_seed": entangler.seed if isinstance(entangler, Entangler) else None,
        "depth": depth,
        "observable": "Z on qubit 0",
        "noise_variance": float(noise_variance),
        "scale": scale,
        "redraws": redraws,
    }
    return Dataset(X, y, clean, cfg, meta)


def regenerate_dataset(meta):
    """Rebuild a dataset from :attr:`Dataset.meta`."""
    ss = np.random.SeedSequence(meta["seed_entropy"], spawn_key=meta["spawn_key"])
    if meta["requested_seed"] is not None:
        ent = Entangler(meta["requested_entangler"], meta["requested_seed"], meta["entangler"]["depth"])
    else:
        ent = meta["requested_entangler"]
    return generate_dataset(meta["d"], meta["n"], ent, ss, meta["noise_variance"], meta["depth"])


def train_test_split(n, train_fraction):
    if not 0 < train_fraction < 1:
        raise InvalidArgumentError("train_fraction must lie in (0, 1)")
    n_train = int(round(n * train_fraction))
    n_train = min(max(n_train, 1), n - 1)
    return slice(0, n_train), slice(n_train, n)


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings shared by the data-driven runners.

    ``lambda_policy`` is ``"fixed"`` (per-kernel ridge from ``fixed_lambda``,
    defaulting to 1e-3 for k/rbf and 0 for q/qw) or ``"grid"`` (all 15 values
    of :func:`lambda_grid`).
    """

    d_range: tuple = (7,)
    n: int = 200
    seeds: int = 10
    noise_variance: float = 1e-4
    train_fraction: float = 2 / 3
    lambda_policy: str = "fixed"
    fixed_lambda: dict | None = None
    kernels: tuple = KERNEL_TAGS
    entangler: str = "haar"
    depth: int | None = None
    master_seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise InvalidArgumentError("train_fraction must lie in (0, 1)")
        if self.lambda_policy not in ("fixed", "grid"):
            raise InvalidArgumentError(f"unknown lambda policy {self.lambda_policy!r}")
        unknown = set(self.kernels) - set(KERNEL_TAGS)
        if unknown:
            raise InvalidArgumentError(f"unknown kernels {sorted(unknown)}")
        if self.seeds < 1 or self.n < 3:
            raise InvalidArgumentError("need seeds >= 1 and n >= 3")
        if min(self.d_range) < 1:
            raise InvalidArgumentError("qubit counts must be >= 1")
        if "qw" in self.kernels and min(self.d_range) < 2:
            raise InvalidArgumentError("kernel 'qw' needs at least two qubits")

    def regularization(self, kernel):
        table = dict(DEFAULT_REGULARIZATION)
        table.update(self.fixed_lambda or {})
        return table[kernel]

    def cells(self):
        return [(d, s) for d in self.d_range for s in range(self.seeds)]

    def dataset(self, d, seed_index):
        return generate_dataset(d, self.n, self.entangler, dataset_seed(self.master_seed, d, seed_index),
                                self.noise_variance, self.depth)


def _generalization_cell(config, cell):
    d, s = cell
    data = config.dataset(d, s)
    tr, te = train_test_split(config.n, config.train_fraction)
    rows = []
    for kernel in config.kernels:
        K = gram(data.X, kernel, data.feature_map).values
        K_tr, K_te = K[tr, tr], K[te, tr]
        grid = lambda_grid() if config.lambda_policy == "grid" else [config.regularization(kernel)]
        cell_rows = []
        for reg in grid:
            model = krr_fit_with_fallback(K_tr, data.y[tr], float(reg))
            cell_rows.append({
                "d": d,
                "seed": s,
                "kernel": kernel,
                "lambda": float(model.reg),
                "train_mse": mse(krr_predict(model, K_tr), data.y[tr]),
                "test_mse": mse(krr_predict(model, K_te), data.y[te]),
                "best_test": False,
            })
        best = min(range(len(cell_rows)), key=lambda i: cell_rows[i]["test_mse"])
        cell_rows[best]["best_test"] = True
        rows.extend(cell_rows)
    return rows


def run_generalization(config):
    """Train/test MSE of every kernel for every ``(d, seed)`` cell.

    Rows: ``{d, seed, kernel, lambda, train_mse, test_mse, best_test}``;
    ``lambda`` is the ridge actually used.  Under the grid policy
    ``best_test`` marks the row with the smallest test error per cell and
    kernel; under the fixed policy every row is its own best.
    """
    chunks = _map_cells(lambda c: _generalization_cell(config, c), config.cells())
    rows = [r for chunk in chunks for r in chunk]
    return sorted(rows, key=lambda r: (r["d"], r["seed"], KERNEL_TAGS.index(r["kernel"]), r["lambda"]))


def run_spectrum(config, top=10):
    """Top eigenvalues of ``K_q / n`` on each cell's full sample.

    Rows: ``{d, seed, rank, eigenvalue}`` with ``rank`` starting at 1.
    """
    def cell(c):
        d, s = c
        data = config.dataset(d, s)
        ev = gram_spectrum(gram(data.X, "q", data.feature_map)).eigenvalues[:top]
        return [{"d": d, "seed": s, "rank": i + 1, "eigenvalue": float(v)} for i, v in enumerate(ev)]

    rows = [r for chunk in _map_cells(cell, config.cells()) for r in chunk]
    return sorted(rows, key=lambda r: (r["d"], r["seed"], r["rank"]))


def run_alignment(config):
    """Centered kernel-target alignment and task-model curves.

    Returns ``(kta_rows, curve_rows)`` with rows ``{d, seed, kernel, kta}``
    and ``{d, seed, kernel, i, C}``.
    """
    def cell(c):
        d, s = c
        data = config.dataset(d, s)
        y = data.y - data.y.mean()
        kta_rows, curve_rows = [], []
        for kernel in config.kernels:
            Kc = center_gram(gram(data.X, kernel, data.feature_map))
            kta_rows.append({"d": d, "seed": s, "kernel": kernel,
                             "kta": kernel_target_alignment(Kc, y, centered=True)})
            curve = task_model_alignment(Kc, y)
            curve_rows.extend({"d": d, "seed": s, "kernel": kernel, "i": i + 1, "C": float(v)}
                              for i, v in enumerate(curve))
        return kta_rows, curve_rows

    results = _map_cells(cell, config.cells())
    order = lambda r: (r["d"], r["seed"], KERNEL_TAGS.index(r["kernel"]), r.get("i", 0))
    kta = sorted((r for a, _ in results for r in a), key=order)
    curves = sorted((r for _, b in results for r in b), key=order)
    return kta, curves


def haar_first_moment(i, j, ip, jp, dim):
    """``E[V_ij conj(V_i'j')]`` under the Haar measure on U(dim)."""
    return float(i == ip and j == jp) / dim


def haar_second_moment(idx, dim):
    """``E[V_{i1 j1} V_{i2 j2} conj(V_{i1' j1'}) conj(V_{i2' j2'})]`` on U(dim).

    ``idx = (i1, j1, i2, j2, i1', j1', i2', j2')``.
    """
    i1, j1, i2, j2, k1, l1, k2, l2 = idx
    direct = (i1 == k1) * (j1 == l1) * (i2 == k2) * (j2 == l2)
    swapped = (i1 == k2) * (j1 == l2) * (i2 == k1) * (j2 == l1)
    mixed_a = (i1 == k1) * (j1 == l2) * (i2 == k2) * (j2 == l1)
    mixed_b = (i1 == k2) * (j1 == l1) * (i2 == k1) * (j2 == l2)
    return (direct + swapped) / (dim**2 - 1) - (mixed_a + mixed_b) / (dim * (dim**2 - 1))


@dataclass(frozen=True, eq=False)
class HaarMomentReport:
    rows: list
    first_moment_max_err: float
    second_moment_max_err: float
    tolerance: float
    max_normalized_err: float

    @property
    def passed(self):
        return self.max_normalized_err <= 5.0


def _moment_indices(dim, rng, n_first, n_second):
    first = []
    for t in range(n_first):
        i, j = (int(v) for v in rng.integers(dim, size=2))
        if t % 2 == 0:
            first.append((i, j, i, j))
        else:
            ip, jp = (int(v) for v in rng.integers(dim, size=2))
            first.append((i, j, ip, jp))
    patterns = ("direct", "swapped", "mixed_a", "mixed_b", "random")
    second = []
    for t in range(n_second):
        i1, j1 = (int(v) for v in rng.integers(dim, size=2))
        # coincident indices on every other tuple so all four terms can fire together
        i2 = i1 if t % 4 < 2 else int(rng.integers(dim))
        j2 = j1 if t % 4 in (0, 2) else int(rng.integers(dim))
        pat = patterns[t % len(patterns)]
        if pat == "direct":
            primes = (i1, j1, i2, j2)
        elif pat == "swapped":
            primes = (i2, j2, i1, j1)
        elif pat == "mixed_a":
            primes = (i1, j2, i2, j1)
        elif pat == "mixed_b":
            primes = (i2, j1, i1, j2)
        else:
            primes = tuple(int(v) for v in rng.integers(dim, size=4))
        second.append((i1, j1, i2, j2) + primes)
    # identical tuples would only repeat a row
    return list(dict.fromkeys(first)), list(dict.fromkeys(second))


def _stats(z):
    mean = z.mean()
    se = math.sqrt(float(np.mean(np.abs(z - mean) ** 2)) / z.size)
    return mean, se


def verify_haar_moments(d, num_samples=10_000, rng=None, n_first=24, n_second=60):
    """Monte-Carlo check of the first and second Haar moments on U(2**d).

    Returns a :class:`HaarMomentReport` whose rows are
    ``{moment_id, empirical, analytic, stderr}`` (``empirical`` is the real
    part; the error uses the full complex mean).
    """
    d = int(d)
    if not 1 <= d <= 4:
        raise InvalidArgumentError("moment verification supports 1 <= d <= 4")
    rng = np.random.default_rng(rng)
    dim = 2**d
    V = _haar_batch(dim, int(num_samples), rng)
    first, second = _moment_indices(dim, rng, n_first, n_second)
    rows, err1, err2, worst, tol = [], 0.0, 0.0, 0.0, 0.0
    for i, j, ip, jp in first:
        z = V[:, i, j] * V[:, ip, jp].conj()
        mean, se = _stats(z)
        exact = haar_first_moment(i, j, ip, jp, dim)
        err = abs(mean - exact)
        err1, tol = max(err1, err), max(tol, 5 * se)
        worst = max(worst, err / se if se > 0 else (0.0 if err == 0 else np.inf))
        rows.append({"moment_id": f"m1[{i},{j};{ip},{jp}]", "empirical": float(mean.real),
                     "analytic": exact, "stderr": se})
    for idx in second:
        i1, j1, i2, j2, k1, l1, k2, l2 = idx
        z = V[:, i1, j1] * V[:, i2, j2] * V[:, k1, l1].conj() * V[:, k2, l2].conj()
        mean, se = _stats(z)
        exact = haar_second_moment(idx, dim)
        err = abs(mean - exact)
        err2, tol = max(err2, err), max(tol, 5 * se)
        worst = max(worst, err / se if se > 0 else (0.0 if err == 0 else np.inf))
        rows.append({"moment_id": f"m2[{i1},{j1},{i2},{j2};{k1},{l1},{k2},{l2}]", "empirical": float(mean.real),
                     "analytic": float(exact), "stderr": se})
    return HaarMomentReport(rows, err1, err2, tol, worst)


def _reduced_probe_states(d, probe, num_unitaries, rng, chunk=32):
    psi = product_states(np.asarray(probe, float)[None, :])[0]
    out = []
    left = int(num_unitaries)
    while left > 0:
        k = min(chunk, left)
        out.append(_haar_batch(2**d, k, rng) @ psi)
        left -= k
    return np.concatenate(out)


def verify_concentration(d_range, m=1, num_unitaries=1000, rng=None, probe=None):
    """Fluctuations of the reduced state ``rho_m^V(x)`` around ``2^-m id``.

    For each ``d`` draws ``num_unitaries`` Haar ``V`` and reports the largest
    entry-wise deviation of the sample mean from ``2^-m id`` and the mean
    per-entry variance.  Rows: ``{d, mean_dev, variance}``.
    """
    rng = np.random.default_rng(rng)
    rows = []
    for d in d_range:
        if m > d:
            raise InvalidArgumentError("cannot keep more qubits than there are")
        x = np.full(d, np.pi / 2) if probe is None else np.asarray(probe, float)[:d]
        states = _reduced_probe_states(d, x, num_unitaries, rng)
        rho = reduced_density_matrices(states, range(m))
        dev = rho - np.eye(2**m) / 2**m
        mean = dev.mean(axis=0)
        var = np.mean(np.abs(dev - mean) ** 2, axis=0)
        rows.append({"d": int(d), "mean_dev": float(np.abs(mean).max()), "variance": float(var.mean())})
    return rows


def measure_shot_cost(d_range, num_unitaries=400, rng=None, rel_error=0.1, probe_pair=None):
    """Shots needed to resolve the biased-kernel signal ``q(x, x') - 1/2``.

    For each ``d`` the root-mean-square signal over Haar ``V`` is measured,
    the Bernoulli shot count reaching ``rel_error`` of that signal is
    computed, and one finite-shot estimate per ``V`` at that count confirms
    the achieved relative error empirically.

    Rows: ``{d, signal_rms, shots, empirical_rel_error}``.
    """
    rng = np.random.default_rng(rng)
    rows = []
    for d in d_range:
        if probe_pair is None:
            x, xp = np.full(d, np.pi / 2), np.full(d, np.pi / 4)
        else:
            x, xp = (np.asarray(p, float)[:d] for p in probe_pair)
        psi = product_states(np.stack([x, xp]))
        q = []
        left = int(num_unitaries)
        while left > 0:
            k = min(32, left)
            V = _haar_batch(2**d, k, rng)
            rho = reduced_density_matrices((V @ psi.T).transpose(0, 2, 1).reshape(2 * k, -1), (0,))
            rho = rho.reshape(k, 2, 2, 2)
            q.append(np.real(np.einsum("kab,kba->k", rho[:, 0], rho[:, 1])))
            left -= k
        q = np.concatenate(q)
        signal = q - 0.5
        rms = float(np.sqrt(np.mean(signal**2)))
        p = float(np.clip(q.mean(), 0.0, 1.0))
        shots = int(math.ceil(p * (1 - p) / (rel_error * rms) ** 2))
        est = rng.binomial(shots, np.clip(q, 0, 1)) / shots
        emp = float(np.sqrt(np.mean((est - q) ** 2)) / rms)
        rows.append({"d": int(d), "signal_rms": rms, "shots": shots, "empirical_rel_error": emp})
    return rows
