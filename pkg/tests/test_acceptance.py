"""End-to-end acceptance checks.

Each test prints one ``PASS``/``FAIL`` line with the measured numbers and
then asserts the same condition.
"""

import re
import time
from math import comb

import numpy as np
import pytest

from qkl.cli import main
from qkl.experiments import (
    ExperimentConfig,
    run_alignment,
    run_generalization,
    run_spectrum,
    verify_concentration,
    verify_haar_moments,
)
from qkl.kernels import FeatureMapConfig, center_gram, cosine_kernel, gram, kernel_value
from qkl.learn import krr_fit, krr_predict
from qkl.quantum import expectation, haar_random_unitary, partial_trace
from qkl.report import emit_csv, read_csv
from qkl.spectral import (
    ONE_QUBIT_EIGENVALUES,
    MeasureSpec,
    closed_form_checks,
    eigenfunction_eval,
    gram_spectrum,
    operator_spectrum,
    product_spectrum,
    purity_bound_check,
    second_moment_operator,
)


def report(capsys, number, title, ok, detail):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {title} | {detail}")
    assert ok, detail


def _mean(rows, key, **where):
    vals = [r[key] for r in rows if all(r[k] == v for k, v in where.items())]
    return float(np.mean(vals))


@pytest.fixture(scope="module")
def generalization():
    start = time.perf_counter()
    rows = run_generalization(ExperimentConfig(d_range=(2, 7), seeds=10))
    return rows, time.perf_counter() - start


@pytest.fixture(scope="module")
def spectrum():
    start = time.perf_counter()
    rows = run_spectrum(ExperimentConfig(d_range=tuple(range(5, 11)), seeds=10))
    return rows, time.perf_counter() - start


@pytest.fixture(scope="module")
def alignment():
    start = time.perf_counter()
    kta, curves = run_alignment(ExperimentConfig(d_range=(7,), seeds=50))
    return kta, curves, time.perf_counter() - start


def test_criterion_01_closed_form_oracle(capsys):
    start = time.perf_counter()
    checks = closed_form_checks(grid_points=50)
    elapsed = time.perf_counter() - start
    failed = [name for name, ok, _ in checks if not ok]
    ok = not failed and elapsed < 1.0
    report(capsys, 1, "one-qubit closed form", ok,
           f"{len(checks) - len(failed)}/{len(checks)} checks, {elapsed:.2f}s, failed={failed}")


def test_criterion_02_product_spectrum(capsys):
    m = MeasureSpec.uniform_box(-np.pi, np.pi, 2, quadrature="gauss_legendre")
    ev = operator_spectrum(second_moment_operator(FeatureMapConfig(2), m)).eigenvalues
    expected = sorted((2.0 ** (-2 - l) for l in range(3) for _ in range(2**l * comb(2, l))), reverse=True)
    expected += [0.0] * (ev.size - len(expected))
    err = float(np.abs(ev - expected).max())
    sums = {d: sum(v * k for v, k in product_spectrum(ONE_QUBIT_EIGENVALUES, d)) for d in range(3, 7)}
    sum_err = max(abs(s - 1.0) for s in sums.values())
    ok = err <= 1e-6 and sum_err <= 1e-12
    report(capsys, 2, "product spectrum", ok, f"d=2 max err {err:.2e}, d=3..6 sum err {sum_err:.2e}")


def test_criterion_03_kernel_trick(capsys):
    worst = 0.0
    for d in range(1, 9):
        rng = np.random.default_rng(100 + d)
        cfg = FeatureMapConfig.haar(d, seed=int(rng.integers(2**31)))
        X = rng.uniform(0, 2 * np.pi, (100, d))
        Y = rng.uniform(0, 2 * np.pi, (100, d))
        for x, y in zip(X, Y):
            worst = max(worst, abs(kernel_value(x, y, cfg) - cosine_kernel(x, y)))
    report(capsys, 3, "kernel-trick equivalence", worst <= 1e-10, f"max |diff| {worst:.2e} over 800 pairs")


def test_criterion_04_biased_spectrum(capsys, spectrum):
    rows, elapsed = spectrum
    top_ok, mid_counts, tail_max = True, {}, 0.0
    for d in range(5, 11):
        mid_counts[d] = 0
        for s in range(10):
            ev = {r["rank"]: r["eigenvalue"] for r in rows if r["d"] == d and r["seed"] == s}
            top_ok &= 0.45 <= ev[1] <= 0.55
            mid_counts[d] += all(2.0 ** (-d - 4) <= ev[k] <= 2.0 ** (-d + 2) for k in (2, 3, 4))
            tail_max = max(tail_max, max(ev[k] for k in ev if k >= 5))
    ok = top_ok and min(mid_counts.values()) >= 8 and tail_max <= 1e-8 and elapsed < 120
    report(capsys, 4, "biased-kernel spectrum", ok,
           f"top in window={top_ok}, seeds with 2-4 in window {mid_counts}, "
           f"max tail {tail_max:.1e}, {elapsed:.1f}s")


def test_criterion_05_generalization(capsys, generalization):
    rows, elapsed = generalization
    test7 = {k: _mean(rows, "test_mse", d=7, kernel=k) for k in ("q", "qw", "k", "rbf")}
    train7 = {k: _mean(rows, "train_mse", d=7, kernel=k) for k in ("q", "qw", "k", "rbf")}
    test2 = {k: _mean(rows, "test_mse", d=2, kernel=k) for k in ("q", "qw", "k", "rbf")}
    parts = {
        "d7 q": test7["q"] <= 0.05,
        "d7 k": test7["k"] >= 0.5 and train7["k"] <= 0.05,
        "d7 rbf": test7["rbf"] >= 0.5 and train7["rbf"] <= 0.05,
        "d7 qw": test7["qw"] >= 0.9 and abs(train7["qw"] - test7["qw"]) <= 0.15,
        "d2 all": all(v <= 0.3 for v in test2.values()),
        "runtime": elapsed < 180,
    }
    fmt = lambda m: "{" + ", ".join(f"{k}: {v:.3g}" for k, v in m.items()) + "}"
    failed = [k for k, v in parts.items() if not v]
    report(capsys, 5, "generalization", not failed,
           f"d=7 test {fmt(test7)} train {fmt(train7)}; d=2 test {fmt(test2)}; "
           f"{elapsed:.1f}s; failed parts {failed}")


def test_criterion_06_lambda_sweep(capsys, generalization):
    rows, _ = generalization
    q_default = _mean(rows, "test_mse", d=7, kernel="q")
    grid_rows = run_generalization(ExperimentConfig(d_range=(7,), seeds=10, kernels=("k", "rbf"),
                                                    lambda_policy="grid"))
    best = {k: float(np.mean([r["test_mse"] for r in grid_rows if r["kernel"] == k and r["best_test"]]))
            for k in ("k", "rbf")}
    ok = all(v >= 5 * q_default for v in best.values())
    report(capsys, 6, "ridge sweep", ok,
           f"best-test k {best['k']:.3g}, rbf {best['rbf']:.3g} vs 5 x q {5 * q_default:.3g}")


def test_criterion_07_alignment(capsys, alignment):
    kta, curves, elapsed = alignment
    mean_kta = {k: _mean(kta, "kta", kernel=k) for k in ("q", "qw", "k", "rbf")}
    c4 = {k: [r["C"] for r in curves if r["kernel"] == k and r["i"] == 4] for k in ("q", "qw", "k")}
    q_every = all(c >= 0.99 for c in c4["q"])
    k_count = sum(c <= 0.5 for c in c4["k"])
    qw_count = sum(1 - c >= 0.3 for c in c4["qw"])
    ok = (0.4 <= mean_kta["q"] <= 0.7 and all(mean_kta[k] <= 0.2 for k in ("qw", "k", "rbf"))
          and q_every and k_count >= 45 and qw_count >= 45 and elapsed < 300)
    report(capsys, 7, "alignment", ok,
           "mean KTA " + ", ".join(f"{k} {v:.3f}" for k, v in mean_kta.items())
           + f"; min C(4) q {min(c4['q']):.4f}; k C(4)<=0.5 in {k_count}/50; "
           f"q_w 1-C(4)>=0.3 in {qw_count}/50; {elapsed:.1f}s")


_M2 = re.compile(r"m2\[(.*);(.*)\]")


def test_criterion_08_haar_moments(capsys):
    rep = verify_haar_moments(2, 10_000, np.random.default_rng(8))
    terms = {"direct": 0, "swapped": 0, "mixed_a": 0, "mixed_b": 0}
    for r in rep.rows:
        m = _M2.fullmatch(r["moment_id"])
        if not m:
            continue
        i1, j1, i2, j2 = map(int, m.group(1).split(","))
        k1, l1, k2, l2 = map(int, m.group(2).split(","))
        terms["direct"] += (i1, j1, i2, j2) == (k1, l1, k2, l2)
        terms["swapped"] += (i1, j1, i2, j2) == (k2, l2, k1, l1)
        terms["mixed_a"] += (i1, j1, i2, j2) == (k1, l2, k2, l1)
        terms["mixed_b"] += (i1, j1, i2, j2) == (k2, l1, k1, l2)
    ok = rep.passed and len(rep.rows) >= 50 and all(terms.values())
    report(capsys, 8, "Haar moments", ok,
           f"{len(rep.rows)} tuples, worst |err|/stderr {rep.max_normalized_err:.2f}, term coverage {terms}")


def test_criterion_09_concentration_and_purity_bound(capsys):
    rows = verify_concentration(range(5, 9), num_unitaries=1000, rng=np.random.default_rng(9))
    var = [r["variance"] for r in rows]
    ratios = [b / a for a, b in zip(var, var[1:])]
    halving = all(0.25 <= r <= 1.0 for r in ratios)

    checks = []
    # one-qubit cosine embedding under the uniform measure
    m1 = MeasureSpec.uniform_box(-np.pi, np.pi, 1, quadrature="gauss_legendre")
    cfg1 = FeatureMapConfig(1)
    checks.append(purity_bound_check(cfg1, m1, operator_spectrum(second_moment_operator(cfg1, m1))))
    m2 = MeasureSpec.uniform_box(-np.pi, np.pi, 2, quadrature="gauss_legendre")
    cfg2 = FeatureMapConfig(2)
    checks.append(purity_bound_check(cfg2, m2, operator_spectrum(second_moment_operator(cfg2, m2))))
    # Haar maps of the kernel-trick check, on their sampled points
    for d in range(1, 9):
        rng = np.random.default_rng(100 + d)
        cfg = FeatureMapConfig.haar(d, seed=int(rng.integers(2**31)))
        X = rng.uniform(0, 2 * np.pi, (100, d))
        checks.append(purity_bound_check(cfg, MeasureSpec.empirical(X), gram_spectrum(gram(X, "k"))))
    # datasets of the spectrum and generalization runs, empirical measure
    for d_range in (tuple(range(5, 11)), (2, 7)):
        config = ExperimentConfig(d_range=d_range, seeds=10)
        for d, s in config.cells():
            data = config.dataset(d, s)
            measure = MeasureSpec.empirical(data.X)
            for kernel, proj in (("q", (0,)), ("qw", (1,)), ("k", None)):
                cfg = data.feature_map.with_projection(proj)
                checks.append(purity_bound_check(cfg, measure, gram_spectrum(gram(data.X, kernel, cfg))))
    bound_ok = all(c.holds for c in checks)
    worst = max(c.gamma_max - c.bound for c in checks)
    report(capsys, 9, "concentration and purity bound", halving and bound_ok,
           "variance ratios " + ", ".join(f"{r:.2f}" for r in ratios)
           + f"; purity bound holds on {sum(c.holds for c in checks)}/{len(checks)} "
           f"(max gamma_max - bound {worst:.3g})")


def test_criterion_10_property_suites(capsys, tmp_path):
    rng = np.random.default_rng(10)
    results = {}

    worst = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 6))
        keep = tuple(sorted(rng.choice(d, size=int(rng.integers(1, d)), replace=False)))
        psi = haar_random_unitary(2**d, rng)[:, :3] @ rng.dirichlet(np.ones(3))
        rho = np.outer(psi, psi.conj()) / np.vdot(psi, psi).real
        g = rng.standard_normal((2 ** len(keep),) * 2) + 1j * rng.standard_normal((2 ** len(keep),) * 2)
        M = g + g.conj().T
        # lift M to the full register by permuting kept qubits to the front
        rest = [q for q in range(d) if q not in keep]
        lifted = np.kron(M, np.eye(2 ** len(rest))).reshape((2,) * (2 * d))
        perm = list(keep) + rest
        inv = np.argsort(perm)
        lifted = np.transpose(lifted, list(inv) + [d + i for i in inv]).reshape(2**d, 2**d)
        worst = max(worst, abs(expectation(partial_trace(rho, keep), M) - expectation(rho, lifted)))
    results["partial-trace duality"] = worst <= 1e-10

    cfg = FeatureMapConfig(1)
    spec = operator_spectrum(second_moment_operator(
        cfg, MeasureSpec.uniform_box(-np.pi, np.pi, 1, quadrature="gauss_legendre")))
    grid = np.linspace(-np.pi, np.pi, 20)[:, None]
    F = np.stack([eigenfunction_eval(A, grid, cfg) for A in spec.eigenobjects[spec.eigenvalues > 0]], axis=1)
    results["Mercer reconstruction"] = np.abs(F @ F.T - np.cos((grid - grid.T) / 2) ** 2).max() <= 1e-6

    X = rng.uniform(0, 2 * np.pi, (40, 3))
    cfg = FeatureMapConfig.haar(3, seed=4)
    grams = [gram(X, k, cfg) for k in ("k", "q", "qw", "rbf")]
    results["Gram PSD"] = all(np.linalg.eigvalsh(K.values).min() >= -1e-10 for K in grams)
    results["centering idempotent"] = all(
        np.allclose(center_gram(center_gram(K)).values, center_gram(K).values, atol=1e-12) for K in grams)

    K = gram(X[:15], "rbf").values
    y = rng.standard_normal(15)
    results["KRR interpolation"] = np.allclose(krr_predict(krr_fit(K, y, 0.0), K), y, atol=1e-6)

    rows = [{"d": int(d), "seed": int(s), "kernel": k, "lambda": float(l), "train_mse": float(a),
             "test_mse": float(b), "best_test": bool(t)}
            for d, s, k, l, a, b, t in zip(rng.integers(1, 9, 30), rng.integers(0, 9, 30),
                                           rng.choice(["q", "qw", "k", "rbf"], 30),
                                           10.0 ** rng.uniform(-8, 4, 30), rng.random(30) * 1e-5,
                                           rng.random(30), rng.random(30) < 0.5)]
    emit_csv(rows, tmp_path / "r.csv", schema="generalization")
    key = lambda r: (r["d"], r["seed"], r["kernel"], r["lambda"])
    results["CSV round trip"] = read_csv(tmp_path / "r.csv") == sorted(rows, key=key)

    same = True
    for cmd in (["generalization", "--qubits", "2..3"], ["spectrum", "--qubits", "4"],
                ["alignment", "--qubits", "3"]):
        argv = cmd + ["--seeds", "2", "--samples", "40", "--seed", "5"]
        assert main(argv + ["--out", str(tmp_path / "a")]) == 0
        assert main(argv + ["--out", str(tmp_path / "b")]) == 0
        for f in (tmp_path / "a").glob("*.csv"):
            same &= f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()
    results["run-to-run determinism"] = same

    failed = [k for k, v in results.items() if not v]
    report(capsys, 10, "property suites", not failed,
           f"{len(results) - len(failed)}/{len(results)} suites pass; failed {failed}")
