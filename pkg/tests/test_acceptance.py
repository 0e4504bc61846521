"""Acceptance suite: one criterion per test group, each at its stated
tolerance, with runtime budgets asserted where the criterion carries one.
The terminal summary (conftest) prints a PASS/FAIL line per criterion.

Reference constants below are frozen from externally reported validation
tables (simulated value, surrogate prediction, quoted percent error); the
suite checks our arithmetic against those quotes exactly as stated.
"""

import json
import math
import time

import numpy as np
import pytest

from surro.cli import main as cli_main
from surro.data import INPUT_COLUMNS, OUTPUT_COLUMNS, fit_standardizer, write_csv
from surro.doe import LAYER_COUNTS, default_design_space, lhs_sample
from surro.gp import fit, log_marginal_likelihood, make_fitted
from surro.crash import TimeSeries, average_load, crush_load_efficiency
from surro.kernels import (FAMILIES, Hyperparameters, KernelSpec,
                           kernel_eval, kernel_gradients, kernel_matrix)
from surro.linear import fit_linear, grid_search_lambda, lasso_kkt_residual
from surro.metrics import percent_errors, r2_score
from surro.propagation import (Constant, InputDistributions, Normal,
                               propagate)
from surro.surrogate import SurrogateConfig, fit_surrogate

from _synthetic import crash_like_outputs, smooth_benchmark

# ---------------------------------------------------------------------------
# Frozen reference constants: ten validation configurations, each carrying
# (simulated, predicted, quoted-percent-error) per output, plus the quoted
# per-output mean absolute percent errors over the full set. Two
# configurations appear twice because the source tables print them twice.

VALIDATION_ROWS = (
    {"F_p": (1050.0, 1040.7, 0.88), "CLE": (0.527, 0.577, 9.43),
     "SEA": (13.61, 12.18, 10.51), "dY_node": (17.14, 17.52, 2.24)},
    {"F_p": (1030.0, 1092.4, 6.06), "CLE": (0.542, 0.581, 7.41),
     "SEA": (13.78, 14.25, 3.44), "dY_node": (16.85, 17.84, 5.90)},
    {"F_p": (974.0, 1017.6, 4.43), "CLE": (0.562, 0.579, 3.11),
     "SEA": (14.79, 12.62, 14.64), "dY_node": (16.33, 17.29, 5.86)},
    {"F_p": (971.0, 1051.4, 8.28), "CLE": (0.569, 0.578, 1.74),
     "SEA": (14.46, 13.46, 6.90), "dY_node": (16.34, 17.50, 7.11)},
    {"F_p": (1010.0, 976.2, 3.35), "CLE": (0.545, 0.583, 6.97),
     "SEA": (14.17, 12.91, 8.88), "dY_node": (16.72, 17.31, 3.50)},
    {"F_p": (1010.0, 998.6, 1.12), "CLE": (0.566, 0.607, 7.08),
     "SEA": (15.46, 13.73, 11.16), "dY_node": (16.81, 18.39, 9.40)},
    {"F_p": (974.0, 1017.6, 4.43), "CLE": (0.562, 0.579, 3.11),
     "SEA": (14.79, 12.62, 14.64), "dY_node": (16.33, 17.29, 5.86)},
    {"F_p": (971.0, 1051.4, 8.28), "CLE": (0.569, 0.578, 1.74),
     "SEA": (14.46, 13.46, 6.90), "dY_node": (16.34, 17.50, 7.11)},
    {"F_p": (1020.0, 1037.9, 1.76), "CLE": (0.540, 0.577, 6.90),
     "SEA": (13.61, 12.21, 10.26), "dY_node": (16.84, 17.49, 3.89)},
    {"F_p": (1010.0, 1091.2, 8.04), "CLE": (0.554, 0.582, 4.98),
     "SEA": (13.51, 14.26, 5.57), "dY_node": (16.65, 17.82, 7.10)},
)

QUOTED_MAPE = {"F_p": 4.09, "CLE": 5.76, "SEA": 8.08, "dY_node": 5.48}

CASE1_A = InputDistributions(
    names=INPUT_COLUMNS,
    laws=(Constant(4.0),
          Normal.from_percent(0.1, 1.0),
          Normal.from_percent(4.0, 1.0),
          Normal.from_percent(200.0, 1.0),
          Normal.from_percent(20.0, 0.75),
          Normal.from_percent(10.0, 1.5),
          Normal(0.0, 2.0), Normal(45.0, 2.0),
          Normal(-45.0, 2.0), Normal(90.0, 2.0)))


def hundredths_gap(value, quoted):
    """Distance in integer hundredths between a computed percent error
    (rounded to 2 decimals) and a quoted one; robust to binary decimals."""
    return abs(round(round(float(value), 2) * 100.0) - round(quoted * 100.0))


# --------------------------------------------------------------- criterion 1

def test_c01_kernel_correctness_bulk_random():
    started = time.perf_counter()
    for family in FAMILIES:
        rng = np.random.default_rng(hash(family) % 2 ** 31)
        for _ in range(1000):
            d = int(rng.integers(1, 7))
            ard = bool(rng.integers(2))
            spec = KernelSpec(family, ard, d)
            hp = Hyperparameters(rng.uniform(-1.5, 1.5, spec.n_lengthscales),
                                 rng.uniform(-1.0, 1.0),
                                 rng.uniform(-3.0, 0.0))
            x, x2 = rng.normal(size=d), rng.normal(size=d)
            assert kernel_eval(spec, hp, x, x) == hp.sigma_f ** 2
            assert abs(kernel_eval(spec, hp, x, x2)
                       - kernel_eval(spec, hp, x2, x)) <= 1e-14
        # ARD with equal scales replicates the isotropic kernel bit for bit
        X = np.random.default_rng(11).normal(size=(8, 5))
        iso = kernel_matrix(KernelSpec(family, False, 5),
                            Hyperparameters([-0.3], 0.4, -1.0), X)
        ard = kernel_matrix(KernelSpec(family, True, 5),
                            Hyperparameters([-0.3] * 5, 0.4, -1.0), X)
        assert np.array_equal(iso, ard)
    assert time.perf_counter() - started < 5.0


# --------------------------------------------------------------- criterion 2

def test_c02_gradients_match_central_differences():
    started = time.perf_counter()
    h = 1e-5
    rng = np.random.default_rng(77)
    for trial in range(20):
        family = FAMILIES[trial % 4]
        spec = KernelSpec(family, True, 3)
        X = rng.normal(size=(8, 3))
        y = rng.normal(size=8)
        theta = np.concatenate([rng.uniform(-0.7, 0.7, 3),
                                [rng.uniform(-0.5, 0.5)],
                                [rng.uniform(-1.5, -0.5)]])
        hp = Hyperparameters.from_vector(theta)

        grads = kernel_gradients(spec, hp, X)
        for p in range(4):  # three length-scales plus the signal amplitude
            tp, tm = theta.copy(), theta.copy()
            tp[p] += h
            tm[p] -= h
            numeric = (kernel_matrix(spec, Hyperparameters.from_vector(tp), X)
                       - kernel_matrix(spec, Hyperparameters.from_vector(tm),
                                       X)) / (2 * h)
            denom = np.maximum(np.abs(numeric), 1e-6)
            assert np.max(np.abs(grads[p] - numeric) / denom) < 1e-5

        _, grad = log_marginal_likelihood(spec, hp, X, y)
        for p in range(theta.size):
            tp, tm = theta.copy(), theta.copy()
            tp[p] += h
            tm[p] -= h
            vp, _ = log_marginal_likelihood(
                spec, Hyperparameters.from_vector(tp), X, y)
            vm, _ = log_marginal_likelihood(
                spec, Hyperparameters.from_vector(tm), X, y)
            numeric = (vp - vm) / (2 * h)
            rel = abs(grad[p] - numeric) / max(abs(grad[p]), abs(numeric), 1e-6)
            assert rel < 1e-5
    assert time.perf_counter() - started < 10.0


# --------------------------------------------------------------- criterion 3

def test_c03_posterior_and_likelihood_match_direct_inverse():
    rng = np.random.default_rng(4040)
    for n in (2, 4, 7, 10):
        spec = KernelSpec("MATERN52", True, 3)
        hp = Hyperparameters(rng.uniform(-0.3, 0.6, 3), 0.2,
                             math.log(0.25))
        X = rng.normal(size=(n, 3))
        y = rng.normal(size=n)
        Xs = rng.normal(size=(6, 3))

        model = make_fitted(spec, hp, X, y)
        assert model.jitter_used == 0.0
        post = model.predict(Xs)

        A = kernel_matrix(spec, hp, X) + hp.sigma_n ** 2 * np.eye(n)
        A_inv = np.linalg.inv(A)
        Ks = kernel_matrix(spec, hp, X, Xs)
        mean_direct = Ks.T @ A_inv @ y
        var_direct = (hp.sigma_f ** 2
                      - np.einsum("ij,jk,ik->i", Ks.T, A_inv, Ks.T))
        assert np.max(np.abs(post.mean - mean_direct)) < 1e-8
        assert np.max(np.abs(post.variance - var_direct)) < 1e-8

        value, _ = log_marginal_likelihood(spec, hp, X, y)
        sign, logdet = np.linalg.slogdet(A)
        direct = (-0.5 * y @ A_inv @ y - 0.5 * logdet
                  - 0.5 * n * math.log(2 * math.pi))
        assert sign > 0
        assert abs(value - direct) < 1e-8


# --------------------------------------------------------------- criterion 4

def test_c04_interpolation_and_prior_reversion():
    rng = np.random.default_rng(515)
    for family in ("RBF", "MATERN32"):
        spec = KernelSpec(family, False, 3)
        hp = Hyperparameters([0.0], 0.0, math.log(1e-200))  # noise-free
        X = rng.uniform(-1.5, 1.5, size=(30, 3))
        y = np.sin(X[:, 0]) + 0.5 * np.cos(X[:, 1] * 2.0) + 0.2 * X[:, 2]
        y = (y - y.mean()) / y.std(ddof=1)  # standardized targets
        model = make_fitted(spec, hp, X, y)
        post = model.predict(X)
        assert np.max(np.abs(post.mean - y)) < 1e-6

        far = np.full((4, 3), 40.0)  # scaled distance >> 10
        post_far = model.predict(far)
        sf2 = hp.sigma_f ** 2
        assert np.max(np.abs(post_far.mean)) < 1e-3
        assert np.max(np.abs(post_far.variance - sf2)) < 1e-3 * sf2


# --------------------------------------------------------------- criterion 5

def test_c05_gpr_beats_lasso_on_smooth_benchmark():
    started = time.perf_counter()
    M = lhs_sample(default_design_space(), 250, seed=11)
    y = smooth_benchmark(M)
    X_train, X_test = M[:200], M[200:]
    y_train, y_test = y[:200], y[200:]

    scaler = fit_standardizer(X_train)
    y_mean, y_std = y_train.mean(), y_train.std(ddof=1)
    Z_train, Z_test = scaler.transform(X_train), scaler.transform(X_test)
    y_z = (y_train - y_mean) / y_std

    gp_model = fit(KernelSpec("MATERN32", True, 10), Z_train, y_z,
                   n_restarts=10, seed=5)
    r2_gp = r2_score(y_test, gp_model.predict(Z_test).mean * y_std + y_mean)

    lam, _ = grid_search_lambda(Z_train, y_z, "l1", k=5, seed=5)
    lasso = fit_linear(Z_train, y_z, "l1", lam)
    r2_lasso = r2_score(y_test, lasso.predict(Z_test) * y_std + y_mean)

    assert r2_gp >= 0.95
    assert r2_gp - r2_lasso >= 0.2
    assert time.perf_counter() - started < 60.0


# --------------------------------------------------------------- criterion 6

def test_c06_quoted_percent_errors_reproduce_from_pairs():
    """Every quoted percent error must match the value recomputed from its
    rounded (simulated, predicted) pair within +/-0.01 after 2-decimal
    rounding."""
    mismatches = []
    for i, row in enumerate(VALIDATION_ROWS):
        for output, (sim, pred, quoted) in row.items():
            pct = float(percent_errors([sim], [pred])[0])
            if hundredths_gap(pct, quoted) > 1:
                mismatches.append(
                    f"row {i + 1} {output}: pair ({sim}, {pred}) gives "
                    f"{pct:.4f}% -> {round(pct, 2):.2f}, quoted {quoted:.2f}")
    assert not mismatches, (
        "quoted percent errors not reproducible from the rounded pairs "
        "(the quotes were evidently computed from unrounded predictions):\n"
        + "\n".join(mismatches))


def test_c06_quoted_mape_consistency():
    """Per-output mean absolute percent error over the ten validation rows
    must match the quoted 4.09/5.76/8.08/5.48 within +/-0.05."""
    failures = []
    for output, quoted in QUOTED_MAPE.items():
        sims = np.array([row[output][0] for row in VALIDATION_ROWS])
        preds = np.array([row[output][1] for row in VALIDATION_ROWS])
        mape = float(np.mean(percent_errors(sims, preds)))
        dedup = float(np.mean(np.unique(percent_errors(sims, preds))))
        if abs(mape - quoted) > 0.05:
            failures.append(
                f"{output}: computed MAPE {mape:.3f} (quoted {quoted:.2f}; "
                f"8-distinct-row variant {dedup:.3f})")
    assert not failures, (
        "per-output MAPE over the printed validation rows does not match "
        "the quoted values within +/-0.05:\n" + "\n".join(failures))


# --------------------------------------------------------------- criterion 7

def test_c07_crash_metric_identities(rng):
    # constant force on an integer-spaced grid: exactly 1.0
    t = np.arange(0.0, 11.0)
    constant = TimeSeries(t, np.full(11, 7.0))
    assert crush_load_efficiency(constant) == 1.0

    ramp = TimeSeries(np.linspace(0.0, 10.0, 401),
                      3.0 * np.linspace(0.0, 10.0, 401))
    assert abs(crush_load_efficiency(ramp) - 0.5) <= 1e-12

    for _ in range(5):
        knots = np.unique(np.concatenate(
            [[0.0, 10.0], rng.uniform(0.0, 10.0, size=200)]))
        values = rng.uniform(0.0, 5.0, size=knots.size)
        fine_t = np.unique(np.concatenate(
            [np.linspace(a, b, 101) for a, b in zip(knots[:-1], knots[1:])]))
        fine_v = np.interp(fine_t, knots, values)
        oracle = np.trapezoid(fine_v, fine_t) / (knots[-1] - knots[0])
        ours = average_load(TimeSeries(knots, values))
        assert abs(ours - oracle) <= 1e-6 * max(abs(oracle), 1e-12)


# --------------------------------------------------------------- criterion 8

@pytest.mark.parametrize("n", [1, 10, 400])
def test_c08_lhs_stratification(n):
    space = default_design_space()
    M = lhs_sample(space, n, seed=0)
    bounds = {1: (0.1, 0.6), 2: (4.0, 6.5), 3: (200.0, 400.0),
              4: (20.0, 220.0), 5: (10.0, 30.0)}
    for col, (lo, hi) in bounds.items():
        strata = np.floor((M[:, col] - lo) / (hi - lo) * n).astype(int)
        assert sorted(strata.tolist()) == list(range(n))
    assert set(M[:, 0]).issubset({float(v) for v in LAYER_COUNTS})


# --------------------------------------------------------------- criterion 9

def test_c09_propagation_matches_linear_closed_form():
    rng = np.random.default_rng(606)
    X = lhs_sample(default_design_space(), 150, seed=8)
    X[:, 6:] += rng.normal(0.0, 2.0, size=(150, 4))  # de-collinearize angles
    W = rng.uniform(-3.0, 3.0, size=(10, 4))
    intercept = 40.0
    Y = intercept + X @ W
    model = fit_surrogate(SurrogateConfig(kind="ols"), X, Y,
                          INPUT_COLUMNS, OUTPUT_COLUMNS, seed=1)

    results = propagate(model, CASE1_A, n_samples=100_000, seed=17)
    mus = np.array([law.value if isinstance(law, Constant) else law.mu
                    for law in CASE1_A.laws])
    sigmas = np.array([0.0 if isinstance(law, Constant) else law.sigma
                       for law in CASE1_A.laws])
    for j, res in enumerate(results):
        mean_exact = intercept + float(mus @ W[:, j])
        std_exact = float(np.sqrt((sigmas ** 2) @ (W[:, j] ** 2)))
        assert abs(res.mean - mean_exact) <= 0.01 * abs(mean_exact)
        assert abs(res.std - std_exact) <= 0.01 * std_exact
        assert abs(res.skewness) < 0.05

    # bit-exact batch-size invariance under a fixed seed
    reference = propagate(model, CASE1_A, n_samples=20_000, seed=17,
                          batch_size=20_000)
    for batch_size in (1024, 7777, 16_384):
        again = propagate(model, CASE1_A, n_samples=20_000, seed=17,
                          batch_size=batch_size)
        for a, b in zip(reference, again):
            assert (a.mean, a.std, a.skewness, a.excess_kurtosis) == \
                (b.mean, b.std, b.skewness, b.excess_kurtosis)
            assert np.array_equal(a.hist_edges, b.hist_edges)
            assert np.array_equal(a.hist_counts, b.hist_counts)


# -------------------------------------------------------------- criterion 10

def test_c10_lasso_kkt_shrinkage_and_support():
    rng = np.random.default_rng(31)
    X = rng.normal(size=(150, 8))
    beta = rng.uniform(-2, 2, size=8)
    y = X @ beta + 0.2 * rng.normal(size=150)
    for lam in (0.005, 0.05, 0.3):
        model = fit_linear(X, y, "l1", lam)
        assert lasso_kkt_residual(model, X, y) < 1e-6

    heavy = fit_linear(X, y, "l1", 1e3)
    assert np.array_equal(heavy.coefficients, np.zeros(8))

    rng = np.random.default_rng(1)
    X = rng.normal(size=(200, 10))
    sparse = np.zeros(10)
    sparse[[1, 4, 7]] = [2.0, -1.5, 0.8]
    y = X @ sparse + 1.0 * rng.normal(size=200)
    lam, _ = grid_search_lambda(X, y, "l1", k=5, seed=0)
    model = fit_linear(X, y, "l1", lam)
    assert set(np.flatnonzero(model.coefficients).tolist()) == {1, 4, 7}


# -------------------------------------------------------------- criterion 11

@pytest.mark.slow
def test_c11_pipeline_reproducibility_and_runtime(tmp_path):
    def run(*argv):
        return cli_main([str(a) for a in argv])

    started = time.perf_counter()

    doe_csv = tmp_path / "doe.csv"
    assert run("doe", "--n", 400, "--seed", 7, "--out", doe_csv) == 0

    from surro.data import read_input_matrix
    X, _ = read_input_matrix(doe_csv)
    data_csv = tmp_path / "data.csv"
    write_csv(data_csv, INPUT_COLUMNS + OUTPUT_COLUMNS,
              np.hstack([X, crash_like_outputs(X)]))

    model_json = tmp_path / "model.json"
    assert run("train", "--data", data_csv, "--kind", "gpr",
               "--kernel", "MATERN32", "--ard", "--restarts", 2,
               "--seed", 3, "--out", model_json,
               "--report", tmp_path / "report.csv") == 0

    cv_csv = tmp_path / "cv.csv"
    assert run("cv", "--data", data_csv, "--kind", "gpr",
               "--kernel", "MATERN32", "--ard", "--restarts", 0,
               "--k", 5, "--repeats", 10, "--seed", 3,
               "--out", cv_csv) == 0

    spec_path = tmp_path / "mc_spec.json"
    spec_path.write_text(json.dumps({
        "n_ls": {"const": 4},
        "t_l": {"normal": {"mu": 0.35, "sigma_pct": 1.0}},
        "v_p": {"normal": {"mu": 5.25, "sigma_pct": 1.0}},
        "T_i": {"normal": {"mu": 300, "sigma_pct": 1.0}},
        "T_pd": {"normal": {"mu": 120, "sigma_pct": 0.75}},
        "T_air": {"normal": {"mu": 20, "sigma_pct": 1.5}},
        "phi1": {"normal": {"mu": 0, "sigma": 2.0}},
        "phi2": {"normal": {"mu": 45, "sigma": 2.0}},
        "phi3": {"normal": {"mu": -45, "sigma": 2.0}},
        "phi4": {"normal": {"mu": 90, "sigma": 2.0}},
    }))
    assert run("propagate", "--model", model_json, "--spec", spec_path,
               "--n-samples", 100_000, "--seed", 5,
               "--out", tmp_path / "mc.csv") == 0

    elapsed = time.perf_counter() - started
    assert elapsed < 300.0, f"pipeline took {elapsed:.0f}s"

    # the cross-validation report is byte-identical when re-run
    cv_again = tmp_path / "cv_again.csv"
    assert run("cv", "--data", data_csv, "--kind", "gpr",
               "--kernel", "MATERN32", "--ard", "--restarts", 0,
               "--k", 5, "--repeats", 10, "--seed", 3,
               "--out", cv_again) == 0
    assert cv_csv.read_bytes() == cv_again.read_bytes()
