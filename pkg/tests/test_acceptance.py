"""Acceptance gate: each test checks one release criterion end to end.

Every test prints a single ``ACCEPTANCE <n> <name>: PASS/FAIL`` line with
the measured values, then asserts the criterion.  The two benchmark
fixtures are shared across criteria and run the full seeded Monte Carlo
comparison, so this module takes several minutes.
"""

import dataclasses
import time

import numpy as np
import pytest

from gplda import (
    FIRST_DIFF,
    SECOND_DIFF,
    FitConfig,
    HyperParams,
    LabeledFunctionalDataset,
    SimSpec,
    between_covariance,
    build_penalty,
    default_run_config,
    first_order_residuals,
    fit,
    format_config,
    generalized_eig_top,
    generate,
    load_csv,
    load_model,
    mle_lda_fit,
    parse_config,
    pda_fit,
    pooled_within_scatter,
    run_benchmark,
    save_dataset_csv,
    save_model,
    update_alpha1,
    update_alpha2,
    update_mu,
    update_sigma2,
    update_sigma_w,
    update_x,
)

from helpers import (
    finite_difference_residuals,
    random_posterior_state,
    random_spd_matrix,
    sample_well_posed_dataset,
)

REPS = 30
BASE_SEED = 0
RUNTIME_LIMIT_SECONDS = 600.0


@pytest.fixture
def verdict(capsys):
    """Print one ``ACCEPTANCE n name: PASS/FAIL`` line, then assert.

    The line is written with capture disabled so it lands in the live
    pytest output for passing criteria too, and printed once more
    normally so failing criteria carry it in their captured output.
    """

    def _verdict(number: int, name: str, ok: bool, detail: str) -> None:
        line = f"ACCEPTANCE {number} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
        with capsys.disabled():
            print(f"\n{line}", flush=True)
        print(line)
        assert ok, line

    return _verdict


def _band(value: float, low: float, high: float) -> bool:
    return low <= value <= high


@pytest.fixture(scope="module")
def sim1_bench():
    start = time.perf_counter()
    report = run_benchmark(
        which="sim1",
        methods=["GPLDA", "PDA"],
        n_values=(50, 200),
        reps=REPS,
        base_seed=BASE_SEED,
        n_test=200,
    )
    return report, time.perf_counter() - start


@pytest.fixture(scope="module")
def sim2_bench():
    start = time.perf_counter()
    report = run_benchmark(
        which="sim2",
        methods=["GPLDA", "PDA", "PCA_LDA"],
        n_values=(20,),
        reps=REPS,
        base_seed=BASE_SEED,
        n_test=200,
    )
    return report, time.perf_counter() - start


@pytest.fixture(scope="module")
def fixed_point_suite():
    """Twenty backfitting runs on random full-rank-scatter datasets.

    Sampled with n - c >= p + 4 so the pooled scatter is safely full rank,
    and fitted with the exact (unjittered) covariance update, the regime
    in which the update map's fixed point is a true stationary point.
    """
    rng = np.random.default_rng(2026)
    runs = []
    for _ in range(20):
        data = sample_well_posed_dataset(rng)
        penalty = build_penalty(FIRST_DIFF, data.p)
        config = FitConfig(
            penalty=penalty, max_sweeps=500, rel_tol=1e-8, jitter_scale=0.0
        )
        state, trace = fit(data, config=config)
        runs.append((data, penalty, state, trace))
    return runs


def test_criterion_1_first_benchmark_error_bands(sim1_bench, verdict):
    """Mean test error of the two main methods on the bump problem."""
    report, seconds = sim1_bench
    gplda_50 = report.cell("GPLDA", 50).mean_pct
    gplda_200 = report.cell("GPLDA", 200).mean_pct
    pda_50 = report.cell("PDA", 50).mean_pct
    checks = [
        (_band(gplda_50, 2.7, 5.7), f"GPLDA@50 {gplda_50:.2f}% in [2.7, 5.7]"),
        (_band(gplda_200, 1.6, 3.8), f"GPLDA@200 {gplda_200:.2f}% in [1.6, 3.8]"),
        (_band(pda_50, 3.0, 6.5), f"PDA@50 {pda_50:.2f}% in [3.0, 6.5]"),
        (seconds < RUNTIME_LIMIT_SECONDS, f"runtime {seconds:.0f}s < 600s"),
    ]
    detail = "; ".join(
        text if ok else text.replace(" in ", " NOT in ") for ok, text in checks
    )
    verdict(1, "sim1 error bands", all(ok for ok, _ in checks), detail)


def test_criterion_2_second_benchmark_error_bands(sim2_bench, verdict):
    """Mean test error and per-replication ordering on the sinusoid problem."""
    report, seconds = sim2_bench
    gplda = report.cell("GPLDA", 20)
    pca = report.cell("PCA_LDA", 20)
    gplda_by_rep = dict(zip(gplda.replications, gplda.errors))
    pca_by_rep = dict(zip(pca.replications, pca.errors))
    shared = sorted(set(gplda_by_rep) & set(pca_by_rep))
    wins = sum(1 for r in shared if gplda_by_rep[r] < pca_by_rep[r])
    checks = [
        (_band(gplda.mean_pct, 37.0, 47.0),
         f"GPLDA@20 {gplda.mean_pct:.2f}% in [37, 47]"),
        (pca.mean_pct >= 45.0, f"PCA_LDA@20 {pca.mean_pct:.2f}% >= 45"),
        (wins >= 27, f"GPLDA below PCA_LDA in {wins}/{REPS} replications (>= 27)"),
        (seconds < RUNTIME_LIMIT_SECONDS, f"runtime {seconds:.0f}s < 600s"),
    ]
    detail = "; ".join(
        text if ok else text.replace(" in [", " NOT in [") for ok, text in checks
    )
    verdict(2, "sim2 error bands", all(ok for ok, _ in checks), detail)


def test_criterion_3_method_ordering(sim1_bench, sim2_bench, verdict):
    """GPLDA mean error at most one point above PDA at every tested size."""
    report1, _ = sim1_bench
    report2, _ = sim2_bench
    pairs = [
        ("sim1", 50, report1),
        ("sim1", 200, report1),
        ("sim2", 20, report2),
    ]
    checks = []
    for which, n, report in pairs:
        gplda = report.cell("GPLDA", n).mean_pct
        pda = report.cell("PDA", n).mean_pct
        ok = gplda <= pda + 1.0
        sign = "<=" if ok else ">"
        checks.append(
            (ok, f"{which}@{n} GPLDA {gplda:.2f}% {sign} PDA {pda:.2f}% + 1.0")
        )
    detail = "; ".join(text for _, text in checks)
    verdict(3, "method ordering", all(ok for ok, _ in checks), detail)


def test_criterion_4_fixed_point_suite(fixed_point_suite, verdict):
    """Convergence to a stationary point with stable re-applied updates."""
    hyper = HyperParams()
    converged = 0
    worst_residual_ratio = 0.0
    worst_reapply = 0.0
    for data, penalty, state, trace in fixed_point_suite:
        if trace.converged and trace.sweeps_run <= 500:
            converged += 1
        lp = trace.log_posterior_per_sweep[-1]
        tolerance = 1e-5 * (1.0 + abs(lp))
        worst_residual_ratio = max(
            worst_residual_ratio, trace.final_residuals.max() / tolerance
        )

        def rel(new, old):
            return float(
                np.linalg.norm(np.atleast_1d(new - old))
                / (1.0 + np.linalg.norm(np.atleast_1d(old)))
            )

        deltas = [
            rel(update_alpha1(state.mu, penalty, hyper), state.alpha1),
            rel(update_alpha2(state.sigma_w, penalty, hyper), state.alpha2),
            rel(update_sigma2(state.x, data, hyper), state.sigma2),
            rel(update_x(data, state.mu, state.sigma_w, state.sigma2), state.x),
            rel(
                update_mu(state.x, data, state.sigma_w, state.alpha1, penalty),
                state.mu,
            ),
            rel(
                update_sigma_w(
                    state.x, state.mu, data, state.alpha2, penalty, hyper,
                    jitter_scale=0.0,
                ),
                state.sigma_w,
            ),
        ]
        worst_reapply = max(worst_reapply, max(deltas))
    ok = (
        converged == len(fixed_point_suite)
        and worst_residual_ratio <= 1.0
        and worst_reapply <= 1e-6
    )
    detail = (
        f"{converged}/{len(fixed_point_suite)} converged; "
        f"worst residual {worst_residual_ratio:.2e} of tolerance; "
        f"worst re-applied update delta {worst_reapply:.2e} (<= 1e-06)"
    )
    verdict(4, "fixed-point suite", ok, detail)


def test_criterion_5_monotone_ascent(fixed_point_suite, verdict):
    """Per-sweep objective sequences never decrease beyond rounding."""
    worst_drop = 0.0
    for _, _, _, trace in fixed_point_suite:
        seq = np.asarray(trace.log_posterior_per_sweep)
        if len(seq) > 1:
            steps = np.diff(seq) / (1.0 + np.abs(seq[:-1]))
            worst_drop = min(worst_drop, float(steps.min()))
    ok = worst_drop >= -1e-9
    detail = (
        f"worst per-sweep relative change {worst_drop:.2e} over "
        f"{len(fixed_point_suite)} runs (allowed >= -1e-09)"
    )
    verdict(5, "monotone ascent", ok, detail)


def test_criterion_6_gradient_oracle(verdict):
    """Analytic block gradients agree with central finite differences."""
    rng = np.random.default_rng(6)
    worst = 0.0
    for _ in range(10):
        c = 2
        p = int(rng.integers(4, 7))
        n = int(rng.integers(p + c + 2, p + c + 6))
        labels = np.sort(
            np.concatenate([np.arange(1, c + 1), rng.integers(1, c + 1, size=n - c)])
        )
        data = LabeledFunctionalDataset(
            y=rng.standard_normal((n, p)) + labels[:, None] * 0.5,
            labels=labels,
            label_names=(1, 2),
        )
        state = random_posterior_state(rng, data)
        hyper = HyperParams()
        penalty = build_penalty(FIRST_DIFF, p)
        analytic = first_order_residuals(state, data, hyper, penalty).as_dict()
        numeric = finite_difference_residuals(state, data, hyper, penalty)
        for name, value in numeric.items():
            scale = max(abs(value), abs(analytic[name]), 1e-8)
            worst = max(worst, abs(analytic[name] - value) / scale)
    ok = worst <= 1e-4
    verdict(
        6,
        "gradient oracle",
        ok,
        f"worst relative gradient mismatch {worst:.2e} over 10 states (<= 1e-04)",
    )


def test_criterion_7_penalized_baseline_equivalence(verdict):
    """The penalized fit is the generic eigenproblem on the shifted scatter."""
    rng = np.random.default_rng(7)
    worst_generic = 0.0
    worst_plain = 0.0
    for _ in range(10):
        data = sample_well_posed_dataset(rng)
        penalty = build_penalty(SECOND_DIFF, data.p)
        alpha = float(rng.uniform(0.1, 10.0))
        model = pda_fit(data, penalty, alpha=alpha)
        mu = data.class_means()
        within = (
            pooled_within_scatter(data.y, data.labels, mu) + alpha * penalty.matrix
        )
        _, directions = generalized_eig_top(
            between_covariance(mu), within, data.c - 1
        )
        worst_generic = max(
            worst_generic, float(np.max(np.abs(model.directions - directions)))
        )
        at_zero = pda_fit(data, penalty, alpha=0.0)
        plain = mle_lda_fit(data, ridge=0.0)
        worst_plain = max(
            worst_plain,
            float(np.max(np.abs(at_zero.directions - plain.directions))),
        )
    ok = worst_generic <= 1e-8 and worst_plain <= 1e-8
    detail = (
        f"max deviation from generic eigensolver {worst_generic:.2e}, "
        f"from plain discriminant at zero weight {worst_plain:.2e} (<= 1e-08)"
    )
    verdict(7, "penalized-baseline equivalence", ok, detail)


def test_criterion_8_linear_algebra_properties(verdict):
    """Penalty and eigensolver invariants over at least 200 random cases."""
    rng = np.random.default_rng(8)
    cases = 0
    failures = []

    for _ in range(105):  # penalty matrices
        kind = (FIRST_DIFF, SECOND_DIFF)[int(rng.integers(2))]
        p = int(rng.integers(3, 24))
        omega = build_penalty(kind, p).matrix
        cases += 1
        if not np.allclose(omega, omega.T):
            failures.append("asymmetric penalty")
        if np.abs(omega @ np.ones(p)).max() > 1e-10:
            failures.append("nonzero row sum")
        if np.linalg.eigvalsh(omega).min() < -1e-8:
            failures.append("indefinite penalty")

    for _ in range(105):  # eigensolver outputs
        p = int(rng.integers(2, 16))
        within = random_spd_matrix(rng, p)
        c = int(rng.integers(2, min(p + 1, 5) + 1))
        mu = rng.standard_normal((c, p))
        between = between_covariance(mu)
        k = min(c - 1, p)
        values, directions = generalized_eig_top(between, within, k)
        cases += 1
        gram = directions @ within @ directions.T
        if not np.allclose(gram, np.eye(k), atol=1e-7):
            failures.append("not within-orthonormal")
        for value, beta in zip(values, directions):
            if np.abs(between @ beta - value * (within @ beta)).max() > 1e-6:
                failures.append("eigen-residual")
        if np.any(np.diff(values) > 1e-9):
            failures.append("not descending")
        scale = float(rng.uniform(0.5, 4.0))
        scaled_values, scaled_dirs = generalized_eig_top(scale * between, within, k)
        if not np.allclose(scaled_values, scale * values, rtol=1e-8):
            failures.append("eigenvalues not linear in numerator scale")
        if not np.allclose(scaled_dirs, directions, atol=1e-7):
            failures.append("directions moved under numerator scale")

    ok = cases >= 200 and not failures
    summary = f"{cases} cases, {len(failures)} violations"
    if failures:
        summary += f" (first: {failures[0]})"
    verdict(8, "linear-algebra properties", ok, summary)


def test_criterion_9_determinism_and_round_trips(tmp_path, verdict):
    """Identical seeds give identical outputs; files round-trip exactly."""
    problems = []

    spec = SimSpec("sim1", 20, 10, seed=4)
    train_a, test_a = generate(spec)
    train_b, test_b = generate(spec)
    if not (
        np.array_equal(train_a.y, train_b.y) and np.array_equal(test_a.y, test_b.y)
    ):
        problems.append("simulation not reproducible")

    rng = np.random.default_rng(9)
    data = sample_well_posed_dataset(rng)
    config = FitConfig(penalty=build_penalty(FIRST_DIFF, data.p))
    state_a, _ = fit(data, config=config)
    state_b, _ = fit(data, config=config)
    if not (
        np.array_equal(state_a.mu, state_b.mu)
        and np.array_equal(state_a.sigma_w, state_b.sigma_w)
    ):
        problems.append("fit not reproducible")

    bench_kwargs = dict(
        which="sim2", methods=["pca-lda", "mle"], n_values=(20,), reps=2,
        base_seed=3, n_test=20,
    )

    def seeded_content(report):
        # every seeded output, bit for bit; wall-clock timing is excluded
        # because it measures the machine rather than the computation
        return [
            (cell.method, cell.n_train, cell.mean_pct, cell.std_pct,
             cell.failures, cell.errors, cell.replications)
            for cell in report.cells
        ]

    if seeded_content(run_benchmark(**bench_kwargs)) != seeded_content(
        run_benchmark(**bench_kwargs)
    ):
        problems.append("benchmark not reproducible")

    csv_path = str(tmp_path / "curves.csv")
    save_dataset_csv(csv_path, data)
    loaded = load_csv(csv_path)
    if not (
        np.array_equal(loaded.y, data.y) and np.array_equal(loaded.labels, data.labels)
    ):
        problems.append("dataset CSV round-trip inexact")

    model = mle_lda_fit(data, ridge=0.0)
    model_path = str(tmp_path / "model.json")
    save_model(model_path, model)
    restored = load_model(model_path)
    if not (
        np.array_equal(restored.directions, model.directions)
        and np.array_equal(restored.projected_centroids, model.projected_centroids)
        and restored.class_labels == model.class_labels
    ):
        problems.append("model round-trip inexact")

    default = default_run_config()
    modified = dataclasses.replace(
        default, method="pda", pda_alpha=2.5, bench_n_values=(20, 40),
        hyper=HyperParams(b2=7.0),
    )
    for config_case in (default, modified):
        if parse_config(format_config(config_case)) != config_case:
            problems.append("config round-trip inexact")
            break

    ok = not problems
    detail = "all reproducible and exact" if ok else "; ".join(problems)
    verdict(9, "determinism and round-trips", ok, detail)
