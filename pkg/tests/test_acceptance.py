"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -v -s``).

The Monte Carlo criteria (4-6) are seeded and deterministic; their runtime
budgets are asserted alongside the statistical targets.
"""

import inspect
import time

import numpy as np

import snvc
from snvc.cli import FitReport, main, write_table
from snvc.core import (
    ModelSpec,
    VarianceParams,
    build_design,
    precompute_crossproducts,
    restricted_loglik,
)
from snvc.simlab import (
    ScenarioConfig,
    _build_scenario_basis,
    coef_correlations,
    gen_toy,
    predict_toy_estimator,
    run_scenario,
)
from snvc.spatial import (
    SiteSet,
    SpatialBasis,
    build_proximity,
    moran_eigen_basis,
    mst_range,
    scale_eigenvalues,
)
from snvc.splines import spline_basis


def _report(num, desc, ok, detail=""):
    print(f"\n[ACCEPTANCE {num}] {'PASS' if ok else 'FAIL'} - {desc}{detail}")
    assert ok, f"criterion {num} failed: {desc}{detail}"


def test_criterion_1_eigen_identity():
    t0 = time.perf_counter()
    worst = 0.0
    for seed in range(5):
        rng = np.random.default_rng(1000 + seed)
        n = 50
        sites = SiteSet(rng.uniform(0, 10, (n, 2)))
        c = build_proximity(sites, mst_range(sites))
        basis = moran_eigen_basis(c, cutoff_rel=1e-12)

        m = np.eye(n) - np.ones((n, n)) / n
        mcm = m @ c.values @ m
        w, v = np.linalg.eigh(mcm)
        neg = w < -1e-12 * np.abs(w).max()
        lhs = m @ (c.values + np.eye(n)) @ m
        rhs = (
            basis.eigvecs @ np.diag(basis.eigvals) @ basis.eigvecs.T
            + v[:, neg] @ np.diag(w[neg]) @ v[:, neg].T
            + np.eye(n)
            - np.ones((n, n)) / n
        )
        worst = max(worst, float(np.abs(lhs - rhs).max()))
    elapsed = time.perf_counter() - t0
    _report(
        1,
        "eigen-identity reconstruction on 5 random N=50 site sets",
        worst < 1e-8 and elapsed < 5.0,
        f" (max-norm err {worst:.2e}, {elapsed:.2f}s)",
    )


def test_criterion_2_reml_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    n, k = 30, 2
    sites = SiteSet(rng.uniform(0, 10, (n, 2)))
    basis = moran_eigen_basis(build_proximity(sites, mst_range(sites))).truncated(3)
    assert basis.n_components == 3
    X = np.column_stack([np.ones(n), rng.normal(size=n)])
    nb = spline_basis(rng.uniform(0, 5, n), n_basis=4)
    assert nb.n_components == 4
    y = rng.normal(size=n)
    spec = ModelSpec(("intercept", "x"), (True, False), (False, True), (4, 4))
    design = build_design(X, spec, basis, [None, nb])
    cp = precompute_crossproducts(design, y)
    E = design.random_effects()

    worst = 0.0
    for tau_s in (0.05, 0.7, 3.0):
        for alpha in (0.0, 1.0, 2.5):
            for tau_n in (0.05, 0.7, 3.0):
                theta = VarianceParams(1.0, [tau_s, 0.0], [alpha, 0.0], [0.0, tau_n])
                res = restricted_loglik(cp, spec, theta, [scale_eigenvalues(basis, alpha), None])
                # dense oracle from the N x N marginal covariance
                v = np.zeros(E.shape[1])
                v[:3] = np.sqrt(tau_s) * (basis.eigvals / basis.eigvals[0]) ** (alpha / 2.0)
                v[3:] = np.sqrt(tau_n)
                H = np.eye(n) + (E * v) @ (E * v).T
                Hi = np.linalg.inv(H)
                XtHiX = X.T @ Hi @ X
                b = np.linalg.solve(XtHiX, X.T @ Hi @ y)
                r = y - X @ b
                s2 = (r @ Hi @ r) / (n - k)
                oracle = (
                    -0.5 * np.linalg.slogdet(H)[1]
                    - 0.5 * np.linalg.slogdet(XtHiX)[1]
                    - 0.5 * (n - k) * (1.0 + np.log(2.0 * np.pi * s2))
                )
                worst = max(worst, abs(res.loglik - oracle))
    elapsed = time.perf_counter() - t0
    _report(
        2,
        "size-free likelihood equals dense REML oracle on 27-point grid",
        worst < 1e-6 and elapsed < 10.0,
        f" (max abs diff {worst:.2e}, {elapsed:.2f}s)",
    )


def test_criterion_3_ols_collapse():
    rng = np.random.default_rng(11)
    n, k = 40, 2
    sites = SiteSet(rng.uniform(0, 10, (n, 2)))
    basis = moran_eigen_basis(build_proximity(sites, mst_range(sites))).truncated(4)
    X = np.column_stack([np.ones(n), rng.normal(size=n)])
    y = rng.normal(size=n)
    spec = ModelSpec(("intercept", "x"), (True, False), (False, False))
    design = build_design(X, spec, basis, [None, None])
    cp = precompute_crossproducts(design, y)
    theta = VarianceParams(1.0, [0.0, 0.0], [1.0, 0.0], [0.0, 0.0])
    res = restricted_loglik(cp, spec, theta, [scale_eigenvalues(basis, 1.0), None])

    b_ols, rss, *_ = np.linalg.lstsq(X, y, rcond=None)
    closed = -0.5 * np.linalg.slogdet(X.T @ X)[1] - 0.5 * (n - k) * (
        1.0 + np.log(2.0 * np.pi * rss[0] / (n - k))
    )
    db = float(np.abs(res.b_hat - b_ols).max())
    dl = abs(res.loglik - closed)
    _report(
        3,
        "zero-variance fit reproduces OLS and its closed-form likelihood",
        db < 1e-10 and dl < 1e-10,
        f" (b diff {db:.2e}, loglik diff {dl:.2e})",
    )


def test_criterion_4_motivating_example_spurious_correlation():
    t0 = time.perf_counter()
    seeds = (11, 12, 13)
    basis = _build_scenario_basis(gen_toy(seeds[0]).sites, 200)
    preds = {est: [] for est in ("SVC_M", "NVC_M", "GWR")}
    for seed in seeds:
        inst = gen_toy(seed)
        for est in preds:
            preds[est].append(predict_toy_estimator(est, inst, spatial=basis))
    cc = {est: float(coef_correlations(fields).mean[0, 1]) for est, fields in preds.items()}
    elapsed = time.perf_counter() - t0
    ok = cc["SVC_M"] <= -0.4 and cc["GWR"] <= -0.3 and abs(cc["NVC_M"]) <= 0.25 and elapsed < 600
    _report(
        4,
        "40x40 toy: shared-basis SVC and GWR show spurious correlation, spline fit does not",
        ok,
        f" (CC svc {cc['SVC_M']:.3f} <= -0.4, gwr {cc['GWR']:.3f} <= -0.3, "
        f"|nvc| {abs(cc['NVC_M']):.3f} <= 0.25; {elapsed:.0f}s)",
    )


def test_criterion_5_directional_rmse():
    t0 = time.perf_counter()
    results = {}
    for w_s in (0.0, 1.0):
        cfg = ScenarioConfig(
            n_sites=150, w_sx=0.8, w_s=w_s, tau2_2=1.0, tau2_3=9.0,
            n_iters=30, seed=42, estimators=("SVC_M", "SNVC_M"),
        )
        rep = run_scenario(cfg)
        results[w_s] = rep
    elapsed = time.perf_counter() - t0

    r0_svc = results[0.0].rmse["SVC_M"][2]
    r0_snvc = results[0.0].rmse["SNVC_M"][2]
    beta3_direction = r0_snvc < r0_svc

    r1_svc = results[1.0].rmse["SVC_M"][1]
    r1_snvc = results[1.0].rmse["SNVC_M"][1]
    gap = abs(r1_svc - r1_snvc) / r1_snvc
    ok = beta3_direction and gap <= 0.25 and elapsed < 900
    _report(
        5,
        "non-spatial truth inflates SVC-only RMSE; pure-spatial truth closes the gap",
        ok,
        f" (beta3 rmse {r0_snvc:.1f} < {r0_svc:.1f}; beta2 rel gap {gap:.2%} <= 25%; {elapsed:.0f}s)",
    )


def test_criterion_6_spurious_correlation_scatter():
    t0 = time.perf_counter()
    iu = np.triu_indices(3, k=1)
    devs = {"SVC_M": {}, "SNVC_M": {}}
    for tau in ((1.0, 9.0), (9.0, 1.0)):
        for w_s in (0.0, 0.5, 1.0):
            cfg = ScenarioConfig(
                n_sites=150, w_sx=0.4, w_s=w_s, tau2_2=tau[0], tau2_3=tau[1],
                n_iters=20, seed=3, estimators=("SVC_M", "SNVC_M"),
            )
            rep = run_scenario(cfg)
            for est in devs:
                devs[est][(tau, w_s)] = np.abs(rep.mean_cc[est][iu] - rep.true_mean_cc[iu])
    elapsed = time.perf_counter() - t0

    snvc_all = float(np.concatenate(list(devs["SNVC_M"].values())).mean())
    low_cells = [key for key in devs["SVC_M"] if key[1] <= 0.5]
    svc_low = float(np.concatenate([devs["SVC_M"][key] for key in low_cells]).mean())
    snvc_low = float(np.concatenate([devs["SNVC_M"][key] for key in low_cells]).mean())
    ok = snvc_all <= 0.15 and svc_low > snvc_low and elapsed < 1800
    _report(
        6,
        "across 6 cells the joint model tracks true coefficient correlations, "
        "the SVC-only model drifts when non-spatial variation exists",
        ok,
        f" (snvc dev {snvc_all:.3f} <= 0.15; w_s<=0.5 pooled dev svc {svc_low:.3f} > snvc {snvc_low:.3f}; "
        f"{elapsed:.0f}s)",
    )


def _timed_evaluations(n, seed, n_evals=200):
    rng = np.random.default_rng(seed)
    raw = rng.standard_normal((n, 50))
    raw -= raw.mean(axis=0)
    q, _ = np.linalg.qr(raw)
    basis = SpatialBasis(q[:, :50], np.linspace(3.0, 0.3, 50), 1.0, 50)
    X = np.column_stack([np.ones(n), rng.normal(size=n)])
    nb = spline_basis(rng.uniform(0, 5, n), n_basis=10)
    spec = ModelSpec(("intercept", "x"), (True, False), (False, True), (10, 10))
    design = build_design(X, spec, basis, [None, nb])
    cp = precompute_crossproducts(design, rng.normal(size=n))

    thetas = [
        VarianceParams(1.0, [0.1 * (i % 7 + 1), 0.0], [0.5 * (i % 4), 0.0], [0.0, 0.05 * (i % 5 + 1)])
        for i in range(n_evals)
    ]
    scalings = {a: scale_eigenvalues(basis, a) for a in {float(t.alpha[0]) for t in thetas}}
    for theta in thetas[:20]:  # warmup
        restricted_loglik(cp, spec, theta, [scalings[float(theta.alpha[0])], None])
    times = []
    for theta in thetas:
        t0 = time.perf_counter()
        restricted_loglik(cp, spec, theta, [scalings[float(theta.alpha[0])], None])
        times.append(time.perf_counter() - t0)
    return float(np.median(times))


def test_criterion_7_size_free_likelihood():
    t_small = _timed_evaluations(1_000, seed=1)
    t_large = _timed_evaluations(10_000, seed=2)
    ratio = t_large / t_small
    params = list(inspect.signature(restricted_loglik).parameters)
    static_ok = params == ["cp", "spec", "theta", "scalings"]
    ok = ratio < 2.0 and static_ok
    _report(
        7,
        "per-evaluation likelihood cost does not grow with N after precompute",
        ok,
        f" (median eval {t_small*1e3:.3f}ms at N=1e3 vs {t_large*1e3:.3f}ms at N=1e4, "
        f"ratio {ratio:.2f} < 2; signature takes only crossproducts: {static_ok})",
    )


def test_criterion_8_gwr_sanity():
    rng = np.random.default_rng(8)
    n = 25
    sites = SiteSet(rng.uniform(0, 10, (n, 2)))
    X = rng.normal(size=(n, 2))
    y = 1.0 + X @ np.array([2.0, -1.0]) + 0.3 * rng.normal(size=n)

    bw = 1e9 * sites.distances().max()
    fit = snvc.gwr_fit_at(sites, X, y, "exponential_fixed", bw, include_intercept=True)
    Xi = np.column_stack([np.ones(n), X])
    b_ols, *_ = np.linalg.lstsq(Xi, y, rcond=None)
    ols_err = float(np.abs(fit.local_coefs - b_ols[None, :]).max())

    fit2 = snvc.gwr_fit_at(sites, X, y, "exponential_fixed", 2.0, include_intercept=True)
    d = sites.distances()
    wls_err = 0.0
    for i in range(n):
        w = np.exp(-d[i] / 2.0)
        beta = np.linalg.solve(Xi.T @ (w[:, None] * Xi), Xi.T @ (w * y))
        wls_err = max(wls_err, float(np.abs(fit2.local_coefs[i] - beta).max()))
    ok = ols_err < 1e-6 and wls_err < 1e-10
    _report(
        8,
        "GWR: infinite bandwidth equals global OLS; local fits match the per-site oracle",
        ok,
        f" (ols err {ols_err:.2e} < 1e-6, wls err {wls_err:.2e} < 1e-10)",
    )


def test_criterion_9_full_scale_out_of_scope_but_format_covered(tmp_path):
    # The published full-scale sweeps (200 iterations at N=1000 and the land
    # price dataset) are not rerun here; the desk-scale criteria above cover
    # the claims, and this check pins the report's share-table format.
    rng = np.random.default_rng(21)
    n = 80
    coords = rng.uniform(0, 10, (n, 2))
    x1 = rng.normal(size=n)
    y = 1.0 + 0.5 * x1 + 0.3 * rng.normal(size=n)
    data = tmp_path / "d.csv"
    write_table(str(data), ["px", "py", "price", "x1"], np.column_stack([coords, y, x1]))
    out, coef = str(tmp_path / "r.json"), str(tmp_path / "c.csv")
    code = main([
        "fit", "--data", str(data), "--y", "price", "--x", "x1", "--coords", "px,py",
        "--svc", "intercept", "--nvc", "none", "--out", out, "--coef-out", coef,
    ])
    report = FitReport.from_json(open(out).read())
    share_format_ok = code == 0 and report.svc_share["intercept"] == 1.000
    _report(
        9,
        "full-scale sweeps delegated to scaled criteria; share-table format verified",
        share_format_ok,
        f" (intercept share reported as {report.svc_share['intercept']:.3f})",
    )
