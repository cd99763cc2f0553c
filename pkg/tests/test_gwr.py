import numpy as np
import pytest

from snvc.errors import DegreesExhausted, SingularLocalFit
from snvc.gwr import _weights, gwr_fit_at, select_bandwidth
from snvc.spatial import SiteSet


def make_problem(n=25, k=2, seed=0, local=True):
    rng = np.random.default_rng(seed)
    coords = rng.uniform(0, 10, (n, 2))
    X = rng.normal(size=(n, k))
    slope = 1.0 + (0.3 * coords[:, 0] if local else 0.0)
    y = 2.0 + slope * X[:, 0] - 0.5 * X[:, 1] + 0.4 * rng.normal(size=n)
    return SiteSet(coords), X, y


class TestGwrFitAt:
    def test_huge_bandwidth_recovers_global_ols(self):
        sites, X, y = make_problem()
        bw = 1e9 * sites.distances().max()
        fit = gwr_fit_at(sites, X, y, "exponential_fixed", bw, include_intercept=True)
        Xi = np.column_stack([np.ones(25), X])
        b_ols, *_ = np.linalg.lstsq(Xi, y, rcond=None)
        assert np.abs(fit.local_coefs - b_ols[None, :]).max() < 1e-6
        assert abs(fit.trace_S - Xi.shape[1]) < 1e-6

    def test_aicc_formula_at_global_limit(self):
        sites, X, y = make_problem(seed=1)
        n, k = 25, 3  # including intercept
        bw = 1e9 * sites.distances().max()
        fit = gwr_fit_at(sites, X, y, "exponential_fixed", bw, include_intercept=True)
        sigma2 = fit.rss / n
        expected = n * np.log(sigma2) + n * np.log(2 * np.pi) + n * (n + k) / (n - 2 - k)
        assert fit.aicc == pytest.approx(expected, rel=1e-6)

    @pytest.mark.parametrize("kernel,bw", [("exponential_fixed", 2.5), ("exponential_adaptive", 7)])
    def test_matches_per_site_wls_oracle(self, kernel, bw):
        sites, X, y = make_problem(seed=2)
        fit = gwr_fit_at(sites, X, y, kernel, bw, include_intercept=True)
        Xi = np.column_stack([np.ones(25), X])
        d = sites.distances()
        for i in range(25):
            if kernel == "exponential_fixed":
                w = np.exp(-d[i] / bw)
            else:
                r = np.sort(d[i])[bw]  # m-th nearest neighbor, self at position 0
                w = np.exp(-d[i] / r)
            beta = np.linalg.solve(Xi.T @ (w[:, None] * Xi), Xi.T @ (w * y))
            assert np.abs(fit.local_coefs[i] - beta).max() < 1e-10

    def test_hat_matrix_consistency(self):
        sites, X, y = make_problem(seed=3)
        fit = gwr_fit_at(sites, X, y, "exponential_fixed", 2.0, include_intercept=True)
        Xi = np.column_stack([np.ones(25), X])
        d = sites.distances()
        S = np.zeros((25, 25))
        for i in range(25):
            w = np.exp(-d[i] / 2.0)
            S[i] = Xi[i] @ np.linalg.solve(Xi.T @ (w[:, None] * Xi), (Xi * w[:, None]).T)
        assert np.abs(fit.fitted - S @ y).max() < 1e-10
        assert abs(fit.trace_S - np.trace(S)) < 1e-10

    def test_self_weight_is_one(self):
        sites, _, _ = make_problem(seed=4)
        d = sites.distances()
        for kernel, bw in (("exponential_fixed", 1.7), ("exponential_adaptive", 5)):
            w = _weights(d, kernel, bw)
            np.testing.assert_allclose(np.diag(w), 1.0, atol=1e-15)
            assert np.all(w > 0)

    def test_degrees_exhausted_for_tiny_bandwidth(self):
        sites, X, y = make_problem(seed=5)
        with pytest.raises((DegreesExhausted, SingularLocalFit)):
            gwr_fit_at(sites, X, y, "exponential_fixed", 1e-8, include_intercept=True)

    def test_no_intercept_supported(self):
        sites, X, y = make_problem(seed=6)
        fit = gwr_fit_at(sites, X, y, "exponential_fixed", 3.0, include_intercept=False)
        assert fit.local_coefs.shape == (25, 2)
        assert fit.include_intercept is False


class TestSelectBandwidth:
    def test_requires_enough_sites(self):
        sites, X, y = make_problem(n=6, seed=7)
        with pytest.raises(ValueError, match="N >= K"):
            select_bandwidth(sites, X, y, "exponential_fixed")

    def test_constant_coefficients_prefer_upper_bound(self):
        hits = 0
        for rep in range(20):
            rng = np.random.default_rng(500 + rep)
            coords = rng.uniform(0, 10, (60, 2))
            X = rng.normal(size=(60, 2))
            y = 1.0 + X @ np.array([2.0, -1.0]) + 0.5 * rng.normal(size=60)
            sites = SiteSet(coords)
            fit = select_bandwidth(sites, X, y, "exponential_fixed")
            if fit.bandwidth >= 0.9 * sites.distances().max():
                hits += 1
        assert hits >= 16

    def test_golden_section_matches_grid_scan(self):
        sites, X, y = make_problem(n=40, seed=8, local=True)
        fit = select_bandwidth(sites, X, y, "exponential_fixed")
        maxdist = sites.distances().max()
        grid = np.linspace(0.01 * maxdist, maxdist, 200)
        aiccs = []
        for bw in grid:
            try:
                aiccs.append(gwr_fit_at(sites, X, y, "exponential_fixed", bw).aicc)
            except (DegreesExhausted, SingularLocalFit):
                aiccs.append(np.inf)
        best_grid = grid[int(np.argmin(aiccs))]
        spacing = grid[1] - grid[0]
        assert abs(fit.bandwidth - best_grid) <= spacing + 1e-3 * maxdist
        assert fit.aicc <= min(aiccs) + 1e-6 * abs(min(aiccs))

    def test_adaptive_scan_returns_minimum(self):
        sites, X, y = make_problem(n=30, seed=9)
        fit = select_bandwidth(sites, X, y, "exponential_adaptive")
        m = int(fit.bandwidth)
        assert 3 + 2 <= m <= 29
        for cand in range(5, 30):
            other = gwr_fit_at(sites, X, y, "exponential_adaptive", cand)
            assert fit.aicc <= other.aicc + 1e-9
