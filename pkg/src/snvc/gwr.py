"""Geographically weighted regression comparators.

Local weighted least squares at every site with an exponential
distance-decay kernel, either with one fixed bandwidth or with each site's
kernel rescaled by its m-th nearest-neighbor distance (adaptive).  The
bandwidth (or neighbor count) is chosen by minimizing the corrected AIC

    AICc = 2 N ln(sigma_hat) + N ln(2 pi) + N (N + tr(S)) / (N - 2 - tr(S)),

with sigma_hat^2 = RSS / N and S the hat matrix of the local fits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegreesExhausted, NoFeasibleBandwidth, SingularLocalFit
from .spatial import SiteSet

KERNELS = ("exponential_fixed", "exponential_adaptive")

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_BW_REL_TOL = 1e-3


@dataclass(frozen=True)
class GwrFit:
    local_coefs: np.ndarray  # (N, K)
    bandwidth: float | int
    kernel: str
    aicc: float
    trace_S: float
    include_intercept: bool
    fitted: np.ndarray  # (N,)
    rss: float


def _weights(d: np.ndarray, kernel: str, bw) -> np.ndarray:
    if kernel == "exponential_fixed":
        if not bw > 0:
            raise ValueError("fixed bandwidth must be positive")
        return np.exp(-d / float(bw))
    # Adaptive: per-row range set by the m-th nearest neighbor (self excluded).
    m = int(bw)
    n = d.shape[0]
    if not 1 <= m <= n - 1:
        raise ValueError(f"neighbor count must lie in [1, {n - 1}]")
    r = np.partition(d, m, axis=1)[:, m]  # index 0 is the self distance
    r = np.maximum(r, np.finfo(float).tiny)
    return np.exp(-d / r[:, None])


def gwr_fit_at(
    sites: SiteSet,
    X: np.ndarray,
    y: np.ndarray,
    kernel: str = "exponential_fixed",
    bw=1.0,
    include_intercept: bool = True,
) -> GwrFit:
    """Local WLS at every site for one bandwidth / neighbor count.

    Raises
    ------
    SingularLocalFit
        Some site's weighted moment matrix is rank-deficient.
    DegreesExhausted
        tr(S) >= N - 2, leaving AICc undefined.
    """
    if kernel not in KERNELS:
        raise ValueError(f"kernel must be one of {KERNELS}")
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    n = sites.n_sites
    if include_intercept:
        X = np.column_stack([np.ones(n), X])
    k = X.shape[1]

    d = sites.distances()
    w = _weights(d, kernel, bw)

    # One batched pass: A_i = X' diag(w_i) X, c_i = X' diag(w_i) y.
    a = np.einsum("ij,jk,jl->ikl", w, X, X)
    c = np.einsum("ij,jk,j->ik", w, X, y)
    try:
        betas = np.linalg.solve(a, c[:, :, None])[:, :, 0]
        ainv_x = np.linalg.solve(a, X[:, :, None])[:, :, 0]
    except np.linalg.LinAlgError as exc:
        raise SingularLocalFit("a site's weighted moment matrix is rank-deficient") from exc

    fitted = np.einsum("ik,ik->i", X, betas)
    # S_ii = w_ii x_i' A_i^{-1} x_i with w_ii = 1 for both kernels.
    trace_s = float(np.einsum("ik,ik->i", X, ainv_x).sum())
    if not np.isfinite(trace_s):
        raise SingularLocalFit("hat-matrix trace is not finite")
    if trace_s >= n - 2:
        raise DegreesExhausted(f"tr(S) = {trace_s:.2f} >= N - 2 = {n - 2}")

    rss = float(((y - fitted) ** 2).sum())
    sigma2 = max(rss / n, 1e-300)
    aicc = n * math.log(sigma2) + n * math.log(2.0 * math.pi) + n * (n + trace_s) / (n - 2.0 - trace_s)
    return GwrFit(
        local_coefs=betas,
        bandwidth=bw,
        kernel=kernel,
        aicc=aicc,
        trace_S=trace_s,
        include_intercept=include_intercept,
        fitted=fitted,
        rss=rss,
    )


def select_bandwidth(
    sites: SiteSet,
    X: np.ndarray,
    y: np.ndarray,
    kernel: str = "exponential_fixed",
    include_intercept: bool = True,
) -> GwrFit:
    """AICc-minimizing bandwidth: golden-section over distance for the fixed
    kernel, integer scan over neighbor counts for the adaptive one.

    Candidates whose local fits fail are skipped; if every candidate fails,
    NoFeasibleBandwidth is raised.
    """
    X_arr = np.asarray(X, dtype=float)
    if X_arr.ndim == 1:
        X_arr = X_arr[:, None]
    n = sites.n_sites
    k = X_arr.shape[1] + (1 if include_intercept else 0)
    if n < k + 5:
        raise ValueError(f"need N >= K + 5 = {k + 5} sites, got {n}")

    def try_fit(bw):
        try:
            return gwr_fit_at(sites, X_arr, y, kernel, bw, include_intercept)
        except (SingularLocalFit, DegreesExhausted):
            return None

    if kernel == "exponential_adaptive":
        lo, hi = k + 2, n - 1
        candidates = _adaptive_candidates(lo, hi)
        best = None
        for m in candidates:
            fit = try_fit(m)
            if fit is not None and (best is None or fit.aicc < best.aicc - 1e-12):
                best = fit
        if best is not None and hi - lo + 1 > len(candidates):
            # Refine around the coarse winner.
            m0 = int(best.bandwidth)
            for m in range(max(lo, m0 - 8), min(hi, m0 + 8) + 1):
                fit = try_fit(m)
                if fit is not None and fit.aicc < best.aicc - 1e-12:
                    best = fit
        if best is None:
            raise NoFeasibleBandwidth("all neighbor counts failed")
        return best

    maxdist = float(sites.distances().max())
    a, b = 0.01 * maxdist, maxdist
    return _golden_section(try_fit, a, b)


def _adaptive_candidates(lo: int, hi: int, max_exhaustive: int = 256) -> list[int]:
    count = hi - lo + 1
    if count <= max_exhaustive:
        return list(range(lo, hi + 1))
    grid = np.unique(np.linspace(lo, hi, max_exhaustive).round().astype(int))
    return [int(m) for m in grid]


def _golden_section(try_fit, a: float, b: float) -> GwrFit:
    """AICc golden-section over [a, b]; ties resolve toward larger bandwidths."""

    def score(bw):
        fit = try_fit(bw)
        return (math.inf if fit is None else fit.aicc), fit

    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fit_c = score(c)
    fd, fit_d = score(d)
    while (b - a) > _BW_REL_TOL * max(abs(b), 1e-300):
        if fc < fd:  # minimum in [a, d]; on ties prefer the larger-bw side
            b, d, fd, fit_d = d, c, fc, fit_c
            c = b - _GOLDEN * (b - a)
            fc, fit_c = score(c)
        else:
            a, c, fc, fit_c = c, d, fd, fit_d
            d = a + _GOLDEN * (b - a)
            fd, fit_d = score(d)
    f_final, fit_final = score(0.5 * (a + b))
    for f, fit in ((fc, fit_c), (fd, fit_d)):
        if fit is not None and f < f_final:
            f_final, fit_final = f, fit
    if fit_final is None:
        raise NoFeasibleBandwidth("every candidate bandwidth failed")
    return fit_final
