"""Mixed-model engine for spatially and non-spatially varying coefficients.

The regression coefficient of covariate k decomposes into a constant mean, a
spatial part spanned by Moran eigenvectors, and a non-spatial part spanned by
a spline basis in the covariate itself.  Stacking those bases row-scaled by
the covariate gives an ordinary linear mixed model; the restricted
log-likelihood of its variance parameters is evaluated here entirely from
precomputed crossproducts, so one evaluation costs the same at N = 100 and
N = 100,000.

Layout convention for the random-effect columns: all spatial blocks in
covariate order, then all non-spatial blocks in covariate order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import (
    DimensionMismatch,
    EmptySpatialBasis,
    NumericalBreakdown,
    SingularFixedBlock,
)
from .spatial import EigenScaling, SpatialBasis, scale_eigenvalues
from .splines import NvcBasis, spline_basis

# Profiled residual variances below this are treated as degenerate.
VARIANCE_FLOOR = 1e-12

ALPHA_BOUNDS = (-5.0, 10.0)

# log tau^2 is clamped here to keep exp() finite during the search.
_LOG_TAU2_BOUNDS = (-46.0, 46.0)

_MAX_EVALS_TOTAL = 2000
_N_STARTS = 2


@dataclass(frozen=True)
class ModelSpec:
    """Per-covariate switches for the coefficient decomposition."""

    covariate_names: tuple[str, ...]
    has_svc: tuple[bool, ...]
    has_nvc: tuple[bool, ...]
    n_basis_nvc: tuple[int, ...] = ()
    spline_family: str = "natural_cubic"

    def __post_init__(self):
        k = len(self.covariate_names)
        if k < 1:
            raise ValueError("need at least one covariate")
        if len(self.has_svc) != k or len(self.has_nvc) != k:
            raise ValueError("per-covariate switch lengths must match covariate_names")
        if not self.n_basis_nvc:
            object.__setattr__(self, "n_basis_nvc", tuple(10 for _ in range(k)))
        elif len(self.n_basis_nvc) != k:
            raise ValueError("n_basis_nvc length must match covariate_names")

    @property
    def n_covariates(self) -> int:
        return len(self.covariate_names)


@dataclass(frozen=True)
class BlockLayout:
    """Column range of one random-effect block inside the stacked basis."""

    covariate: int
    kind: str  # "svc" | "nvc"
    start: int
    stop: int

    @property
    def size(self) -> int:
        return self.stop - self.start


@dataclass(frozen=True)
class DesignMatrix:
    """Fixed-effect block X and row-scaled random-effect blocks."""

    X: np.ndarray  # (N, K)
    blocks: tuple[BlockLayout, ...]
    block_values: tuple[np.ndarray, ...]  # aligned with blocks

    @property
    def n_obs(self) -> int:
        return self.X.shape[0]

    @property
    def n_fixed(self) -> int:
        return self.X.shape[1]

    @property
    def n_random(self) -> int:
        return self.blocks[-1].stop if self.blocks else 0

    def random_effects(self) -> np.ndarray:
        """All random-effect columns as one N x P matrix."""
        if not self.block_values:
            return np.empty((self.n_obs, 0))
        return np.hstack(self.block_values)


@dataclass(frozen=True)
class Crossproducts:
    """Every inner product the restricted likelihood needs; nothing N-sized."""

    XtX: np.ndarray
    XtE: np.ndarray
    EtE: np.ndarray
    Xty: np.ndarray
    Ety: np.ndarray
    yty: float
    n_obs: int
    blocks: tuple[BlockLayout, ...]

    @property
    def n_fixed(self) -> int:
        return self.XtX.shape[0]

    @property
    def n_random(self) -> int:
        return self.EtE.shape[0]


@dataclass(frozen=True)
class VarianceParams:
    """Residual variance plus per-covariate variance/scale parameters.

    ``tau2_s[k]`` and ``tau2_n[k]`` are absolute variances; the likelihood
    only ever consumes the ratios ``tau / sigma``.
    """

    sigma2: float
    tau2_s: np.ndarray
    alpha: np.ndarray
    tau2_n: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "tau2_s", np.asarray(self.tau2_s, dtype=float))
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        object.__setattr__(self, "tau2_n", np.asarray(self.tau2_n, dtype=float))
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if np.any(self.tau2_s < 0) or np.any(self.tau2_n < 0):
            raise ValueError("tau2 values must be nonnegative")
        lo, hi = ALPHA_BOUNDS
        if np.any(self.alpha < lo) or np.any(self.alpha > hi):
            raise ValueError(f"alpha must lie in [{lo}, {hi}]")

    def validate_against(self, spec: ModelSpec) -> None:
        for k in range(spec.n_covariates):
            if not spec.has_svc[k] and self.tau2_s[k] != 0.0:
                raise ValueError(f"tau2_s[{k}] must be 0 when has_svc is false")
            if not spec.has_nvc[k] and self.tau2_n[k] != 0.0:
                raise ValueError(f"tau2_n[{k}] must be 0 when has_nvc is false")


@dataclass(frozen=True)
class LoglikResult:
    loglik: float
    b_hat: np.ndarray
    u_hat: np.ndarray
    sigma2_hat: float
    logdet: float


@dataclass(frozen=True)
class FittedModel:
    spec: ModelSpec
    theta: VarianceParams
    b_hat: np.ndarray
    u_hat: np.ndarray
    restricted_loglik: float
    n_loglik_evals: int
    converged: bool
    blocks: tuple[BlockLayout, ...] = field(repr=False, default=())


@dataclass(frozen=True)
class CoefficientField:
    """Per-site coefficient decomposition: total = mean + svc + nvc exactly."""

    covariate_names: tuple[str, ...]
    mean: np.ndarray  # (K,)
    svc: np.ndarray  # (N, K)
    nvc: np.ndarray  # (N, K)
    total: np.ndarray  # (N, K)
    sd_svc: np.ndarray  # (K,)
    sd_nvc: np.ndarray  # (K,)
    svc_share: np.ndarray  # (K,)
    constant_coefficient: np.ndarray  # (K,) bool


def build_design(
    X: np.ndarray,
    spec: ModelSpec,
    spatial: SpatialBasis | None,
    nvc_bases: list[NvcBasis | None],
) -> DesignMatrix:
    """Assemble the stacked design: X, then x_k-scaled spatial and spline blocks.

    Raises
    ------
    EmptySpatialBasis
        An SVC term is requested but the spatial basis has no component.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != spec.n_covariates:
        raise DimensionMismatch("X must be N x K with K matching the model spec")
    n = X.shape[0]

    any_svc = any(spec.has_svc)
    if any_svc:
        if spatial is None or spatial.n_components == 0:
            raise EmptySpatialBasis("SVC requested but the spatial basis is empty")
        if spatial.n_sites != n:
            raise DimensionMismatch("spatial basis rows must match X rows")
    if len(nvc_bases) != spec.n_covariates:
        raise DimensionMismatch("nvc_bases must have one entry per covariate")

    blocks: list[BlockLayout] = []
    values: list[np.ndarray] = []
    offset = 0
    for k in range(spec.n_covariates):
        if spec.has_svc[k]:
            block = X[:, k : k + 1] * spatial.eigvecs
            blocks.append(BlockLayout(k, "svc", offset, offset + block.shape[1]))
            values.append(block)
            offset += block.shape[1]
    for k in range(spec.n_covariates):
        if spec.has_nvc[k]:
            basis = nvc_bases[k]
            if basis is None:
                raise DimensionMismatch(f"covariate {k} has NVC enabled but no basis")
            if basis.values.shape[0] != n:
                raise DimensionMismatch("NVC basis rows must match X rows")
            block = X[:, k : k + 1] * basis.values
            blocks.append(BlockLayout(k, "nvc", offset, offset + block.shape[1]))
            values.append(block)
            offset += block.shape[1]

    return DesignMatrix(X=X, blocks=tuple(blocks), block_values=tuple(values))


def precompute_crossproducts(Z: DesignMatrix, y: np.ndarray) -> Crossproducts:
    """One pass of dense products; everything downstream is N-free."""
    y = np.asarray(y, dtype=float).ravel()
    n = Z.n_obs
    if y.shape[0] != n:
        raise DimensionMismatch("y length must match the design rows")
    if n <= Z.n_fixed:
        raise ValueError("need more observations than fixed effects")
    E = Z.random_effects()
    return Crossproducts(
        XtX=Z.X.T @ Z.X,
        XtE=Z.X.T @ E,
        EtE=E.T @ E,
        Xty=Z.X.T @ y,
        Ety=E.T @ y,
        yty=float(y @ y),
        n_obs=n,
        blocks=Z.blocks,
    )


def _v_diagonal(
    blocks: tuple[BlockLayout, ...],
    theta: VarianceParams,
    scalings: list[EigenScaling | None],
) -> np.ndarray:
    """Diagonal of the random-effect scaling matrix, per block (tau/sigma) units."""
    p = blocks[-1].stop if blocks else 0
    v = np.zeros(p)
    for blk in blocks:
        k = blk.covariate
        if blk.kind == "svc":
            ratio = math.sqrt(theta.tau2_s[k] / theta.sigma2)
            scaling = scalings[k]
            if scaling is None:
                raise ValueError(f"missing eigen scaling for covariate {k}")
            weights = np.sqrt(scaling.scaled_weights[: blk.size])
            v[blk.start : blk.stop] = ratio * weights
        else:
            ratio = math.sqrt(theta.tau2_n[k] / theta.sigma2)
            v[blk.start : blk.stop] = ratio
    return v


def restricted_loglik(
    cp: Crossproducts,
    spec: ModelSpec,
    theta: VarianceParams,
    scalings: list[EigenScaling | None],
) -> LoglikResult:
    """Restricted log-likelihood with the residual variance profiled out.

    Builds the symmetric system

        [ X'X      X'E V     ] [b]   [ X'y  ]
        [ V E'X    V E'E V+I ] [u] = [ V E'y]

    from the crossproducts alone, solves it by Cholesky, and evaluates

        -log|system|/2 - (N-K)/2 * (1 + log(2 pi sigma2_hat)),

    where sigma2_hat = (residual SS + ||u||^2) / (N - K) expands through the
    same crossproducts.  ``scalings[k]`` must carry the eigenvalue weights at
    the current alpha_k for every covariate with an SVC term.

    Raises
    ------
    SingularFixedBlock
        X'X is not positive definite.
    NumericalBreakdown
        The joint system cannot be factorized, or the profiled variance
        falls below the degeneracy floor.
    """
    theta.validate_against(spec)
    n, k = cp.n_obs, cp.n_fixed
    p = cp.n_random

    fixed_eigs = np.linalg.eigvalsh(cp.XtX)
    if fixed_eigs[0] <= 1e-12 * max(fixed_eigs[-1], np.finfo(float).tiny):
        raise SingularFixedBlock("X'X is rank-deficient")

    v = _v_diagonal(cp.blocks, theta, scalings)
    g = np.empty((k + p, k + p))
    g[:k, :k] = cp.XtX
    g[:k, k:] = cp.XtE * v
    g[k:, :k] = g[:k, k:].T
    g[k:, k:] = (v[:, None] * cp.EtE) * v[None, :]
    g[k + np.arange(p), k + np.arange(p)] += 1.0
    rhs = np.concatenate([cp.Xty, v * cp.Ety])

    try:
        factor = scipy.linalg.cho_factor(g, lower=True)
    except scipy.linalg.LinAlgError as exc:
        raise NumericalBreakdown("joint system factorization failed") from exc
    sol = scipy.linalg.cho_solve(factor, rhs)

    quad = cp.yty - float(rhs @ sol)  # residual SS + ||u||^2
    sigma2_hat = quad / (n - k)
    if not sigma2_hat > VARIANCE_FLOOR:
        raise NumericalBreakdown(
            f"profiled variance {sigma2_hat:.3e} is at or below the floor {VARIANCE_FLOOR}"
        )

    logdet = 2.0 * float(np.sum(np.log(np.diag(factor[0]))))
    loglik = -0.5 * logdet - 0.5 * (n - k) * (1.0 + math.log(2.0 * math.pi * sigma2_hat))
    return LoglikResult(
        loglik=loglik,
        b_hat=sol[:k],
        u_hat=sol[k:],
        sigma2_hat=sigma2_hat,
        logdet=logdet,
    )


# ---------------------------------------------------------------------------
# REML optimization
# ---------------------------------------------------------------------------


@dataclass
class _ParamLayout:
    """Mapping between the optimizer vector and VarianceParams.

    Searched parameters are log variance ratios (tau/sigma)^2 and raw alpha;
    alpha is only searched when at least 3 eigenvalues make it identifiable.
    """

    idx_log_tau2_s: dict[int, int]
    idx_alpha: dict[int, int]
    idx_log_tau2_n: dict[int, int]
    fixed_alpha: float = 1.0

    @property
    def size(self) -> int:
        return len(self.idx_log_tau2_s) + len(self.idx_alpha) + len(self.idx_log_tau2_n)

    def groups_by_covariate(self) -> list[list[int]]:
        seen: dict[int, list[int]] = {}
        for k, i in self.idx_log_tau2_s.items():
            seen.setdefault(k, []).append(i)
        for k, i in self.idx_alpha.items():
            seen.setdefault(k, []).append(i)
        for k, i in self.idx_log_tau2_n.items():
            seen.setdefault(k, []).append(i)
        return [sorted(v) for _, v in sorted(seen.items())]

    def decode(self, t: np.ndarray, n_cov: int) -> VarianceParams:
        lo, hi = _LOG_TAU2_BOUNDS
        tau2_s = np.zeros(n_cov)
        tau2_n = np.zeros(n_cov)
        alpha = np.zeros(n_cov)
        for k, i in self.idx_log_tau2_s.items():
            tau2_s[k] = math.exp(min(max(t[i], lo), hi))
            alpha[k] = self.fixed_alpha
        for k, i in self.idx_alpha.items():
            alpha[k] = min(max(t[i], ALPHA_BOUNDS[0]), ALPHA_BOUNDS[1])
        for k, i in self.idx_log_tau2_n.items():
            tau2_n[k] = math.exp(min(max(t[i], lo), hi))
        return VarianceParams(sigma2=1.0, tau2_s=tau2_s, alpha=alpha, tau2_n=tau2_n)


def _build_layout(cp: Crossproducts, spec: ModelSpec, n_eigvals: int) -> _ParamLayout:
    idx_s: dict[int, int] = {}
    idx_a: dict[int, int] = {}
    idx_n: dict[int, int] = {}
    pos = 0
    svc_cov = sorted({b.covariate for b in cp.blocks if b.kind == "svc"})
    nvc_cov = sorted({b.covariate for b in cp.blocks if b.kind == "nvc"})
    for k in svc_cov:
        idx_s[k] = pos
        pos += 1
        if n_eigvals >= 3:  # alpha unidentifiable from fewer eigenvalues
            idx_a[k] = pos
            pos += 1
    for k in nvc_cov:
        idx_n[k] = pos
        pos += 1
    return _ParamLayout(idx_log_tau2_s=idx_s, idx_alpha=idx_a, idx_log_tau2_n=idx_n)


def fit_reml(
    cp: Crossproducts,
    spec: ModelSpec,
    spatial: SpatialBasis | None,
    max_evals: int = _MAX_EVALS_TOTAL,
) -> FittedModel:
    """Maximize the restricted log-likelihood over the variance parameters.

    Nelder-Mead over transformed parameters from two fixed starts (ratio
    tau/sigma of 0.1 with alpha 1, and ratio 1 with alpha 0); when the
    parameter count exceeds 12, cyclic per-covariate sweeps replace the
    joint simplex.  Deterministic given identical inputs.  If the evaluation
    budget runs out first, the best point found is returned with
    ``converged = False``.
    """
    n_cov = spec.n_covariates
    n_eig = spatial.n_components if spatial is not None else 0
    layout = _build_layout(cp, spec, n_eig)

    eig_scaling_cache: dict[float, EigenScaling] = {}

    def scalings_for(theta: VarianceParams) -> list[EigenScaling | None]:
        out: list[EigenScaling | None] = [None] * n_cov
        for blk in cp.blocks:
            if blk.kind != "svc":
                continue
            a = float(theta.alpha[blk.covariate])
            if a not in eig_scaling_cache:
                eig_scaling_cache[a] = scale_eigenvalues(spatial, a)
            out[blk.covariate] = eig_scaling_cache[a]
        return out

    state = {"n_evals": 0, "best_f": math.inf, "best_t": None}

    def objective(t: np.ndarray) -> float:
        state["n_evals"] += 1
        theta = layout.decode(t, n_cov)
        try:
            res = restricted_loglik(cp, spec, theta, scalings_for(theta))
        except NumericalBreakdown:
            return math.inf
        f = -res.loglik
        if math.isnan(f):
            return math.inf
        if f < state["best_f"]:
            state["best_f"] = f
            state["best_t"] = np.array(t)
        return f

    if layout.size == 0:
        # No random effects: the model is plain least squares.
        theta = layout.decode(np.empty(0), n_cov)
        res = restricted_loglik(cp, spec, theta, [None] * n_cov)
        return _finalize(cp, spec, theta, res, n_evals=1, converged=True)

    starts = []
    for log_ratio2, a0 in ((math.log(0.1**2), 1.0), (0.0, 0.0)):
        t0 = np.zeros(layout.size)
        for i in layout.idx_log_tau2_s.values():
            t0[i] = log_ratio2
        for i in layout.idx_log_tau2_n.values():
            t0[i] = log_ratio2
        for i in layout.idx_alpha.values():
            t0[i] = a0
        starts.append(t0)

    budget_per_start = max_evals // _N_STARTS
    converged = True
    for t0 in starts:
        if layout.size <= 12:
            ok = _simplex(objective, t0, budget_per_start)
        else:
            ok = _cyclic_sweeps(objective, t0, layout, budget_per_start)
        converged = converged and ok

    best_t = state["best_t"]
    if best_t is None:
        raise NumericalBreakdown("no admissible variance point was found")
    theta_ratio = layout.decode(best_t, n_cov)
    res = restricted_loglik(cp, spec, theta_ratio, scalings_for(theta_ratio))
    state["n_evals"] += 1
    return _finalize(cp, spec, theta_ratio, res, state["n_evals"], converged)


def _simplex(objective, t0: np.ndarray, budget: int) -> bool:
    f0 = objective(t0)
    fatol = 1e-6 * max(1.0, abs(f0) if math.isfinite(f0) else 1.0)
    res = scipy.optimize.minimize(
        objective,
        t0,
        method="Nelder-Mead",
        options={"maxfev": budget, "fatol": fatol, "xatol": 1e-4},
    )
    return bool(res.success)


def _cyclic_sweeps(objective, t0: np.ndarray, layout: _ParamLayout, budget: int) -> bool:
    """Optimize each covariate's 1-3 parameters in turn until gains stall."""
    groups = layout.groups_by_covariate()
    t = np.array(t0)
    f_cur = objective(t)
    used = 1
    gain_tol = 1e-5
    while used < budget:
        f_sweep_start = f_cur
        for idx in groups:
            sub_budget = min(60 * len(idx), budget - used)
            if sub_budget <= len(idx) + 1:
                return False

            def sub_obj(s):
                tt = np.array(t)
                tt[idx] = s
                return objective(tt)

            res = scipy.optimize.minimize(
                sub_obj,
                t[idx],
                method="Nelder-Mead",
                options={"maxfev": sub_budget, "fatol": 1e-7 * max(1.0, abs(f_cur)), "xatol": 1e-4},
            )
            used += res.nfev
            if res.fun < f_cur:
                f_cur = res.fun
                t[idx] = res.x
        if f_sweep_start - f_cur < gain_tol:
            return True
    return False


def _finalize(
    cp: Crossproducts,
    spec: ModelSpec,
    theta_ratio: VarianceParams,
    res: LoglikResult,
    n_evals: int,
    converged: bool,
) -> FittedModel:
    # Searched parameters are variance ratios relative to sigma2 = 1; rescale
    # by the profiled sigma2 so the stored tau2 are absolute variances with
    # identical ratios (the likelihood value is unchanged).
    s2 = res.sigma2_hat
    theta = VarianceParams(
        sigma2=s2,
        tau2_s=theta_ratio.tau2_s * s2,
        alpha=theta_ratio.alpha,
        tau2_n=theta_ratio.tau2_n * s2,
    )
    return FittedModel(
        spec=spec,
        theta=theta,
        b_hat=res.b_hat,
        u_hat=res.u_hat,
        restricted_loglik=res.loglik,
        n_loglik_evals=n_evals,
        converged=converged,
        blocks=cp.blocks,
    )


# ---------------------------------------------------------------------------
# Coefficient prediction
# ---------------------------------------------------------------------------


def predict_coefficients(
    fit: FittedModel,
    spatial: SpatialBasis | None,
    nvc_bases: list[NvcBasis | None],
    require_converged: bool = True,
    n_sites: int | None = None,
) -> CoefficientField:
    """Per-site coefficient decomposition from the fitted effects.

    The spatial part of covariate k is (tau_s/sigma) E Lambda^(alpha/2) u_k,
    the non-spatial part (tau_n/sigma) E_k u_k; the total adds the constant
    mean.  Set ``require_converged=False`` to decompose an unconverged fit.
    ``n_sites`` is only needed when the model has no basis at all.
    """
    if require_converged and not fit.converged:
        raise ValueError("fit did not converge; pass require_converged=False to override")
    spec, theta = fit.spec, fit.theta
    n_cov = spec.n_covariates
    if spatial is not None:
        n = spatial.n_sites
    else:
        nonempty = [b for b in nvc_bases if b is not None]
        if nonempty:
            n = nonempty[0].values.shape[0]
        elif n_sites is not None:
            n = n_sites
        else:
            raise ValueError("need a basis or n_sites to size the coefficient field")

    svc = np.zeros((n, n_cov))
    nvc = np.zeros((n, n_cov))
    for blk in fit.blocks:
        k = blk.covariate
        u_blk = fit.u_hat[blk.start : blk.stop]
        if blk.kind == "svc":
            ratio = math.sqrt(theta.tau2_s[k] / theta.sigma2)
            weights = np.sqrt(scale_eigenvalues(spatial, float(theta.alpha[k])).scaled_weights)
            svc[:, k] = spatial.eigvecs[:, : blk.size] @ (ratio * weights[: blk.size] * u_blk)
        else:
            ratio = math.sqrt(theta.tau2_n[k] / theta.sigma2)
            nvc[:, k] = nvc_bases[k].values @ (ratio * u_blk)

    mean = np.asarray(fit.b_hat, dtype=float)
    total = mean[None, :] + svc + nvc
    sd_svc = svc.std(axis=0, ddof=1)
    sd_nvc = nvc.std(axis=0, ddof=1)
    shares, constant = _share_from_sds(sd_svc, sd_nvc)
    return CoefficientField(
        covariate_names=spec.covariate_names,
        mean=mean,
        svc=svc,
        nvc=nvc,
        total=total,
        sd_svc=sd_svc,
        sd_nvc=sd_nvc,
        svc_share=shares,
        constant_coefficient=constant,
    )


def _share_from_sds(sd_svc: np.ndarray, sd_nvc: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    denom = sd_svc + sd_nvc
    constant = denom == 0.0
    shares = np.where(constant, 1.0, sd_svc / np.where(constant, 1.0, denom))
    return shares, constant


def svc_share(field: CoefficientField) -> np.ndarray:
    """Share of each coefficient's variation carried by its spatial part.

    sd(svc) / (sd(svc) + sd(nvc)); a coefficient with no variation at all is
    reported as 1.0 and flagged in ``field.constant_coefficient``.
    """
    shares, _ = _share_from_sds(field.sd_svc, field.sd_nvc)
    return shares


def fit_snvc(
    X: np.ndarray,
    y: np.ndarray,
    spec: ModelSpec,
    spatial: SpatialBasis | None,
    nvc_bases: list[NvcBasis | None] | None = None,
    max_evals: int = _MAX_EVALS_TOTAL,
) -> tuple[FittedModel, CoefficientField]:
    """Design assembly, crossproducts, REML fit, and coefficient field in one call.

    When ``nvc_bases`` is omitted, spline bases are built from the covariate
    columns flagged in the spec.  The coefficient field is produced even for
    an unconverged fit; check ``FittedModel.converged``.
    """
    X = np.asarray(X, dtype=float)
    if nvc_bases is None:
        nvc_bases = [
            spline_basis(X[:, k], spec.n_basis_nvc[k], spec.spline_family)
            if spec.has_nvc[k]
            else None
            for k in range(spec.n_covariates)
        ]
    design = build_design(X, spec, spatial, nvc_bases)
    cp = precompute_crossproducts(design, y)
    fit = fit_reml(cp, spec, spatial, max_evals=max_evals)
    field = predict_coefficients(
        fit, spatial, nvc_bases, require_converged=False, n_sites=X.shape[0]
    )
    return fit, field
