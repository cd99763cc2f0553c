"""Moran eigenvector spatial basis.

Builds the exponential proximity matrix ``c_ij = exp(-d_ij / r)`` with the
range ``r`` taken from the longest edge of a Euclidean minimum spanning tree,
eigendecomposes the doubly-centered matrix ``M C M`` (``M = I - 11'/N``), and
keeps the eigenvectors belonging to positive eigenvalues.  Those columns are
the map patterns with positive spatial autocorrelation; their eigenvalues,
raised to a power ``alpha``, control the spatial scale of a simulated or
fitted coefficient surface.

All functions here are pure; returned objects are immutable in practice and
safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AllSitesCoincident,
    ConstantVector,
    EmptyBasis,
    NonPositiveRange,
)

# Exact dense eigendecomposition only; refuse sizes where that is no longer
# a desk-scale operation.
DEFAULT_MAX_SITES = 10_000

# Relative threshold deciding which eigenvalues count as positive.
DEFAULT_EIGEN_CUTOFF = 1e-8


@dataclass(frozen=True)
class SiteSet:
    """Planar sample sites with Euclidean geometry."""

    coords: np.ndarray  # (N, 2)

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2 or coords.shape[1] != 2:
            raise ValueError("coords must be an N x 2 array")
        if coords.shape[0] < 2:
            raise ValueError("need at least 2 sites")
        if not np.all(np.isfinite(coords)):
            raise ValueError("coordinates must be finite")
        object.__setattr__(self, "coords", coords)

    @property
    def n_sites(self) -> int:
        return self.coords.shape[0]

    def distances(self) -> np.ndarray:
        """Full N x N Euclidean distance matrix."""
        diff = self.coords[:, None, :] - self.coords[None, :, :]
        return np.sqrt((diff**2).sum(axis=2))


@dataclass(frozen=True)
class ProximityMatrix:
    """Symmetric distance-decay weights ``exp(-d_ij / r)`` with zero diagonal."""

    values: np.ndarray
    range_r: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)

    @property
    def n_sites(self) -> int:
        return self.values.shape[0]

    def total_weight(self) -> float:
        """1'C1, the grand sum of the weights."""
        return float(self.values.sum())


@dataclass(frozen=True)
class SpatialBasis:
    """Positive-eigenvalue eigenpairs of M C M, eigenvalues sorted descending.

    ``n_total_nonzero`` counts every numerically nonzero eigenvalue of the
    full spectrum (positive and negative), kept for diagnostics.
    """

    eigvecs: np.ndarray  # (N, L), orthonormal, column means zero
    eigvals: np.ndarray  # (L,), strictly positive, descending
    range_r: float
    n_total_nonzero: int

    @property
    def n_components(self) -> int:
        return self.eigvals.shape[0]

    @property
    def n_sites(self) -> int:
        return self.eigvecs.shape[0]

    def truncated(self, max_components: int) -> "SpatialBasis":
        """Basis restricted to the leading (largest-eigenvalue) columns."""
        if max_components >= self.n_components:
            return self
        return SpatialBasis(
            eigvecs=self.eigvecs[:, :max_components],
            eigvals=self.eigvals[:max_components],
            range_r=self.range_r,
            n_total_nonzero=self.n_total_nonzero,
        )


@dataclass(frozen=True)
class EigenScaling:
    """Eigenvalue weights ``(lambda_l / lambda_1)**alpha``.

    Normalizing by the leading eigenvalue keeps the weights in (0, 1] for
    alpha > 0; the absorbed overall scale moves into the matching tau^2.
    """

    alpha: float
    scaled_weights: np.ndarray = field(repr=False)


def mst_range(sites: SiteSet) -> float:
    """Maximum edge length of a Euclidean minimum spanning tree over the sites.

    Prim's algorithm on the dense distance matrix.  Duplicate sites give
    zero-length edges, which are valid tree edges.

    Raises
    ------
    AllSitesCoincident
        If every pairwise distance is zero.
    """
    d = sites.distances()
    n = sites.n_sites
    if np.all(d == 0.0):
        raise AllSitesCoincident("all pairwise distances are zero")

    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = d[0].copy()
    best[0] = np.inf
    max_edge = 0.0
    for _ in range(n - 1):
        j = int(np.argmin(np.where(in_tree, np.inf, best)))
        max_edge = max(max_edge, float(best[j]))
        in_tree[j] = True
        best = np.minimum(best, d[j])
        best[j] = np.inf
    return max_edge


def build_proximity(sites: SiteSet, range_r: float) -> ProximityMatrix:
    """Exponential proximity matrix ``exp(-d_ij / range_r)``, zero diagonal."""
    if not range_r > 0.0:
        raise NonPositiveRange(f"range must be positive, got {range_r}")
    values = np.exp(-sites.distances() / range_r)
    np.fill_diagonal(values, 0.0)
    return ProximityMatrix(values=values, range_r=float(range_r))


def moran_eigen_basis(
    C: ProximityMatrix,
    cutoff_rel: float = DEFAULT_EIGEN_CUTOFF,
    max_sites: int = DEFAULT_MAX_SITES,
) -> SpatialBasis:
    """Positive-eigenvalue part of the full symmetric eigendecomposition of M C M.

    Parameters
    ----------
    C : ProximityMatrix
    cutoff_rel : float
        Keep eigenpairs with ``lambda > cutoff_rel * lambda_max``; guards
        against floating-point zeros masquerading as positive eigenvalues.
    max_sites : int
        Hard limit on N for the dense decomposition.

    Returns
    -------
    SpatialBasis
        May be empty (L = 0) when the spectrum has no positive eigenvalue,
        e.g. N = 2 or an equilateral triangle.
    """
    if not 0.0 < cutoff_rel < 1.0:
        raise ValueError("cutoff_rel must lie in (0, 1)")
    n = C.n_sites
    if n > max_sites:
        raise ValueError(
            f"N = {n} exceeds the dense-decomposition limit {max_sites}; "
            "approximate eigen methods are out of scope"
        )

    # M C M computed without materializing M: double-center C.
    row_means = C.values.mean(axis=1, keepdims=True)
    grand = C.values.mean()
    mcm = C.values - row_means - row_means.T + grand
    mcm = 0.5 * (mcm + mcm.T)

    eigvals, eigvecs = np.linalg.eigh(mcm)
    abs_max = float(np.abs(eigvals).max())
    n_nonzero = int((np.abs(eigvals) > cutoff_rel * abs_max).sum()) if abs_max > 0 else 0

    # The cutoff is relative to the spectral magnitude so that spectra whose
    # largest eigenvalue is a floating-point zero (e.g. an equilateral
    # triangle) come back empty instead of keeping noise.
    keep = eigvals > cutoff_rel * abs_max if abs_max > 0 else np.zeros(n, dtype=bool)
    if not keep.any():
        return SpatialBasis(
            eigvecs=np.empty((n, 0)),
            eigvals=np.empty(0),
            range_r=C.range_r,
            n_total_nonzero=n_nonzero,
        )
    order = np.argsort(eigvals[keep])[::-1]
    return SpatialBasis(
        eigvecs=eigvecs[:, keep][:, order],
        eigvals=eigvals[keep][order],
        range_r=C.range_r,
        n_total_nonzero=n_nonzero,
    )


def scale_eigenvalues(basis: SpatialBasis, alpha: float) -> EigenScaling:
    """Weights ``(lambda_l / lambda_1)**alpha`` for the retained eigenvalues."""
    if basis.n_components == 0:
        raise EmptyBasis("cannot scale an empty basis")
    weights = (basis.eigvals / basis.eigvals[0]) ** alpha
    return EigenScaling(alpha=float(alpha), scaled_weights=weights)


def moran_coefficient(z: np.ndarray, C: ProximityMatrix) -> float:
    """Moran coefficient  N (z'MCMz) / ((1'C1)(z'Mz))  of a vector ``z``.

    Raises
    ------
    ConstantVector
        If z is constant (z'Mz = 0), which leaves the statistic undefined.
    """
    z = np.asarray(z, dtype=float)
    n = C.n_sites
    if z.shape != (n,):
        raise ValueError(f"z must have length {n}")
    zc = z - z.mean()
    denom = float(zc @ zc)
    if denom <= 0.0:
        raise ConstantVector("z is constant; z'Mz = 0")
    num = float(zc @ C.values @ zc)
    return n * num / (C.total_weight() * denom)
