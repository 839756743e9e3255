"""Construction of the discrete kernel matrices.

Four families are built here, all under the same convention: a kernel matrix
``K`` together with the uniform weight ``1/n`` on the points defines a point
process whose co-occurrence probabilities are ``det(K_A) / n^|A|``.  Such a
process exists exactly when ``K`` is symmetric with eigenvalues in ``[0, n]``.

* ``gram_kernel`` — restriction of an explicit kernel function to the cloud;
* ``ope_kernel`` — orthonormal-polynomial projection kernel (monomials in
  graded lexical order, Gram-Schmidt under the ``1/n``-weighted inner
  product);
* ``harmonic_kernel`` — graph-Laplacian surrogate for the first Laplace-
  Beltrami eigenfunctions of an unknown manifold, with density reweighting;
* ``usvt_kernel`` — denoised estimate recovered from a Bernoulli adjacency
  matrix by universal singular value thresholding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .point_cloud import PointCloud
from .rng import SeededRng, as_generator

SYMMETRY_RTOL = 1e-10
GS_RTOL = 1e-10


@dataclass(frozen=True)
class KernelMatrix:
    """Dense symmetric kernel matrix under the ``1/n`` weight convention.

    Construction checks symmetry to relative tolerance ``1e-10`` and then
    stores the exactly symmetrized matrix, read-only.
    """

    entries: np.ndarray

    def __post_init__(self) -> None:
        K = np.asarray(self.entries, dtype=float)
        if K.ndim != 2 or K.shape[0] != K.shape[1]:
            raise ValueError(f"kernel matrix must be square, got shape {K.shape}")
        if K.size and not np.isfinite(K).all():
            i, j = np.argwhere(~np.isfinite(K))[0]
            raise ValueError(f"non-finite kernel entry at ({i}, {j})")
        scale = float(np.abs(K).max()) if K.size else 0.0
        asym = float(np.abs(K - K.T).max()) if K.size else 0.0
        if asym > SYMMETRY_RTOL * scale:
            raise ValueError(
                f"kernel asymmetry {asym:.3e} exceeds {SYMMETRY_RTOL:.0e} * max|K| = "
                f"{SYMMETRY_RTOL * scale:.3e}"
            )
        K = np.ascontiguousarray((K + K.T) / 2.0)
        K.setflags(write=False)
        object.__setattr__(self, "entries", K)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    def diagonal(self) -> np.ndarray:
        return self.entries.diagonal()


@dataclass(frozen=True)
class ContinuousKernel:
    """Symmetric kernel function on R^d with a declared sup bound.

    ``fn`` evaluates one pair of points; ``pairwise``, when provided, must
    return the full evaluation matrix for two stacked point arrays and is
    used to vectorize Gram construction.
    """

    fn: Callable[[np.ndarray, np.ndarray], float]
    max_abs: float
    diagonal_value: float | None = None
    pairwise: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None

    def eval(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(self.fn(np.asarray(x, dtype=float), np.asarray(y, dtype=float)))


def squared_distances(x: np.ndarray, y: np.ndarray | None = None) -> np.ndarray:
    """Pairwise squared Euclidean distances between rows, clipped at 0."""
    x = np.asarray(x, dtype=float)
    y = x if y is None else np.asarray(y, dtype=float)
    sq = (x * x).sum(axis=1)[:, None] + (y * y).sum(axis=1)[None, :] - 2.0 * (x @ y.T)
    return np.maximum(sq, 0.0)


def constant_kernel(value: float = 1.0) -> ContinuousKernel:
    """Kernel identically equal to ``value`` (rank-one when used as a Gram)."""
    return ContinuousKernel(
        fn=lambda x, y: value,
        max_abs=abs(value),
        diagonal_value=value,
        pairwise=lambda X, Y: np.full((X.shape[0], Y.shape[0]), float(value)),
    )


def gaussian_kernel(bandwidth: float = 1.0, amplitude: float = 1.0) -> ContinuousKernel:
    """``amplitude * exp(-||x - y||^2 / bandwidth^2)``."""
    if bandwidth <= 0:
        raise ValueError("bandwidth must be positive")
    b2 = bandwidth * bandwidth

    def _one(x: np.ndarray, y: np.ndarray) -> float:
        d = x - y
        return amplitude * math.exp(-float(d @ d) / b2)

    def _pair(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        return amplitude * np.exp(-squared_distances(X, Y) / b2)

    return ContinuousKernel(
        fn=_one, max_abs=abs(amplitude), diagonal_value=amplitude, pairwise=_pair
    )


def gram_kernel(kernel: ContinuousKernel, cloud: PointCloud) -> KernelMatrix:
    """Restrict a kernel function to the cloud: ``G[i, j] = k(x_i, x_j)``."""
    pts = cloud.points
    n = cloud.n
    if kernel.pairwise is not None:
        G = np.asarray(kernel.pairwise(pts, pts), dtype=float)
    else:
        G = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                G[i, j] = G[j, i] = kernel.fn(pts[i], pts[j])
    if G.size and not np.isfinite(G).all():
        i, j = np.argwhere(~np.isfinite(G))[0]
        raise ValueError(f"kernel evaluation not finite at point pair ({i}, {j})")
    return KernelMatrix(G)


# ---------------------------------------------------------------------------
# orthonormal polynomial projection kernel
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultiIndex:
    """Exponents of one monomial ``x(1)^b1 * ... * x(d)^bd``."""

    degrees: tuple[int, ...]

    @property
    def total_degree(self) -> int:
        return sum(self.degrees)


def graded_monomials(d: int, m: int) -> list[MultiIndex]:
    """First ``m`` multi-indices in graded lexical order.

    Sorted by total degree first; within a degree, lexicographically on
    ``(b_1, ..., b_d)`` with ``b_1`` most significant.  The first element is
    always the constant monomial.
    """
    if d < 1:
        raise ValueError("dimension must be at least 1")
    if m < 1:
        raise ValueError("m must be at least 1")
    out: list[MultiIndex] = []
    total = 0
    while len(out) < m:
        batch = sorted(_compositions(total, d))
        out.extend(MultiIndex(c) for c in batch)
        total += 1
    return out[:m]


def _compositions(total: int, d: int) -> list[tuple[int, ...]]:
    # all d-tuples of nonnegative integers summing to total
    if d == 1:
        return [(total,)]
    out = []
    for first in range(total + 1):
        out.extend((first, *rest) for rest in _compositions(total - first, d - 1))
    return out


def monomial_matrix(cloud: PointCloud, indices: Sequence[MultiIndex]) -> np.ndarray:
    """Evaluate monomials on the cloud; column ``j`` is monomial ``j``."""
    n = cloud.n
    M = np.empty((n, len(indices)))
    for j, mi in enumerate(indices):
        M[:, j] = np.prod(cloud.points ** np.asarray(mi.degrees), axis=1)
    return M


def _legendre_tensor_matrix(cloud: PointCloud, indices: Sequence[MultiIndex]) -> np.ndarray:
    """Tensor-Legendre evaluations spanning the same graded flag.

    ``P_{b1}(x_1) * ... * P_{bd}(x_d)`` expands over monomials of
    componentwise-smaller degree, so the change of basis from the monomial
    columns is unit-triangular in graded lexical order: every prefix spans
    the same space, and Gram-Schmidt yields the same orthonormal vectors.
    Unlike raw monomials, the columns stay well conditioned at high degree.
    """
    d = cloud.dim
    max_deg = [max(mi.degrees[j] for mi in indices) for j in range(d)]
    vander = [
        np.polynomial.legendre.legvander(cloud.points[:, j], max_deg[j])
        for j in range(d)
    ]
    M = np.empty((cloud.n, len(indices)))
    for j, mi in enumerate(indices):
        col = vander[0][:, mi.degrees[0]].copy()
        for axis in range(1, d):
            col *= vander[axis][:, mi.degrees[axis]]
        M[:, j] = col
    return M


def orthonormalize_columns(
    M: np.ndarray, weights: np.ndarray, rtol: float = GS_RTOL
) -> np.ndarray:
    """Gram-Schmidt under the inner product ``<u, v> = sum_i w_i u_i v_i``.

    Classical Gram-Schmidt run twice per column (one re-orthogonalization
    pass); a residual norm below ``rtol`` times the input norm raises with
    the offending column index.
    """
    n, m = M.shape
    w = np.asarray(weights, dtype=float)
    if w.shape != (n,) or (w <= 0).any():
        raise ValueError("weights must be a positive vector matching the rows")
    Q = np.empty((n, m))
    for j in range(m):
        v = M[:, j].astype(float)
        norm0 = math.sqrt(float(v @ (w * v)))
        for _ in range(2):
            if j:
                v = v - Q[:, :j] @ (Q[:, :j].T @ (w * v))
        norm = math.sqrt(max(float(v @ (w * v)), 0.0))
        if norm <= rtol * norm0 or norm0 == 0.0:
            raise ValueError(
                f"rank deficiency at column {j}: residual norm {norm:.3e} "
                f"below {rtol:.0e} of input norm {norm0:.3e}"
            )
        Q[:, j] = v / norm
    return Q


def ope_kernel(cloud: PointCloud, m: int) -> KernelMatrix:
    """Projection kernel spanned by the first ``m`` orthonormal polynomials.

    Monomials are taken in graded lexical order and orthonormalized under
    the ``1/n``-weighted inner product on the cloud; the kernel is
    ``K = sum_i p_i p_i^T``, so ``K/n`` is an orthogonal projection of rank
    ``m`` and ``tr(K)/n = m``.  Evaluation goes through the equivalent
    tensor-Legendre basis, which spans the same prefix flags but keeps
    Gram-Schmidt well conditioned at high polynomial degree.
    """
    n = cloud.n
    if not 1 <= m <= n:
        raise ValueError(f"m must be in [1, n] = [1, {n}], got {m}")
    M = _legendre_tensor_matrix(cloud, graded_monomials(cloud.dim, m))
    try:
        P = orthonormalize_columns(M, np.full(n, 1.0 / n))
    except ValueError as exc:
        raise ValueError(f"monomials dependent on this cloud: {exc}") from None
    return KernelMatrix(P @ P.T)


# ---------------------------------------------------------------------------
# graph-harmonic projection kernel
# ---------------------------------------------------------------------------


def normalized_indicator_profile(d_manifold: int = 2) -> Callable[[np.ndarray], np.ndarray]:
    """Radial profile ``1_[0,1] / vol(unit ball)``, unit mass over R^d."""
    vol = math.pi ** (d_manifold / 2.0) / math.gamma(d_manifold / 2.0 + 1.0)
    return lambda t: np.where(np.asarray(t) <= 1.0, 1.0 / vol, 0.0)


def kde_density(
    cloud: PointCloud,
    h2: float,
    profile: Callable[[np.ndarray], np.ndarray],
    d_manifold: int,
) -> np.ndarray:
    """Density estimate at every cloud point.

    ``e(x) = (n h2^d)^{-1} sum_i l(||x_i - x|| / h2)`` with ``d`` the
    intrinsic dimension; the radial profile ``l`` must be Riemann integrable
    on compacts (caller-declared).
    """
    if h2 <= 0:
        raise ValueError("bandwidth h2 must be positive")
    if d_manifold < 1:
        raise ValueError("intrinsic dimension must be at least 1")
    n = cloud.n
    dist = np.sqrt(squared_distances(cloud.points))
    vals = np.asarray(profile(dist / h2), dtype=float)
    return vals.sum(axis=0) / (n * h2**d_manifold)


@dataclass(frozen=True)
class HarmonicDetails:
    """Intermediate quantities of the harmonic kernel construction."""

    kernel: KernelMatrix
    aux_kernel: np.ndarray  # sum of v_i v_i^T before density reweighting
    density: np.ndarray  # kernel density estimate at each point
    omega_weights: np.ndarray  # 1 / (n * density)
    laplacian_eigenvalues: np.ndarray
    scale: float  # max(1, lambda_max / n) divisor applied at the end


def harmonic_kernel(
    cloud: PointCloud,
    m: int,
    h1: float,
    h2: float,
    profile: Callable[[np.ndarray], np.ndarray],
    d_manifold: int,
) -> KernelMatrix:
    """Kernel of the discrete harmonic ensemble on an unknown manifold."""
    return harmonic_kernel_details(cloud, m, h1, h2, profile, d_manifold).kernel


def _harmonic_orthobasis(
    cloud: PointCloud,
    m: int,
    h1: float,
    h2: float,
    profile: Callable[[np.ndarray], np.ndarray],
    d_manifold: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Orthonormalized surrogate eigenfunctions plus density weights.

    Returns ``(V, density, omega, laplacian_eigenvalues)`` where the columns
    of ``V`` are orthonormal under the weights ``omega = 1 / (n * density)``.
    """
    n = cloud.n
    if not 1 <= m <= n:
        raise ValueError(f"m must be in [1, n] = [1, {n}], got {m}")
    if h1 <= 0 or h2 <= 0:
        raise ValueError("bandwidths must be positive")

    D2 = squared_distances(cloud.points)
    w = np.exp(-D2 / (4.0 * h1 * h1))
    deg = w.sum(axis=1)
    if (deg <= 0).any():
        raise ValueError(f"degenerate degree at point {int(np.argmin(deg))}")

    W = w / np.outer(deg, deg)
    row = W.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(row)
    # symmetric matrix similar to (I - D^-1 W) / h1^2; same spectrum
    S = (np.eye(n) - (inv_sqrt[:, None] * W) * inv_sqrt[None, :]) / (h1 * h1)
    S = (S + S.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(S)
    if eigvals.min() < -1e-8 * max(1.0, float(eigvals.max())):
        raise ArithmeticError(
            f"normalized Laplacian has eigenvalue {eigvals.min():.3e} below tolerance"
        )
    # eigenvectors of the non-symmetric Laplacian, smallest m eigenvalues
    U = inv_sqrt[:, None] * eigvecs[:, :m]
    # fix the sign ambiguity: largest-magnitude entry made positive
    for i in range(m):
        k = int(np.argmax(np.abs(U[:, i])))
        if U[k, i] < 0:
            U[:, i] = -U[:, i]

    # point-wise renormalization toward unit manifold norm: the count of
    # cloud points in the closed h1-ball around x_j estimates n * p(x_j)
    # times the ball volume
    counts = (D2 <= h1 * h1).sum(axis=1)
    ball_volume = (
        2.0
        * math.pi ** (d_manifold / 2.0)
        / math.gamma(d_manifold / 2.0)
        * h1**d_manifold
        / d_manifold
    )
    norms_sq = ball_volume * ((U * U) / counts[:, None]).sum(axis=0)
    if (norms_sq <= 0).any():
        raise ValueError(
            f"eigenvector {int(np.argmin(norms_sq))} has nonpositive volume norm"
        )
    U = U / np.sqrt(norms_sq)

    density = kde_density(cloud, h2, profile, d_manifold)
    if (density <= 0).any():
        raise ValueError(
            f"density estimate vanishes at point {int(np.argmin(density))}; "
            "increase h2 or widen the profile"
        )
    omega = 1.0 / (n * density)
    V = orthonormalize_columns(U, omega)
    return V, density, omega, eigvals


def _assemble_harmonic(
    V: np.ndarray,
    density: np.ndarray,
    omega: np.ndarray,
    laplacian_eigenvalues: np.ndarray,
) -> HarmonicDetails:
    n = V.shape[0]
    aux = V @ V.T
    inv_root_density = 1.0 / np.sqrt(density)
    K = aux * np.outer(inv_root_density, inv_root_density)
    K = (K + K.T) / 2.0
    lam_max = float(np.linalg.eigvalsh(K)[-1])
    scale = max(1.0, lam_max / n)
    return HarmonicDetails(
        kernel=KernelMatrix(K / scale),
        aux_kernel=aux,
        density=density,
        omega_weights=omega,
        laplacian_eigenvalues=laplacian_eigenvalues,
        scale=scale,
    )


def harmonic_kernel_details(
    cloud: PointCloud,
    m: int,
    h1: float,
    h2: float,
    profile: Callable[[np.ndarray], np.ndarray],
    d_manifold: int,
) -> HarmonicDetails:
    """As :func:`harmonic_kernel`, returning construction internals.

    Steps: Gaussian-weighted complete graph at bandwidth ``h1``; degree
    double-normalization of the adjacency; normalized Laplacian
    ``(I - D^-1 W) / h1^2``; its ``m`` smallest-eigenvalue eigenvectors via
    the similar symmetric matrix; ball-count renormalization so the vectors
    approximate unit-norm manifold eigenfunctions; kernel density estimate
    at bandwidth ``h2``; Gram-Schmidt under the density-corrected volume
    weights; density-reweighted projection kernel; and a final division by
    ``max(1, lambda_max / n)`` so the eigenvalues land in ``[0, n]``.
    """
    return _assemble_harmonic(*_harmonic_orthobasis(cloud, m, h1, h2, profile, d_manifold))


def harmonic_kernel_family(
    cloud: PointCloud,
    m_grid: Sequence[int],
    h1: float,
    h2: float,
    profile: Callable[[np.ndarray], np.ndarray],
    d_manifold: int,
) -> dict[int, HarmonicDetails]:
    """Harmonic kernels for several ranks, sharing the spectral work.

    The Gram-Schmidt basis is prefix-stable, so the kernel for each ``m`` in
    the grid is assembled from the first ``m`` columns computed once at the
    largest rank.
    """
    if not m_grid:
        return {}
    V, density, omega, eigvals = _harmonic_orthobasis(
        cloud, max(m_grid), h1, h2, profile, d_manifold
    )
    return {
        m: _assemble_harmonic(V[:, :m], density, omega, eigvals)
        for m in sorted(set(int(m) for m in m_grid))
    }


# ---------------------------------------------------------------------------
# random-graph kernel via singular value thresholding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AdjacencyMatrix:
    """Symmetric 0/1 adjacency matrix with zero diagonal."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        A = np.asarray(self.entries, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"adjacency matrix must be square, got shape {A.shape}")
        if not np.array_equal(A, A.T):
            raise ValueError("adjacency matrix must be symmetric")
        if A.size and not np.isin(A, (0.0, 1.0)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        if A.size and A.diagonal().any():
            raise ValueError("adjacency diagonal must be zero")
        A = np.ascontiguousarray(A)
        A.setflags(write=False)
        object.__setattr__(self, "entries", A)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def latent_graph(
    cloud: PointCloud,
    kernel: ContinuousKernel,
    alpha: float,
    rng: SeededRng,
) -> AdjacencyMatrix:
    """Draw a latent position random graph over the cloud.

    Edges are independent with ``P(edge ij) = alpha * k(x_i, x_j)``; all
    pair probabilities must lie in [0, 1].
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    n = cloud.n
    P = alpha * gram_kernel(kernel, cloud).entries
    iu = np.triu_indices(n, k=1)
    probs = P[iu]
    if probs.size and (probs.min() < 0.0 or probs.max() > 1.0):
        bad = float(probs.min()) if probs.min() < 0 else float(probs.max())
        raise ValueError(f"edge probability {bad} outside [0, 1]")
    gen = as_generator(rng)
    edges = gen.random(probs.shape[0]) < probs
    A = np.zeros((n, n))
    A[iu] = edges
    return AdjacencyMatrix(A + A.T)


def usvt_kernel(
    adjacency: AdjacencyMatrix, alpha: float, c: float, rho: float
) -> KernelMatrix:
    """Denoise an adjacency matrix into an admissible kernel matrix.

    Eigenvalues of ``A`` at or above the threshold ``rho * (alpha n)^{3/4}``
    are kept and rescaled by ``1/alpha``; a diagonal shift restores the
    target diagonal level ``c`` whenever thresholding undershoots it; and a
    final multiplier clips the spectrum into ``[0, n]``.
    """
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must be in (0, 1]")
    if not 0.0 <= c <= 1.0:
        raise ValueError("c must be in [0, 1]")
    if rho <= 0:
        raise ValueError("rho must be positive")
    n = adjacency.n
    gamma = rho * (alpha * n) ** 0.75
    eigvals, eigvecs = np.linalg.eigh(adjacency.entries)
    kept = eigvals >= gamma
    if kept.any():
        V = eigvecs[:, kept]
        tilde = (V * (eigvals[kept] / alpha)) @ V.T
        tilde = (tilde + tilde.T) / 2.0
        lam_top = float(eigvals[kept].max() / alpha)
    else:
        tilde = np.zeros((n, n))
        lam_top = 0.0
    correction = max(c - float(np.trace(tilde)) / n, 0.0)
    bar = tilde + correction * np.eye(n)
    lam_max = lam_top + correction
    soft_cap = 1.0 / (1.0 + (alpha * n) ** -0.25)
    c_prime = min(n / lam_max, soft_cap) if lam_max > 0 else soft_cap
    return KernelMatrix(c_prime * bar)


def usvt_retained_rank(adjacency: AdjacencyMatrix, alpha: float, rho: float) -> int:
    """Number of eigenvalues kept by the threshold ``rho * (alpha n)^{3/4}``."""
    gamma = rho * (alpha * adjacency.n) ** 0.75
    return int((np.linalg.eigvalsh(adjacency.entries) >= gamma).sum())


# ---------------------------------------------------------------------------
# kernel matrix serialization (same text format as point clouds)
# ---------------------------------------------------------------------------


def save_kernel(kernel: KernelMatrix, path: str) -> None:
    """Write a kernel matrix as ``n=<n>`` header plus one row per line."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"n={kernel.n}\n")
        for row in kernel.entries:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def load_kernel(path: str) -> KernelMatrix:
    """Read a kernel matrix written by :func:`save_kernel`."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].startswith("n="):
        raise ValueError(f"{path}: line 1: expected header 'n=<n>'")
    try:
        n = int(lines[0][2:])
    except ValueError:
        raise ValueError(f"{path}: line 1: malformed size {lines[0][2:]!r}") from None
    rows = []
    for lineno, raw in enumerate(lines[1:], start=2):
        parts = raw.split()
        if not parts:
            continue
        if len(parts) != n:
            raise ValueError(
                f"{path}: line {lineno}: expected {n} entries, got {len(parts)}"
            )
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ValueError(f"{path}: line {lineno}: unparseable entry") from None
    if len(rows) != n:
        raise ValueError(f"{path}: expected {n} rows, got {len(rows)}")
    return KernelMatrix(np.array(rows, dtype=float) if rows else np.empty((0, 0)))
