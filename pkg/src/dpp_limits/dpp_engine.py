"""Existence validation, exact sampling, and a brute-force distribution oracle.

A kernel matrix ``K`` defines a point process over indices with
``P(A in sample) = det(K_A) / n^|A|`` exactly when its eigenvalues lie in
``[0, n]``.  :func:`validate_kernel` checks that condition and carries the
eigendecomposition; :func:`sample_dpp` draws exact samples with the spectral
two-phase algorithm; :func:`enumerate_pmf` computes the full distribution for
small ``n`` so the sampler can be tested against ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernel_builders import KernelMatrix
from .rng import SeededRng, as_generator

EIGENVALUE_CLAMP_RTOL = 1e-8
# eigenvalue ratios within this of {0, 1} are treated as deterministic
# selections, so fp-level projection kernels keep fixed sample cardinality
PROJECTION_SNAP = 1e-9
# conditional probabilities in [-NEGATIVE_PROB_TOL, 0) are rounded to 0;
# anything lower is a hard numerical failure
NEGATIVE_PROB_TOL = 1e-12


@dataclass(frozen=True)
class IndexSample:
    """A drawn subset of indices, optionally with multiplicities.

    Multiplicities are present only for with-replacement draws; exact DPP
    samples are plain index sets.
    """

    indices: tuple[int, ...]
    multiplicities: tuple[int, ...] | None = None

    def __post_init__(self) -> None:
        idx = tuple(int(i) for i in self.indices)
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("indices must be strictly increasing")
        object.__setattr__(self, "indices", idx)
        if self.multiplicities is not None:
            mult = tuple(int(m) for m in self.multiplicities)
            if len(mult) != len(idx):
                raise ValueError("multiplicities must match indices")
            if any(m < 1 for m in mult):
                raise ValueError("multiplicities must be positive")
            object.__setattr__(self, "multiplicities", mult)

    def __len__(self) -> int:
        return len(self.indices)


class ValidatedDpp:
    """A kernel that passed the eigenvalue existence check.

    Carries the (clamped) eigendecomposition used by the sampler.  The
    eigenvalues are ascending; ties keep the decomposition order.
    """

    def __init__(
        self, kernel: KernelMatrix, eigenvalues: np.ndarray, eigenvectors: np.ndarray
    ) -> None:
        eigenvalues = np.asarray(eigenvalues, dtype=float)
        eigenvalues.setflags(write=False)
        eigenvectors = np.asarray(eigenvectors, dtype=float)
        eigenvectors.setflags(write=False)
        self.kernel = kernel
        self.eigenvalues = eigenvalues
        self.eigenvectors = eigenvectors
        n = kernel.n
        q = np.clip(eigenvalues / n, 0.0, 1.0) if n else np.empty(0)
        q[q > 1.0 - PROJECTION_SNAP] = 1.0
        q[q < PROJECTION_SNAP] = 0.0
        q.setflags(write=False)
        self._q = q
        self._is_projection = bool(np.all((q == 0.0) | (q == 1.0)))
        self._projection_cache: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.kernel.n

    def bernoulli_probabilities(self) -> np.ndarray:
        """Per-eigenvector selection probabilities, snapped near {0, 1}."""
        return self._q

    def is_projection(self) -> bool:
        """True when every eigenvalue sits at 0 or n to snap tolerance."""
        return self._is_projection

    def projection_matrix(self) -> np.ndarray:
        """For projection kernels, the rank-r projector onto the top space."""
        if self._projection_cache is None:
            V = self.eigenvectors[:, self._q == 1.0]
            self._projection_cache = V @ V.T
        return self._projection_cache


def validate_kernel(kernel: KernelMatrix, tol: float = EIGENVALUE_CLAMP_RTOL) -> ValidatedDpp:
    """Check the eigenvalue-in-[0, n] existence condition.

    Eigenvalues inside ``[-tol*n, n*(1+tol)]`` are clamped to ``[0, n]``;
    anything further out raises with the violating value.
    """
    K = kernel.entries
    n = kernel.n
    eigvals, eigvecs = np.linalg.eigh(K) if n else (np.empty(0), np.empty((0, 0)))
    slack = tol * max(n, 1)
    if n and eigvals[0] < -slack:
        raise ValueError(
            f"eigenvalue {eigvals[0]:.6g} below 0 beyond tolerance {slack:.3g}"
        )
    if n and eigvals[-1] > n + slack:
        raise ValueError(
            f"eigenvalue {eigvals[-1]:.6g} exceeds n = {n} beyond tolerance {slack:.3g}"
        )
    clamped = np.clip(eigvals, 0.0, float(n))
    recon = (eigvecs * clamped) @ eigvecs.T
    norm = float(np.linalg.norm(K))
    err = float(np.linalg.norm(recon - K))
    if err > 1e-8 * max(norm, 1e-30) + 1e-12:
        raise ArithmeticError(
            f"eigendecomposition reconstruction error {err:.3e} too large"
        )
    return ValidatedDpp(kernel, clamped, eigvecs)


def _conditional_chain(
    projector: np.ndarray | None,
    V: np.ndarray | None,
    diag: np.ndarray,
    rank: int,
    gen: np.random.Generator,
) -> np.ndarray:
    """Sample ``rank`` indices sequentially from a projection kernel.

    The kernel is either an explicit projector matrix or the implicit
    ``V V^T`` of orthonormal columns.  Maintains the residual conditional
    diagonal through incremental Cholesky pivots; each step the residual
    probability vector is clamped (values in ``[-1e-12, 0)`` to 0) and
    renormalized.
    """
    n = diag.shape[0]
    d = diag.astype(float, copy=True)
    C = np.empty((rank, n))
    chosen = np.empty(rank, dtype=np.intp)
    for t in range(rank):
        dmin = d.min()
        if dmin < 0.0:
            # clamp tolerance stated on probabilities p = d / (rank - t)
            if dmin < -NEGATIVE_PROB_TOL * (rank - t):
                raise ArithmeticError(
                    f"conditional probability {dmin / (rank - t):.3e} below "
                    f"-{NEGATIVE_PROB_TOL:.0e} at draw step {t}"
                )
            np.maximum(d, 0.0, out=d)
        cum = np.cumsum(d)
        total = cum[-1]
        if total <= 0.0:
            raise ArithmeticError(f"conditional probabilities vanished at draw step {t}")
        j = int(np.searchsorted(cum, gen.random() * total, side="right"))
        j = min(j, n - 1)
        piv = d[j]
        if piv <= 0.0:
            raise ArithmeticError(f"selected index {j} has nonpositive residual mass")
        col = projector[j].copy() if projector is not None else V @ V[j]
        if t:
            col -= C[:t].T @ C[:t, j]
        col /= np.sqrt(piv)
        C[t] = col
        d -= col * col
        chosen[t] = j
        d[chosen[: t + 1]] = 0.0
    chosen.sort()
    return chosen


def _chain_small(
    P: np.ndarray, diag: np.ndarray, rank: int, gen: np.random.Generator
) -> list[int]:
    # same sequential conditioning as _conditional_chain, on plain floats;
    # beats array dispatch overhead for tiny matrices
    n = len(diag)
    d = list(diag)
    rows = P.tolist()
    C: list[list[float]] = []
    chosen: list[int] = []
    for t in range(rank):
        dmin = min(d)
        if dmin < 0.0:
            if dmin < -NEGATIVE_PROB_TOL * (rank - t):
                raise ArithmeticError(
                    f"conditional probability {dmin / (rank - t):.3e} below "
                    f"-{NEGATIVE_PROB_TOL:.0e} at draw step {t}"
                )
            d = [v if v > 0.0 else 0.0 for v in d]
        total = sum(d)
        if total <= 0.0:
            raise ArithmeticError(f"conditional probabilities vanished at draw step {t}")
        u = gen.random() * total
        acc = 0.0
        j = n - 1
        for i, v in enumerate(d):
            acc += v
            if u < acc:
                j = i
                break
        piv = d[j]
        if piv <= 0.0:
            raise ArithmeticError(f"selected index {j} has nonpositive residual mass")
        col = rows[j][:]
        for crow in C:
            cj = crow[j]
            if cj != 0.0:
                for i in range(n):
                    col[i] -= cj * crow[i]
        scale = piv**-0.5
        for i in range(n):
            col[i] *= scale
        C.append(col)
        for i in range(n):
            d[i] -= col[i] * col[i]
        chosen.append(j)
        for i in chosen:
            d[i] = 0.0
    chosen.sort()
    return chosen


def _draw_once(dpp: ValidatedDpp, gen: np.random.Generator) -> IndexSample:
    n = dpp.n
    if n == 0:
        return IndexSample(())
    selected = gen.random(n) < dpp._q
    rank = int(selected.sum())
    if rank == 0:
        return IndexSample(())
    if dpp._is_projection:
        P = dpp.projection_matrix()
        diag = P.diagonal()
    elif n <= 2 * rank or n <= 24:
        # explicit projector is cheaper than per-step matvecs here
        V = dpp.eigenvectors[:, selected]
        P = V @ V.T
        diag = P.diagonal()
    else:
        V = dpp.eigenvectors[:, selected]
        idx = _conditional_chain(None, V, np.einsum("ij,ij->i", V, V), rank, gen)
        return IndexSample(tuple(int(i) for i in idx))
    if n <= 24:
        return IndexSample(tuple(_chain_small(P, diag, rank, gen)))
    idx = _conditional_chain(P, None, diag, rank, gen)
    return IndexSample(tuple(int(i) for i in idx))


def sample_dpp(dpp: ValidatedDpp, rng: SeededRng | np.random.Generator) -> IndexSample:
    """Draw one exact sample.

    Phase one selects eigenvectors independently with probability
    ``eigenvalue / n``; phase two samples the resulting projection process
    by sequential conditioning.  Same (seed, stream) reproduces the same
    sample.
    """
    return _draw_once(dpp, as_generator(rng))


def sample_dpp_many(
    dpp: ValidatedDpp, rng: SeededRng | np.random.Generator, count: int
) -> list[IndexSample]:
    """Draw ``count`` samples sequentially from one stream."""
    gen = as_generator(rng)
    return [_draw_once(dpp, gen) for _ in range(count)]


def inclusion_probability(kernel: KernelMatrix, indices) -> float:
    """``P(A in sample) = det(K_A) / n^|A|`` for a distinct index set."""
    idx = [int(i) for i in indices]
    if len(set(idx)) != len(idx):
        raise ValueError(f"duplicate indices in {idx}")
    n = kernel.n
    if any(i < 0 or i >= n for i in idx):
        raise ValueError(f"index out of range for n = {n}")
    if not idx:
        return 1.0
    sub = kernel.entries[np.ix_(idx, idx)]
    return float(np.linalg.det(sub)) / n ** len(idx)


def enumerate_pmf(dpp: ValidatedDpp) -> dict[tuple[int, ...], float]:
    """Exact probability of every subset, for ``n <= 20``.

    Uses ``P(sample = A) = |det(K/n - I_{A^c})|``, which stays valid for
    projection kernels where a likelihood-matrix formulation would not
    exist.  Raises if the probabilities fail to sum to 1 within 1e-10.
    """
    n = dpp.n
    if n > 20:
        raise ValueError(f"exhaustive enumeration limited to n <= 20, got {n}")
    Kn = dpp.kernel.entries / max(n, 1)
    pmf: dict[tuple[int, ...], float] = {}
    total = 0.0
    for mask in range(1 << n):
        subset = tuple(i for i in range(n) if mask >> i & 1)
        M = Kn.copy()
        comp = [i for i in range(n) if not mask >> i & 1]
        M[comp, comp] -= 1.0
        p = abs(float(np.linalg.det(M))) if n else 1.0
        pmf[subset] = p
        total += p
    if abs(total - 1.0) > 1e-10:
        raise ArithmeticError(f"enumerated probabilities sum to {total!r}, not 1")
    return pmf


def random_valid_kernel(
    n: int,
    rng: SeededRng | np.random.Generator,
    eigenvalues: np.ndarray | None = None,
) -> KernelMatrix:
    """Random admissible kernel: Haar basis, eigenvalues uniform on [0, n].

    Intended for tests and self-checks; pass explicit eigenvalues to pin
    the spectrum.
    """
    gen = as_generator(rng)
    if eigenvalues is None:
        eigenvalues = gen.uniform(0.0, n, size=n)
    lam = np.asarray(eigenvalues, dtype=float)
    if lam.shape != (n,):
        raise ValueError("eigenvalues must be a length-n vector")
    if lam.size and (lam.min() < 0 or lam.max() > n):
        raise ValueError("eigenvalues must lie in [0, n]")
    Q, _ = np.linalg.qr(gen.standard_normal((n, n)))
    return KernelMatrix((Q * lam) @ Q.T)
