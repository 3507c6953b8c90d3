"""Dense symmetric and SPD kernels shared by every estimator in the package.

Matrices are plain float64 ``numpy.ndarray`` objects.  Functions returning
symmetric matrices always return *exactly* symmetric arrays (both triangles
bitwise equal), and symmetric inputs are required to be exactly symmetric;
use :func:`symmetrize` first when a matrix was assembled entrywise.

Positive definiteness is decided in one place, by the Cholesky pivot rule:
a pivot is rejected when it is at most ``SPD_PIVOT_RTOL`` times the largest
diagonal entry of the input.  Inverses, square roots, and condition numbers
are all routed through this gate.

Every function here is a pure function of immutable inputs and never
mutates its arguments, so concurrent read-only use is safe.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import cho_solve, lapack, sqrtm

from .errors import InvalidInput, NotPositiveDefinite, NumericalFailure

__all__ = [
    "SPD_PIVOT_RTOL",
    "DENSE_EIG_LIMIT",
    "symmetrize",
    "sample_covariance",
    "cholesky_lower",
    "spd_inverse",
    "spectral_norm",
    "condition_number",
    "spd_sqrt",
    "block_inverse_schur",
]

# Scale-invariant pivot floor: a Cholesky pivot at most this fraction of the
# largest diagonal entry counts as a positive-definiteness failure.
SPD_PIVOT_RTOL = 1e-12

# Above this dimension, spectral quantities switch from full symmetric
# eigendecomposition to shifted power iteration.
DENSE_EIG_LIMIT = 512

# Accuracy target for iterative spectral estimates is 1e-9 relative; the
# successive-change stopping rule runs two orders tighter because the
# Rayleigh error lags the observed change.
_POWER_RTOL = 1e-11
_POWER_CAP_PER_DIM = 50


def _as_square(a, name="matrix") -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise InvalidInput(f"{name} must have dimension at least 1")
    return a


def _as_square_sym(a, name="matrix") -> np.ndarray:
    a = _as_square(a, name)
    if not np.array_equal(a, a.T):
        raise InvalidInput(f"{name} must be exactly symmetric; call symmetrize() first")
    return a


def symmetrize(a) -> np.ndarray:
    """Return ``(a + a.T) / 2`` as an exactly symmetric array."""
    a = _as_square(a)
    return 0.5 * (a + a.T)


def sample_covariance(samples) -> np.ndarray:
    """Covariance of zero-mean observations, one per row, with divisor ``1/N``.

    Parameters
    ----------
    samples : (N, dim) array
        N observation vectors.  No mean is subtracted; the observed process
        is zero-mean by assumption.

    Returns
    -------
    (dim, dim) array
        ``(1/N) * sum_n z_n z_n^T``, exactly symmetric and positive
        semidefinite up to roundoff.

    Raises
    ------
    InvalidInput
        If the sample set is empty or not two-dimensional.
    """
    z = np.asarray(samples, dtype=np.float64)
    if z.ndim != 2:
        raise InvalidInput(f"samples must be a 2-d array, got shape {z.shape}")
    n = z.shape[0]
    if n < 1:
        raise InvalidInput("sample set is empty")
    c = z.T @ z / n
    return 0.5 * (c + c.T)


def cholesky_lower(a) -> np.ndarray:
    """Lower-triangular Cholesky factor ``L`` with ``L L^T = a``.

    Parameters
    ----------
    a : (n, n) array
        Exactly symmetric matrix.

    Returns
    -------
    (n, n) array
        Lower-triangular factor with strictly positive diagonal.

    Raises
    ------
    NotPositiveDefinite
        If factorization hits a pivot at most ``SPD_PIVOT_RTOL`` times the
        largest diagonal entry of ``a``; the exception reports the failing
        pivot index.
    """
    a = _as_square_sym(a)
    pivot_floor = SPD_PIVOT_RTOL * float(np.max(np.diag(a), initial=0.0))
    c, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefinite(
            f"factorization failed at pivot {info - 1}", pivot=info - 1
        )
    if info < 0:
        raise InvalidInput(f"illegal value in argument {-info} of dpotrf")
    pivots = np.square(np.diag(c))
    bad = np.flatnonzero(pivots <= pivot_floor)
    if bad.size:
        raise NotPositiveDefinite(
            f"pivot {bad[0]} is {pivots[bad[0]]:.3e}, at or below the "
            f"tolerance {pivot_floor:.3e}",
            pivot=int(bad[0]),
        )
    return c


def spd_inverse(a) -> np.ndarray:
    """Inverse of an SPD matrix through its Cholesky factorization.

    Returns an exactly symmetric array.  Raises ``NotPositiveDefinite``
    (propagated from :func:`cholesky_lower`) when ``a`` is not SPD.
    """
    c = cholesky_lower(a)
    inv, info = lapack.dpotri(c, lower=1)
    if info != 0:
        raise NumericalFailure(f"dpotri failed with info={info}")
    lower = np.tril(inv)
    return lower + np.tril(inv, -1).T


def _power_pass(a: np.ndarray, shift: float, cap: int, key: int) -> float:
    """Rayleigh value of the dominant eigenvector of ``a - shift*I``.

    Returns the Rayleigh quotient of ``a`` at that vector.  Raises
    ``NumericalFailure`` when the iteration cap is exhausted, which happens
    on spectra whose extreme eigenvalues are nearly tied in magnitude.
    """
    n = a.shape[0]
    rng = np.random.Generator(np.random.Philox(key=key))
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    rayleigh = None
    for _ in range(cap):
        w = a @ v - shift * v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return shift
        v = w / norm
        current = float(v @ (a @ v))
        if rayleigh is not None and abs(current - rayleigh) <= _POWER_RTOL * max(
            abs(current), 1e-300
        ):
            return current
        rayleigh = current
    raise NumericalFailure(f"power iteration did not converge within {cap} iterations")


def _power_extreme(a: np.ndarray, n: int) -> float:
    """Largest absolute eigenvalue by two-pass shifted power iteration.

    The first pass runs on ``a`` itself and finds the extreme of largest
    magnitude; the second runs shifted by that estimate, which maps the
    found end to zero and makes the opposite extreme dominant.
    """
    if not np.any(a):
        return 0.0
    # The floor keeps the cap meaningful when this route is exercised at
    # small dimensions; production use starts above DENSE_EIG_LIMIT.
    cap = max(_POWER_CAP_PER_DIM * n, 5000)
    first = _power_pass(a, 0.0, cap, key=0x5EED)
    second = _power_pass(a, first, cap, key=0x5EED + 1)
    return max(abs(first), abs(second))


def spectral_norm(a) -> float:
    """Spectral norm (largest absolute eigenvalue) of a symmetric matrix.

    Uses a full symmetric eigendecomposition up to ``DENSE_EIG_LIMIT`` and
    shifted power iteration above, matching the accuracy contract of 1e-9
    relative.  Raises ``NumericalFailure`` if the iteration cap is hit.
    """
    a = _as_square_sym(a)
    n = a.shape[0]
    if n <= DENSE_EIG_LIMIT:
        return float(np.max(np.abs(np.linalg.eigvalsh(a))))
    return _power_extreme(a, n)


def condition_number(a) -> float:
    """Ratio of extreme eigenvalues of an SPD matrix.

    Raises ``NotPositiveDefinite`` when the smallest eigenvalue is at or
    below the pivot tolerance relative to the largest.
    """
    a = _as_square_sym(a)
    n = a.shape[0]
    if n <= DENSE_EIG_LIMIT:
        w = np.linalg.eigvalsh(a)
        lo, hi = float(w[0]), float(w[-1])
        if lo <= SPD_PIVOT_RTOL * max(hi, 0.0):
            raise NotPositiveDefinite(
                f"smallest eigenvalue {lo:.3e} fails the SPD tolerance"
            )
        return hi / lo
    c = cholesky_lower(a)
    hi = _power_extreme(a, n)
    # Inverse power iteration through the Cholesky factor for lambda_min.
    rng = np.random.Generator(np.random.Philox(key=0x5EED + 1))
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    rayleigh = None
    cap = _POWER_CAP_PER_DIM * n
    for _ in range(cap):
        w = cho_solve((c, True), v)
        v = w / np.linalg.norm(w)
        current = float(v @ (a @ v))
        if rayleigh is not None and abs(current - rayleigh) <= _POWER_RTOL * abs(current):
            return hi / current
        rayleigh = current
    raise NumericalFailure(f"inverse iteration did not converge within {cap} iterations")


def spd_sqrt(a) -> np.ndarray:
    """Symmetric positive definite square root of an SPD matrix.

    The input is gated through :func:`cholesky_lower` so non-SPD matrices
    raise ``NotPositiveDefinite`` with a pivot index; the root itself is
    computed by the Schur method, independent of any eigendecomposition.
    """
    a = _as_square_sym(a)
    cholesky_lower(a)
    root = sqrtm(a)
    root = np.ascontiguousarray(np.real(root), dtype=np.float64)
    return 0.5 * (root + root.T)


def block_inverse_schur(sigma, split: int):
    """Four blocks of ``sigma^{-1}`` via the Schur-complement formula.

    Parameters
    ----------
    sigma : (n, n) array
        SPD matrix partitioned at row/column ``split``.
    split : int
        Size of the leading block; must satisfy ``1 <= split < n``.

    Returns
    -------
    tuple of arrays
        ``(k11, k12, k21, k22)`` with shapes ``(m, m)``, ``(m, r)``,
        ``(r, m)``, ``(r, r)`` for ``m = split`` and ``r = n - split``:

        * ``k11 = (s11 - s12 s22^{-1} s21)^{-1}``
        * ``k12 = -s11^{-1} s12 (s22 - s21 s11^{-1} s12)^{-1}``
        * ``k21 = -s22^{-1} s21 (s11 - s12 s22^{-1} s21)^{-1}``
        * ``k22 = (s22 - s21 s11^{-1} s12)^{-1}``

    Raises
    ------
    NotPositiveDefinite
        When a principal block or a Schur complement fails the pivot test.
    """
    sigma = _as_square_sym(sigma, "sigma")
    n = sigma.shape[0]
    if not isinstance(split, (int, np.integer)) or not 1 <= split < n:
        raise InvalidInput(f"split must satisfy 1 <= split < {n}, got {split}")
    m = int(split)
    s11 = sigma[:m, :m]
    s12 = sigma[:m, m:]
    s21 = sigma[m:, :m]
    s22 = sigma[m:, m:]
    inv11 = spd_inverse(s11)
    inv22 = spd_inverse(s22)
    schur11 = symmetrize(s11 - s12 @ inv22 @ s21)
    schur22 = symmetrize(s22 - s21 @ inv11 @ s12)
    k11 = spd_inverse(schur11)
    k22 = spd_inverse(schur22)
    k12 = -inv11 @ s12 @ k22
    k21 = -inv22 @ s21 @ k11
    return k11, k12, k21, k22
