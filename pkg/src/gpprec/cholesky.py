"""Block-Cholesky factors of the precision under a multiscale partition.

With sites grouped into levels ``1..q`` of a maximin ordering, the
precision admits an upper-triangular factorization ``omega = U U^T``
whose transpose has the explicit block form

* diagonal: ``(U^T)_{k,k} = h^{kd/2} inv(Ltilde_k)``
* below:    ``(U^T)_{k,l} = h^{-kd/2} Ltilde_k^T omega_k[J_k, J_l]``

where ``omega_k`` is the precision of the first ``k`` levels,
``B_k = h^{-kd} omega_k[J_k, J_k]`` is the well-conditioned stiffness
block of scale ``k``, and ``Ltilde_k`` is the lower Cholesky factor of
``inv(B_k)``.  ``h`` is fixed at 1/2.

Estimation plugs per-scale precision estimates into the same formulas.
A square-root variant replaces the triangular factors with symmetric
roots of ``B_k``, trading the entrywise triangular structure for a
slightly better perturbation constant.  Scales are independent given the
samples, so they could be estimated in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import InvalidInput, NotPositiveDefinite
from .estimator import EstimatorConfig
from .hierarchy import H_SCALE, LevelPartition
from .linalg import (
    cholesky_lower,
    sample_covariance,
    spd_inverse,
    spd_sqrt,
    symmetrize,
)

__all__ = [
    "ScaleEstimates",
    "BlockTriangularFactor",
    "exact_scales",
    "exact_block_factor",
    "estimate_B",
    "assemble_U",
    "assemble_U_star",
    "estimate_scales",
    "estimate_cholesky",
]


@dataclass
class ScaleEstimates:
    """Per-scale ingredients of the factor assembly.

    ``omegas[k-1]`` is the (estimated or exact) precision on the first
    ``k`` levels, ``b_blocks[k-1]`` the scale's stiffness block, and
    ``ltilde[k-1]`` the lower Cholesky factor of its inverse.
    """

    levels: LevelPartition
    d: int
    omegas: list
    b_blocks: list
    ltilde: list


@dataclass(frozen=True)
class BlockTriangularFactor:
    """Blockwise storage of the transpose of a block upper-triangular factor.

    ``blocks[(k, l)]`` with ``l <= k`` holds the ``(k, l)`` block of
    ``U^T``; blocks above the diagonal are absent.  Diagonal blocks are
    nonsingular by construction.
    """

    levels: LevelPartition
    d: int
    blocks: dict

    def transpose_dense(self) -> np.ndarray:
        """Dense ``U^T`` (block lower-triangular)."""
        m = self.levels.m
        out = np.zeros((m, m))
        for (k, l), block in self.blocks.items():
            out[self.levels.level_slice(k), self.levels.level_slice(l)] = block
        return out

    def dense(self) -> np.ndarray:
        """Dense ``U`` (block upper-triangular)."""
        return self.transpose_dense().T

    def reconstruct(self) -> np.ndarray:
        """``U U^T``, exactly symmetric."""
        u = self.dense()
        return symmetrize(u @ u.T)


def estimate_B(omega_k_hat, levels: LevelPartition, k: int, d: int) -> np.ndarray:
    """Stiffness block ``h^{-kd} omega_k[J_k, J_k]`` of scale ``k``.

    ``omega_k_hat`` must be indexed by the first ``k`` levels in level
    order.  Raises ``NotPositiveDefinite`` when the scaled block is not
    SPD, which signals an insufficient sample size at this scale.
    """
    omega_k_hat = np.asarray(omega_k_hat, dtype=np.float64)
    expected = levels.prefix_size(k)
    if omega_k_hat.shape != (expected, expected):
        raise InvalidInput(
            f"scale-{k} precision must be {(expected, expected)}, got {omega_k_hat.shape}"
        )
    sl = levels.level_slice(k)
    block = symmetrize(H_SCALE ** (-k * d) * omega_k_hat[sl, sl])
    cholesky_lower(block)
    return block


def _scales_from(levels: LevelPartition, d: int, omegas: list) -> ScaleEstimates:
    b_blocks = []
    ltilde = []
    for k, omega_k in enumerate(omegas, start=1):
        try:
            b = estimate_B(omega_k, levels, k, d)
            ltilde.append(cholesky_lower(spd_inverse(b)))
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite(
                f"scale {k}: {exc}", pivot=exc.pivot, scale=k
            ) from exc
        b_blocks.append(b)
    return ScaleEstimates(levels=levels, d=d, omegas=omegas, b_blocks=b_blocks, ltilde=ltilde)


def exact_scales(omega, levels: LevelPartition, d: int) -> ScaleEstimates:
    """Exact per-scale blocks computed from a known precision.

    ``omega`` must be SPD and ordered by the level partition.  The
    covariance is formed once; each scale's precision is the inverse of
    its leading covariance block.
    """
    omega = np.asarray(omega, dtype=np.float64)
    if omega.shape != (levels.m, levels.m):
        raise InvalidInput(f"omega must be {(levels.m, levels.m)}, got {omega.shape}")
    sigma = spd_inverse(omega)
    omegas = []
    for k in range(1, levels.q + 1):
        n_k = levels.prefix_size(k)
        if k == levels.q:
            omegas.append(omega)
        else:
            omegas.append(spd_inverse(symmetrize(sigma[:n_k, :n_k])))
    return _scales_from(levels, d, omegas)


def assemble_U(scales: ScaleEstimates, levels: LevelPartition, d: int) -> BlockTriangularFactor:
    """Assemble the factor transpose from per-scale estimates.

    Diagonal blocks invert the triangular ``Ltilde_k``; off-diagonal
    blocks multiply its transpose into the in-scale precision slices.
    """
    _check_scales(scales, levels, d)
    h = H_SCALE
    blocks = {}
    for k in range(1, levels.q + 1):
        ltilde = scales.ltilde[k - 1]
        eye = np.eye(ltilde.shape[0])
        blocks[(k, k)] = h ** (k * d / 2.0) * solve_triangular(ltilde, eye, lower=True)
        if k > 1:
            omega_k = scales.omegas[k - 1]
            sl = levels.level_slice(k)
            row = h ** (-k * d / 2.0) * (ltilde.T @ omega_k[sl, : levels.prefix_size(k - 1)])
            for l in range(1, k):
                blocks[(k, l)] = row[:, levels.level_slice(l)].copy()
    return BlockTriangularFactor(levels=levels, d=d, blocks=blocks)


def assemble_U_star(
    scales: ScaleEstimates, levels: LevelPartition, d: int
) -> BlockTriangularFactor:
    """Square-root variant of the factor assembly.

    Uses ``inv(sqrt(B_k))`` in place of ``Ltilde_k^T`` off the diagonal
    and ``h^{kd/2} sqrt(B_k)`` on it.  The result is block upper
    triangular but not entrywise triangular; it reconstructs the same
    precision.
    """
    _check_scales(scales, levels, d)
    h = H_SCALE
    blocks = {}
    for k in range(1, levels.q + 1):
        b_k = scales.b_blocks[k - 1]
        root = spd_sqrt(b_k)
        blocks[(k, k)] = h ** (k * d / 2.0) * root
        if k > 1:
            inv_root = spd_sqrt(spd_inverse(b_k))
            omega_k = scales.omegas[k - 1]
            sl = levels.level_slice(k)
            row = h ** (-k * d / 2.0) * (inv_root @ omega_k[sl, : levels.prefix_size(k - 1)])
            for l in range(1, k):
                blocks[(k, l)] = row[:, levels.level_slice(l)].copy()
    return BlockTriangularFactor(levels=levels, d=d, blocks=blocks)


def _check_scales(scales: ScaleEstimates, levels: LevelPartition, d: int):
    if scales.levels is not levels and scales.levels.q != levels.q:
        raise InvalidInput("scale estimates were built for a different partition")
    for name, seq in (
        ("omegas", scales.omegas),
        ("b_blocks", scales.b_blocks),
        ("ltilde", scales.ltilde),
    ):
        if len(seq) != levels.q:
            raise InvalidInput(
                f"{name} holds {len(seq)} scales, expected {levels.q}"
            )


def exact_block_factor(omega, levels: LevelPartition, d: int) -> BlockTriangularFactor:
    """Exact block factor of a known precision; ``U U^T`` reproduces it.

    With positive diagonals throughout, the dense form coincides with the
    unique upper-triangular Cholesky factor of the input.
    """
    return assemble_U(exact_scales(omega, levels, d), levels, d)


def estimate_scales(
    samples,
    levels: LevelPartition,
    config: EstimatorConfig | None = None,
    cloud=None,
    seed: int = 0,
    d: int | None = None,
) -> ScaleEstimates:
    """Estimate every scale's ingredients from one sample set.

    Columns of ``samples`` must follow the maximin order, so the first
    ``prefix_size(k)`` columns are the scale-``k`` observation set.  Each
    scale reuses the same draws at its coarser resolution.  Small scales
    (or all scales when no cloud is given) invert the full sample
    covariance of their columns; larger ones go through the lattice
    reduction on the sub-cloud.  Failures carry the scale index.
    """
    z = np.asarray(samples, dtype=np.float64)
    if z.ndim != 2 or z.shape[1] != levels.m:
        raise InvalidInput(
            f"samples must have {levels.m} columns in maximin order, got shape {z.shape}"
        )
    config = config or EstimatorConfig()
    n = z.shape[0]
    kappa = config.kappa_hint if config.kappa_hint is not None else float(levels.m)
    if d is None:
        d = cloud.d if cloud is not None else 1
    omegas = []
    for k in range(1, levels.q + 1):
        m_k = levels.prefix_size(k)
        sub = z[:, :m_k]
        try:
            if cloud is None or (
                config.fallback_enabled and m_k <= math.log(n * kappa)
            ):
                omega_k = spd_inverse(sample_covariance(sub))
            else:
                from .matching import embed_and_estimate, measure_cloud

                sub_cloud = measure_cloud(cloud.sites[:m_k], cloud.d)
                omega_k = embed_and_estimate(
                    sub, sub_cloud, config, seed=seed + k
                ).matrix
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite(
                f"scale {k}: {exc}", pivot=exc.pivot, scale=k
            ) from exc
        omegas.append(omega_k)
    return _scales_from(levels, d, omegas)


def estimate_cholesky(
    samples,
    levels: LevelPartition,
    config: EstimatorConfig | None = None,
    cloud=None,
    seed: int = 0,
    d: int | None = None,
) -> BlockTriangularFactor:
    """Estimated block upper-triangular factor of the precision.

    Convenience wrapper: estimates every scale with
    :func:`estimate_scales` and assembles with :func:`assemble_U`.  For the
    square-root variant, call :func:`assemble_U_star` on the same scales.
    """
    scales = estimate_scales(samples, levels, config, cloud=cloud, seed=seed, d=d)
    return assemble_U(scales, levels, scales.d)
