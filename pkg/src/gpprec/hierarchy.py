"""Maximin ordering, dyadic level assignment, and the scale diagonal."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInput

__all__ = [
    "MaximinOrdering",
    "LevelPartition",
    "maximin_order",
    "assign_levels",
    "scale_diagonal",
]

H_SCALE = 0.5

# Candidates within this relative margin of the best distance count as tied;
# ties go to the smallest original index for determinism.
_TIE_RTOL = 1e-12


@dataclass(frozen=True)
class MaximinOrdering:
    """Greedy farthest-point ordering with its selection distances.

    ``perm[i]`` is the original index of the site chosen at step ``i`` and
    ``ell[i]`` its distance to the earlier sites and the box boundary at
    selection time.  ``ell`` is nonincreasing.
    """

    perm: np.ndarray
    ell: np.ndarray

    @property
    def m(self) -> int:
        return self.perm.size


def maximin_order(cloud) -> MaximinOrdering:
    """Order sites by repeatedly taking the farthest from the chosen set.

    The first site maximizes the distance to the box boundary; each later
    site maximizes the distance to the boundary and all earlier sites.
    """
    sites = np.atleast_2d(np.asarray(cloud.sites, dtype=np.float64))
    m = sites.shape[0]
    dist = np.minimum(sites, 1.0 - sites).min(axis=1)
    chosen = np.zeros(m, dtype=bool)
    perm = np.empty(m, dtype=np.int64)
    ell = np.empty(m)
    for step in range(m):
        masked = np.where(chosen, -np.inf, dist)
        best = masked.max()
        pick = int(np.flatnonzero(masked >= best * (1.0 - _TIE_RTOL))[0])
        perm[step] = pick
        # Clamp away sub-ulp increases caused by the tie tolerance.
        ell[step] = dist[pick] if step == 0 else min(dist[pick], ell[step - 1])
        chosen[pick] = True
        gap = np.linalg.norm(sites - sites[pick], axis=1)
        dist = np.minimum(dist, gap)
    return MaximinOrdering(perm=perm, ell=ell)


@dataclass(frozen=True)
class LevelPartition:
    """Contiguous grouping of the maximin order into dyadic scales.

    Level ``k`` holds the positions whose selection distance lies in
    ``(scale0 * 2^-k, scale0 * 2^-(k-1)]`` where ``scale0 = ell[0]``.
    ``offsets`` has length ``q + 1``; level ``k`` (1-based) is the slice
    ``offsets[k-1]:offsets[k]`` of the ordering.
    """

    q: int
    offsets: np.ndarray
    level_of: np.ndarray

    @classmethod
    def from_sizes(cls, sizes) -> "LevelPartition":
        """Partition with the given level sizes, independent of any cloud."""
        sizes = np.asarray(sizes, dtype=np.int64)
        if sizes.size < 1 or np.any(sizes < 1):
            raise InvalidInput(f"level sizes must be positive, got {sizes}")
        offsets = np.concatenate([[0], np.cumsum(sizes)])
        level_of = np.repeat(np.arange(1, sizes.size + 1), sizes)
        return cls(q=int(sizes.size), offsets=offsets, level_of=level_of)

    @property
    def m(self) -> int:
        return self.level_of.size

    def sizes(self) -> np.ndarray:
        return np.diff(self.offsets)

    def level_slice(self, k: int) -> slice:
        if not 1 <= k <= self.q:
            raise InvalidInput(f"level {k} outside 1..{self.q}")
        return slice(int(self.offsets[k - 1]), int(self.offsets[k]))

    def prefix_size(self, k: int) -> int:
        """Number of sites in the first ``k`` levels."""
        if not 1 <= k <= self.q:
            raise InvalidInput(f"level {k} outside 1..{self.q}")
        return int(self.offsets[k])


def assign_levels(ordering: MaximinOrdering) -> LevelPartition:
    """Group the ordering into levels by halving distance thresholds.

    Position ``i`` lands at level ``floor(log2(scale0 / ell[i])) + 1``
    clamped to ``[1, q]``, with ``q`` set by the final (smallest) distance.
    The first position is always level 1 and levels are contiguous because
    the distances are nonincreasing.
    """
    ell = ordering.ell
    if ell.size == 0:
        raise InvalidInput("ordering is empty")
    if np.any(ell <= 0):
        raise InvalidInput("selection distances must be positive")
    scale0 = float(ell[0])
    # The epsilon absorbs representation error when ratios are exact powers.
    raw = np.floor(np.log2(scale0 / ell) + 1e-9).astype(np.int64) + 1
    q = max(1, int(raw[-1]))
    level_of = np.clip(raw, 1, q)
    if np.any(np.diff(level_of) < 0):
        raise InvalidInput("levels are not contiguous; ell must be nonincreasing")
    counts = np.bincount(level_of, minlength=q + 1)[1:]
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return LevelPartition(q=q, offsets=offsets, level_of=level_of)


def scale_diagonal(levels: LevelPartition, d: int) -> np.ndarray:
    """Diagonal entries ``(1/2)^(-d * level / 2)``, one per ordered site.

    Conjugating the covariance by the inverse of this diagonal puts all
    scales on a comparable footing.
    """
    if d not in (1, 2, 3):
        raise InvalidInput(f"d must be 1, 2 or 3, got {d}")
    return np.power(2.0, d * levels.level_of.astype(np.float64) / 2.0)
