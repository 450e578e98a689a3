"""Chattering subdivision of an interval and the integral defect it leaves.

``[a, b]`` is cut into equal blocks; block ``j`` is cut into ``m`` contiguous
sub-intervals of length ``alpha_i * L_j`` in index order.  On sub-interval
``i`` the "chattering" field is ``F_i``; the averaged field is
``sum_i alpha_i F_i``.

Because every block integrates the two fields to the same value, the defect
``int_{t'}^{t''} (sum_i alpha_i F_i - F_sigma(t)) dt`` only depends on where
``t'`` and ``t''`` fall inside their blocks.  It is evaluated as
``D(t'') - D(t')`` with ``D`` the within-block partial integral, written as
coefficients on the ``F_i``; a block boundary has ``D = 0`` exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from rrsim.errors import DomainError

WEIGHT_TOL = 1e-12


@dataclass(frozen=True)
class ChatterSubdivision:
    """Blocks of ``[a, b]`` and their per-channel sub-intervals.

    ``block_edges`` has ``block_count + 1`` entries; ``lengths[j, i]`` is the
    length of sub-interval ``i`` (0-based) of block ``j``; ``edges`` lists
    all sub-interval boundaries in order and ``assignment`` gives the 1-based
    field index of each sub-interval.
    """

    a: float
    b: float
    weights: np.ndarray
    block_edges: np.ndarray
    lengths: np.ndarray
    edges: np.ndarray
    assignment: np.ndarray

    @property
    def m(self) -> int:
        return len(self.weights)

    @property
    def block_count(self) -> int:
        return len(self.block_edges) - 1

    def sub_starts(self, j: int) -> np.ndarray:
        """Start of each sub-interval of block ``j``."""
        return self.block_edges[j] + np.concatenate(([0.0], np.cumsum(self.lengths[j, :-1])))

    def _block(self, t: float) -> int:
        if not self.a <= t <= self.b:
            raise DomainError(f"t={t} outside [{self.a}, {self.b}]")
        j = int(np.searchsorted(self.block_edges, t, side="right")) - 1
        return min(j, self.block_count - 1)

    def index_at(self, t: float) -> int:
        """Field index (1..m) assigned at ``t`` (right-continuous)."""
        j = self._block(t)
        starts = self.sub_starts(j)
        # skip zero-length sub-intervals sharing a start point
        k = int(np.searchsorted(starts, t, side="right")) - 1
        while k > 0 and self.lengths[j, k] == 0.0:
            k -= 1
        return k + 1

    def partial_coefficients(self, t: float) -> np.ndarray:
        """Coefficients ``c`` with ``D(t) = sum_i c_i F_i`` over ``[block start, t]``."""
        j = self._block(t)
        start = self.block_edges[j]
        if t == self.b or t == start:
            return np.zeros(self.m)
        starts = self.sub_starts(j)
        covered = np.zeros(self.m)
        for i in range(self.m):
            if t >= starts[i] + self.lengths[j, i]:
                covered[i] = self.lengths[j, i]
            elif t > starts[i]:
                covered[i] = t - starts[i]
        return self.weights * (t - start) - covered


def chatter_subdivide(interval, weights, block_count: int) -> ChatterSubdivision:
    a, b = (float(v) for v in interval)
    if block_count < 1:
        raise DomainError(f"block_count must be >= 1, got {block_count}")
    if not b > a:
        raise DomainError(f"empty interval [{a}, {b}]")
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or len(w) < 1 or np.any(w < 0):
        raise DomainError("weights must be a nonnegative vector")
    if abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise DomainError(f"weights sum to {w.sum()!r}, not 1")

    block_edges = a + (b - a) * np.arange(block_count + 1) / block_count
    block_edges[-1] = b
    L = np.diff(block_edges)
    lengths = np.outer(L, w)
    edges = [a]
    for j in range(block_count):
        starts = block_edges[j] + np.cumsum(lengths[j, :-1])
        edges.extend(starts.tolist())
        edges.append(block_edges[j + 1])
    assignment = np.tile(np.arange(1, len(w) + 1), block_count)
    return ChatterSubdivision(a, b, w, block_edges, lengths, np.array(edges), assignment)


def chatter_defect(fields, weights, subdivision: ChatterSubdivision,
                   t_pairs: Optional[Iterable] = None) -> float:
    """Largest ``||int_{t'}^{t''} (sum alpha_i F_i - F_sigma) dt||`` over the given pairs.

    ``fields`` holds the ``m`` frozen vectors ``F_i(x)`` (rows).  With
    ``t_pairs=None`` every pair of sub-interval edges is used, which attains
    the supremum because the partial integral is piecewise linear in time.
    """
    F = np.atleast_2d(np.asarray(fields, dtype=float))
    if F.shape[0] != subdivision.m:
        raise DomainError(f"expected {subdivision.m} fields, got shape {F.shape}")
    w = np.asarray(weights, dtype=float)
    if not np.array_equal(w, subdivision.weights):
        raise DomainError("weights differ from the subdivision's weights")

    if t_pairs is None:
        coef = np.array([subdivision.partial_coefficients(t) for t in subdivision.edges])
        D = coef @ F
        diff = D[:, None, :] - D[None, :, :]
        return float(np.max(np.linalg.norm(diff, axis=2)))
    best = 0.0
    cache = {}
    for t1, t2 in t_pairs:
        for t in (t1, t2):
            if t not in cache:
                cache[t] = subdivision.partial_coefficients(t) @ F
        best = max(best, float(np.linalg.norm(cache[t2] - cache[t1])))
    return best
