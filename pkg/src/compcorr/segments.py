"""Centered sums over every contiguous segment of a series pair.

A segment is a run of at least ``m`` consecutive observations.  For a pair
of equal-length series the table holds, per segment, the centered sums

    css_a  = sum (a_i - mean_a)^2        over the segment
    css_b  = sum (b_i - mean_b)^2
    css_ab = sum (a_i - mean_a)(b_i - mean_b)

where the means are the segment's own.  Compositional variance and
covariance are sums of these contributions over the parts of a
composition, so one table answers every composition of the pair.

Each segment is computed two-pass from its own window (mean, then
deviation products).  That keeps every contribution local: perturbing one
observation leaves the css values of segments not containing it
bit-identical, and the self sums are nonnegative by construction.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

# A segment whose variance sum is at or below ZERO_FLOOR_REL x (segment max
# squared magnitude) x (segment length) is flushed to exactly 0.  At double
# precision a constant window leaves a rounding residue near 5e-32 relative
# (deviations of one ulp each), while genuine variation d relative to the
# magnitude contributes about d^2: the floor at 1e-24 cuts at d = 1e-12,
# eight orders above the residue and six below the offset-robustness
# requirement (variation of 1e-6 relative, an offset of 1e6 on unit data,
# must survive).  The flush is what makes "zero compositional variance" a
# decidable predicate.  Anchoring at the segment's own magnitude (not the
# whole series') keeps every segment's value a function of its own data.
ZERO_FLOOR_REL = 1e-24
# Self sums more negative than this (relative, per segment) indicate a bug
# rather than rounding; the two-pass build cannot produce them at all.
NEGATIVE_GUARD_REL = 1e-9


class ConsistencyError(RuntimeError):
    """An internal numerical invariant failed; indicates a bug, not bad input."""


@dataclass(frozen=True)
class TimeSeries:
    """One named series of at least two finite observations."""

    id: str
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError(f"series {self.id!r}: expected a 1-D value vector")
        if values.size < 2:
            raise ValueError(f"series {self.id!r}: needs at least 2 observations, got {values.size}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"series {self.id!r}: values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.values.size)


@lru_cache(maxsize=32)
def segment_bounds(n: int, m: int) -> tuple[np.ndarray, np.ndarray]:
    """(starts, lengths) for all segments of an n-long series, start-major."""
    starts = []
    lengths = []
    for s in range(0, n - m + 1):
        for length in range(m, n - s + 1):
            starts.append(s)
            lengths.append(length)
    return np.asarray(starts, dtype=np.int64), np.asarray(lengths, dtype=np.int64)


@lru_cache(maxsize=32)
def segment_offsets(n: int, m: int) -> np.ndarray:
    """offsets[s] = flat index of segment (s, m); closed form, start-major."""
    s = np.arange(n - m + 1, dtype=np.int64)
    return s * (n - m + 1) - s * (s - 1) // 2


def segment_count(n: int, m: int) -> int:
    k = n - m + 1
    return k * (k + 1) // 2


def segment_index(n: int, m: int, start: int, length: int) -> int:
    """Flat id of segment (start, length); validates the bounds."""
    if length < m:
        raise ValueError(f"segment length {length} is shorter than the minimum part m={m}")
    if start < 0 or start + length > n:
        raise ValueError(f"segment ({start}, {length}) falls outside a series of length {n}")
    return int(segment_offsets(n, m)[start] + (length - m))


@lru_cache(maxsize=32)
def _ids_for_length(n: int, m: int, length: int) -> np.ndarray:
    # flat ids of all segments with this length, in start order
    return segment_offsets(n, m)[: n - length + 1] + (length - m)


def segment_max_sq(anchor: np.ndarray, m: int) -> np.ndarray:
    """Per-segment maximum squared magnitude of ``anchor`` rows (k, n).

    This is the scale that anchors the zero floor and the rounding guard.
    It is computed per segment so the thresholds, like the sums they
    police, depend only on the segment's own data.
    """
    anchor = np.atleast_2d(anchor)
    k, n = anchor.shape
    sq = anchor * anchor
    out = np.empty((k, segment_count(n, m)), dtype=np.float64)
    for length in range(m, n + 1):
        win = sliding_window_view(sq, length, axis=1)
        out[:, _ids_for_length(n, m, length)] = win.max(axis=2)
    return out


def series_segment_css(X: np.ndarray, m: int, anchor: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-row self css over every segment, with the zero floor applied.

    X is (k, n); returns (css, zero_mask), both (k, nseg).  ``anchor`` is
    the original (uncentered) data of the same shape, whose per-segment
    magnitude sets the flush floor even when X itself was centered.
    """
    k, n = X.shape
    nseg = segment_count(n, m)
    css = np.empty((k, nseg), dtype=np.float64)
    for length in range(m, n + 1):
        win = sliding_window_view(X, length, axis=1)
        dev = win - win.mean(axis=2, keepdims=True)
        css[:, _ids_for_length(n, m, length)] = np.einsum("kij,kij->ki", dev, dev)
    _, lengths = segment_bounds(n, m)
    scale = segment_max_sq(anchor, m) * lengths[None, :]
    if np.any(css < -NEGATIVE_GUARD_REL * scale):
        raise ConsistencyError("segment variance sum fell below the rounding guard")
    zero = css <= ZERO_FLOOR_REL * scale
    css[zero] = 0.0
    return css, zero


def series_segment_sums(X: np.ndarray, m: int) -> np.ndarray:
    """Per-row plain sums over every segment of X (k, n), via prefix sums."""
    k, n = X.shape
    prefix = np.zeros((k, n + 1), dtype=np.float64)
    np.cumsum(X, axis=1, out=prefix[:, 1:])
    starts, lengths = segment_bounds(n, m)
    return prefix[:, starts + lengths] - prefix[:, starts]


class SegmentTable:
    """All per-segment centered sums for one pair of series.

    Build once with :meth:`build`, then query any segment in O(1) or take
    the whole flat arrays for vectorized composition scans.
    """

    __slots__ = ("id_a", "id_b", "n", "m", "css_a", "css_b", "css_ab", "zero_a", "zero_b")

    def __init__(self, id_a, id_b, n, m, css_a, css_b, css_ab, zero_a, zero_b):
        self.id_a = id_a
        self.id_b = id_b
        self.n = n
        self.m = m
        self.css_a = css_a
        self.css_b = css_b
        self.css_ab = css_ab
        self.zero_a = zero_a
        self.zero_b = zero_b

    @classmethod
    def build(cls, a: TimeSeries, b: TimeSeries, m: int) -> "SegmentTable":
        if a.n != b.n:
            raise ValueError(
                f"series length mismatch: {a.id!r} has {a.n} observations, {b.id!r} has {b.n}"
            )
        n = a.n
        if m < 2:
            raise ValueError(f"minimum part length must be at least 2, got m={m}")
        if n < m:
            raise ValueError(f"series of length {n} cannot hold a part of length m={m}")

        va, vb = a.values, b.values
        nseg = segment_count(n, m)
        css_a = np.empty(nseg, dtype=np.float64)
        css_b = np.empty(nseg, dtype=np.float64)
        css_ab = np.empty(nseg, dtype=np.float64)
        for length in range(m, n + 1):
            ids = _ids_for_length(n, m, length)
            wa = sliding_window_view(va, length)
            wb = sliding_window_view(vb, length)
            da = wa - wa.mean(axis=1, keepdims=True)
            db = wb - wb.mean(axis=1, keepdims=True)
            css_a[ids] = np.einsum("ij,ij->i", da, da)
            css_b[ids] = np.einsum("ij,ij->i", db, db)
            css_ab[ids] = np.einsum("ij,ij->i", da, db)

        _, lengths = segment_bounds(n, m)
        zero_a = _flush_self(css_a, lengths, segment_max_sq(va, m)[0])
        zero_b = _flush_self(css_b, lengths, segment_max_sq(vb, m)[0])
        # a flushed side means "constant within precision"; zero the cross
        # term with it so per-segment Cauchy-Schwarz survives the flush
        css_ab[zero_a | zero_b] = 0.0
        return cls(a.id, b.id, n, m, css_a, css_b, css_ab, zero_a, zero_b)

    def segment_contrib(self, start: int, length: int) -> tuple[float, float, float]:
        """(css_a, css_b, css_ab) for the segment at ``start`` of ``length``."""
        i = segment_index(self.n, self.m, start, length)
        return float(self.css_a[i]), float(self.css_b[i]), float(self.css_ab[i])

    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """The three flat per-segment vectors, start-major order."""
        return self.css_a, self.css_b, self.css_ab


def _flush_self(css: np.ndarray, lengths: np.ndarray, max_sq: np.ndarray) -> np.ndarray:
    scale = max_sq * lengths
    if np.any(css < -NEGATIVE_GUARD_REL * scale):
        raise ConsistencyError("segment variance sum fell below the rounding guard")
    zero = css <= ZERO_FLOOR_REL * scale
    css[zero] = 0.0
    return zero
