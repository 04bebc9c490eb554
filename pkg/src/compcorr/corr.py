"""Compositional correlation of a series pair.

Given a composition of the common length into parts, each part is centered
by its own mean and the deviation products are pooled:

    var_c(a)    = (1/n) sum_parts sum_i (a_i - part_mean_a)^2
    cov_c(a, b) = (1/n) sum_parts sum_i (a_i - part_mean_a)(b_i - part_mean_b)
    r_c         = cov_c / sqrt(var_c(a) var_c(b))

The single-part composition recovers the plain Pearson correlation.  When
either pooled variance is zero the correlation is Undefined, a value in
its own right (rendered as None here, NA in files), never an error.

``scan`` evaluates r_c over every composition for a given minimum part
length, tracking the extremes (HCC and LCC, with the earliest attaining
composition in canonical order as BCC and WCC) and optionally the whole
distribution.  Single-composition functions below are the direct two-pass
form of the definitions; the scan goes through the segment table and the
incidence blocks instead, so the two routes check each other.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from . import _blocks
from .compositions import CompositionSpec, composition_at, count_compositions, enumerate_compositions, validate_composition
from .segments import ConsistencyError, SegmentTable, TimeSeries, ZERO_FLOOR_REL

# |r_c| may stick out past 1 by accumulated rounding only; anything past
# this is an internal inconsistency, anything under it is clamped.
UNIT_EXCESS_TOL = 1e-12


def _part_moments(a: np.ndarray, b: np.ndarray, parts: tuple[int, ...]) -> tuple[float, float, float]:
    """Pooled centered sums over the parts, with flat parts flushed to 0.

    A part whose centered sum of squares sits at or below the rounding
    floor (relative to the part's own magnitude) contributes exactly zero,
    and its cross term goes with it.  The pooled variance is therefore
    exactly 0.0 iff every part is constant to within representation.
    """
    var_a = 0.0
    var_b = 0.0
    cov = 0.0
    start = 0
    for length in parts:
        sa = a[start:start + length]
        sb = b[start:start + length]
        da = sa - sa.mean()
        db = sb - sb.mean()
        pa = float(da @ da)
        pb = float(db @ db)
        pab = float(da @ db)
        flat_a = pa <= ZERO_FLOOR_REL * float(np.max(sa * sa)) * length
        flat_b = pb <= ZERO_FLOOR_REL * float(np.max(sb * sb)) * length
        if flat_a:
            pa = 0.0
        if flat_b:
            pb = 0.0
        if flat_a or flat_b:
            pab = 0.0
        var_a += pa
        var_b += pb
        cov += pab
        start += length
    return var_a, var_b, cov


def comp_variance(a: TimeSeries, parts) -> float:
    """Compositional variance of ``a`` under the given composition.

    Zero exactly when every part is constant (to within representation).
    """
    parts = validate_composition(a.n, 2, parts)
    var, _, _ = _part_moments(a.values, a.values, parts)
    return var / a.n


def comp_std(a: TimeSeries, parts) -> float:
    """Compositional standard deviation, sqrt of :func:`comp_variance`."""
    return float(np.sqrt(comp_variance(a, parts)))


def comp_covariance(a: TimeSeries, b: TimeSeries, parts) -> float:
    """Compositional covariance of the pair under the given composition."""
    if a.n != b.n:
        raise ValueError(
            f"series length mismatch: {a.id!r} has {a.n} observations, {b.id!r} has {b.n}"
        )
    parts = validate_composition(a.n, 2, parts)
    _, _, cov = _part_moments(a.values, b.values, parts)
    return cov / a.n


def comp_correlation(a: TimeSeries, b: TimeSeries, parts) -> float | None:
    """Compositional correlation r_c, or None when Undefined.

    Undefined iff either series has zero compositional variance under the
    composition (for example a part-wise constant series).
    """
    if a.n != b.n:
        raise ValueError(
            f"series length mismatch: {a.id!r} has {a.n} observations, {b.id!r} has {b.n}"
        )
    parts = validate_composition(a.n, 2, parts)
    var_a, var_b, cov = _part_moments(a.values, b.values, parts)
    if var_a == 0.0 or var_b == 0.0:
        return None
    r = cov / float(np.sqrt(var_a * var_b))
    if abs(r) > 1.0:
        if abs(r) > 1.0 + UNIT_EXCESS_TOL:
            raise ConsistencyError(f"correlation {r!r} exceeds unit magnitude beyond rounding")
        r = 1.0 if r > 0 else -1.0
    return r


@dataclass(frozen=True)
class ScanOptions:
    """What a scan should keep beyond the extremes.

    distribution: keep the full per-composition value vector (canonical
    order, NaN where Undefined).  clouds: keep per-composition
    (var_a, var_b, cov) alongside, for variance/covariance point clouds.
    """

    distribution: bool = False
    clouds: bool = False


@dataclass(frozen=True)
class ScanResult:
    """Outcome of scanning every composition of one pair."""

    id_a: str
    id_b: str
    spec: CompositionSpec
    hcc: float | None
    lcc: float | None
    pearson: float | None
    bcc: tuple[int, ...] | None
    wcc: tuple[int, ...] | None
    n_compositions: int
    n_evaluated: int
    n_undefined: int
    values: np.ndarray | None = None
    clouds: np.ndarray | None = None

    def distribution(self) -> Iterator[tuple[tuple[int, ...], float | None]]:
        """(composition, value) pairs in canonical order; needs the values
        vector, so scan with ``ScanOptions(distribution=True)``."""
        if self.values is None:
            raise ValueError("scan was not asked to keep the distribution")
        for parts, v in zip(enumerate_compositions(self.spec), self.values):
            yield parts, (None if np.isnan(v) else float(v))


def _clamp_block(r: np.ndarray) -> None:
    # NaN marks Undefined and passes through untouched
    with np.errstate(invalid="ignore"):
        excess = np.abs(r) - 1.0
        bad = excess > UNIT_EXCESS_TOL
    if np.any(bad):
        worst = float(np.nanmax(np.abs(r)))
        raise ConsistencyError(f"correlation magnitude {worst!r} exceeds 1 beyond rounding")
    np.clip(r, -1.0, 1.0, out=r)


def scan(a: TimeSeries, b: TimeSeries, spec: CompositionSpec,
         options: ScanOptions = ScanOptions()) -> ScanResult:
    """Evaluate r_c over every composition of the pair, canonical order.

    Streams incidence blocks against the pair's segment table, so memory
    stays bounded regardless of the composition count unless the full
    distribution or clouds were requested.
    """
    if a.n != spec.n or b.n != spec.n:
        raise ValueError(
            f"scan spec expects n={spec.n}, series have {a.n} ({a.id!r}) and {b.n} ({b.id!r})"
        )
    table = SegmentTable.build(a, b, spec.m)
    css_a, css_b, css_ab = table.arrays()

    total = count_compositions(spec)
    blocks = _blocks.blocks_for(spec.n, spec.m)
    stream = blocks if blocks is not None else _blocks.iter_blocks(spec.n, spec.m)

    best_val = -np.inf
    best_idx = -1
    worst_val = np.inf
    worst_idx = -1
    pearson = np.nan
    undefined = 0
    keep_values = options.distribution or options.clouds
    values = np.empty(total, dtype=np.float64) if keep_values else None
    cloud_cols = np.empty((total, 3), dtype=np.float64) if options.clouds else None

    for block in stream:
        M = block.matrix
        va = M.dot(css_a)
        vb = M.dot(css_b)
        cov = M.dot(css_ab)
        undef = (va == 0.0) | (vb == 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = cov / np.sqrt(va * vb)
        r[undef] = np.nan
        _clamp_block(r)
        undefined += int(undef.sum())

        if not np.all(undef):
            masked = np.where(undef, -np.inf, r)
            i = int(np.argmax(masked))
            if masked[i] > best_val:
                best_val = float(masked[i])
                best_idx = block.offset + i
            masked = np.where(undef, np.inf, r)
            i = int(np.argmin(masked))
            if masked[i] < worst_val:
                worst_val = float(masked[i])
                worst_idx = block.offset + i

        if block.offset + block.count == total:
            pearson = float(r[-1])
        if values is not None:
            values[block.offset:block.offset + block.count] = r
        if cloud_cols is not None:
            seg = cloud_cols[block.offset:block.offset + block.count]
            seg[:, 0] = va
            seg[:, 1] = vb
            seg[:, 2] = cov

    evaluated = total - undefined
    clouds = None
    if cloud_cols is not None:
        clouds = np.column_stack([values, cloud_cols / spec.n])
    return ScanResult(
        id_a=a.id,
        id_b=b.id,
        spec=spec,
        hcc=best_val if best_idx >= 0 else None,
        lcc=worst_val if worst_idx >= 0 else None,
        pearson=None if np.isnan(pearson) else pearson,
        bcc=composition_at(spec, best_idx) if best_idx >= 0 else None,
        wcc=composition_at(spec, worst_idx) if worst_idx >= 0 else None,
        n_compositions=total,
        n_evaluated=evaluated,
        n_undefined=undefined,
        values=values,
        clouds=clouds,
    )
