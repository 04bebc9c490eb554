"""Batch scanning: every pair of a dataset, a pair list, or series vs time.

The engine vectorizes across pairs.  Per-series segment sums and flushed
variance contributions are precomputed once; a chunk of pair indices then
needs only the cross prefix sums of its rows, three sparse products with
the composition incidence blocks, and running extreme bookkeeping.  Chunk
boundaries are fixed in pair-index space (never derived from the worker
count), results are reassembled in submission order, and every array
operation is row- or column-independent, so output files are
byte-identical no matter how many workers run.

Records pass through an optional conjunctive filter (comparisons on hcc,
lcc, pearson, abs(pearson)) before reaching the sink; Undefined never
satisfies a comparison.
"""
from __future__ import annotations

import math
import multiprocessing as mp
import re
import time
from dataclasses import dataclass

import numpy as np

from . import _blocks
from .compositions import CompositionSpec, composition_at, count_compositions
from .corr import ScanOptions, ScanResult, UNIT_EXCESS_TOL, scan
from .datasets import Dataset
from .segments import (
    ConsistencyError,
    TimeSeries,
    segment_bounds,
    series_segment_css,
    series_segment_sums,
)

CHUNK_PAIRS = 8192          # fixed chunk width in pair-index space
_CELL_BUDGET = 4_194_304    # max cells of a (compositions x pairs) intermediate
_VAR_SUM_BUDGET = 25_000_000  # max cells of the per-series variance-sum table

TIME_ID = "time"


# ---------------------------------------------------------------------------
# records, config, summary

@dataclass(frozen=True)
class PairRecord:
    """One scanned pair: extreme, plain, and extremal-composition fields."""

    id_a: str
    id_b: str
    hcc: float | None
    pearson: float | None
    lcc: float | None
    bcc: tuple[int, ...] | None
    wcc: tuple[int, ...] | None


RECORD_HEADER = "id_a\tid_b\thcc\tpearson\tlcc\tbcc\twcc"

_FILTER_FIELDS = ("hcc", "lcc", "pearson", "abs(pearson)")
_FILTER_OPS = {
    ">": np.greater,
    "<": np.less,
    ">=": np.greater_equal,
    "<=": np.less_equal,
}


@dataclass(frozen=True)
class FilterClause:
    field: str
    op: str
    value: float

    def __post_init__(self) -> None:
        if self.field not in _FILTER_FIELDS:
            raise ValueError(f"unknown filter field {self.field!r}; choose from {_FILTER_FIELDS}")
        if self.op not in _FILTER_OPS:
            raise ValueError(f"unknown filter operator {self.op!r}")
        if not -1.0 <= self.value <= 1.0:
            raise ValueError(f"filter threshold {self.value} outside [-1, 1]")


_CLAUSE_RE = re.compile(
    r"(hcc|lcc|pearson|abs\(pearson\))\s*(<=|>=|<|>)\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
)


def parse_filter(text: str) -> tuple[FilterClause, ...]:
    """Parse 'hcc>0.9 AND abs(pearson)<0.1' into clauses (AND-combined)."""
    clauses = []
    for raw in re.split(r"(?i)\s+AND\s+", text.strip()):
        m = _CLAUSE_RE.fullmatch(raw.strip())
        if not m:
            raise ValueError(
                f"cannot parse filter clause {raw!r}; expected e.g. 'hcc>0.9' with a field "
                f"from {_FILTER_FIELDS}"
            )
        clauses.append(FilterClause(m.group(1), m.group(2), float(m.group(3))))
    return tuple(clauses)


@dataclass(frozen=True)
class JobConfig:
    """Batch-run knobs: minimum part length, workers, record filter."""

    m: int
    workers: int = 1
    filter: tuple[FilterClause, ...] = ()

    def __post_init__(self) -> None:
        if self.m < 2:
            raise ValueError(f"minimum part length must be at least 2, got m={self.m}")
        if self.workers < 1:
            raise ValueError(f"worker count must be at least 1, got {self.workers}")


@dataclass(frozen=True)
class RunSummary:
    pairs_scanned: int
    records_emitted: int
    undefined_values: int
    wall_seconds: float
    pairs_per_second: float
    workers: int

    def describe(self) -> str:
        return (
            f"{self.pairs_scanned} pairs scanned, {self.records_emitted} records emitted, "
            f"{self.undefined_values} undefined values, {self.wall_seconds:.2f} s wall, "
            f"{self.pairs_per_second:.0f} pairs/s on {self.workers} worker(s)"
        )


# ---------------------------------------------------------------------------
# rendering

def format_number(x: float | None, precision: int = 6) -> str:
    return "NA" if x is None else f"{x:.{precision}f}"


def format_composition(parts: tuple[int, ...] | None) -> str:
    return "NA" if parts is None else "[" + ",".join(str(p) for p in parts) + "]"


def record_line(rec: PairRecord, precision: int = 6) -> str:
    return "\t".join(
        (
            rec.id_a,
            rec.id_b,
            format_number(rec.hcc, precision),
            format_number(rec.pearson, precision),
            format_number(rec.lcc, precision),
            format_composition(rec.bcc),
            format_composition(rec.wcc),
        )
    )


# ---------------------------------------------------------------------------
# pair-index triangle

def _row_start(S: int, i: int) -> int:
    # first linear index of row i among pairs (i, j), i < j, row-major
    return i * (2 * S - i - 1) // 2


def _pair_at(S: int, p: int) -> tuple[int, int]:
    d = (2 * S - 1) ** 2 - 8 * p
    i = (2 * S - 1 - math.isqrt(d)) // 2
    while _row_start(S, i + 1) <= p:
        i += 1
    while _row_start(S, i) > p:
        i -= 1
    return i, i + 1 + (p - _row_start(S, i))


def _runs(S: int, lo: int, hi: int):
    """Split a pair-index range into per-row runs (i, j0, j1)."""
    while lo < hi:
        i, j = _pair_at(S, lo)
        row_end = _row_start(S, i + 1)
        take = min(hi, row_end) - lo
        yield i, j, j + take
        lo += take


# ---------------------------------------------------------------------------
# vectorized chunk evaluation

class _Ctx:
    """Everything a worker needs; pickled once per worker at pool start."""

    def __init__(self, X: np.ndarray, m: int):
        S, n = X.shape
        self.spec = CompositionSpec(n, m)
        self.S = S
        self.n = n
        self.m = m
        self.ncomp = count_compositions(self.spec)
        blocks = _blocks.blocks_for(n, m)
        if blocks is None:
            raise ValueError("composition structure too large for the vectorized engine")
        self.blocks = blocks
        Xc = X - X.mean(axis=1, keepdims=True)
        self.Xc = Xc
        self.css, self.zmask = series_segment_css(Xc, m, X)
        self.s1 = series_segment_sums(Xc, m)
        starts, lengths = segment_bounds(n, m)
        self.seg_starts = starts
        self.seg_ends = starts + lengths
        self.inv_len = 1.0 / lengths
        self.j_step = max(1, _CELL_BUDGET // max(blk.count for blk in blocks))
        if S * self.ncomp <= _VAR_SUM_BUDGET:
            self.var_sums = np.hstack([blk.matrix.dot(self.css.T).T for blk in blocks])
        else:
            self.var_sums = None
        self.filter: tuple[FilterClause, ...] = ()


_CTX: _Ctx | None = None


def _set_ctx(ctx: _Ctx) -> None:
    global _CTX
    _CTX = ctx


def _cross_css(ctx: _Ctx, i: int, j0: int, j1: int) -> np.ndarray:
    B = ctx.Xc[j0:j1]
    P = ctx.Xc[i][None, :] * B
    prefix = np.zeros((j1 - j0, ctx.n + 1), dtype=np.float64)
    np.cumsum(P, axis=1, out=prefix[:, 1:])
    cross = prefix[:, ctx.seg_ends] - prefix[:, ctx.seg_starts]
    cross -= (ctx.s1[i] * ctx.inv_len)[None, :] * ctx.s1[j0:j1]
    cross[ctx.zmask[i][None, :] | ctx.zmask[j0:j1]] = 0.0
    return cross


def _clamp(r: np.ndarray) -> None:
    with np.errstate(invalid="ignore"):
        bad = np.abs(r) - 1.0 > UNIT_EXCESS_TOL
    if np.any(bad):
        raise ConsistencyError("correlation magnitude exceeds 1 beyond rounding")
    np.clip(r, -1.0, 1.0, out=r)


def _scan_span(ctx: _Ctx, i: int, j0: int, j1: int):
    """Scan pairs (i, j) for j in [j0, j1); returns per-pair result arrays."""
    J = j1 - j0
    css_ab = _cross_css(ctx, i, j0, j1)
    best = np.full(J, -np.inf)
    best_idx = np.full(J, -1, dtype=np.int64)
    worst = np.full(J, np.inf)
    worst_idx = np.full(J, -1, dtype=np.int64)
    pe = np.full(J, np.nan)
    undef_count = 0

    for blk in ctx.blocks:
        M = blk.matrix
        lo, hi = blk.offset, blk.offset + blk.count
        if ctx.var_sums is not None:
            va = ctx.var_sums[i, lo:hi]
            vb = ctx.var_sums[j0:j1, lo:hi].T
        else:
            va = M.dot(ctx.css[i])
            vb = M.dot(ctx.css[j0:j1].T)
        cov = M.dot(css_ab.T)
        undef = (va[:, None] == 0.0) | (vb == 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            r = cov / np.sqrt(va[:, None] * vb)
        r[undef] = np.nan
        _clamp(r)
        undef_count += int(undef.sum())

        masked = np.where(undef, -np.inf, r)
        arg = masked.argmax(axis=0)
        val = masked[arg, np.arange(J)]
        upd = val > best
        best[upd] = val[upd]
        best_idx[upd] = arg[upd] + lo

        masked = np.where(undef, np.inf, r)
        arg = masked.argmin(axis=0)
        val = masked[arg, np.arange(J)]
        upd = val < worst
        worst[upd] = val[upd]
        worst_idx[upd] = arg[upd] + lo

        if hi == ctx.ncomp:
            pe = r[-1, :].copy()

    hcc = np.where(best_idx >= 0, best, np.nan)
    lcc = np.where(worst_idx >= 0, worst, np.nan)
    return hcc, pe, lcc, best_idx, worst_idx, undef_count


def _filter_mask(clauses, hcc, pe, lcc) -> np.ndarray:
    mask = np.ones(hcc.shape, dtype=bool)
    fields = {"hcc": hcc, "lcc": lcc, "pearson": pe}
    with np.errstate(invalid="ignore"):
        for c in clauses:
            arr = np.abs(pe) if c.field == "abs(pearson)" else fields[c.field]
            mask &= _FILTER_OPS[c.op](arr, c.value)
    return mask


def _chunk_worker(rg: tuple[int, int]):
    ctx = _CTX
    lo, hi = rg
    parts_i, parts_j = [], []
    parts_hcc, parts_pe, parts_lcc = [], [], []
    parts_bi, parts_wi = [], []
    undef_total = 0
    for i, j0, j1 in _runs(ctx.S, lo, hi):
        for js in range(j0, j1, ctx.j_step):
            je = min(j1, js + ctx.j_step)
            hcc, pe, lcc, bi, wi, undef = _scan_span(ctx, i, js, je)
            undef_total += undef
            parts_i.append(np.full(je - js, i, dtype=np.int64))
            parts_j.append(np.arange(js, je, dtype=np.int64))
            parts_hcc.append(hcc)
            parts_pe.append(pe)
            parts_lcc.append(lcc)
            parts_bi.append(bi)
            parts_wi.append(wi)
    i_arr = np.concatenate(parts_i)
    j_arr = np.concatenate(parts_j)
    hcc = np.concatenate(parts_hcc)
    pe = np.concatenate(parts_pe)
    lcc = np.concatenate(parts_lcc)
    bi = np.concatenate(parts_bi)
    wi = np.concatenate(parts_wi)
    keep = _filter_mask(ctx.filter, hcc, pe, lcc)
    return (
        hi - lo,
        undef_total,
        i_arr[keep],
        j_arr[keep],
        hcc[keep],
        pe[keep],
        lcc[keep],
        bi[keep],
        wi[keep],
    )


def _chunk_results(ctx: _Ctx, ranges, workers: int):
    if workers == 1 or len(ranges) <= 1:
        _set_ctx(ctx)
        for rg in ranges:
            yield _chunk_worker(rg)
        return
    with mp.Pool(workers, initializer=_set_ctx, initargs=(ctx,)) as pool:
        yield from pool.imap(_chunk_worker, ranges)


def _as_float(x: float) -> float | None:
    return None if np.isnan(x) else float(x)


class _Unranker:
    """Memoized canonical-index -> composition lookup."""

    def __init__(self, spec: CompositionSpec):
        self.spec = spec
        self.cache: dict[int, tuple[int, ...]] = {}

    def __call__(self, idx: int) -> tuple[int, ...] | None:
        if idx < 0:
            return None
        got = self.cache.get(idx)
        if got is None:
            got = self.cache[idx] = composition_at(self.spec, idx)
        return got


# ---------------------------------------------------------------------------
# public runs

def run_all_pairs(dataset: Dataset, config: JobConfig, sink, progress=None) -> RunSummary:
    """Scan every unordered pair of the dataset, in canonical pair order.

    ``sink`` is called with lists of PairRecord (the pairs that passed the
    filter), in deterministic order regardless of ``config.workers``.
    ``progress`` (optional) is called as progress(done_pairs, total_pairs)
    as chunks complete.
    """
    S = len(dataset)
    if S < 2:
        raise ValueError(f"all-pairs run needs at least 2 series, dataset has {S}")
    spec = CompositionSpec(dataset.n, config.m)
    if _blocks.blocks_for(spec.n, spec.m) is None:
        return _fallback_all_pairs(dataset, config, sink, progress)

    ctx = _Ctx(dataset.matrix, config.m)
    ctx.filter = config.filter
    ids = dataset.ids()
    unrank = _Unranker(ctx.spec)
    total = S * (S - 1) // 2
    ranges = [(lo, min(lo + CHUNK_PAIRS, total)) for lo in range(0, total, CHUNK_PAIRS)]

    t0 = time.perf_counter()
    done = 0
    emitted = 0
    undefined = 0
    for payload in _chunk_results(ctx, ranges, config.workers):
        npairs, undef, i_arr, j_arr, hcc, pe, lcc, bi, wi = payload
        done += npairs
        undefined += undef
        records = [
            PairRecord(
                ids[i], ids[j],
                _as_float(h), _as_float(p), _as_float(l),
                unrank(int(b)), unrank(int(w)),
            )
            for i, j, h, p, l, b, w in zip(i_arr, j_arr, hcc, pe, lcc, bi, wi)
        ]
        emitted += len(records)
        if records:
            sink(records)
        if progress is not None:
            progress(done, total)
    wall = time.perf_counter() - t0
    return RunSummary(
        pairs_scanned=done,
        records_emitted=emitted,
        undefined_values=undefined,
        wall_seconds=wall,
        pairs_per_second=done / wall if wall > 0 else float("inf"),
        workers=config.workers,
    )


def _fallback_all_pairs(dataset, config, sink, progress) -> RunSummary:
    # composition structure too large to materialize: stream per-pair scans
    ids = dataset.ids()
    S = len(dataset)
    total = S * (S - 1) // 2
    t0 = time.perf_counter()
    done = 0
    emitted = 0
    undefined = 0
    batch: list[PairRecord] = []
    for i in range(S):
        for j in range(i + 1, S):
            res = scan(dataset.series[i], dataset.series[j], CompositionSpec(dataset.n, config.m))
            undefined += res.n_undefined
            rec = PairRecord(ids[i], ids[j], res.hcc, res.pearson, res.lcc, res.bcc, res.wcc)
            done += 1
            if _accept(config.filter, rec):
                batch.append(rec)
                emitted += 1
            if len(batch) >= 256:
                sink(batch)
                batch = []
            if progress is not None and done % CHUNK_PAIRS == 0:
                progress(done, total)
    if batch:
        sink(batch)
    if progress is not None:
        progress(done, total)
    wall = time.perf_counter() - t0
    return RunSummary(done, emitted, undefined, wall, done / wall if wall > 0 else float("inf"),
                      config.workers)


def _accept(clauses, rec: PairRecord) -> bool:
    for c in clauses:
        if c.field == "abs(pearson)":
            val = None if rec.pearson is None else abs(rec.pearson)
        else:
            val = getattr(rec, c.field)
        if val is None:
            return False
        ok = {"<": val < c.value, ">": val > c.value,
              "<=": val <= c.value, ">=": val >= c.value}[c.op]
        if not ok:
            return False
    return True


def run_versus_time(dataset: Dataset, config: JobConfig, progress=None) -> list[PairRecord]:
    """Scan each series against time; one record per series, dataset order.

    Uses the dataset's time labels when present, otherwise the index grid
    0..n-1.  Compositional correlation is invariant to affine time
    relabeling, so for evenly spaced labels the two agree.
    """
    if dataset.time_labels is not None:
        t = TimeSeries(TIME_ID, np.asarray(dataset.time_labels, dtype=np.float64))
    else:
        t = TimeSeries(TIME_ID, np.arange(dataset.n, dtype=np.float64))
    spec = CompositionSpec(dataset.n, config.m)
    ids = dataset.ids()

    if _blocks.blocks_for(spec.n, spec.m) is None:
        records = []
        for s in dataset.series:
            res = scan(s, t, spec)
            rec = PairRecord(s.id, TIME_ID, res.hcc, res.pearson, res.lcc, res.bcc, res.wcc)
            if _accept(config.filter, rec):
                records.append(rec)
        return records

    ctx = _Ctx(np.vstack([t.values[None, :], dataset.matrix]), config.m)
    ctx.filter = config.filter
    unrank = _Unranker(ctx.spec)
    total = len(dataset)  # pair indices 0..S-1 are exactly (time, series_j)
    ranges = [(lo, min(lo + CHUNK_PAIRS, total)) for lo in range(0, total, CHUNK_PAIRS)]
    records: list[PairRecord] = []
    done = 0
    for payload in _chunk_results(ctx, ranges, config.workers):
        npairs, _, _, j_arr, hcc, pe, lcc, bi, wi = payload
        done += npairs
        for j, h, p, l, b, w in zip(j_arr, hcc, pe, lcc, bi, wi):
            records.append(
                PairRecord(ids[j - 1], TIME_ID, _as_float(h), _as_float(p), _as_float(l),
                           unrank(int(b)), unrank(int(w)))
            )
        if progress is not None:
            progress(done, total)
    return records


def run_pair(dataset: Dataset, id_a: str, id_b: str, m: int,
             options: ScanOptions = ScanOptions()) -> ScanResult:
    """Full scan of one named pair."""
    return scan(dataset.get(id_a), dataset.get(id_b), CompositionSpec(dataset.n, m), options)


def run_pair_list(dataset: Dataset, pairs, config: JobConfig) -> list[PairRecord]:
    """Scan an explicit list of (id_a, id_b), preserving list order."""
    records = []
    for id_a, id_b in pairs:
        res = run_pair(dataset, id_a, id_b, config.m)
        rec = PairRecord(id_a, id_b, res.hcc, res.pearson, res.lcc, res.bcc, res.wcc)
        if _accept(config.filter, rec):
            records.append(rec)
    return records
