"""Compact lookup tables over full syndromes and their Meet-in-the-Middle extension.

A full syndrome is the pair ``(s, F)`` of generator bits and cumulative flag
bits. Internally it is packed into one integer key: syndrome bit ``i`` at
position ``i`` and flag bit ``i`` at position ``r + i``.

The table is built by XOR-ing every combination of up to ``t`` distinct
fault-check-matrix columns. Combinations are enumerated level by level: the
level-``m`` values are grouped by their largest column index ``j``, so the
level-``m`` block for ``j`` is the prefix of level ``m - 1`` whose largest index
is below ``j``, XOR-ed with column ``j``. Each value is packed as
``key << 4 | weight << 1 | class`` so that one in-place sort orders entries by
key and then by weight.
"""

from __future__ import annotations

import io
import logging
import struct
import time
from dataclasses import dataclass
from math import comb
from pathlib import Path
from typing import BinaryIO, Iterator, NamedTuple

import numpy as np

from .codes import CssCode, canonical_recovery
from .faultcode import FaultCheckMatrix, unique_columns
from .gf2core import BitVector, ShapeError

log = logging.getLogger(__name__)

MAGIC = b"FQLT"
FORMAT_VERSION = 1
DEFAULT_MAX_ENTRIES = 2**31
MAX_PACKED_R = 30
MAX_PACKED_T = 7
_CHUNK = 1 << 23
_FILTER_MIN_PROBES = 1 << 16
_HASH_MULTS = tuple(np.uint64(m) for m in (0x9E3779B97F4A7C15, 0xC2B2AE3D27D4EB4F, 0xD6E8FEB86659FD93))


class DistinguishabilityError(Exception):
    """Two fault combinations of weight at most ``t`` share a full syndrome but
    differ in logical class."""

    def __init__(self, report: DistinguishabilityReport):
        super().__init__(f"fault set not distinguishable at t={report.t_eff + 1}: witness {report.conflict_witness}")
        self.report = report


class ResourceLimitError(RuntimeError):
    """The enumeration would exceed the configured entry cap."""


class FullSyndrome(NamedTuple):
    """Generator bits ``s`` and cumulative flag bits ``f``."""

    s: BitVector
    f: BitVector

    def key(self) -> int:
        return self.s.to_int() | (self.f.to_int() << len(self.s))

    @classmethod
    def from_key(cls, key: int, r: int) -> FullSyndrome:
        mask = (1 << r) - 1
        return cls(BitVector.from_int(key & mask, r), BitVector.from_int((key >> r) & mask, r))

    def __xor__(self, other: FullSyndrome) -> FullSyndrome:
        return FullSyndrome(self.s ^ other.s, self.f ^ other.f)


class CacheEntry(NamedTuple):
    logical_class: int
    weight: int


@dataclass(frozen=True)
class DistinguishabilityReport:
    """Outcome of a distinguishability check.

    Attributes:
        distinguishable: Whether the fault set of weight ``t`` is distinguishable.
        t_eff: Largest radius that is distinguishable (``t`` on success).
        conflict_witness: Two fault combinations, as column-index tuples of the
            fault check matrix, sharing a full syndrome but not a logical class.
    """

    distinguishable: bool
    t_eff: int
    conflict_witness: tuple[tuple[int, ...], tuple[int, ...]] | None = None

    @property
    def d_eff(self) -> int:
        """Effective distance implied by ``t_eff`` (a lower bound when distinguishable)."""
        return 2 * self.t_eff + 1


@dataclass(frozen=True)
class MetricsRecord:
    columns: int
    unique_columns: int
    fault_combinations: int
    cache_size: int
    build_seconds: float
    table_bytes: int


class LookupTable:
    """Sorted packed keys with one metadata byte per entry.

    The metadata byte stores the logical class in bit 0 and the weight in
    bits 1..7, matching the on-disk format.
    """

    def __init__(self, keys: np.ndarray, meta: np.ndarray, n: int, r: int, t: int):
        keys = np.asarray(keys, dtype=np.uint64)
        meta = np.asarray(meta, dtype=np.uint8)
        if keys.shape != meta.shape or keys.ndim != 1:
            raise ShapeError("keys and metadata must be equal-length 1-D arrays")
        if len(keys) > 1 and not (keys[1:] > keys[:-1]).all():
            raise ValueError("keys must be strictly increasing")
        self.keys = keys
        self.meta = meta
        self.n, self.r, self.t = n, r, t
        self.build_seconds = 0.0
        self.combinations = 0
        self.unique_columns = 0
        self.columns = 0
        self._filter: np.ndarray | None = None
        self._filter_shift = np.uint64(0)

    def __len__(self) -> int:
        return len(self.keys)

    def __contains__(self, sigma: FullSyndrome | int) -> bool:
        return self.get(sigma) is not None

    def get(self, sigma: FullSyndrome | int) -> CacheEntry | None:
        key = sigma if isinstance(sigma, (int, np.integer)) else sigma.key()
        i = int(np.searchsorted(self.keys, np.uint64(key)))
        if i < len(self.keys) and int(self.keys[i]) == key:
            m = int(self.meta[i])
            return CacheEntry(m & 1, m >> 1)
        return None

    def lookup_many(self, keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized probe.

        Returns:
            ``(found, classes)`` boolean and uint8 arrays; classes are 0 where
            the key is absent.
        """
        keys = np.asarray(keys, dtype=np.uint64)
        idx = np.searchsorted(self.keys, keys)
        idx_c = np.minimum(idx, len(self.keys) - 1)
        found = self.keys[idx_c] == keys
        classes = np.where(found, self.meta[idx_c] & 1, 0).astype(np.uint8)
        return found, classes

    def _build_filter(self) -> np.ndarray:
        # One bitmap with about 32 bits per key, probed at three independent
        # hash positions: roughly 3% of absent keys pass the first position
        # and under 0.1% pass all three.
        bits = max(16, min(32, int(len(self.keys)).bit_length() + 5))
        self._filter_shift = np.uint64(64 - bits)
        words = np.zeros(1 << (bits - 6), dtype=np.uint64)
        for start in range(0, len(self.keys), _CHUNK):
            block = self.keys[start : start + _CHUNK]
            for mult in _HASH_MULTS:
                h = (block * mult) >> self._filter_shift
                np.bitwise_or.at(words, h >> np.uint64(6), np.uint64(1) << (h & np.uint64(63)))
        self._filter = words
        return words

    def _screen(self, keys: np.ndarray) -> np.ndarray:
        """Indices of ``keys`` that may be present (no false negatives)."""
        words = self._filter if self._filter is not None else self._build_filter()
        idx = np.arange(len(keys))
        for mult in _HASH_MULTS:
            h = (keys[idx] * mult) >> self._filter_shift
            idx = idx[((words[h >> np.uint64(6)] >> (h & np.uint64(63))) & np.uint64(1)).astype(bool)]
            if not idx.size:
                break
        return idx

    def first_found(self, keys: np.ndarray) -> tuple[int, int] | None:
        """Position and logical class of the first key present in the table.

        Large batches are screened by a hashed bitmap before the exact
        search, which does not change which key is found first.
        """
        keys = np.asarray(keys, dtype=np.uint64)
        if len(keys) >= _FILTER_MIN_PROBES and len(self.keys):
            maybe = self._screen(keys)
            found, classes = self.lookup_many(keys[maybe])
            hit = np.flatnonzero(found)
            return (int(maybe[hit[0]]), int(classes[hit[0]])) if hit.size else None
        found, classes = self.lookup_many(keys)
        hit = np.flatnonzero(found)
        return (int(hit[0]), int(classes[hit[0]])) if hit.size else None

    def entries(self) -> Iterator[tuple[FullSyndrome, CacheEntry]]:
        for k, m in zip(self.keys.tolist(), self.meta.tolist()):
            yield FullSyndrome.from_key(int(k), self.r), CacheEntry(m & 1, m >> 1)

    @property
    def nbytes(self) -> int:
        return self.keys.nbytes + self.meta.nbytes

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LookupTable):
            return NotImplemented
        return (
            (self.n, self.r, self.t) == (other.n, other.r, other.t)
            and np.array_equal(self.keys, other.keys)
            and np.array_equal(self.meta, other.meta)
        )

    def __repr__(self) -> str:
        return f"LookupTable(n={self.n}, r={self.r}, t={self.t}, entries={len(self)})"


def _packed_columns(hf: FaultCheckMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Distinct columns as ``key << 4 | class`` plus their representative indices."""
    if hf.r > MAX_PACKED_R:
        raise ValueError(f"packed keys support r <= {MAX_PACKED_R}, got r={hf.r}")
    _, reps, _ = unique_columns(hf)
    packed = (hf.keys[reps] << np.uint64(4)) | hf.classes[reps].astype(np.uint64)
    return packed, reps


def _level_sizes(n_vals: int, m: int) -> np.ndarray:
    """Number of level-``m`` combinations whose largest index is ``j``, per ``j``."""
    return np.array([comb(j, m - 1) for j in range(n_vals)], dtype=np.int64)


def combination_levels(vals: np.ndarray, depth: int) -> Iterator[np.ndarray]:
    """Yield the XOR of every ``m``-subset of ``vals`` for ``m = 1..depth``.

    Subsets appear grouped by largest index, then recursively in the same
    order for the remaining indices (colexicographic order).
    """
    prev = None
    for m in range(1, depth + 1):
        if m == 1:
            cur = vals.copy()
        else:
            sizes = _level_sizes(len(vals), m)
            cur = np.empty(int(sizes.sum()), dtype=vals.dtype)
            pos = 0
            for j, cnt in enumerate(sizes.tolist()):
                if cnt:
                    np.bitwise_xor(prev[:cnt], vals[j], out=cur[pos : pos + cnt])
                    pos += cnt
        yield cur
        prev = cur


def _lex_extend(vals: np.ndarray, prev: np.ndarray | None, m: int) -> np.ndarray:
    """Level ``m`` in lexicographic order, from level ``m - 1`` in the same order.

    The ``(m-1)``-subsets whose indices all exceed ``i`` form a suffix of the
    previous level, so the block for smallest index ``i`` is that suffix XOR
    column ``i``.
    """
    if m == 1:
        return vals.copy()
    n = len(vals)
    out = np.empty(comb(n, m), dtype=vals.dtype)
    pos = 0
    for i in range(n - m + 1):
        tail = comb(n - 1 - i, m - 1)
        np.bitwise_xor(prev[len(prev) - tail :], vals[i], out=out[pos : pos + tail])
        pos += tail
    return out


def _colex_unrank(index: int, m: int) -> tuple[int, ...]:
    """Subset at position ``index`` among ``m``-subsets in colexicographic order."""
    out = []
    for k in range(m, 0, -1):
        j = k - 1
        while comb(j + 1, k) <= index:
            j += 1
        out.append(j)
        index -= comb(j, k)
    return tuple(sorted(out))


def _find_subset(vals: np.ndarray, target: int, max_weight: int) -> tuple[int, ...] | None:
    """Smallest-weight subset of ``vals`` whose XOR equals ``target``."""
    if target == 0:
        return ()
    for m, level in enumerate(combination_levels(vals, max_weight), start=1):
        hit = np.flatnonzero(level == np.uint64(target))
        if hit.size:
            return _colex_unrank(int(hit[0]), m)
    return None


def _witness(vals: np.ndarray, reps: np.ndarray, key: int, t: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Two column sets reaching ``key``, one per logical class."""
    pair = [_find_subset(vals, (key << 4) | c, t) for c in (0, 1)]
    return tuple(tuple(int(reps[i]) for i in sub or ()) for sub in pair)


def _scan_groups(packed: np.ndarray) -> tuple[int, int | None]:
    """Count distinct keys in sorted ``packed`` and find a class conflict, if any."""
    count = 0
    prev_key = None
    prev_class = None
    for a in range(0, len(packed), _CHUNK):
        chunk = packed[a : a + _CHUNK]
        keys = chunk >> np.uint64(4)
        cls = (chunk & np.uint64(1)).astype(np.uint8)
        new = np.empty(len(chunk), dtype=bool)
        new[0] = prev_key is None or keys[0] != prev_key
        np.not_equal(keys[1:], keys[:-1], out=new[1:])
        count += int(new.sum())
        starts = np.flatnonzero(new)
        first_class = np.empty(len(chunk), dtype=np.uint8)
        if starts.size == 0 or starts[0] != 0:
            first_class[: starts[0] if starts.size else len(chunk)] = prev_class
        if starts.size:
            lengths = np.diff(np.append(starts, len(chunk)))
            first_class[starts[0] :] = np.repeat(cls[starts], lengths)
        bad = np.flatnonzero(first_class != cls)
        if bad.size:
            return count, int(keys[bad[0]])
        prev_key = keys[-1]
        prev_class = first_class[-1]
    return count, None


def _compress(packed: np.ndarray, count: int) -> tuple[np.ndarray, np.ndarray]:
    keys_out = np.empty(count, dtype=np.uint64)
    meta_out = np.empty(count, dtype=np.uint8)
    pos = 0
    prev_key = None
    for a in range(0, len(packed), _CHUNK):
        chunk = packed[a : a + _CHUNK]
        keys = chunk >> np.uint64(4)
        new = np.empty(len(chunk), dtype=bool)
        new[0] = prev_key is None or keys[0] != prev_key
        np.not_equal(keys[1:], keys[:-1], out=new[1:])
        sel = chunk[new]
        keys_out[pos : pos + len(sel)] = sel >> np.uint64(4)
        meta_out[pos : pos + len(sel)] = (sel & np.uint64(15)).astype(np.uint8)
        pos += len(sel)
        prev_key = keys[-1]
    return keys_out, meta_out


def count_fault_combinations(n_unique: int, t: int) -> int:
    """Number of non-empty combinations of at most ``t`` distinct unique columns;
    the empty build (``t = 0``) counts as one combination."""
    if t == 0:
        return 1
    return sum(comb(n_unique, i) for i in range(1, t + 1))


def build_cache(hf: FaultCheckMatrix, t: int, max_entries: int = DEFAULT_MAX_ENTRIES) -> LookupTable:
    """Build the lookup table of search radius ``t``.

    Entries with the same key keep the smallest weight. The all-zero key is
    always present with class 0 and weight 0.

    Raises:
        DistinguishabilityError: if two combinations share a key but not a class.
        ResourceLimitError: if more than ``max_entries`` combinations would be built.
        ValueError: if ``t`` is negative or too large for the packed layout.
    """
    if t < 0 or t > MAX_PACKED_T:
        raise ValueError(f"search radius must be in 0..{MAX_PACKED_T}, got {t}")
    start = time.perf_counter()
    vals, reps = _packed_columns(hf)
    total = count_fault_combinations(len(vals), t)
    if total > max_entries:
        raise ResourceLimitError(f"{total} fault combinations exceed the cap of {max_entries}")
    n_packed = 1 + (total if t else 0)
    packed = np.empty(n_packed, dtype=np.uint64)
    packed[0] = 0
    pos = 1
    if t:
        for m, level in enumerate(combination_levels(vals, t), start=1):
            seg = packed[pos : pos + len(level)]
            np.bitwise_or(level, np.uint64(m << 1), out=seg)
            pos += len(level)
            log.debug("level %d: %d combinations", m, len(level))
    packed.sort()
    count, conflict = _scan_groups(packed)
    if conflict is not None:
        del packed
        t_eff = _distinguishable_radius(vals, t)
        witness = _witness(vals, reps, conflict, t)
        raise DistinguishabilityError(DistinguishabilityReport(False, t_eff, witness))
    keys, meta = _compress(packed, count)
    del packed
    table = LookupTable(keys, meta, hf.code.n, hf.r, t)
    table.build_seconds = time.perf_counter() - start
    table.combinations = total
    table.unique_columns = len(vals)
    table.columns = hf.n_columns
    return table


def _distinguishable_radius(vals: np.ndarray, t: int) -> int:
    """Largest ``t' < t`` whose combinations are conflict-free."""
    for tp in range(t - 1, 0, -1):
        parts = [np.zeros(1, np.uint64)] + [lvl | np.uint64(m << 1) for m, lvl in enumerate(combination_levels(vals, tp), 1)]
        packed = np.concatenate(parts)
        packed.sort()
        if _scan_groups(packed)[1] is None:
            return tp
    return 0


def verify_distinguishability(hf: FaultCheckMatrix, t: int, max_entries: int = DEFAULT_MAX_ENTRIES) -> DistinguishabilityReport:
    """Check whether every fault combination of weight at most ``t`` is distinguishable."""
    try:
        build_cache(hf, t, max_entries)
    except DistinguishabilityError as err:
        return err.report
    return DistinguishabilityReport(True, t)


def _recovery(code: CssCode, s: BitVector, logical_class: int) -> BitVector:
    cro = canonical_recovery(code, s)
    return cro ^ code.logical_j if logical_class else cro


def decode(table: LookupTable, code: CssCode, sigma: FullSyndrome) -> BitVector:
    """Recovery for a full syndrome: the class-corrected operator when the key is
    in the table, otherwise the canonical recovery."""
    if len(sigma.s) != code.r or len(sigma.f) != code.r:
        raise ShapeError(f"full syndrome parts must have length {code.r}")
    entry = table.get(sigma)
    return _recovery(code, sigma.s, entry.logical_class if entry else 0)


class MimSearcher:
    """Runtime search that bridges a missing full syndrome to a table entry.

    Probes are ``sigma XOR c`` for fault combinations ``c`` of ``1..rho``
    distinct non-trivial unique columns (in first-appearance order), visited by
    weight and then in lexicographic index order. The first probe found in the
    table decides the logical class.
    """

    def __init__(self, table: LookupTable, hf: FaultCheckMatrix, rho: int | None = None):
        rho = table.t if rho is None else rho
        if not 0 <= rho <= MAX_PACKED_T:
            raise ValueError(f"MIM radius must be in 0..{MAX_PACKED_T}, got {rho}")
        vals, _ = _packed_columns(hf)
        self.vals = vals[vals != 0]
        self.table = table
        self.rho = rho
        self._levels: list[np.ndarray] = []

    def _level(self, m: int) -> np.ndarray:
        while len(self._levels) < m:
            self._levels.append(_lex_extend(self.vals, self._levels[-1] if self._levels else None, len(self._levels) + 1))
        return self._levels[m - 1]

    def _probe(self, key: int, cand: np.ndarray) -> int | None:
        hit = self.table.first_found((cand >> np.uint64(4)) ^ np.uint64(key))
        if hit is None:
            return None
        i, cls = hit
        return cls ^ int(cand[i] & np.uint64(1))

    def search(self, key: int) -> tuple[int, int] | None:
        """Logical class and bridging radius for ``key``, or ``None`` if no probe hits."""
        entry = self.table.get(key)
        if entry is not None:
            return entry.logical_class, 0
        n_vals = len(self.vals)
        for m in range(1, self.rho + 1):
            if comb(n_vals, m) <= _CHUNK:
                res = self._probe(key, self._level(m))
            else:
                # Chunk by smallest index; each chunk is a suffix of level m - 1.
                prev = self._level(m - 1)
                res = None
                for i in range(n_vals - m + 1):
                    tail = comb(n_vals - 1 - i, m - 1)
                    if (res := self._probe(key, prev[len(prev) - tail :] ^ self.vals[i])) is not None:
                        break
            if res is not None:
                return res, m
        return None

    def logical_class(self, key: int) -> int:
        res = self.search(key)
        return res[0] if res else 0


def mim_decode(table: LookupTable, hf: FaultCheckMatrix, code: CssCode, sigma: FullSyndrome, rho: int | None = None,
               searcher: MimSearcher | None = None) -> BitVector:
    """Recovery using the table, falling back to a Meet-in-the-Middle search of
    radius ``rho``; the canonical recovery is returned if the search fails."""
    if len(sigma.s) != code.r or len(sigma.f) != code.r:
        raise ShapeError(f"full syndrome parts must have length {code.r}")
    searcher = searcher or MimSearcher(table, hf, rho)
    return _recovery(code, sigma.s, searcher.logical_class(sigma.key()))


def memory_metrics(table: LookupTable, hf: FaultCheckMatrix) -> MetricsRecord:
    n_unique = table.unique_columns or unique_columns(hf)[0]
    return MetricsRecord(
        columns=hf.n_columns,
        unique_columns=n_unique,
        fault_combinations=count_fault_combinations(n_unique, table.t),
        cache_size=len(table),
        build_seconds=table.build_seconds,
        table_bytes=table.nbytes,
    )


def _key_bytes(r: int) -> int:
    return -(-2 * r // 8)


def dump_table(table: LookupTable, fh: BinaryIO | str | Path) -> None:
    """Write the binary table format (little-endian, see module docs)."""
    if isinstance(fh, (str, Path)):
        with open(fh, "wb") as f:
            return dump_table(table, f)
    fh.write(MAGIC)
    fh.write(struct.pack("<B3IQ", FORMAT_VERSION, table.n, table.r, table.t, len(table)))
    nb = _key_bytes(table.r)
    key_bytes = table.keys.astype("<u8").view(np.uint8).reshape(-1, 8)[:, :nb]
    fh.write(np.hstack([key_bytes, table.meta[:, None]]).tobytes())


def load_table(fh: BinaryIO | str | Path) -> LookupTable:
    if isinstance(fh, (str, Path)):
        with open(fh, "rb") as f:
            return load_table(f)
    if fh.read(4) != MAGIC:
        raise ValueError("not a lookup table file (bad magic)")
    header = fh.read(struct.calcsize("<B3IQ"))
    version, n, r, t, count = struct.unpack("<B3IQ", header)
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported table format version {version}")
    nb = _key_bytes(r)
    raw = np.frombuffer(fh.read(count * (nb + 1)), dtype=np.uint8)
    if raw.size != count * (nb + 1):
        raise ValueError("truncated lookup table file")
    raw = raw.reshape(count, nb + 1)
    padded = np.zeros((count, 8), dtype=np.uint8)
    padded[:, :nb] = raw[:, :nb]
    keys = padded.view("<u8").reshape(count).astype(np.uint64)
    return LookupTable(keys, raw[:, nb].copy(), n, r, t)


def table_to_bytes(table: LookupTable) -> bytes:
    buf = io.BytesIO()
    dump_table(table, buf)
    return buf.getvalue()
