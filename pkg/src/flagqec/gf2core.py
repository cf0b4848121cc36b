"""Dense bit-packed vectors and matrices over GF(2).

Bits are packed little-endian into ``uint64`` words: bit ``j`` of a row lives in
word ``j // 64`` at position ``j % 64``. All objects are immutable once built.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

WORD = 64


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class SingularMatrixError(ValueError):
    """Matrix lacks the rank needed for the requested inverse."""


def _n_words(nbits: int) -> int:
    return max(1, -(-nbits // WORD))


def _pack(bits: np.ndarray) -> np.ndarray:
    """Pack the last axis of a 0/1 array into uint64 words."""
    bits = np.asarray(bits, dtype=np.uint8) & 1
    nbits = bits.shape[-1]
    nw = _n_words(nbits)
    padded = np.zeros(bits.shape[:-1] + (nw * WORD,), dtype=np.uint8)
    padded[..., :nbits] = bits
    as_bytes = np.packbits(padded, axis=-1, bitorder="little")
    return np.ascontiguousarray(as_bytes).view("<u8").reshape(bits.shape[:-1] + (nw,))


def _unpack(words: np.ndarray, nbits: int) -> np.ndarray:
    words = np.ascontiguousarray(words, dtype="<u8")
    as_bytes = words.view(np.uint8).reshape(words.shape[:-1] + (-1,))
    return np.unpackbits(as_bytes, axis=-1, bitorder="little")[..., :nbits]


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


class BitVector:
    """Fixed-length GF(2) vector."""

    __slots__ = ("_words", "_len")

    def __init__(self, bits: Iterable[int] | str | np.ndarray):
        if isinstance(bits, str):
            bits = [int(c) for c in bits if c in "01"]
        arr = np.asarray(list(bits) if not isinstance(bits, np.ndarray) else bits, dtype=np.uint8)
        if arr.ndim != 1:
            raise ShapeError(f"BitVector needs 1-D input, got shape {arr.shape}")
        if arr.size and arr.max() > 1:
            raise ValueError("BitVector entries must be 0 or 1")
        self._len = int(arr.size)
        self._words = _frozen(_pack(arr))

    @classmethod
    def _from_words(cls, words: np.ndarray, length: int) -> BitVector:
        obj = cls.__new__(cls)
        words = np.array(words, dtype=np.uint64, copy=True)
        tail = length % WORD
        if tail:
            words[-1] &= np.uint64((1 << tail) - 1)
        obj._words = _frozen(words)
        obj._len = length
        return obj

    @classmethod
    def zeros(cls, length: int) -> BitVector:
        return cls._from_words(np.zeros(_n_words(length), dtype=np.uint64), length)

    @classmethod
    def ones(cls, length: int) -> BitVector:
        return cls(np.ones(length, dtype=np.uint8))

    @classmethod
    def unit(cls, length: int, index: int) -> BitVector:
        bits = np.zeros(length, dtype=np.uint8)
        bits[index] = 1
        return cls(bits)

    @classmethod
    def from_int(cls, value: int, length: int) -> BitVector:
        """Bit ``i`` of ``value`` becomes entry ``i``."""
        if value < 0 or value >> length:
            raise ValueError(f"{value} does not fit in {length} bits")
        words = [(value >> (WORD * w)) & (2**WORD - 1) for w in range(_n_words(length))]
        return cls._from_words(np.array(words, dtype=np.uint64), length)

    @property
    def words(self) -> np.ndarray:
        return self._words

    def __len__(self) -> int:
        return self._len

    def __getitem__(self, i: int) -> int:
        if not -self._len <= i < self._len:
            raise IndexError(i)
        i %= self._len
        return int((int(self._words[i // WORD]) >> (i % WORD)) & 1)

    def __iter__(self):
        return iter(self.to_array().tolist())

    def _check(self, other: BitVector) -> None:
        if not isinstance(other, BitVector):
            raise TypeError(f"expected BitVector, got {type(other).__name__}")
        if other._len != self._len:
            raise ShapeError(f"length mismatch: {self._len} vs {other._len}")

    def __xor__(self, other: BitVector) -> BitVector:
        self._check(other)
        return BitVector._from_words(self._words ^ other._words, self._len)

    __add__ = __xor__

    def __and__(self, other: BitVector) -> BitVector:
        self._check(other)
        return BitVector._from_words(self._words & other._words, self._len)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitVector):
            return NotImplemented
        return self._len == other._len and bool(np.array_equal(self._words, other._words))

    def __hash__(self) -> int:
        return hash((self._len, self._words.tobytes()))

    def __repr__(self) -> str:
        return f"BitVector('{''.join(map(str, self.to_array()))}')"

    def weight(self) -> int:
        return int(np.bitwise_count(self._words).sum())

    def parity(self) -> int:
        return self.weight() & 1

    def dot(self, other: BitVector) -> int:
        """Inner product over GF(2)."""
        return (self & other).parity()

    def any(self) -> bool:
        return bool(self._words.any())

    def to_array(self) -> np.ndarray:
        return _unpack(self._words, self._len)

    def to_int(self) -> int:
        out = 0
        for w, word in enumerate(self._words.tolist()):
            out |= int(word) << (WORD * w)
        return out

    def support(self) -> list[int]:
        return np.flatnonzero(self.to_array()).tolist()

    def concat(self, *others: BitVector) -> BitVector:
        return BitVector(np.concatenate([self.to_array()] + [o.to_array() for o in others]))


def vec_parity(v: BitVector) -> int:
    """Parity of the number of set bits."""
    return v.parity()


class BitMatrix:
    """Row-major dense GF(2) matrix with rows packed into uint64 words."""

    __slots__ = ("_words", "_rows", "_cols")

    def __init__(self, data: Sequence[Sequence[int]] | np.ndarray, cols: int | None = None):
        arr = np.asarray(data, dtype=np.uint8)
        if arr.ndim == 1 and arr.size == 0:
            arr = arr.reshape(0, cols or 0)
        if arr.ndim != 2:
            raise ShapeError(f"BitMatrix needs 2-D input, got shape {arr.shape}")
        if arr.size and arr.max() > 1:
            raise ValueError("BitMatrix entries must be 0 or 1")
        self._rows, self._cols = arr.shape
        self._words = _frozen(_pack(arr) if self._rows else np.zeros((0, _n_words(self._cols)), np.uint64))

    @classmethod
    def _from_words(cls, words: np.ndarray, rows: int, cols: int) -> BitMatrix:
        obj = cls.__new__(cls)
        obj._words = _frozen(np.array(words, dtype=np.uint64).reshape(rows, _n_words(cols)))
        obj._rows, obj._cols = rows, cols
        return obj

    @classmethod
    def zeros(cls, rows: int, cols: int) -> BitMatrix:
        return cls._from_words(np.zeros((rows, _n_words(cols)), np.uint64), rows, cols)

    @classmethod
    def identity(cls, size: int) -> BitMatrix:
        return cls(np.eye(size, dtype=np.uint8))

    @classmethod
    def from_columns(cls, columns: Sequence[BitVector], rows: int | None = None) -> BitMatrix:
        if not columns:
            return cls.zeros(rows or 0, 0)
        return cls(np.stack([c.to_array() for c in columns], axis=1))

    @classmethod
    def from_rows(cls, rows: Sequence[BitVector]) -> BitMatrix:
        return cls(np.stack([r.to_array() for r in rows], axis=0))

    @property
    def shape(self) -> tuple[int, int]:
        return self._rows, self._cols

    @property
    def rows(self) -> int:
        return self._rows

    @property
    def cols(self) -> int:
        return self._cols

    @property
    def words(self) -> np.ndarray:
        return self._words

    def __getitem__(self, idx: tuple[int, int]) -> int:
        i, j = idx
        return int((int(self._words[i, j // WORD]) >> (j % WORD)) & 1)

    def row(self, i: int) -> BitVector:
        return BitVector._from_words(self._words[i], self._cols)

    def column(self, j: int) -> BitVector:
        return BitVector(self.to_array()[:, j])

    def columns(self) -> list[BitVector]:
        arr = self.to_array()
        return [BitVector(arr[:, j]) for j in range(self._cols)]

    def to_array(self) -> np.ndarray:
        if not self._rows:
            return np.zeros((0, self._cols), dtype=np.uint8)
        return _unpack(self._words, self._cols)

    def transpose(self) -> BitMatrix:
        return BitMatrix(self.to_array().T)

    T = property(transpose)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BitMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._words, other._words))

    def __hash__(self) -> int:
        return hash((self.shape, self._words.tobytes()))

    def __repr__(self) -> str:
        body = "\n ".join("".join(map(str, r)) for r in self.to_array())
        return f"BitMatrix({self._rows}x{self._cols}:\n {body})"

    def __xor__(self, other: BitMatrix) -> BitMatrix:
        if self.shape != other.shape:
            raise ShapeError(f"shape mismatch: {self.shape} vs {other.shape}")
        return BitMatrix._from_words(self._words ^ other._words, *self.shape)

    __add__ = __xor__

    def __matmul__(self, other):
        if isinstance(other, BitMatrix):
            return mat_mul(self, other)
        if isinstance(other, BitVector):
            return mat_vec(self, other)
        return NotImplemented

    def hstack(self, *others: BitMatrix) -> BitMatrix:
        return BitMatrix(np.hstack([self.to_array()] + [o.to_array() for o in others]))

    def vstack(self, *others: BitMatrix) -> BitMatrix:
        return BitMatrix(np.vstack([self.to_array()] + [o.to_array() for o in others]))

    def submatrix(self, rows: slice = slice(None), cols: slice = slice(None)) -> BitMatrix:
        return BitMatrix(self.to_array()[rows, cols])


def mat_mul(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    """Product over GF(2): row ``i`` of the result is the XOR of the rows of ``b``
    selected by row ``i`` of ``a``."""
    if a.cols != b.rows:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    out = np.zeros((a.rows, _n_words(b.cols)), dtype=np.uint64)
    a_bits = a.to_array().astype(bool)
    for i in range(a.rows):
        sel = b.words[a_bits[i]]
        if len(sel):
            out[i] = np.bitwise_xor.reduce(sel, axis=0)
    return BitMatrix._from_words(out, a.rows, b.cols)


def mat_vec(a: BitMatrix, v: BitVector) -> BitVector:
    if a.cols != len(v):
        raise ShapeError(f"cannot multiply {a.shape} by vector of length {len(v)}")
    if not a.rows:
        return BitVector.zeros(0)
    bits = (np.bitwise_count(a.words & v.words).sum(axis=1) & 1).astype(np.uint8)
    return BitVector(bits)


def direct_sum(blocks: Sequence[BitMatrix]) -> BitMatrix:
    rows = sum(b.rows for b in blocks)
    cols = sum(b.cols for b in blocks)
    out = np.zeros((rows, cols), dtype=np.uint8)
    r = c = 0
    for b in blocks:
        out[r : r + b.rows, c : c + b.cols] = b.to_array()
        r += b.rows
        c += b.cols
    return BitMatrix(out)


def right_inverse(h: BitMatrix) -> BitMatrix:
    """Return ``R`` with ``h @ R == I``.

    Gauss-Jordan elimination picks, for each successive row, the lowest-index
    column that still has a pivot available, so the result is deterministic.

    Raises:
        SingularMatrixError: if ``h`` does not have full row rank.
    """
    m, n = h.shape
    work = np.concatenate([h.to_array(), np.eye(m, dtype=np.uint8)], axis=1)
    pivots: list[int] = []
    row = 0
    for col in range(n):
        if row == m:
            break
        hits = np.flatnonzero(work[row:, col])
        if not hits.size:
            continue
        p = row + hits[0]
        if p != row:
            work[[row, p]] = work[[p, row]]
        others = np.flatnonzero(work[:, col])
        others = others[others != row]
        work[others] ^= work[row]
        pivots.append(col)
        row += 1
    if row < m:
        raise SingularMatrixError(f"matrix of shape {h.shape} has rank {row} < {m}")
    transform = work[:, n:]
    r = np.zeros((n, m), dtype=np.uint8)
    r[pivots] = transform
    return BitMatrix(r)


def rank(h: BitMatrix) -> int:
    work = h.to_array().copy()
    m, n = work.shape
    row = 0
    for col in range(n):
        if row == m:
            break
        hits = np.flatnonzero(work[row:, col])
        if not hits.size:
            continue
        p = row + hits[0]
        work[[row, p]] = work[[p, row]]
        below = np.flatnonzero(work[row + 1 :, col]) + row + 1
        work[below] ^= work[row]
        row += 1
    return row
