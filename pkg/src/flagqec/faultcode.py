"""Fault check matrices for single-flag syndrome extraction circuits.

Each column of a fault check matrix describes one fault location by the full
syndrome it produces (generator bits and cumulative flag bits) together with
the logical class of the data error it leaves behind. Only one Pauli type is
modelled; for a self-orthogonal code the other type is identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .codes import CssCode
from .gf2core import BitMatrix, BitVector, ShapeError, direct_sum, mat_mul


class OrderingError(ValueError):
    """A CNOT ordering is not a permutation of its generator's support."""


class FaultLocation(NamedTuple):
    """Where a fault column comes from.

    ``kind`` is ``"data"`` (``index`` = qubit), ``"flag"`` (``index`` =
    generator) or ``"gate"`` (``index`` = generator, ``slot`` = column within
    that generator's circuit, counting flag CNOTs).
    """

    kind: str
    index: int
    slot: int = -1


@dataclass(frozen=True)
class CnotOrdering:
    """Data-qubit order of the CNOTs in each generator's extraction circuit."""

    perms: tuple[tuple[int, ...], ...]

    @classmethod
    def default(cls, code: CssCode) -> CnotOrdering:
        """Ascending qubit index within each generator."""
        return cls(tuple(tuple(sup) for sup in code.supports))

    @classmethod
    def from_lists(cls, perms: Sequence[Sequence[int]]) -> CnotOrdering:
        return cls(tuple(tuple(int(q) for q in p) for p in perms))

    @classmethod
    def read(cls, path: str | Path) -> CnotOrdering:
        """One line per generator, 0-based qubit indices in CNOT order."""
        lines = [ln.split("#")[0].strip() for ln in Path(path).read_text().splitlines()]
        return cls.from_lists([[int(tok) for tok in ln.split()] for ln in lines if ln])

    def validate(self, code: CssCode) -> None:
        if len(self.perms) != code.r:
            raise OrderingError(f"ordering has {len(self.perms)} entries, code has {code.r} generators")
        for i, (perm, sup) in enumerate(zip(self.perms, code.supports)):
            if len(perm) != len(sup) or sorted(perm) != sup:
                raise OrderingError(f"ordering {list(perm)} is not a permutation of generator {i} support {sup}")

    def weights(self) -> list[int]:
        return [len(p) for p in self.perms]


class FaultCheckMatrix:
    """Column-per-fault map to (syndrome, cumulative flags, logical class).

    Rows ``0..r-1`` are generator bits, rows ``r..2r-1`` flag bits and row
    ``2r`` the logical class.

    Attributes:
        matrix: The full ``(2r + 1) x N`` matrix.
        provenance: One :class:`FaultLocation` per column.
        data_errors: ``n x N`` matrix of the data error left by each fault.
    """

    def __init__(self, code: CssCode, matrix: BitMatrix, provenance: Sequence[FaultLocation], data_errors: BitMatrix):
        if matrix.rows != 2 * code.r + 1 or matrix.cols != len(provenance):
            raise ShapeError("fault check matrix shape does not match code and provenance")
        self.code = code
        self.matrix = matrix
        self.provenance = tuple(provenance)
        self.data_errors = data_errors
        arr = matrix.to_array()
        r = code.r
        self._keys = None
        if 2 * r <= 64:
            weights = np.uint64(1) << np.arange(2 * r, dtype=np.uint64)
            self._keys = (arr[: 2 * r].astype(np.uint64) * weights[:, None]).sum(axis=0, dtype=np.uint64)
            self._keys.flags.writeable = False
        self._classes = arr[2 * r].astype(np.uint8)
        self._classes.flags.writeable = False

    @property
    def r(self) -> int:
        return self.code.r

    @property
    def n_columns(self) -> int:
        return self.matrix.cols

    @property
    def generator_rows(self) -> BitMatrix:
        return self.matrix.submatrix(rows=slice(0, self.r))

    @property
    def flag_rows(self) -> BitMatrix:
        return self.matrix.submatrix(rows=slice(self.r, 2 * self.r))

    @property
    def logical_row(self) -> BitVector:
        return self.matrix.row(2 * self.r)

    @property
    def keys(self) -> np.ndarray:
        """Packed full syndrome per column: syndrome in bits ``0..r-1``, flags above.

        Only meaningful while ``2r <= 64``.
        """
        if self._keys is None:
            raise ValueError("packed keys need 2r <= 64")
        return self._keys

    @property
    def classes(self) -> np.ndarray:
        return self._classes

    def to_text(self) -> str:
        """Human-readable dump with a provenance header line per column."""
        head = " ".join(f"{p.kind}:{p.index}" + (f":{p.slot}" if p.slot >= 0 else "") for p in self.provenance)
        arr = self.matrix.to_array()
        rows = ["".join(map(str, row)) for row in arr]
        r = self.r
        return "\n".join([f"# columns {head}", "# generator rows", *rows[:r], "# flag rows", *rows[r : 2 * r], "# logical row", rows[2 * r]]) + "\n"


def build_propagator(code: CssCode, ordering: CnotOrdering) -> BitMatrix:
    """Propagator ``P``: one column per CNOT of every extraction circuit.

    Data CNOTs carry a 1 at their control qubit; the two flag CNOTs (second
    and second-to-last positions) carry a 1 at the generator's flag row.
    """
    ordering.validate(code)
    n, r = code.n, code.r
    blocks = []
    for i, perm in enumerate(ordering.perms):
        rows = [q for q in perm]
        rows.insert(1, n + i)
        rows.insert(len(rows) - 1, n + i)
        block = np.zeros((n + r, len(rows)), dtype=np.uint8)
        block[rows, np.arange(len(rows))] = 1
        blocks.append(block)
    return BitMatrix(np.concatenate(blocks, axis=1))


def build_aggregator(ordering: CnotOrdering) -> BitMatrix:
    """Block-diagonal aggregator with lower-triangular all-ones blocks."""
    return direct_sum([BitMatrix(np.tril(np.ones((w + 2, w + 2), dtype=np.uint8))) for w in ordering.weights()])


def build_fault_check_matrix(code: CssCode, ordering: CnotOrdering | None = None) -> FaultCheckMatrix:
    """Assemble the data, flag and gate-fault column groups."""
    ordering = ordering or CnotOrdering.default(code)
    ordering.validate(code)
    n, r = code.n, code.r
    h = code.h.to_array()
    h_inv = code.h_inv.to_array()

    def classes_of(errors: np.ndarray) -> np.ndarray:
        cro = (h_inv.astype(np.int64) @ ((h.astype(np.int64) @ errors) % 2)) % 2
        return ((errors + cro) % 2).sum(axis=0) % 2

    data_err = np.eye(n, dtype=np.uint8)
    data_cols = np.vstack([h, np.zeros((r, n), np.uint8), classes_of(data_err)[None]])

    flag_cols = np.vstack([np.zeros((r, r), np.uint8), np.eye(r, dtype=np.uint8), np.zeros((1, r), np.uint8)])

    pa = mat_mul(build_propagator(code, ordering), build_aggregator(ordering)).to_array()
    omega, phi = pa[:n], pa[n:]
    s = (h.astype(np.int64) @ omega) % 2
    theta = (h_inv.astype(np.int64) @ s) % 2
    logical = ((omega + theta) % 2).sum(axis=0) % 2
    gate_cols = np.vstack([s, phi, logical[None]]).astype(np.uint8)

    provenance = [FaultLocation("data", q) for q in range(n)]
    provenance += [FaultLocation("flag", i) for i in range(r)]
    for i, w in enumerate(ordering.weights()):
        provenance += [FaultLocation("gate", i, j) for j in range(w + 2)]

    errors = np.hstack([data_err, np.zeros((n, r), np.uint8), omega.astype(np.uint8)])
    matrix = BitMatrix(np.hstack([data_cols, flag_cols, gate_cols]))
    return FaultCheckMatrix(code, matrix, provenance, BitMatrix(errors))


def unique_columns(hf: FaultCheckMatrix) -> tuple[int, np.ndarray, np.ndarray]:
    """Deduplicate full columns (generator, flag and logical rows).

    Returns:
        ``(count, representatives, inverse)``: the number of distinct columns,
        the index of the first column holding each distinct value (in order of
        first appearance), and for every column the position of its
        representative.
    """
    arr = hf.matrix.to_array().T
    _, first, inverse = np.unique(arr, axis=0, return_index=True, return_inverse=True)
    order = np.argsort(first, kind="stable")
    rank_of = np.empty_like(order)
    rank_of[order] = np.arange(len(order))
    return len(first), first[order], rank_of[inverse.ravel()]


def fault_vector_outcome(hf: FaultCheckMatrix, v: BitVector) -> tuple[BitVector, BitVector, int]:
    """Outcome ``H_f v`` split into (syndrome, cumulative flags, logical class)."""
    if len(v) != hf.n_columns:
        raise ShapeError(f"fault vector length {len(v)} != {hf.n_columns}")
    out = (hf.matrix @ v).to_array()
    r = hf.r
    return BitVector(out[:r]), BitVector(out[r : 2 * r]), int(out[2 * r])
