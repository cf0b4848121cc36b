"""Self-orthogonal CSS codes and the hexagonal (6.6.6) color-code family."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .gf2core import BitMatrix, BitVector, ShapeError, mat_vec, rank, right_inverse

VALIDATED_DISTANCES = (3, 5, 7, 9)


class CodeError(ValueError):
    """Raised when a check matrix violates the self-orthogonal CSS invariants."""


@dataclass(frozen=True)
class PlaquetteLayout:
    """Geometry of a color-code patch.

    Attributes:
        vertices: ``(x, y)`` lattice coordinates of each qubit, in qubit order.
        plaquettes: Qubit supports of the plaquettes, in generator order.
        centers: ``(x, y)`` coordinates of each plaquette center.
    """

    vertices: tuple[tuple[int, int], ...]
    plaquettes: tuple[tuple[int, ...], ...]
    centers: tuple[tuple[int, int], ...] = ()


@dataclass(frozen=True, eq=False)
class CssCode:
    """A self-orthogonal CSS code with one logical qubit.

    The same check matrix ``h`` defines both the X-type and the Z-type
    generators. The all-ones vector is the transversal logical operator.

    Attributes:
        h: Check matrix of shape ``((n - 1) / 2, n)``.
        d: Design distance.
        validated: Whether the code is one of the distances whose lookup
            metrics are pinned by regression tests.
    """

    h: BitMatrix
    d: int
    validated: bool = False
    h_inv: BitMatrix = field(init=False)
    logical_j: BitVector = field(init=False)

    def __post_init__(self):
        r, n = self.h.shape
        if n % 2 == 0:
            raise CodeError(f"qubit count must be odd, got {n}")
        if 2 * r != n - 1:
            raise CodeError(f"expected {(n - 1) // 2} generators for n={n}, got {r}")
        arr = self.h.to_array().astype(np.int64)
        if ((arr @ arr.T) % 2).any():
            raise CodeError("generators are not pairwise even-overlap (not self-orthogonal)")
        if rank(self.h) != r:
            raise CodeError("generators are linearly dependent")
        if (arr.sum(axis=1) % 2).any():
            raise CodeError("all-ones vector is not in the kernel of the check matrix")
        object.__setattr__(self, "h_inv", right_inverse(self.h))
        object.__setattr__(self, "logical_j", BitVector.ones(n))

    @property
    def n(self) -> int:
        return self.h.cols

    @property
    def r(self) -> int:
        """Number of generators of each type."""
        return self.h.rows

    @property
    def k(self) -> int:
        return 1

    @property
    def t(self) -> int:
        return (self.d - 1) // 2

    @property
    def supports(self) -> list[list[int]]:
        arr = self.h.to_array()
        return [np.flatnonzero(row).tolist() for row in arr]

    def __repr__(self) -> str:
        return f"CssCode(n={self.n}, k=1, d={self.d})"


def _hex_layout(d: int) -> PlaquetteLayout:
    # Triangular patch on a brick-like lattice: row y holds points x = y, y+2, ..., 2L-y.
    # One point in three is a plaquette center; the rest are qubits. Qubits are
    # numbered along the widest boundary row first, x ascending within a row.
    size = 3 * (d - 1) // 2
    points = [(x, y) for y in range(size + 1) for x in range(y, 2 * size - y + 1, 2)]
    center_offset = {0: 2, 1: 0, 2: 1}

    def is_center(p):
        x, y = p
        return ((x - y) // 2) % 3 == center_offset[y % 3]

    qubits = [p for p in points if not is_center(p)]
    centers = [p for p in points if is_center(p)]
    index = {q: i for i, q in enumerate(qubits)}
    plaquettes = []
    for x, y in centers:
        nbrs = [(x + 2, y), (x - 2, y), (x + 1, y + 1), (x - 1, y + 1), (x + 1, y - 1), (x - 1, y - 1)]
        plaquettes.append(tuple(sorted(index[p] for p in nbrs if p in index)))
    return PlaquetteLayout(tuple(qubits), tuple(plaquettes), tuple(centers))


def code_from_supports(n: int, supports: Sequence[Sequence[int]], d: int, validated: bool = False) -> CssCode:
    """Build a :class:`CssCode` from generator supports.

    Raises:
        CodeError: if an index is out of range, repeated, or the invariants fail.
    """
    h = np.zeros((len(supports), n), dtype=np.uint8)
    for i, sup in enumerate(supports):
        if len(set(sup)) != len(sup):
            raise CodeError(f"generator {i} repeats a qubit")
        for q in sup:
            if not 0 <= q < n:
                raise CodeError(f"generator {i} references qubit {q} outside 0..{n - 1}")
            h[i, q] = 1
    return CssCode(BitMatrix(h), d, validated)


def build_hex_color_code(d: int) -> tuple[CssCode, PlaquetteLayout]:
    """Hexagonal color code of odd distance ``d`` on a triangular patch.

    Returns:
        The code with ``n = (3d^2 + 1) / 4`` qubits and its plaquette layout.

    Raises:
        ValueError: if ``d`` is even or smaller than 3.
    """
    if not isinstance(d, (int, np.integer)) or d < 3 or d % 2 == 0:
        raise ValueError(f"distance must be an odd integer >= 3, got {d!r}")
    layout = _hex_layout(int(d))
    n = len(layout.vertices)
    code = code_from_supports(n, layout.plaquettes, int(d), validated=d in VALIDATED_DISTANCES)
    return code, layout


def syndrome_of(code: CssCode, e: BitVector) -> BitVector:
    """Syndrome ``h e`` of an error of one Pauli type."""
    if len(e) != code.n:
        raise ShapeError(f"error length {len(e)} != n={code.n}")
    return mat_vec(code.h, e)


def canonical_recovery(code: CssCode, s: BitVector) -> BitVector:
    """Canonical recovery ``h_inv s``: a fixed error with syndrome ``s``."""
    if len(s) != code.r:
        raise ShapeError(f"syndrome length {len(s)} != {code.r}")
    return mat_vec(code.h_inv, s)


def logical_class_of(code: CssCode, e: BitVector) -> int:
    """1 if ``e`` differs from its canonical recovery by the logical operator."""
    return (e ^ canonical_recovery(code, syndrome_of(code, e))).parity()


def read_code(path: str | Path, d: int | None = None) -> CssCode:
    """Parse a code file: ``n`` on the first line, then one support per line.

    Blank lines and lines starting with ``#`` are ignored. If ``d`` is not
    given, the code is labelled with distance 3.
    """
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise CodeError(f"{path}: empty code file")
    try:
        n = int(lines[0])
        supports = [[int(tok) for tok in ln.split()] for ln in lines[1:]]
    except ValueError as exc:
        raise CodeError(f"{path}: {exc}") from exc
    return code_from_supports(n, supports, d if d is not None else 3)


def write_code(code: CssCode, path: str | Path) -> None:
    body = [str(code.n)] + [" ".join(map(str, sup)) for sup in code.supports]
    Path(path).write_text("\n".join(body) + "\n")
