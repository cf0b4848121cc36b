"""Gate-level flag extraction circuits, Pauli frames and circuit-level noise.

Qubit layout inside a circuit: data qubits ``0..n-1``, the syndrome ancilla at
``n`` and the flag ancilla at ``n + 1``. The ancilla pair is reset at the
start of every generator's circuit, which under this noise model is the same
as using a fresh pair.

The circuit for a Z-type generator with CNOT order ``d1..dw`` is::

    reset a, reset f, H f, CX(d1,a), CX(f,a), CX(d2,a) .. CX(d_{w-1},a),
    CX(f,a), CX(dw,a), H f, measure f, measure a

An X-type generator replaces every data CNOT with the conjugated gate
``XCX(d,a) = H d . CX(d,a) . H d``. The conjugated gate is one two-qubit
operation: it is followed by a single two-qubit fault location and takes one
time step.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

from ..codes import CssCode
from ..faultcode import CnotOrdering

PAULIS_1Q = ((1, 0), (1, 1), (0, 1))  # X, Y, Z as (x, z)
PAULIS_2Q = tuple(
    (a, b) for a in ((0, 0), (1, 0), (1, 1), (0, 1)) for b in ((0, 0), (1, 0), (1, 1), (0, 1)) if (a, b) != ((0, 0), (0, 0))
)


@dataclass(frozen=True)
class NoiseParams:
    """Circuit-level depolarizing noise strengths.

    Attributes:
        p: Probability of a fault after each gate, after each reset and before
            each measurement.
        p_idle: Probability of a depolarizing fault on each idle qubit per
            gate time step.
    """

    p: float = 0.0
    p_idle: float = 0.0

    def __post_init__(self):
        for name in ("p", "p_idle"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


class Op(NamedTuple):
    """One circuit operation. ``gen`` is the generator index it belongs to."""

    kind: str  # "reset", "h", "cx", "xcx", "meas"
    qubits: tuple[int, ...]
    gen: int
    role: str = ""  # "syndrome" or "flag" for measurements and resets


class Location(NamedTuple):
    """A place where a fault may occur.

    ``op`` is the index of the operation the fault follows (resets, gates and
    idle steps) or precedes (measurements). ``paulis`` lists the possible
    faults as per-qubit ``(x, z)`` pairs on ``qubits``.
    """

    op: int
    qubits: tuple[int, ...]
    paulis: tuple[tuple[tuple[int, int], ...], ...]
    before: bool
    idle: bool


_PREP_FLIP = (((1, 0),),)
_SINGLE = tuple(((p,)) for p in PAULIS_1Q)
_DOUBLE = tuple(PAULIS_2Q)


class PauliFrame:
    """X and Z error bits over data qubits plus the two circuit ancillas."""

    def __init__(self, n: int):
        self.n = n
        self.x = np.zeros(n + 2, dtype=np.uint8)
        self.z = np.zeros(n + 2, dtype=np.uint8)

    @classmethod
    def from_data(cls, dx: Sequence[int], dz: Sequence[int]) -> PauliFrame:
        frame = cls(len(dx))
        frame.x[: frame.n] = dx
        frame.z[: frame.n] = dz
        return frame

    @property
    def data_x(self) -> np.ndarray:
        return self.x[: self.n]

    @property
    def data_z(self) -> np.ndarray:
        return self.z[: self.n]

    def apply(self, qubits: Sequence[int], pauli: Sequence[tuple[int, int]]) -> None:
        for q, (px, pz) in zip(qubits, pauli):
            self.x[q] ^= px
            self.z[q] ^= pz

    def copy(self) -> PauliFrame:
        other = PauliFrame(self.n)
        other.x[:] = self.x
        other.z[:] = self.z
        return other


def _apply_op(x: np.ndarray, z: np.ndarray, op: Op) -> None:
    """Propagate frames (last axis = qubit) through one Clifford op in place."""
    if op.kind == "cx":
        c, t = op.qubits
        x[..., t] ^= x[..., c]
        z[..., c] ^= z[..., t]
    elif op.kind == "xcx":
        q, t = op.qubits
        x[..., t] ^= z[..., q]
        x[..., q] ^= z[..., t]
    elif op.kind == "h":
        (q,) = op.qubits
        tmp = x[..., q].copy()
        x[..., q] = z[..., q]
        z[..., q] = tmp
    elif op.kind == "reset":
        (q,) = op.qubits
        x[..., q] = 0
        z[..., q] = 0


def generator_ops(n: int, gen: int, perm: Sequence[int], kind: str) -> list[Op]:
    """Operations of one generator's flag circuit (``kind`` is ``"X"`` or ``"Z"``)."""
    a, f = n, n + 1
    ops = [Op("reset", (a,), gen, "syndrome"), Op("reset", (f,), gen, "flag"), Op("h", (f,), gen)]
    slots: list[int | None] = list(perm)
    slots.insert(1, None)
    slots.insert(len(slots) - 1, None)
    for q in slots:
        if q is None:
            ops.append(Op("cx", (f, a), gen))
        elif kind == "X":
            ops.append(Op("xcx", (q, a), gen))
        else:
            ops.append(Op("cx", (q, a), gen))
    ops += [Op("h", (f,), gen), Op("meas", (f,), gen, "flag"), Op("meas", (a,), gen, "syndrome")]
    return ops


class HalfRound:
    """All generator circuits of one Pauli type, run sequentially.

    Attributes:
        ops: Operation list.
        locations: Fault locations; gate/reset/measurement locations first,
            then idle locations (only when ``include_idle``).
    """

    def __init__(self, code: CssCode, ordering: CnotOrdering, kind: str, include_idle: bool = False):
        if kind not in ("X", "Z"):
            raise ValueError(f"half-round type must be 'X' or 'Z', got {kind!r}")
        ordering.validate(code)
        self.code = code
        self.kind = kind
        self.n = code.n
        self.ops: list[Op] = []
        for i, perm in enumerate(ordering.perms):
            self.ops += generator_ops(code.n, i, perm, kind)
        self.include_idle = include_idle
        self.locations = self._locations()
        self.n_gate_locations = sum(not loc.idle for loc in self.locations)

    def _locations(self) -> list[Location]:
        n = self.n
        locs: list[Location] = []
        idle: list[Location] = []
        alive: set[int] = set()
        for k, op in enumerate(self.ops):
            if op.kind == "reset":
                alive.add(op.qubits[0])
                locs.append(Location(k, op.qubits, _PREP_FLIP, False, False))
            elif op.kind == "meas":
                locs.append(Location(k, op.qubits, _PREP_FLIP, True, False))
                alive.discard(op.qubits[0])
            else:
                locs.append(Location(k, op.qubits, _SINGLE if op.kind == "h" else _DOUBLE, False, False))
                if self.include_idle:
                    busy = set(op.qubits)
                    for q in list(range(n)) + sorted(alive):
                        if q not in busy:
                            idle.append(Location(k, (q,), _SINGLE, False, True))
        return locs + idle

    def run(self, frame: PauliFrame, faults: dict[int, tuple[tuple[int, int], ...]] | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Propagate ``frame`` through the half-round, inserting ``faults``.

        Args:
            frame: Modified in place.
            faults: Map from location index to the Pauli (per-qubit ``(x, z)``) to insert.

        Returns:
            Syndrome bits and flag bits, one per generator.
        """
        faults = faults or {}
        after: dict[int, list[tuple[tuple[int, ...], tuple]]] = {}
        before: dict[int, list[tuple[tuple[int, ...], tuple]]] = {}
        for li, pauli in faults.items():
            loc = self.locations[li]
            (before if loc.before else after).setdefault(loc.op, []).append((loc.qubits, pauli))
        r = self.code.r
        syn = np.zeros(r, dtype=np.uint8)
        flag = np.zeros(r, dtype=np.uint8)
        for k, op in enumerate(self.ops):
            for qubits, pauli in before.get(k, ()):
                frame.apply(qubits, pauli)
            if op.kind == "meas":
                out = syn if op.role == "syndrome" else flag
                out[op.gen] = frame.x[op.qubits[0]]
            else:
                _apply_op(frame.x, frame.z, op)
            for qubits, pauli in after.get(k, ()):
                frame.apply(qubits, pauli)
        return syn, flag

    @cached_property
    def effects(self) -> EffectTable:
        return EffectTable.build(self)


def _pack_rows(bits: np.ndarray) -> np.ndarray:
    """Pack the last axis (at most 64 bits) of a 0/1 array into uint64."""
    w = np.uint64(1) << np.arange(bits.shape[-1], dtype=np.uint64)
    return (bits.astype(np.uint64) * w).sum(axis=-1, dtype=np.uint64)


@dataclass(frozen=True)
class EffectTable:
    """Outcome of every single fault of a half-round, packed into uint64 words.

    Row ``e`` of ``effects`` holds ``(dx, dz, syndrome, flags)`` flips caused by
    fault ``e``. Location ``j`` owns rows ``offsets[j] .. offsets[j] + counts[j] - 1``.
    """

    effects: np.ndarray
    offsets: np.ndarray
    counts: np.ndarray
    idle: np.ndarray

    @classmethod
    def build(cls, half: HalfRound) -> EffectTable:
        n, r = half.n, half.code.r
        if n > 64 or r > 64:
            raise ValueError("packed effect tables need n <= 64 and r <= 64")
        rows_loc, rows_pauli = [], []
        counts = []
        for j, loc in enumerate(half.locations):
            counts.append(len(loc.paulis))
            for pauli in loc.paulis:
                rows_loc.append(j)
                rows_pauli.append(pauli)
        n_rows = len(rows_loc)
        x = np.zeros((n_rows, n + 2), dtype=np.uint8)
        z = np.zeros((n_rows, n + 2), dtype=np.uint8)
        syn = np.zeros((n_rows, r), dtype=np.uint8)
        flag = np.zeros((n_rows, r), dtype=np.uint8)
        inject_after: dict[int, list[int]] = {}
        inject_before: dict[int, list[int]] = {}
        for e, j in enumerate(rows_loc):
            loc = half.locations[j]
            (inject_before if loc.before else inject_after).setdefault(loc.op, []).append(e)

        def inject(rows: list[int]) -> None:
            for e in rows:
                loc = half.locations[rows_loc[e]]
                for q, (px, pz) in zip(loc.qubits, rows_pauli[e]):
                    x[e, q] ^= px
                    z[e, q] ^= pz

        for k, op in enumerate(half.ops):
            inject(inject_before.get(k, []))
            if op.kind == "meas":
                out = syn if op.role == "syndrome" else flag
                out[:, op.gen] = x[:, op.qubits[0]]
            else:
                _apply_op(x, z, op)
            inject(inject_after.get(k, []))
        effects = np.stack([_pack_rows(x[:, :n]), _pack_rows(z[:, :n]), _pack_rows(syn), _pack_rows(flag)], axis=1)
        counts = np.array(counts, dtype=np.int64)
        offsets = np.concatenate([[0], np.cumsum(counts)[:-1]]).astype(np.int64)
        idle = np.array([loc.idle for loc in half.locations], dtype=bool)
        return cls(effects, offsets, counts, idle)


def extract_generator(
    frame: PauliFrame,
    code: CssCode,
    gen: int,
    kind: str,
    ordering: CnotOrdering | None = None,
    noise: NoiseParams | None = None,
    rng: np.random.Generator | None = None,
    faults: dict[int, tuple[tuple[int, int], ...]] | None = None,
) -> tuple[int, int]:
    """Measure one generator with its flag circuit, updating ``frame`` in place.

    Random faults are drawn from ``noise`` (idling included when
    ``noise.p_idle > 0``); ``faults`` forces specific faults, indexed by the
    locations of :func:`generator_locations`.

    Returns:
        ``(syndrome bit, flag bit)``.
    """
    ordering = ordering or CnotOrdering.default(code)
    noise = noise or NoiseParams()
    ops = generator_ops(code.n, gen, ordering.perms[gen], kind)
    half = _SingleGenerator(code, ops, include_idle=noise.p_idle > 0)
    chosen = dict(faults or {})
    if rng is not None and (noise.p > 0 or noise.p_idle > 0):
        chosen.update(sample_faults(half.locations, noise, rng))
    syn, flag = HalfRound.run(half, frame, chosen)
    return int(syn[gen]), int(flag[gen])


def generator_locations(code: CssCode, gen: int, kind: str, ordering: CnotOrdering | None = None, include_idle: bool = False) -> list[Location]:
    ordering = ordering or CnotOrdering.default(code)
    return _SingleGenerator(code, generator_ops(code.n, gen, ordering.perms[gen], kind), include_idle).locations


class _SingleGenerator(HalfRound):
    """A half-round restricted to one generator's circuit."""

    def __init__(self, code: CssCode, ops: list[Op], include_idle: bool):
        self.code = code
        self.n = code.n
        self.ops = ops
        self.include_idle = include_idle
        self.locations = self._locations()
        self.n_gate_locations = sum(not loc.idle for loc in self.locations)


def sample_faults(locations: Sequence[Location], noise: NoiseParams, rng: np.random.Generator) -> dict[int, tuple]:
    """Draw independent faults: each location fires with its probability and
    then picks one of its Paulis uniformly."""
    probs = np.array([noise.p_idle if loc.idle else noise.p for loc in locations])
    fired = np.flatnonzero(rng.random(len(locations)) < probs)
    out = {}
    for j in fired.tolist():
        paulis = locations[j].paulis
        out[j] = paulis[int(rng.integers(len(paulis)))]
    return out


def apply_idling_noise(frame: PauliFrame, idle_qubits: Sequence[int], p_idle: float, rng: np.random.Generator) -> PauliFrame:
    """Depolarize each idle qubit with probability ``p_idle`` (X, Y, Z equally likely)."""
    if p_idle < 0:
        raise ValueError(f"p_idle must be non-negative, got {p_idle}")
    if p_idle == 0 or not len(idle_qubits):
        return frame
    for q in idle_qubits:
        if rng.random() < p_idle:
            frame.apply((q,), (PAULIS_1Q[int(rng.integers(3))],))
    return frame
