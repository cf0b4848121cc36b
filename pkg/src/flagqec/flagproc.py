"""Remaining-flag bookkeeping across transversal logical Clifford gates.

A block's flag state is the pair ``(F_x, F_z)`` of cumulative flag vectors left
over by its last error-correction routine. ``F_x`` comes from X-type
extraction circuits (it locates X hook errors) and ``F_z`` from Z-type
circuits. A logical gate maps the hidden hook errors, so the flag state must
be mapped the same way before it seeds the next routine.
"""

from __future__ import annotations

from typing import NamedTuple

from .gf2core import BitVector


class FlagState(NamedTuple):
    f_x: BitVector
    f_z: BitVector

    @classmethod
    def zeros(cls, r: int) -> FlagState:
        return cls(BitVector.zeros(r), BitVector.zeros(r))


def _check(*states: FlagState) -> None:
    lengths = {len(v) for s in states for v in s}
    if len(lengths) != 1:
        raise ValueError(f"flag states belong to codes of different sizes: {sorted(lengths)}")


def apply_h(state: FlagState) -> FlagState:
    """Hadamard exchanges X and Z errors."""
    _check(state)
    return FlagState(state.f_z, state.f_x)


def apply_s(state: FlagState) -> FlagState:
    """Phase gate maps X to Y, so X hooks also leave Z components."""
    _check(state)
    return FlagState(state.f_x, state.f_x ^ state.f_z)


def apply_cnot(control: FlagState, target: FlagState) -> tuple[FlagState, FlagState]:
    """CNOT copies X errors forward and Z errors backward."""
    _check(control, target)
    return (
        FlagState(control.f_x, control.f_z ^ target.f_z),
        FlagState(control.f_x ^ target.f_x, target.f_z),
    )


def transform_flags(gate: str, *states: FlagState) -> tuple[FlagState, ...]:
    """Apply ``"H"``, ``"S"`` (one block) or ``"CNOT"`` (control, target)."""
    gate = gate.upper()
    if gate in ("H", "S"):
        if len(states) != 1:
            raise ValueError(f"{gate} acts on one block, got {len(states)}")
        return ((apply_h if gate == "H" else apply_s)(states[0]),)
    if gate == "CNOT":
        if len(states) != 2:
            raise ValueError(f"CNOT acts on two blocks, got {len(states)}")
        return apply_cnot(*states)
    raise ValueError(f"unsupported gate {gate!r}")
