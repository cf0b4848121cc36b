"""Stop rules for repeated flag syndrome measurement.

Rounds are numbered from 1. For ``m`` recorded rounds the difference vector
has ``m - 1`` bits; bit ``i`` (1-based) is 1 when rounds ``i`` and ``i + 1``
disagree. Flag information enters as a per-round count of nontrivial flag bits.

All decision functions are pure and evaluate a single history prefix. The
caller evaluates them after every round, including round 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Hashable, Sequence

import numpy as np

from .gf2core import BitVector

DECODERS = ("shor", "one_tailed", "two_tailed")
STRATEGIES = ("joint", "XZ", "ZX")


@dataclass(frozen=True)
class StopDecision:
    """Result of one stop-rule evaluation.

    Attributes:
        stopped: Whether measurement stops after the current round.
        chosen_round: Round whose syndrome is trusted (1-based), if stopped.
        reason: ``"zero-substring"``, ``"n11"`` or ``"cap"``.
    """

    stopped: bool
    chosen_round: int | None = None
    reason: str | None = None


CONTINUE = StopDecision(False)


@dataclass(frozen=True)
class ZeroSubstringContext:
    """Fault-count evidence around one maximal run of zeros in the difference vector.

    ``left`` and ``right`` are the 1-based positions of the bounding ones
    (``0`` and ``m`` when the run touches the start or end).
    """

    left: int
    right: int
    gamma: int
    alpha: int
    beta: int
    mu: int
    nu: int
    omega: int

    @property
    def alpha_tilde(self) -> int:
        return max(self.alpha, self.mu)

    @property
    def beta_tilde(self) -> int:
        return max(self.beta, self.nu)

    @property
    def total(self) -> int:
        return self.alpha_tilde + self.beta_tilde + self.gamma + self.omega

    @property
    def last_round(self) -> int:
        """Last of the ``gamma + 1`` rounds sharing a syndrome."""
        return self.right


def difference_vector(syndromes: Sequence[Hashable | BitVector]) -> np.ndarray:
    """Bits marking changes between consecutive syndromes.

    Raises:
        ValueError: if fewer than two rounds are given.
    """
    if len(syndromes) < 2:
        raise ValueError("difference vector needs at least two rounds")
    return np.array([int(a != b) for a, b in zip(syndromes[:-1], syndromes[1:])], dtype=np.uint8)


def count_n11(bits: Sequence[int]) -> int:
    """Non-overlapping ``11`` pairs, matched greedily left to right."""
    count = i = 0
    bits = list(bits)
    while i < len(bits) - 1:
        if bits[i] and bits[i + 1]:
            count += 1
            i += 2
        else:
            i += 1
    return count


def count_faults(bits: Sequence[int]) -> int:
    """Non-overlapping ``11`` pairs plus the ones left over."""
    bits = list(bits)
    return int(sum(bits)) - count_n11(bits)


def _check_lengths(delta: Sequence[int], flags: Sequence[int]) -> None:
    if len(flags) != len(delta) + 1:
        raise ValueError(f"need one flag count per round: {len(delta) + 1} rounds, got {len(flags)}")


def zero_substring_contexts(delta: Sequence[int], flags: Sequence[int]) -> list[ZeroSubstringContext]:
    """Context of every maximal zero run of ``delta``.

    Args:
        delta: Difference vector, ``m - 1`` bits.
        flags: Number of nontrivial flag bits in each of the ``m`` rounds.
    """
    delta = [int(b) for b in delta]
    flags = [int(c) for c in flags]
    _check_lengths(delta, flags)
    m = len(flags)
    ones = [i + 1 for i, b in enumerate(delta) if b]
    bounds = [0] + ones + [m]
    out = []
    for left, right in zip(bounds[:-1], bounds[1:]):
        gamma = right - left - 1
        if gamma < 1:
            continue
        out.append(
            ZeroSubstringContext(
                left=left,
                right=right,
                gamma=gamma,
                alpha=count_faults(delta[: max(left - 1, 0)]),
                beta=count_faults(delta[right:]),
                mu=sum(flags[:left]),
                nu=sum(flags[right:]),
                omega=sum(max(0, c - 1) for c in flags[left:right]),
            )
        )
    return out


def shor_cap(t: int) -> int:
    return (t + 1) ** 2


def one_tailed_cap(t: int) -> int:
    return t * (t + 3) // 2 + 2


def two_tailed_cap(t: int) -> int:
    if t % 2:
        return (t + 3) ** 2 // 4 - 1
    return (t + 2) * (t + 4) // 4 - 1


def round_cap(kind: str, t: int) -> int:
    caps = {"shor": shor_cap, "one_tailed": one_tailed_cap, "two_tailed": two_tailed_cap}
    if kind not in caps:
        raise ValueError(f"unknown decoder {kind!r}; expected one of {DECODERS}")
    return max(1, caps[kind](t))


def _cap_or_continue(m: int, cap: int) -> StopDecision:
    return StopDecision(True, m, "cap") if m >= cap else CONTINUE


def shor_decision(delta: Sequence[int], t: int, cap: int | None = None) -> StopDecision:
    """Stop once the last ``t`` bits of ``delta`` are zero."""
    m = len(delta) + 1
    if len(delta) >= t and not any(delta[len(delta) - t :]):
        return StopDecision(True, m, "zero-substring")
    return _cap_or_continue(m, round_cap("shor", t) if cap is None else cap)


def two_tailed_decision(delta: Sequence[int], flags: Sequence[int], t: int, cap: int | None = None) -> StopDecision:
    """Stop when any zero run has enough surrounding evidence, or on ``N11 >= t``.

    When several zero runs qualify, the latest one is used.
    """
    _check_lengths(delta, flags)
    m = len(flags)
    if count_n11(delta) >= t:
        return StopDecision(True, m, "n11")
    hits = [c for c in zero_substring_contexts(delta, flags) if c.total >= t]
    if hits:
        return StopDecision(True, hits[-1].last_round, "zero-substring")
    return _cap_or_continue(m, round_cap("two_tailed", t) if cap is None else cap)


def one_tailed_decision(delta: Sequence[int], flags: Sequence[int], t: int, cap: int | None = None) -> StopDecision:
    """Stop when the trailing zero run has enough evidence, or on ``N11 >= t``."""
    _check_lengths(delta, flags)
    m = len(flags)
    if count_n11(delta) >= t:
        return StopDecision(True, m, "n11")
    ctx = zero_substring_contexts(delta, flags)
    if ctx and ctx[-1].right == m:
        last = ctx[-1]
        if last.alpha_tilde + last.gamma + last.omega >= t:
            return StopDecision(True, m, "zero-substring")
    return _cap_or_continue(m, round_cap("one_tailed", t) if cap is None else cap)


def decide(kind: str, delta: Sequence[int], flags: Sequence[int], t: int, cap: int | None = None) -> StopDecision:
    """Dispatch to the stop rule named by ``kind``."""
    if kind == "shor":
        return shor_decision(delta, t, cap)
    if kind == "one_tailed":
        return one_tailed_decision(delta, flags, t, cap)
    if kind == "two_tailed":
        return two_tailed_decision(delta, flags, t, cap)
    raise ValueError(f"unknown decoder {kind!r}; expected one of {DECODERS}")


def separated_budget(delta_first: Sequence[int], flags_first: Sequence[int], t: int) -> int:
    """Fault budget left for the second measurement phase.

    The first phase is charged the larger of its fault count from ``delta``
    and its total number of nontrivial flag bits.
    """
    spent = max(count_faults(delta_first), int(sum(flags_first)))
    return max(0, t - spent)


@dataclass
class RoundRecord:
    """Outcomes of one round; entries are ``None`` for a type not measured."""

    s_x: BitVector | None = None
    f_x: BitVector | None = None
    s_z: BitVector | None = None
    f_z: BitVector | None = None


@dataclass
class SyndromeHistory:
    """Syndrome and flag records of one error-correction routine.

    In joint mode every round holds both types. In separated modes the first
    ``phase_split`` rounds hold only the first-measured type and the rest only
    the other type.

    Attributes:
        r: Generators per type.
        initial_f_x: Flag state inherited for X-type circuits.
        initial_f_z: Flag state inherited for Z-type circuits.
    """

    r: int
    rounds: list[RoundRecord] = field(default_factory=list)
    initial_f_x: BitVector | None = None
    initial_f_z: BitVector | None = None
    phase_split: int | None = None

    def __post_init__(self):
        zero = BitVector.zeros(self.r)
        self.initial_f_x = self.initial_f_x if self.initial_f_x is not None else zero
        self.initial_f_z = self.initial_f_z if self.initial_f_z is not None else zero

    def append(self, rec: RoundRecord) -> None:
        self.rounds.append(rec)

    def _sum(self, attr: str, lo: int, hi: int) -> BitVector:
        """XOR of ``attr`` over rounds ``lo..hi`` (1-based, inclusive)."""
        acc = BitVector.zeros(self.r)
        for rec in self.rounds[max(lo, 1) - 1 : hi]:
            v = getattr(rec, attr)
            if v is not None:
                acc = acc ^ v
        return acc

    def cumulative_f_x(self, i: int) -> BitVector:
        """Initial X-circuit flags plus flags of rounds ``1..i``."""
        return self.initial_f_x ^ self._sum("f_x", 1, i)

    def cumulative_f_z(self, i: int) -> BitVector:
        return self.initial_f_z ^ self._sum("f_z", 1, i)


@dataclass(frozen=True)
class CorrectionInputs:
    """Full-syndrome inputs for both corrections plus the flags left over.

    ``z_ec`` corrects Z errors from X-type syndromes and Z-circuit flags;
    ``x_ec`` corrects X errors from Z-type syndromes and X-circuit flags.
    """

    z_ec: tuple[BitVector, BitVector]
    x_ec: tuple[BitVector, BitVector]
    remaining_f_x: BitVector
    remaining_f_z: BitVector


def select_correction_inputs(history: SyndromeHistory, l: int, mode: str = "joint", l2: int | None = None) -> CorrectionInputs:
    """Pair trusted syndromes with the flags raised before they were measured.

    Args:
        history: Routine records.
        l: Chosen round (joint) or chosen round of the first phase (separated).
        mode: ``"joint"``, ``"XZ"`` (X-type generators measured first) or ``"ZX"``.
        l2: Chosen round of the second phase, counted within the whole
            history, for separated modes.

    Raises:
        ValueError: on out-of-range rounds or unknown mode.
    """
    m = len(history.rounds)
    if not 1 <= l <= m:
        raise ValueError(f"round {l} outside 1..{m}")
    zero = BitVector.zeros(history.r)
    if mode == "joint":
        rec = history.rounds[l - 1]
        return CorrectionInputs(
            z_ec=(rec.s_x, history.cumulative_f_z(l - 1)),
            x_ec=(rec.s_z, history.cumulative_f_x(l)),
            remaining_f_x=history._sum("f_x", l + 1, m),
            remaining_f_z=history._sum("f_z", l, m),
        )
    if mode not in ("XZ", "ZX"):
        raise ValueError(f"unknown strategy {mode!r}; expected one of {STRATEGIES}")
    split = history.phase_split
    if split is None or l2 is None or not 1 <= l <= split < l2 <= m:
        raise ValueError("separated modes need phase_split and a second-phase round after it")
    first, second = history.rounds[l - 1], history.rounds[l2 - 1]
    if mode == "XZ":
        return CorrectionInputs(
            z_ec=(first.s_x, history.initial_f_z),
            x_ec=(second.s_z, history.cumulative_f_x(m)),
            remaining_f_x=zero,
            remaining_f_z=history._sum("f_z", split + 1, m),
        )
    return CorrectionInputs(
        z_ec=(second.s_x, history.cumulative_f_z(m)),
        x_ec=(first.s_z, history.initial_f_x),
        remaining_f_x=history._sum("f_x", split + 1, m),
        remaining_f_z=zero,
    )
