"""Shot-by-shot reference execution of one flag error-correction routine.

The routine starts from a perfectly prepared logical state (optionally with an
injected input error and inherited flag state), repeats noisy syndrome
extraction until the chosen time decoder stops, applies the recoveries chosen
by the space decoder, then applies one ideal error-correction step that
consumes the remaining flag vectors. The outcome records whether an X-type
(and Z-type) logical error survives.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .. import timedec
from ..codes import CssCode, build_hex_color_code, canonical_recovery
from ..faultcode import CnotOrdering, FaultCheckMatrix, build_fault_check_matrix
from ..flagproc import FlagState
from ..gf2core import BitVector
from ..lookup import FullSyndrome, LookupTable, MimSearcher, build_cache
from .circuit import HalfRound, NoiseParams, PauliFrame, sample_faults


@dataclass(frozen=True)
class DecoderConfig:
    """Which time decoder, measurement strategy and space decoder to use.

    Attributes:
        kind: ``"shor"``, ``"one_tailed"`` or ``"two_tailed"``.
        strategy: ``"joint"``, ``"XZ"`` or ``"ZX"``.
        mim: Enable the Meet-in-the-Middle fallback.
        rho: MIM search radius (defaults to ``t``).
    """

    kind: str = "shor"
    strategy: str = "joint"
    mim: bool = False
    rho: int | None = None

    def __post_init__(self):
        if self.kind not in timedec.DECODERS:
            raise ValueError(f"unknown decoder {self.kind!r}; expected one of {timedec.DECODERS}")
        if self.strategy not in timedec.STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {timedec.STRATEGIES}")
        if self.strategy != "joint" and self.kind != "two_tailed":
            raise ValueError("separated strategies are only supported with the two-tailed decoder")


class ProtocolSetup:
    """Code, circuits and decoding tables shared by every shot.

    Args:
        code: The code, or an odd distance to build the hexagonal color code.
        ordering: CNOT ordering (ascending by default).
        table: Prebuilt lookup table; built with radius ``code.t`` if omitted.
        include_idle: Add idle fault locations to the circuits.
    """

    def __init__(self, code: CssCode | int, ordering: CnotOrdering | None = None, table: LookupTable | None = None,
                 include_idle: bool = False):
        if isinstance(code, (int, np.integer)):
            code, _ = build_hex_color_code(int(code))
        self.code = code
        self.ordering = ordering or CnotOrdering.default(code)
        self.hf: FaultCheckMatrix = build_fault_check_matrix(code, self.ordering)
        self.table = table if table is not None else build_cache(self.hf, code.t)
        self.include_idle = include_idle
        self.halves = {kind: HalfRound(code, self.ordering, kind, include_idle) for kind in ("X", "Z")}
        self._searchers: dict[int, MimSearcher] = {}

    @property
    def t(self) -> int:
        return self.code.t

    def searcher(self, rho: int | None) -> MimSearcher:
        rho = self.t if rho is None else rho
        if rho not in self._searchers:
            self._searchers[rho] = MimSearcher(self.table, self.hf, rho)
        return self._searchers[rho]

    def logical_class(self, key: int, config: DecoderConfig) -> int:
        if config.mim:
            return self.searcher(config.rho).logical_class(key)
        entry = self.table.get(key)
        return entry.logical_class if entry else 0

    def recovery(self, s: BitVector, f: BitVector, config: DecoderConfig) -> BitVector:
        cls = self.logical_class(FullSyndrome(s, f).key(), config)
        cro = canonical_recovery(self.code, s)
        return cro ^ self.code.logical_j if cls else cro


@dataclass
class SampleOutcome:
    """Result of one routine.

    Attributes:
        logical_x_error: Whether the output carries a logical X error.
        logical_z_error: Whether the output carries a logical Z error.
        rounds_used: Full rounds executed; a single-type round counts one half.
        history: All recorded syndromes and flags.
        chosen: Trusted round(s), one per phase.
        remaining: Flag state left for a following routine.
        output_x: Data X error after the routine's recovery, before the ideal step.
        output_z: Data Z error after the routine's recovery, before the ideal step.
    """

    logical_x_error: bool
    logical_z_error: bool
    rounds_used: float
    history: timedec.SyndromeHistory
    chosen: tuple[int, ...] = ()
    remaining: FlagState | None = None
    output_x: np.ndarray = field(default=None, repr=False)
    output_z: np.ndarray = field(default=None, repr=False)


ForcedFaults = Mapping[tuple[str, int], Mapping[int, tuple]]
"""``(type, k)`` -> {location index: Pauli}, where ``k`` counts earlier half-rounds
of the same type ``"X"`` or ``"Z"`` (0-based)."""


def _bv(a: np.ndarray) -> BitVector:
    return BitVector(np.asarray(a, dtype=np.uint8))


class _Runner:
    def __init__(self, setup, config, noise, rng, forced, frame):
        self.setup, self.config, self.noise, self.rng = setup, config, noise, rng
        self.forced = forced or {}
        self.frame = frame
        self.count = {"X": 0, "Z": 0}

    def half_round(self, kind: str) -> tuple[BitVector, BitVector]:
        half = self.setup.halves[kind]
        faults = {}
        if self.rng is not None and (self.noise.p > 0 or self.noise.p_idle > 0):
            faults = sample_faults(half.locations, self.noise, self.rng)
        faults.update(self.forced.get((kind, self.count[kind]), {}))
        self.count[kind] += 1
        syn, flag = half.run(self.frame, faults)
        return _bv(syn), _bv(flag)

    def phase(self, history: timedec.SyndromeHistory, kinds: tuple[str, ...], t: int) -> tuple[int, int]:
        """Measure until the stop rule fires; return ``(rounds measured, chosen round)`` local to the phase."""
        start = len(history.rounds)
        syndromes: list[tuple] = []
        flags: list[int] = []
        while True:
            rec = timedec.RoundRecord()
            for kind in kinds:
                s, f = self.half_round(kind)
                if kind == "X":
                    rec.s_x, rec.f_x = s, f
                else:
                    rec.s_z, rec.f_z = s, f
            history.append(rec)
            syndromes.append(tuple(getattr(rec, "s_" + k.lower()) for k in kinds))
            flags.append(sum(getattr(rec, "f_" + k.lower()).weight() for k in kinds))
            delta = [int(a != b) for a, b in zip(syndromes[:-1], syndromes[1:])]
            dec = timedec.decide(self.config.kind, delta, flags, t)
            if dec.stopped:
                return len(history.rounds) - start, dec.chosen_round


def run_protocol(
    setup: ProtocolSetup,
    config: DecoderConfig,
    noise: NoiseParams | None = None,
    rng: np.random.Generator | None = None,
    initial_flags: FlagState | None = None,
    initial_error: tuple[np.ndarray, np.ndarray] | None = None,
    forced: ForcedFaults | None = None,
) -> SampleOutcome:
    """Run one error-correction routine gate by gate.

    Args:
        setup: Shared code, circuits and tables.
        config: Time/space decoder selection.
        noise: Noise strengths (noiseless by default).
        rng: Random source; required when ``noise`` is nonzero.
        initial_flags: Flag state inherited from a previous routine.
        initial_error: Input ``(dx, dz)`` data error.
        forced: Faults to insert deterministically.
    """
    noise = noise or NoiseParams()
    if (noise.p > 0 or noise.p_idle > 0) and rng is None:
        raise ValueError("a random generator is required for nonzero noise")
    if noise.p_idle > 0 and not setup.include_idle:
        raise ValueError("idling noise needs a setup built with include_idle=True")
    code = setup.code
    n, r, t = code.n, code.r, code.t
    if initial_error is None:
        frame = PauliFrame(n)
    else:
        frame = PauliFrame.from_data(*initial_error)
    flags0 = initial_flags or FlagState.zeros(r)
    history = timedec.SyndromeHistory(r, initial_f_x=flags0.f_x, initial_f_z=flags0.f_z)
    runner = _Runner(setup, config, noise, rng, forced, frame)

    if config.strategy == "joint":
        m, l = runner.phase(history, ("X", "Z"), t)
        inputs = timedec.select_correction_inputs(history, l, "joint")
        rounds_used: float = m
        chosen = (l,)
    else:
        first, second = ("X", "Z") if config.strategy == "XZ" else ("Z", "X")
        m1, l1 = runner.phase(history, (first,), t)
        history.phase_split = m1
        recs = history.rounds
        s_first = [getattr(rec, "s_" + first.lower()) for rec in recs]
        delta1 = [int(a != b) for a, b in zip(s_first[:-1], s_first[1:])]
        flags1 = [getattr(rec, "f_" + first.lower()).weight() for rec in recs]
        t2 = timedec.separated_budget(delta1, flags1, t)
        m2, l2 = runner.phase(history, (second,), t2)
        inputs = timedec.select_correction_inputs(history, l1, config.strategy, l2=m1 + l2)
        rounds_used = (m1 + m2) / 2
        chosen = (l1, m1 + l2)

    dz_fix = setup.recovery(*inputs.z_ec, config).to_array()
    dx_fix = setup.recovery(*inputs.x_ec, config).to_array()
    out_x = frame.data_x ^ dx_fix
    out_z = frame.data_z ^ dz_fix
    dx, dz = out_x.copy(), out_z.copy()
    # Ideal correction with the flags that the chosen syndromes did not cover.
    dx ^= setup.recovery(_bv((code.h.to_array() @ dx) % 2), inputs.remaining_f_x, config).to_array()
    dz ^= setup.recovery(_bv((code.h.to_array() @ dz) % 2), inputs.remaining_f_z, config).to_array()
    return SampleOutcome(
        logical_x_error=bool(dx.sum() % 2),
        logical_z_error=bool(dz.sum() % 2),
        rounds_used=rounds_used,
        history=history,
        chosen=chosen,
        remaining=FlagState(inputs.remaining_f_x, inputs.remaining_f_z),
        output_x=out_x,
        output_z=out_z,
    )

