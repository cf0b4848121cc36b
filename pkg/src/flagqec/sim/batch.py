"""Vectorized Monte Carlo of the storage experiment.

Shots advance in lockstep, one half-round at a time. Because every circuit is
Clifford and every fault is a Pauli, the effect of a half-round is linear:
the syndrome is ``H`` times the incoming error of the detected type, XOR the
effects of the faults that fired, each read from a precomputed
:class:`~flagqec.sim.circuit.EffectTable`. Data errors, syndromes and flags
are kept as packed ``uint64`` words (one word each, so ``n <= 64``).

Only X-type logical errors are adjudicated (the stored state is logical
``|0>``), so Z-type recoveries are not applied here. Stop decisions for
shots whose history is still all-trivial are vectorized; the rest call the
pure stop rules in :mod:`flagqec.timedec`, memoized on the history.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .. import timedec
from .circuit import EffectTable, NoiseParams
from .protocol import DecoderConfig, ProtocolSetup

log = logging.getLogger(__name__)

DEFAULT_BLOCK = 20_000


@lru_cache(maxsize=1 << 18)
def _decide(kind: str, delta: tuple, flags: tuple, t: int) -> int:
    """Chosen round (1-based) or 0 to continue."""
    dec = timedec.decide(kind, delta, flags, t)
    return dec.chosen_round if dec.stopped else 0


@lru_cache(maxsize=64)
def _budget(delta: tuple, flags: tuple, t: int) -> int:
    return timedec.separated_budget(delta, flags, t)


@dataclass
class BatchResult:
    """Per-shot outcomes of a block."""

    logical_x_error: np.ndarray
    rounds_used: np.ndarray

    @property
    def shots(self) -> int:
        return len(self.logical_x_error)

    @property
    def failures(self) -> int:
        return int(self.logical_x_error.sum())


@dataclass
class ForcedBatch:
    """Deterministic faults for a batch: fault ``j`` hits shot ``shot[j]`` in
    the ``index[j]``-th half-round of type ``kind[j]`` (``0`` = X, ``1`` = Z),
    using row ``row[j]`` of that type's effect table."""

    shot: np.ndarray
    kind: np.ndarray
    index: np.ndarray
    row: np.ndarray


class _Phase:
    """Histories of one measurement phase for all shots."""

    def __init__(self, shots: int, cap: int, kinds: tuple[str, ...]):
        self.kinds = kinds
        self.s = {k: np.zeros((shots, cap), np.uint64) for k in kinds}
        self.f = {k: np.zeros((shots, cap), np.uint64) for k in kinds}
        self.delta = np.zeros((shots, max(cap - 1, 1)), np.uint8)
        self.flags = np.zeros((shots, cap), np.int64)
        self.rounds = np.zeros(shots, np.int64)
        self.chosen = np.zeros(shots, np.int64)


class BatchSimulator:
    """Lockstep simulator for one decoder configuration and noise point."""

    def __init__(self, setup: ProtocolSetup, config: DecoderConfig, noise: NoiseParams):
        code = setup.code
        if code.n > 64:
            raise ValueError("batch simulation packs data errors into 64-bit words (n <= 64)")
        if noise.p_idle > 0 and not setup.include_idle:
            raise ValueError("idling noise needs a setup built with include_idle=True")
        self.setup, self.config, self.noise = setup, config, noise
        self.t = code.t
        self.r = code.r
        self.eff: dict[str, EffectTable] = {k: setup.halves[k].effects for k in ("X", "Z")}
        bit = np.uint64(1) << np.arange(code.n, dtype=np.uint64)
        h = code.h.to_array().astype(np.uint64)
        self.h_rows = (h * bit).sum(axis=1, dtype=np.uint64)
        hinv = code.h_inv.to_array().astype(np.uint64)
        self.hinv_cols = (hinv * bit[:, None]).sum(axis=0, dtype=np.uint64)
        self.all_ones = np.uint64((1 << code.n) - 1)
        self._class_cache: dict[int, int] = {}

    # -- packed linear algebra -------------------------------------------------

    def _syndrome(self, d: np.ndarray) -> np.ndarray:
        bits = np.bitwise_count(d[:, None] & self.h_rows[None, :]) & np.uint8(1)
        return (bits.astype(np.uint64) << np.arange(self.r, dtype=np.uint64)).sum(axis=1, dtype=np.uint64)

    def _cro(self, s: np.ndarray) -> np.ndarray:
        out = np.zeros(len(s), np.uint64)
        for i in range(self.r):
            out ^= np.where((s >> np.uint64(i)) & np.uint64(1), self.hinv_cols[i], np.uint64(0))
        return out

    def _classes(self, keys: np.ndarray) -> np.ndarray:
        found, cls = self.setup.table.lookup_many(keys)
        if self.config.mim and not found.all():
            searcher = self.setup.searcher(self.config.rho)
            for i in np.flatnonzero(~found).tolist():
                k = int(keys[i])
                if k not in self._class_cache:
                    self._class_cache[k] = searcher.logical_class(k)
                cls[i] = self._class_cache[k]
        return cls

    def _recover(self, s: np.ndarray, f: np.ndarray) -> np.ndarray:
        cls = self._classes(s | (f << np.uint64(self.r)))
        return self._cro(s) ^ np.where(cls.astype(bool), self.all_ones, np.uint64(0))

    # -- noise -----------------------------------------------------------------

    def _sample(self, eff: EffectTable, n_shots: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Shot positions and effect rows of all faults fired in one half-round."""
        shots_out, rows_out = [], []
        for idle, prob in ((False, self.noise.p), (True, self.noise.p_idle)):
            if prob <= 0:
                continue
            locs = np.flatnonzero(eff.idle == idle)
            n_loc = len(locs)
            if not n_loc:
                continue
            total = n_shots * n_loc
            k = int(rng.binomial(total, prob))
            if not k:
                continue
            flat = rng.choice(total, size=k, replace=False, shuffle=False) if prob < 0.5 else np.flatnonzero(rng.random(total) < prob)
            shot = flat // n_loc
            loc = locs[flat % n_loc]
            row = eff.offsets[loc] + (rng.random(len(loc)) * eff.counts[loc]).astype(np.int64)
            shots_out.append(shot)
            rows_out.append(row)
        if not shots_out:
            return np.zeros(0, np.int64), np.zeros(0, np.int64)
        return np.concatenate(shots_out), np.concatenate(rows_out)

    def _half_round(self, kind: str, idx: np.ndarray, dx: np.ndarray, dz: np.ndarray, rng, forced, counters) -> tuple[np.ndarray, np.ndarray]:
        eff = self.eff[kind]
        incoming = dz[idx] if kind == "X" else dx[idx]
        syn = self._syndrome(incoming)
        acc = np.zeros((len(idx), 4), np.uint64)
        if rng is not None:
            pos, rows = self._sample(eff, len(idx), rng)
            if len(pos):
                np.bitwise_xor.at(acc, pos, eff.effects[rows])
        kcode = 0 if kind == "X" else 1
        if forced is not None and len(forced.shot):
            where = np.full(len(dx), -1, np.int64)
            where[idx] = np.arange(len(idx))
            local = where[forced.shot]
            sel = (local >= 0) & (forced.kind == kcode) & (forced.index == counters[kind][forced.shot])
            if sel.any():
                np.bitwise_xor.at(acc, local[sel], eff.effects[forced.row[sel]])
        counters[kind][idx] += 1
        dx[idx] ^= acc[:, 0]
        dz[idx] ^= acc[:, 1]
        return syn ^ acc[:, 2], acc[:, 3]

    # -- protocol --------------------------------------------------------------

    def _run_phase(self, kinds, t_arr, dx, dz, rng, forced, counters) -> _Phase:
        n_shots = len(dx)
        caps = np.array([timedec.round_cap(self.config.kind, int(t)) for t in range(self.t + 1)])
        cap = int(caps.max())
        ph = _Phase(n_shots, cap, kinds)
        active = np.ones(n_shots, bool)
        dirty = np.zeros(n_shots, bool)
        kind = self.config.kind
        for k in range(cap):
            idx = np.flatnonzero(active)
            if not len(idx):
                break
            changed = np.zeros(len(idx), bool)
            nflags = np.zeros(len(idx), np.int64)
            for kd in kinds:
                s, f = self._half_round(kd, idx, dx, dz, rng, forced, counters)
                ph.s[kd][idx, k] = s
                ph.f[kd][idx, k] = f
                if k:
                    changed |= s != ph.s[kd][idx, k - 1]
                nflags += np.bitwise_count(f).astype(np.int64)
            if k:
                ph.delta[idx, k - 1] = changed
            ph.flags[idx, k] = nflags
            ph.rounds[idx] = k + 1
            dirty[idx] |= changed | (nflags > 0)
            t_here = t_arr[idx]
            clean = ~dirty[idx]
            stop_clean = clean & (k + 1 >= t_here + 1)
            ph.chosen[idx[stop_clean]] = k + 1
            active[idx[stop_clean]] = False
            for j in np.flatnonzero(~clean).tolist():
                sh = idx[j]
                l = _decide(kind, tuple(ph.delta[sh, :k].tolist()), tuple(ph.flags[sh, : k + 1].tolist()), int(t_arr[sh]))
                if l:
                    ph.chosen[sh] = l
                    active[sh] = False
        if active.any():
            raise RuntimeError("stop rule did not terminate within its cap")
        return ph

    def run_block(self, n_shots: int, rng: np.random.Generator | None, forced: ForcedBatch | None = None,
                  initial: tuple[np.ndarray, np.ndarray] | None = None, initial_f_x: np.ndarray | None = None) -> BatchResult:
        """Simulate ``n_shots`` routines.

        Args:
            n_shots: Batch size.
            rng: Noise source; ``None`` runs noiselessly apart from ``forced``.
            forced: Deterministic faults.
            initial: Packed input ``(dx, dz)`` errors.
            initial_f_x: Packed inherited X-circuit flag vectors.
        """
        dx = np.zeros(n_shots, np.uint64) if initial is None else initial[0].astype(np.uint64).copy()
        dz = np.zeros(n_shots, np.uint64) if initial is None else initial[1].astype(np.uint64).copy()
        f0x = np.zeros(n_shots, np.uint64) if initial_f_x is None else initial_f_x.astype(np.uint64)
        counters = {"X": np.zeros(n_shots, np.int64), "Z": np.zeros(n_shots, np.int64)}
        t_full = np.full(n_shots, self.t, np.int64)
        rows = np.arange(n_shots)
        strategy = self.config.strategy
        if strategy == "joint":
            ph = self._run_phase(("X", "Z"), t_full, dx, dz, rng, forced, counters)
            cum = np.bitwise_xor.accumulate(ph.f["X"], axis=1)
            l, m = ph.chosen - 1, ph.rounds - 1
            s_ec = ph.s["Z"][rows, l]
            f_ec = f0x ^ cum[rows, l]
            f_rem = cum[rows, m] ^ cum[rows, l]
            rounds = ph.rounds.astype(float)
        else:
            first, second = ("X", "Z") if strategy == "XZ" else ("Z", "X")
            p1 = self._run_phase((first,), t_full, dx, dz, rng, forced, counters)
            t2 = np.empty(n_shots, np.int64)
            for i in range(n_shots):
                m1 = int(p1.rounds[i])
                t2[i] = _budget(tuple(p1.delta[i, : m1 - 1].tolist()), tuple(p1.flags[i, :m1].tolist()), self.t)
            p2 = self._run_phase((second,), t2, dx, dz, rng, forced, counters)
            all_f = {ph.kinds[0]: np.bitwise_xor.reduce(ph.f[ph.kinds[0]], axis=1) for ph in (p1, p2)}
            if strategy == "XZ":
                s_ec = p2.s["Z"][rows, p2.chosen - 1]
                f_ec = f0x ^ all_f["X"]
                f_rem = np.zeros(n_shots, np.uint64)
            else:
                s_ec = p1.s["Z"][rows, p1.chosen - 1]
                f_ec = f0x
                f_rem = all_f["X"]
            rounds = (p1.rounds + p2.rounds) / 2.0
        dx ^= self._recover(s_ec, f_ec)
        dx ^= self._recover(self._syndrome(dx), f_rem)
        logical = (np.bitwise_count(dx) & np.uint8(1)).astype(bool)
        return BatchResult(logical, rounds)

    def run(self, shots: int, seed: int | Sequence[int], block: int = DEFAULT_BLOCK) -> BatchResult:
        """Simulate ``shots`` routines in fixed-size blocks.

        Block ``b`` draws from ``SeedSequence([*seed, b])`` so results depend
        only on ``(seed, shots, block)``.
        """
        if shots < 1:
            raise ValueError("shots must be positive")
        entropy = [int(seed)] if np.isscalar(seed) else [int(v) for v in seed]
        outs, rounds = [], []
        for b, start in enumerate(range(0, shots, block)):
            size = min(block, shots - start)
            rng = np.random.default_rng(np.random.SeedSequence([*entropy, b]))
            res = self.run_block(size, rng)
            outs.append(res.logical_x_error)
            rounds.append(res.rounds_used)
        return BatchResult(np.concatenate(outs), np.concatenate(rounds))
