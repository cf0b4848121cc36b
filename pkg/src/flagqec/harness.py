"""Experiment configuration, Monte Carlo orchestration and result analysis.

Also hosts the lookup-table memory-footprint formulas and the ``verify``
report used by the command line.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from .codes import CssCode, build_hex_color_code
from .faultcode import CnotOrdering, build_fault_check_matrix
from .lookup import DistinguishabilityError, DistinguishabilityReport, MetricsRecord, build_cache, memory_metrics
from .sim.batch import BatchSimulator
from .sim.circuit import NoiseParams
from .sim.protocol import DecoderConfig, ProtocolSetup

log = logging.getLogger(__name__)

THREADS_ENV = "FLAGQEC_THREADS"
CSV_COLUMNS = ("distance", "decoder", "strategy", "mim", "p", "shots", "failures", "p_l", "ci_low", "ci_high", "avg_rounds")


class ConfigError(ValueError):
    pass


class NoCrossingError(ValueError):
    """The simulated points do not bracket a crossing."""


def thread_count() -> int:
    """Worker threads from ``FLAGQEC_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        n = int(raw)
    except ValueError as err:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {raw!r}") from err
    return max(1, n)


# -- configuration -----------------------------------------------------------


def _as_bool(v: str | bool) -> bool:
    if isinstance(v, bool):
        return v
    low = str(v).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {v!r}")


def _as_list(v, cast) -> tuple:
    if isinstance(v, (list, tuple)):
        return tuple(cast(x) for x in v)
    return tuple(cast(x) for x in str(v).replace(" ", "").split(",") if x)


@dataclass(frozen=True)
class ExperimentConfig:
    """One sweep: a decoder configuration over distances and physical rates.

    Attributes:
        distances: Code distances (odd).
        decoder: ``"shor"``, ``"one_tailed"`` or ``"two_tailed"``.
        strategy: ``"joint"``, ``"XZ"`` or ``"ZX"``.
        mim: Enable the MIM fallback.
        rho: MIM radius; ``None`` means ``t``.
        p_grid: Physical error rates, each in [0, 1).
        shots: Shots per point.
        seed: Base seed; point ``i`` of distance ``d`` uses ``(seed, d, i)``.
        p_idle: Idling noise strength.
        output: CSV path, or ``None``.
        block: Shots per random block.
    """

    distances: tuple[int, ...] = (3,)
    decoder: str = "shor"
    strategy: str = "joint"
    mim: bool = False
    rho: int | None = None
    p_grid: tuple[float, ...] = (1e-3,)
    shots: int = 10_000
    seed: int = 0
    p_idle: float = 0.0
    output: str | None = None
    block: int = 20_000

    def __post_init__(self):
        if self.shots < 1:
            raise ConfigError(f"shots must be >= 1, got {self.shots}")
        if not self.distances or any(d < 3 or d % 2 == 0 for d in self.distances):
            raise ConfigError(f"distances must be odd and >= 3, got {self.distances}")
        if not self.p_grid or any(not 0.0 <= p < 1.0 for p in self.p_grid):
            raise ConfigError(f"p grid values must lie in [0, 1), got {self.p_grid}")
        if not 0.0 <= self.p_idle <= 1.0:
            raise ConfigError(f"p_idle must lie in [0, 1], got {self.p_idle}")
        if self.block < 1:
            raise ConfigError("block must be >= 1")
        try:
            self.decoder_config()
        except ValueError as err:
            raise ConfigError(str(err)) from err

    def decoder_config(self) -> DecoderConfig:
        return DecoderConfig(self.decoder, self.strategy, self.mim, self.rho)

    @classmethod
    def from_mapping(cls, values: Mapping[str, object]) -> ExperimentConfig:
        """Build from string-valued settings (file or CLI); unknown keys are errors."""
        known = {f.name for f in fields(cls)}
        kw: dict[str, object] = {}
        for raw_key, v in values.items():
            key = raw_key.strip().replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown config key {raw_key!r}")
            if v is None:
                continue
            if key == "distances":
                kw[key] = _as_list(v, int)
            elif key == "p_grid":
                kw[key] = _as_list(v, float)
            elif key == "mim":
                kw[key] = _as_bool(v)
            elif key in ("shots", "seed", "block"):
                kw[key] = int(v)
            elif key == "rho":
                kw[key] = None if str(v).lower() in ("", "none") else int(v)
            elif key == "p_idle":
                kw[key] = float(v)
            else:
                kw[key] = str(v).strip()
        return cls(**kw)

    @classmethod
    def read(cls, path: str | Path, overrides: Mapping[str, object] | None = None) -> ExperimentConfig:
        """Parse a flat ``key = value`` file; ``#`` starts a comment. Overrides win."""
        return cls.from_mapping({**parse_config_text(Path(path).read_text()), **(overrides or {})})


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key] = value
    return out


# -- results -----------------------------------------------------------------


def wilson_interval(failures: int, shots: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    ci = stats.binomtest(failures, shots).proportion_ci(confidence_level=confidence, method="wilson")
    return float(ci.low), float(ci.high)


@dataclass(frozen=True)
class ResultPoint:
    """Logical failure statistics at one physical rate."""

    p: float
    shots: int
    failures: int
    avg_rounds: float
    distance: int = 0
    decoder: str = ""
    strategy: str = ""
    mim: bool = False
    ci_low: float = field(default=None)
    ci_high: float = field(default=None)

    def __post_init__(self):
        if self.ci_low is None or self.ci_high is None:
            lo, hi = wilson_interval(self.failures, self.shots)
            object.__setattr__(self, "ci_low", lo)
            object.__setattr__(self, "ci_high", hi)

    @property
    def p_l(self) -> float:
        return self.failures / self.shots

    def row(self) -> dict[str, object]:
        return {
            "distance": self.distance,
            "decoder": self.decoder,
            "strategy": self.strategy,
            "mim": int(self.mim),
            "p": repr(float(self.p)),
            "shots": self.shots,
            "failures": self.failures,
            "p_l": repr(float(self.p_l)),
            "ci_low": repr(float(self.ci_low)),
            "ci_high": repr(float(self.ci_high)),
            "avg_rounds": repr(float(self.avg_rounds)),
        }


def write_csv(points: Iterable[ResultPoint], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for pt in points:
            writer.writerow(pt.row())


def read_csv(path: str | Path) -> list[ResultPoint]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(CSV_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ConfigError(f"CSV is missing columns: {sorted(missing)}")
        return [
            ResultPoint(
                p=float(row["p"]),
                shots=int(row["shots"]),
                failures=int(row["failures"]),
                avg_rounds=float(row["avg_rounds"]),
                distance=int(row["distance"]),
                decoder=row["decoder"],
                strategy=row["strategy"],
                mim=_as_bool(row["mim"]),
                ci_low=float(row["ci_low"]),
                ci_high=float(row["ci_high"]),
            )
            for row in reader
        ]


# -- orchestration -----------------------------------------------------------


def run_experiment(
    config: ExperimentConfig,
    setups: Mapping[int, ProtocolSetup] | None = None,
    progress: Callable[[ResultPoint], None] | None = None,
) -> list[ResultPoint]:
    """Simulate every ``(distance, p)`` point of ``config``.

    Tables are built once per distance unless ``setups`` supplies them. Points
    run on ``FLAGQEC_THREADS`` threads; output order follows the config.

    Raises:
        DistinguishabilityError: if a table cannot be built at radius ``t``.
    """
    setups = dict(setups or {})
    dec = config.decoder_config()
    points: list[ResultPoint] = []
    for d in config.distances:
        if d not in setups:
            setups[d] = ProtocolSetup(d, include_idle=config.p_idle > 0)
        setup = setups[d]

        def one(i_p: tuple[int, float]) -> ResultPoint:
            i, p = i_p
            sim = BatchSimulator(setup, dec, NoiseParams(p, config.p_idle))
            res = sim.run(config.shots, (config.seed, d, i), block=config.block)
            pt = ResultPoint(p, res.shots, res.failures, float(res.rounds_used.mean()), d, config.decoder, config.strategy, config.mim)
            if progress:
                progress(pt)
            return pt

        jobs = list(enumerate(config.p_grid))
        workers = min(thread_count(), len(jobs))
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                points += list(pool.map(one, jobs))
        else:
            points += [one(job) for job in jobs]
    if config.output:
        write_csv(points, config.output)
    return points


# -- pseudothresholds --------------------------------------------------------


@dataclass(frozen=True)
class PseudothresholdEstimate:
    """Crossing of ``p_L(p)`` with ``2p/3``.

    ``low`` and ``high`` come from repeating the interpolation on the upper
    and lower interval endpoints; ``uncertainty`` is half their spread.
    """

    p_th: float
    uncertainty: float
    low: float
    high: float
    bracket: tuple[float, float]


def _crossing(p1: float, y1: float, p2: float, y2: float) -> float:
    """Root of ``log y - log(2p/3)`` on the log-log line through two points."""
    x1, x2 = math.log(p1), math.log(p2)
    g1 = math.log(y1) - math.log(2 * p1 / 3)
    g2 = math.log(y2) - math.log(2 * p2 / 3)
    if g1 == g2:
        raise NoCrossingError("flat bracket")
    return math.exp(x1 + (x2 - x1) * g1 / (g1 - g2))


def estimate_pseudothreshold(points: Sequence[ResultPoint]) -> PseudothresholdEstimate:
    """Interpolate the first sign change of ``p_L - 2p/3`` on log-log axes.

    Noiseless points (``p = 0``) are ignored.

    Raises:
        NoCrossingError: if no adjacent pair brackets the crossing, or a
            bracketing point has no failures.
    """
    pts = sorted((q for q in points if q.p > 0), key=lambda q: q.p)
    if len(pts) < 2:
        raise NoCrossingError("need at least two points")
    for a, b in zip(pts[:-1], pts[1:]):
        if (a.p_l - 2 * a.p / 3) <= 0 < (b.p_l - 2 * b.p / 3) or (a.p_l - 2 * a.p / 3) >= 0 > (b.p_l - 2 * b.p / 3):
            if a.failures == 0 or b.failures == 0:
                raise NoCrossingError(f"bracketing point without failures near p={a.p:g}")
            p_th = _crossing(a.p, a.p_l, b.p, b.p_l)
            # Higher p_L means an earlier crossing and vice versa.
            edge = []
            for ya, yb in ((a.ci_high, b.ci_high), (a.ci_low, b.ci_low)):
                try:
                    edge.append(_crossing(a.p, ya, b.p, yb) if ya > 0 and yb > 0 else math.nan)
                except NoCrossingError:
                    edge.append(math.nan)
            lo, hi = edge
            spread = [v for v in (lo, hi) if math.isfinite(v)]
            unc = (max(spread + [p_th]) - min(spread + [p_th])) / 2 if spread else math.nan
            return PseudothresholdEstimate(p_th, unc, lo, hi, (a.p, b.p))
    raise NoCrossingError("p_L - 2p/3 does not change sign over the grid")


def effective_threshold(small: Sequence[ResultPoint], large: Sequence[ResultPoint]) -> float:
    """Rate where the larger code stops beating the smaller one.

    Both series must share their ``p`` grid. Log-log interpolation between
    the two grid points where the order of the curves flips.
    """
    a = {q.p: q for q in small}
    b = {q.p: q for q in large}
    grid = sorted(set(a) & set(b))
    prev = None
    for p in grid:
        if a[p].failures == 0 or b[p].failures == 0:
            prev = None
            continue
        g = math.log(b[p].p_l) - math.log(a[p].p_l)
        if prev is not None and (prev[1] < 0) != (g < 0):
            x1, x2 = math.log(prev[0]), math.log(p)
            return math.exp(x1 + (x2 - x1) * prev[1] / (prev[1] - g))
        prev = (p, g)
    raise NoCrossingError("curves do not cross over the shared grid")


def loglog_slope(points: Sequence[ResultPoint]) -> float:
    """Least-squares slope of ``log p_L`` against ``log p``."""
    pts = [q for q in points if q.failures > 0]
    if len(pts) < 2:
        raise ValueError("need two points with failures to fit a slope")
    x = np.log([q.p for q in pts])
    y = np.log([q.p_l for q in pts])
    return float(np.polyfit(x, y, 1)[0])


def two_proportion_z(k1: int, n1: int, k2: int, n2: int) -> tuple[float, float]:
    """Pooled two-proportion z statistic and its two-sided p-value."""
    pooled = (k1 + k2) / (n1 + n2)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    if se == 0:
        return 0.0, 1.0
    z = (k1 / n1 - k2 / n2) / se
    return z, float(2 * stats.norm.sf(abs(z)))


# -- memory footprint --------------------------------------------------------

FOOTPRINT_MODES = ("stab", "stab_cro", "css", "css_cro", "css_cro_so")


@dataclass(frozen=True)
class FootprintCounts:
    """Code sizes and nontrivial-syndrome counts entering the table-size formulas.

    Attributes:
        n, k: Code length and logical qubits.
        r_x, r_z: Number of X- and Z-type generators.
        t_x, t_z: Distinct nontrivial syndromes of each type.
        t_xz: Distinct syndromes with both types nontrivial.
    """

    n: int
    k: int
    r_x: int
    r_z: int
    t_x: int
    t_z: int
    t_xz: int

    @property
    def t_stab(self) -> int:
        return self.t_x + self.t_z + 1 + self.t_xz

    @property
    def rate(self) -> Fraction:
        return Fraction(self.k, self.n)


def m_stab(c: FootprintCounts) -> int:
    return c.t_stab * (4 * c.n - 2 * c.k)


def m_stab_cro(c: FootprintCounts) -> int:
    return c.t_stab * (2 * c.n)


def m_css(c: FootprintCounts) -> int:
    return (c.t_x + 1) * (2 * c.r_x + c.n) + (c.t_z + 1) * (2 * c.r_z + c.n)


def m_css_cro(c: FootprintCounts) -> int:
    return (c.t_x + 1) * (2 * c.r_x + c.k) + (c.t_z + 1) * (2 * c.r_z + c.k)


def m_css_cro_so(c: FootprintCounts) -> int:
    """Single shared table of a self-orthogonal code: ``n (T + 1)`` bits."""
    if c.t_x != c.t_z or c.r_x != c.r_z:
        raise ValueError("the shared-table count needs T_X = T_Z and r_X = r_Z")
    return c.n * (c.t_x + 1)


_FOOTPRINT = {"stab": m_stab, "stab_cro": m_stab_cro, "css": m_css, "css_cro": m_css_cro, "css_cro_so": m_css_cro_so}


def footprint_bits(c: FootprintCounts, mode: str) -> int:
    if mode not in _FOOTPRINT:
        raise ValueError(f"unknown footprint mode {mode!r}; expected one of {FOOTPRINT_MODES}")
    return _FOOTPRINT[mode](c)


def shared_table_ratio_bound(c: FootprintCounts) -> Fraction:
    """Upper bound ``1 / (8 - 4R)`` on the shared-table to generic-table size ratio."""
    return 1 / (8 - 4 * c.rate)


def footprint_report(code: CssCode, table=None, mode: str = "css_cro_so", t_x: int | None = None,
                     t_xz: int | None = None) -> dict[str, object]:
    """Evaluate one footprint formula for a self-orthogonal code.

    ``T = T_X = T_Z`` is ``t_x`` when given, otherwise the number of
    nontrivial table entries. The generic-stabilizer modes also need
    ``t_xz``, the number of syndromes with both types nontrivial.

    Raises:
        ValueError: on missing counts or an unknown mode.
    """
    if mode not in FOOTPRINT_MODES:
        raise ValueError(f"unknown footprint mode {mode!r}; expected one of {FOOTPRINT_MODES}")
    if t_x is None:
        if table is None:
            raise ValueError("footprint needs T (t_x) or a lookup table")
        t_x = len(table) - 1
    if t_xz is None and mode.startswith("stab"):
        raise ValueError(f"mode {mode!r} needs the mixed-syndrome count t_xz")
    counts = FootprintCounts(code.n, code.k, code.r, code.r, t_x, t_x, t_xz or 0)
    out: dict[str, object] = {"mode": mode, "bits": footprint_bits(counts, mode), "counts": asdict(counts)}
    if t_xz is not None:
        out["t_stab"] = counts.t_stab
        out["ratio_to_stab"] = Fraction(m_css_cro_so(counts), m_stab(counts))
        out["ratio_bound"] = shared_table_ratio_bound(counts)
    return out


# -- verification ------------------------------------------------------------


@dataclass
class VerifyReport:
    distance: int
    t: int
    metrics: MetricsRecord | None
    report: DistinguishabilityReport

    def lines(self) -> list[str]:
        out = [f"distance: {self.distance}", f"t: {self.t}"]
        if self.metrics is not None:
            m = self.metrics
            out += [
                f"columns: {m.columns}",
                f"unique_columns: {m.unique_columns}",
                f"fault_combinations: {m.fault_combinations}",
                f"cache_size: {m.cache_size}",
                f"build_seconds: {m.build_seconds:.3f}",
                f"table_bytes: {m.table_bytes}",
            ]
        out.append(f"distinguishable: {self.report.distinguishable}")
        out.append(f"t_eff: {self.report.t_eff}")
        if self.report.conflict_witness:
            a, b = self.report.conflict_witness
            out.append(f"witness: class-0 columns {list(a)} vs class-1 columns {list(b)}")
        return out


def verify_code(distance: int | None = None, ordering: CnotOrdering | None = None, code: CssCode | None = None) -> VerifyReport:
    """Build the fault check matrix and table and report metrics and distinguishability."""
    if code is None:
        if distance is None:
            raise ValueError("give a distance or a code")
        code, _ = build_hex_color_code(distance)
    hf = build_fault_check_matrix(code, ordering)
    try:
        table = build_cache(hf, code.t)
    except DistinguishabilityError as err:
        return VerifyReport(code.d, code.t, None, err.report)
    return VerifyReport(code.d, code.t, memory_metrics(table, hf), DistinguishabilityReport(True, code.t))


__all__ = [
    "CSV_COLUMNS",
    "ConfigError",
    "ExperimentConfig",
    "FootprintCounts",
    "NoCrossingError",
    "PseudothresholdEstimate",
    "ResultPoint",
    "VerifyReport",
    "effective_threshold",
    "estimate_pseudothreshold",
    "footprint_bits",
    "footprint_report",
    "loglog_slope",
    "read_csv",
    "run_experiment",
    "shared_table_ratio_bound",
    "thread_count",
    "two_proportion_z",
    "verify_code",
    "wilson_interval",
    "write_csv",
]
