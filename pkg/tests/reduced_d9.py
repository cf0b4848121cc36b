"""Reduced-shot distance-9 pseudothreshold sweep shared by the acceptance suite.

Run directly to regenerate the recorded CSV::

    python3 tests/reduced_d9.py [--shots N] [--output PATH]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from flagqec.harness import ExperimentConfig, ResultPoint, read_csv, run_experiment, write_csv
from flagqec.sim import ProtocolSetup

RECORDED = Path(__file__).resolve().parent.parent / "results" / "d9_reduced.csv"

# (decoder, strategy, mim) -> reference pseudothreshold at d = 9
TABLE_D9 = {
    ("shor", "joint", False): 1.34e-4,
    ("shor", "joint", True): 2.79e-4,
    ("one_tailed", "joint", False): 2.11e-4,
    ("one_tailed", "joint", True): 3.91e-4,
    ("two_tailed", "joint", False): 3.38e-4,
    ("two_tailed", "joint", True): 6.30e-4,
    ("two_tailed", "XZ", True): 6.09e-4,
    ("two_tailed", "ZX", True): 1.43e-3,
}

# Strictly decreasing pseudothresholds required at d = 9.
ORDERING_D9 = [
    ("two_tailed", "ZX", True),
    ("two_tailed", "joint", True),
    ("one_tailed", "joint", True),
    ("shor", "joint", True),
    ("shor", "joint", False),
]

# Multiples of the reference value; the ends bracket the +/-35% tolerance band.
GRID_FACTORS = (0.6, 0.8, 1.0, 1.2, 1.45)
DEFAULT_SHOTS = 200_000


def configs(shots: int = DEFAULT_SHOTS, seed: int = 9009) -> list[ExperimentConfig]:
    out = []
    for i, ((dec, strat, mim), p_ref) in enumerate(TABLE_D9.items()):
        grid = tuple(float(f"{p_ref * f:.4g}") for f in GRID_FACTORS)
        out.append(ExperimentConfig(distances=(9,), decoder=dec, strategy=strat, mim=mim, p_grid=grid,
                                    shots=shots, seed=seed + i))
    return out


def run(shots: int = DEFAULT_SHOTS, output: Path | None = None, log=print) -> list[ResultPoint]:
    setups = {9: ProtocolSetup(9)}
    points: list[ResultPoint] = []
    for cfg in configs(shots):
        start = time.perf_counter()
        points += run_experiment(cfg, setups=setups)
        log(f"{cfg.decoder} {cfg.strategy} mim={int(cfg.mim)}: {time.perf_counter() - start:.0f} s")
        if output is not None:
            write_csv(points, output)
    return points


def load(path: Path = RECORDED) -> list[ResultPoint] | None:
    return read_csv(path) if path.exists() else None


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--shots", type=int, default=DEFAULT_SHOTS)
    parser.add_argument("--output", type=Path, default=RECORDED)
    args = parser.parse_args(argv)
    args.output.parent.mkdir(parents=True, exist_ok=True)
    run(args.shots, args.output, log=lambda s: print(s, flush=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
