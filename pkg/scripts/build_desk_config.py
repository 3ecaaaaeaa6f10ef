"""Build the shipped desk reference configuration (N=6 spins, M=8 bits).

Steps
-----
1. Cluster design.  Two strongly coupled spin pairs each carry four AB-quartet
   lines; their offsets and couplings are fitted so the eight lines sit on the
   slot grid.  A third pair sits at the outer edges so the band covers the
   central 60% of the significant spectral width.  Pairs interact through weak
   random couplings (seeded).
2. Write amplitude.  Starting at 10.5 Hz, the per-harmonic amplitude is reduced
   geometrically until the noiseless encode margin over a probe set reaches
   ``--target-margin``.
3. Erase amplitude.  At fixed 10 ms, the anti-phase amplitude minimizing the
   residual of a single erased slot is found by bounded scalar search.

Usage::

    python3 scripts/build_desk_config.py --out src/spin_processor/data/desk_config.json
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np
from scipy.optimize import least_squares

from spin_processor.cluster import SpinCluster, analyze
from spin_processor.codec import int_to_bits
from spin_processor.experiments import Experiment, ExperimentConfig, write_json

TWO_PI = 2 * math.pi
PROBES = (178, 77, 85, 170, 1, 254)


def ab_lines(f_a: float, f_b: float, d_hz: float) -> np.ndarray:
    cl = SpinCluster([TWO_PI * f_a, TWO_PI * f_b], [[0, TWO_PI * d_hz], [TWO_PI * d_hz, 0]])
    return np.sort(analyze(cl)[2].omega / TWO_PI)


def fit_pair(targets: np.ndarray, delta_f: float) -> tuple[float, float, float]:
    x0 = [targets[0] + 0.5 * delta_f, targets[3] - 0.5 * delta_f, delta_f / 2]
    sol = least_squares(lambda p: ab_lines(*p) - targets, x0, xtol=1e-14, ftol=1e-14)
    return tuple(float(v) for v in sol.x)


def design_cluster(delta_f, centre, weak_hz, outer_d_hz, seed):
    f0 = centre - 3.5 * delta_f
    grid = f0 + delta_f * np.arange(8)
    a1, b1, d1 = fit_pair(grid[:4], delta_f)
    a2, b2, d2 = fit_pair(grid[4:], delta_f)
    span = 7 * delta_f / 0.6
    offsets = [a1, b1, a2, b2, centre - span / 2 + outer_d_hz, centre + span / 2 - outer_d_hz]
    c = np.zeros((6, 6))
    c[0, 1] = c[1, 0] = d1
    c[2, 3] = c[3, 2] = d2
    c[4, 5] = c[5, 4] = outer_d_hz
    rng = np.random.default_rng(seed)
    for i in range(6):
        for j in range(i + 1, 6):
            if c[i, j] == 0:
                c[i, j] = c[j, i] = weak_hz * rng.uniform(-1, 1)
    return f0, {"n_spins": 6, "offsets_hz": offsets, "couplings_hz": c.tolist()}


def margins(exp: Experiment, op: str) -> float:
    """Smallest signed distance from the 0.5 threshold, relative to the reference."""
    cal = exp.calibrate()
    ref = np.array(cal.reference)
    worst = math.inf
    for x in PROBES:
        res = exp.encode(x, cal) if op == "encode" else exp.not_gate(x, cal)
        want = int_to_bits(x if op == "encode" else 255 - x, 8)
        rel = np.array(res.slot_amplitudes) / ref - 0.5
        worst = min(worst, float(np.min(np.where(want, rel, -rel))))
    return worst


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", required=True)
    ap.add_argument("--delta-f", type=float, default=300.0)
    ap.add_argument("--centre", type=float, default=2300.0)
    ap.add_argument("--weak-hz", type=float, default=0.3)
    ap.add_argument("--outer-d-hz", type=float, default=40.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--start-hz", type=float, default=10.5)
    ap.add_argument("--shrink", type=float, default=0.8)
    ap.add_argument("--target-margin", type=float, default=0.4)
    args = ap.parse_args(argv)

    f0, cluster = design_cluster(args.delta_f, args.centre, args.weak_hz, args.outer_d_hz, args.seed)
    base = ExperimentConfig.from_dict(
        {
            "cluster": cluster,
            "band": {"f_start_hz": f0, "delta_f_hz": args.delta_f, "n_bits": 8},
            "write": {"amplitude_hz": args.start_hz, "duration_ms": 50.0},
            "erase": {"amplitude_hz": 2.9, "duration_ms": 10.0},
            "acquisition": {"n_samples": 2048, "dwell_s": 1e-4, "zero_fill": 4},
            "seed": args.seed,
        }
    )

    amp = args.start_hz
    while True:
        cfg = base.replace(write_amplitude_hz=amp)
        m = margins(Experiment(cfg), "encode")
        print(f"write {amp:.4f} Hz: encode margin {m:+.3f}", file=sys.stderr)
        if m >= args.target_margin or amp < 0.5:
            break
        amp *= args.shrink
    exp = Experiment(cfg)
    erase = exp.tune_erase(bit=0)
    cfg = cfg.replace(erase_amplitude_hz=round(erase, 4))
    print(f"erase {cfg.erase_amplitude_hz} Hz x {cfg.erase_duration_ms} ms", file=sys.stderr)
    print(f"NOT margin {margins(Experiment(cfg), 'not'):+.3f}", file=sys.stderr)
    write_json(args.out, cfg.to_dict())


if __name__ == "__main__":
    main()
