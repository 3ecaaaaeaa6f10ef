"""Command-line interface.

Subcommands::

    transitions <cluster.json>
    classify    --omega-hz V --n N [--omega-loc-hz V] [--kappa K]
    calibrate   <cfg.json>
    encode      <cfg.json> --x DECIMAL
    not         <cfg.json> --x DECIMAL
    sweep       <cfg.json> --omegas A,B,...

Common flags: ``--out DIR``, ``--seed``, ``--transients``, ``--format csv|json``,
``--workers``.  Exit codes: 0 ok, 2 config error, 3 calibration failure,
4 integration-stability guard.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

from .cluster import SpinCluster, analyze, build_cluster
from .errors import CalibrationError, ConfigError, StabilityError
from .experiments import (
    Experiment,
    ExperimentConfig,
    RunResult,
    desk_config,
    load_config,
    write_json,
    write_run,
    write_sweep,
)
from .regime import DEFAULT_KAPPA, classify_regime

TWO_PI = 2.0 * math.pi


def _load_json(path) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _config(args) -> ExperimentConfig:
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        raise ConfigError(f"cannot read {args.config}: {exc.strerror}") from None
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.transients is not None:
        changes["n_transients"] = args.transients
    if args.workers is not None:
        changes["workers"] = args.workers
    return cfg.replace(**changes) if changes else cfg


def _emit(obj) -> None:
    json.dump(obj, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _parse_x(text: str, n_bits: int) -> int:
    try:
        x = int(text, 10)
    except ValueError:
        raise ConfigError(f"--x must be a decimal integer, got {text!r}") from None
    if not 0 <= x < (1 << n_bits):
        raise ConfigError(f"--x must be in [0, 2^{n_bits}), got {x}")
    return x


def _finish(result: RunResult, cfg: ExperimentConfig, args, prefix: str) -> None:
    if args.out:
        write_run(result, args.out, prefix, cfg.dwell_s, args.format)
    out = result.decoded_json()
    _emit({k: out[k] for k in ("bits_lsb_first", "value_decimal", "metadata")})
    print(f"wall time {result.metadata['wall_time_s']:.2f} s", file=sys.stderr)


def _calibration(exp: Experiment, args) -> RunResult:
    """Reference from ``--calibration`` if given, else a fresh calibration run."""
    if args.calibration is None:
        return exp.calibrate()
    d = _load_json(args.calibration)
    ref = d.get("metadata", {}).get("reference")
    if ref is None or len(ref) != exp.cfg.band.n_bits:
        raise CalibrationError(f"{args.calibration} holds no usable reference amplitudes")
    if d["metadata"].get("config_hash") != exp.cfg.hash:
        print("warning: calibration was recorded with a different config", file=sys.stderr)
    return RunResult(None, None, ref, [1] * len(ref), None, {"reference": ref})


# -- subcommands --------------------------------------------------------------


def cmd_transitions(args) -> None:
    d = _load_json(args.cluster)
    cluster = build_cluster(d.get("cluster", d))
    _, es, tt = analyze(cluster)
    rows = [
        {"i": i, "j": j, "freq_hz": w / TWO_PI, "omega_rad_s": w, "weight": wt}
        for i, j, w, wt in tt.entries
    ]
    summary = {
        "n_spins": cluster.n_spins,
        "n_transitions": len(tt),
        "omega_loc_rad_s": tt.omega_loc,
        "omega_loc_hz": tt.omega_loc / TWO_PI,
        "degenerate": bool(es.degenerate),
    }
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        if args.format == "csv":
            with open(out / "transitions.csv", "w", newline="\n") as fh:
                fh.write("i,j,freq_hz,omega_rad_s,weight\n")
                for r in rows:
                    fh.write(
                        f"{r['i']},{r['j']},{r['freq_hz']!r},{r['omega_rad_s']!r},{r['weight']!r}\n"
                    )
            write_json(out / "transitions_summary.json", summary)
        else:
            write_json(out / "transitions.json", {**summary, "transitions": rows})
    _emit(summary if args.out else {**summary, "transitions": rows})


def cmd_classify(args) -> None:
    if args.omega_loc_hz is None:
        cluster: SpinCluster = build_cluster(desk_config().cluster)
        if cluster.n_spins != args.n:
            raise ConfigError("--omega-loc-hz is required unless N matches the desk cluster (6)")
        omega_loc = analyze(cluster)[2].omega_loc
    else:
        omega_loc = TWO_PI * args.omega_loc_hz
    try:
        report = classify_regime(TWO_PI * args.omega_hz, args.n, omega_loc, args.kappa)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    _emit(report.to_dict())


def cmd_calibrate(args) -> None:
    cfg = _config(args)
    result = Experiment(cfg).calibrate()
    _finish(result, cfg, args, "calibration")


def cmd_encode(args) -> None:
    cfg = _config(args)
    exp = Experiment(cfg)
    x = _parse_x(args.x, cfg.band.n_bits)
    result = exp.encode(x, _calibration(exp, args))
    _finish(result, cfg, args, "encode")


def cmd_not(args) -> None:
    cfg = _config(args)
    exp = Experiment(cfg)
    x = _parse_x(args.x, cfg.band.n_bits)
    result = exp.not_gate(x, _calibration(exp, args))
    _finish(result, cfg, args, "not")


def cmd_sweep(args) -> None:
    cfg = _config(args)
    try:
        omegas = [float(v) for v in args.omegas.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"--omegas must be a comma-separated list of numbers") from None
    if not omegas:
        raise ConfigError("--omegas is empty")
    if args.hz:
        omegas = [TWO_PI * w for w in omegas]
    result = Experiment(cfg).sweep(
        omegas,
        duration=None if args.duration_ms is None else args.duration_ms * 1e-3,
        target=args.target,
    )
    if args.out:
        write_sweep(result, args.out)
    _emit(
        {
            "target": result.target,
            "target_hz": result.target_omega / TWO_PI,
            "duration_s": result.duration,
            "rows": result.rows,
        }
    )


# -- parser ---------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory (created if missing)")
    common.add_argument("--format", choices=("csv", "json"), default="csv")

    run = argparse.ArgumentParser(add_help=False, parents=[common])
    run.add_argument("config", help="experiment config JSON")
    run.add_argument("--seed", type=int, help="override the config seed")
    run.add_argument("--transients", type=int, help="override n_transients")
    run.add_argument("--workers", type=int, help="parallel transient workers")

    ap = argparse.ArgumentParser(prog="spin-processor", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("transitions", parents=[common], help="transition table of a cluster")
    p.add_argument("cluster", help="cluster JSON (or an experiment config)")
    p.set_defaults(func=cmd_transitions)

    p = sub.add_parser("classify", help="excitation regime of a drive amplitude")
    p.add_argument("--omega-hz", type=float, required=True)
    p.add_argument("--n", type=int, required=True, help="number of spins")
    p.add_argument("--omega-loc-hz", type=float, help="spectral width (default: desk cluster)")
    p.add_argument("--kappa", type=float, default=DEFAULT_KAPPA)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("calibrate", parents=[run], help="all-ones reference run")
    p.set_defaults(func=cmd_calibrate)

    for name, func, text in (
        ("encode", cmd_encode, "write and read back an integer"),
        ("not", cmd_not, "parallel bitwise NOT of an integer"),
    ):
        p = sub.add_parser(name, parents=[run], help=text)
        p.add_argument("--x", required=True, help="decimal integer")
        p.add_argument("--calibration", help="calibration_result.json to reuse")
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", parents=[run], help="single-transition amplitude sweep")
    p.add_argument("--omegas", required=True, help="comma-separated amplitudes, rad/s")
    p.add_argument("--hz", action="store_true", help="read --omegas in Hz")
    p.add_argument("--target", type=int, help="transition-table index to drive")
    p.add_argument("--duration-ms", type=float)
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except StabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return StabilityError.exit_code
    except CalibrationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CalibrationError.exit_code
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
