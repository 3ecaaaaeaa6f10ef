"""End-to-end experiments: calibration, encode, NOT gate and amplitude sweep.

A run applies a pulse program to the thermal state, acquires the FID, averages
``n_transients`` noisy copies of it, and reads the slots of the band plan.

Reproducibility: the noise of transient ``t`` in a run tagged ``tag`` is drawn
from ``SeedSequence(seed, spawn_key=(crc32(tag), t))``, and transients are
summed in fixed-size chunks in index order, so the averaged FID is
bit-identical for any worker count.
"""

from __future__ import annotations

import copy
import hashlib
import json
import math
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .cluster import SpinCluster, TransitionTable, analyze, build_cluster
from .codec import BandPlan, bits_to_int, bitwise_not_oracle, int_to_bits
from .errors import CalibrationError, ConfigError
from .propagate import (
    PropagationParams,
    acquire_fid,
    evolve_program,
    thermal_state,
)
from .pulses import Harmonic, PulseProgram, PulseSegment, anti_phase, comb_from_bits
from .readout import (
    MagnitudeSpectrum,
    ThresholdPolicy,
    complex_spectrum,
    decode_bits,
    magnitude_spectrum,
    noise_floor,
    slot_amplitudes,
)
from .regime import RegimeReport, classify_regime

TWO_PI = 2.0 * math.pi
TRANSIENT_CHUNK = 64


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to reproduce a run.  Units follow the file format:
    Hz, ms and seconds as named."""

    cluster: Mapping[str, Any]
    band: BandPlan
    write_amplitude_hz: float = 10.5
    write_duration_ms: float = 50.0
    write_phase_deg: float = 0.0
    erase_amplitude_hz: float = 2.9
    erase_duration_ms: float = 10.0
    n_samples: int = 2048
    dwell_s: float = 1e-4
    zero_fill: int = 4
    noise_sigma: float = 0.0
    n_transients: int = 1
    seed: int = 0
    workers: int = 1
    dt_s: Optional[float] = None
    method: str = "trotter2"
    threshold_fraction: float = 0.5
    sweep_duration_ms: float = 50.0

    def __post_init__(self):
        if self.n_transients < 1:
            raise ConfigError("n_transients must be >= 1")
        if self.noise_sigma < 0:
            raise ConfigError("noise sigma must be >= 0")
        if self.n_samples < 2 or not self.dwell_s > 0:
            raise ConfigError("acquisition needs n_samples >= 2 and dwell > 0")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        for name in ("write_duration_ms", "erase_duration_ms", "sweep_duration_ms"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.write_amplitude_hz < 0 or self.erase_amplitude_hz < 0:
            raise ConfigError("amplitudes must be >= 0")

    # -- file format -------------------------------------------------------

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ExperimentConfig":
        try:
            b = d["band"]
            band = BandPlan(
                float(b["f_start_hz"]),
                float(b["delta_f_hz"]),
                int(b["n_bits"]),
                bool(b.get("reversed", False)),
            )
            w = d.get("write", {})
            e = d.get("erase", {})
            a = d.get("acquisition", {})
            p = d.get("propagation", {})
            kw = dict(
                cluster=copy.deepcopy(dict(d["cluster"])),
                band=band,
                write_amplitude_hz=float(w.get("amplitude_hz", 10.5)),
                write_duration_ms=float(w.get("duration_ms", 50.0)),
                write_phase_deg=float(w.get("phase_deg", 0.0)),
                erase_amplitude_hz=float(e.get("amplitude_hz", 2.9)),
                erase_duration_ms=float(e.get("duration_ms", 10.0)),
                n_samples=int(a.get("n_samples", 2048)),
                dwell_s=float(a.get("dwell_s", 1e-4)),
                zero_fill=int(a.get("zero_fill", 4)),
                noise_sigma=float(d.get("noise", {}).get("sigma", 0.0)),
                n_transients=int(d.get("n_transients", 1)),
                seed=int(d.get("seed", 0)),
                workers=int(d.get("workers", 1)),
                dt_s=None if p.get("dt_s") is None else float(p["dt_s"]),
                method=str(p.get("method", "trotter2")),
                threshold_fraction=float(d.get("threshold_fraction", 0.5)),
                sweep_duration_ms=float(d.get("sweep", {}).get("duration_ms", 50.0)),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad experiment config: {exc}") from None
        return cls(**kw)

    def to_dict(self) -> dict:
        return {
            "cluster": copy.deepcopy(dict(self.cluster)),
            "band": {
                "f_start_hz": self.band.f_start,
                "delta_f_hz": self.band.delta_f,
                "n_bits": self.band.n_bits,
                "reversed": self.band.reversed,
            },
            "write": {
                "amplitude_hz": self.write_amplitude_hz,
                "duration_ms": self.write_duration_ms,
                "phase_deg": self.write_phase_deg,
            },
            "erase": {
                "amplitude_hz": self.erase_amplitude_hz,
                "duration_ms": self.erase_duration_ms,
            },
            "acquisition": {
                "n_samples": self.n_samples,
                "dwell_s": self.dwell_s,
                "zero_fill": self.zero_fill,
            },
            "noise": {"sigma": self.noise_sigma},
            "n_transients": self.n_transients,
            "seed": self.seed,
            "workers": self.workers,
            "propagation": {"dt_s": self.dt_s, "method": self.method},
            "threshold_fraction": self.threshold_fraction,
            "sweep": {"duration_ms": self.sweep_duration_ms},
        }

    def replace(self, **changes) -> "ExperimentConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(changes)
        return ExperimentConfig(**d)

    @property
    def hash(self) -> str:
        """SHA-256 of the canonical JSON form.

        ``workers`` is excluded since it cannot change any output.
        """
        d = self.to_dict()
        d.pop("workers")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return ExperimentConfig.from_dict(d)


def desk_config() -> ExperimentConfig:
    """The shipped N=6, M=8 reference configuration."""
    text = resources.files("spin_processor").joinpath("data/desk_config.json").read_text()
    return ExperimentConfig.from_dict(json.loads(text))


# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    """Output of one experiment.

    ``metadata`` holds at least ``kind``, ``seed``, ``config_hash`` and
    ``wall_time_s``.  Everything except ``wall_time_s`` is deterministic.
    """

    fid: np.ndarray
    spectrum: MagnitudeSpectrum
    slot_amplitudes: list[float]
    bits: list[int]
    regime: RegimeReport
    metadata: dict = field(default_factory=dict)

    @property
    def value(self) -> int:
        return bits_to_int(self.bits)

    @property
    def value_decimal(self) -> str:
        return str(self.value)

    @property
    def reference(self) -> Optional[list[float]]:
        return self.metadata.get("reference")

    def decoded_json(self) -> dict:
        meta = {k: v for k, v in self.metadata.items() if k != "wall_time_s"}
        return {
            "bits_lsb_first": list(self.bits),
            "value_decimal": self.value_decimal,
            "slot_amplitudes": list(self.slot_amplitudes),
            "regime": self.regime.to_dict(),
            "metadata": meta,
        }


def average_transients(
    clean: np.ndarray,
    sigma: float,
    n_transients: int,
    seed: int,
    tag: str = "",
    workers: int = 1,
) -> np.ndarray:
    """Mean of ``n_transients`` copies of ``clean`` plus complex white noise.

    The spin evolution is deterministic, so every transient shares the same
    noiseless FID; only the noise differs.  Each noise sample is complex
    Gaussian with ``E|n|^2 = sigma^2``.
    """
    clean = np.asarray(clean, dtype=complex)
    if n_transients < 1:
        raise ValueError("n_transients must be >= 1")
    if sigma == 0:
        return clean.copy()
    key = zlib.crc32(tag.encode())
    scale = sigma / math.sqrt(2.0)

    def chunk_sum(start: int) -> np.ndarray:
        acc = np.zeros(clean.size, dtype=complex)
        for t in range(start, min(start + TRANSIENT_CHUNK, n_transients)):
            rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(key, t)))
            z = rng.standard_normal((2, clean.size))
            acc += scale * (z[0] + 1j * z[1])
        return acc

    starts = range(0, n_transients, TRANSIENT_CHUNK)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(chunk_sum, starts))
    else:
        parts = [chunk_sum(s) for s in starts]
    total = np.zeros(clean.size, dtype=complex)
    for p in parts:
        total += p
    return clean + total / n_transients


class Experiment:
    """A configured cluster + band, ready to run pulse programs.

    Construction validates the band against the cluster's transition span.
    """

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.cluster: SpinCluster = build_cluster(cfg.cluster)
        self.h, self.es, self.table = analyze(self.cluster)
        self.params = PropagationParams(dt=cfg.dt_s, method=cfg.method)
        lo = self.table.omega.min() / TWO_PI
        hi = self.table.omega.max() / TWO_PI
        band = cfg.band
        if band.f_start < lo or band.f_stop > hi:
            raise ConfigError(
                f"band [{band.f_start}, {band.f_stop}] Hz outside the cluster's "
                f"transition span [{lo:.3f}, {hi:.3f}] Hz"
            )
        nyquist = 0.5 / cfg.dwell_s
        if max(abs(band.f_start), abs(band.f_stop)) + band.delta_f / 2 > nyquist:
            raise ConfigError(f"band exceeds the acquisition Nyquist limit {nyquist} Hz")

    @property
    def omega_loc(self) -> float:
        return self.table.omega_loc

    # -- programs ------------------------------------------------------------

    def write_segment(self, bits: Sequence[int], amplitude_hz: float = None) -> PulseSegment:
        cfg = self.cfg
        amp = cfg.write_amplitude_hz if amplitude_hz is None else amplitude_hz
        return comb_from_bits(
            bits,
            cfg.band,
            TWO_PI * amp,
            cfg.write_duration_ms * 1e-3,
            math.radians(cfg.write_phase_deg),
        )

    def erase_segment(self, bits: Sequence[int], amplitude_hz: float = None) -> PulseSegment:
        cfg = self.cfg
        amp = cfg.erase_amplitude_hz if amplitude_hz is None else amplitude_hz
        seg = comb_from_bits(
            bits,
            cfg.band,
            TWO_PI * amp,
            cfg.erase_duration_ms * 1e-3,
            math.radians(cfg.write_phase_deg),
        )
        return anti_phase(seg)

    def clean_fid(self, program: PulseProgram) -> np.ndarray:
        state = evolve_program(thermal_state(self.cluster), self.h, program, self.params)
        return acquire_fid(state, self.h, self.cfg.n_samples, self.cfg.dwell_s)

    def acquire(self, program: PulseProgram, tag: str) -> tuple[np.ndarray, MagnitudeSpectrum, list[float]]:
        cfg = self.cfg
        fid = average_transients(
            self.clean_fid(program), cfg.noise_sigma, cfg.n_transients, cfg.seed, tag, cfg.workers
        )
        spec = magnitude_spectrum(fid, cfg.dwell_s, cfg.zero_fill)
        return fid, spec, slot_amplitudes(spec, cfg.band)

    def noise_floor(self) -> float:
        cfg = self.cfg
        return noise_floor(cfg.noise_sigma, cfg.n_samples, cfg.n_transients)

    def _result(self, kind, fid, spec, amps, bits, amplitude_hz, started, **extra) -> RunResult:
        regime = classify_regime(
            max(TWO_PI * amplitude_hz, 1e-300), self.cluster.n_spins, self.omega_loc
        )
        meta = {
            "kind": kind,
            "seed": self.cfg.seed,
            "config_hash": self.cfg.hash,
            "n_transients": self.cfg.n_transients,
        }
        meta.update(extra)
        meta["wall_time_s"] = time.perf_counter() - started
        return RunResult(fid, spec, amps, bits, regime, meta)

    # -- experiments -----------------------------------------------------------

    def calibrate(self) -> RunResult:
        """All-ones comb; its slot amplitudes become the decode reference."""
        started = time.perf_counter()
        m = self.cfg.band.n_bits
        fid, spec, amps = self.acquire(PulseProgram((self.write_segment([1] * m),)), "calibrate")
        floor = 3.0 * self.noise_floor()
        # absolute floor for the noiseless case: numerically zero response
        atol = 1e-9 * self.cfg.n_samples * self.cluster.n_spins * self.cluster.dim / 4
        limit = max(floor, atol)
        weak = [k for k, a in enumerate(amps) if a <= limit]
        if weak:
            raise CalibrationError(
                f"slots {weak} not excited above the noise floor ({limit:.3g}); "
                "the band plan or comb amplitude does not address the cluster"
            )
        policy = ThresholdPolicy(tuple(amps), self.cfg.threshold_fraction)
        bits = decode_bits(amps, policy)
        return self._result(
            "calibrate", fid, spec, amps, bits, self.cfg.write_amplitude_hz, started,
            reference=list(amps),
        )

    def _policy(self, calibration: Optional[RunResult]) -> ThresholdPolicy:
        if calibration is None or calibration.reference is None:
            raise CalibrationError("no calibration reference; run calibration first")
        return ThresholdPolicy(tuple(calibration.reference), self.cfg.threshold_fraction)

    def encode(self, x: int, calibration: Optional[RunResult]) -> RunResult:
        """Write ``x`` as a comb and read it back."""
        policy = self._policy(calibration)
        started = time.perf_counter()
        bits_in = int_to_bits(x, self.cfg.band.n_bits)
        fid, spec, amps = self.acquire(PulseProgram((self.write_segment(bits_in),)), f"encode:{x}")
        bits = decode_bits(amps, policy)
        return self._result(
            "encode", fid, spec, amps, bits, self.cfg.write_amplitude_hz, started,
            x_decimal=str(x), expected_decimal=str(x), match=bits_to_int(bits) == x,
        )

    def not_gate(self, x: int, calibration: Optional[RunResult]) -> RunResult:
        """All-ones comb followed by the anti-phase comb of ``x``."""
        policy = self._policy(calibration)
        started = time.perf_counter()
        m = self.cfg.band.n_bits
        bits_in = int_to_bits(x, m)
        program = PulseProgram((self.write_segment([1] * m), self.erase_segment(bits_in)))
        fid, spec, amps = self.acquire(program, f"not:{x}")
        bits = decode_bits(amps, policy)
        oracle = bitwise_not_oracle(x, m)
        return self._result(
            "not", fid, spec, amps, bits, self.cfg.write_amplitude_hz, started,
            x_decimal=str(x), expected_decimal=str(oracle), match=bits_to_int(bits) == oracle,
        )

    def erase_residual(self, bit: int, amplitude_hz: float) -> float:
        """Slot amplitude of ``bit`` after all-ones write + single-bit erase."""
        m = self.cfg.band.n_bits
        sel = [int(k == bit) for k in range(m)]
        program = PulseProgram((self.write_segment([1] * m), self.erase_segment(sel, amplitude_hz)))
        fid = self.clean_fid(program)
        spec = magnitude_spectrum(fid, self.cfg.dwell_s, self.cfg.zero_fill)
        return slot_amplitudes(spec, self.cfg.band)[bit]

    def tune_erase(self, bit: int = 0, max_area_ratio: float = 2.0, xatol_hz: float = 0.01) -> float:
        """Erase amplitude (Hz, at the configured duration) minimizing one slot.

        Bounded scalar search between zero and ``max_area_ratio`` times the
        area-matched amplitude.
        """
        cfg = self.cfg
        matched = cfg.write_amplitude_hz * cfg.write_duration_ms / cfg.erase_duration_ms
        res = minimize_scalar(
            lambda a: self.erase_residual(bit, a),
            bounds=(0.0, max_area_ratio * matched),
            method="bounded",
            options={"xatol": xatol_hz},
        )
        return float(res.x)

    def sweep(
        self,
        omegas: Sequence[float],
        duration: Optional[float] = None,
        target: Optional[int] = None,
        window_hz: Optional[float] = None,
    ) -> "SweepResult":
        """Single-harmonic drive at one transition for each amplitude (rad/s).

        ``target`` indexes the transition table; by default the strongest
        transition inside the band.  The response is the largest spectral
        magnitude within ``window_hz`` (default half a slot) of the target.
        """
        if len(omegas) == 0:
            raise ValueError("need at least one amplitude")
        cfg = self.cfg
        tt = self.table
        if target is None:
            f = tt.omega / TWO_PI
            inside = (f >= cfg.band.f_start) & (f <= cfg.band.f_stop)
            cand = np.flatnonzero(inside) if inside.any() else np.arange(len(tt))
            target = int(cand[np.argmax(tt.weight[cand])])
        w_target = float(tt.omega[target])
        duration = cfg.sweep_duration_ms * 1e-3 if duration is None else duration
        window = cfg.band.delta_f / 2 if window_hz is None else window_hz
        rows, spectra = [], []
        freqs = None
        for k, om in enumerate(omegas):
            seg = PulseSegment(duration, (Harmonic(w_target, om, 0.0),))
            fid = average_transients(
                self.clean_fid(PulseProgram((seg,))),
                cfg.noise_sigma, cfg.n_transients, cfg.seed, f"sweep:{k}", cfg.workers,
            )
            freqs, values = complex_spectrum(fid, cfg.dwell_s, cfg.zero_fill)
            sel = np.flatnonzero(np.abs(freqs - w_target / TWO_PI) <= window)
            peak = sel[np.argmax(np.abs(values[sel]))]
            report = classify_regime(om, self.cluster.n_spins, self.omega_loc)
            rows.append(
                {
                    "omega_rad_s": float(om),
                    "omega_hz": float(om) / TWO_PI,
                    "label": report.label,
                    "peak_hz": float(freqs[peak]),
                    "peak_magnitude": float(abs(values[peak])),
                    "peak_re": float(values[peak].real),
                    "peak_im": float(values[peak].imag),
                }
            )
            spectra.append(values)
        return SweepResult(target, w_target, duration, rows, freqs, np.array(spectra))


@dataclass
class SweepResult:
    target: int
    target_omega: float
    duration: float
    rows: list[dict]
    freqs: np.ndarray
    spectra: np.ndarray  # shape (n_omegas, n_freqs), complex


# module-level entry points ---------------------------------------------------


def run_calibration(cfg: ExperimentConfig) -> RunResult:
    return Experiment(cfg).calibrate()


def run_encode(cfg: ExperimentConfig, x: int, calibration: Optional[RunResult]) -> RunResult:
    return Experiment(cfg).encode(x, calibration)


def run_not_gate(cfg: ExperimentConfig, x: int, calibration: Optional[RunResult]) -> RunResult:
    return Experiment(cfg).not_gate(x, calibration)


def sweep_amplitude(cfg: ExperimentConfig, omegas: Sequence[float], **kw) -> SweepResult:
    return Experiment(cfg).sweep(omegas, **kw)


# ---------------------------------------------------------------------------
# output files


def _f(x: float) -> str:
    return repr(float(x))


def write_fid_csv(path, fid: np.ndarray, dwell: float) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("t_s,re,im\n")
        for k, z in enumerate(fid):
            fh.write(f"{_f(k * dwell)},{_f(z.real)},{_f(z.imag)}\n")


def write_spectrum_csv(path, spec: MagnitudeSpectrum) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("freq_hz,magnitude\n")
        for f, m in zip(spec.freqs, spec.mags):
            fh.write(f"{_f(f)},{_f(m)}\n")


def write_json(path, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_run(result: RunResult, out_dir, prefix: str, dwell: float, fmt: str = "csv") -> list[Path]:
    """Write FID, spectrum and decoded result; returns the paths written.

    ``fmt="csv"`` writes two CSV files plus ``<prefix>_result.json``;
    ``fmt="json"`` puts the arrays into the result JSON instead.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    decoded = result.decoded_json()
    paths = []
    if fmt == "csv":
        p_fid, p_spec = out / f"{prefix}_fid.csv", out / f"{prefix}_spectrum.csv"
        write_fid_csv(p_fid, result.fid, dwell)
        write_spectrum_csv(p_spec, result.spectrum)
        paths += [p_fid, p_spec]
    elif fmt == "json":
        decoded["fid"] = {
            "t_s": [k * dwell for k in range(result.fid.size)],
            "re": result.fid.real.tolist(),
            "im": result.fid.imag.tolist(),
        }
        decoded["spectrum"] = {
            "freq_hz": result.spectrum.freqs.tolist(),
            "magnitude": result.spectrum.mags.tolist(),
        }
    else:
        raise ValueError(f"unknown format {fmt!r}")
    p_res = out / f"{prefix}_result.json"
    write_json(p_res, decoded)
    paths.append(p_res)
    return paths


def write_sweep(result: SweepResult, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p_rows = out / "sweep.csv"
    cols = ["omega_rad_s", "omega_hz", "label", "peak_hz", "peak_magnitude", "peak_re", "peak_im"]
    with open(p_rows, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for r in result.rows:
            fh.write(",".join(r[c] if c == "label" else _f(r[c]) for c in cols) + "\n")
    p_spec = out / "sweep_spectra.csv"
    with open(p_spec, "w", newline="\n") as fh:
        head = ["freq_hz"] + [f"{p}_{k}" for k in range(len(result.rows)) for p in ("re", "im")]
        fh.write(",".join(head) + "\n")
        for i, f in enumerate(result.freqs):
            vals = [_f(f)]
            for s in result.spectra:
                vals += [_f(s[i].real), _f(s[i].imag)]
            fh.write(",".join(vals) + "\n")
    return [p_rows, p_spec]
