"""Multi-frequency drive programs.

A segment is a rectangular burst of simultaneous cosine harmonics applied
along x in the rotating frame of a phase-coherent carrier::

    drive(t) = sum_k A_k cos(delta_k (t + t_ref) + phi_k),   0 <= t < duration

``t`` is local to the segment and ``t_ref`` is the time origin of the phase
reference (0 for a free-standing segment; the program clock when segments are
chained phase-coherently, see :func:`spin_processor.propagate.evolve_program`).
Offsets and amplitudes are in rad/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .codec import BandPlan, slot_frequency
from .errors import ConfigError

TWO_PI = 2.0 * math.pi


def _wrap_phase(phi: float) -> float:
    phi = math.fmod(float(phi), TWO_PI)
    if phi < 0:
        phi += TWO_PI
    # fmod can return values a hair below 2*pi that round to 2*pi
    return 0.0 if phi >= TWO_PI else phi


@dataclass(frozen=True)
class Harmonic:
    """One cosine component: offset (rad/s), peak amplitude (rad/s), phase (rad)."""

    offset: float
    amplitude: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.amplitude >= 0:
            raise ValueError(f"harmonic amplitude must be >= 0, got {self.amplitude}")
        object.__setattr__(self, "offset", float(self.offset))
        object.__setattr__(self, "amplitude", float(self.amplitude))
        object.__setattr__(self, "phase", _wrap_phase(self.phase))


@dataclass(frozen=True)
class PulseSegment:
    duration: float
    harmonics: tuple[Harmonic, ...] = ()
    freq_epsilon: float = field(default=1e-9, compare=False, repr=False)

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"segment duration must be positive, got {self.duration}")
        hs = tuple(self.harmonics)
        object.__setattr__(self, "harmonics", hs)
        offs = sorted(h.offset for h in hs)
        for a, b in zip(offs, offs[1:]):
            if b - a <= self.freq_epsilon * max(1.0, abs(a), abs(b)):
                raise ValueError(f"duplicate harmonic offset {a} rad/s in segment")

    @property
    def peak_amplitude(self) -> float:
        """Upper bound on ``|drive(t)|``: the sum of harmonic amplitudes."""
        return float(sum(h.amplitude for h in self.harmonics))

    @property
    def rss_amplitude(self) -> float:
        """Root-sum-square of the harmonic amplitudes (comb total, reference only)."""
        return math.sqrt(sum(h.amplitude**2 for h in self.harmonics))


@dataclass(frozen=True)
class PulseProgram:
    segments: tuple[PulseSegment, ...]

    def __post_init__(self):
        segs = tuple(self.segments)
        if not segs:
            raise ValueError("a pulse program needs at least one segment")
        object.__setattr__(self, "segments", segs)

    @property
    def duration(self) -> float:
        return float(sum(s.duration for s in self.segments))


def comb_from_bits(
    bits: Sequence[int],
    band: BandPlan,
    amplitude: float,
    duration: float,
    base_phase: float = 0.0,
) -> PulseSegment:
    """One harmonic per set bit, at that bit's slot frequency.

    ``amplitude`` is per harmonic, rad/s.  Cleared bits contribute nothing, so
    an all-zero array gives an empty (but valid) segment.
    """
    if len(bits) != band.n_bits:
        raise ValueError(f"got {len(bits)} bits for a {band.n_bits}-slot band")
    harmonics = [
        Harmonic(TWO_PI * slot_frequency(band, k), amplitude, base_phase)
        for k, b in enumerate(bits)
        if int(b)
    ]
    harmonics.sort(key=lambda h: h.offset)
    return PulseSegment(duration, tuple(harmonics))


def anti_phase(seg: PulseSegment) -> PulseSegment:
    """Shift every harmonic by pi; the drive of the result is the exact negative."""
    return replace(
        seg,
        harmonics=tuple(
            replace(h, phase=h.phase + math.pi if h.phase < math.pi else h.phase - math.pi)
            for h in seg.harmonics
        ),
    )


def scaled(seg: PulseSegment, amplitude: float = None, duration: float = None) -> PulseSegment:
    """Copy of ``seg`` with every harmonic amplitude and/or the duration replaced."""
    hs = seg.harmonics
    if amplitude is not None:
        hs = tuple(replace(h, amplitude=amplitude) for h in hs)
    return replace(seg, harmonics=hs, duration=seg.duration if duration is None else duration)


def drive_amplitude(seg: PulseSegment, t, t_ref: float = 0.0):
    """Drive value (rad/s) at segment-local time ``t``; zero outside ``[0, duration)``.

    ``t`` may be a scalar or an array.
    """
    t_arr = np.asarray(t, dtype=float)
    out = np.zeros_like(t_arr)
    inside = (t_arr >= 0.0) & (t_arr < seg.duration)
    if seg.harmonics and np.any(inside):
        tt = t_arr[inside] + t_ref
        acc = np.zeros_like(tt)
        for h in seg.harmonics:
            acc += h.amplitude * np.cos(h.offset * tt + h.phase)
        out[inside] = acc
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# file format


def segment_from_dict(d: Mapping[str, Any]) -> PulseSegment:
    try:
        hs = [
            Harmonic(
                TWO_PI * float(h["offset_hz"]),
                TWO_PI * float(h["amplitude_hz"]),
                math.radians(float(h.get("phase_deg", 0.0))),
            )
            for h in d.get("harmonics", [])
        ]
        return PulseSegment(float(d["duration_ms"]) * 1e-3, tuple(hs))
    except KeyError as exc:
        raise ConfigError(f"pulse segment missing field {exc}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def program_from_dict(d: Mapping[str, Any]) -> PulseProgram:
    """Parse ``{"segments": [{"duration_ms", "harmonics": [{"offset_hz", ...}]}]}``."""
    if not d.get("segments"):
        raise ConfigError("pulse description needs a nonempty 'segments' list")
    return PulseProgram(tuple(segment_from_dict(s) for s in d["segments"]))


def program_to_dict(prog: PulseProgram) -> dict:
    return {
        "segments": [
            {
                "duration_ms": s.duration * 1e3,
                "harmonics": [
                    {
                        "offset_hz": h.offset / TWO_PI,
                        "amplitude_hz": h.amplitude / TWO_PI,
                        "phase_deg": math.degrees(h.phase),
                    }
                    for h in s.harmonics
                ],
            }
            for s in prog.segments
        ]
    }
