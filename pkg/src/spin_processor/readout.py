"""Absolute-value spectra, per-slot amplitudes and threshold decoding."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .codec import BandPlan

DEFAULT_ZERO_FILL = 4


@dataclass(frozen=True, eq=False)
class MagnitudeSpectrum:
    """``|DFT|`` of an FID on a centered two-sided grid.

    ``freqs`` are signed rotating-frame offsets in Hz, strictly increasing.
    """

    freqs: np.ndarray
    mags: np.ndarray

    @property
    def resolution(self) -> float:
        return float(self.freqs[1] - self.freqs[0])


def complex_spectrum(
    fid: Sequence[complex], dwell: float, zero_fill: int = DEFAULT_ZERO_FILL
) -> tuple[np.ndarray, np.ndarray]:
    """Unnormalized DFT of the zero-filled FID, shifted so frequency increases.

    Returns ``(freqs_hz, values)``.  The FID is padded with zeros to
    ``zero_fill * len(fid)`` points first.
    """
    fid = np.asarray(fid, dtype=complex)
    if fid.size < 2:
        raise ValueError("need at least 2 FID samples")
    if zero_fill < 1:
        raise ValueError("zero_fill must be >= 1")
    n = fid.size * int(zero_fill)
    values = np.fft.fftshift(np.fft.fft(fid, n))
    freqs = np.fft.fftshift(np.fft.fftfreq(n, dwell))
    return freqs, values


def magnitude_spectrum(
    fid: Sequence[complex], dwell: float, zero_fill: int = DEFAULT_ZERO_FILL
) -> MagnitudeSpectrum:
    """Absolute-value spectrum.

    Normalization: ``sum |fid|^2 == sum(mags**2) / n`` with ``n`` the padded
    length (Parseval for the unnormalized DFT).
    """
    freqs, values = complex_spectrum(fid, dwell, zero_fill)
    return MagnitudeSpectrum(freqs, np.abs(values))


def slot_of(freqs: np.ndarray, band: BandPlan) -> np.ndarray:
    """Physical slot index of each frequency, ``-1`` outside the band.

    Slot ``p`` owns the half-open window ``(f_p - delta_f/2, f_p + delta_f/2]``,
    so a frequency exactly between two slots belongs to the lower one.
    """
    pos = (np.asarray(freqs) - band.f_start) / band.delta_f
    slot = np.ceil(pos - 0.5 - 1e-9).astype(int)
    slot[(slot < 0) | (slot >= band.n_bits)] = -1
    return slot


def slot_amplitudes(spec: MagnitudeSpectrum, band: BandPlan) -> list[float]:
    """Largest magnitude inside each slot's window, in bit order.

    Raises ``ValueError`` when a slot frequency lies outside the spectrum.
    """
    lo, hi = spec.freqs[0], spec.freqs[-1]
    for f in (band.f_start, band.f_stop):
        if not lo <= f <= hi:
            raise ValueError(f"slot frequency {f} Hz outside spectral range [{lo}, {hi}] Hz")
    slot = slot_of(spec.freqs, band)
    phys = np.zeros(band.n_bits)
    inside = slot >= 0
    np.maximum.at(phys, slot[inside], spec.mags[inside])
    return [float(phys[band.slot_index(k)]) for k in range(band.n_bits)]


@dataclass(frozen=True)
class ThresholdPolicy:
    """Bit ``k`` is set iff ``amps[k] >= fraction * reference[k]``."""

    reference: tuple[float, ...]
    fraction: float = 0.5

    def __post_init__(self):
        ref = tuple(float(r) for r in self.reference)
        object.__setattr__(self, "reference", ref)
        if not 0.0 < self.fraction < 1.0:
            raise ValueError(f"fraction must be in (0, 1), got {self.fraction}")
        if any(not r > 0 for r in ref):
            raise ValueError("every reference amplitude must be positive")


def decode_bits(amps: Sequence[float], policy: ThresholdPolicy) -> list[int]:
    if len(amps) != len(policy.reference):
        raise ValueError(f"{len(amps)} amplitudes for {len(policy.reference)} reference slots")
    return [int(a >= policy.fraction * r) for a, r in zip(amps, policy.reference)]


def noise_floor(sigma: float, n_samples: int, n_transients: int = 1) -> float:
    """RMS spectral magnitude of averaged complex white noise.

    ``sigma`` is the per-sample, per-transient RMS (``E|n|^2 = sigma^2``).
    Zero filling adds no noise power, so the floor is
    ``sigma * sqrt(n_samples / n_transients)``.
    """
    return sigma * math.sqrt(n_samples / n_transients)
