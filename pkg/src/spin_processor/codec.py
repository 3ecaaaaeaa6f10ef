"""Integer <-> bit-array conversion, the bit-to-frequency band plan, and the
exact bitwise-NOT reference.

Everything here is exact integer arithmetic; no floats touch the bit values.
Bit arrays are LSB-first: ``bits[0]`` is the least significant bit and sits at
the lowest slot frequency unless the band is reversed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

MAX_INT_BITS = 64


def _check_bits(bits: Sequence[int]) -> list[int]:
    out = [int(b) for b in bits]
    if any(b not in (0, 1) for b in out):
        raise ValueError(f"bit arrays hold only 0 and 1, got {list(bits)!r}")
    return out


def int_to_bits(x: int, n_bits: int) -> list[int]:
    """LSB-first binary expansion of ``x`` with exactly ``n_bits`` entries."""
    x = int(x)
    if not 0 <= n_bits <= MAX_INT_BITS:
        raise ValueError(f"n_bits must be in [0, {MAX_INT_BITS}], got {n_bits}")
    if not 0 <= x < (1 << n_bits) or (n_bits == 0 and x != 0):
        raise ValueError(f"{x} does not fit in {n_bits} bits")
    return [(x >> k) & 1 for k in range(n_bits)]


def bits_to_int(bits: Sequence[int]) -> int:
    """Inverse of :func:`int_to_bits`.  An empty array maps to 0."""
    bits = _check_bits(bits)
    if len(bits) > MAX_INT_BITS:
        raise ValueError(
            f"integer conversion limited to {MAX_INT_BITS} bits, got {len(bits)}"
        )
    return sum(b << k for k, b in enumerate(bits))


def bitwise_not_oracle(x: int, n_bits: int) -> int:
    """Flip every one of the ``n_bits`` low bits of ``x``: ``2**n_bits - 1 - x``."""
    x = int(x)
    if not 0 <= x < (1 << n_bits):
        raise ValueError(f"{x} does not fit in {n_bits} bits")
    return (1 << n_bits) - 1 - x


@dataclass(frozen=True)
class BandPlan:
    """Evenly spaced spectral slots, one per bit.

    Attributes
    ----------
    f_start : float
        Frequency of the lowest slot, Hz (rotating-frame offset).
    delta_f : float
        Slot spacing, Hz.
    n_bits : int
        Number of slots ``M``.
    reversed : bool
        If set, bit 0 sits at the highest slot instead of the lowest.
    """

    f_start: float
    delta_f: float
    n_bits: int
    reversed: bool = False

    def __post_init__(self):
        if not self.delta_f > 0:
            raise ValueError(f"delta_f must be positive, got {self.delta_f}")
        if self.n_bits < 1:
            raise ValueError(f"n_bits must be >= 1, got {self.n_bits}")

    def slot_index(self, k: int) -> int:
        """Physical slot (0 = lowest frequency) that carries bit ``k``."""
        if not 0 <= k < self.n_bits:
            raise IndexError(f"bit index {k} outside [0, {self.n_bits})")
        return self.n_bits - 1 - k if self.reversed else k

    @property
    def frequencies(self) -> list[float]:
        """Slot frequency of every bit, in bit order (Hz)."""
        return [slot_frequency(self, k) for k in range(self.n_bits)]

    @property
    def f_stop(self) -> float:
        return self.f_start + (self.n_bits - 1) * self.delta_f


def slot_frequency(band: BandPlan, k: int) -> float:
    """Frequency in Hz of the slot carrying bit ``k``."""
    return band.f_start + band.slot_index(k) * band.delta_f
