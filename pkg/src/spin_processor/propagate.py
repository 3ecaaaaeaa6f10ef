"""Time evolution of the deviation density operator and FID acquisition.

Driven evolution uses ``H(t) = H_int + drive(t) S_x``.  Two integrators are
available:

``trotter2``
    Strang splitting ``exp(-i H_int dt/2) exp(-i theta S_x) exp(-i H_int dt/2)``
    with ``theta = drive(t_mid) dt``.  The step is carried out in the basis
    where ``S_x`` is diagonal (``Had^{(x)N}``), so the drive factor is a
    diagonal phase and the free factor a fixed dense matrix computed once per
    ``(H_int, dt)``.  The propagator of a whole segment costs one dense
    matrix product per step.

``midpoint-exponential``
    ``exp(-i (H_int + drive(t_mid) S_x) dt)`` by full diagonalization every
    step.  Slow; kept as an independent cross-check.

Free precession and acquisition are exact in the eigenbasis of ``H_int``.

FID convention: sample ``k`` is ``Tr(rho(k dwell) S_+)``.  With
``rho(t) = U rho U^dagger`` and ``U = exp(-i H_int t)``, a transition
``(i, j)`` with ``M_i = M_j + 1`` contributes ``exp(+i omega_ij t)`` where
``omega_ij = eps_i - eps_j``; a spin with positive offset therefore shows up at
positive frequency.
"""

from __future__ import annotations

import hashlib
import math
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cluster import EigenSystem, SpinCluster, eigensystem, n_spins_of, spin_operators
from .errors import StabilityError
from .pulses import PulseProgram, PulseSegment, drive_amplitude

TWO_PI = 2.0 * math.pi
STABILITY_LIMIT = 0.1
METHODS = ("trotter2", "midpoint-exponential")


@dataclass(frozen=True, eq=False)
class DeviationState:
    """Traceless Hermitian deviation operator and the elapsed program time (s)."""

    matrix: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.matrix))

    def expectation(self, op: np.ndarray) -> complex:
        """``Tr(rho op)``."""
        return complex(np.einsum("ij,ji->", self.matrix, op))

    def check(self, tol: float = 1e-10) -> None:
        """Raise ``ValueError`` unless Hermitian and traceless within ``tol``."""
        m = self.matrix
        scale = max(np.linalg.norm(m), 1e-300)
        if np.abs(m - m.conj().T).max() > tol * max(1.0, np.abs(m).max()):
            raise ValueError("deviation operator is not Hermitian")
        if abs(np.trace(m)) > tol * scale:
            raise ValueError("deviation operator is not traceless")


@dataclass(frozen=True)
class PropagationParams:
    """Integrator settings.

    ``dt=None`` picks :func:`default_dt`.  With ``coherent=True`` harmonic
    phases are referenced to the program clock (``state.time``), as for a
    phase-continuous synthesizer; otherwise every segment restarts its phase
    clock at zero.
    """

    dt: Optional[float] = None
    method: str = "trotter2"
    coherent: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.dt is not None and not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")


# ---------------------------------------------------------------------------
# cached per-Hamiltonian data


class HamiltonianData:
    """Eigenbasis of ``H_int`` and the operators derived from it."""

    def __init__(self, h: np.ndarray):
        self.h = np.array(h)
        self.es: EigenSystem = eigensystem(self.h)
        self.n = n_spins_of(self.h.shape[0])
        self.ops = spin_operators(self.n)
        # H_int is traceless, so this is its spectral norm
        self.norm = float(np.abs(self.es.eigenvalues).max())
        v = self.es.eigenvectors
        self.s_plus_eig = v.conj().T @ self.ops.s_plus @ v
        mags = self.es.magnetization
        self.pair_i, self.pair_j = np.nonzero(mags[:, None] == mags[None, :] + 1)
        self.pair_omega = self.es.eigenvalues[self.pair_i] - self.es.eigenvalues[self.pair_j]
        had = np.ones((1, 1))
        h1 = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
        for _ in range(self.n):
            had = np.kron(had, h1)
        self.had = had
        self._px: dict = {}
        self._lock = threading.Lock()

    def free_propagator(self, t: float) -> np.ndarray:
        v = self.es.eigenvectors
        return (v * np.exp(-1j * self.es.eigenvalues * t)) @ v.conj().T

    def free_propagator_x(self, t: float) -> np.ndarray:
        """``exp(-i H_int t)`` in the basis where ``S_x`` is diagonal."""
        with self._lock:
            p = self._px.get(t)
            if p is None:
                if len(self._px) > 16:
                    self._px.clear()
                p = np.ascontiguousarray(self.had @ self.free_propagator(t) @ self.had)
                self._px[t] = p
            return p

    def to_eigenbasis(self, m: np.ndarray) -> np.ndarray:
        v = self.es.eigenvectors
        return v.conj().T @ m @ v

    def from_eigenbasis(self, m: np.ndarray) -> np.ndarray:
        v = self.es.eigenvectors
        return v @ m @ v.conj().T


_CACHE: "OrderedDict[tuple, HamiltonianData]" = OrderedDict()
_CACHE_LOCK = threading.Lock()
_CACHE_SIZE = 8


def hamiltonian_data(h: np.ndarray) -> HamiltonianData:
    """Cached :class:`HamiltonianData`, keyed by the content of ``h``."""
    h = np.ascontiguousarray(h)
    key = (h.shape, h.dtype.str, hashlib.sha1(h.tobytes()).hexdigest())
    with _CACHE_LOCK:
        data = _CACHE.get(key)
        if data is not None:
            _CACHE.move_to_end(key)
            return data
    data = HamiltonianData(h)
    with _CACHE_LOCK:
        _CACHE[key] = data
        while len(_CACHE) > _CACHE_SIZE:
            _CACHE.popitem(last=False)
    return data


# ---------------------------------------------------------------------------


def thermal_state(cluster: SpinCluster) -> DeviationState:
    """High-temperature equilibrium: deviation operator ``S_z`` at ``t = 0``."""
    return DeviationState(spin_operators(cluster.n_spins).s_z, 0.0)


def default_dt(h_int: np.ndarray, seg: PulseSegment) -> float:
    """Largest step that resolves the fastest frequency and passes the guard.

    ``min(1 / (50 f_max), 0.1 / (peak drive + ||H_int||))`` with ``f_max`` the
    largest of the harmonic offsets, half the linear spectral width, and the
    per-harmonic amplitudes (all converted to Hz).
    """
    data = hamiltonian_data(h_int)
    omegas = [abs(h.offset) for h in seg.harmonics] + [h.amplitude for h in seg.harmonics]
    if data.pair_omega.size:
        omegas.append(0.5 * (data.pair_omega.max() - data.pair_omega.min()))
    f_max = max(omegas + [1e-300]) / TWO_PI
    rate = seg.peak_amplitude + data.norm
    candidates = [1.0 / (50.0 * f_max)]
    if rate > 0:
        candidates.append(STABILITY_LIMIT / rate)
    return min(candidates)


def _step_grid(seg: PulseSegment, dt: float) -> tuple[int, float]:
    n_steps = max(1, int(math.ceil(seg.duration / dt - 1e-9)))
    return n_steps, seg.duration / n_steps


def check_stability(h_int: np.ndarray, seg: PulseSegment, dt: float) -> None:
    """Raise :class:`StabilityError` if ``dt (peak drive + ||H_int||) > 0.1``."""
    rate = seg.peak_amplitude + hamiltonian_data(h_int).norm
    if dt * rate > STABILITY_LIMIT * (1 + 1e-12):
        raise StabilityError(
            f"dt={dt:.3e} s too large: dt*(|drive|+||H||) = {dt * rate:.3g} > "
            f"{STABILITY_LIMIT}; use dt <= {STABILITY_LIMIT / rate:.3e} s"
        )


def segment_propagator(
    h_int: np.ndarray,
    seg: PulseSegment,
    params: PropagationParams = PropagationParams(),
    t_ref: float = 0.0,
) -> np.ndarray:
    """Unitary of one segment in the computational basis.

    The step count is ``ceil(duration / dt)`` with the step shrunk to divide the
    duration evenly.
    """
    data = hamiltonian_data(h_int)
    dt = default_dt(h_int, seg) if params.dt is None else params.dt
    n_steps, dt = _step_grid(seg, dt)
    check_stability(h_int, seg, dt)
    t_mid = (np.arange(n_steps) + 0.5) * dt
    theta = drive_amplitude(seg, t_mid, t_ref) * dt

    if params.method == "midpoint-exponential":
        h = data.h.astype(complex)
        sx = data.ops.s_x
        u = np.eye(h.shape[0], dtype=complex)
        for th in theta:
            w, v = np.linalg.eigh(h + (th / dt) * sx)
            u = (v * np.exp(-1j * w * dt)) @ v.conj().T @ u
        return u

    if not seg.harmonics:
        return data.free_propagator(seg.duration)
    half = data.free_propagator_x(0.5 * dt)
    full = data.free_propagator_x(dt)
    w = half.copy()
    buf = np.empty_like(w)
    for start in range(0, n_steps, 4096):
        phases = np.exp(-1j * np.outer(theta[start:start + 4096], data.ops.m_basis))
        for k, ph in enumerate(phases, start):
            w *= ph[:, None]
            np.matmul(full if k < n_steps - 1 else half, w, out=buf)
            w, buf = buf, w
    return data.had @ w @ data.had


def evolve_pulse(
    state: DeviationState,
    h_int: np.ndarray,
    seg: PulseSegment,
    params: PropagationParams = PropagationParams(),
) -> DeviationState:
    """Advance ``state`` through one drive segment.

    Under ``params.coherent`` the drive phase clock starts at ``state.time``.
    The stability guard is checked before any stepping.
    """
    if state.matrix.shape != np.shape(h_int):
        raise ValueError("state and Hamiltonian dimensions differ")
    t_ref = state.time if params.coherent else 0.0
    u = segment_propagator(h_int, seg, params, t_ref)
    rho = u @ state.matrix @ u.conj().T
    return DeviationState(rho, state.time + seg.duration)


def evolve_program(
    state: DeviationState,
    h_int: np.ndarray,
    program: PulseProgram,
    params: PropagationParams = PropagationParams(),
) -> DeviationState:
    """Apply every segment of ``program`` in order."""
    for seg in program.segments:
        state = evolve_pulse(state, h_int, seg, params)
    return state


def evolve_free(state: DeviationState, h_int: np.ndarray, t: float) -> DeviationState:
    """Free precession ``U rho U^dagger``, ``U = exp(-i H_int t)``, exact."""
    data = hamiltonian_data(h_int)
    eps = data.es.eigenvalues
    rho = data.to_eigenbasis(state.matrix)
    rho = rho * np.exp(-1j * np.subtract.outer(eps, eps) * t)
    return DeviationState(data.from_eigenbasis(rho), state.time + t)


def acquire_fid(
    state: DeviationState,
    h_int: np.ndarray,
    n_samples: int,
    dwell: float,
) -> np.ndarray:
    """Complex FID ``Tr(rho(k dwell) S_+)`` for ``k = 0 .. n_samples-1``.

    Evaluated as a sum of exact tones over all ``Delta M = +1`` eigenstate
    pairs; ``state`` is not modified.
    """
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    if not dwell > 0:
        raise ValueError("dwell must be positive")
    data = hamiltonian_data(h_int)
    rho = data.to_eigenbasis(state.matrix)
    amp = rho[data.pair_j, data.pair_i] * data.s_plus_eig[data.pair_i, data.pair_j]
    keep = np.abs(amp) > 1e-15 * max(np.abs(amp).max(initial=0.0), 1e-300)
    amp, omega = amp[keep], data.pair_omega[keep]
    t = np.arange(n_samples) * dwell
    fid = np.zeros(n_samples, dtype=complex)
    chunk = max(1, 2_000_000 // n_samples)
    for s in range(0, amp.size, chunk):
        fid += np.exp(1j * np.outer(t, omega[s:s + chunk])) @ amp[s:s + chunk]
    return fid
