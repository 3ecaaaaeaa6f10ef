"""Spin clusters, their secular dipolar Hamiltonian, eigensystem, and the table
of allowed (single-quantum) transitions.

Units
-----
All frequencies are angular, rad/s.  Cluster description files carry Hz and
are converted on load by :func:`build_cluster`.

Conventions
-----------
Basis states are computational product states ordered by ``np.kron``; spin 0
is the most significant factor.  Bit value 0 of a spin means ``|up>``
(``I_z = +1/2``).

The internal Hamiltonian is the secular homonuclear dipolar form::

    H = sum_i delta_i I_z^i + sum_{i<j} d_ij (2 I_z^i I_z^j - I_x^i I_x^j - I_y^i I_y^j)

Both terms conserve total ``S_z``, so the eigensystem is computed sector by
sector and every eigenvector has a sharp magnetization ``M``.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np
from numpy.typing import NDArray

from .errors import ConfigError

MAX_SPINS = 12
WEIGHT_EPSILON = 1e-12
FREQ_EPSILON = 1e-9  # relative to omega_loc

TWO_PI = 2.0 * np.pi

_SX = np.array([[0.0, 0.5], [0.5, 0.0]])
_SY = np.array([[0.0, -0.5j], [0.5j, 0.0]])
_SZ = np.array([[0.5, 0.0], [0.0, -0.5]])


@dataclass(frozen=True, eq=False)
class SpinCluster:
    """N spins 1/2 with chemical-shift offsets and dipolar couplings.

    Attributes
    ----------
    offsets : ndarray, shape (N,)
        Rotating-frame offset of each spin, rad/s.
    couplings : ndarray, shape (N, N)
        Symmetric dipolar constants ``d_ij`` in rad/s, zero diagonal.
    """

    offsets: NDArray[np.float64]
    couplings: NDArray[np.float64]
    max_spins: int = MAX_SPINS

    def __post_init__(self):
        offsets = np.array(self.offsets, dtype=float).reshape(-1)
        couplings = np.array(self.couplings, dtype=float)
        n = offsets.size
        if not 1 <= n <= self.max_spins:
            raise ConfigError(f"n_spins must be in [1, {self.max_spins}], got {n}")
        if couplings.shape != (n, n):
            raise ConfigError(
                f"couplings must be {n}x{n} to match {n} offsets, got {couplings.shape}"
            )
        if not np.array_equal(couplings, couplings.T):
            raise ConfigError("coupling matrix is not symmetric")
        if np.any(np.diag(couplings) != 0):
            raise ConfigError("coupling matrix must have a zero diagonal")
        if not (np.all(np.isfinite(offsets)) and np.all(np.isfinite(couplings))):
            raise ConfigError("offsets and couplings must be finite")
        offsets.setflags(write=False)
        couplings.setflags(write=False)
        object.__setattr__(self, "offsets", offsets)
        object.__setattr__(self, "couplings", couplings)

    @property
    def n_spins(self) -> int:
        return self.offsets.size

    @property
    def dim(self) -> int:
        return 1 << self.n_spins

    def __eq__(self, other):
        if not isinstance(other, SpinCluster):
            return NotImplemented
        return np.array_equal(self.offsets, other.offsets) and np.array_equal(
            self.couplings, other.couplings
        )

    __hash__ = None

    def to_dict(self) -> dict:
        """Explicit description in the file format (Hz)."""
        return {
            "n_spins": self.n_spins,
            "offsets_hz": (self.offsets / TWO_PI).tolist(),
            "couplings_hz": (self.couplings / TWO_PI).tolist(),
        }


# ---------------------------------------------------------------------------
# generators


def chain(n_spins: int, d: float, offsets=None) -> SpinCluster:
    """Linear chain with nearest-neighbour coupling ``d`` (rad/s)."""
    c = np.zeros((n_spins, n_spins))
    for i in range(n_spins - 1):
        c[i, i + 1] = c[i + 1, i] = d
    return SpinCluster(np.zeros(n_spins) if offsets is None else offsets, c)


def all_to_all(n_spins: int, d: float, offsets=None) -> SpinCluster:
    """Every pair coupled with the same constant ``d`` (rad/s)."""
    c = np.full((n_spins, n_spins), float(d))
    np.fill_diagonal(c, 0.0)
    return SpinCluster(np.zeros(n_spins) if offsets is None else offsets, c)


def random_geometric(
    n_spins: int,
    seed: int,
    d_scale: float = TWO_PI * 1000.0,
    offset: float = 0.0,
    offset_spread: float = 0.0,
    box: float = 2.0,
    min_distance: float = 1.0,
) -> SpinCluster:
    """Spins at random positions in a cube, coupled by secular dipolar terms.

    ``d_ij = d_scale * (3 cos^2 theta_ij - 1) / 2 * (min_distance / r_ij)^3``
    with ``theta_ij`` the angle between the internuclear vector and z.  Points
    closer than ``min_distance`` are rejected and redrawn.  Offsets are
    ``offset`` plus a uniform spread of total width ``offset_spread``.
    All frequencies in rad/s.
    """
    if d_scale <= 0 or box <= 0 or min_distance <= 0 or offset_spread < 0:
        raise ConfigError("random_geometric parameters must be positive")
    if seed is None:
        raise ConfigError("random_geometric requires a seed")
    rng = np.random.default_rng(seed)
    pts: list[np.ndarray] = []
    attempts = 0
    while len(pts) < n_spins:
        attempts += 1
        if attempts > 100_000:
            raise ConfigError("could not place spins; enlarge box or reduce min_distance")
        p = rng.uniform(0.0, box, size=3)
        if all(np.linalg.norm(p - q) >= min_distance for q in pts):
            pts.append(p)
    pos = np.array(pts)
    c = np.zeros((n_spins, n_spins))
    for i in range(n_spins):
        for j in range(i + 1, n_spins):
            r = pos[j] - pos[i]
            dist = np.linalg.norm(r)
            cos2 = (r[2] / dist) ** 2
            c[i, j] = c[j, i] = d_scale * 0.5 * (3 * cos2 - 1) * (min_distance / dist) ** 3
    offsets = offset + offset_spread * (rng.uniform(size=n_spins) - 0.5)
    return SpinCluster(offsets, c)


_GENERATORS = {"chain", "all_to_all", "random_geometric"}


def build_cluster(desc: Mapping[str, Any]) -> SpinCluster:
    """Build a cluster from a description in the file format.

    Two shapes are accepted, both in Hz::

        {"n_spins": 2, "offsets_hz": [..], "couplings_hz": [[..], [..]]}
        {"generator": "chain", "params": {"n_spins": 4, "d_hz": 100}, "seed": 7}

    Generator parameters: ``chain`` / ``all_to_all`` take ``n_spins``, ``d_hz``
    and optional ``offsets_hz``; ``random_geometric`` takes ``n_spins``,
    ``d_scale_hz``, ``offset_hz``, ``offset_spread_hz``, ``box``,
    ``min_distance`` and requires ``seed``.
    """
    try:
        if "generator" in desc:
            gen = desc["generator"]
            params = dict(desc.get("params", {}))
            if gen not in _GENERATORS:
                raise ConfigError(f"unknown generator {gen!r}")
            n = int(params.pop("n_spins"))
            if not 1 <= n <= MAX_SPINS:
                raise ConfigError(f"n_spins must be in [1, {MAX_SPINS}], got {n}")
            if gen in ("chain", "all_to_all"):
                d = TWO_PI * float(params.pop("d_hz"))
                if d <= 0:
                    raise ConfigError("d_hz must be positive")
                offsets = params.pop("offsets_hz", None)
                if offsets is not None:
                    offsets = TWO_PI * np.asarray(offsets, dtype=float)
                fn = chain if gen == "chain" else all_to_all
                cluster = fn(n, d, offsets)
            else:
                if "seed" not in desc:
                    raise ConfigError("random_geometric requires a seed")
                kw = {}
                for key in ("d_scale", "offset", "offset_spread"):
                    if key + "_hz" in params:
                        kw[key] = TWO_PI * float(params.pop(key + "_hz"))
                for key in ("box", "min_distance"):
                    if key in params:
                        kw[key] = float(params.pop(key))
                cluster = random_geometric(n, int(desc["seed"]), **kw)
            if params:
                raise ConfigError(f"unused generator parameters: {sorted(params)}")
            return cluster
        n = int(desc["n_spins"])
        offsets = TWO_PI * np.asarray(desc.get("offsets_hz", [0.0] * n), dtype=float)
        couplings = TWO_PI * np.asarray(desc["couplings_hz"], dtype=float)
        if offsets.size != n:
            raise ConfigError(f"expected {n} offsets, got {offsets.size}")
        return SpinCluster(offsets, couplings)
    except KeyError as exc:
        raise ConfigError(f"cluster description missing field {exc}") from None


# ---------------------------------------------------------------------------
# operators


def _embed(op: np.ndarray, site: int, n: int) -> np.ndarray:
    out = np.eye(1)
    for k in range(n):
        out = np.kron(out, op if k == site else np.eye(2))
    return out


class SpinOperatorSet:
    """Collective spin operators of an ``N``-spin system.

    ``s_x``, ``s_y``, ``s_z`` are dense ``2**N`` square matrices.  The
    per-spin operators are built on first access only, since for large ``N``
    holding all of them is wasteful.
    """

    def __init__(self, n_spins: int):
        self.n_spins = n_spins
        self.dim = 1 << n_spins
        # magnetization of each computational basis state
        ups = np.array([n_spins - bin(k).count("1") for k in range(self.dim)])
        self.m_basis = ups - n_spins / 2.0
        self.s_z = np.diag(self.m_basis).astype(float)
        s_x = np.zeros((self.dim, self.dim))
        for site in range(n_spins):
            flip = 1 << (n_spins - 1 - site)
            idx = np.arange(self.dim)
            s_x[idx, idx ^ flip] += 0.5
        self.s_x = s_x
        # S_y = (S_+ - S_-)/2i; S_+ raises M, i.e. flips a down spin (bit 1) up
        s_plus = np.where(self.m_basis[:, None] == self.m_basis[None, :] + 1, 2 * s_x, 0.0)
        self.s_plus = s_plus
        self.s_y = (s_plus - s_plus.T) / 2j
        for a in (self.s_x, self.s_z, self.s_plus):
            a.setflags(write=False)
        self.s_y.setflags(write=False)

    @functools.cached_property
    def single_x(self) -> list[np.ndarray]:
        return [_embed(_SX, i, self.n_spins) for i in range(self.n_spins)]

    @functools.cached_property
    def single_y(self) -> list[np.ndarray]:
        return [_embed(_SY, i, self.n_spins) for i in range(self.n_spins)]

    @functools.cached_property
    def single_z(self) -> list[np.ndarray]:
        return [_embed(_SZ, i, self.n_spins) for i in range(self.n_spins)]


@functools.lru_cache(maxsize=16)
def spin_operators(n_spins: int) -> SpinOperatorSet:
    """Shared (read-only) operator set for ``n_spins`` spins."""
    if not 1 <= n_spins <= MAX_SPINS:
        raise ConfigError(f"n_spins must be in [1, {MAX_SPINS}], got {n_spins}")
    return SpinOperatorSet(n_spins)


def n_spins_of(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 2 or (1 << n) != dim:
        raise ValueError(f"matrix dimension {dim} is not a power of two")
    return n


def internal_hamiltonian(cluster: SpinCluster) -> np.ndarray:
    """Dense secular dipolar Hamiltonian (rad/s), real symmetric.

    Built directly in the product basis: the ``I_z I_z`` and offset terms are
    diagonal, and ``-(I_x I_x + I_y I_y) = -(I_+ I_- + I_- I_+)/2`` only swaps
    antiparallel pairs with amplitude ``-d/2``.
    """
    n = cluster.n_spins
    dim = cluster.dim
    idx = np.arange(dim)
    # z_i(k) = +1/2 if spin i of basis state k is up
    z = np.array([0.5 - ((idx >> (n - 1 - i)) & 1) for i in range(n)])
    diag = cluster.offsets @ z
    h = np.zeros((dim, dim))
    for i in range(n):
        for j in range(i + 1, n):
            d = cluster.couplings[i, j]
            if d == 0.0:
                continue
            diag = diag + 2.0 * d * z[i] * z[j]
            mask = (1 << (n - 1 - i)) | (1 << (n - 1 - j))
            anti = z[i] != z[j]
            h[idx[anti], idx[anti] ^ mask] += -0.5 * d
    h[idx, idx] += diag
    return h


# ---------------------------------------------------------------------------
# eigensystem and transitions


@dataclass(frozen=True, eq=False)
class EigenSystem:
    """Eigendecomposition ``H = V diag(eps) V^dagger`` with ascending ``eps``.

    ``magnetization[i]`` is the total ``S_z`` quantum number of eigenvector
    ``i``.  ``degenerate`` is set when two eigenvalues lie closer than
    ``freq_epsilon``; this is reported, not rejected.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    magnetization: np.ndarray
    degenerate: bool = False

    @property
    def dim(self) -> int:
        return self.eigenvalues.size

    def residual(self, h: np.ndarray) -> float:
        """Relative Frobenius reconstruction error."""
        v = self.eigenvectors
        rec = (v * self.eigenvalues) @ v.conj().T
        return float(np.linalg.norm(h - rec) / max(np.linalg.norm(h), 1e-300))


def eigensystem(h: np.ndarray, freq_epsilon: float = FREQ_EPSILON) -> EigenSystem:
    """Diagonalize a Hermitian ``H`` on ``N`` spins.

    When ``H`` conserves total ``S_z`` (checked to 1e-12 relative) each
    magnetization sector is diagonalized separately, so eigenvectors never mix
    sectors even where eigenvalues of different sectors coincide.  Otherwise a
    full diagonalization is done and ``M`` is the rounded ``<i|S_z|i>``.

    ``freq_epsilon`` is relative to the eigenvalue span; closer pairs set the
    ``degenerate`` flag and emit a warning.
    """
    h = np.asarray(h)
    dim = h.shape[0]
    n = n_spins_of(dim)
    ops = spin_operators(n)
    m_basis = ops.m_basis
    scale = max(np.abs(h).max(), 1e-300)
    cross = np.abs(h[m_basis[:, None] != m_basis[None, :]])
    if cross.size == 0 or cross.max() <= 1e-12 * scale:
        evals = np.empty(dim)
        evecs = np.zeros((dim, dim), dtype=h.dtype)
        mags = np.empty(dim)
        col = 0
        for m in np.unique(m_basis):
            sel = np.flatnonzero(m_basis == m)
            w, v = np.linalg.eigh(h[np.ix_(sel, sel)])
            k = sel.size
            evals[col:col + k] = w
            evecs[sel, col:col + k] = v
            mags[col:col + k] = m
            col += k
        order = np.argsort(evals, kind="stable")
        evals, evecs, mags = evals[order], evecs[:, order], mags[order]
    else:
        evals, evecs = np.linalg.eigh(h)
        sz = np.einsum("ki,k,ki->i", evecs.conj(), m_basis, evecs).real
        mags = np.round(2 * sz) / 2
    span = evals[-1] - evals[0]
    gaps = np.diff(evals)
    degenerate = bool(gaps.size and span > 0 and gaps.min() < freq_epsilon * span)
    if degenerate:
        warnings.warn(
            "Hamiltonian has (near-)degenerate eigenvalues; transition "
            "frequencies may coincide",
            RuntimeWarning,
            stacklevel=2,
        )
    for a in (evals, evecs, mags):
        a.setflags(write=False)
    return EigenSystem(evals, evecs, mags, degenerate)


@dataclass(frozen=True, eq=False)
class TransitionTable:
    """Single-quantum transitions ``i <-> j`` with nonzero ``<i|S_x|j>``.

    Each unordered pair appears once, oriented so that ``M_i = M_j + 1``;
    ``omega = eps_i - eps_j`` is then the frequency at which the pair shows up
    in an ``S_+``-detected FID (see :func:`spin_processor.propagate.acquire_fid`).
    """

    i: np.ndarray
    j: np.ndarray
    omega: np.ndarray
    weight: np.ndarray
    degenerate_flag: bool

    def __len__(self) -> int:
        return self.omega.size

    @property
    def omega_loc(self) -> float:
        """Full width of the linear-response spectrum, rad/s."""
        if self.omega.size == 0:
            return 0.0
        return float(self.omega.max() - self.omega.min())

    @property
    def entries(self) -> list[tuple[int, int, float, float]]:
        return list(
            zip(self.i.tolist(), self.j.tolist(), self.omega.tolist(), self.weight.tolist())
        )


def transition_table(
    es: EigenSystem,
    ops: Optional[SpinOperatorSet] = None,
    weight_epsilon: float = WEIGHT_EPSILON,
    freq_epsilon: float = FREQ_EPSILON,
) -> TransitionTable:
    """Enumerate allowed transitions of an eigensystem.

    Entries are sorted by frequency.
    """
    if ops is None:
        ops = spin_operators(n_spins_of(es.dim))
    v = es.eigenvectors
    sx = v.conj().T @ ops.s_x @ v
    weight = np.abs(sx) ** 2
    raise_pair = es.magnetization[:, None] == es.magnetization[None, :] + 1
    ii, jj = np.nonzero(raise_pair & (weight > weight_epsilon))
    omega = es.eigenvalues[ii] - es.eigenvalues[jj]
    order = np.lexsort((jj, ii, omega))
    ii, jj, omega = ii[order], jj[order], omega[order]
    w = weight[ii, jj]
    width = omega.max() - omega.min() if omega.size else 0.0
    degenerate = bool(omega.size > 1 and np.diff(omega).min() < freq_epsilon * width)
    for a in (ii, jj, omega, w):
        a.setflags(write=False)
    return TransitionTable(ii, jj, omega, w, degenerate)


def max_transitions(n_spins: int) -> int:
    """Upper bound ``C(2N, N+1)`` on the number of allowed transitions."""
    return math.comb(2 * n_spins, n_spins + 1)


def analyze(cluster: SpinCluster) -> tuple[np.ndarray, EigenSystem, TransitionTable]:
    """Hamiltonian, eigensystem and transition table of a cluster in one call."""
    h = internal_hamiltonian(cluster)
    es = eigensystem(h)
    return h, es, transition_table(es, spin_operators(cluster.n_spins))
