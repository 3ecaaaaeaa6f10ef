import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from conftest import SX, TWO_PI, random_cluster, single
from spin_processor.cluster import SpinCluster, internal_hamiltonian, spin_operators
from spin_processor.errors import StabilityError
from spin_processor.propagate import (
    DeviationState,
    PropagationParams,
    acquire_fid,
    default_dt,
    evolve_free,
    evolve_program,
    evolve_pulse,
    segment_propagator,
    thermal_state,
)
from spin_processor.pulses import Harmonic, PulseProgram, PulseSegment


def one_spin(offset=0.0):
    c = SpinCluster([offset], [[0.0]])
    return c, internal_hamiltonian(c)


def test_thermal_state_examples():
    assert np.allclose(thermal_state(SpinCluster([0.0], [[0.0]])).matrix, np.diag([0.5, -0.5]))
    for n in range(1, 6):
        st_ = thermal_state(random_cluster(n, n))
        assert abs(np.trace(st_.matrix)) == 0
        sz = spin_operators(n).s_z
        assert st_.expectation(sz).real == pytest.approx(n * 2**n / 4)
        st_.check()


def test_zero_amplitude_leaves_thermal_state():
    c = SpinCluster(TWO_PI * np.array([100.0, 250.0]), np.zeros((2, 2)))
    h = internal_hamiltonian(c)
    rho0 = thermal_state(c)
    seg = PulseSegment(0.01, (Harmonic(TWO_PI * 100, 0.0),))
    out = evolve_pulse(rho0, h, seg)
    assert np.allclose(out.matrix, rho0.matrix, atol=1e-12)
    assert out.time == pytest.approx(0.01)


@pytest.mark.parametrize("method", ["trotter2", "midpoint-exponential"])
def test_rabi_on_resonance(method):
    c, h = one_spin()
    a = TWO_PI * 50.0
    rho0 = thermal_state(c)
    sz = spin_operators(1).s_z
    for t in (0.001, 0.0037, 0.01, 0.02):
        seg = PulseSegment(t, (Harmonic(0.0, a, 0.0),))
        rho = evolve_pulse(rho0, h, seg, PropagationParams(method=method))
        ratio = rho.expectation(sz).real / rho0.expectation(sz).real
        assert abs(ratio - math.cos(a * t)) <= 1e-6


def test_generalized_rabi():
    delta, a = TWO_PI * 80.0, TWO_PI * 60.0
    c, h = one_spin(delta)
    w = math.hypot(delta, a)
    sz = spin_operators(1).s_z
    rho0 = thermal_state(c)
    for t in (0.003, 0.0125):
        seg = PulseSegment(t, (Harmonic(0.0, a, 0.0),))
        rho = evolve_pulse(rho0, h, seg, PropagationParams(dt=2e-6))
        expected = (delta**2 + a**2 * math.cos(w * t)) / w**2
        assert abs(rho.expectation(sz).real / 0.5 - expected) <= 1e-6


@settings(max_examples=15)
@given(st.integers(1, 4), st.integers(0, 1000), st.floats(0, 500), st.floats(-1000, 1000))
def test_norm_and_hermiticity_conserved(n, seed, amp_hz, off_hz):
    c = random_cluster(n, seed, d_hz=100.0, spread_hz=300.0)
    h = internal_hamiltonian(c)
    seg = PulseSegment(0.004, (Harmonic(TWO_PI * off_hz, TWO_PI * amp_hz, 0.3),))
    rho0 = thermal_state(c)
    rho = evolve_pulse(rho0, h, seg)
    assert rho.norm == pytest.approx(rho0.norm, rel=1e-9)
    rho.check(1e-9)


def test_propagator_is_unitary():
    c = random_cluster(4, 1)
    h = internal_hamiltonian(c)
    seg = PulseSegment(0.005, (Harmonic(TWO_PI * 300, TWO_PI * 40, 0.0), Harmonic(TWO_PI * -200, TWO_PI * 40, 1.0)))
    u = segment_propagator(h, seg)
    assert np.allclose(u.conj().T @ u, np.eye(16), atol=1e-10)


def test_trotter_matches_midpoint_exponential():
    c = random_cluster(3, 4, d_hz=200.0, spread_hz=500.0)
    h = internal_hamiltonian(c)
    seg = PulseSegment(0.003, (Harmonic(TWO_PI * 120, TWO_PI * 80, 0.2),))
    p = dict(dt=1e-6)
    u1 = segment_propagator(h, seg, PropagationParams(method="trotter2", **p))
    u2 = segment_propagator(h, seg, PropagationParams(method="midpoint-exponential", **p))
    assert np.abs(u1 - u2).max() < 1e-6


def test_trotter_matches_dense_expm_product():
    """Independent oracle: scipy expm of the Strang factors, step by step."""
    c = random_cluster(2, 8)
    h = internal_hamiltonian(c)
    sx = sum(single(SX, i, 2) for i in range(2))
    a, off, dt, n = TWO_PI * 70, TWO_PI * 150, 5e-6, 200
    seg = PulseSegment(n * dt, (Harmonic(off, a, 0.0),))
    u_ref = np.eye(4, dtype=complex)
    half = expm(-0.5j * h * dt)
    for k in range(n):
        th = a * math.cos(off * (k + 0.5) * dt) * dt
        u_ref = half @ expm(-1j * th * sx) @ half @ u_ref
    u = segment_propagator(h, seg, PropagationParams(dt=dt))
    assert np.abs(u - u_ref).max() < 1e-11


def test_phase_coherent_program_equals_single_segment():
    c = random_cluster(3, 2, d_hz=100.0, spread_hz=300.0)
    h = internal_hamiltonian(c)
    hs = (Harmonic(TWO_PI * 200, TWO_PI * 30, 0.4),)
    dt = 1e-5
    whole = evolve_pulse(thermal_state(c), h, PulseSegment(0.004, hs), PropagationParams(dt=dt))
    split = evolve_program(
        thermal_state(c), h, PulseProgram((PulseSegment(0.0015, hs), PulseSegment(0.0025, hs))),
        PropagationParams(dt=dt),
    )
    assert np.allclose(whole.matrix, split.matrix, atol=1e-10)
    restart = evolve_program(
        thermal_state(c), h, PulseProgram((PulseSegment(0.0015, hs), PulseSegment(0.0025, hs))),
        PropagationParams(dt=dt, coherent=False),
    )
    assert not np.allclose(whole.matrix, restart.matrix, atol=1e-6)


def test_stability_guard():
    c, h = one_spin(TWO_PI * 1000)
    seg = PulseSegment(0.01, (Harmonic(0.0, TWO_PI * 100, 0.0),))
    with pytest.raises(StabilityError):
        evolve_pulse(thermal_state(c), h, seg, PropagationParams(dt=1e-3))
    dt = default_dt(h, seg)
    assert dt * (TWO_PI * 100 + TWO_PI * 500) <= 0.1 + 1e-12


def test_free_evolution_examples():
    delta = TWO_PI * 37.0
    c, h = one_spin(delta)
    ix = DeviationState(spin_operators(1).s_x)
    assert np.allclose(evolve_free(ix, h, 0.0).matrix, ix.matrix)
    rho0 = thermal_state(c)
    assert np.allclose(evolve_free(rho0, h, 0.123).matrix, rho0.matrix)
    for t in (0.001, 0.01, 0.2):
        ratio = evolve_free(ix, h, t).expectation(spin_operators(1).s_x).real / 0.5
        assert abs(ratio - math.cos(delta * t)) <= 1e-9


def test_free_evolution_matches_expm():
    c = random_cluster(3, 6)
    h = internal_hamiltonian(c)
    rng = np.random.default_rng(0)
    m = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    rho = DeviationState(m + m.conj().T)
    u = expm(-1j * h * 0.0031)
    assert np.allclose(evolve_free(rho, h, 0.0031).matrix, u @ rho.matrix @ u.conj().T, atol=1e-9)


def test_fid_examples():
    c, h = one_spin(TWO_PI * 40.0)
    assert np.allclose(acquire_fid(thermal_state(c), h, 64, 1e-3), 0.0)
    ix = DeviationState(spin_operators(1).s_x)
    t = np.arange(64) * 1e-3
    fid = acquire_fid(ix, h, 64, 1e-3)
    assert np.allclose(fid, 0.5 * np.exp(1j * TWO_PI * 40.0 * t), atol=1e-12)
    assert np.allclose(acquire_fid(DeviationState(2 * ix.matrix), h, 64, 1e-3), 2 * fid)


def test_fid_matches_direct_trace():
    c = random_cluster(3, 11)
    h = internal_hamiltonian(c)
    seg = PulseSegment(0.002, (Harmonic(TWO_PI * 100, TWO_PI * 200, 0.0),))
    rho = evolve_pulse(thermal_state(c), h, seg)
    fid = acquire_fid(rho, h, 16, 2e-4)
    sp = spin_operators(3).s_plus
    for k in (0, 5, 15):
        direct = evolve_free(rho, h, k * 2e-4).expectation(sp)
        assert fid[k] == pytest.approx(direct, abs=1e-10)


def test_fid_validation():
    c, h = one_spin()
    with pytest.raises(ValueError):
        acquire_fid(thermal_state(c), h, 1, 1e-3)
    with pytest.raises(ValueError):
        acquire_fid(thermal_state(c), h, 8, 0.0)
