import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spin_processor.regime import Regime, classify_regime, spacing_estimate


def test_spacing_examples():
    assert spacing_estimate(0, 7.5) == 7.5
    assert spacing_estimate(5, 1024.0) == 1.0
    vals = [spacing_estimate(n, 1e4) for n in range(12)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize(
    "omega, expected",
    [(0.1, Regime.SingleTransition), (32.0, Regime.CollectiveCoherent), (1e5, Regime.HardPulse)],
)
def test_classify_examples(omega, expected):
    r = classify_regime(omega, 5, 1024.0, 3.0)
    assert r.regime == expected
    assert r.thresholds == (1.0, 32.0, 1024.0)


def test_all_five_regimes_and_gaps():
    # N=5, w_loc=1024: edges 1/3, 3, 32/3, 96, 1024/3, 3072
    labels = {
        0.2: "SingleTransition",
        1.0: "Crossover(SingleTransition,InhomogeneousEnsemble)",
        5.0: "InhomogeneousEnsemble",
        32.0: "CollectiveCoherent",
        200.0: "ThermodynamicSaturation",
        1000.0: "Crossover(ThermodynamicSaturation,HardPulse)",
        5000.0: "HardPulse",
    }
    for omega, label in labels.items():
        assert classify_regime(omega, 5, 1024.0).label == label


def test_band_edges_inclusive_as_documented():
    # t1*k <= w <= t2/k is Inhomogeneous; t2*k <= w <= t3/k is Thermodynamic
    assert classify_regime(3.0, 5, 1024.0).regime == Regime.InhomogeneousEnsemble
    assert classify_regime(32 / 3, 5, 1024.0).regime == Regime.InhomogeneousEnsemble
    assert classify_regime(96.0, 5, 1024.0).regime == Regime.ThermodynamicSaturation
    assert classify_regime(1024 / 3, 5, 1024.0).regime == Regime.ThermodynamicSaturation


@given(st.integers(1, 12), st.floats(1.0, 1e6), st.floats(1.0, 5.0))
def test_labels_monotone(n, omega_loc, kappa):
    omegas = np.logspace(-8, 8, 400) * omega_loc
    ranks = [classify_regime(w, n, omega_loc, kappa).rank for w in omegas]
    assert all(b >= a for a, b in zip(ranks, ranks[1:]))
    assert ranks[0] == 1 and ranks[-1] == 5


def test_degenerate_geometry_reported():
    r = classify_regime(1.0, 3, 100.0)
    assert r.diagnostic is not None
    assert classify_regime(1.0, 5, 1024.0).diagnostic is None


def test_report_dict_units():
    d = classify_regime(2 * math.pi * 10, 5, 2 * math.pi * 1024).to_dict()
    assert d["omega_hz"] == pytest.approx(10.0)
    assert d["thresholds_hz"]["omega_loc"] == pytest.approx(1024.0)
    assert d["margin_decades"] >= 0


def test_invalid_inputs():
    with pytest.raises(ValueError):
        classify_regime(0.0, 5, 1024.0)
    with pytest.raises(ValueError):
        classify_regime(1.0, 5, 1024.0, kappa=0.5)
    with pytest.raises(ValueError):
        spacing_estimate(3, 0.0)
