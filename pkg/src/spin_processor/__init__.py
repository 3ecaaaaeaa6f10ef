"""Desk-scale simulator of a dipolar-coupled spin cluster used as a parallel
bit processor.

Integers are written into a cluster as multi-frequency excitation combs, the
deviation density operator is propagated under the internal dipolar
Hamiltonian plus the drive, and bits are read back from the absolute-value
spectrum of the free-induction decay.  An anti-phase comb applied after the
all-ones comb erases the addressed peaks, which implements bitwise NOT.

Frequencies are angular (rad/s) everywhere inside the package; Hz only
appears at file and command-line boundaries.
"""

from .codec import (
    BandPlan,
    bits_to_int,
    bitwise_not_oracle,
    int_to_bits,
    slot_frequency,
)
from .cluster import (
    EigenSystem,
    SpinCluster,
    SpinOperatorSet,
    TransitionTable,
    build_cluster,
    eigensystem,
    internal_hamiltonian,
    spin_operators,
    transition_table,
)
from .errors import CalibrationError, ConfigError, StabilityError
from .pulses import (
    Harmonic,
    PulseProgram,
    PulseSegment,
    anti_phase,
    comb_from_bits,
    drive_amplitude,
)
from .propagate import (
    DeviationState,
    PropagationParams,
    acquire_fid,
    evolve_free,
    evolve_program,
    evolve_pulse,
    thermal_state,
)
from .readout import (
    MagnitudeSpectrum,
    ThresholdPolicy,
    decode_bits,
    magnitude_spectrum,
    slot_amplitudes,
)
from .experiments import (
    Experiment,
    ExperimentConfig,
    RunResult,
    average_transients,
    desk_config,
    run_calibration,
    run_encode,
    run_not_gate,
    sweep_amplitude,
)
from .regime import Regime, RegimeReport, classify_regime, spacing_estimate

__version__ = "0.1.0"
