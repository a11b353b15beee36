"""Data-driven stabilization with logarithmically quantized state feedback."""

from .adversarial import FULL_RANK, RankDeficiencyWitness, build_witness, informativity_report
from .certificates import (
    DensityResult,
    Infeasible,
    NumericalFailure,
    StabilizationCertificate,
    SynthesisError,
    assemble_synthesis_lmi,
    hinf_norm_bisection,
    mahler_measure,
    maximize_density,
    solve_fixed_density,
    verify_certificate,
)
from .data import (
    NoiseBound,
    TrajectoryData,
    UncertaintyEllipsoid,
    build_ellipsoid,
    center_and_radius,
    membership,
    rank_condition,
    sample_members,
    slater_check,
)
from .lti import (
    ClosedLoopSystem,
    LinearSystem,
    LogQuantizer,
    frequency_response_norm,
    quantize,
    simulate_open_loop,
    simulate_quantized_closed_loop,
)

__version__ = "0.1.0"
