"""Payload-based OFDM sensing toolkit.

Design and analysis of receive filters for ranging with communication
payloads: matched and reciprocal baselines, the region-of-interest
mismatched filter, off-grid multi-target delay estimation via the matrix
pencil method, closed-form MSE/CRB calculators, and a reproducible Monte
Carlo harness.
"""

from ofdmsense.channel import (
    SPEED_OF_LIGHT,
    OfdmNumerology,
    Scatterer,
    SceneConfig,
    SymbolFrame,
    delay_to_range,
    make_frame_sequence,
    range_to_delay,
    simulate_rx,
    steering,
)
from ofdmsense.constellation import (
    Constellation,
    ConstellationMoments,
    SymbolBlock,
    draw_block,
    make_constellation,
    moments,
    parse_constellation,
)
from ofdmsense.estimator import (
    DelayEstimates,
    RangeProfile,
    associate_and_score,
    average_cpi,
    matrix_pencil,
    range_profile,
    select_order,
)
from ofdmsense.filters import (
    FilterDiagnostics,
    ReceiveFilter,
    ShiftSet,
    apply_filter,
    mf_filter,
    rf_filter,
    roi_mmf,
    roi_mmf_direct,
    sidelobe_coeffs,
)
from ofdmsense.montecarlo import McCell, McConfig, McSummary, run_sweep, run_trial

__version__ = "0.1.0"
