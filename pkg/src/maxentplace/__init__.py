"""Two-layer MaxEnt-reweighted D-optimal sensor placement for bearing-only
multi-source localization."""

from .geometry import (
    RHO_MIN,
    DomainBox,
    NoiseModel,
    bearing,
    log_likelihood,
    simulate_measurement,
    wrap_angle,
)
from .fim import (
    JITTER,
    dopt_gradient,
    dopt_objective,
    per_sensor_fim,
    total_source_fim,
)
from .maxent import (
    LAMBDA_MAX,
    TiltSolution,
    exponential_tilt,
    maxent_reweight,
    projection_costs,
    sample_directions,
    solve_lambda,
    target_mean,
)
from .particle_filter import (
    ParticleCloud,
    effective_sample_size,
    init_cloud,
    systematic_resample,
    update_weights,
    weighted_mean,
)
from .placement import PlacementResult, local_ascent, optimize_placement
from .harness import (
    METHOD_DOPT,
    METHOD_MAXENT,
    Scenario,
    SweepGrid,
    SweepResult,
    TrialRecord,
    rmse,
    run_sweep,
    run_trial,
    sensor_saving,
    source_layout,
)

__version__ = "0.1.0"
