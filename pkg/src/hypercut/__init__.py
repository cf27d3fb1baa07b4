"""Numerical lab for mixing of geodesic flows and Brownian motion on compact
hyperbolic surfaces: exact geometry, a radial multiplier with decay
envelopes, spectral upper bounds, Monte Carlo distance-to-uniformity
estimates, and reproducible experiment sweeps."""

from .errors import (
    AccuracyError,
    InvariantViolation,
    NumericError,
    ReductionError,
)
from .harness import (
    CutoffReport,
    DeltaCurve,
    ExperimentConfig,
    ExperimentKind,
    crossing_time,
    load_config,
    monotone_envelope,
    parse_config_text,
    run_brownian_mixing,
    run_geodesic_cutoff,
    run_nu_table,
    run_spectrum_bound,
)
from .hypgeom import (
    BallSampler,
    UnitTangent,
    ball_volume,
    distance,
    gamma_d,
    geodesic_flow,
    minkowski_dot,
    origin,
    sample_ball_uniform,
    sample_tangent_uniform,
    sphere_area,
    tangent_frame,
)
from .multiplier import (
    FROZEN_ENVELOPE_C,
    NuResult,
    Series,
    SpectralPoint,
    decay_bound,
    decay_class,
    fit_envelope_constant,
    multiplier_closed_d3,
    multiplier_grid,
    multiplier_quadrature,
    sigma_d,
    spectral_point,
)
from .rng import SeededStream
from .simulate import (
    EmpiricalMeasure,
    TVEstimate,
    brownian_measure,
    brownian_radii,
    brownian_sample,
    brownian_surface_samples,
    cell_areas,
    chi_square_vs_uniform,
    empirical_measure,
    geodesic_measure,
    geodesic_sample,
    geodesic_surface_samples,
    liouville_measure,
    liouville_surface_samples,
    sample_surface_uniform,
    tv_against_uniform,
    tv_lower_bound_support,
    worker_count,
)
from .spectral import (
    SpectrumTable,
    coarse_bound_curve,
    density_profile,
    load_spectrum,
    mixing_time_from_bound,
    s_parameter,
    save_spectrum,
    tv_bound_coarse,
    tv_bound_majl2,
)
from .surface import (
    FuchsianGroup,
    FundamentalDomain,
    MobiusElement,
    SurfacePoint,
    bolza_group,
    injectivity_radius_lower,
    load_surface_json,
    reduce,
    reduce_batch,
    save_surface_json,
    surface_distance_upper,
    surface_distance_upper_batch,
)

__all__ = [name for name in dir() if not name.startswith("_")]
