"""Perihelion-shift experiments for the two-body problem.

Thin re-export of the compiled core; see the README for the command-line tool.
"""

from ._core import (
    ARCSEC_PER_RADIAN,
    CSV_HEADER,
    EXTENDED_PRECISION,
    GM_SUN,
    MERCURY_R_PER,
    MERCURY_V_PER,
    R_SCH_SUN,
    CellIndexing,
    CollisionError,
    FixedStepMethod,
    ForceKind,
    IntegratorChoice,
    LinearVariant,
    MeshScheme,
    MeshSpec,
    MetrologyError,
    OrbitSpec,
    OrbitState,
    PointConfig,
    ReferenceOrbit,
    StepSizeUnderflow,
    acceleration,
    diagnostics,
    fit_cosine,
    fit_gaussian,
    fit_powerlaw,
    initial_conditions,
    integrate_fixed,
    parse_method,
    relativistic_advance_prediction,
    run_point,
    sweep_beta,
    sweep_ecc,
    sweep_theta,
    sweep_timestep,
)

__all__ = [name for name in dir() if not name.startswith("_")]
