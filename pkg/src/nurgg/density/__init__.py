from .measure import (
    DEFAULT_BUDGET,
    DEFAULT_TOLERANCES,
    BallMassEvaluator,
    IntegrationError,
    QuadratureBudget,
    RadiusSolveError,
    SolverTolerances,
    ball_measure,
    cutoff_mass,
    cutoff_radii,
    cutoff_radius,
    h_transform,
    has_closed_form,
    poisson_cutoff_mass,
    poisson_cutoff_radii,
    poisson_cutoff_radius,
    radii_for_mass,
    radius_for_mass,
)
from .models import (
    ClassH,
    DensityModel,
    DimensionError,
    HolePatch,
    Marginal,
    ProductDensity,
    RadialEdgeVanishing,
    RadialInteriorVanishing,
    SamplingError,
    UniformCube,
    continuity_defect,
    density_from_config,
    pdf_eval,
)
from .norms import NormSpec, parse_p, unit_ball_volume
from .regions import (
    PoissonConditionReport,
    RegionProbe,
    in_A,
    region_measure,
    verify_poisson_conditions,
)
