"""Geodesic Langevin sampling of e^{-f} on closed Riemannian manifolds."""

from geolangevin.geodesic import exp_ode, exp_sphere, normal_metric_expansion_check, retract_project
from geolangevin.geometry import (
    Chart,
    FlatTorus,
    MetricData,
    Sphere,
    SphericalChart,
    geodesic_distance,
    metric_at,
    parallel_transport,
    riemannian_grad,
)
from geolangevin.partition import BinnedDensity, EqualAreaGrid, LatLonGrid, TorusGrid
from geolangevin.sampler import (
    ChainConfig,
    SampleTrace,
    drift,
    gla_step_chart,
    gla_step_embedded,
    noise_sqrt,
    rgla_step,
    run_chain,
)
from geolangevin.target import (
    ChartFn,
    CosineTorus,
    Quadratic,
    Uniform,
    figure1_target,
    figure2_target,
    normalize,
    reference_masses,
)

__version__ = "0.1.0"

__all__ = [
    "exp_ode",
    "exp_sphere",
    "normal_metric_expansion_check",
    "retract_project",
    "Chart",
    "FlatTorus",
    "MetricData",
    "Sphere",
    "SphericalChart",
    "geodesic_distance",
    "metric_at",
    "parallel_transport",
    "riemannian_grad",
    "BinnedDensity",
    "EqualAreaGrid",
    "LatLonGrid",
    "TorusGrid",
    "ChainConfig",
    "SampleTrace",
    "drift",
    "gla_step_chart",
    "gla_step_embedded",
    "noise_sqrt",
    "rgla_step",
    "run_chain",
    "ChartFn",
    "CosineTorus",
    "Quadratic",
    "Uniform",
    "figure1_target",
    "figure2_target",
    "normalize",
    "reference_masses",
]
