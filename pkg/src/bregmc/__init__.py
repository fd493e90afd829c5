"""Monte Carlo Bregman generators and the dually flat geometry toolbox.

Mixture-family negentropies and many exponential-family log-normalizers
have no closed form, which blocks the whole Bregman toolbox (dual
coordinates, geodesics, divergence-based clustering).  This package
replaces such generators with provably convex Monte Carlo surrogates
built on a single fixed importance sample, so every downstream
computation reuses the same variates and stays mutually consistent,
and runs the standard dually flat machinery on top.
"""

from .errors import DegeneracyError, DomainError, NoSolutionError
from .families import (ComponentDensity, ExponentialFamily, MixtureDensity,
                       MixtureFamily, beta_ef_generator, binomial_ef_oracle,
                       cauchy, gaussian, gaussian_ef_oracle, laplace,
                       mixture_log_density, mixture_negentropy_oracle,
                       pef_quadrature_oracle, polynomial_ef)
from .generators import (AffineShiftedGenerator, Generator,
                         LinearCombinationGenerator, MCExponentialGenerator,
                         MCMixtureGenerator, OpenSimplex, RealSpace,
                         aggregate_exponential_generators,
                         aggregate_mixture_generators,
                         build_mc_exponential_generator,
                         build_mc_mixture_generator, lse0p, lse0p_grad,
                         lse0p_hess)
from .geometry import (DuallyFlatSpace, GeodesicPoint, LegendreDualGenerator,
                       mc_kl_estimate)
from .sampling import (Proposal, SampleSet, component_proposal,
                       draw_partitioned, draw_sample_set,
                       uniform_interval_proposal, uniform_mixture_proposal)
from .clustering import (ClusterConfig, ClusterResult,
                         jeffreys_kmeans_via_skew, left_sided_kmeans,
                         mixed_kmeans, right_sided_kmeans)

__version__ = "0.1.0"

__all__ = [
    "DegeneracyError", "DomainError", "NoSolutionError",
    "ComponentDensity", "gaussian", "laplace", "cauchy",
    "MixtureFamily", "MixtureDensity", "mixture_log_density",
    "ExponentialFamily", "polynomial_ef",
    "gaussian_ef_oracle", "binomial_ef_oracle", "pef_quadrature_oracle",
    "mixture_negentropy_oracle", "beta_ef_generator",
    "Generator", "OpenSimplex", "RealSpace",
    "lse0p", "lse0p_grad", "lse0p_hess",
    "MCMixtureGenerator", "MCExponentialGenerator",
    "build_mc_mixture_generator", "build_mc_exponential_generator",
    "aggregate_mixture_generators", "aggregate_exponential_generators",
    "AffineShiftedGenerator", "LinearCombinationGenerator",
    "Proposal", "SampleSet", "component_proposal", "uniform_mixture_proposal",
    "uniform_interval_proposal", "draw_sample_set", "draw_partitioned",
    "DuallyFlatSpace", "GeodesicPoint", "LegendreDualGenerator",
    "mc_kl_estimate",
    "ClusterConfig", "ClusterResult", "right_sided_kmeans",
    "left_sided_kmeans", "mixed_kmeans", "jeffreys_kmeans_via_skew",
]
