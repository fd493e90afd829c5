"""Monte Carlo Bregman generators for mixture and exponential families.

A *generator* is a strictly convex, twice continuously differentiable
function F on a convex parameter domain.  It is the single object the
rest of the package consumes: divergences, dual coordinates, geodesics
and clustering are all written against the ``Generator`` interface.

Two stochastic generators are built here from a fixed importance sample
``S = {x_1, ..., x_m}`` drawn from a proposal density q:

* ``MCMixtureGenerator`` estimates the negentropy of a mixture family,
  ``G(eta) ~ (1/m) sum_i m(x_i; eta) log m(x_i; eta) / q(x_i)``.
* ``MCExponentialGenerator`` estimates the log-normalizer of an
  exponential family.  After removing an affine term (which leaves every
  Bregman divergence unchanged) it is exactly a shifted log-sum-exp,
  ``F(theta) = lse0p(<a_i, theta> + b_i)``, hence strictly convex for
  any sample with non-degenerate sufficient statistics.

Both are strictly convex almost surely once the sample is large enough
(``m >= D`` for the mixture case, two distinct sufficient statistics for
the exponential case); positive definiteness is *checked* at build time
and violations raise :class:`~bregmc.errors.DegeneracyError` rather than
silently degrading downstream algorithms.

All per-sample reductions use numpy's pairwise summation over arrays
whose layout is fixed by ``m`` alone, so results are reproducible and
independent of how many caller threads share a generator.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import DegeneracyError, DomainError

if TYPE_CHECKING:  # pragma: no cover
    from .families import ExponentialFamily, MixtureFamily
    from .sampling import SampleSet

__all__ = [
    "ParameterDomain",
    "RealSpace",
    "OpenSimplex",
    "Generator",
    "lse0p",
    "lse0p_grad",
    "lse0p_hess",
    "MCMixtureGenerator",
    "MCExponentialGenerator",
    "build_mc_mixture_generator",
    "build_mc_exponential_generator",
    "aggregate_mixture_generators",
    "aggregate_exponential_generators",
    "AffineShiftedGenerator",
    "LinearCombinationGenerator",
]


# ---------------------------------------------------------------------------
# Parameter domains
# ---------------------------------------------------------------------------

class ParameterDomain(ABC):
    """Convex open domain of a generator, with enough structure for the
    numerical machinery: membership tests, a canonical interior point to
    start iterations from, and a projection used to clamp near-boundary
    requests."""

    dim: int

    @abstractmethod
    def contains(self, x: np.ndarray, margin: float | None = None) -> bool:
        """Whether ``x`` lies inside the domain (at distance ``margin``
        from the boundary when one is given)."""

    @abstractmethod
    def interior_point(self) -> np.ndarray:
        """A canonical well-conditioned interior point."""

    def project(self, x: np.ndarray, margin: float) -> np.ndarray:
        """Pull ``x`` to distance >= ``margin`` from the boundary.

        The default is the identity (unbounded domains need no clamp).
        """
        return np.asarray(x, float)

    def bounds1d(self) -> tuple[float, float] | None:
        """Interval bounds for one-dimensional domains, or None when a
        bracketing bisection fallback is not meaningful."""
        return None


class RealSpace(ParameterDomain):
    """All of R^D; membership only requires finite entries."""

    def __init__(self, dim: int):
        self.dim = int(dim)

    def contains(self, x, margin=None):
        x = np.asarray(x, float)
        return x.shape == (self.dim,) and bool(np.all(np.isfinite(x)))

    def interior_point(self):
        return np.zeros(self.dim)

    def bounds1d(self):
        return (-np.inf, np.inf) if self.dim == 1 else None


class OpenSimplex(ParameterDomain):
    """Open simplex ``{eta : eta_i > 0, sum(eta) < 1}`` of mixture weights.

    ``margin`` is the hard rejection distance used by membership tests:
    the gradient of a mixture negentropy diverges on the boundary, so
    points closer than ``margin`` to it are treated as out of domain.
    """

    def __init__(self, dim: int, margin: float = 1e-12):
        self.dim = int(dim)
        self.margin = float(margin)

    def contains(self, x, margin=None):
        m = self.margin if margin is None else float(margin)
        x = np.asarray(x, float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        return bool(np.all(x > m) and np.sum(x) < 1.0 - m)

    def interior_point(self):
        return np.full(self.dim, 1.0 / (self.dim + 1))

    def project(self, x, margin):
        """Shrink ``x`` toward the simplex center until every coordinate
        and the complementary weight are at least ``margin``."""
        x = np.asarray(x, float)
        c = self.interior_point()
        t = 1.0
        for xi, ci in zip(x, c):
            if xi < margin:
                t = min(t, (ci - margin) / (ci - xi))
        sx, sc = float(np.sum(x)), float(np.sum(c))
        if sx > 1.0 - margin:
            t = min(t, (1.0 - margin - sc) / (sx - sc))
        return c + t * (x - c)

    def bounds1d(self):
        return (0.0, 1.0) if self.dim == 1 else None


# ---------------------------------------------------------------------------
# Generator interface
# ---------------------------------------------------------------------------

class Generator(ABC):
    """Strictly convex C^2 function F together with its derivatives.

    Concrete generators expose

    * ``value(x)``     -- F(x), a float,
    * ``gradient(x)``  -- the length-D gradient,
    * ``hessian(x)``   -- the symmetric positive definite D x D Hessian,
    * ``domain``       -- the open convex :class:`ParameterDomain`,

    and must raise :class:`~bregmc.errors.DomainError` when evaluated
    outside their domain.
    """

    domain: ParameterDomain

    @property
    def dim(self) -> int:
        return self.domain.dim

    def domain_check(self, x) -> bool:
        """True when ``x`` is an admissible parameter vector."""
        return self.domain.contains(np.asarray(x, float))

    def _checked(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        if x.shape != (self.dim,):
            raise DomainError(
                f"expected a length-{self.dim} parameter vector, got shape {x.shape}")
        if not self.domain.contains(x):
            raise DomainError(f"parameter {x!r} outside the generator domain")
        return x

    @abstractmethod
    def value(self, x) -> float: ...

    @abstractmethod
    def gradient(self, x) -> np.ndarray: ...

    @abstractmethod
    def hessian(self, x) -> np.ndarray: ...


# ---------------------------------------------------------------------------
# lse0p: log(1 + sum exp), the strictly convex log-sum-exp variant
# ---------------------------------------------------------------------------

def _finite_vector(x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, float))
    if x.ndim != 1:
        raise ValueError("expected a 1-d vector")
    if x.size and not np.all(np.isfinite(x)):
        raise ValueError("non-finite entries are not admissible")
    return x


def lse0p(x) -> float:
    """``log(1 + sum_i exp(x_i))``, overflow-free.

    The implicit zero argument makes the function strictly convex (plain
    log-sum-exp is merely convex: it is affine along the diagonal).  The
    max trick includes the implicit zero, so arbitrarily large inputs
    cannot overflow; the empty vector gives ``log(1) = 0`` exactly.
    """
    x = _finite_vector(x)
    if x.size == 0:
        return 0.0
    m = max(0.0, float(np.max(x)))
    return m + float(np.log(np.exp(-m) + np.sum(np.exp(x - m))))


def _softmax0p(x: np.ndarray) -> np.ndarray:
    m = max(0.0, float(np.max(x))) if x.size else 0.0
    e = np.exp(x - m)
    return e / (np.exp(-m) + np.sum(e))


def lse0p_grad(x) -> np.ndarray:
    """Gradient of :func:`lse0p`: ``exp(x_i) / (1 + sum_k exp(x_k))``.

    Entries lie in (0, 1) and sum to strictly less than one.
    """
    return _softmax0p(_finite_vector(x))


def lse0p_hess(x) -> np.ndarray:
    """Hessian of :func:`lse0p`: ``diag(s) - s s^T`` with ``s`` the
    gradient.  Symmetric positive definite because the entries of ``s``
    sum to less than one."""
    s = _softmax0p(_finite_vector(x))
    return np.diag(s) - np.outer(s, s)


# ---------------------------------------------------------------------------
# Shared build-time check
# ---------------------------------------------------------------------------

def _require_spd(hess: np.ndarray, what: str) -> None:
    """Cholesky-based positive definiteness check; raises DegeneracyError."""
    try:
        np.linalg.cholesky(hess)
    except np.linalg.LinAlgError:
        raise DegeneracyError(
            f"{what}: Hessian is not positive definite at an interior point "
            "(degenerate sample or coincident components)") from None


# ---------------------------------------------------------------------------
# Mixture family Monte Carlo generator
# ---------------------------------------------------------------------------

class MCMixtureGenerator(Generator):
    """Monte Carlo estimate of a mixture family's negentropy generator.

    For a mixture ``m(x; eta) = sum_i eta_i p_i(x) + (1 - sum eta) p_0(x)``
    and a sample ``x_1..x_m ~ q``:

    * value     ``(1/m) sum_l m(x_l;eta) log m(x_l;eta) / q(x_l)``
    * gradient  ``(1/m) sum_l (p_i(x_l) - p_0(x_l)) (1 + log m(x_l;eta)) / q(x_l)``
    * hessian   ``(1/m) sum_l (p_i - p_0)(p_j - p_0) / (q m)`` at ``x_l``

    Everything is computed through log-density ratios against q, so
    mixtures whose linear-scale densities underflow in the tails stay
    finite.  The per-variate component/proposal ratios are precomputed
    once; each evaluation is O(m D).

    The domain is the open simplex with a hard 1e-12 boundary margin:
    the gradient diverges on the boundary, so callers must clamp before
    evaluating.
    """

    def __init__(self, family: "MixtureFamily", sample: "SampleSet"):
        if sample.kind != "mixture":
            raise ValueError("sample was not cached for a mixture family")
        if sample.family_label != family.label:
            raise ValueError(
                f"sample cached for family {sample.family_label!r}, "
                f"not {family.label!r}")
        d = family.order
        if sample.size < d:
            raise DegeneracyError(
                f"m = {sample.size} < D = {d}: the Hessian of a Monte Carlo "
                "mixture generator with fewer variates than dimensions is "
                "rank deficient")
        self.family = family
        self.sample = sample
        self.domain = OpenSimplex(d)
        # (k, m) log p_j(x_l) / q(x_l); ratios are O(1) for any sane proposal
        self._log_ratios = sample.log_components - sample.log_q
        ratios = np.exp(self._log_ratios)
        # (D, m) per-variate differences (p_i - p_0)/q, eta-independent
        self._diff = ratios[1:] - ratios[0]
        self._m = sample.size
        _require_spd(self.hessian(self.domain.interior_point()),
                     "mixture generator build")

    # -- internals ---------------------------------------------------------

    def _log_mix_ratio(self, eta: np.ndarray) -> np.ndarray:
        """log(m(x_l; eta) / q(x_l)) for every variate, stably."""
        w0 = 1.0 - float(np.sum(eta))
        logw = np.concatenate(([np.log(w0)], np.log(eta)))
        z = self._log_ratios + logw[:, None]
        zmax = z.max(axis=0)
        return zmax + np.log(np.sum(np.exp(z - zmax), axis=0))

    # -- Generator interface ------------------------------------------------

    def value(self, eta) -> float:
        eta = self._checked(eta)
        lmq = self._log_mix_ratio(eta)
        log_m = lmq + self.sample.log_q
        return float(np.mean(np.exp(lmq) * log_m))

    def gradient(self, eta) -> np.ndarray:
        eta = self._checked(eta)
        lmq = self._log_mix_ratio(eta)
        log_m = lmq + self.sample.log_q
        return self._diff @ (1.0 + log_m) / self._m

    def hessian(self, eta) -> np.ndarray:
        eta = self._checked(eta)
        inv_mq = np.exp(-self._log_mix_ratio(eta))
        h = (self._diff * inv_mq) @ self._diff.T / self._m
        return 0.5 * (h + h.T)

    # -- reproducibility ----------------------------------------------------

    def to_spec(self) -> dict:
        """Rebuild recipe: family and sample references, never raw float
        caches, so a reload regenerates bit-identical state."""
        return {
            "generator": "mc-mixture",
            "family": self.family.label,
            "sample": {"seed": self.sample.seed, "size": self.sample.size,
                       "proposal": self.sample.proposal_label,
                       "offset": self.sample.offset},
        }


def build_mc_mixture_generator(family: "MixtureFamily",
                               sample: "SampleSet") -> MCMixtureGenerator:
    """Build the Monte Carlo negentropy generator of ``family`` on
    ``sample``.

    Requires ``m >= D`` (otherwise the Hessian is rank deficient) and a
    sample on which the component differences do not all vanish; both
    violations raise :class:`~bregmc.errors.DegeneracyError`.
    """
    return MCMixtureGenerator(family, sample)


# ---------------------------------------------------------------------------
# Exponential family Monte Carlo generator
# ---------------------------------------------------------------------------

class MCExponentialGenerator(Generator):
    """Monte Carlo estimate of an exponential family's log-normalizer.

    The direct importance-sampling estimate is

        ``F_full(theta) = log((1/m) sum_i exp(<t(x_i), theta> + k(x_i)) / q(x_i))``.

    Factoring out a reference variate ``r`` subtracts the affine map
    ``<t(x_r), theta> + k(x_r) - log q(x_r) - log m`` and leaves

        ``F(theta) = lse0p(<a_i, theta> + b_i,  i != r)``

    with ``a_i = t(x_i) - t(x_r)`` and
    ``b_i = k(x_i) - k(x_r) - log q(x_i) + log q(x_r)``.  Affine terms do
    not change Bregman divergences, so ``value`` returns the reduced
    form; ``value_unshifted`` re-adds the dropped affine data to recover
    the direct estimate (needed for exponential-mean aggregation).

    The domain is all of R^D: a finite sum of exponentials is finite
    everywhere.  In one dimension the reference minimizing ``t`` makes
    every ``a_i`` nonnegative; in higher dimensions the reference is the
    variate minimizing ``sum_j t_j`` (ties to the lowest index) and the
    sign of ``a_i`` is unconstrained, which strict convexity of lse0p
    does not require.
    """

    def __init__(self, family: "ExponentialFamily", sample: "SampleSet",
                 reference: int | None = None):
        if sample.kind != "exponential":
            raise ValueError("sample was not cached for an exponential family")
        if sample.family_label != family.label:
            raise ValueError(
                f"sample cached for family {sample.family_label!r}, "
                f"not {family.label!r}")
        m = sample.size
        if m < 2:
            raise DegeneracyError("need at least two variates to build an "
                                  "exponential Monte Carlo generator")
        t = sample.stats                       # (m, D)
        d = family.order
        if m - 1 < d:
            # the Hessian is the covariance of m atoms (the reference
            # contributes the implicit zero), hence rank <= m - 1
            raise DegeneracyError(
                f"m = {m} <= D = {d}: the Hessian of an exponential Monte "
                f"Carlo generator on m variates has rank at most m - 1 and "
                "would be singular everywhere")
        if reference is None:
            reference = int(np.argmin(t.sum(axis=1)))
        elif not 0 <= reference < m:
            raise ValueError(f"reference index {reference} out of range")
        keep = np.arange(m) != reference
        self.family = family
        self.sample = sample
        self.reference = int(reference)
        self.domain = RealSpace(d)
        self._a = t[keep] - t[reference]       # (m-1, D)
        lq = sample.log_q
        k = sample.carrier
        self._b = (k[keep] - k[reference]) - (lq[keep] - lq[reference])
        # dropped affine term of the direct estimate
        self.affine_slope = t[reference].copy()
        self.affine_offset = float(k[reference] - lq[reference] - np.log(m))
        smax = np.linalg.svd(self._a, compute_uv=False)
        if smax[0] == 0.0 or smax[-1] <= 1e-12 * smax[0]:
            raise DegeneracyError(
                "sufficient statistics are affinely dependent on this sample "
                "(all t(x_i) identical, or contained in a hyperplane): the "
                "Hessian would be singular everywhere")
        _require_spd(self.hessian(np.zeros(d)), "exponential generator build")

    # -- internals ---------------------------------------------------------

    def _weights(self, theta: np.ndarray) -> np.ndarray:
        return _softmax0p(self._a @ theta + self._b)

    # -- Generator interface ------------------------------------------------

    def value(self, theta) -> float:
        theta = self._checked(theta)
        return lse0p(self._a @ theta + self._b)

    def value_unshifted(self, theta) -> float:
        """The direct estimate ``F_full``; adds back the dropped affine
        term so generators built on different references agree exactly."""
        theta = self._checked(theta)
        return self.value(theta) + float(self.affine_slope @ theta) + self.affine_offset

    def gradient(self, theta) -> np.ndarray:
        theta = self._checked(theta)
        return self._a.T @ self._weights(theta)

    def gradient_unshifted(self, theta) -> np.ndarray:
        return self.gradient(theta) + self.affine_slope

    def hessian(self, theta) -> np.ndarray:
        theta = self._checked(theta)
        s = self._weights(theta)
        g = self._a.T @ s
        h = (self._a * s[:, None]).T @ self._a - np.outer(g, g)
        return 0.5 * (h + h.T)

    # -- reproducibility ----------------------------------------------------

    def to_spec(self) -> dict:
        return {
            "generator": "mc-exponential",
            "family": self.family.label,
            "reference": self.reference,
            "sample": {"seed": self.sample.seed, "size": self.sample.size,
                       "proposal": self.sample.proposal_label,
                       "offset": self.sample.offset},
        }


def build_mc_exponential_generator(family: "ExponentialFamily",
                                   sample: "SampleSet",
                                   reference: int | None = None,
                                   ) -> MCExponentialGenerator:
    """Build the Monte Carlo log-normalizer generator of ``family``.

    ``reference`` overrides the default choice of the variate minimizing
    the coordinate sum of ``t``; any choice differs only by an affine
    term, so divergences are unchanged.
    """
    return MCExponentialGenerator(family, sample, reference)


# ---------------------------------------------------------------------------
# Parallel aggregation of sub-generators
# ---------------------------------------------------------------------------

def _check_partition_weights(parts: Sequence[tuple], what: str) -> list:
    if not parts:
        raise ValueError(f"{what}: empty parts list")
    gens = [g for g, _ in parts]
    weights = np.array([w for _, w in parts], float)
    if np.any(weights <= 0):
        raise ValueError(f"{what}: weights must be positive")
    if abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError(f"{what}: weights must sum to 1 "
                         f"(got {weights.sum()!r})")
    sizes = np.array([g.sample.size for g in gens], float)
    if not np.allclose(weights, sizes / sizes.sum(), rtol=1e-9, atol=1e-12):
        raise ValueError(f"{what}: weights must equal the partition "
                         "fractions |S_i| / |S|")
    label = gens[0].family.label
    for g in gens[1:]:
        if g.family.label != label:
            raise ValueError(f"{what}: parts built over different families")
    return gens


def aggregate_mixture_generators(
        parts: Sequence[tuple["MCMixtureGenerator", float]],
) -> "MCMixtureGenerator":
    """Arithmetic weighted mean of mixture sub-generators.

    With weights ``|S_i| / |S|`` of a partition, the weighted mean of
    the per-block averages is exactly the full-sample average, so the
    aggregate is rebuilt as a single generator over the concatenated
    per-variate caches; its value, gradient and Hessian match both the
    weighted sums of the parts and the single-shot generator on the
    concatenated sample.
    """
    gens = _check_partition_weights(parts, "mixture aggregation")
    if len(gens) == 1:
        return gens[0]
    merged = gens[0].sample.concat([g.sample for g in gens[1:]])
    return MCMixtureGenerator(gens[0].family, merged)


class ExponentialMeanGenerator(Generator):
    """Exponential mean  ``log sum_i w_i exp(F_i(theta))``  of exponential
    sub-generators, each evaluated in unshifted (direct-estimate) form.

    For a partition with weights ``|S_i| / |S|`` this equals the direct
    estimate on the full sample.  Derivatives follow the mixture rule:
    with responsibilities ``pi_i = w_i exp(F_i - F)``,

    * gradient  ``sum_i pi_i grad F_i``
    * hessian   ``sum_i pi_i (H_i + g_i g_i^T) - g g^T``.
    """

    def __init__(self, parts: Sequence[tuple["MCExponentialGenerator", float]]):
        gens = _check_partition_weights(parts, "exponential aggregation")
        self.parts = [(g, float(w)) for g, w in parts]
        self.domain = RealSpace(gens[0].dim)

    def _member_values(self, theta: np.ndarray) -> np.ndarray:
        return np.array([g.value_unshifted(theta) for g, _ in self.parts])

    def value(self, theta) -> float:
        theta = self._checked(theta)
        f = self._member_values(theta)
        logw = np.log([w for _, w in self.parts])
        z = f + logw
        m = float(np.max(z))
        return m + float(np.log(np.sum(np.exp(z - m))))

    def gradient(self, theta) -> np.ndarray:
        theta = self._checked(theta)
        pi = self._responsibilities(theta)
        grads = np.stack([g.gradient_unshifted(theta) for g, _ in self.parts])
        return pi @ grads

    def hessian(self, theta) -> np.ndarray:
        theta = self._checked(theta)
        pi = self._responsibilities(theta)
        grads = np.stack([g.gradient_unshifted(theta) for g, _ in self.parts])
        mean_grad = pi @ grads
        h = -np.outer(mean_grad, mean_grad)
        for p, (g, _), gi in zip(pi, self.parts, grads):
            h += p * (g.hessian(theta) + np.outer(gi, gi))
        return 0.5 * (h + h.T)

    def _responsibilities(self, theta: np.ndarray) -> np.ndarray:
        f = self._member_values(theta)
        logw = np.log([w for _, w in self.parts])
        z = f + logw
        z -= np.max(z)
        e = np.exp(z)
        return e / e.sum()


def aggregate_exponential_generators(
        parts: Sequence[tuple["MCExponentialGenerator", float]],
) -> Generator:
    """Exponential (f-mean, f = exp) aggregation of exponential
    sub-generators built on a partition of one sample stream."""
    gens = _check_partition_weights(parts, "exponential aggregation")
    for g in gens:
        if not hasattr(g, "value_unshifted"):
            raise ValueError("exponential aggregation: part lacks the "
                             "affine reconstruction data")
    if len(gens) == 1:
        return gens[0]
    return ExponentialMeanGenerator(parts)


# ---------------------------------------------------------------------------
# Generator combinators
# ---------------------------------------------------------------------------

class AffineShiftedGenerator(Generator):
    """``F(x) + <a, x> + b``: same Bregman divergences, shifted gradient."""

    def __init__(self, base: Generator, a, b: float):
        a = np.asarray(a, float)
        if a.shape != (base.dim,):
            raise ValueError("affine slope must match the generator dimension")
        self.base = base
        self.a = a
        self.b = float(b)
        self.domain = base.domain

    def value(self, x) -> float:
        x = self._checked(x)
        return self.base.value(x) + float(self.a @ x) + self.b

    def gradient(self, x) -> np.ndarray:
        return self.base.gradient(self._checked(x)) + self.a

    def hessian(self, x) -> np.ndarray:
        return self.base.hessian(self._checked(x))


class LinearCombinationGenerator(Generator):
    """Positive combination ``sum_i lam_i F_i`` of generators on one domain.

    Bregman divergences are linear in the generator, so the combination's
    divergence is the same positive combination of the parts' divergences.
    """

    def __init__(self, parts: Sequence[tuple[Generator, float]]):
        if not parts:
            raise ValueError("empty combination")
        dims = {g.dim for g, _ in parts}
        if len(dims) != 1:
            raise ValueError("generators of mixed dimension")
        if any(lam <= 0 for _, lam in parts):
            raise ValueError("combination coefficients must be positive")
        self.parts = [(g, float(lam)) for g, lam in parts]
        self.domain = parts[0][0].domain

    def value(self, x) -> float:
        x = self._checked(x)
        return float(sum(lam * g.value(x) for g, lam in self.parts))

    def gradient(self, x) -> np.ndarray:
        x = self._checked(x)
        out = np.zeros(self.dim)
        for g, lam in self.parts:
            out += lam * g.gradient(x)
        return out

    def hessian(self, x) -> np.ndarray:
        x = self._checked(x)
        out = np.zeros((self.dim, self.dim))
        for g, lam in self.parts:
            out += lam * g.hessian(x)
        return out
