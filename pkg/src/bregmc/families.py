"""Component densities, mixture and exponential family definitions, and
the closed-form / quadrature reference generators used as ground truth.

Every density is handled in log space end to end: mixtures are combined
with max-shifted log-sum-exp, and nothing in this module materializes a
linear-scale density that could underflow in the tails.

Built-in components cover the univariate Gaussian, Laplace and Cauchy
location-scale densities; arbitrary user components plug in through
:class:`ComponentDensity` (a vectorized log-density plus a quantile
function, which doubles as the inverse-CDF sampler).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln, ndtri, polygamma, psi

from .errors import DomainError
from .generators import Generator, OpenSimplex, ParameterDomain, RealSpace

__all__ = [
    "ComponentDensity",
    "gaussian",
    "laplace",
    "cauchy",
    "MixtureFamily",
    "MixtureDensity",
    "mixture_log_density",
    "ExponentialFamily",
    "polynomial_ef",
    "gaussian_ef_oracle",
    "binomial_ef_oracle",
    "pef_quadrature_oracle",
    "mixture_negentropy_oracle",
    "beta_ef_generator",
]

# Quadrature oracles must be more accurate than any Monte Carlo tolerance
# they judge; integration is truncated where the integrand falls below
# 1e-16 of its peak.
_QUAD_KW = dict(epsabs=1e-12, epsrel=1e-11, limit=500)


# ---------------------------------------------------------------------------
# Component densities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ComponentDensity:
    """A fixed probability density on the common support.

    Parameters
    ----------
    log_density : callable
        Vectorized natural log of the density; must be finite wherever
        the density is positive.
    quantile : callable
        Vectorized inverse CDF mapping uniforms in (0, 1) to support
        points.  Sampling is inverse-CDF throughout the package, so one
        variate always consumes exactly one uniform; this is what keeps
        sample streams partitionable across workers.
    label : str
        Identifier; families require pairwise distinct labels.
    """

    log_density: Callable[[np.ndarray], np.ndarray]
    quantile: Callable[[np.ndarray], np.ndarray]
    label: str

    def sample(self, size: int, seed: int) -> np.ndarray:
        """Draw ``size`` iid variates; a stateless function of the seed."""
        u = _uniform_stream(seed, size)
        return np.asarray(self.quantile(u), float)


def _uniform_stream(seed: int, size: int) -> np.ndarray:
    """Open-interval uniforms from the package RNG (Philox, counter-based)."""
    u = np.random.Generator(np.random.Philox(key=seed)).random(size)
    return np.where(u == 0.0, 0.5 ** 53, u)


def gaussian(mu: float, sigma: float) -> ComponentDensity:
    """Normal density with mean ``mu`` and standard deviation ``sigma``."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    mu, sigma = float(mu), float(sigma)
    const = -math.log(sigma) - 0.5 * math.log(2.0 * math.pi)

    def logpdf(x):
        z = (np.asarray(x, float) - mu) / sigma
        return const - 0.5 * z * z

    return ComponentDensity(logpdf, lambda u: mu + sigma * ndtri(u),
                            f"gaussian({mu:g},{sigma:g})")


def laplace(mu: float, b: float) -> ComponentDensity:
    """Laplace density with location ``mu`` and scale ``b``."""
    if b <= 0:
        raise ValueError("scale must be positive")
    mu, b = float(mu), float(b)
    const = -math.log(2.0 * b)

    def logpdf(x):
        return const - np.abs(np.asarray(x, float) - mu) / b

    def quantile(u):
        u = np.asarray(u, float)
        return mu - b * np.sign(u - 0.5) * np.log1p(-2.0 * np.abs(u - 0.5))

    return ComponentDensity(logpdf, quantile, f"laplace({mu:g},{b:g})")


def cauchy(x0: float, gamma: float) -> ComponentDensity:
    """Cauchy density with location ``x0`` and scale ``gamma``."""
    if gamma <= 0:
        raise ValueError("scale must be positive")
    x0, gamma = float(x0), float(gamma)
    const = -math.log(math.pi * gamma)

    def logpdf(x):
        z = (np.asarray(x, float) - x0) / gamma
        return const - np.log1p(z * z)

    def quantile(u):
        return x0 + gamma * np.tan(np.pi * (np.asarray(u, float) - 0.5))

    return ComponentDensity(logpdf, quantile, f"cauchy({x0:g},{gamma:g})")


# ---------------------------------------------------------------------------
# Mixture family
# ---------------------------------------------------------------------------

class MixtureFamily:
    """Strictly convex combinations of D+1 fixed component densities.

    ``m(x; eta) = sum_{i>=1} eta_i p_i(x) + (1 - sum eta) p_0(x)`` with
    ``eta`` in the open simplex.  Component 0 is the reference.

    Linear independence of the components cannot be checked symbolically
    for black-box densities, so it is asserted statistically at
    construction: ``check_draws`` points are sampled from the uniform
    component mixture and the matrix of differences ``p_i - p_0`` must
    have full row rank on them.  Pass ``validate=False`` to skip (only
    sensible in diagnostics that deliberately build degenerate inputs).

    Immutable after construction and safe to share across threads.
    """

    def __init__(self, components: Sequence[ComponentDensity], *,
                 validate: bool = True, check_draws: int = 10_000,
                 check_seed: int = 0):
        components = tuple(components)
        if len(components) < 2:
            raise ValueError("a mixture family needs at least two components")
        self.components = components
        self.order = len(components) - 1
        self.label = "mixture[" + ",".join(c.label for c in components) + "]"
        if validate:
            labels = [c.label for c in components]
            if len(set(labels)) != len(labels):
                raise ValueError(f"components must carry distinct labels: {labels}")
            self._check_independence(check_draws, check_seed)

    def _check_independence(self, draws: int, seed: int) -> None:
        x = self.sample_uniform_mixture(draws, seed)
        dens = np.exp(self.log_component_matrix(x))           # (k, n)
        diff = dens[1:] - dens[0]                             # (D, n)
        if self.order == 1:
            scale = np.maximum(dens[0], dens[1])
            if np.all(np.abs(diff[0]) <= 1e-12 * scale):
                raise ValueError(
                    "components are statistically indistinguishable: "
                    "p_1 - p_0 vanished on every probe point")
            return
        s = np.linalg.svd(diff, compute_uv=False)
        if s[0] == 0.0 or s[-1] <= 1e-10 * s[0]:
            raise ValueError(
                "components satisfy a linear relation on every probe point "
                "(affinely dependent differences); the family is singular")

    def log_component_matrix(self, x) -> np.ndarray:
        """(k, n) matrix of ``log p_j(x_i)``."""
        x = np.atleast_1d(np.asarray(x, float))
        return np.stack([c.log_density(x) for c in self.components])

    def log_density(self, eta, x) -> np.ndarray:
        """``log m(x; eta)`` by max-shifted log-sum-exp over components."""
        eta = _check_simplex(eta, self.order)
        logp = self.log_component_matrix(x)
        return _mix_logsumexp(eta, logp)

    def sample_uniform_mixture(self, size: int, seed: int) -> np.ndarray:
        """Ancestral draws from the equal-weight component mixture.

        Each variate consumes exactly two uniforms: one selects the
        component, one feeds its quantile function.
        """
        u = _uniform_stream(seed, 2 * size).reshape(size, 2)
        return self.quantile_uniform_mixture(u)

    def quantile_uniform_mixture(self, u: np.ndarray) -> np.ndarray:
        """Map (n, 2) uniforms to uniform-mixture draws (index, value)."""
        k = self.order + 1
        idx = np.minimum((u[:, 0] * k).astype(int), k - 1)
        x = np.empty(len(u))
        for j, comp in enumerate(self.components):
            mask = idx == j
            if np.any(mask):
                x[mask] = comp.quantile(u[mask, 1])
        return x


def _check_simplex(eta, order: int) -> np.ndarray:
    eta = np.atleast_1d(np.asarray(eta, float))
    if eta.shape != (order,):
        raise DomainError(f"expected {order} mixture weights, got shape {eta.shape}")
    if not np.all(np.isfinite(eta)) or np.any(eta <= 0.0) or np.sum(eta) >= 1.0:
        raise DomainError(
            f"mixture weights {eta!r} must lie in the open simplex "
            "(eta_i > 0, sum < 1)")
    return eta


def _mix_logsumexp(eta: np.ndarray, logp: np.ndarray) -> np.ndarray:
    logw = np.concatenate(([np.log1p(-np.sum(eta))], np.log(eta)))
    z = logp + logw[:, None]
    zmax = z.max(axis=0)
    return zmax + np.log(np.sum(np.exp(z - zmax), axis=0))


def mixture_log_density(family: MixtureFamily, eta, x) -> np.ndarray:
    """``log m(x; eta)`` for ``eta`` in the open simplex; never forms
    linear-scale densities, so tail points do not underflow."""
    return family.log_density(eta, x)


@dataclass(frozen=True)
class MixtureDensity:
    """A single mixture distribution ``m(.; eta)`` as a sampleable density.

    Bridges a family point to the density interface expected by the
    Monte Carlo KL estimators (log_density + seeded sample).
    """

    family: MixtureFamily
    eta: np.ndarray
    label: str = field(default="", compare=False)

    def __post_init__(self):
        eta = _check_simplex(self.eta, self.family.order)
        object.__setattr__(self, "eta", eta)
        if not self.label:
            w = ",".join(f"{v:g}" for v in eta)
            object.__setattr__(self, "label", f"{self.family.label}@({w})")

    def log_density(self, x) -> np.ndarray:
        return self.family.log_density(self.eta, x)

    def sample(self, size: int, seed: int) -> np.ndarray:
        u = _uniform_stream(seed, 2 * size).reshape(size, 2)
        w = np.concatenate(([1.0 - np.sum(self.eta)], self.eta))
        edges = np.cumsum(w)
        idx = np.searchsorted(edges, u[:, 0], side="right")
        idx = np.minimum(idx, len(w) - 1)
        x = np.empty(size)
        for j, comp in enumerate(self.family.components):
            mask = idx == j
            if np.any(mask):
                x[mask] = comp.quantile(u[mask, 1])
        return x


# ---------------------------------------------------------------------------
# Exponential family
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentialFamily:
    """Densities ``p(x; theta) = exp(<t(x), theta> + k(x) - F(theta))``.

    ``sufficient_stat`` maps (n,) support points to an (n, D) matrix,
    ``carrier`` to (n,).  Only the functions are stored; whether the
    statistics are non-degenerate on a concrete sample is checked when a
    Monte Carlo generator is built on it (the natural place, since the
    assumption is measure-theoretic and a sample is what we have).
    """

    sufficient_stat: Callable[[np.ndarray], np.ndarray]
    carrier: Callable[[np.ndarray], np.ndarray]
    order: int
    support: str = "real-line"
    label: str = "exponential-family"


def polynomial_ef(powers: Sequence[int], label: str | None = None) -> ExponentialFamily:
    """Exponential family with monomial sufficient statistics
    ``t(x) = (x^p for p in powers)`` and zero carrier on the real line.

    ``powers = (1, 2)`` is the univariate normal family.
    """
    powers = tuple(int(p) for p in powers)
    if not powers or len(set(powers)) != len(powers) or min(powers) < 1:
        raise ValueError("powers must be distinct positive integers")

    def t(x):
        x = np.atleast_1d(np.asarray(x, float))
        return np.stack([x ** p for p in powers], axis=1)

    def k(x):
        return np.zeros_like(np.atleast_1d(np.asarray(x, float)))

    name = label or ("polynomial-ef[" + ",".join(map(str, powers)) + "]")
    return ExponentialFamily(t, k, len(powers), "real-line", name)


# ---------------------------------------------------------------------------
# Closed-form oracle generators
# ---------------------------------------------------------------------------

class _GaussianNaturalDomain(ParameterDomain):
    """Natural domain of the normal cumulant: theta_2 < 0."""

    dim = 2

    def contains(self, x, margin=None):
        m = 0.0 if margin is None else float(margin)
        x = np.asarray(x, float)
        return (x.shape == (2,) and bool(np.all(np.isfinite(x)))
                and x[1] < -m)

    def interior_point(self):
        return np.array([0.0, -1.0])

    def project(self, x, margin):
        x = np.asarray(x, float).copy()
        x[1] = min(x[1], -margin)
        return x


class GaussianCumulant(Generator):
    """Log-normalizer of the normal family with ``t(x) = (x, x^2)``:

        ``F(theta) = -theta_1^2 / (4 theta_2) + (1/2) log(pi / -theta_2)``

    on ``theta_2 < 0``, with analytic gradient and Hessian.  The gradient
    is the moment map ``(E[x], E[x^2])``.
    """

    def __init__(self):
        self.domain = _GaussianNaturalDomain()

    def value(self, theta) -> float:
        t1, t2 = self._checked(theta)
        return -t1 * t1 / (4.0 * t2) + 0.5 * math.log(math.pi / -t2)

    def gradient(self, theta) -> np.ndarray:
        t1, t2 = self._checked(theta)
        return np.array([-t1 / (2.0 * t2),
                         t1 * t1 / (4.0 * t2 * t2) - 1.0 / (2.0 * t2)])

    def hessian(self, theta) -> np.ndarray:
        t1, t2 = self._checked(theta)
        h11 = -1.0 / (2.0 * t2)
        h12 = t1 / (2.0 * t2 * t2)
        h22 = -t1 * t1 / (2.0 * t2 ** 3) + 1.0 / (2.0 * t2 * t2)
        return np.array([[h11, h12], [h12, h22]])


def gaussian_ef_oracle() -> GaussianCumulant:
    """Closed-form generator of the univariate normal family."""
    return GaussianCumulant()


class BinomialCumulant(Generator):
    """``F(theta) = log(1 + e^theta)`` on the real line; the gradient is
    the sigmoid, mapping onto the open interval (0, 1)."""

    def __init__(self):
        self.domain = RealSpace(1)

    def value(self, theta) -> float:
        t = self._checked(theta)[0]
        return float(np.logaddexp(0.0, t))

    def gradient(self, theta) -> np.ndarray:
        t = self._checked(theta)[0]
        return np.array([_sigmoid(t)])

    def hessian(self, theta) -> np.ndarray:
        t = self._checked(theta)[0]
        s = _sigmoid(t)
        return np.array([[s * (1.0 - s)]])


def _sigmoid(t: float) -> float:
    if t >= 0:
        return 1.0 / (1.0 + math.exp(-t))
    e = math.exp(t)
    return e / (1.0 + e)


def binomial_ef_oracle() -> BinomialCumulant:
    """Closed-form generator of the binomial (two-bin categorical) family."""
    return BinomialCumulant()


class _PolynomialNaturalDomain(ParameterDomain):
    """Convergence region of a polynomial-statistic log-normalizer: the
    highest-degree active term must be even with a negative coefficient."""

    def __init__(self, powers: tuple[int, ...]):
        self.powers = powers
        self.dim = len(powers)

    def contains(self, x, margin=None):
        x = np.asarray(x, float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        active = [i for i in range(self.dim) if x[i] != 0.0]
        if not active:
            return False
        lead = max(active, key=lambda i: self.powers[i])
        return self.powers[lead] % 2 == 0 and x[lead] < 0.0

    def interior_point(self):
        even = [i for i, p in enumerate(self.powers) if p % 2 == 0]
        if not even:
            raise DomainError("no even power: the integral never converges")
        x = np.zeros(self.dim)
        x[max(even, key=lambda i: self.powers[i])] = -1.0
        return x


class PolynomialQuadratureCumulant(Generator):
    """Log-normalizer ``F(theta) = log int exp(sum_i theta_i x^{p_i}) dx``
    of a polynomial exponential family, evaluated by adaptive quadrature.

    A ground-truth reference for acceptance testing, not a production
    Bregman generator: every call integrates.  The exponent is shifted
    by its maximum over the real critical points before integrating, so
    large coefficients cannot overflow.  Gradient and Hessian are the
    mean and covariance of ``t(x)`` under the normalized density,
    obtained from moment integrals.
    """

    def __init__(self, powers: Sequence[int]):
        powers = tuple(int(p) for p in powers)
        if not powers or len(set(powers)) != len(powers) or min(powers) < 1:
            raise ValueError("powers must be distinct positive integers")
        self.powers = powers
        self.domain = _PolynomialNaturalDomain(powers)

    def _exponent_coeffs(self, theta: np.ndarray) -> np.ndarray:
        deg = max(self.powers)
        c = np.zeros(deg + 1)
        for p, th in zip(self.powers, theta):
            c[deg - p] = th
        return c

    def _peak(self, theta: np.ndarray) -> float:
        c = self._exponent_coeffs(theta)
        crit = np.roots(np.polyder(c))
        real = crit[np.abs(crit.imag) < 1e-9].real
        cand = np.concatenate((real, [0.0]))
        return float(np.max(np.polyval(c, cand)))

    def _moment(self, theta: np.ndarray, power: int, smax: float) -> float:
        c = self._exponent_coeffs(theta)

        def integrand(x):
            return x ** power * math.exp(np.polyval(c, x) - smax)

        val, _ = quad(integrand, -np.inf, np.inf, **_QUAD_KW)
        return val

    def value(self, theta) -> float:
        theta = self._checked(theta)
        smax = self._peak(theta)
        z = self._moment(theta, 0, smax)
        if not np.isfinite(z) or z <= 0.0:
            raise DomainError("normalization integral did not converge")
        return smax + math.log(z)

    def gradient(self, theta) -> np.ndarray:
        theta = self._checked(theta)
        smax = self._peak(theta)
        z = self._moment(theta, 0, smax)
        return np.array([self._moment(theta, p, smax) for p in self.powers]) / z

    def hessian(self, theta) -> np.ndarray:
        theta = self._checked(theta)
        smax = self._peak(theta)
        z = self._moment(theta, 0, smax)
        mean = np.array([self._moment(theta, p, smax) for p in self.powers]) / z
        d = len(self.powers)
        h = np.empty((d, d))
        for i in range(d):
            for j in range(i, d):
                m2 = self._moment(theta, self.powers[i] + self.powers[j], smax) / z
                h[i, j] = h[j, i] = m2 - mean[i] * mean[j]
        return h


def pef_quadrature_oracle(powers: Sequence[int]) -> PolynomialQuadratureCumulant:
    """Numeric generator for a polynomial exponential family; raises
    :class:`~bregmc.errors.DomainError` outside the convergence region."""
    return PolynomialQuadratureCumulant(powers)


class MixtureNegentropyQuadrature(Generator):
    """The ideal negentropy generator ``G(eta) = int m log m`` of a
    mixture family, by adaptive quadrature.

    * gradient  ``int (p_i - p_0)(1 + log m) dx``
    * hessian   ``int (p_i - p_0)(p_j - p_0) / m dx``

    Integrals are cached per parameter vector: the oracle is pure but a
    clustering run revisits the same points many times.
    """

    def __init__(self, family: MixtureFamily):
        self.family = family
        self.domain = OpenSimplex(family.order)
        self._cache: dict[bytes, dict] = {}

    def _entry(self, eta: np.ndarray) -> dict:
        key = eta.tobytes()
        if key not in self._cache:
            self._cache[key] = {}
        return self._cache[key]

    def _log_m(self, eta: np.ndarray, x: float) -> float:
        logp = np.array([c.log_density(np.array([x]))[0]
                         for c in self.family.components])
        logw = np.concatenate(([np.log1p(-np.sum(eta))], np.log(eta)))
        z = logp + logw
        zm = z.max()
        return float(zm + np.log(np.sum(np.exp(z - zm))))

    def _diffs(self, x: float) -> np.ndarray:
        dens = np.exp(np.array([c.log_density(np.array([x]))[0]
                                for c in self.family.components]))
        return dens[1:] - dens[0]

    def value(self, eta) -> float:
        eta = self._checked(eta)
        entry = self._entry(eta)
        if "value" not in entry:
            def integrand(x):
                lm = self._log_m(eta, x)
                return math.exp(lm) * lm
            entry["value"], _ = quad(integrand, -np.inf, np.inf, **_QUAD_KW)
        return entry["value"]

    def gradient(self, eta) -> np.ndarray:
        eta = self._checked(eta)
        entry = self._entry(eta)
        if "gradient" not in entry:
            out = np.empty(self.dim)
            for i in range(self.dim):
                def integrand(x, i=i):
                    return self._diffs(x)[i] * (1.0 + self._log_m(eta, x))
                out[i], _ = quad(integrand, -np.inf, np.inf, **_QUAD_KW)
            entry["gradient"] = out
        return entry["gradient"].copy()

    def hessian(self, eta) -> np.ndarray:
        eta = self._checked(eta)
        entry = self._entry(eta)
        if "hessian" not in entry:
            d = self.dim
            h = np.empty((d, d))
            for i in range(d):
                for j in range(i, d):
                    def integrand(x, i=i, j=j):
                        df = self._diffs(x)
                        return df[i] * df[j] * math.exp(-self._log_m(eta, x))
                    h[i, j], _ = quad(integrand, -np.inf, np.inf, **_QUAD_KW)
                    h[j, i] = h[i, j]
            entry["hessian"] = h
        return entry["hessian"].copy()


def mixture_negentropy_oracle(family: MixtureFamily) -> MixtureNegentropyQuadrature:
    """Quadrature ground truth for a mixture family's Bregman generator."""
    return MixtureNegentropyQuadrature(family)


class _PositiveOrthant(ParameterDomain):
    def __init__(self, dim: int):
        self.dim = int(dim)

    def contains(self, x, margin=None):
        m = 0.0 if margin is None else float(margin)
        x = np.asarray(x, float)
        return (x.shape == (self.dim,) and bool(np.all(np.isfinite(x)))
                and bool(np.all(x > m)))

    def interior_point(self):
        return np.ones(self.dim)

    def project(self, x, margin):
        return np.maximum(np.asarray(x, float), margin)


class BetaCumulant(Generator):
    """Log-normalizer of the Beta family, ``log B(theta_1, theta_2)``.

    Provided as a documented example of a generator whose value and
    gradient are closed-form while the *inverse* gradient map is not:
    dual conversions on this space always go through the numerical
    inversion machinery, and there is no closed form to test them
    against.
    """

    def __init__(self):
        self.domain = _PositiveOrthant(2)

    def value(self, theta) -> float:
        a, b = self._checked(theta)
        return float(gammaln(a) + gammaln(b) - gammaln(a + b))

    def gradient(self, theta) -> np.ndarray:
        a, b = self._checked(theta)
        return np.array([psi(a) - psi(a + b), psi(b) - psi(a + b)])

    def hessian(self, theta) -> np.ndarray:
        a, b = self._checked(theta)
        t1 = polygamma(1, a + b)
        return np.array([[polygamma(1, a) - t1, -t1],
                         [-t1, polygamma(1, b) - t1]], float)


def beta_ef_generator() -> BetaCumulant:
    """Closed-form Beta-family generator (documented example, not an
    acceptance oracle: its dual map has no closed form to verify)."""
    return BetaCumulant()
