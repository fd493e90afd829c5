"""The dually flat toolbox over any strictly convex generator.

A :class:`DuallyFlatSpace` wraps a :class:`~bregmc.generators.Generator`
F and provides the canonical machinery of the induced geometry:

* the Bregman divergence ``B(x : y) = F(x) - F(y) - <x - y, grad F(y)>``;
* the dual coordinates ``eta = grad F(theta)`` and their numerical
  inverse (damped Newton on the strictly monotone gradient map, with a
  bisection fallback in one dimension);
* primal and dual geodesics (straight lines in the respective
  coordinate systems);
* skew Jensen and Jeffreys divergences;
* the dual potential ``F*(eta) = <eta, theta(eta)> - F(theta(eta))``
  evaluated through inversion, never cached across calls.

Naming note: for a mixture-family generator the primal argument is the
mixture weight vector (conventionally written eta) and the dual
coordinate is theta; the machinery is the same, only the letters swap.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoSolutionError
from .generators import Generator, ParameterDomain

__all__ = [
    "DuallyFlatSpace",
    "GeodesicPoint",
    "LegendreDualGenerator",
    "mc_kl_estimate",
]


class BoundaryClampWarning(RuntimeWarning):
    """A near-boundary parameter was clamped before a dual conversion."""


@dataclass(frozen=True)
class GeodesicPoint:
    """One point of a geodesic, in both coordinate systems."""

    lam: float
    primal: np.ndarray
    dual: np.ndarray


class DuallyFlatSpace:
    """Dually flat geometry induced by a strictly convex generator.

    Parameters
    ----------
    generator : Generator
        The potential function F defining the geometry.
    tol : float
        Gradient-residual tolerance of the numerical inversion.
    max_iter : int
        Newton iteration budget before declaring no solution.
    boundary_margin : float
        Conversions on bounded domains clamp their input to at least
        this distance from the boundary (the gradient diverges there)
        and emit a :class:`BoundaryClampWarning`.
    """

    def __init__(self, generator: Generator, *, tol: float = 1e-10,
                 max_iter: int = 200, boundary_margin: float = 1e-9):
        self.generator = generator
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.boundary_margin = float(boundary_margin)

    @property
    def dim(self) -> int:
        return self.generator.dim

    # -- basic evaluations ---------------------------------------------------

    def value(self, x) -> float:
        return self.generator.value(x)

    def gradient(self, x) -> np.ndarray:
        return self.generator.gradient(x)

    def hessian(self, x) -> np.ndarray:
        return self.generator.hessian(x)

    def _clamped(self, x) -> np.ndarray:
        """Pull a near-boundary point into the safe interior, warning."""
        x = np.asarray(x, float)
        dom = self.generator.domain
        if dom.contains(x, margin=self.boundary_margin):
            return x
        if not dom.contains(x):
            raise DomainError(f"parameter {x!r} outside the generator domain")
        clamped = dom.project(x, self.boundary_margin)
        warnings.warn(
            "parameter within %.1e of the domain boundary clamped before "
            "dual conversion" % self.boundary_margin, BoundaryClampWarning,
            stacklevel=3)
        return clamped

    # -- divergences ----------------------------------------------------------

    def bregman_divergence(self, x, y) -> float:
        """``B(x : y) = F(x) - F(y) - <x - y, grad F(y)>``; nonnegative,
        zero iff x == y."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        g = self.generator
        return g.value(x) - g.value(y) - float((x - y) @ g.gradient(y))

    def skew_jensen(self, x, y, alpha: float) -> float:
        """``(1-a) F(x) + a F(y) - F((1-a) x + a y)`` for a in (0, 1).

        Rescaled by 1/alpha it converges to ``B(y : x)`` as alpha -> 0.
        """
        if not 0.0 < alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        g = self.generator
        mid = (1.0 - alpha) * x + alpha * y
        return (1.0 - alpha) * g.value(x) + alpha * g.value(y) - g.value(mid)

    def jeffreys(self, x, y, mode: str = "exact", alpha: float = 1e-3) -> float:
        """Symmetrized divergence ``B(x : y) + B(y : x)``.

        ``mode="exact"`` also cross-checks the equivalent inner-product
        form ``<x - y, grad F(x) - grad F(y)>`` and raises if the two
        disagree beyond 1e-10 relative (a numerical-corruption guard).
        ``mode="skew"`` returns the gradient-free skew-Jensen surrogate
        ``(J^a + J^{1-a}) / a``: as a -> 0 the two rescaled terms tend to
        the two sided divergences, so the sum tends to the symmetrized
        divergence with O(a) relative error.
        """
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if mode == "exact":
            j = self.bregman_divergence(x, y) + self.bregman_divergence(y, x)
            inner = float((x - y) @ (self.gradient(x) - self.gradient(y)))
            if abs(j - inner) > 1e-10 * (1.0 + abs(j)):
                raise RuntimeError(
                    f"Jeffreys consistency check failed: sum-of-divergences "
                    f"{j!r} vs inner-product form {inner!r}")
            return j
        if mode == "skew":
            return (self.skew_jensen(x, y, alpha)
                    + self.skew_jensen(x, y, 1.0 - alpha)) / alpha
        raise ValueError(f"unknown Jeffreys mode {mode!r}")

    # -- coordinate conversions ------------------------------------------------

    def dual_coordinates(self, theta) -> np.ndarray:
        """Forward map ``eta = grad F(theta)`` (boundary-clamped)."""
        return self.generator.gradient(self._clamped(theta))

    def primal_coordinates(self, eta, *, start=None) -> np.ndarray:
        """Solve ``grad F(theta) = eta`` for theta.

        Damped Newton using the generator Hessian: full steps are halved
        until the iterate stays in the domain and the residual
        decreases.  One-dimensional spaces fall back to bisection on a
        geometrically grown bracket (the gradient is strictly monotone).
        Raises :class:`~bregmc.errors.NoSolutionError` carrying the last
        residual when ``eta`` lies outside the gradient image.
        """
        eta = np.asarray(eta, float)
        if eta.shape != (self.dim,):
            raise DomainError(
                f"expected a length-{self.dim} dual vector, got shape {eta.shape}")
        if not np.all(np.isfinite(eta)):
            raise DomainError("dual coordinates must be finite")
        g = self.generator
        dom = g.domain
        margin = self.boundary_margin
        if start is not None:
            x = np.asarray(start, float)
            x = dom.project(x, margin) if dom.contains(x) else dom.interior_point()
        else:
            x = dom.interior_point()
        resid = g.gradient(x) - eta
        rnorm = float(np.linalg.norm(resid))
        for _ in range(self.max_iter):
            if rnorm <= self.tol:
                return x
            try:
                step = np.linalg.solve(g.hessian(x), resid)
            except np.linalg.LinAlgError:
                step = resid
            t, improved = 1.0, False
            while t >= 2.0 ** -60:
                cand = x - t * step
                if dom.contains(cand, margin=margin):
                    rc = g.gradient(cand) - eta
                    rcn = float(np.linalg.norm(rc))
                    if rcn < rnorm:
                        x, resid, rnorm, improved = cand, rc, rcn, True
                        break
                t *= 0.5
            if not improved:
                return self._bisect_or_fail(eta, x, rnorm)
        return self._bisect_or_fail(eta, x, rnorm)

    def _bisect_or_fail(self, eta: np.ndarray, x: np.ndarray,
                        rnorm: float) -> np.ndarray:
        if self.dim == 1 and self.generator.domain.bounds1d() is not None:
            return self._bisect1d(float(eta[0]), float(x[0]), rnorm)
        raise NoSolutionError(
            f"gradient inversion stalled at residual {rnorm:.3e}; the "
            "requested dual point likely lies outside the gradient image",
            target=eta, last_point=x, residual=rnorm)

    def _bisect1d(self, eta: float, x0: float, rnorm: float) -> np.ndarray:
        g = self.generator
        lo_b, hi_b = g.domain.bounds1d()
        margin = self.boundary_margin

        def gval(t: float) -> float:
            return float(g.gradient(np.array([t]))[0])

        # grow the bracket toward the bounds until the target is enclosed
        lo = hi = x0
        glo = ghi = gval(x0)
        span = 1.0
        for _ in range(200):
            if glo <= eta:
                break
            lo = lo - span if lo_b == -np.inf else lo_b + (lo - lo_b) * 0.5
            lo = max(lo, lo_b + margin) if lo_b != -np.inf else lo
            glo, span = gval(lo), span * 2.0
            if lo_b != -np.inf and lo <= lo_b + margin * (1 + 1e-3):
                break
        span = 1.0
        for _ in range(200):
            if ghi >= eta:
                break
            hi = hi + span if hi_b == np.inf else hi_b - (hi_b - hi) * 0.5
            hi = min(hi, hi_b - margin) if hi_b != np.inf else hi
            ghi, span = gval(hi), span * 2.0
            if hi_b != np.inf and hi >= hi_b - margin * (1 + 1e-3):
                break
        if not (glo <= eta <= ghi):
            raise NoSolutionError(
                f"no bracket for dual value {eta!r}: gradient image appears "
                f"to be ({glo:.6g}, {ghi:.6g})",
                target=np.array([eta]), last_point=np.array([x0]),
                residual=min(abs(glo - eta), abs(ghi - eta), rnorm))
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = gval(mid)
            if abs(gm - eta) <= self.tol:
                return np.array([mid])
            if gm < eta:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-16 * (1.0 + abs(mid)):
                return np.array([mid])
        return np.array([0.5 * (lo + hi)])

    # -- geodesics --------------------------------------------------------------

    def geodesic(self, p, q, lam: float, kind: str = "primal") -> GeodesicPoint:
        """Point at parameter ``lam`` of the geodesic joining p and q.

        ``kind="primal"`` interpolates linearly in primal coordinates
        and maps forward; ``kind="dual"`` interpolates linearly in dual
        coordinates and inverts (warm-started at the primal
        interpolation).
        """
        if not 0.0 <= lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {lam}")
        p = np.asarray(p, float)
        q = np.asarray(q, float)
        for end in (p, q):
            if not self.generator.domain.contains(end):
                raise DomainError(f"geodesic endpoint {end!r} outside domain")
        if kind == "primal":
            primal = (1.0 - lam) * p + lam * q
            return GeodesicPoint(lam, primal, self.dual_coordinates(primal))
        if kind == "dual":
            dual = ((1.0 - lam) * self.dual_coordinates(p)
                    + lam * self.dual_coordinates(q))
            primal = self.primal_coordinates(dual, start=(1.0 - lam) * p + lam * q)
            return GeodesicPoint(lam, primal, dual)
        raise ValueError(f"unknown geodesic kind {kind!r}")

    # -- Legendre duality ----------------------------------------------------------

    def dual_potential(self, eta) -> float:
        """``F*(eta) = <eta, theta(eta)> - F(theta(eta))`` via inversion."""
        eta = np.asarray(eta, float)
        theta = self.primal_coordinates(eta)
        return float(eta @ theta) - self.generator.value(theta)

    def legendre_dual(self) -> "LegendreDualGenerator":
        """The conjugate potential as a generator (value, gradient and
        Hessian all obtained through numerical inversion)."""
        return LegendreDualGenerator(self)

    def crouzeix_deviation(self, theta) -> float:
        """Max-norm deviation of ``hess F(theta) . hess F*(eta)`` from the
        identity, with the dual Hessian obtained as the inverse of the
        primal Hessian at the numerically inverted ``eta = grad F(theta)``.

        A diagnostic of the whole dual round trip; expected at the level
        of the inversion tolerance.
        """
        theta = np.asarray(theta, float)
        h = self.generator.hessian(theta)
        eta = self.dual_coordinates(theta)
        theta_hat = self.primal_coordinates(eta)
        dual_h = np.linalg.inv(self.generator.hessian(theta_hat))
        return float(np.max(np.abs(h @ dual_h - np.eye(self.dim))))


class _UnboundedDualDomain(ParameterDomain):
    """Gradient image of a strictly convex generator: membership beyond
    finiteness is only discovered by attempting the inversion."""

    def __init__(self, dim: int):
        self.dim = dim

    def contains(self, x, margin=None):
        x = np.asarray(x, float)
        return x.shape == (self.dim,) and bool(np.all(np.isfinite(x)))

    def interior_point(self):
        raise NotImplementedError("the gradient image has no canonical center")


class LegendreDualGenerator(Generator):
    """Convex conjugate F* of a space's generator, defined pointwise
    through numerical inversion of the gradient map.

    ``value`` is the dual potential, ``gradient`` the inverse coordinate
    map theta(eta), and ``hessian`` the inverse of the primal Hessian
    there.  Requests outside the gradient image surface as
    :class:`~bregmc.errors.NoSolutionError` from the inversion.
    """

    def __init__(self, space: DuallyFlatSpace):
        self.space = space
        self.domain = _UnboundedDualDomain(space.dim)

    def value(self, eta) -> float:
        return self.space.dual_potential(self._checked(eta))

    def gradient(self, eta) -> np.ndarray:
        return self.space.primal_coordinates(self._checked(eta))

    def hessian(self, eta) -> np.ndarray:
        theta = self.space.primal_coordinates(self._checked(eta))
        return np.linalg.inv(self.space.generator.hessian(theta))


# ---------------------------------------------------------------------------
# Monte Carlo KL estimators between explicit densities
# ---------------------------------------------------------------------------

def mc_kl_estimate(p, q, m: int, seed: int, variant: str = "extended") -> float:
    """Monte Carlo Kullback-Leibler estimate between two densities,
    sampling from ``p``.

    ``variant="naive"`` averages ``log p/q``; it is unbiased but can go
    negative on unlucky samples.  ``variant="extended"`` averages
    ``log p/q + q/p - 1``, whose integrand is pointwise nonnegative, so
    the estimate is nonnegative for every sample.

    ``p`` and ``q`` expose ``log_density(x)`` and (for ``p``) a seeded
    ``sample(m, seed)``; see :class:`~bregmc.families.ComponentDensity`
    and :class:`~bregmc.families.MixtureDensity`.
    """
    if m < 1:
        raise ValueError(f"need m >= 1 samples, got {m}")
    if variant not in ("naive", "extended"):
        raise ValueError(f"unknown variant {variant!r}")
    x = np.asarray(p.sample(m, seed), float)
    lp = np.asarray(p.log_density(x), float)
    lq = np.asarray(q.log_density(x), float)
    ratio = lp - lq
    if not np.all(np.isfinite(ratio)):
        i = int(np.flatnonzero(~np.isfinite(ratio))[0])
        raise ValueError(
            f"non-finite log-ratio at variate {i} (x = {x[i]!r}): the "
            "densities do not share a support there")
    if variant == "naive":
        return float(np.mean(ratio))
    return float(np.mean(ratio + np.exp(-ratio) - 1.0))
