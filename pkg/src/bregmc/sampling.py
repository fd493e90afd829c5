"""Seeded importance-sample sets with per-variate caches.

Random number generation is pinned to Philox (4x64), a named
counter-based generator with a portable, platform-stable stream, keyed
directly by the user seed.  Every proposal declares how many uniforms
one variate consumes (one for a plain density, two for an ancestral
mixture draw: component index then quantile), variates consume their
uniforms contiguously, and all sampling is inverse-CDF.  Consequences:

* equal seeds give bit-identical sample sets, on any platform;
* drawing ``m`` variates and splitting them into contiguous blocks is
  the same as drawing the blocks one after another from the same
  stream, which is what makes partition-based parallel aggregation of
  generators exact;
* workers can consume disjoint counter ranges deterministically.

A :class:`SampleSet` also caches everything generators need per
variate: ``log q(x_i)`` always, plus ``log p_j(x_i)`` for a mixture
family or ``t(x_i)`` and ``k(x_i)`` for an exponential family.  Caches
store log densities, never linear-scale densities (tails underflow long
before 1e5 variates are exhausted).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Callable, Sequence, Union

import numpy as np

from .families import (ComponentDensity, ExponentialFamily, MixtureFamily,
                       _uniform_stream)

__all__ = [
    "Proposal",
    "component_proposal",
    "uniform_mixture_proposal",
    "uniform_interval_proposal",
    "SampleSet",
    "draw_sample_set",
    "draw_partitioned",
]

Family = Union[MixtureFamily, ExponentialFamily]


@dataclass(frozen=True)
class Proposal:
    """Importance-sampling proposal distribution q.

    ``draw`` maps an (n, uniforms_per_draw) block of open-interval
    uniforms to n support points.  q must be positive wherever the
    target families have positive density.
    """

    log_density: Callable[[np.ndarray], np.ndarray]
    draw: Callable[[np.ndarray], np.ndarray]
    uniforms_per_draw: int
    label: str


def component_proposal(component: ComponentDensity) -> Proposal:
    """Use a single component density as the proposal (one uniform per draw)."""
    return Proposal(component.log_density,
                    lambda u: np.asarray(component.quantile(u[:, 0]), float),
                    1, component.label)


def uniform_mixture_proposal(family: MixtureFamily) -> Proposal:
    """Equal-weight mixture of all D+1 components of ``family``.

    ``q(x) = (1/(D+1)) sum_j p_j(x)``, sampled ancestrally: the first
    uniform selects the component, the second feeds its quantile.
    """
    k = family.order + 1
    logk = np.log(k)

    def logq(x):
        logp = family.log_component_matrix(x)
        zmax = logp.max(axis=0)
        return zmax + np.log(np.sum(np.exp(logp - zmax), axis=0)) - logk

    return Proposal(logq, family.quantile_uniform_mixture, 2,
                    f"uniform-mixture[{family.label}]")


def uniform_interval_proposal(lo: float, hi: float) -> Proposal:
    """Uniform density on [lo, hi].

    Only covers targets whose mass essentially lives inside the
    interval; the truncation outside is a (documented) bias the caller
    accepts when picking the interval.
    """
    lo, hi = float(lo), float(hi)
    if not hi > lo:
        raise ValueError("need hi > lo")
    logq = -np.log(hi - lo)

    def log_density(x):
        x = np.asarray(x, float)
        return np.where((x >= lo) & (x <= hi), logq, -np.inf)

    return Proposal(log_density, lambda u: lo + (hi - lo) * u[:, 0], 1,
                    f"uniform[{lo:g},{hi:g}]")


@dataclass(frozen=True)
class SampleSet:
    """Immutable iid sample from a proposal with per-variate caches.

    ``offset`` records where the block starts in the seed's stream, so
    contiguous sub-blocks produced by :meth:`split` keep their lineage.
    ``kind`` is ``"mixture"`` (cache: ``log_components`` of shape (k, m))
    or ``"exponential"`` (caches: ``stats`` (m, D) and ``carrier`` (m,)).
    """

    seed: int
    size: int
    variates: np.ndarray
    log_q: np.ndarray
    proposal_label: str
    family_label: str
    kind: str
    log_components: np.ndarray | None = None
    stats: np.ndarray | None = None
    carrier: np.ndarray | None = None
    offset: int = 0

    def split(self, sizes: Sequence[int]) -> list["SampleSet"]:
        """Partition into contiguous blocks of the given sizes."""
        sizes = [int(s) for s in sizes]
        if any(s < 1 for s in sizes) or sum(sizes) != self.size:
            raise ValueError(f"block sizes {sizes} do not partition m={self.size}")
        out, start = [], 0
        for s in sizes:
            sl = slice(start, start + s)
            out.append(replace(
                self, size=s, variates=self.variates[sl], log_q=self.log_q[sl],
                log_components=None if self.log_components is None
                else self.log_components[:, sl],
                stats=None if self.stats is None else self.stats[sl],
                carrier=None if self.carrier is None else self.carrier[sl],
                offset=self.offset + start))
            start += s
        return out

    def concat(self, others: Sequence["SampleSet"]) -> "SampleSet":
        """Concatenate contiguous blocks back into one sample set."""
        blocks = [self, *others]
        for prev, nxt in zip(blocks, blocks[1:]):
            if (nxt.seed != self.seed or nxt.kind != self.kind
                    or nxt.family_label != self.family_label
                    or nxt.offset != prev.offset + prev.size):
                raise ValueError("blocks are not a contiguous partition of "
                                 "one sample stream")
        return replace(
            self,
            size=sum(b.size for b in blocks),
            variates=np.concatenate([b.variates for b in blocks]),
            log_q=np.concatenate([b.log_q for b in blocks]),
            log_components=None if self.log_components is None
            else np.concatenate([b.log_components for b in blocks], axis=1),
            stats=None if self.stats is None
            else np.concatenate([b.stats for b in blocks]),
            carrier=None if self.carrier is None
            else np.concatenate([b.carrier for b in blocks]))

    # -- serialization -------------------------------------------------------

    def to_json(self) -> str:
        doc = {
            "schema": 1,
            "seed": self.seed,
            "size": self.size,
            "offset": self.offset,
            "proposal": self.proposal_label,
            "family": self.family_label,
            "kind": self.kind,
            "variates": self.variates.tolist(),
            "log_q": self.log_q.tolist(),
        }
        if self.kind == "mixture":
            doc["log_components"] = self.log_components.tolist()
        else:
            doc["stats"] = self.stats.tolist()
            doc["carrier"] = self.carrier.tolist()
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SampleSet":
        doc = json.loads(text)
        kind = doc["kind"]
        return cls(
            seed=int(doc["seed"]), size=int(doc["size"]),
            variates=np.asarray(doc["variates"], float),
            log_q=np.asarray(doc["log_q"], float),
            proposal_label=doc["proposal"], family_label=doc["family"],
            kind=kind,
            log_components=np.asarray(doc["log_components"], float)
            if kind == "mixture" else None,
            stats=np.asarray(doc["stats"], float)
            if kind == "exponential" else None,
            carrier=np.asarray(doc["carrier"], float)
            if kind == "exponential" else None,
            offset=int(doc.get("offset", 0)))


def _build_cache(family: Family, x: np.ndarray, log_q: np.ndarray,
                 proposal: Proposal, seed: int, offset: int) -> SampleSet:
    def fail(name: str, arr: np.ndarray):
        bad = np.flatnonzero(~np.isfinite(np.atleast_2d(arr)).all(axis=0))
        i = int(bad[0])
        raise ValueError(
            f"non-finite {name} at variate {offset + i} (x = {x[i]!r}); "
            "the proposal does not cover the family support or the "
            "statistics overflow")

    if not np.all(np.isfinite(log_q)):
        fail("log q(x)", log_q)
    common = dict(seed=seed, size=len(x), variates=x, log_q=log_q,
                  proposal_label=proposal.label, offset=offset)
    if isinstance(family, MixtureFamily):
        logp = family.log_component_matrix(x)
        if not np.all(np.isfinite(logp)):
            fail("component log density", logp)
        return SampleSet(family_label=family.label, kind="mixture",
                         log_components=logp, **common)
    t = np.asarray(family.sufficient_stat(x), float)
    if t.shape != (len(x), family.order):
        raise ValueError("sufficient_stat must return an (m, D) matrix")
    k = np.asarray(family.carrier(x), float)
    if not np.all(np.isfinite(t)):
        fail("sufficient statistic", t.T)
    if not np.all(np.isfinite(k)):
        fail("carrier", k)
    return SampleSet(family_label=family.label, kind="exponential",
                     stats=t, carrier=k, **common)


def draw_sample_set(proposal: Proposal, m: int, seed: int,
                    family: Family) -> SampleSet:
    """Draw ``m`` iid variates from ``proposal`` and cache the
    per-variate quantities ``family`` needs.

    Deterministic in (proposal, m, seed).  Raises ``ValueError`` for
    ``m < 1`` and for any non-finite cache entry (naming the variate).
    """
    if m < 1:
        raise ValueError(f"need m >= 1 variates, got {m}")
    upd = proposal.uniforms_per_draw
    u = _uniform_stream(seed, m * upd).reshape(m, upd)
    x = proposal.draw(u)
    return _build_cache(family, x, np.asarray(proposal.log_density(x), float),
                        proposal, seed, 0)


def draw_partitioned(proposal: Proposal, sizes: Sequence[int], seed: int,
                     family: Family) -> list[SampleSet]:
    """Draw consecutive blocks from one seeded stream.

    ``draw_partitioned(q, [a, b], s, fam)`` equals
    ``draw_sample_set(q, a + b, s, fam).split([a, b])`` variate for
    variate: blocks consume contiguous uniform ranges.
    """
    sizes = [int(s) for s in sizes]
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError("block sizes must be positive")
    upd = proposal.uniforms_per_draw
    u_all = _uniform_stream(seed, sum(sizes) * upd)
    out, start = [], 0
    for s in sizes:
        u = u_all[start * upd:(start + s) * upd].reshape(s, upd)
        x = proposal.draw(u)
        out.append(_build_cache(
            family, x, np.asarray(proposal.log_density(x), float),
            proposal, seed, start))
        start += s
    return out
