"""Command-line front end.

One binary, five subcommands:

* ``bregmc sample``      draw and serialize a seeded sample set
* ``bregmc curve``       tabulate generator curves over a 1-d grid
* ``bregmc divergence``  evaluate divergences between two parameters
* ``bregmc cluster``     run Bregman k-means and emit result files
* ``bregmc check``       generator self-diagnostics

Every command is a pure function of its config file, flags and seed:
outputs are byte-identical across reruns (sorted JSON keys, fixed float
formatting, no timestamps).  CSV floats are printed with 17 significant
digits so values round-trip exactly.

Exit codes: 0 success, 2 config or precondition problem, 3 domain or
math error, 4 algorithm failure.
"""

from __future__ import annotations

import hashlib
import json
import sys
from functools import wraps
from pathlib import Path

import click
import numpy as np

from .clustering import (ClusterConfig, jeffreys_kmeans_via_skew,
                         left_sided_kmeans, mixed_kmeans, right_sided_kmeans)
from .errors import DegeneracyError, DomainError, NoSolutionError
from .families import (MixtureDensity, MixtureFamily, binomial_ef_oracle,
                       cauchy, gaussian, gaussian_ef_oracle, laplace,
                       mixture_negentropy_oracle, pef_quadrature_oracle,
                       polynomial_ef)
from .generators import (build_mc_exponential_generator,
                         build_mc_mixture_generator)
from .geometry import DuallyFlatSpace, mc_kl_estimate
from .sampling import (SampleSet, component_proposal, draw_sample_set,
                       uniform_interval_proposal, uniform_mixture_proposal)

EXIT_CONFIG = 2
EXIT_DOMAIN = 3
EXIT_ALGORITHM = 4


def _guarded(fn):
    """Map library exceptions onto the stable exit-code contract."""

    @wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DomainError as err:
            _die(EXIT_DOMAIN, str(err))
        except NoSolutionError as err:
            _die(EXIT_ALGORITHM, str(err))
        except DegeneracyError as err:
            _die(EXIT_DOMAIN, str(err))
        except np.linalg.LinAlgError as err:
            _die(EXIT_DOMAIN, f"linear algebra failure: {err}")
        except RuntimeError as err:
            _die(EXIT_ALGORITHM, str(err))
        except (FileNotFoundError, IsADirectoryError, PermissionError) as err:
            _die(EXIT_CONFIG, str(err))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as err:
            _die(EXIT_CONFIG, str(err))

    return wrapper


def _die(code: int, message: str) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


# ---------------------------------------------------------------------------
# Config parsing
# ---------------------------------------------------------------------------

_COMPONENTS = {
    "gaussian": lambda c: gaussian(c["mu"], c["sigma"]),
    "laplace": lambda c: laplace(c["mu"], c["b"]),
    "cauchy": lambda c: cauchy(c["x0"], c["gamma"]),
}


def _component(doc: dict):
    kind = doc["kind"]
    if kind not in _COMPONENTS:
        raise ValueError(f"unknown component kind {kind!r}")
    return _COMPONENTS[kind](doc)


def _load_json(path: str) -> dict:
    doc = json.loads(Path(path).read_text())
    if doc.get("schema") != 1:
        raise ValueError(f"{path}: unsupported or missing schema "
                         f"(expected schema: 1)")
    return doc


def _load_family(path: str):
    doc = _load_json(path)
    kind = doc["type"]
    if kind == "mixture":
        comps = [_component(c) for c in doc["components"]]
        return MixtureFamily(comps), doc
    if kind == "exponential":
        if doc.get("sufficient_stat", "polynomial") != "polynomial":
            raise ValueError("only polynomial sufficient statistics are "
                             "supported in config files")
        return polynomial_ef(doc["powers"]), doc
    raise ValueError(f"unknown family type {kind!r}")


def _load_proposal(path: str | None, family):
    if path is None:
        if isinstance(family, MixtureFamily):
            return uniform_mixture_proposal(family)
        return uniform_interval_proposal(-8.0, 8.0)
    doc = _load_json(path)
    kind = doc["kind"]
    if kind == "uniform-mixture":
        if not isinstance(family, MixtureFamily):
            raise ValueError("uniform-mixture proposal requires a mixture family")
        return uniform_mixture_proposal(family)
    if kind == "uniform":
        return uniform_interval_proposal(doc["lo"], doc["hi"])
    if kind == "component":
        return component_proposal(_component(doc["component"]))
    raise ValueError(f"unknown proposal kind {kind!r}")


def _family_hash(doc: dict) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _meta(doc: dict, m: int, seed: int, proposal_label: str) -> dict:
    return {"seed": seed, "m": m, "proposal": proposal_label,
            "family_hash": _family_hash(doc)}


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], float)
    except ValueError:
        raise ValueError(f"cannot parse parameter vector {text!r}; expected "
                         "comma-separated floats")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_text(path: str, text: str) -> None:
    Path(path).write_bytes(text.encode())


def _echo_json(doc: dict) -> None:
    click.echo(json.dumps(doc, sort_keys=True, indent=2))


def _build_generator(family, proposal, m: int, seed: int):
    sample = draw_sample_set(proposal, m, seed, family)
    if isinstance(family, MixtureFamily):
        return build_mc_mixture_generator(family, sample)
    return build_mc_exponential_generator(family, sample)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

@click.group()
@click.version_option(package_name="bregmc")
def main():
    """Monte Carlo Bregman generators and dually flat geometry."""


@main.command()
@click.option("--family", "family_path", required=True, type=str,
              help="Family definition JSON.")
@click.option("--m", required=True, type=int, help="Number of variates.")
@click.option("--seed", required=True, type=int, help="Stream seed.")
@click.option("--proposal", "proposal_path", type=str, default=None,
              help="Proposal JSON (defaults to uniform mixture / uniform interval).")
@click.option("--out", required=True, type=str, help="Output sample-set file.")
@_guarded
def sample(family_path, m, seed, proposal_path, out):
    """Draw a seeded sample set and serialize it with its caches."""
    family, doc = _load_family(family_path)
    proposal = _load_proposal(proposal_path, family)
    ss = draw_sample_set(proposal, m, seed, family)
    _write_text(out, ss.to_json())
    _echo_json({"m": ss.size, "seed": ss.seed, "proposal": proposal.label,
                "support_range": [float(ss.variates.min()),
                                  float(ss.variates.max())],
                "family_hash": _family_hash(doc), "out": out})


@main.command()
@click.option("--family", "family_path", required=True, type=str)
@click.option("--m-list", required=True, type=str,
              help="Comma-separated sample sizes, one curve per size.")
@click.option("--seed", required=True, type=int)
@click.option("--grid", default="0.05:0.95:19", show_default=True,
              help="Grid spec lo:hi:count over the 1-d parameter.")
@click.option("--proposal", "proposal_path", type=str, default=None)
@click.option("--oracle", is_flag=True,
              help="Append a quadrature ground-truth column.")
@click.option("--out", required=True, type=str, help="Output CSV.")
@_guarded
def curve(family_path, m_list, seed, grid, proposal_path, oracle, out):
    """Tabulate Monte Carlo generator curves on a 1-d family."""
    family, doc = _load_family(family_path)
    if family.order != 1:
        _die(EXIT_CONFIG, "curve output supports only 1-d (order-1) families")
    try:
        lo, hi, count = grid.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise ValueError(f"bad grid spec {grid!r}; expected lo:hi:count")
    if count < 2 or not hi > lo:
        raise ValueError("grid needs hi > lo and at least two points")
    mixture = isinstance(family, MixtureFamily)
    if mixture and (lo <= 0.0 or hi >= 1.0):
        raise ValueError("mixture-weight grid must stay inside (0, 1)")
    sizes = [int(v) for v in m_list.split(",")]
    proposal = _load_proposal(proposal_path, family)
    xs = np.linspace(lo, hi, count)

    columns = {}
    for m in sizes:
        gen = _build_generator(family, proposal, m, seed)
        if mixture:
            columns[f"g_m{m}"] = [gen.value(np.array([x])) for x in xs]
        else:
            columns[f"f_m{m}"] = [gen.value_unshifted(np.array([x])) for x in xs]
    if oracle:
        ora = (mixture_negentropy_oracle(family) if mixture
               else pef_quadrature_oracle(doc["powers"]))
        columns["oracle"] = [ora.value(np.array([x])) for x in xs]

    header = ("eta" if mixture else "theta",) + tuple(columns)
    lines = [",".join(header)]
    for i, x in enumerate(xs):
        lines.append(",".join([_fmt(x)] + [_fmt(col[i]) for col in columns.values()]))
    _write_text(out, "\n".join(lines) + "\n")
    _echo_json({"out": out, "rows": len(xs), "columns": list(header),
                **_meta(doc, max(sizes), seed, proposal.label)})


@main.command()
@click.option("--family", "family_path", type=str, default=None,
              help="Family JSON for a Monte Carlo generator.")
@click.option("--oracle", "oracle_name", type=click.Choice(["gaussian", "binomial"]),
              default=None, help="Use a closed-form generator instead.")
@click.option("--m", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--proposal", "proposal_path", type=str, default=None)
@click.option("--p", "p_text", required=True, help="First parameter vector.")
@click.option("--q", "q_text", required=True, help="Second parameter vector.")
@click.option("--kind", type=click.Choice(["bregman", "jeffreys", "skew", "mc-kl"]),
              default="bregman", show_default=True)
@click.option("--alpha", type=float, default=1e-3, show_default=True,
              help="Skew parameter for kind=skew.")
@click.option("--kl-m", type=int, default=100_000, show_default=True,
              help="Sample size for kind=mc-kl.")
@click.option("--kl-variant", type=click.Choice(["naive", "extended"]),
              default="extended", show_default=True)
@_guarded
def divergence(family_path, oracle_name, m, seed, proposal_path, p_text,
               q_text, kind, alpha, kl_m, kl_variant):
    """Print divergence values between two parameter vectors as JSON."""
    p = _vector(p_text)
    q = _vector(q_text)
    if (family_path is None) == (oracle_name is None):
        raise ValueError("exactly one of --family and --oracle is required")

    meta = {"kind": kind}
    family = None
    if oracle_name is not None:
        gen = gaussian_ef_oracle() if oracle_name == "gaussian" else binomial_ef_oracle()
        meta["generator"] = f"{oracle_name}-oracle"
    else:
        family, doc = _load_family(family_path)
        proposal = _load_proposal(proposal_path, family)
        gen = _build_generator(family, proposal, m, seed)
        meta.update(_meta(doc, m, seed, proposal.label))

    if kind == "mc-kl":
        if not isinstance(family, MixtureFamily):
            raise ValueError("mc-kl needs a mixture family (the parameters "
                             "are mixture weights)")
        value = mc_kl_estimate(MixtureDensity(family, p),
                               MixtureDensity(family, q),
                               kl_m, seed, kl_variant)
        _echo_json({**meta, "variant": kl_variant, "m": kl_m, "value": value})
        return

    space = DuallyFlatSpace(gen)
    if kind == "bregman":
        value = space.bregman_divergence(p, q)
    elif kind == "jeffreys":
        value = space.jeffreys(p, q, mode="exact")
    else:
        value = space.skew_jensen(p, q, alpha)
        meta["alpha"] = alpha
    _echo_json({**meta, "p": p.tolist(), "q": q.tolist(), "value": value})


_VARIANTS = {
    "right": right_sided_kmeans,
    "left": left_sided_kmeans,
    "mixed": mixed_kmeans,
    "jeffreys-skew": jeffreys_kmeans_via_skew,
}


@main.command()
@click.option("--family", "family_path", required=True, type=str)
@click.option("--points", "points_path", required=True, type=str,
              help="JSON file with a 'points' array of parameter vectors.")
@click.option("--m", type=int, default=100_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed of the generator sample stream.")
@click.option("--proposal", "proposal_path", type=str, default=None)
@click.option("--quadrature", is_flag=True,
              help="Cluster on the quadrature oracle generator instead of "
                   "the Monte Carlo one (mixture families only).")
@click.option("--k", required=True, type=int)
@click.option("--variant", type=click.Choice(sorted(_VARIANTS)), default="mixed",
              show_default=True)
@click.option("--seeding", type=click.Choice(["kmeans++", "forgy"]),
              default="kmeans++", show_default=True)
@click.option("--alpha", type=float, default=1e-3, show_default=True)
@click.option("--max-iters", type=int, default=100, show_default=True)
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--cluster-seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=str,
              help="Output prefix; writes <out>.json and <out>.csv.")
@_guarded
def cluster(family_path, points_path, m, seed, proposal_path, quadrature, k,
            variant, seeding, alpha, max_iters, tol, cluster_seed, out):
    """Cluster parameter vectors with Bregman k-means."""
    family, doc = _load_family(family_path)
    pts_doc = _load_json(points_path)
    points = np.asarray(pts_doc["points"], float)
    if points.ndim != 2:
        raise ValueError("'points' must be a list of parameter vectors")
    if k > len(points):
        raise ValueError(f"k = {k} exceeds the number of points {len(points)}")

    if quadrature:
        if not isinstance(family, MixtureFamily):
            raise ValueError("--quadrature requires a mixture family")
        gen = mixture_negentropy_oracle(family)
        proposal_label = "quadrature"
    else:
        proposal = _load_proposal(proposal_path, family)
        gen = _build_generator(family, proposal, m, seed)
        proposal_label = proposal.label
    space = DuallyFlatSpace(gen)

    base_variant = "right" if variant == "jeffreys-skew" else variant
    cfg = ClusterConfig(k=k, variant=base_variant, seeding=seeding,
                        max_iters=max_iters, tol=tol, seed=cluster_seed)
    if variant == "jeffreys-skew":
        result = jeffreys_kmeans_via_skew(space, points, cfg, alpha)
    else:
        result = _VARIANTS[variant](space, points, cfg)

    report = {"result": result.to_dict(), "variant": variant,
              **_meta(doc, m, seed, proposal_label),
              "cluster_seed": cluster_seed, "k": k}
    _write_text(out + ".json", json.dumps(report, sort_keys=True, indent=2) + "\n")
    lines = [",".join([f"x{i}" for i in range(points.shape[1])] + ["label"])]
    for row, lab in zip(points, result.assignments):
        lines.append(",".join([_fmt(v) for v in row] + [str(int(lab))]))
    _write_text(out + ".csv", "\n".join(lines) + "\n")
    _echo_json({"out": out, "iterations": result.iterations,
                "final_cost": result.cost_history[-1],
                "assignments": result.assignments.tolist()})


@main.command()
@click.option("--family", "family_path", required=True, type=str)
@click.option("--m", type=int, default=10_000, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--proposal", "proposal_path", type=str, default=None)
@click.option("--trials", type=int, default=10, show_default=True)
@_guarded
def check(family_path, m, seed, proposal_path, trials):
    """Self-diagnostics: positive definiteness, derivative consistency
    and the dual round trip of a freshly built generator."""
    family, doc = _load_family(family_path)
    proposal = _load_proposal(proposal_path, family)
    gen = _build_generator(family, proposal, m, seed)
    space = DuallyFlatSpace(gen)
    rng = np.random.default_rng(seed)
    d = gen.dim
    mixture = isinstance(family, MixtureFamily)

    min_eig = np.inf
    max_grad_err = 0.0
    for _ in range(trials):
        if mixture:
            x = rng.dirichlet(np.ones(d + 1))[:d]
            x = gen.domain.project(x, 1e-3)
        else:
            x = rng.normal(0.0, 1.0, d)
        min_eig = min(min_eig, float(np.linalg.eigvalsh(gen.hessian(x)).min()))
        g = gen.gradient(x)
        h = 1e-6
        for i in range(d):
            e = np.zeros(d)
            e[i] = h
            fd = (gen.value(x + e) - gen.value(x - e)) / (2 * h)
            max_grad_err = max(max_grad_err,
                               abs(fd - g[i]) / (1.0 + abs(g[i])))
    x0 = gen.domain.interior_point()
    crouzeix = space.crouzeix_deviation(x0)
    ok = bool(min_eig > 0 and max_grad_err < 1e-5 and crouzeix < 1e-6)
    _echo_json({"min_hessian_eigenvalue": min_eig,
                "max_gradient_fd_error": max_grad_err,
                "crouzeix_deviation": crouzeix,
                "ok": ok, **_meta(doc, m, seed, proposal.label)})
    if not ok:
        sys.exit(EXIT_DOMAIN)


if __name__ == "__main__":
    main()
