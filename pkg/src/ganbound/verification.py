"""Randomized checks of the closed-form constants and the search routines.

Each suite draws its own instances from ``rng`` and returns a plain dict
summary, so the CLI ``verify`` subcommand and the tests share one code path.
"""

from __future__ import annotations

import numpy as np

from .bounds import compute_bound_report
from .distance import SearchOptions, grid_cell_slack, make_data, sup_over_w
from .distributions import DistributionSpec, draw_samples
from .experiments import verify_decomposition
from .nets import (
    Activation,
    MeasuringFunction,
    NetworkSpec,
    batch_forward,
    sample_weights,
    sample_weights_batch,
)

ENVELOPE_RTOL = 1e-9
ACT_NAMES = ("relu", "leaky_relu", "identity")


def random_spec(rng: np.random.Generator, input_dim: int | None = None, output_dim: int | None = None,
                max_depth: int = 3, max_width: int = 4) -> NetworkSpec:
    depth = int(rng.integers(1, max_depth + 1))
    dims = [int(rng.integers(1, max_width + 1)) for _ in range(depth + 1)]
    if input_dim is not None:
        dims[0] = input_dim
    if output_dim is not None:
        dims[-1] = output_dim
    bounds = [float(rng.uniform(0.5, 2.0)) for _ in range(depth)]
    acts = []
    for _ in range(depth - 1):
        name = ACT_NAMES[int(rng.integers(len(ACT_NAMES)))]
        acts.append(Activation(name, float(rng.uniform(0.01, 0.5))) if name == "leaky_relu" else Activation(name))
    return NetworkSpec(tuple(dims), tuple(bounds), tuple(acts))


def _ball_points(rng, size, dim, radius):
    # half the draws sit on the sphere, where the envelopes are tight
    g = rng.standard_normal((size, dim))
    g /= np.maximum(np.linalg.norm(g, axis=-1, keepdims=True), 1e-300)
    r = radius * np.where(rng.uniform(size=(size, 1)) < 0.5, 1.0, rng.uniform(size=(size, 1)) ** (1.0 / dim))
    return g * r


def envelope_suite(rng: np.random.Generator, specs: int = 10, draws: int = 10_000,
                   phi: MeasuringFunction | None = None) -> dict:
    """Count draws where ``|f_w(x)|``, ``|f_w(g(z))|``, ``|f1|`` or ``|h_u|``
    exceeds ``K1..K4`` at relative tolerance 1e-9."""
    phi = phi or MeasuringFunction("identity")
    per = draws // specs
    violations = {"K1": 0, "K2": 0, "K3": 0, "K4": 0}
    worst = {k: 0.0 for k in violations}
    for _ in range(specs):
        gspec = random_spec(rng)
        fspec = random_spec(rng, input_dim=gspec.output_dim, output_dim=1)
        B_X, B_Z = float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.5, 3.0))
        rep = compute_bound_report(fspec, gspec, phi, B_X, B_Z)
        w = sample_weights_batch(fspec, rng, per)
        th = sample_weights_batch(gspec, rng, per)
        x = _ball_points(rng, per, fspec.input_dim, B_X)[:, None, :]
        z = _ball_points(rng, per, gspec.input_dim, B_Z)[:, None, :]
        fx = batch_forward(w, fspec.activations, x)[:, 0, 0]
        fg = batch_forward(w, fspec.activations, batch_forward(th, gspec.activations, z))[:, 0, 0]
        for key, vals, K in (("K1", fx, rep.K1), ("K2", fg, rep.K2),
                             ("K3", phi(fx), rep.K3), ("K4", phi(1.0 - fg), rep.K4)):
            a = np.abs(vals)
            violations[key] += int(np.sum(a > K * (1.0 + ENVELOPE_RTOL)))
            worst[key] = max(worst[key], float(np.max(a / K)) if K > 0 else 0.0)
    return {"draws": per * specs, "specs": specs, "violations": violations,
            "max_ratio": worst, "passed": sum(violations.values()) == 0}


def lipschitz_suite(rng: np.random.Generator, specs: int = 10, draws: int = 10_000) -> dict:
    """Count draws with ``|f_w(x1) - f_w(x2)| > U_w ||x1 - x2||``."""
    per = draws // specs
    violations, worst = 0, 0.0
    for _ in range(specs):
        fspec = random_spec(rng, output_dim=1)
        U = fspec.lipschitz_product()
        w = sample_weights_batch(fspec, rng, per)
        x1 = rng.uniform(-2.0, 2.0, size=(per, 1, fspec.input_dim))
        # mix far pairs with close pairs, where kinks matter most
        scale = np.where(rng.uniform(size=(per, 1, 1)) < 0.5, 1.0, 1e-3)
        x2 = x1 + scale * rng.uniform(-2.0, 2.0, size=x1.shape)
        f1 = batch_forward(w, fspec.activations, x1)[:, 0, 0]
        f2 = batch_forward(w, fspec.activations, x2)[:, 0, 0]
        dist = np.linalg.norm((x1 - x2)[:, 0, :], axis=-1)
        lhs = np.abs(f1 - f2)
        rhs = U * dist
        violations += int(np.sum(lhs > rhs * (1.0 + ENVELOPE_RTOL) + 1e-15))
        ok = rhs > 0
        if ok.any():
            worst = max(worst, float(np.max(lhs[ok] / rhs[ok])))
    return {"draws": per * specs, "violations": violations, "max_ratio": worst, "passed": violations == 0}


TINY_DISCRIMINATORS = (
    ((1, 1), ()),
    ((2, 1), ()),
    ((3, 1), ()),
    ((1, 1, 1), ("relu",)),
    ((1, 1, 1), ("leaky_relu",)),
    ((2, 1, 1), ("relu",)),
    ((1, 1, 1, 1), ("relu", "relu")),
    ((1, 1, 1, 1), ("relu", "identity")),
)


def random_tiny_instance(rng: np.random.Generator, max_n: int = 20):
    """A discriminator with at most three weights, a fixed generator, and data."""
    dims, acts = TINY_DISCRIMINATORS[int(rng.integers(len(TINY_DISCRIMINATORS)))]
    fspec = NetworkSpec(dims, tuple(float(rng.uniform(0.5, 2.0)) for _ in range(len(dims) - 1)), acts)
    p0, p = fspec.input_dim, int(rng.integers(1, 3))
    gspec = NetworkSpec((p, p0), (float(rng.uniform(0.5, 2.0)),), ())
    theta = sample_weights(gspec, rng)
    base = DistributionSpec.uniform_cube(1.0, p)
    target = DistributionSpec.uniform_ball(float(rng.uniform(0.5, 2.0)), p0)
    n, m = int(rng.integers(1, max_n + 1)), int(rng.integers(1, max_n + 1))
    samples = draw_samples(target, base, n, m, rng)
    return fspec, gspec, theta, samples


def oracle_equivalence_suite(rng: np.random.Generator, instances: int = 100,
                             options: SearchOptions | None = None, abs_mode: bool = True) -> dict:
    """Grid sup against pgd sup on random tiny instances.

    An instance agrees when ``|pgd - grid| <= 1e-3 (1 + |grid|)``; pgd must
    never beat the grid by more than the grid-cell Lipschitz slack.
    """
    opts = options or SearchOptions()
    phi = MeasuringFunction("identity")
    agree, overshoots, rows = 0, 0, []
    for i in range(instances):
        fspec, gspec, theta, samples = random_tiny_instance(rng)
        data = make_data("empirical_mn", fspec, gspec, phi, samples=samples)
        points = opts.grid_points if fspec.parameter_count <= 2 else min(opts.grid_points, 101)
        gopts = SearchOptions(grid_points=points, grid_cap=opts.grid_cap)
        grid = sup_over_w(fspec, gspec, theta, phi, data, "grid", gopts, abs_mode).value
        pgd = sup_over_w(fspec, gspec, theta, phi, data, "pgd", opts, abs_mode,
                         np.random.default_rng(rng.integers(2**63))).value
        G = data.z.pushed(gspec, theta).points
        radius = max(float(np.max(np.linalg.norm(data.x.points, axis=1))),
                     float(np.max(np.linalg.norm(G, axis=1))))
        slack = grid_cell_slack(fspec, points, radius)
        ok = abs(pgd - grid) <= 1e-3 * (1.0 + abs(grid))
        over = pgd - grid > slack
        agree += ok
        overshoots += over
        rows.append({"instance": i, "params": fspec.parameter_count, "grid": grid, "pgd": pgd,
                     "slack": slack, "agree": bool(ok), "overshoot": bool(over)})
    return {"instances": instances, "agree": agree, "overshoots": overshoots, "rows": rows,
            "passed": agree >= 0.95 * instances and overshoots == 0}


SIZES = (1, 10, 100, 10_000)


def decomposition_suite(rng: np.random.Generator, instances: int = 50,
                        options: SearchOptions | None = None, N_pop: int = 100_000) -> dict:
    """``verify_decomposition`` on random tiny instances across sample sizes."""
    opts = options or SearchOptions(grid_points=11, theta_grid_points=21)
    phi = MeasuringFunction("identity")
    rows, failures = [], 0
    for i in range(instances):
        dims, acts = TINY_DISCRIMINATORS[int(rng.integers(len(TINY_DISCRIMINATORS)))]
        fspec = NetworkSpec(dims, tuple(float(rng.uniform(0.5, 2.0)) for _ in range(len(dims) - 1)), acts)
        p0 = fspec.input_dim
        if p0 == 1 and rng.uniform() < 0.5:
            gspec = NetworkSpec((1, 1, 1), (float(rng.uniform(0.5, 1.5)), float(rng.uniform(0.5, 1.5))), ("relu",))
        else:
            gspec = NetworkSpec((1, p0), (float(rng.uniform(0.5, 1.5)),), ())
        base = DistributionSpec.uniform_cube(float(rng.uniform(0.5, 2.0)), 1)
        target = DistributionSpec.pushforward(gspec, sample_weights(gspec, rng), base)
        n = SIZES[i % len(SIZES)]
        m = SIZES[int(rng.integers(len(SIZES)))]
        samples = draw_samples(target, base, n, m, rng)
        rec = verify_decomposition(fspec, gspec, phi, samples, target, base, opts, N_pop,
                                   np.random.default_rng(rng.integers(2**63)))
        failures += not rec["holds"]
        rows.append({"instance": i, **rec})
    return {"instances": instances, "failures": failures, "rows": rows, "passed": failures == 0,
            "min_slack": min(r["slack"] for r in rows)}
