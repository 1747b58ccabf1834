"""Input laws, sample sets, and the weighted-atom measures objectives average over.

A :class:`Measure` is a finite signed combination of atoms. Empirical laws
are atoms at the samples with weight ``1/n``. When the measuring function is
the identity, the objective only needs ``sum_k c_k f(x_k)``, and two exact
compressions apply:

* the network is linear: ``sum_k c_k f(x_k) = f(sum_k c_k x_k)``, one atom;
* the input is one-dimensional: bias-free piecewise-linear networks are
  positively homogeneous, so ``f(x) = x+ f(1) + x- f(-1)`` and two atoms at
  ``+1`` and ``-1`` carry the whole law.

The same identities give closed-form population measures for centered
uniform laws (``E X+ = E X- = B/4`` on ``[-B, B]``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ShapeError
from .nets import NetworkSpec, WeightAssignment, batch_forward


@dataclass(frozen=True, eq=False)
class DistributionSpec:
    """A law on R^dimension.

    kinds: ``uniform_ball`` (radius), ``uniform_cube`` (half-width radius),
    ``pushforward`` (generator, theta, base) and ``empirical`` (points).
    """

    kind: str
    dimension: int
    radius: float | None = None
    generator: NetworkSpec | None = None
    theta: WeightAssignment | None = None
    base: "DistributionSpec | None" = None
    points: tuple | None = None

    KINDS = ("uniform_ball", "uniform_cube", "pushforward", "empirical")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind in ("uniform_ball", "uniform_cube"):
            if self.radius is None or not self.radius > 0:
                raise ValueError(f"{self.kind} needs a positive radius")
        elif self.kind == "pushforward":
            if self.generator is None or self.theta is None or self.base is None:
                raise ValueError("pushforward needs generator, theta and base")
            self.theta.validate(self.generator)
            if self.base.dimension != self.generator.input_dim:
                raise ShapeError(
                    f"base law has dimension {self.base.dimension}, generator expects "
                    f"{self.generator.input_dim}"
                )
            if self.dimension != self.generator.output_dim:
                raise ShapeError("pushforward dimension must equal the generator output")
        else:
            if not self.points:
                raise ValueError("empirical law needs at least one point")
            pts = tuple(tuple(float(v) for v in p) for p in self.points)
            if any(len(p) != self.dimension for p in pts):
                raise ShapeError(f"empirical points must have dimension {self.dimension}")
            object.__setattr__(self, "points", pts)

    def __eq__(self, other):
        if not isinstance(other, DistributionSpec):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash(repr(self.to_dict()))

    @classmethod
    def uniform_ball(cls, radius: float, dimension: int = 1) -> "DistributionSpec":
        return cls("uniform_ball", dimension, radius=float(radius))

    @classmethod
    def uniform_cube(cls, radius: float, dimension: int = 1) -> "DistributionSpec":
        return cls("uniform_cube", dimension, radius=float(radius))

    @classmethod
    def pushforward(cls, generator: NetworkSpec, theta: WeightAssignment, base: "DistributionSpec"):
        return cls("pushforward", generator.output_dim, generator=generator, theta=theta, base=base)

    @classmethod
    def empirical(cls, points) -> "DistributionSpec":
        pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return cls("empirical", pts.shape[1], points=tuple(map(tuple, pts)))

    def norm_bound(self) -> float:
        """A radius ``B`` with ``||x|| <= B`` for every draw."""
        if self.kind == "uniform_ball":
            return self.radius
        if self.kind == "uniform_cube":
            return self.radius * math.sqrt(self.dimension)
        if self.kind == "pushforward":
            return self.generator.lipschitz_product() * self.base.norm_bound()
        return float(max(np.linalg.norm(p) for p in self.points))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "uniform_cube":
            return rng.uniform(-self.radius, self.radius, size=(size, self.dimension))
        if self.kind == "uniform_ball":
            g = rng.standard_normal((size, self.dimension))
            norms = np.linalg.norm(g, axis=1, keepdims=True)
            r = self.radius * rng.uniform(0.0, 1.0, size=(size, 1)) ** (1.0 / self.dimension)
            return g / np.where(norms > 0, norms, 1.0) * r
        if self.kind == "pushforward":
            z = self.base.sample(rng, size)
            return push(self.generator, self.theta, z)
        pts = np.asarray(self.points)
        return pts[rng.integers(0, len(pts), size=size)]

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "dimension": self.dimension}
        if self.radius is not None:
            d["radius"] = self.radius
        if self.kind == "pushforward":
            d["generator"] = self.generator.to_dict()
            d["theta"] = self.theta.to_list()
            d["base"] = self.base.to_dict()
        if self.points is not None:
            d["points"] = [list(p) for p in self.points]
        return d

    @classmethod
    def from_dict(cls, d: dict, generator: NetworkSpec | None = None, base=None) -> "DistributionSpec":
        kind = d["kind"]
        if kind in ("uniform_ball", "uniform_cube"):
            return cls(kind, int(d.get("dimension", 1)), radius=float(d["radius"]))
        if kind == "empirical":
            return cls.empirical(d["points"])
        if kind == "pushforward":
            gen = NetworkSpec.from_dict(d["generator"]) if "generator" in d else generator
            b = cls.from_dict(d["base"]) if "base" in d else base
            if gen is None or b is None:
                raise ValueError("pushforward needs a generator and a base law")
            return cls.pushforward(gen, WeightAssignment.from_list(d["theta"]), b)
        raise ValueError(f"unknown distribution kind {kind!r}")


def push(gspec: NetworkSpec, theta: WeightAssignment, z: np.ndarray) -> np.ndarray:
    return batch_forward(theta.batched(), gspec.activations, np.asarray(z, dtype=np.float64))[0]


@dataclass
class SampleSet:
    x: np.ndarray
    z: np.ndarray
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def m(self) -> int:
        return self.z.shape[0]


def draw_samples(target: DistributionSpec, base: DistributionSpec, n: int, m: int,
                 rng: np.random.Generator, seed: int | None = None) -> SampleSet:
    """``n`` target draws then ``m`` base draws, in that order, from one stream."""
    x = target.sample(rng, n) if n > 0 else np.zeros((0, target.dimension))
    z = base.sample(rng, m) if m > 0 else np.zeros((0, base.dimension))
    return SampleSet(x, z, seed)


@dataclass
class Measure:
    """``sum_k weights[k] * delta(points[k])`` standing in for a law of total mass ``mass``.

    ``linear_only`` marks compressed measures, which are exact only for
    linear functionals of the network output.
    """

    points: np.ndarray
    weights: np.ndarray
    mass: float = 1.0
    linear_only: bool = False
    source: str = "empirical"
    size: int | None = None
    meta: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @classmethod
    def empirical(cls, samples: np.ndarray, source: str = "empirical") -> "Measure":
        samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        n = samples.shape[0]
        if n == 0:
            raise ValueError("an empirical measure needs at least one sample")
        return cls(samples, np.full(n, 1.0 / n), 1.0, False, source, n)

    @classmethod
    def signed(cls, samples: np.ndarray, coefficients: np.ndarray) -> "Measure":
        samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        return cls(samples, np.asarray(coefficients, dtype=np.float64), 0.0, True, "signed", samples.shape[0])

    def compress(self, net_linear: bool) -> "Measure":
        """Exact atom reduction for linear functionals (see module docstring)."""
        if net_linear:
            pt = (self.weights @ self.points)[None, :]
            return Measure(pt, np.ones(1), self.mass, True, self.source, self.size, dict(self.meta))
        if self.dimension == 1:
            x = self.points[:, 0]
            w = np.array([self.weights @ np.maximum(x, 0.0), self.weights @ np.maximum(-x, 0.0)])
            return Measure(np.array([[1.0], [-1.0]]), w, self.mass, True, self.source, self.size,
                           dict(self.meta))
        return self

    def pushed(self, gspec: NetworkSpec, theta: WeightAssignment) -> "Measure":
        return Measure(push(gspec, theta, self.points), self.weights.copy(), self.mass,
                       self.linear_only, self.source, self.size, dict(self.meta))


def exact_measure(dist: DistributionSpec, net_linear: bool) -> Measure | None:
    """Closed-form stand-in for ``dist`` under linear functionals, or ``None``.

    ``net_linear`` says whether every network that will read the measure is
    linear (then only the mean matters).
    """
    if dist.kind in ("uniform_ball", "uniform_cube"):
        if net_linear:
            m = Measure(np.zeros((1, dist.dimension)), np.ones(1), 1.0, True, "closed_form")
        elif dist.dimension == 1:
            q = dist.radius / 4.0
            m = Measure(np.array([[1.0], [-1.0]]), np.array([q, q]), 1.0, True, "closed_form")
        else:
            return None
        return m
    if dist.kind == "empirical":
        m = Measure.empirical(np.asarray(dist.points), "closed_form").compress(net_linear)
        return m if m.linear_only else None
    base = exact_measure(dist.base, net_linear and dist.generator.is_linear)
    if base is None:
        return None
    return base.pushed(dist.generator, dist.theta)


def population_measure(dist: DistributionSpec, *, linear: bool, net_linear: bool,
                       n_pop: int | None, rng: np.random.Generator | None,
                       closed_form: bool = True) -> Measure:
    """Population law as a measure: closed form when available, else plug-in.

    ``linear`` is true when the measuring function is the identity, the only
    case where the compressed closed forms are valid.
    """
    if linear and closed_form:
        m = exact_measure(dist, net_linear)
        if m is not None:
            return m
    if n_pop is None or rng is None:
        raise ValueError("a plug-in population expectation needs n_pop and a random stream")
    m = Measure.empirical(dist.sample(rng, n_pop), "plug_in")
    m.meta["n_pop"] = n_pop
    return m
