"""Bias-free feedforward discriminator/generator classes over Frobenius balls.

A discriminator computes ``f_w(x) = W_d s_{d-1}(... s_1(W_1 x))`` with scalar
output; a generator computes ``g_theta(z)`` with the same layout and vector
output. Every weight matrix lives in a Frobenius-norm ball whose radius is
fixed by the :class:`NetworkSpec`.

Single-point forwards go through :mod:`ganbound.linalg`; the batched helpers
at the bottom evaluate many weight settings at once and are what the search
routines use.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg
from .errors import ConstraintError, DomainError, ShapeError

NORM_RTOL = 1e-12


@dataclass(frozen=True)
class Activation:
    """Piecewise-linear activation: ``relu``, ``leaky_relu`` or ``identity``."""

    kind: str
    slope: float = 0.0

    KINDS = ("relu", "leaky_relu", "identity")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(
                f"activation {self.kind!r} is not piecewise linear; choose from {self.KINDS}"
            )
        if self.kind == "leaky_relu" and not 0.0 < self.slope < 1.0:
            raise ValueError(f"leaky_relu slope must lie in (0, 1), got {self.slope}")
        if self.kind != "leaky_relu" and self.slope != 0.0:
            raise ValueError(f"{self.kind} takes no slope")

    @property
    def lipschitz_constant(self) -> float:
        return 1.0

    @property
    def is_linear(self) -> bool:
        return self.kind == "identity"

    @property
    def name(self) -> str:
        if self.kind == "leaky_relu":
            return f"leaky_relu({self.slope!r})"
        return self.kind

    @classmethod
    def from_name(cls, name: str) -> "Activation":
        name = name.strip()
        m = re.fullmatch(r"leaky_relu(?:\(\s*([0-9.eE+-]+)\s*\))?", name)
        if m:
            return cls("leaky_relu", float(m.group(1)) if m.group(1) else 0.01)
        return cls(name)

    def __call__(self, a):
        if self.kind == "relu":
            return np.maximum(a, 0.0)
        if self.kind == "leaky_relu":
            return np.where(a > 0, a, self.slope * a)
        return a

    def derivative(self, a):
        # relu subgradient at 0 is 0
        if self.kind == "relu":
            return (a > 0).astype(np.float64)
        if self.kind == "leaky_relu":
            return np.where(a > 0, 1.0, self.slope)
        return np.ones_like(a)


RELU = Activation("relu")
IDENTITY = Activation("identity")


def _as_activation(a) -> Activation:
    if isinstance(a, Activation):
        return a
    return Activation.from_name(str(a))


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture of one constrained class.

    ``layer_dims`` is ``[p0, p1, ..., pd]``; matrix ``i`` has shape
    ``layer_dims[i+1] x layer_dims[i]`` and Frobenius norm at most
    ``norm_bounds[i]``; ``activations[i]`` follows matrix ``i``.
    """

    layer_dims: tuple
    norm_bounds: tuple
    activations: tuple = field(default=())

    def __post_init__(self):
        dims = tuple(int(p) for p in self.layer_dims)
        bounds = tuple(float(b) for b in self.norm_bounds)
        acts = tuple(_as_activation(a) for a in self.activations)
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "norm_bounds", bounds)
        object.__setattr__(self, "activations", acts)
        if len(dims) < 2:
            raise ShapeError("a network needs at least one weight matrix")
        if any(p < 1 for p in dims):
            raise ShapeError(f"layer dimensions must be positive, got {dims}")
        if len(bounds) != len(dims) - 1:
            raise ShapeError(
                f"{len(dims) - 1} weight matrices but {len(bounds)} norm bounds"
            )
        if len(acts) != len(bounds) - 1:
            raise ShapeError(
                f"{len(bounds)} weight matrices need {len(bounds) - 1} activations, got {len(acts)}"
            )
        if not all(b > 0 and math.isfinite(b) for b in bounds):
            raise ValueError(f"norm bounds must be positive and finite, got {bounds}")

    @property
    def depth(self) -> int:
        return len(self.norm_bounds)

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def output_dim(self) -> int:
        return self.layer_dims[-1]

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return [(self.layer_dims[i + 1], self.layer_dims[i]) for i in range(self.depth)]

    @property
    def parameter_count(self) -> int:
        return sum(r * c for r, c in self.shapes)

    @property
    def is_linear(self) -> bool:
        return all(a.is_linear for a in self.activations)

    def lipschitz_product(self) -> float:
        """``prod M(i) * prod L(i)``: a global Lipschitz constant of the class."""
        return math.prod(self.norm_bounds) * math.prod(
            a.lipschitz_constant for a in self.activations
        )

    def require_discriminator(self):
        if self.output_dim != 1:
            raise ShapeError(
                f"a discriminator must end in dimension 1, got {self.output_dim}"
            )

    def to_dict(self) -> dict:
        return {
            "layer_dims": list(self.layer_dims),
            "norm_bounds": list(self.norm_bounds),
            "activations": [a.name for a in self.activations],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(
            tuple(d["layer_dims"]),
            tuple(d["norm_bounds"]),
            tuple(d.get("activations", ())),
        )


def compose_specs(fspec: NetworkSpec, gspec: NetworkSpec) -> NetworkSpec:
    """Spec of ``z -> f_w(g_theta(z))`` as one network, generator layers first.

    The junction ``W_1 Theta_s`` carries an identity activation, so the
    matrix list is ``theta + w`` while the merged product counts as
    ``d + s - 1`` layers.
    """
    if gspec.output_dim != fspec.input_dim:
        raise ShapeError(
            f"generator outputs dimension {gspec.output_dim} but discriminator "
            f"expects {fspec.input_dim}"
        )
    return NetworkSpec(
        gspec.layer_dims + fspec.layer_dims[1:],
        gspec.norm_bounds + fspec.norm_bounds,
        gspec.activations + (IDENTITY,) + fspec.activations,
    )


class WeightAssignment:
    """A point of the constraint set: one read-only matrix per layer."""

    __slots__ = ("matrices",)

    def __init__(self, matrices: Sequence):
        self.matrices = tuple(linalg.as_matrix(M) for M in matrices)

    def __len__(self):
        return len(self.matrices)

    def __iter__(self):
        return iter(self.matrices)

    def __getitem__(self, i):
        return self.matrices[i]

    def __eq__(self, other):
        if not isinstance(other, WeightAssignment) or len(self) != len(other):
            return NotImplemented
        return all(
            a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip(self.matrices, other.matrices)
        )

    def __hash__(self):
        return hash(tuple((M.shape, M.tobytes()) for M in self.matrices))

    def __repr__(self):
        return f"WeightAssignment({[M.tolist() for M in self.matrices]})"

    def validate(self, spec: NetworkSpec) -> "WeightAssignment":
        if len(self.matrices) != spec.depth:
            raise ShapeError(f"spec has {spec.depth} layers, weights have {len(self.matrices)}")
        for i, (M, shape, bound) in enumerate(zip(self.matrices, spec.shapes, spec.norm_bounds)):
            if M.shape != shape:
                raise ShapeError(f"layer {i + 1}: expected shape {shape}, got {M.shape}")
            norm = linalg.frobenius_norm(M)
            if norm > bound * (1.0 + NORM_RTOL):
                raise ConstraintError(
                    f"layer {i + 1}: Frobenius norm {norm:.6g} exceeds bound {bound:.6g}"
                )
        return self

    def nonzero_count(self) -> int:
        return sum(linalg.nonzero_count(M) for M in self.matrices)

    def to_list(self) -> list:
        return [M.tolist() for M in self.matrices]

    @classmethod
    def from_list(cls, mats) -> "WeightAssignment":
        return cls([np.array(M, dtype=np.float64) for M in mats])

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> "WeightAssignment":
        return cls([np.zeros(s) for s in spec.shapes])

    def batched(self) -> list[np.ndarray]:
        """Matrices with a leading batch axis of size one."""
        return [M[None] for M in self.matrices]


@dataclass(frozen=True)
class MeasuringFunction:
    """Monotone increasing transform applied to discriminator outputs.

    ``identity``: x on all reals. ``log``: log x on (0, inf).
    ``shifted_log``: log(delta + (1 - delta) x) on [0, inf).
    """

    kind: str = "identity"
    delta: float | None = None

    KINDS = ("identity", "log", "shifted_log")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown measuring function {self.kind!r}")
        if self.kind == "shifted_log":
            if self.delta is None or not 0.0 < self.delta < 1.0:
                raise ValueError(f"shifted_log needs delta in (0, 1), got {self.delta}")
        elif self.delta is not None:
            raise ValueError(f"{self.kind} takes no delta")

    @property
    def is_identity(self) -> bool:
        return self.kind == "identity"

    @property
    def domain(self) -> tuple[float, float, bool]:
        """``(lower, upper, lower_closed)``; upper is always +inf and open."""
        if self.kind == "identity":
            return (-math.inf, math.inf, False)
        if self.kind == "log":
            return (0.0, math.inf, False)
        return (0.0, math.inf, True)

    def domain_str(self) -> str:
        lo, hi, closed = self.domain
        return f"{'[' if closed else '('}{lo:g}, {hi:g})"

    @property
    def lipschitz_constant(self) -> float:
        if self.kind == "identity":
            return 1.0
        if self.kind == "log":
            return math.inf
        return (1.0 - self.delta) / self.delta

    @property
    def range_bound(self) -> float:
        # unbounded on every declared domain; see range_bound_on for intervals
        return math.inf

    def contains(self, x) -> np.ndarray:
        lo, _, closed = self.domain
        x = np.asarray(x, dtype=np.float64)
        return (x >= lo) if closed else (x > lo)

    def covers(self, lo: float, hi: float) -> bool:
        return bool(self.contains(lo)) and bool(self.contains(hi)) and hi < math.inf

    def check(self, x):
        x = np.asarray(x, dtype=np.float64)
        ok = self.contains(x)
        if not np.all(ok):
            bad = float(x[~ok].flat[0]) if x.ndim else float(x)
            raise DomainError(
                f"{self.kind} measuring function undefined at {bad!r}; domain is {self.domain_str()}"
            )
        return x

    def __call__(self, x):
        x = self.check(x)
        if self.kind == "identity":
            return x
        if self.kind == "log":
            return np.log(x)
        return np.log(self.delta + (1.0 - self.delta) * x)

    def derivative(self, x):
        x = self.check(x)
        if self.kind == "identity":
            return np.ones_like(x)
        if self.kind == "log":
            return 1.0 / x
        return (1.0 - self.delta) / (self.delta + (1.0 - self.delta) * x)

    def range_bound_on(self, lo: float, hi: float) -> float:
        """``max |phi|`` over ``[lo, hi]``, valid because phi is monotone."""
        return float(max(abs(self(lo)), abs(self(hi))))

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.delta is not None:
            d["delta"] = self.delta
        return d

    @classmethod
    def from_dict(cls, d) -> "MeasuringFunction":
        if isinstance(d, str):
            return cls(d)
        return cls(d["kind"], d.get("delta"))


# ---------------------------------------------------------------- single point


def _forward(spec: NetworkSpec, weights: WeightAssignment, x) -> np.ndarray:
    weights.validate(spec)
    h = linalg.as_vector(x)
    if h.shape[0] != spec.input_dim:
        raise ShapeError(f"input has length {h.shape[0]}, network expects {spec.input_dim}")
    for i, W in enumerate(weights):
        h = linalg.matvec(W, h)
        if i < spec.depth - 1:
            h = spec.activations[i](h)
    return h


def forward_discriminator(spec: NetworkSpec, w: WeightAssignment, x) -> float:
    spec.require_discriminator()
    return float(_forward(spec, w, x)[0])


def forward_generator(spec: NetworkSpec, theta: WeightAssignment, z) -> np.ndarray:
    return _forward(spec, theta, z)


def forward_composed(fspec, w, gspec, theta, z) -> float:
    if gspec.output_dim != fspec.input_dim:
        raise ShapeError(
            f"generator outputs dimension {gspec.output_dim} but discriminator "
            f"expects {fspec.input_dim}"
        )
    return forward_discriminator(fspec, w, forward_generator(gspec, theta, z))


def apply_measuring(phi: MeasuringFunction, role: str, raw):
    """``phi(1 - raw)`` for role ``h_u``, ``phi(raw)`` for role ``f1``."""
    if role == "h_u":
        return phi(1.0 - np.asarray(raw, dtype=np.float64))
    if role == "f1":
        return phi(raw)
    raise ValueError(f"role must be 'h_u' or 'f1', got {role!r}")


# ------------------------------------------------------------------- sampling


def sample_weights(spec: NetworkSpec, rng: np.random.Generator) -> WeightAssignment:
    """Draw a point of the constraint set.

    Each matrix gets i.i.d. U(-1, 1) entries, is normalized, and is then placed
    at radius ``bound * U(0, 1)`` so every radius in the ball is reachable.
    """
    return WeightAssignment([M[0] for M in sample_weights_batch(spec, rng, 1)])


def sample_weights_batch(spec: NetworkSpec, rng: np.random.Generator, size: int) -> list[np.ndarray]:
    mats = []
    for shape, bound in zip(spec.shapes, spec.norm_bounds):
        A = rng.uniform(-1.0, 1.0, size=(size,) + shape)
        norms = np.sqrt(np.sum(A * A, axis=(1, 2), keepdims=True))
        norms = np.where(norms > 0, norms, 1.0)
        radius = bound * rng.uniform(0.0, 1.0, size=(size, 1, 1))
        mats.append(A / norms * radius)
    return mats


# -------------------------------------------------------------------- batched


def batch_forward(mats: Sequence[np.ndarray], acts: Sequence[Activation], x: np.ndarray) -> np.ndarray:
    """Evaluate ``B`` networks on ``N`` points.

    ``mats[i]`` has shape ``(B, out, in)``; ``x`` is ``(N, in)`` shared by all
    networks or ``(B, N, in)``. Returns ``(B, N, out_last)``.
    """
    h = x
    last = len(mats) - 1
    for i, W in enumerate(mats):
        if h.ndim == 2:
            h = np.einsum("ni,boi->bno", h, W)
        else:
            h = np.einsum("bni,boi->bno", h, W)
        if i < last:
            h = acts[i](h)
    return h


def forward_backward(mats, acts, x, coef):
    """Values and weight gradients of ``sum_n coef[b, n] * f_b(x_n)``.

    ``f_b`` must have scalar output. Returns ``(values (B, N), grads)`` with
    ``grads[i]`` shaped like ``mats[i]``.
    """
    B = mats[0].shape[0]
    a = np.broadcast_to(x, (B,) + x.shape) if x.ndim == 2 else x
    inputs, pre = [], []
    last = len(mats) - 1
    h = a
    for i, W in enumerate(mats):
        inputs.append(h)
        z = np.einsum("bni,boi->bno", h, W)
        if i < last:
            pre.append(z)
            h = acts[i](z)
        else:
            h = z
    values = h[..., 0]
    delta = coef[..., None]
    grads = [None] * len(mats)
    for i in range(last, -1, -1):
        grads[i] = np.einsum("bno,bni->boi", delta, inputs[i])
        if i > 0:
            delta = np.einsum("bno,boi->bni", delta, mats[i]) * acts[i - 1].derivative(pre[i - 1])
    return values, grads
