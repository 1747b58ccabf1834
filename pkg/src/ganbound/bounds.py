"""Closed-form constants of the discriminator/generator classes.

Envelopes ``K1..K4``, the Lipschitz products ``U_w`` and ``U_v``, and the
piecewise-linear VC-dimension scaling ``L * W * log W``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from .errors import DomainError
from .nets import MeasuringFunction, NetworkSpec, WeightAssignment


@dataclass(frozen=True)
class BoundReport:
    U_w: float
    U_v: float
    K1: float
    K2: float
    K3: float
    K4: float
    d: int
    s: int
    weight_count_f: int
    weight_count_g: int
    vc_f: float
    vc_fg: float
    B_X: float
    B_Z: float
    phi: str = "identity"

    def to_dict(self) -> dict:
        return asdict(self)


def vc_scaling(layers: int, nonzero_weights: int) -> float:
    """``layers * W * ln W`` (``layers * W`` when ``W < 2``).

    This is the growth law of the VC-dimension bound for piecewise-linear
    networks up to its unknown universal constant, not a dimension.
    """
    if layers < 1 or nonzero_weights < 1:
        raise ValueError(
            f"layers and nonzero_weights must be >= 1, got {layers}, {nonzero_weights}"
        )
    W = nonzero_weights
    if W < 2:
        return float(layers * W)
    return float(layers * W * math.log(W))


def _weight_count(spec: NetworkSpec, weights: WeightAssignment | None) -> int:
    if weights is None:
        return spec.parameter_count
    return weights.validate(spec).nonzero_count()


def compute_bound_report(
    fspec: NetworkSpec,
    gspec: NetworkSpec,
    phi: MeasuringFunction,
    B_X: float,
    B_Z: float,
    weights_f: WeightAssignment | None = None,
    weights_g: WeightAssignment | None = None,
) -> BoundReport:
    if not (B_X > 0 and B_Z > 0):
        raise ValueError(f"input radii must be positive, got B_X={B_X}, B_Z={B_Z}")
    fspec.require_discriminator()
    if gspec.output_dim != fspec.input_dim:
        raise ValueError(
            f"generator output dimension {gspec.output_dim} does not match "
            f"discriminator input dimension {fspec.input_dim}"
        )
    U_w = fspec.lipschitz_product()
    U_v = gspec.lipschitz_product()
    K1 = U_w * B_X
    K2 = U_w * U_v * B_Z
    for lo, hi, label in ((-K1, K1, "K3"), (1.0 - K2, 1.0 + K2, "K4")):
        if not phi.covers(lo, hi):
            raise DomainError(
                f"{label} needs {phi.kind} on [{lo:g}, {hi:g}], outside its domain {phi.domain_str()}"
            )
    # max of the endpoint magnitudes is the envelope because phi is monotone
    K3 = phi.range_bound_on(-K1, K1)
    K4 = phi.range_bound_on(1.0 - K2, 1.0 + K2)
    wf = _weight_count(fspec, weights_f)
    wg = _weight_count(gspec, weights_g)
    d, s = fspec.depth, gspec.depth
    return BoundReport(
        U_w=U_w,
        U_v=U_v,
        K1=K1,
        K2=K2,
        K3=K3,
        K4=K4,
        d=d,
        s=s,
        weight_count_f=wf,
        weight_count_g=wg,
        vc_f=vc_scaling(d, max(wf, 1)),
        vc_fg=vc_scaling(d + s - 1, max(wf + wg, 1)),
        B_X=float(B_X),
        B_Z=float(B_Z),
        phi=phi.kind if phi.delta is None else f"{phi.kind}({phi.delta!r})",
    )
