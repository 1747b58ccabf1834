import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ganbound.errors import ConstraintError, DomainError, ShapeError
from ganbound.linalg import frobenius_norm
from ganbound.nets import (
    Activation,
    MeasuringFunction,
    NetworkSpec,
    WeightAssignment,
    apply_measuring,
    batch_forward,
    compose_specs,
    forward_backward,
    forward_composed,
    forward_discriminator,
    forward_generator,
    sample_weights,
)
from ganbound.verification import random_spec

W = WeightAssignment


def test_discriminator_examples():
    one = NetworkSpec((2, 1), (1.0,))
    assert forward_discriminator(one, W([[[0.5, -0.5]]]), [1.0, 1.0]) == 0.0
    two = NetworkSpec((1, 2, 1), (2.0, 2.0), ("relu",))
    assert forward_discriminator(two, W([[[1.0], [-1.0]], [[1.0, 1.0]]]), [2.0]) == 2.0
    assert forward_discriminator(two, W.zeros(two), [3.7]) == 0.0


def test_generator_examples():
    ident = NetworkSpec((2, 2), (2.0,))
    assert forward_generator(ident, W([np.eye(2)]), [0.3, -0.3]).tolist() == [0.3, -0.3]
    g = NetworkSpec((1, 1, 2), (2.0, 2.0), ("relu",))
    theta = W([[[2.0]], [[1.0], [-1.0]]])
    assert forward_generator(g, theta, [1.0]).tolist() == [2.0, -2.0]
    assert forward_generator(g, W.zeros(g), [1.0]).tolist() == [0.0, 0.0]


def test_composed_examples():
    g = NetworkSpec((1, 1, 2), (2.0, 2.0), ("relu",))
    theta = W([[[2.0]], [[1.0], [-1.0]]])
    f = NetworkSpec((2, 2, 1), (2.0, 2.0), ("relu",))
    w = W([np.eye(2), [[1.0, 1.0]]])
    assert forward_composed(f, w, g, theta, [1.0]) == 2.0
    assert forward_composed(f, W.zeros(f), g, theta, [0.4]) == 0.0
    ident = NetworkSpec((2, 2), (2.0,))
    assert forward_composed(f, w, ident, W([np.eye(2)]), [0.5, -1.0]) == forward_discriminator(f, w, [0.5, -1.0])


def test_composed_dimension_mismatch():
    f = NetworkSpec((2, 1), (1.0,))
    g = NetworkSpec((1, 3), (1.0,))
    with pytest.raises(ShapeError):
        forward_composed(f, W.zeros(f), g, W.zeros(g), [1.0])
    with pytest.raises(ShapeError):
        compose_specs(f, g)


def test_spec_validation():
    with pytest.raises(ShapeError):
        NetworkSpec((1, 2, 1), (1.0,), ())
    with pytest.raises(ShapeError):
        NetworkSpec((1, 2, 1), (1.0, 1.0), ())
    with pytest.raises(ValueError):
        NetworkSpec((1, 1), (0.0,))
    with pytest.raises(ValueError):
        NetworkSpec((1, 2, 1), (1.0, 1.0), ("tanh",))
    with pytest.raises(ShapeError):
        NetworkSpec((1, 2), (1.0,)).require_discriminator()


def test_weight_constraints_rejected():
    f = NetworkSpec((2, 1), (1.0,))
    with pytest.raises(ConstraintError):
        forward_discriminator(f, W([[[1.0, 1.0]]]), [0.0, 0.0])
    with pytest.raises(ShapeError):
        forward_discriminator(f, W([[[1.0], [0.0]]]), [0.0, 0.0])
    with pytest.raises(ShapeError):
        forward_discriminator(f, W([[[0.5, 0.5]]]), [0.0, 0.0, 1.0])


def test_spec_roundtrip():
    spec = NetworkSpec((3, 2, 2, 1), (1.0, 2.0, 0.5), ("relu", Activation("leaky_relu", 0.2)))
    assert NetworkSpec.from_dict(spec.to_dict()) == spec
    assert spec.depth == 3 and spec.parameter_count == 6 + 4 + 2


def test_compose_specs_layers():
    f = NetworkSpec((2, 3, 1), (1.0, 1.0), ("relu",))
    g = NetworkSpec((1, 4, 2), (1.0, 1.0), ("relu",))
    c = compose_specs(f, g)
    assert c.depth == f.depth + g.depth
    assert c.parameter_count == f.parameter_count + g.parameter_count


def test_activations():
    assert Activation("relu")(np.array([-1.0, 2.0])).tolist() == [0.0, 2.0]
    assert Activation("leaky_relu", 0.1)(np.array([-1.0, 2.0])).tolist() == [-0.1, 2.0]
    assert Activation("relu").derivative(np.array([0.0])).tolist() == [0.0]
    assert Activation.from_name("leaky_relu(0.3)") == Activation("leaky_relu", 0.3)
    with pytest.raises(ValueError):
        Activation("leaky_relu", 1.5)


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(["relu", "leaky_relu", "identity"]), st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_activation_lipschitz(kind, a, b):
    act = Activation(kind, 0.05) if kind == "leaky_relu" else Activation(kind)
    lhs = abs(float(act(np.float64(a))) - float(act(np.float64(b))))
    assert lhs <= act.lipschitz_constant * abs(a - b) * (1 + 1e-12)


def test_apply_measuring_examples():
    assert apply_measuring(MeasuringFunction("identity"), "f1", 0.3) == 0.3
    assert apply_measuring(MeasuringFunction("log"), "h_u", 0.0) == 0.0
    assert apply_measuring(MeasuringFunction("shifted_log", 0.5), "f1", 1.0) == 0.0


def test_apply_measuring_domain_errors():
    with pytest.raises(DomainError, match="-0.5"):
        apply_measuring(MeasuringFunction("log"), "f1", -0.5)
    with pytest.raises(DomainError):
        apply_measuring(MeasuringFunction("log"), "h_u", 1.0)
    with pytest.raises(DomainError):
        apply_measuring(MeasuringFunction("shifted_log", 0.2), "f1", -1e-9)
    assert apply_measuring(MeasuringFunction("shifted_log", 0.2), "f1", 0.0) == pytest.approx(math.log(0.2))
    with pytest.raises(ValueError):
        apply_measuring(MeasuringFunction(), "other", 0.0)


def test_measuring_constants():
    assert MeasuringFunction("shifted_log", 0.25).lipschitz_constant == pytest.approx(3.0)
    assert MeasuringFunction("log").lipschitz_constant == math.inf
    with pytest.raises(ValueError):
        MeasuringFunction("shifted_log", 1.0)


@settings(max_examples=300, deadline=None)
@given(st.sampled_from([("identity", None), ("log", None), ("shifted_log", 0.3)]),
       st.floats(1e-6, 1e3), st.floats(1e-6, 1e3))
def test_measuring_monotone(kind, a, b):
    phi = MeasuringFunction(*kind)
    lo, hi = min(a, b), max(a, b)
    assert phi(lo) <= phi(hi)
    for role in ("f1",):
        assert apply_measuring(phi, role, lo) <= apply_measuring(phi, role, hi)


def test_sample_weights_in_ball_and_deterministic():
    rng = np.random.default_rng(0)
    for _ in range(10_000 // 50):
        spec = random_spec(rng)
        for _ in range(50):
            w = sample_weights(spec, rng)
            w.validate(spec)
    spec = NetworkSpec((3, 2, 1), (1.0, 2.0), ("relu",))
    a = sample_weights(spec, np.random.default_rng(9))
    b = sample_weights(spec, np.random.default_rng(9))
    assert a == b
    tiny = NetworkSpec((3, 2, 1), (1e-12, 1e-12), ("relu",))
    w = sample_weights(tiny, np.random.default_rng(1))
    assert all(frobenius_norm(M) <= 1e-12 for M in w)


def test_sample_weights_reach_interior_and_boundary():
    spec = NetworkSpec((2, 1), (1.0,))
    rng = np.random.default_rng(4)
    radii = np.array([frobenius_norm(sample_weights(spec, rng)[0]) for _ in range(2000)])
    assert radii.min() < 0.05 and radii.max() > 0.95


def test_batch_forward_matches_pointwise(rng):
    for _ in range(20):
        spec = random_spec(rng, output_dim=1)
        ws = [sample_weights(spec, rng) for _ in range(4)]
        x = rng.normal(size=(5, spec.input_dim))
        mats = [np.stack([w[i] for w in ws]) for i in range(spec.depth)]
        out = batch_forward(mats, spec.activations, x)[..., 0]
        ref = np.array([[forward_discriminator(spec, w, xi) for xi in x] for w in ws])
        assert np.allclose(out, ref, rtol=1e-12, atol=1e-14)


def test_forward_backward_gradient(rng):
    for _ in range(20):
        spec = random_spec(rng, output_dim=1)
        w = sample_weights(spec, rng)
        x = rng.normal(size=(6, spec.input_dim))
        c = rng.normal(size=6)
        _, grads = forward_backward(w.batched(), spec.activations, x, c[None])

        def value(mats):
            return float(batch_forward(mats, spec.activations, x)[0, :, 0] @ c)

        h = 1e-6
        for i, M in enumerate(w.batched()):
            for idx in np.ndindex(M.shape[1:]):
                plus = [m.copy() for m in w.batched()]
                minus = [m.copy() for m in w.batched()]
                plus[i][(0,) + idx] += h
                minus[i][(0,) + idx] -= h
                fd = (value(plus) - value(minus)) / (2 * h)
                # kinks make finite differences unreliable only on measure-zero sets
                assert grads[i][(0,) + idx] == pytest.approx(fd, rel=1e-4, abs=1e-6)
