import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ganbound.bounds import compute_bound_report, vc_scaling
from ganbound.errors import DomainError
from ganbound.nets import MeasuringFunction, NetworkSpec, WeightAssignment, forward_discriminator
from ganbound.verification import envelope_suite, lipschitz_suite

IDENTITY = MeasuringFunction("identity")


def test_report_two_layer_example():
    f = NetworkSpec((1, 2, 1), (2.0, 3.0), ("relu",))
    g = NetworkSpec((1, 1), (2.0,))
    rep = compute_bound_report(f, g, IDENTITY, 1.0, 1.0)
    assert (rep.U_w, rep.K1, rep.K3) == (6.0, 6.0, 6.0)
    assert (rep.U_v, rep.K2, rep.K4) == (2.0, 12.0, 13.0)
    assert (rep.d, rep.s) == (2, 1)


def test_report_single_layer_example():
    rep = compute_bound_report(NetworkSpec((1, 1), (1.0,)), NetworkSpec((1, 1), (1.0,)), IDENTITY, 1.0, 1.0)
    assert (rep.U_w, rep.K1, rep.K3) == (1.0, 1.0, 1.0)


def test_log_rejected_with_interval_and_domain():
    f = NetworkSpec((1, 2, 1), (2.0, 3.0), ("relu",))
    g = NetworkSpec((1, 1), (2.0,))
    with pytest.raises(DomainError, match=r"\[-6, 6\].*\(0, inf\)"):
        compute_bound_report(f, g, MeasuringFunction("log"), 1.0, 1.0)
    with pytest.raises(DomainError):
        compute_bound_report(f, g, MeasuringFunction("shifted_log", 0.5), 1.0, 1.0)


@pytest.mark.parametrize("bx,bz", [(0.0, 1.0), (1.0, -1.0)])
def test_nonpositive_radii(bx, bz):
    s = NetworkSpec((1, 1), (1.0,))
    with pytest.raises(ValueError):
        compute_bound_report(s, s, IDENTITY, bx, bz)


def test_vc_scaling_examples():
    assert vc_scaling(2, 9) == pytest.approx(2 * 9 * math.log(9))
    assert vc_scaling(2, 9) == pytest.approx(39.5501, abs=1e-4)
    assert vc_scaling(1, 1) == 1.0
    with pytest.raises(ValueError):
        vc_scaling(0, 3)
    with pytest.raises(ValueError):
        vc_scaling(2, 0)


def test_composition_bookkeeping():
    f = NetworkSpec((2, 3, 1), (1.0, 1.0), ("relu",))
    g = NetworkSpec((1, 2, 2), (1.0, 1.0), ("relu",))
    rep = compute_bound_report(f, g, IDENTITY, 1.0, 1.0)
    assert rep.weight_count_f == 9 and rep.weight_count_g == 6
    assert rep.vc_fg == vc_scaling(2 + 2 - 1, 15)
    assert rep.vc_f == vc_scaling(2, 9)


def test_nonzero_counts_from_weights():
    f = NetworkSpec((2, 1), (1.0,))
    g = NetworkSpec((1, 2), (1.0,))
    rep = compute_bound_report(f, g, IDENTITY, 1.0, 1.0, WeightAssignment([[[0.5, 0.0]]]),
                               WeightAssignment([[[0.0], [0.0]]]))
    assert rep.weight_count_f == 1 and rep.weight_count_g == 0
    assert rep.vc_fg == vc_scaling(1, 1)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.1, 5), min_size=2, max_size=2), st.floats(0.1, 5), st.floats(0.1, 5),
       st.integers(0, 1), st.floats(1.0, 3.0))
def test_constants_monotone(mw, mt, b, which, factor):
    f = NetworkSpec((1, 2, 1), tuple(mw), ("relu",))
    g = NetworkSpec((1, 1), (mt,))
    base = compute_bound_report(f, g, IDENTITY, b, b)
    mw2 = list(mw)
    mw2[which] *= factor
    up_w = compute_bound_report(NetworkSpec((1, 2, 1), tuple(mw2), ("relu",)), g, IDENTITY, b, b)
    up_b = compute_bound_report(f, g, IDENTITY, b * factor, b)
    up_t = compute_bound_report(f, NetworkSpec((1, 1), (mt * factor,)), IDENTITY, b, b * factor)
    assert up_w.K1 >= base.K1 and up_w.K3 >= base.K3
    assert up_b.K1 >= base.K1 and up_b.K3 >= base.K3
    assert up_t.K2 >= base.K2 and up_t.K4 >= base.K4


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 20), st.integers(2, 10_000))
def test_vc_scaling_increasing(layers, w):
    assert vc_scaling(layers + 1, w) > vc_scaling(layers, w)
    assert vc_scaling(layers, w + 1) > vc_scaling(layers, w)


def test_envelope_and_lipschitz_suites_small():
    assert envelope_suite(np.random.default_rng(1), specs=5, draws=2000)["passed"]
    assert lipschitz_suite(np.random.default_rng(2), specs=5, draws=2000)["passed"]


def test_envelopes_tight_for_aligned_weights():
    # a rank-one chain aligned with x attains K1 exactly
    f = NetworkSpec((2, 2, 1), (2.0, 3.0), ("relu",))
    rep = compute_bound_report(f, NetworkSpec((1, 2), (1.0,)), IDENTITY, 1.5, 1.0)
    u = np.array([1.0, 0.0])
    W1 = 2.0 * np.outer(u, u)
    W2 = 3.0 * u[None, :]
    val = forward_discriminator(f, WeightAssignment([W1, W2]), 1.5 * u)
    assert val == pytest.approx(rep.K1, rel=1e-15)
