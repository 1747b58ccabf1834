import numpy as np
import pytest

from ganbound.nets import forward_composed, forward_discriminator


def reference_objective(fspec, gspec, theta, w, phi, x, z, abs_mode=True):
    """Point-by-point evaluation of the two-sample objective, no batching or compression."""
    fx = np.array([forward_discriminator(fspec, w, xi) for xi in np.atleast_2d(x)])
    fg = np.array([forward_composed(fspec, w, gspec, theta, zi) for zi in np.atleast_2d(z)])
    if not abs_mode:
        return fg.mean() - fx.mean()
    bracket = np.mean(phi(1.0 - fg)) + np.mean(phi(fx))
    return abs(bracket) - 2.0 * float(phi(0.5))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
