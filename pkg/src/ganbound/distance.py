"""Measuring-function objectives and their sup over w / inf over theta.

For generator weights ``theta`` and discriminator weights ``w`` the bracket is

    B(theta, w) = E_z phi(1 - f_w(g_theta(z))) + E_x phi(f_w(x))

and the objective is ``|B| - 2 phi(1/2)`` (``abs_mode=True``). With the
identity measuring function the signed convention
``E f_w(g_theta(z)) - E f_w(x)`` is available as ``abs_mode=False``. The
expectations are taken under :class:`~ganbound.distributions.Measure` objects,
so the empirical, half-empirical and population variants differ only in the
measures passed in.

Two search methods are provided: ``grid`` enumerates a tensor grid over
every scalar weight (exact on the grid, capped in size) and ``pgd`` runs
multi-restart projected subgradient ascent.
"""

from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .distributions import (
    DistributionSpec,
    Measure,
    SampleSet,
    draw_samples,
    population_measure,
    push,
)
from .errors import NumericalError, OracleCapError, ShapeError
from .linalg import project_frobenius_ball_batch
from .nets import (
    MeasuringFunction,
    NetworkSpec,
    WeightAssignment,
    batch_forward,
    compose_specs,
    forward_backward,
    sample_weights_batch,
)

VARIANTS = ("empirical_mn", "half_empirical", "population")
CHUNK_ELEMS = 1 << 21
CACHE_ELEMS = 1 << 25


@dataclass(frozen=True)
class SearchOptions:
    grid_points: int = 201
    theta_grid_points: int = 201
    grid_cap: int = 3
    restarts: int = 20
    iterations: int = 500
    step: float = 0.1
    decay: float = 0.99
    inf_iterations: int = 60
    inf_restarts: int = 4
    inf_inner_iterations: int = 150
    seed: int = 0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class ObjectiveData:
    """Measures for the target side (``x``) and the latent side (``z``)."""

    x: Measure
    z: Measure
    variant: str = "empirical_mn"

    @property
    def n_pop(self) -> int | None:
        return self.x.meta.get("n_pop") or self.z.meta.get("n_pop")


@dataclass
class SupResult:
    value: float
    argmax_weights: WeightAssignment
    method: str
    diagnostics: dict = field(default_factory=dict)


@dataclass
class InfResult:
    theta: WeightAssignment
    value: float
    method: str
    index: int | None = None
    curve: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)


# ------------------------------------------------------------------ data


def make_data(variant: str, fspec: NetworkSpec, gspec: NetworkSpec, phi: MeasuringFunction, *,
              samples: SampleSet | None = None, target: DistributionSpec | None = None,
              base: DistributionSpec | None = None, n_pop: int | None = None,
              rng: np.random.Generator | None = None, closed_form: bool = True,
              compress: bool = True) -> ObjectiveData:
    """Build the measure pair for one objective variant.

    ``empirical_mn`` uses ``samples`` for both sides; ``half_empirical`` uses
    ``samples.x`` and the population law of ``base``; ``population`` uses
    ``target`` and ``base``, in closed form when the measuring function is the
    identity and a closed form exists, otherwise by plug-in averages over
    ``n_pop`` fresh draws from ``rng``.
    """
    linear = phi.is_identity
    x_lin = fspec.is_linear
    z_lin = fspec.is_linear and gspec.is_linear
    if variant == "empirical_mn":
        x, z = Measure.empirical(samples.x), Measure.empirical(samples.z)
    elif variant == "half_empirical":
        x = Measure.empirical(samples.x)
        z = population_measure(base, linear=linear, net_linear=z_lin, n_pop=n_pop, rng=rng,
                               closed_form=closed_form)
    elif variant == "population":
        x = z = None
        if linear and closed_form:
            try:
                x = population_measure(target, linear=True, net_linear=x_lin, n_pop=None, rng=None)
                z = population_measure(base, linear=True, net_linear=z_lin, n_pop=None, rng=None)
            except ValueError:
                x = z = None
        if x is None:
            if n_pop is None or rng is None:
                raise ValueError("population variant needs n_pop and a random stream for plug-in")
            s = draw_samples(target, base, n_pop, n_pop, rng)
            x, z = Measure.empirical(s.x, "plug_in"), Measure.empirical(s.z, "plug_in")
            x.meta["n_pop"] = z.meta["n_pop"] = n_pop
    else:
        raise ValueError(f"variant must be one of {VARIANTS}, got {variant!r}")
    if linear and compress:
        x, z = x.compress(x_lin), z.compress(z_lin)
    if x.dimension != fspec.input_dim:
        raise ShapeError(f"target samples have dimension {x.dimension}, discriminator expects {fspec.input_dim}")
    if z.dimension != gspec.input_dim:
        raise ShapeError(f"latent samples have dimension {z.dimension}, generator expects {gspec.input_dim}")
    return ObjectiveData(x, z, variant)


# ------------------------------------------------------------------ grids


def _radial_cube_to_ball(cube: np.ndarray, bound: float) -> np.ndarray:
    """Map points of [-1, 1]^k onto the radius-``bound`` ball along rays."""
    inf = np.max(np.abs(cube), axis=-1, keepdims=True)
    two = np.sqrt(np.sum(cube * cube, axis=-1, keepdims=True))
    scale = np.where(two > 0, inf / np.where(two > 0, two, 1.0), 0.0)
    return cube * scale * bound


@lru_cache(maxsize=32)
def parameter_grid(spec: NetworkSpec, points: int, cap: int = 3) -> tuple:
    """Tensor grid over all scalar weights of ``spec`` in row-major order.

    Returns one ``(G, rows, cols)`` array per layer, ``G = points ** P``.
    """
    P = spec.parameter_count
    if P > cap:
        raise OracleCapError(f"grid search over {P} parameters exceeds the cap of {cap}")
    if points < 2:
        raise ValueError("a grid needs at least two points per parameter")
    axis = np.linspace(-1.0, 1.0, points)
    cube = np.stack([g.ravel() for g in np.meshgrid(*([axis] * P), indexing="ij")], axis=-1)
    mats, k = [], 0
    for shape, bound in zip(spec.shapes, spec.norm_bounds):
        size = shape[0] * shape[1]
        block = _radial_cube_to_ball(cube[:, k:k + size], bound)
        M = np.ascontiguousarray(block.reshape((-1,) + shape))
        M.setflags(write=False)
        mats.append(M)
        k += size
    return tuple(mats)


def grid_cell_slack(spec: NetworkSpec, points: int, radius: float) -> float:
    """Lipschitz slack of a grid cell: how far an off-grid optimum can beat
    the grid maximum of ``w -> E f_w`` over inputs of norm at most ``radius``.

    ``|f_w(x) - f_w'(x)| <= sum_i (U_w / M_i) ||W_i - W_i'|| ||x||`` and a cell
    of the radially mapped grid has Frobenius diameter at most
    ``2 k_i M_i / (points - 1)`` in a ``k_i``-entry layer.
    """
    U = spec.lipschitz_product()
    total = 0.0
    for (r, c), bound in zip(spec.shapes, spec.norm_bounds):
        k = r * c
        total += (U / bound) * 2.0 * k * bound / (points - 1)
    return total * radius


def _weights_at(mats, idx: int) -> WeightAssignment:
    return WeightAssignment([M[idx] for M in mats])


def _stack(weights: WeightAssignment | list) -> list[np.ndarray]:
    if isinstance(weights, WeightAssignment):
        return weights.batched()
    return [np.asarray(M) for M in weights]


# ------------------------------------------------------------- evaluation

_cache: OrderedDict = OrderedDict()
_cache_lock = threading.Lock()


def _cached(key, compute):
    with _cache_lock:
        if key in _cache:
            _cache.move_to_end(key)
            return _cache[key]
    value = compute()
    if value.size <= CACHE_ELEMS:
        value.setflags(write=False)
        with _cache_lock:
            _cache[key] = value
            while len(_cache) > 24:
                _cache.popitem(last=False)
    return value


def clear_cache():
    with _cache_lock:
        _cache.clear()


def _disc_values(fspec: NetworkSpec, wmats, pts: np.ndarray) -> np.ndarray:
    """``f_w(p)`` for every grid/batch weight and point: ``(Wn, K)``."""
    Wn, K = wmats[0].shape[0], pts.shape[0]
    width = max(fspec.layer_dims)
    chunk = max(1, CHUNK_ELEMS // max(1, K * width))
    out = np.empty((Wn, K))
    for s in range(0, Wn, chunk):
        out[s:s + chunk] = batch_forward([M[s:s + chunk] for M in wmats], fspec.activations, pts)[..., 0]
    return out


def _gen_points(gspec: NetworkSpec, tmats, zpts: np.ndarray) -> np.ndarray:
    """Generator outputs ``(T, K, p0)`` for every theta."""
    return batch_forward(tmats, gspec.activations, zpts)


def _key(arr: np.ndarray):
    return (arr.shape, arr.tobytes())


def _parts(fspec, gspec, phi, wmats, wkey, tmats, tkey, data: ObjectiveData):
    """Per-weight expectations ``(HX (Wn,), HG (T, Wn))``.

    Identity phi: ``HX = sum b f(x)`` and ``HG = sum a f(g(z))``.
    Otherwise: ``HX = sum b phi(f(x))`` and ``HG = sum a phi(1 - f(g(z)))``.
    """
    x, z = data.x, data.z
    Wn, T = wmats[0].shape[0], tmats[0].shape[0]
    G = _gen_points(gspec, tmats, z.points)
    Kz, p0 = G.shape[1], G.shape[2]
    identity = phi.is_identity
    if not identity and (x.linear_only or z.linear_only):
        raise ValueError("compressed measures only support the identity measuring function")

    def fx():
        return _disc_values(fspec, wmats, x.points)

    def fg():
        return _disc_values(fspec, wmats, G.reshape(T * Kz, p0)).reshape(Wn, T, Kz)

    small_x = Wn * x.points.shape[0] <= CACHE_ELEMS
    small_g = Wn * T * Kz <= CACHE_ELEMS
    if small_x:
        FX = _cached(("x", fspec, wkey, _key(x.points)), fx) if wkey is not None else fx()
        HX = FX @ x.weights if identity else phi(FX) @ x.weights
    if small_g:
        if wkey is not None and tkey is not None:
            FG = _cached(("g", fspec, wkey, gspec, tkey, _key(z.points)), fg)
        else:
            FG = fg()
        HG = (FG @ z.weights if identity else phi(1.0 - FG) @ z.weights).T
    if small_x and small_g:
        return HX, np.ascontiguousarray(HG)

    # chunked path for large grids: contract each chunk immediately
    width = max(fspec.layer_dims)
    chunk = max(1, CHUNK_ELEMS // max(1, (x.points.shape[0] + T * Kz) * width))
    HX = np.empty(Wn)
    HG = np.empty((T, Wn))
    flatG = G.reshape(T * Kz, p0)
    for s in range(0, Wn, chunk):
        sub = [M[s:s + chunk] for M in wmats]
        fX = batch_forward(sub, fspec.activations, x.points)[..., 0]
        fG = batch_forward(sub, fspec.activations, flatG)[..., 0].reshape(-1, T, Kz)
        if identity:
            HX[s:s + chunk] = fX @ x.weights
            HG[:, s:s + chunk] = (fG @ z.weights).T
        else:
            HX[s:s + chunk] = phi(fX) @ x.weights
            HG[:, s:s + chunk] = (phi(1.0 - fG) @ z.weights).T
    return HX, HG


def _combine(phi: MeasuringFunction, abs_mode: bool, HX, HG, z_mass: float) -> np.ndarray:
    if phi.is_identity:
        if abs_mode:
            return np.abs(z_mass - HG + HX) - 1.0
        return HG - HX
    if not abs_mode:
        raise ValueError("abs_mode off (signed difference) requires the identity measuring function")
    return np.abs(HG + HX) - 2.0 * float(phi(0.5))


def objective_table(fspec, gspec, phi, data: ObjectiveData, wmats, tmats, abs_mode=True,
                    wkey=None, tkey=None) -> np.ndarray:
    """Objective for every (theta, w) pair: shape ``(T, Wn)``."""
    HX, HG = _parts(fspec, gspec, phi, wmats, wkey, tmats, tkey, data)
    V = _combine(phi, abs_mode, HX, HG, data.z.mass)
    if not np.all(np.isfinite(V)):
        raise NumericalError("objective evaluated to a non-finite value")
    return V


def objective_at(fspec, gspec, theta: WeightAssignment, w: WeightAssignment,
                 phi: MeasuringFunction, data: ObjectiveData, abs_mode: bool = True) -> float:
    """Objective at one ``(theta, w)`` before taking the sup."""
    fspec.require_discriminator()
    theta.validate(gspec)
    w.validate(fspec)
    return float(objective_table(fspec, gspec, phi, data, w.batched(), theta.batched(), abs_mode)[0, 0])


# ------------------------------------------------------------------- pgd


def _value_and_grad(fspec, phi, abs_mode, mats, X: Measure, G: np.ndarray, z: Measure):
    """Objective and weight subgradients for a batch of discriminators, with
    the generator already applied (``G`` are generator outputs of ``z``)."""
    R = mats[0].shape[0]
    acts = fspec.activations
    bx = np.broadcast_to(X.weights, (R, X.weights.size))
    bz = np.broadcast_to(z.weights, (R, z.weights.size))
    if phi.is_identity:
        fX, gX = forward_backward(mats, acts, X.points, bx)
        fG, gG = forward_backward(mats, acts, G, bz)
        AX, AG = fX @ X.weights, fG @ z.weights
        if abs_mode:
            bracket = z.mass - AG + AX
            sgn = np.where(bracket >= 0, 1.0, -1.0)
            val = np.abs(bracket) - 1.0
            grads = [sgn[:, None, None] * (a - b) for a, b in zip(gX, gG)]
        else:
            val = AG - AX
            grads = [b - a for a, b in zip(gX, gG)]
        return val, grads
    if not abs_mode:
        raise ValueError("abs_mode off (signed difference) requires the identity measuring function")
    fX = batch_forward(mats, acts, X.points)[..., 0]
    fG = batch_forward(mats, acts, G)[..., 0]
    bracket = phi(fX) @ X.weights + phi(1.0 - fG) @ z.weights
    sgn = np.where(bracket >= 0, 1.0, -1.0)
    val = np.abs(bracket) - 2.0 * float(phi(0.5))
    cx = sgn[:, None] * phi.derivative(fX) * X.weights
    cg = -sgn[:, None] * phi.derivative(1.0 - fG) * z.weights
    _, gX = forward_backward(mats, acts, X.points, cx)
    _, gG = forward_backward(mats, acts, G, cg)
    return val, [a + b for a, b in zip(gX, gG)]


def _ascent_step(mats, grads, spec: NetworkSpec, step: float):
    out = []
    for M, g, bound in zip(mats, grads, spec.norm_bounds):
        gn = np.sqrt(np.sum(g * g, axis=(1, 2), keepdims=True))
        direction = np.where(gn > 0, g / np.where(gn > 0, gn, 1.0), 0.0)
        out.append(project_frobenius_ball_batch(M + step * bound * direction, bound))
    return out


def _pgd_sup(fspec, gspec, theta, phi, data, abs_mode, opts: SearchOptions, rng, warm=None):
    G = push(gspec, theta, data.z.points)
    R = opts.restarts
    mats = sample_weights_batch(fspec, rng, R)
    if warm is not None:
        for M, W in zip(mats, warm):
            M[0] = W
    best_val = np.full(R, -np.inf)
    best = [M.copy() for M in mats]
    history = []
    step = opts.step
    for it in range(opts.iterations + 1):
        val, grads = _value_and_grad(fspec, phi, abs_mode, mats, data.x, G, data.z)
        if not np.all(np.isfinite(val)):
            raise NumericalError("objective evaluated to a non-finite value during ascent")
        better = val > best_val
        best_val = np.where(better, val, best_val)
        for B, M in zip(best, mats):
            B[better] = M[better]
        history.append(best_val.max())
        if it == opts.iterations:
            break
        mats = _ascent_step(mats, grads, fspec, step)
        step *= opts.decay
    r = int(np.argmax(best_val))
    w = WeightAssignment([B[r] for B in best])
    window = min(50, len(history) - 1)
    converged = bool(history[-1] - history[-1 - window] <= 1e-9 * (1.0 + abs(history[-1])))
    # re-evaluate at the returned point so value and weights agree exactly
    value = float(objective_table(fspec, gspec, phi, data, w.batched(), theta.batched(), abs_mode)[0, 0])
    diag = {"restarts": R, "iterations": opts.iterations, "best_restart": r, "converged": converged}
    return SupResult(value, w, "pgd", diag)


# --------------------------------------------------------------- sup / inf


def sup_over_w(fspec, gspec, theta: WeightAssignment, phi: MeasuringFunction,
               data: ObjectiveData, method: str = "pgd", options: SearchOptions | None = None,
               abs_mode: bool = True, rng: np.random.Generator | None = None,
               warm: WeightAssignment | None = None) -> SupResult:
    """Largest objective over the discriminator ball at fixed ``theta``.

    The returned value is attained at ``argmax_weights`` and so is a lower
    bound on the true supremum.
    """
    opts = options or SearchOptions()
    fspec.require_discriminator()
    theta.validate(gspec)
    if method == "grid":
        wmats = parameter_grid(fspec, opts.grid_points, opts.grid_cap)
        row = objective_table(fspec, gspec, phi, data, wmats, theta.batched(), abs_mode,
                              wkey=(opts.grid_points,))[0]
        idx = int(np.argmax(row))
        diag = {"grid_size": row.size, "grid_points": opts.grid_points, "best_index": idx}
        return SupResult(float(row[idx]), _weights_at(wmats, idx), "grid", diag)
    if method == "pgd":
        rng = rng if rng is not None else np.random.default_rng(opts.seed)
        return _pgd_sup(fspec, gspec, theta, phi, data, abs_mode, opts, rng,
                        warm.batched() if warm is not None else None)
    raise ValueError(f"method must be 'grid' or 'pgd', got {method!r}")


def distance(fspec, gspec, theta, phi, data, method="pgd", options=None, abs_mode=True, rng=None) -> float:
    return sup_over_w(fspec, gspec, theta, phi, data, method, options, abs_mode, rng).value


def distance_curve(fspec, gspec, phi, data: ObjectiveData, options: SearchOptions | None = None,
                   abs_mode: bool = True, sup_method: str = "grid",
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """``sup_w`` objective at every point of the theta grid."""
    opts = options or SearchOptions()
    tmats = parameter_grid(gspec, opts.theta_grid_points, opts.grid_cap)
    if sup_method == "grid":
        wmats = parameter_grid(fspec, opts.grid_points, opts.grid_cap)
        table = objective_table(fspec, gspec, phi, data, wmats, tmats, abs_mode,
                                wkey=(opts.grid_points,), tkey=(opts.theta_grid_points,))
        return table.max(axis=1)
    rng = rng if rng is not None else np.random.default_rng(opts.seed)
    out = np.empty(tmats[0].shape[0])
    for t in range(out.size):
        out[t] = _pgd_sup(fspec, gspec, _weights_at(tmats, t), phi, data, abs_mode, opts, rng).value
    return out


def select_min(curve: np.ndarray, epsilon_slack: float = 0.0) -> int:
    """First grid index whose value is within ``epsilon_slack`` of the minimum."""
    lo = curve.min()
    return int(np.flatnonzero(curve <= lo + epsilon_slack)[0])


def inf_over_theta(fspec, gspec, phi, data: ObjectiveData, method: str = "grid",
                   options: SearchOptions | None = None, abs_mode: bool = True,
                   sup_method: str | None = None, epsilon_slack: float = 0.0,
                   rng: np.random.Generator | None = None) -> InfResult:
    """Minimize the sup-distance over the generator ball.

    ``grid`` evaluates the distance on the theta grid and returns the first
    point within ``epsilon_slack`` of the grid minimum. ``pgd`` alternates an
    inner ascent in w with a projected subgradient descent step in theta.
    """
    opts = options or SearchOptions()
    sup_method = sup_method or method
    rng = rng if rng is not None else np.random.default_rng(opts.seed)
    if method == "grid":
        tmats = parameter_grid(gspec, opts.theta_grid_points, opts.grid_cap)
        curve = distance_curve(fspec, gspec, phi, data, opts, abs_mode, sup_method, rng)
        idx = select_min(curve, epsilon_slack)
        return InfResult(_weights_at(tmats, idx), float(curve[idx]), "grid", idx, curve,
                         {"theta_grid_points": opts.theta_grid_points, "sup_method": sup_method})
    if method == "pgd":
        return _pgd_inf(fspec, gspec, phi, data, opts, abs_mode, sup_method, epsilon_slack, rng)
    raise ValueError(f"method must be 'grid' or 'pgd', got {method!r}")


def _theta_grad(fspec, gspec, phi, abs_mode, theta: WeightAssignment, w: WeightAssignment,
                data: ObjectiveData):
    """Subgradient of the objective in theta at the inner maximizer ``w``."""
    cspec = compose_specs(fspec, gspec)
    mats = theta.batched() + w.batched()
    z = data.z
    s = gspec.depth
    fx = batch_forward(w.batched(), fspec.activations, data.x.points)[0, :, 0]
    fg = batch_forward(mats, cspec.activations, z.points)[0, :, 0]
    if phi.is_identity:
        AX, AG = fx @ data.x.weights, fg @ z.weights
        if abs_mode:
            sgn = 1.0 if z.mass - AG + AX >= 0 else -1.0
            coef = -sgn * z.weights
        else:
            coef = z.weights
    else:
        bracket = phi(fx) @ data.x.weights + phi(1.0 - fg) @ z.weights
        sgn = 1.0 if bracket >= 0 else -1.0
        coef = -sgn * phi.derivative(1.0 - fg) * z.weights
    _, grads = forward_backward(mats, cspec.activations, z.points, coef[None, :])
    return grads[:s]


def _pgd_inf(fspec, gspec, phi, data, opts, abs_mode, sup_method, epsilon_slack, rng):
    inner = replace(opts, restarts=opts.inf_restarts, iterations=opts.inf_inner_iterations)
    starts = sample_weights_batch(gspec, rng, opts.inf_restarts)
    best_theta, best_val = None, math.inf
    steps = 0
    for r in range(opts.inf_restarts):
        theta = WeightAssignment([M[r] for M in starts])
        warm = None
        step = opts.step
        for it in range(opts.inf_iterations):
            if sup_method == "grid":
                res = sup_over_w(fspec, gspec, theta, phi, data, "grid", opts, abs_mode)
            else:
                res = _pgd_sup(fspec, gspec, theta, phi, data, abs_mode, inner, rng,
                               warm.batched() if warm is not None else None)
            warm = res.argmax_weights
            steps += 1
            if res.value < best_val:
                best_val, best_theta = res.value, theta
            grads = _theta_grad(fspec, gspec, phi, abs_mode, theta, warm, data)
            mats = [-g for g in grads]
            new = _ascent_step(theta.batched(), mats, gspec, step)
            theta = WeightAssignment([M[0] for M in new])
            step *= opts.decay
    return InfResult(best_theta, float(best_val), "pgd", None, None,
                     {"restarts": opts.inf_restarts, "iterations": opts.inf_iterations,
                      "sup_method": sup_method, "evaluations": steps,
                      "epsilon_slack": epsilon_slack})


# ------------------------------------------------------------- rademacher


def rademacher_estimate(points: np.ndarray, fspec: NetworkSpec, replicates: int,
                        method: str = "grid", rng: np.random.Generator | None = None,
                        gspec: NetworkSpec | None = None,
                        options: SearchOptions | None = None) -> float:
    """Monte Carlo estimate of ``E sup_w (2/n) sum_i tau_i f_w(x_i)``.

    With ``gspec`` the class is the composition ``f_w(g_theta(z))`` and the
    sup runs jointly over ``(theta, w)``; ``points`` are then latent samples.
    """
    if replicates < 1:
        raise ValueError("replicates must be >= 1")
    opts = options or SearchOptions()
    rng = rng if rng is not None else np.random.default_rng(opts.seed)
    spec = compose_specs(fspec, gspec) if gspec is not None else fspec
    spec.require_discriminator()
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = pts.shape[0]
    homogeneous_1d = pts.shape[1] == 1
    sups = np.empty(replicates)
    if method == "grid":
        wmats = parameter_grid(spec, opts.grid_points, opts.grid_cap)
        if homogeneous_1d:
            F = _disc_values(spec, wmats, np.array([[1.0], [-1.0]]))
            x = pts[:, 0]
            basis = np.stack([np.maximum(x, 0.0), np.maximum(-x, 0.0)], axis=1)
        else:
            F = _disc_values(spec, wmats, pts)
            basis = None
        for r in range(replicates):
            coef = rng.choice([-1.0, 1.0], size=n) * (2.0 / n)
            c = coef @ basis if basis is not None else coef
            sups[r] = (F @ c).max()
        return float(sups.mean())
    if method == "pgd":
        for r in range(replicates):
            coef = rng.choice([-1.0, 1.0], size=n) * (2.0 / n)
            meas = Measure.signed(pts, coef)
            if homogeneous_1d or spec.is_linear:
                meas = meas.compress(spec.is_linear)
            sups[r] = _pgd_linear_sup(spec, meas, opts, rng)
        return float(sups.mean())
    raise ValueError(f"method must be 'grid' or 'pgd', got {method!r}")


def _pgd_linear_sup(spec: NetworkSpec, meas: Measure, opts: SearchOptions, rng) -> float:
    R = opts.restarts
    mats = sample_weights_batch(spec, rng, R)
    coef = np.broadcast_to(meas.weights, (R, meas.weights.size))
    best = -np.inf
    step = opts.step
    for it in range(opts.iterations + 1):
        f, grads = forward_backward(mats, spec.activations, meas.points, coef)
        best = max(best, float((f @ meas.weights).max()))
        mats = _ascent_step(mats, grads, spec, step)
        step *= opts.decay
    return best
