"""Moment estimation, exact small-sample Wasserstein-2, deterministic
quadrature references, and the invariant-bias step-size sweep.

The sweep measures stationary moments of a scheme at several step sizes
against the h-independent reference and fits the log-log order of the bias.
Two estimators are available:

* ``plain``   - ensemble time averages with replica batch means.
* ``coupled`` - the same chain is synchronously coupled (shared noise) to
  the exactly solvable linear chain obtained by replacing grad G with its
  linearisation at the origin; only the difference of the observables is
  estimated by Monte Carlo, and the linear chain's stationary moments are
  added back exactly (a 2x2 discrete Lyapunov solve per dimension).  The
  difference process has a variance two orders of magnitude below the plain
  observable, which is what makes small-h bias points resolvable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from .coupling import contraction_constants
from .harmonic import CoeffSet, compute_coeffs
from .potential import PotentialModel, u_value
from .samplers import NumericalAbort, Scheme, stream_generator

Array = np.ndarray


# ---------------------------------------------------------------------------
# moment ids

def _parse_moment(moment: str) -> tuple[tuple[str, int], ...]:
    """'x1^2' -> ((x,0),(x,0)); 'x1*v2' -> ((x,0),(v,1)); 'x1' -> ((x,0),)."""
    if "^2" in moment:
        base = moment.replace("^2", "")
        factors = (base, base)
    elif "*" in moment:
        factors = tuple(moment.split("*"))
    else:
        factors = (moment,)
    if len(factors) > 2:
        raise ValueError(f"cannot parse moment id {moment!r}")
    parsed = []
    for f in factors:
        kind, idx = f[0], f[1:]
        if kind not in ("x", "v") or not idx.isdigit() or int(idx) < 1:
            raise ValueError(f"cannot parse moment id {moment!r}")
        parsed.append((kind, int(idx) - 1))
    return tuple(parsed)


def _eval_moment(parsed, xs: Array, vs: Array) -> Array:
    out = None
    for kind, idx in parsed:
        col = xs[..., idx] if kind == "x" else vs[..., idx]
        out = col if out is None else out * col
    return out


DEFAULT_MOMENTS = ("x1^2", "x2^2", "v1^2", "x1*v1")


# ---------------------------------------------------------------------------
# reference moments by tensor quadrature

_QUAD_ORDERS = (128, 256)


def _position_moments(model: PotentialModel, order: int) -> dict[str, float]:
    nodes, weights = np.polynomial.legendre.leggauss(order)
    half_width = 10.0 / math.sqrt(model.kappa)
    nodes = nodes * half_width
    weights = weights * half_width
    x1, x2 = np.meshgrid(nodes, nodes, indexing="ij")
    w2d = np.outer(weights, weights)
    pts = np.stack([x1, x2], axis=-1)
    dens = w2d * np.exp(-u_value(model, pts))
    z = dens.sum()
    return {
        "x1": float((dens * x1).sum() / z),
        "x2": float((dens * x2).sum() / z),
        "x1^2": float((dens * x1 * x1).sum() / z),
        "x2^2": float((dens * x2 * x2).sum() / z),
        "x1*x2": float((dens * x1 * x2).sum() / z),
    }


def reference_moments(model: PotentialModel, tol: float = 1e-10) -> dict[str, float]:
    """Exact moments of the target measure for d = 2 models.

    Position moments come from a Gauss-Legendre tensor grid over
    [-L, L]^2, L = 10/sqrt(kappa), at two resolutions that must agree to
    ``tol``.  The velocity factor of the target is standard normal and
    independent of position, so velocity and cross moments are exact.
    """
    if model.d != 2:
        raise ValueError("quadrature reference implemented for d = 2 only")
    coarse = _position_moments(model, _QUAD_ORDERS[0])
    fine = _position_moments(model, _QUAD_ORDERS[1])
    for key, val in fine.items():
        if abs(val - coarse[key]) > tol:
            raise RuntimeError(
                f"quadrature not converged for {key}: {coarse[key]!r} vs {val!r}")
    fine.update({"v1": 0.0, "v2": 0.0, "v1^2": 1.0, "v2^2": 1.0,
                 "v1*v2": 0.0, "x1*v1": 0.0, "x1*v2": 0.0,
                 "x2*v1": 0.0, "x2*v2": 0.0})
    return fine


# ---------------------------------------------------------------------------
# batch-mean moment estimates

@dataclass(frozen=True)
class MomentReport:
    moment: str
    estimate: float
    se: float
    n_batches: int
    n_samples: int


def estimate_moments(xs: Array, vs: Array, burn_in: int,
                     moments: tuple[str, ...] = DEFAULT_MOMENTS,
                     n_batches: int = 32) -> list[MomentReport]:
    """Post-burn-in batch-mean estimates with standard errors.

    Requires at least 1000 post-burn-in samples and n_batches >= 20.
    """
    xs = np.asarray(xs, dtype=float)
    vs = np.asarray(vs, dtype=float)
    if n_batches < 20:
        raise ValueError("need at least 20 batches for batch-mean errors")
    n_post = xs.shape[0] - burn_in
    if n_post < 1000 + 1:
        raise ValueError(f"need more than burn_in + 1000 samples, have {xs.shape[0]}")
    per = n_post // n_batches
    used = burn_in + per * n_batches
    xs_b = xs[burn_in:used].reshape(n_batches, per, -1)
    vs_b = vs[burn_in:used].reshape(n_batches, per, -1)
    out = []
    for moment in moments:
        parsed = _parse_moment(moment)
        batch_means = _eval_moment(parsed, xs_b, vs_b).mean(axis=1)
        est = float(batch_means.mean())
        se = float(batch_means.std(ddof=1) / math.sqrt(n_batches))
        out.append(MomentReport(moment=moment, estimate=est, se=se,
                                n_batches=n_batches, n_samples=per * n_batches))
    return out


# ---------------------------------------------------------------------------
# exact empirical Wasserstein-2

MAX_ASSIGNMENT_N = 2048
ALLOWED_DIMS = (1, 2, 4)


def wasserstein2_exact(sample_a: Array, sample_b: Array) -> float:
    """W2 between equal-size empirical measures by exact optimal assignment.

    One-dimensional inputs use the sorting characterisation (exact,
    O(n log n)); otherwise the squared-distance assignment problem is solved
    exactly (cubic cost, n capped at 2048).
    """
    a = np.asarray(sample_a, dtype=float)
    b = np.asarray(sample_b, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if b.ndim == 1:
        b = b[:, None]
    if a.shape != b.shape:
        raise ValueError(f"sample shapes differ: {a.shape} vs {b.shape}")
    n, m = a.shape
    if m not in ALLOWED_DIMS:
        raise ValueError(f"dimension {m} unsupported; expected one of {ALLOWED_DIMS}")
    if n > MAX_ASSIGNMENT_N:
        raise ValueError(f"sample size {n} exceeds the exact-assignment cap {MAX_ASSIGNMENT_N}")
    if m == 1:
        diff = np.sort(a[:, 0]) - np.sort(b[:, 0])
        return float(np.sqrt(np.mean(diff**2)))
    cost = cdist(a, b, metric="sqeuclidean")
    rows, cols = linear_sum_assignment(cost)
    return float(np.sqrt(cost[rows, cols].mean()))


# ---------------------------------------------------------------------------
# exact stationary moments of linear-kick chains

def _stationary_cov(m: Array, q: Array) -> Array:
    s = np.linalg.solve(np.eye(4) - np.kron(m, m), q.reshape(-1))
    return s.reshape(2, 2)


def linear_chain_cov(k: float, g: float, gamma: float, h: float, scheme: Scheme) -> Array:
    """Exact stationary covariance of one coordinate of a scheme whose kick
    gradient is linear, grad G(x) = g x (discrete Lyapunov solve)."""
    scheme = Scheme(scheme)
    coeffs = compute_coeffs(k, gamma, h)
    a, b = coeffs.a_mat, coeffs.b_mat
    if scheme is Scheme.PG:
        kick = np.array([[1.0, 0.0], [-g * h, 1.0]])
        m = kick @ a
        q = kick @ (b @ b.T) @ kick.T
    elif scheme is Scheme.PGP:
        half = np.array([[1.0, 0.0], [-0.5 * g * h, 1.0]])
        m = half @ a @ half
        q = half @ (b @ b.T) @ half.T
    else:
        eta = math.exp(-0.5 * gamma * h)
        sig = math.sqrt(-math.expm1(-gamma * h))
        o = np.array([[1.0, 0.0], [0.0, eta]])
        kick = np.array([[1.0, 0.0], [-0.5 * h * (k + g), 1.0]])
        drift = np.array([[1.0, h], [0.0, 1.0]])
        m = o @ kick @ drift @ kick @ o
        u = o @ kick @ drift @ kick @ np.array([0.0, sig])
        q = np.outer(u, u) + np.outer([0.0, sig], [0.0, sig])
    return _stationary_cov(m, q)


def linear_chain_moment(model: PotentialModel, gamma: float, h: float,
                        scheme: Scheme, moment: str) -> float:
    """Stationary moment of the linearised companion chain (kick gradient
    replaced by hess_g0 * x).  Odd moments and cross-dimension moments are
    exactly zero by symmetry/independence."""
    if model.hess_g0 is None:
        raise ValueError(f"model {model.name!r} has no quadratic companion (hess_g0)")
    parsed = _parse_moment(moment)
    if len(parsed) == 1:
        return 0.0
    (k1, i1), (k2, i2) = parsed
    if i1 != i2:
        return 0.0
    cov = linear_chain_cov(float(model.k[i1]), float(model.hess_g0[i1]), gamma, h, scheme)
    row = 0 if k1 == "x" else 1
    col = 0 if k2 == "x" else 1
    return float(cov[row, col])


# ---------------------------------------------------------------------------
# bias sweep

@dataclass(frozen=True)
class BiasSweepRow:
    h: float
    scheme: str
    moment: str
    estimate: float
    reference: float
    abs_bias: float
    se: float
    used: bool


@dataclass(frozen=True)
class OrderFit:
    scheme: str
    moment: str
    slope: float
    slope_se: float
    r_squared: float
    n_used: int
    conclusive: bool
    used_h: tuple[float, ...]


@dataclass
class BiasSweepResult:
    rows: list[BiasSweepRow]
    fits: dict[tuple[str, str], OrderFit]
    meta: dict = field(default_factory=dict)

    def fit(self, scheme: str, moment: str) -> OrderFit:
        return self.fits[(Scheme(scheme).value, moment)]


def _cell_loop(model: PotentialModel, scheme: Scheme, gamma: float, h: float,
               gen: np.random.Generator, moments, coupled: bool,
               replicas: int, burn: int, cap: int, target_se: float,
               budget_idx: int, segment: int,
               abandon_factor: float) -> tuple[Array, Array, int]:
    """Run one (scheme, h) cell; returns (estimates, ses, post_burn_steps).

    Accumulates every observable in one pass.  In coupled mode a linear-kick
    companion chain shares the noise and only observable differences are
    accumulated.  Runs in segments until the budget moment's standard error
    reaches ``target_se``, the per-replica cap is exhausted, or the
    projected need exceeds ``abandon_factor`` times the cap.
    """
    d = model.d
    parsed = [_parse_moment(m) for m in moments]
    coeffs = CoeffSet.for_model(model, gamma, h)
    a11, a12, a21, a22 = coeffs.a11, coeffs.a12, coeffs.a21, coeffs.a22
    b11, b12, b21, b22 = coeffs.b11, coeffs.b12, coeffs.b21, coeffs.b22
    grad = model.grad_g
    g_lin = model.hess_g0 if coupled else None
    eta = math.exp(-0.5 * gamma * h)
    sig = math.sqrt(-math.expm1(-gamma * h))

    x = np.zeros((replicas, d)); v = np.zeros((replicas, d))
    xq = np.zeros((replicas, d)); vq = np.zeros((replicas, d))
    acc = np.zeros((len(moments), replicas))
    count = 0

    def advance(x, v, grad_fn, block):
        xi = block[:, :d]; ze = block[:, d:]
        if scheme is Scheme.PGP:
            v = v - (0.5 * h) * grad_fn(x)
            xg = a11 * x + a12 * v + b11 * xi + b12 * ze
            v = a21 * x + a22 * v + b21 * xi + b22 * ze
            return xg, v - (0.5 * h) * grad_fn(xg)
        if scheme is Scheme.PG:
            xg = a11 * x + a12 * v + b11 * xi + b12 * ze
            v = a21 * x + a22 * v + b21 * xi + b22 * ze
            return xg, v - h * grad_fn(xg)
        v = eta * v + sig * xi
        v = v - (0.5 * h) * (model.k * x + grad_fn(x))
        x = x + h * v
        v = v - (0.5 * h) * (model.k * x + grad_fn(x))
        return x, eta * v + sig * ze

    def grad_companion(y):
        return g_lin * y

    steps_done = 0
    while True:
        span = burn - steps_done if steps_done < burn else min(segment, burn + cap - steps_done)
        for _ in range(span):
            block = gen.standard_normal((replicas, 2 * d))
            x, v = advance(x, v, grad, block)
            if coupled:
                # companion uses grad_u with g replaced by its linearisation
                xq, vq = advance(xq, vq, grad_companion, block)
            steps_done += 1
            if steps_done > burn:
                for i, p in enumerate(parsed):
                    val = _eval_moment(p, x, v)
                    if coupled:
                        val = val - _eval_moment(p, xq, vq)
                    acc[i] += val
                count += 1
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(v)):
            raise NumericalAbort(steps_done)
        if count == 0:
            continue
        means = acc / count
        se_budget = float(means[budget_idx].std(ddof=1)) / math.sqrt(replicas)
        post = steps_done - burn
        if target_se > 0 and se_budget <= target_se:
            break
        if post >= cap:
            break
        if target_se > 0 and post >= cap // 4:
            projected = post * (se_budget / target_se) ** 2
            if projected > abandon_factor * cap:
                break
    means = acc / count
    ses = means.std(axis=1, ddof=1) / math.sqrt(replicas)
    return means.mean(axis=1), ses, count


def _weighted_order_fit(scheme: str, moment: str, hs, biases, ses) -> OrderFit:
    used = [(h, b, s) for h, b, s in zip(hs, biases, ses)
            if b > 5.0 * s and b > 1e-12]
    if len(used) < 2:
        return OrderFit(scheme=scheme, moment=moment, slope=float("nan"),
                        slope_se=float("nan"), r_squared=float("nan"),
                        n_used=len(used), conclusive=False,
                        used_h=tuple(h for h, _, _ in used))
    xs = np.log([h for h, _, _ in used])
    ys = np.log([b for _, b, _ in used])
    ws = np.array([(b / s) ** 2 if s > 0 else 1e30 for _, b, s in used])
    xbar = np.sum(ws * xs) / ws.sum()
    ybar = np.sum(ws * ys) / ws.sum()
    sxx = np.sum(ws * (xs - xbar) ** 2)
    slope = float(np.sum(ws * (xs - xbar) * (ys - ybar)) / sxx)
    slope_se = float(1.0 / math.sqrt(sxx))
    resid = ys - (ybar + slope * (xs - xbar))
    ss_res = float(np.sum(ws * resid**2))
    ss_tot = float(np.sum(ws * (ys - ybar) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return OrderFit(scheme=scheme, moment=moment, slope=slope, slope_se=slope_se,
                    r_squared=r2, n_used=len(used), conclusive=True,
                    used_h=tuple(h for h, _, _ in used))


def bias_sweep(model: PotentialModel, schemes, gamma: float, h_list, steps: int,
               seed: int, moments: tuple[str, ...] = DEFAULT_MOMENTS,
               estimator: str = "coupled", replicas: int = 1024,
               budget_moment: str = "x1*v1", se_target_factor: float = 10.0,
               min_cell_steps: int = 2_000_000, segment: int = 20_000,
               abandon_factor: float = 4.0) -> BiasSweepResult:
    """Stationary-moment bias versus the quadrature reference over a step
    grid, with per-scheme log-log order fits.

    ``steps`` caps the post-burn-in replica-steps spent per (scheme, h)
    cell.  Cells stop early once the ``budget_moment`` standard error
    reaches (predicted bias)/se_target_factor, with the prediction taken
    from the linear companion chain; the prediction only allocates effort
    and never enters any estimate.  A bias point is *used* for the order
    fit when it exceeds five of its standard errors; fewer than two used
    points makes that fit inconclusive rather than an order claim.
    """
    if replicas < 20:
        raise ValueError("need >= 20 replicas (they are the error batches)")
    h_list = [float(h) for h in h_list]
    if len(h_list) < 2:
        raise ValueError("need at least two step sizes")
    if estimator not in ("plain", "coupled"):
        raise ValueError(f"unknown estimator {estimator!r}")
    coupled = estimator == "coupled"
    if coupled and model.hess_g0 is None:
        raise ValueError("coupled estimator requires a model with hess_g0")
    schemes = [Scheme(s) for s in schemes]
    if budget_moment not in moments:
        moments = tuple(moments) + (budget_moment,)
    budget_idx = list(moments).index(budget_moment)
    reference = reference_moments(model)
    c_rate = contraction_constants(model.kappa, gamma, model.l_k).c

    rows: list[BiasSweepRow] = []
    cell_meta = []
    per_cell = {}
    for cell_index, (scheme, h) in enumerate((s, h) for s in schemes for h in h_list):
        gen = stream_generator(seed, cell_index)
        burn = math.ceil(10.0 / (c_rate * h))
        pred = abs(linear_chain_moment(model, gamma, h, scheme, budget_moment)
                   - reference[budget_moment]) if model.hess_g0 is not None else 0.0
        target = pred / se_target_factor if pred > 1e-15 else 0.0
        # with a target the floor guarantees a sane minimum before SE checks;
        # without one (no predicted bias) the requested cap is spent as-is
        cap = max(steps // replicas, 1) if target == 0.0 \
            else max(steps // replicas, min_cell_steps // replicas, 1)
        est, ses, post = _cell_loop(model, scheme, gamma, h, gen, moments,
                                    coupled, replicas, burn, cap, target,
                                    budget_idx, segment, abandon_factor)
        if coupled:
            est = est + np.array([linear_chain_moment(model, gamma, h, scheme, m)
                                  for m in moments])
        for i, m in enumerate(moments):
            bias = abs(est[i] - reference[m])
            rows.append(BiasSweepRow(
                h=h, scheme=scheme.value, moment=m, estimate=float(est[i]),
                reference=reference[m], abs_bias=float(bias), se=float(ses[i]),
                used=bool(bias > 5.0 * ses[i] and bias > 1e-12)))
            per_cell[(scheme.value, h, m)] = (bias, float(ses[i]))
        cell_meta.append({"scheme": scheme.value, "h": h, "burn_in": burn,
                          "post_burn_steps_per_replica": post,
                          "replica_steps": post * replicas})

    fits = {}
    for scheme in schemes:
        for m in moments:
            biases = [per_cell[(scheme.value, h, m)][0] for h in h_list]
            ses = [per_cell[(scheme.value, h, m)][1] for h in h_list]
            fits[(scheme.value, m)] = _weighted_order_fit(scheme.value, m,
                                                          h_list, biases, ses)
    meta = {"estimator": estimator, "replicas": replicas,
            "budget_moment": budget_moment, "cells": cell_meta,
            "gamma": gamma, "seed": seed, "model": model.name}
    return BiasSweepResult(rows=rows, fits=fits, meta=meta)
